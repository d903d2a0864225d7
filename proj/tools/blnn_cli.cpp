// blnn: command-line front end.
//
//   blnn synth  --out DIR [--nodes --classes --p-intra --p-inter --dim --sep --noise --seed]
//   blnn stats  --data DIR
//   blnn train  --data DIR --out DIR [--config FILE --variant --tau --seed --epochs ...]
//   blnn embed  --checkpoint FILE --data DIR --out FILE
//   blnn eval   --embeddings FILE --data DIR [--k 5,10 --splits 20 --out FILE]
//   blnn ablate --data DIR [--config FILE --tau --seeds --epochs --out FILE]
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numeric failure (NaN watchdog).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blnn/blnn.hpp"

namespace fs = std::filesystem;
using namespace blnn;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return {m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
}

const Labels& require_labels(const Dataset& d, const std::string& what) {
    if (!d.labels) throw ValidationError(what + " needs a labeled dataset (labels.txt missing)");
    return *d.labels;
}

// ------------------------------------------------------------------ synth

struct SynthOpts {
    SbmConfig sbm;
    std::string out;
};

int run_synth(const SynthOpts& o) {
    const SbmResult r = generate_sbm(o.sbm);
    if (r.warning) std::cerr << "warning: " << *r.warning << '\n';
    save_graph(o.out, r.graph, r.labels);
    std::cout << "wrote " << o.out << ": " << r.graph.n_nodes() << " nodes, " << r.graph.n_undirected_edges()
              << " undirected edges, homophily " << fixed(edge_homophily(r.graph, r.labels)) << '\n';
    return kOk;
}

// ------------------------------------------------------------------ stats

int run_stats(const std::string& data) {
    const Dataset d = load_graph(data);
    const Labels& labels = require_labels(d, "stats");
    const double h = edge_homophily(d.graph, labels);
    std::cout << "n_nodes " << d.graph.n_nodes() << '\n'
              << "n_edges_undirected " << d.graph.n_undirected_edges() << '\n'
              << "n_edges_directed " << d.graph.n_edges() << '\n'
              << "n_features " << d.graph.n_features() << '\n'
              << "n_classes " << labels.n_classes << '\n'
              << "homophily " << fixed(h) << " (" << fixed(100.0 * h, 2) << "%)\n";
    return kOk;
}

// ------------------------------------------------------------------ train

struct TrainOpts {
    std::string data, config, out;
    std::optional<std::string> variant;
    std::optional<double> tau, lr;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs, eval_every;
};

TrainConfig build_config(const std::string& config_path, const std::optional<std::string>& variant,
                         const std::optional<double>& tau, const std::optional<std::uint64_t>& seed,
                         const std::optional<std::size_t>& epochs, const std::optional<double>& lr = std::nullopt,
                         const std::optional<std::size_t>& eval_every = std::nullopt) {
    TrainConfig cfg;
    if (!config_path.empty()) apply_config(load_config_file(config_path), cfg);
    // Command-line flags take precedence over the config file.
    if (variant) cfg.loss.variant = parse_variant(*variant);
    if (tau) cfg.loss.tau = *tau;
    if (seed) cfg.seed = *seed;
    if (epochs) cfg.epochs = *epochs;
    if (lr) cfg.lr = *lr;
    if (eval_every) cfg.eval_every = *eval_every;
    cfg.validate();
    return cfg;
}

int run_train(const TrainOpts& o) {
    const TrainConfig cfg = build_config(o.config, o.variant, o.tau, o.seed, o.epochs, o.lr, o.eval_every);
    const Dataset d = load_graph(o.data);
    const Labels* labels = d.labels ? &*d.labels : nullptr;
    if (cfg.loss.variant == Variant::bgrl_clean && !labels)
        throw ConfigError("variant bgrl_clean needs labels, but " + o.data + " has no labels.txt");

    fs::create_directories(o.out);
    TrainResult r = train(d.graph, labels, cfg, [](const LogRow& row) {
        if (row.probe_accuracy)
            std::cerr << "epoch " << row.epoch + 1 << " loss " << fixed(row.loss) << " probe accuracy "
                      << fixed(*row.probe_accuracy) << '\n';
    });

    save_checkpoint(fs::path(o.out) / "model.ckpt", r.state);
    {
        std::ofstream log(fs::path(o.out) / "train_log.csv");
        write_log_csv(log, r.log);
    }
    write_matrix_csv(fs::path(o.out) / "embeddings.csv", embed(r.state, d.graph));
    if (r.best) write_matrix_csv(fs::path(o.out) / "best_embeddings.csv", r.best->embeddings);

    const LogRow& last = r.log.back();
    std::cout << "variant " << to_string(cfg.loss.variant) << ", " << cfg.epochs << " epochs, final loss "
              << fixed(last.loss) << " (node " << fixed(last.loss_node_term) << ", neighbor "
              << fixed(last.loss_neighbor_term) << ")\n";
    if (r.best)
        std::cout << "best probe accuracy " << fixed(r.best->accuracy) << " at epoch " << r.best->epoch + 1 << '\n';
    std::cout << "wrote " << o.out << "/{model.ckpt,train_log.csv,embeddings.csv"
              << (r.best ? ",best_embeddings.csv" : "") << "}\n";
    return kOk;
}

// ------------------------------------------------------------------ embed

int run_embed(const std::string& checkpoint, const std::string& data, const std::string& out) {
    const EncoderState s = load_checkpoint(checkpoint);
    const Dataset d = load_graph(data);
    if (d.graph.n_features() != s.arch.in_dim)
        throw ValidationError("checkpoint expects " + std::to_string(s.arch.in_dim) + " features, " + data + " has " +
                              std::to_string(d.graph.n_features()));
    const Matrix h = embed(s, d.graph);
    write_matrix_csv(out, h);
    std::cout << "wrote " << h.rows() << " x " << h.cols() << " embeddings to " << out << '\n';
    return kOk;
}

// ------------------------------------------------------------------ eval

struct EvalOpts {
    std::string embeddings, data, out;
    std::vector<std::size_t> ks{5, 10};
    std::size_t splits = 20;
    bool literal_compactness = false;
    int restarts = 10;
};

int run_eval(const EvalOpts& o) {
    const Dataset d = load_graph(o.data);
    const Labels& labels = require_labels(d, "eval");
    const Matrix h = read_matrix_csv(o.embeddings);
    if (h.rows() != d.graph.n_nodes())
        throw ValidationError(o.embeddings + " has " + std::to_string(h.rows()) + " rows, dataset has " +
                              std::to_string(d.graph.n_nodes()) + " nodes");
    if (o.splits == 0) throw UsageError("--splits must be at least 1");

    EvalOptions opt;
    opt.ks = o.ks;
    opt.compactness_paper_literal = o.literal_compactness;
    opt.kmeans_restarts = o.restarts;
    std::vector<std::uint64_t> seeds(o.splits);
    for (std::size_t s = 0; s < o.splits; ++s) seeds[s] = s;
    const auto reports = evaluate_embeddings(h, labels, seeds, opt);

    std::vector<std::pair<std::string, std::vector<double>>> metrics{
        {"accuracy", {}}, {"nmi", {}}, {"homogeneity", {}}};
    for (std::size_t k : o.ks) metrics.push_back({"s@" + std::to_string(k), {}});
    metrics.push_back({"compactness", {}});
    for (const auto& r : reports) {
        metrics[0].second.push_back(r.accuracy);
        metrics[1].second.push_back(r.nmi);
        metrics[2].second.push_back(r.homogeneity);
        for (std::size_t q = 0; q < o.ks.size(); ++q) metrics[3 + q].second.push_back(r.s_at_k.at(o.ks[q]));
        metrics.back().second.push_back(r.compactness);
    }

    if (!o.out.empty()) {
        std::ofstream csv(o.out);
        if (!csv) throw std::runtime_error("cannot write " + o.out);
        csv << "metric,split_seed,value\n";
        for (const auto& [name, vals] : metrics)
            for (std::size_t s = 0; s < vals.size(); ++s)
                csv << name << ',' << reports[s].split_seed << ',' << detail::format_double(vals[s]) << '\n';
    }
    for (const auto& [name, vals] : metrics) {
        const auto [m, sd] = mean_std(vals);
        std::cout << name << ' ' << fixed(m) << " +- " << fixed(sd) << '\n';
    }
    return kOk;
}

// ------------------------------------------------------------------ ablate

struct AblateOpts {
    std::string data, config, out;
    std::optional<double> tau;
    std::optional<std::size_t> epochs;
    std::size_t seeds = 3;
    std::size_t splits = 5;
};

int run_ablate(const AblateOpts& o) {
    const Dataset d = load_graph(o.data);
    const Labels& labels = require_labels(d, "ablate");
    if (o.seeds == 0 || o.splits == 0) throw UsageError("--seeds and --splits must be at least 1");

    std::ofstream file;
    if (!o.out.empty()) {
        file.open(o.out);
        if (!file) throw std::runtime_error("cannot write " + o.out);
    }
    std::ostream& csv = o.out.empty() ? std::cout : file;
    csv << "variant,seed,accuracy,compactness,nmi,final_loss,loss_node_term,loss_neighbor_term\n";

    std::map<std::string, std::vector<double>> acc;
    for (const char* name : {"bgrl", "bgrl_noisy", "blnn", "bgrl_clean"}) {
        for (std::size_t seed = 0; seed < o.seeds; ++seed) {
            TrainConfig cfg = build_config(o.config, std::string(name), o.tau, seed, o.epochs);
            cfg.eval_every = 0;
            const TrainResult r = train(d.graph, &labels, cfg);
            const Matrix h = embed(r.state, d.graph);
            std::vector<std::uint64_t> split_seeds(o.splits);
            for (std::size_t s = 0; s < o.splits; ++s) split_seeds[s] = s;
            EvalOptions opt;
            opt.ks = {};
            const auto reports = evaluate_embeddings(h, labels, split_seeds, opt);
            double a = 0.0, nm = 0.0;
            for (const auto& rep : reports) {
                a += rep.accuracy / static_cast<double>(reports.size());
                nm += rep.nmi / static_cast<double>(reports.size());
            }
            acc[name].push_back(a);
            const LogRow& last = r.log.back();
            using detail::format_double;
            csv << name << ',' << seed << ',' << format_double(a) << ',' << format_double(reports[0].compactness)
                << ',' << format_double(nm) << ',' << format_double(last.loss) << ','
                << format_double(last.loss_node_term) << ',' << format_double(last.loss_neighbor_term) << '\n';
            csv.flush();
        }
    }
    for (const auto& [name, v] : acc) {
        const auto [m, sd] = mean_std(v);
        std::cerr << name << " accuracy " << fixed(100.0 * m, 2) << " +- " << fixed(100.0 * sd, 2) << '\n';
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BGRL / BLNN self-supervised graph representation learning"};
    app.require_subcommand(1);

    SynthOpts so;
    auto* synth = app.add_subcommand("synth", "Generate a stochastic block model graph directory");
    synth->add_option("--nodes", so.sbm.n_nodes, "Number of nodes")->capture_default_str();
    synth->add_option("--classes", so.sbm.n_classes, "Number of balanced classes")->capture_default_str();
    synth->add_option("--p-intra", so.sbm.p_intra, "Intra-class edge probability")->capture_default_str();
    synth->add_option("--p-inter", so.sbm.p_inter, "Inter-class edge probability")->capture_default_str();
    synth->add_option("--dim", so.sbm.feature_dim, "Feature dimension")->capture_default_str();
    synth->add_option("--sep", so.sbm.class_mean_separation, "Class mean separation")->capture_default_str();
    synth->add_option("--noise", so.sbm.noise_std, "Per-node feature noise std")->capture_default_str();
    synth->add_option("--seed", so.sbm.seed, "Random seed")->capture_default_str();
    synth->add_option("--out", so.out, "Output graph directory")->required();

    std::string stats_data;
    auto* stats = app.add_subcommand("stats", "Print node/edge counts and edge homophily");
    stats->add_option("--data", stats_data, "Graph directory")->required();

    TrainOpts to;
    auto* trn = app.add_subcommand("train", "Train an encoder; writes checkpoint, log and embeddings");
    trn->add_option("--data", to.data, "Graph directory")->required();
    trn->add_option("--out", to.out, "Output directory")->required();
    trn->add_option("--config", to.config, "key = value config file (flags override it)");
    trn->add_option("--variant", to.variant, "bgrl | blnn | bgrl_noisy | bgrl_clean");
    trn->add_option("--tau", to.tau, "Supportiveness temperature");
    trn->add_option("--seed", to.seed, "Random seed");
    trn->add_option("--epochs", to.epochs, "Training epochs");
    trn->add_option("--lr", to.lr, "Peak learning rate");
    trn->add_option("--eval-every", to.eval_every, "Probe snapshot interval (0 disables)");

    std::string ckpt, embed_data, embed_out;
    auto* emb = app.add_subcommand("embed", "Embed a graph with a saved checkpoint");
    emb->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
    emb->add_option("--data", embed_data, "Graph directory")->required();
    emb->add_option("--out", embed_out, "Output CSV")->required();

    EvalOpts eo;
    auto* ev = app.add_subcommand("eval", "Evaluate embeddings over random 1:1:8 splits");
    ev->add_option("--embeddings", eo.embeddings, "Embeddings CSV")->required();
    ev->add_option("--data", eo.data, "Labeled graph directory")->required();
    ev->add_option("--k", eo.ks, "Comma-separated S@k values")->delimiter(',')->capture_default_str();
    ev->add_option("--splits", eo.splits, "Number of split seeds")->capture_default_str();
    ev->add_option("--out", eo.out, "Report CSV (metric,split_seed,value)");
    ev->add_flag("--literal-compactness", eo.literal_compactness,
                 "Divide compactness by class size instead of pair count");
    ev->add_option("--kmeans-restarts", eo.restarts, "k-means restarts")->capture_default_str();

    AblateOpts ao;
    auto* abl = app.add_subcommand("ablate", "Train and compare bgrl, bgrl_noisy, blnn and bgrl_clean");
    abl->add_option("--data", ao.data, "Labeled graph directory")->required();
    abl->add_option("--config", ao.config, "key = value config file");
    abl->add_option("--tau", ao.tau, "Supportiveness temperature");
    abl->add_option("--seeds", ao.seeds, "Seeds 0..N-1 per variant")->capture_default_str();
    abl->add_option("--epochs", ao.epochs, "Training epochs");
    abl->add_option("--splits", ao.splits, "Probe splits per trained model")->capture_default_str();
    abl->add_option("--out", ao.out, "Output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
        return kUsage;
    }

    try {
        if (*synth) return run_synth(so);
        if (*stats) return run_stats(stats_data);
        if (*trn) return run_train(to);
        if (*emb) return run_embed(ckpt, embed_data, embed_out);
        if (*ev) return run_eval(eo);
        if (*abl) return run_ablate(ao);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}

#pragma once

// The training loop: augment, encode, score, predict, loss, AdamW step on
// the online encoder and predictor, EMA update of the target.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "blnn/augment.hpp"
#include "blnn/autodiff.hpp"
#include "blnn/bootstrap.hpp"
#include "blnn/encoder.hpp"
#include "blnn/errors.hpp"
#include "blnn/evaluation.hpp"
#include "blnn/graph.hpp"
#include "blnn/objective.hpp"
#include "blnn/random.hpp"

namespace blnn {

struct TrainConfig {
    std::size_t epochs = 2000;
    double lr = 5e-4;
    std::size_t warmup_epochs = 100;
    double weight_decay = 1e-5;
    std::uint64_t seed = 0;
    AugmentConfig augment;
    LossConfig loss;
    double ema_t_base = 0.99;
    std::size_t eval_every = 250;  ///< 0 disables evaluation snapshots
    std::size_t eval_splits = 3;   ///< probe splits averaged per snapshot
    // architecture
    std::size_t n_layers = 2;
    std::size_t hidden_dim = 256;
    std::size_t embed_dim = 128;
    std::size_t predictor_hidden = 512;
    bool batchnorm = true;
    double bn_momentum = 0.99;

    void validate() const {
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (!(lr >= 0.0)) throw ConfigError("lr must be nonnegative");
        if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
        if (!(ema_t_base >= 0.0 && ema_t_base <= 1.0)) throw ConfigError("ema_t_base must lie in [0, 1]");
        if (n_layers < 1 || hidden_dim == 0 || embed_dim == 0 || predictor_hidden == 0)
            throw ConfigError("architecture sizes must be positive");
        if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) throw ConfigError("bn_momentum must lie in [0, 1]");
        augment.validate();
        loss.validate();
    }

    Architecture architecture(std::size_t in_dim) const {
        Architecture a;
        a.in_dim = in_dim;
        a.layer_dims.assign(n_layers - 1, hidden_dim);
        a.layer_dims.push_back(embed_dim);
        a.predictor_hidden = predictor_hidden;
        a.batchnorm = batchnorm;
        a.bn_momentum = bn_momentum;
        return a;
    }
};

/// Linear warmup from 0 over warmup_epochs, then cosine decay to 0 at epochs.
inline double lr_at(const TrainConfig& cfg, std::size_t epoch) {
    if (epoch < cfg.warmup_epochs)
        return cfg.lr * static_cast<double>(epoch) / static_cast<double>(cfg.warmup_epochs);
    if (cfg.epochs <= cfg.warmup_epochs) return cfg.lr;
    const double x = static_cast<double>(epoch - cfg.warmup_epochs) / static_cast<double>(cfg.epochs - cfg.warmup_epochs);
    return cfg.lr * (1.0 + std::cos(std::numbers::pi * x)) / 2.0;
}

/// AdamW moments, aligned with the order of EncoderState::trainable().
struct OptimizerState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    std::size_t step = 0;
    std::vector<Matrix> m, v;
};

/// Decoupled weight decay (p *= 1 - lr wd, skipped for Parameter::decay ==
/// false) followed by the bias-corrected Adam update.
inline void adamw_step(OptimizerState& opt, std::span<Parameter* const> params, const ad::GradientMap& grads,
                       double lr_t) {
    if (opt.m.empty()) {
        for (const Parameter* p : params) {
            opt.m.emplace_back(p->value.rows(), p->value.cols());
            opt.v.emplace_back(p->value.rows(), p->value.cols());
        }
    }
    if (opt.m.size() != params.size()) throw DimensionError("adamw_step: parameter list changed between steps");
    ++opt.step;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = *params[k];
        const Matrix g = grads.at(p);
        if (!g.same_shape(p.value) || !opt.m[k].same_shape(p.value))
            throw DimensionError("adamw_step: shape mismatch for " + p.name);
        if (p.decay && opt.weight_decay != 0.0)
            for (double& w : p.value.data()) w *= 1.0 - lr_t * opt.weight_decay;
        auto& m = opt.m[k].data();
        auto& v = opt.v[k].data();
        for (std::size_t q = 0; q < m.size(); ++q) {
            const double gq = g.data()[q];
            m[q] = opt.beta1 * m[q] + (1.0 - opt.beta1) * gq;
            v[q] = opt.beta2 * v[q] + (1.0 - opt.beta2) * gq * gq;
            p.value.data()[q] -= lr_t * (m[q] / bc1) / (std::sqrt(v[q] / bc2) + opt.eps);
        }
    }
}

struct ForwardResult {
    LossTerms loss;
    std::vector<std::vector<ad::BatchStats>> online_stats;  ///< one entry per online pass, in order
    std::array<SupportScores, 2> scores;                     ///< per direction; empty for bgrl
};

/// Builds the (optionally symmetrized) loss for one pair of views on `tape`.
/// `fixed` replaces the computed support scores of each direction.
inline ForwardResult forward_loss(ad::Tape& tape, const EncoderState& s, const SparseGraph& view1,
                                  const SparseGraph& view2, const NeighborList& nbrs, const Labels* labels,
                                  const LossConfig& cfg, const std::array<SupportScores, 2>* fixed = nullptr) {
    const auto adj1 = std::make_shared<const SparseMatrix>(normalize_adjacency(view1));
    const auto adj2 = std::make_shared<const SparseMatrix>(normalize_adjacency(view2));
    const auto x1 = tape.constant(view1.features());
    const auto x2 = tape.constant(view2.features());
    const double floor = s.arch.bn_var_floor;
    ForwardResult out;

    auto direction = [&](const std::shared_ptr<const SparseMatrix>& a_on, const ad::Tensor& x_on,
                         const std::shared_ptr<const SparseMatrix>& a_tg, const ad::Tensor& x_tg, int d) {
        std::vector<ad::BatchStats> st;
        const auto h_online = gcn_forward(tape, s.online, Bind::trainable, a_on, x_on, BnMode::train, floor, &st);
        out.online_stats.push_back(std::move(st));
        const auto h_target =
            ad::detach(gcn_forward(tape, s.target, Bind::frozen, a_tg, x_tg, BnMode::train, floor, nullptr));
        const auto z = predictor_forward(tape, s.predictor, h_online);
        const SupportScores* f = fixed ? &(*fixed)[static_cast<std::size_t>(d)] : nullptr;
        return variant_loss(cfg, z, h_online, h_target, nbrs, labels, f, &out.scores[static_cast<std::size_t>(d)]);
    };

    LossTerms forward = direction(adj1, x1, adj2, x2, 0);
    if (!cfg.symmetric) {
        out.loss = forward;
        return out;
    }
    LossTerms backward = direction(adj2, x2, adj1, x1, 1);
    out.loss = symmetrize(forward, backward);
    return out;
}

struct LogRow {
    std::size_t epoch = 0;
    double loss = 0.0;
    double loss_node_term = 0.0;
    double loss_neighbor_term = 0.0;
    double lr = 0.0;
    double ema_decay = 0.0;
    std::optional<double> probe_accuracy;
};

struct Snapshot {
    std::size_t epoch = 0;
    double accuracy = 0.0;
    Matrix embeddings;
};

struct TrainResult {
    EncoderState state;
    std::vector<LogRow> log;
    std::optional<Snapshot> best;  ///< best evaluation snapshot by probe accuracy
};

/// Mean linear-probe test accuracy over split seeds 0..n_splits-1.
inline double mean_probe_accuracy(const Matrix& h, const Labels& labels, std::size_t n_splits) {
    double acc = 0.0;
    for (std::size_t s = 0; s < n_splits; ++s) acc += linear_probe(h, labels, random_splits(labels, s)).test_accuracy;
    return acc / static_cast<double>(n_splits);
}

using EpochCallback = std::function<void(const LogRow&)>;

/// Full-graph training for cfg.epochs epochs. Deterministic for a given
/// config and seed.
inline TrainResult train(const SparseGraph& g, const Labels* labels, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (cfg.loss.variant == Variant::bgrl_clean && !labels) throw ConfigError("variant bgrl_clean requires labels");
    if (labels && labels->size() != g.n_nodes()) throw ConfigError("label count does not match the graph");
    if (g.n_features() == 0) throw ConfigError("graph has no features");

    Rng init_rng = make_rng(cfg.seed, {0});
    TrainResult res{init_encoder(cfg.architecture(g.n_features()), init_rng), {}, std::nullopt};
    EncoderState& st = res.state;
    const NeighborList nbrs = neighbor_list(g);
    OptimizerState opt;
    opt.weight_decay = cfg.weight_decay;
    const auto params = st.trainable();
    const bool snapshots = labels && cfg.eval_every > 0 && cfg.eval_splits > 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        LogRow row;
        row.epoch = epoch;
        row.lr = lr_at(cfg, epoch);
        row.ema_decay = ema_decay_at(EmaSchedule{cfg.ema_t_base, cfg.epochs, epoch});

        Rng view_rng = make_rng(cfg.seed, {1, epoch});
        const ViewPair views = sample_views(g, cfg.augment, view_rng);

        ad::Tape tape;
        ForwardResult fr = forward_loss(tape, st, views.first, views.second, nbrs, labels, cfg.loss);
        row.loss = fr.loss.total.scalar();
        row.loss_node_term = fr.loss.node_term;
        row.loss_neighbor_term = fr.loss.neighbor_term;
        if (!std::isfinite(row.loss))
            throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ": node term " +
                               std::to_string(row.loss_node_term) + ", neighbor term " +
                               std::to_string(row.loss_neighbor_term));
        const ad::GradientMap grads = tape.backward(fr.loss.total);
        for (const Parameter* p : params)
            if (!linalg::all_finite(grads.at(*p)))
                throw NumericError("non-finite gradient for " + p->name + " at epoch " + std::to_string(epoch) +
                                   " (loss " + std::to_string(row.loss) + ")");

        for (const auto& stats : fr.online_stats) update_running_stats(st.online, stats, st.arch.bn_momentum);
        adamw_step(opt, params, grads, row.lr);
        ema_update(st, row.ema_decay);

        const bool last = epoch + 1 == cfg.epochs;
        if (snapshots && ((epoch + 1) % cfg.eval_every == 0 || last)) {
            Matrix h = embed(st, g);
            row.probe_accuracy = mean_probe_accuracy(h, *labels, cfg.eval_splits);
            if (!res.best || *row.probe_accuracy > res.best->accuracy)
                res.best = Snapshot{epoch, *row.probe_accuracy, std::move(h)};
        }
        if (on_epoch) on_epoch(row);
        res.log.push_back(row);
    }
    return res;
}

/// Writes the training log as CSV. The probe column appears only when some
/// row carries a snapshot.
inline void write_log_csv(std::ostream& out, const std::vector<LogRow>& log) {
    const bool metric = std::any_of(log.begin(), log.end(), [](const LogRow& r) { return r.probe_accuracy.has_value(); });
    out << "epoch,loss,loss_node_term,loss_neighbor_term,lr,ema_decay";
    if (metric) out << ",probe_accuracy";
    out << '\n';
    using detail::format_double;
    for (const auto& r : log) {
        out << r.epoch << ',' << format_double(r.loss) << ',' << format_double(r.loss_node_term) << ','
            << format_double(r.loss_neighbor_term) << ',' << format_double(r.lr) << ',' << format_double(r.ema_decay);
        if (metric) out << ',' << (r.probe_accuracy ? format_double(*r.probe_accuracy) : std::string());
        out << '\n';
    }
}

}  // namespace blnn

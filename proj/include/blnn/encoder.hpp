#pragma once

// GCN encoder and MLP predictor over the autodiff tape, plus parameter
// initialization and checkpoint I/O.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "blnn/autodiff.hpp"
#include "blnn/errors.hpp"
#include "blnn/graph.hpp"
#include "blnn/matrix.hpp"
#include "blnn/random.hpp"

namespace blnn {

struct Architecture {
    std::size_t in_dim = 0;
    std::vector<std::size_t> layer_dims{256, 128};  ///< output width of each GCN layer
    std::size_t predictor_hidden = 512;
    bool batchnorm = true;
    double bn_momentum = 0.99;  ///< weight of the newest batch in running statistics
    double bn_var_floor = 1e-5;
    double prelu_init = 0.25;

    std::size_t out_dim() const { return layer_dims.empty() ? in_dim : layer_dims.back(); }
};

struct BatchNormParams {
    Parameter gamma;
    Parameter beta;
    Matrix running_mean;
    Matrix running_var;
};

/// One GCN layer. With batch normalization the pre-normalization bias is
/// omitted, since the normalization removes any per-column shift.
struct GcnLayerParams {
    Parameter weight;
    std::optional<Parameter> bias;
    std::optional<BatchNormParams> bn;
    Parameter prelu_slope;
};

/// Two-layer MLP d -> hidden -> d with a PReLU in between.
struct PredictorParams {
    Parameter w1, b1, slope, w2, b2;
};

struct EncoderState {
    Architecture arch;
    std::vector<GcnLayerParams> online;
    std::vector<GcnLayerParams> target;
    PredictorParams predictor;

    /// Parameters updated by the optimizer, in a fixed order.
    std::vector<Parameter*> trainable() {
        std::vector<Parameter*> out;
        for (auto& l : online) append(l, out);
        for (Parameter* p : {&predictor.w1, &predictor.b1, &predictor.slope, &predictor.w2, &predictor.b2})
            out.push_back(p);
        return out;
    }

    /// Every matrix in layer order, online or target, including running
    /// statistics. Used by EMA updates and checkpoints.
    static std::vector<std::pair<std::string, Matrix*>> layer_matrices(std::vector<GcnLayerParams>& layers,
                                                                       const std::string& prefix) {
        std::vector<std::pair<std::string, Matrix*>> out;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            auto& l = layers[i];
            const std::string base = prefix + "." + std::to_string(i) + ".";
            out.emplace_back(base + "weight", &l.weight.value);
            if (l.bias) out.emplace_back(base + "bias", &l.bias->value);
            if (l.bn) {
                out.emplace_back(base + "bn_gamma", &l.bn->gamma.value);
                out.emplace_back(base + "bn_beta", &l.bn->beta.value);
                out.emplace_back(base + "bn_running_mean", &l.bn->running_mean);
                out.emplace_back(base + "bn_running_var", &l.bn->running_var);
            }
            out.emplace_back(base + "prelu_slope", &l.prelu_slope.value);
        }
        return out;
    }

    std::vector<std::pair<std::string, Matrix*>> all_matrices() {
        auto out = layer_matrices(online, "online");
        auto t = layer_matrices(target, "target");
        out.insert(out.end(), t.begin(), t.end());
        out.emplace_back("predictor.w1", &predictor.w1.value);
        out.emplace_back("predictor.b1", &predictor.b1.value);
        out.emplace_back("predictor.slope", &predictor.slope.value);
        out.emplace_back("predictor.w2", &predictor.w2.value);
        out.emplace_back("predictor.b2", &predictor.b2.value);
        return out;
    }

private:
    static void append(GcnLayerParams& l, std::vector<Parameter*>& out) {
        out.push_back(&l.weight);
        if (l.bias) out.push_back(&*l.bias);
        if (l.bn) {
            out.push_back(&l.bn->gamma);
            out.push_back(&l.bn->beta);
        }
        out.push_back(&l.prelu_slope);
    }
};

/// Glorot-uniform matrix, limit sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Matrix w(fan_in, fan_out);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w.data()) v = (2.0 * uniform01(rng) - 1.0) * limit;
    return w;
}

inline std::vector<GcnLayerParams> make_gcn_layers(const Architecture& arch, const std::string& prefix, Rng& rng) {
    std::vector<GcnLayerParams> layers;
    std::size_t in = arch.in_dim;
    for (std::size_t i = 0; i < arch.layer_dims.size(); ++i) {
        const std::size_t out = arch.layer_dims[i];
        const std::string base = prefix + "." + std::to_string(i) + ".";
        GcnLayerParams l{Parameter{base + "weight", glorot_uniform(in, out, rng), true}, std::nullopt, std::nullopt,
                         Parameter{base + "prelu_slope", Matrix(1, 1, arch.prelu_init), false}};
        if (arch.batchnorm) {
            l.bn = BatchNormParams{Parameter{base + "bn_gamma", Matrix(1, out, 1.0), false},
                                   Parameter{base + "bn_beta", Matrix(1, out, 0.0), false}, Matrix(1, out, 0.0),
                                   Matrix(1, out, 1.0)};
        } else {
            l.bias = Parameter{base + "bias", Matrix(1, out, 0.0), true};
        }
        layers.push_back(std::move(l));
        in = out;
    }
    return layers;
}

inline std::vector<GcnLayerParams> rename_copy(const std::vector<GcnLayerParams>& layers, const std::string& from,
                                               const std::string& to) {
    auto out = layers;
    auto fix = [&](Parameter& p) {
        if (p.name.rfind(from, 0) == 0) p.name = to + p.name.substr(from.size());
    };
    for (auto& l : out) {
        fix(l.weight);
        if (l.bias) fix(*l.bias);
        if (l.bn) {
            fix(l.bn->gamma);
            fix(l.bn->beta);
        }
        fix(l.prelu_slope);
    }
    return out;
}

/// Fresh encoder: Glorot weights, zero biases, unit/zero batch-norm affine,
/// and a target that is an exact copy of the online encoder.
inline EncoderState init_encoder(const Architecture& arch, Rng& rng) {
    if (arch.in_dim == 0 || arch.layer_dims.empty()) throw ConfigError("architecture needs in_dim > 0 and at least one layer");
    EncoderState s;
    s.arch = arch;
    s.online = make_gcn_layers(arch, "online", rng);
    s.target = rename_copy(s.online, "online", "target");
    const std::size_t d = arch.out_dim(), h = arch.predictor_hidden;
    s.predictor = PredictorParams{
        Parameter{"predictor.w1", glorot_uniform(d, h, rng), true},
        Parameter{"predictor.b1", Matrix(1, h, 0.0), true},
        Parameter{"predictor.slope", Matrix(1, 1, arch.prelu_init), false},
        Parameter{"predictor.w2", glorot_uniform(h, d, rng), true},
        Parameter{"predictor.b2", Matrix(1, d, 0.0), true},
    };
    return s;
}

enum class Bind { trainable, frozen };
enum class BnMode { train, inference };

namespace detail {
inline ad::Tensor bind(ad::Tape& tape, const Parameter& p, Bind b) {
    return b == Bind::trainable ? tape.param(p) : tape.constant(p.value);
}
}  // namespace detail

/// Runs the GCN stack: per layer spmm(adj, H) W (+ b), batch norm, PReLU.
/// Batch statistics of each normalized layer are written to `stats` when
/// given; running statistics are never modified here.
inline ad::Tensor gcn_forward(ad::Tape& tape, const std::vector<GcnLayerParams>& layers, Bind bind,
                              const std::shared_ptr<const SparseMatrix>& adj, const ad::Tensor& x, BnMode mode,
                              double bn_var_floor = 1e-5, std::vector<ad::BatchStats>* stats = nullptr) {
    if (!layers.empty() && x.cols() != layers.front().weight.value.rows())
        throw DimensionError("gcn_forward: features " + x.value().shape() + " vs first weight " +
                             layers.front().weight.value.shape());
    if (stats) stats->clear();
    ad::Tensor h = x;
    for (const auto& l : layers) {
        h = ad::matmul(ad::spmm(adj, h), detail::bind(tape, l.weight, bind));
        if (l.bias) h = ad::add_bias(h, detail::bind(tape, *l.bias, bind));
        if (l.bn) {
            const auto g = detail::bind(tape, l.bn->gamma, bind);
            const auto b = detail::bind(tape, l.bn->beta, bind);
            if (mode == BnMode::train) {
                ad::BatchStats st;
                h = ad::batch_norm_train(h, g, b, bn_var_floor, &st);
                if (stats) stats->push_back(std::move(st));
            } else {
                h = ad::batch_norm_eval(h, g, b, l.bn->running_mean, l.bn->running_var, bn_var_floor);
            }
        }
        h = ad::prelu(h, detail::bind(tape, l.prelu_slope, bind));
    }
    return h;
}

/// H W1 + b1 -> PReLU -> W2 + b2.
inline ad::Tensor predictor_forward(ad::Tape& tape, const PredictorParams& p, const ad::Tensor& h,
                                    Bind bind = Bind::trainable) {
    if (h.cols() != p.w1.value.rows())
        throw DimensionError("predictor_forward: input " + h.value().shape() + " vs w1 " + p.w1.value.shape());
    ad::Tensor z = ad::add_bias(ad::matmul(h, detail::bind(tape, p.w1, bind)), detail::bind(tape, p.b1, bind));
    z = ad::prelu(z, detail::bind(tape, p.slope, bind));
    return ad::add_bias(ad::matmul(z, detail::bind(tape, p.w2, bind)), detail::bind(tape, p.b2, bind));
}

/// running <- (1 - momentum) running + momentum batch, per normalized layer.
inline void update_running_stats(std::vector<GcnLayerParams>& layers, const std::vector<ad::BatchStats>& stats,
                                 double momentum) {
    std::size_t k = 0;
    for (auto& l : layers) {
        if (!l.bn) continue;
        if (k >= stats.size()) throw DimensionError("update_running_stats: missing batch statistics");
        const auto& st = stats[k++];
        for (std::size_t j = 0; j < st.mean.cols(); ++j) {
            l.bn->running_mean(0, j) = (1.0 - momentum) * l.bn->running_mean(0, j) + momentum * st.mean(0, j);
            l.bn->running_var(0, j) = (1.0 - momentum) * l.bn->running_var(0, j) + momentum * st.var(0, j);
        }
    }
}

/// Online-encoder embeddings of a graph, batch norm in inference mode.
inline Matrix embed(const EncoderState& s, const SparseGraph& g) {
    ad::Tape tape;
    auto adj = std::make_shared<const SparseMatrix>(normalize_adjacency(g));
    auto h = gcn_forward(tape, s.online, Bind::frozen, adj, tape.constant(g.features()), BnMode::inference,
                         s.arch.bn_var_floor);
    return h.value();
}

// Checkpoint layout (text, one token stream):
//   blnn-checkpoint 1
//   arch <in_dim> <n_layers> <dim_1> ... <dim_L> <predictor_hidden> <batchnorm 0|1> <bn_momentum> <bn_var_floor> <prelu_init>
//   then for every matrix, in EncoderState::all_matrices() order:
//   <name> <rows> <cols> followed by rows*cols hexadecimal floats (%a)
// Hexadecimal floats make the round trip value-exact.

namespace detail {
inline std::string hexfloat(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}
inline double parse_hexfloat(const std::string& tok, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw ParseError("checkpoint: bad number '" + tok + "' in " + where);
    return v;
}
}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, EncoderState& s) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    const auto& a = s.arch;
    out << "blnn-checkpoint 1\n";
    out << "arch " << a.in_dim << ' ' << a.layer_dims.size();
    for (auto d : a.layer_dims) out << ' ' << d;
    out << ' ' << a.predictor_hidden << ' ' << (a.batchnorm ? 1 : 0) << ' ' << detail::hexfloat(a.bn_momentum) << ' '
        << detail::hexfloat(a.bn_var_floor) << ' ' << detail::hexfloat(a.prelu_init) << '\n';
    for (auto& [name, m] : s.all_matrices()) {
        out << name << ' ' << m->rows() << ' ' << m->cols() << '\n';
        for (std::size_t i = 0; i < m->rows(); ++i) {
            for (std::size_t j = 0; j < m->cols(); ++j) out << (j ? " " : "") << detail::hexfloat((*m)(i, j));
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

inline EncoderState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open checkpoint " + path.string());
    std::string magic, version, tag;
    in >> magic >> version;
    if (magic != "blnn-checkpoint" || version != "1") throw ParseError("checkpoint: unrecognized header in " + path.string());
    Architecture a;
    std::size_t n_layers = 0;
    std::string mom, floor, slope;
    int bn = 0;
    in >> tag >> a.in_dim >> n_layers;
    if (tag != "arch" || !in) throw ParseError("checkpoint: malformed arch line");
    a.layer_dims.resize(n_layers);
    for (auto& d : a.layer_dims) in >> d;
    in >> a.predictor_hidden >> bn >> mom >> floor >> slope;
    if (!in) throw ParseError("checkpoint: malformed arch line");
    a.batchnorm = bn != 0;
    a.bn_momentum = detail::parse_hexfloat(mom, "arch");
    a.bn_var_floor = detail::parse_hexfloat(floor, "arch");
    a.prelu_init = detail::parse_hexfloat(slope, "arch");

    Rng dummy = make_rng(0);
    EncoderState s = init_encoder(a, dummy);
    for (auto& [name, m] : s.all_matrices()) {
        std::string got;
        std::size_t r = 0, c = 0;
        in >> got >> r >> c;
        if (!in || got != name) throw ParseError("checkpoint: expected matrix '" + name + "', found '" + got + "'");
        if (r != m->rows() || c != m->cols())
            throw ValidationError("checkpoint: matrix " + name + " has shape " + Matrix::shape_string(r, c) +
                                  ", architecture expects " + m->shape());
        for (double& v : m->data()) {
            std::string tok;
            if (!(in >> tok)) throw ParseError("checkpoint: truncated matrix " + name);
            v = detail::parse_hexfloat(tok, name);
        }
    }
    return s;
}

}  // namespace blnn

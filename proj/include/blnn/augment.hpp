#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "blnn/errors.hpp"
#include "blnn/graph.hpp"
#include "blnn/matrix.hpp"
#include "blnn/random.hpp"

namespace blnn {

/// Masking and dropping probabilities for the two views.
struct AugmentConfig {
    double p_m1 = 0.2;
    double p_d1 = 0.2;
    double p_m2 = 0.2;
    double p_d2 = 0.2;

    void validate() const {
        for (double p : {p_m1, p_d1, p_m2, p_d2})
            if (!(p >= 0.0 && p < 1.0))
                throw ConfigError("augmentation probability " + std::to_string(p) + " outside [0, 1)");
    }
};

inline void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1)");
}

/// Zeroes a random subset of feature columns; each column survives with
/// probability 1 - p_m and the same columns are masked in every row.
inline Matrix feature_mask(const Matrix& x, double p_m, Rng& rng) {
    check_probability(p_m, "p_m");
    std::vector<bool> keep(x.cols());
    for (std::size_t c = 0; c < x.cols(); ++c) keep[c] = uniform01(rng) >= p_m;
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t c = 0; c < out.cols(); ++c)
            if (!keep[c]) out(i, c) = 0.0;
    return out;
}

/// Drops each undirected edge independently with probability p_d. Both
/// directed slots of a kept edge survive together.
inline SparseGraph edge_drop(const SparseGraph& g, double p_d, Rng& rng) {
    check_probability(p_d, "p_d");
    std::vector<std::pair<NodeId, NodeId>> kept;
    kept.reserve(g.n_undirected_edges());
    for (auto e : g.undirected_edges())
        if (uniform01(rng) >= p_d) kept.push_back(e);
    return SparseGraph::from_edges(g.n_nodes(), kept, g.features());
}

struct ViewPair {
    SparseGraph first;
    SparseGraph second;
};

/// One augmented view: edge dropping followed by feature masking.
inline SparseGraph augment(const SparseGraph& g, double p_m, double p_d, Rng& rng) {
    SparseGraph dropped = edge_drop(g, p_d, rng);
    Matrix masked = feature_mask(g.features(), p_m, rng);
    return dropped.with_features(std::move(masked));
}

/// Two independently augmented views of g. Each view draws from its own
/// child generator seeded from `rng`.
inline ViewPair sample_views(const SparseGraph& g, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto s1 = rng();
    const auto s2 = rng();
    Rng r1 = make_rng(s1);
    Rng r2 = make_rng(s2);
    return {augment(g, cfg.p_m1, cfg.p_d1, r1), augment(g, cfg.p_m2, cfg.p_d2, r2)};
}

}  // namespace blnn

#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "blnn/errors.hpp"
#include "blnn/graph.hpp"
#include "blnn/random.hpp"

namespace blnn {

/// Stochastic block model with Gaussian class-conditional features.
struct SbmConfig {
    std::size_t n_nodes = 300;
    std::size_t n_classes = 3;
    double p_intra = 0.05;
    double p_inter = 0.005;
    std::size_t feature_dim = 32;
    double class_mean_separation = 1.0;
    double noise_std = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_nodes == 0 || n_classes == 0 || n_classes > n_nodes)
            throw ConfigError("SBM needs 1 <= n_classes <= n_nodes");
        if (!(0.0 <= p_inter && p_inter <= p_intra && p_intra <= 1.0))
            throw ConfigError("SBM needs 0 <= p_inter <= p_intra <= 1");
        if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be nonnegative");
        if (!(class_mean_separation >= 0.0)) throw ConfigError("class_mean_separation must be nonnegative");
    }

    /// Expected degree of a node under balanced classes.
    double expected_degree() const {
        const double block = static_cast<double>(n_nodes) / static_cast<double>(n_classes);
        return p_intra * (block - 1.0) + p_inter * (static_cast<double>(n_nodes) - block);
    }
};

struct SbmResult {
    SparseGraph graph;
    Labels labels;
    std::optional<std::string> warning;
};

/// Balanced SBM: node i belongs to class i * k / n. Every unordered pair is
/// connected independently with p_intra or p_inter. Features are the class
/// mean plus isotropic Gaussian noise; class means are standard Gaussian
/// vectors rescaled so that pairwise mean distances are about
/// class_mean_separation.
inline SbmResult generate_sbm(const SbmConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.n_nodes, k = cfg.n_classes, p = cfg.feature_dim;
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i * k / n);

    Rng edge_rng = make_rng(cfg.seed, {1});
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double prob = y[i] == y[j] ? cfg.p_intra : cfg.p_inter;
            if (uniform01(edge_rng) < prob) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
        }

    Rng feat_rng = make_rng(cfg.seed, {2});
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix means(k, p);
    const double mean_scale = p == 0 ? 0.0 : cfg.class_mean_separation / std::sqrt(2.0 * static_cast<double>(p));
    for (double& v : means.data()) v = gauss(feat_rng) * mean_scale;
    Matrix x(n, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < p; ++c)
            x(i, c) = means(static_cast<std::size_t>(y[i]), c) + cfg.noise_std * gauss(feat_rng);

    SbmResult out{SparseGraph::from_edges(n, edges, std::move(x)), Labels(std::move(y), static_cast<int>(k)),
                  std::nullopt};
    if (cfg.expected_degree() < 1.0)
        out.warning = "expected degree " + std::to_string(cfg.expected_degree()) + " < 1; graph will be very sparse";
    return out;
}

}  // namespace blnn

#pragma once

// Bootstrapping objectives: node-itself alignment, neighbor alignment
// weighted by supportiveness scores, and the ablation variants.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "blnn/autodiff.hpp"
#include "blnn/errors.hpp"
#include "blnn/graph.hpp"
#include "blnn/matrix.hpp"

namespace blnn {

enum class Variant { bgrl, blnn, bgrl_noisy, bgrl_clean };

inline std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::bgrl: return "bgrl";
        case Variant::blnn: return "blnn";
        case Variant::bgrl_noisy: return "bgrl_noisy";
        case Variant::bgrl_clean: return "bgrl_clean";
    }
    return "?";
}

inline Variant parse_variant(std::string_view s) {
    if (s == "bgrl") return Variant::bgrl;
    if (s == "blnn") return Variant::blnn;
    if (s == "bgrl_noisy") return Variant::bgrl_noisy;
    if (s == "bgrl_clean") return Variant::bgrl_clean;
    throw ConfigError("unknown variant '" + std::string(s) + "' (expected bgrl, blnn, bgrl_noisy or bgrl_clean)");
}

struct LossConfig {
    Variant variant = Variant::blnn;
    double tau = 1.0;
    bool symmetric = true;
    bool grad_through_scores = false;
    double neighbor_term_weight = 1.0;

    void validate() const {
        if (!(tau > 0.0)) throw ConfigError("tau must be positive");
        if (!(neighbor_term_weight >= 0.0)) throw ConfigError("neighbor_term_weight must be nonnegative");
    }
};

/// Per-anchor neighbor weights laid out like the neighbor list's CSR rows.
/// An anchor whose weights are all zero contributes no neighbor term.
struct SupportScores {
    std::vector<std::size_t> row_ptr{0};
    std::vector<NodeId> col_idx;
    std::vector<double> weights;

    std::size_t n_nodes() const noexcept { return row_ptr.size() - 1; }
    std::span<const double> of(NodeId i) const noexcept {
        return {weights.data() + row_ptr[i], row_ptr[i + 1] - row_ptr[i]};
    }
    bool consistent_with(const NeighborList& nbrs) const {
        return row_ptr == nbrs.row_ptr() && col_idx == nbrs.col_idx() && weights.size() == col_idx.size();
    }
};

namespace detail {
inline SupportScores empty_scores(const NeighborList& nbrs) {
    return SupportScores{nbrs.row_ptr(), nbrs.col_idx(), std::vector<double>(nbrs.n_pairs(), 0.0)};
}
}  // namespace detail

/// Softmax over each anchor's neighbors of cos(h1_i, h2_j) / tau. Inputs are
/// plain values: the scores carry no gradient.
inline SupportScores supportiveness(const Matrix& h1, const Matrix& h2, const NeighborList& nbrs, double tau) {
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (h1.rows() != nbrs.n_nodes() || h2.rows() != nbrs.n_nodes() || h1.cols() != h2.cols())
        throw DimensionError("supportiveness: representations " + h1.shape() + ", " + h2.shape() + " for " +
                             std::to_string(nbrs.n_nodes()) + " nodes");
    SupportScores s = detail::empty_scores(nbrs);
    std::vector<double> n1(h1.rows()), n2(h2.rows());
    for (std::size_t i = 0; i < h1.rows(); ++i) n1[i] = std::max(linalg::norm(h1.row(i)), ad::kNormEps);
    for (std::size_t i = 0; i < h2.rows(); ++i) n2[i] = std::max(linalg::norm(h2.row(i)), ad::kNormEps);
    for (NodeId i = 0; i < nbrs.n_nodes(); ++i) {
        const std::size_t lo = nbrs.row_ptr()[i], hi = nbrs.row_ptr()[i + 1];
        if (lo == hi) continue;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = lo; k < hi; ++k) {
            const NodeId j = nbrs.col_idx()[k];
            s.weights[k] = linalg::dot(h1.row(i), h2.row(j)) / (n1[i] * n2[j]) / tau;
            mx = std::max(mx, s.weights[k]);
        }
        double z = 0.0;
        for (std::size_t k = lo; k < hi; ++k) z += (s.weights[k] = std::exp(s.weights[k] - mx));
        for (std::size_t k = lo; k < hi; ++k) s.weights[k] /= z;
    }
    return s;
}

/// w_j = 1 / |N_i| for every neighbor.
inline SupportScores uniform_scores(const NeighborList& nbrs) {
    SupportScores s = detail::empty_scores(nbrs);
    for (NodeId i = 0; i < nbrs.n_nodes(); ++i) {
        const std::size_t lo = nbrs.row_ptr()[i], hi = nbrs.row_ptr()[i + 1];
        for (std::size_t k = lo; k < hi; ++k) s.weights[k] = 1.0 / static_cast<double>(hi - lo);
    }
    return s;
}

/// Uniform weights over same-label neighbors only; anchors with no such
/// neighbor (or an unknown label) get all-zero weights.
inline SupportScores clean_scores(const NeighborList& nbrs, const Labels& labels) {
    if (labels.size() != nbrs.n_nodes()) throw ConfigError("clean scores: label count does not match graph");
    SupportScores s = detail::empty_scores(nbrs);
    for (NodeId i = 0; i < nbrs.n_nodes(); ++i) {
        if (labels[i] == Labels::kUnknown) continue;
        const std::size_t lo = nbrs.row_ptr()[i], hi = nbrs.row_ptr()[i + 1];
        std::size_t same = 0;
        for (std::size_t k = lo; k < hi; ++k) same += labels[nbrs.col_idx()[k]] == labels[i];
        if (same == 0) continue;
        for (std::size_t k = lo; k < hi; ++k)
            if (labels[nbrs.col_idx()[k]] == labels[i]) s.weights[k] = 1.0 / static_cast<double>(same);
    }
    return s;
}

struct LossTerms {
    ad::Tensor total;
    double node_term = 0.0;      ///< value of the node-itself term
    double neighbor_term = 0.0;  ///< value of the neighbor term, before neighbor_term_weight
};

namespace detail {
inline void require_detached(const ad::Tensor& h2, const char* who) {
    if (h2.requires_grad()) throw std::invalid_argument(std::string(who) + ": target representations must be detached");
}
}  // namespace detail

/// -(1/n) sum_i cos(z1_i, h2_i).
inline ad::Tensor bgrl_loss(const ad::Tensor& z1, const ad::Tensor& h2) {
    detail::require_detached(h2, "bgrl_loss");
    if (z1.rows() != h2.rows() || z1.cols() != h2.cols())
        throw DimensionError("bgrl_loss: shape mismatch " + z1.value().shape() + " vs " + h2.value().shape());
    const std::size_t n = z1.rows();
    auto cos = ad::row_cosine(z1, h2, std::make_shared<const ad::RowPairs>(ad::RowPairs::diagonal(n)));
    auto w = std::make_shared<const std::vector<double>>(n, -1.0 / static_cast<double>(n));
    return ad::weighted_sum(cos, w);
}

/// Node term plus -(1/n) sum_i sum_{j in N_i} w_j cos(z1_i, h2_j). Gradients
/// reach z1 only.
inline LossTerms blnn_loss(const ad::Tensor& z1, const ad::Tensor& h2, const NeighborList& nbrs,
                           const SupportScores& scores, const LossConfig& cfg) {
    cfg.validate();
    if (!scores.consistent_with(nbrs)) throw ConfigError("blnn_loss: support scores do not match the neighbor list");
    if (z1.rows() != nbrs.n_nodes())
        throw DimensionError("blnn_loss: " + std::to_string(z1.rows()) + " rows for " +
                             std::to_string(nbrs.n_nodes()) + " nodes");
    LossTerms out;
    ad::Tensor node = bgrl_loss(z1, h2);
    out.node_term = node.scalar();
    if (cfg.neighbor_term_weight == 0.0) {
        out.total = node;
        return out;
    }
    const double n = static_cast<double>(z1.rows());
    auto pairs = std::make_shared<ad::RowPairs>();
    auto w = std::make_shared<std::vector<double>>();
    for (NodeId i = 0; i < nbrs.n_nodes(); ++i) {
        const auto js = nbrs.of(i);
        const auto ws = scores.of(i);
        for (std::size_t k = 0; k < js.size(); ++k) {
            if (ws[k] == 0.0) continue;
            pairs->push(i, js[k]);
            w->push_back(-ws[k] / n);
        }
    }
    ad::Tensor nb = ad::weighted_sum(ad::row_cosine(z1, h2, pairs), w);
    out.neighbor_term = nb.scalar();
    out.total = ad::add(node, cfg.neighbor_term_weight == 1.0 ? nb : ad::scale(nb, cfg.neighbor_term_weight));
    return out;
}

/// Neighbor loss with the softmax weights kept on the tape, so gradients
/// also flow through the scores into h1.
inline LossTerms blnn_loss_through_scores(const ad::Tensor& z1, const ad::Tensor& h1, const ad::Tensor& h2,
                                          const NeighborList& nbrs, const LossConfig& cfg) {
    cfg.validate();
    detail::require_detached(h2, "blnn_loss_through_scores");
    LossTerms out;
    ad::Tensor node = bgrl_loss(z1, h2);
    out.node_term = node.scalar();
    if (cfg.neighbor_term_weight == 0.0 || nbrs.n_pairs() == 0) {
        out.total = node;
        return out;
    }
    auto pairs = std::make_shared<ad::RowPairs>();
    for (NodeId i = 0; i < nbrs.n_nodes(); ++i)
        for (NodeId j : nbrs.of(i)) pairs->push(i, j);
    auto offsets = std::make_shared<const std::vector<std::size_t>>(nbrs.row_ptr());
    ad::Tensor w = ad::segment_softmax(ad::row_cosine(h1, h2, pairs), offsets, cfg.tau);
    ad::Tensor c = ad::row_cosine(z1, h2, pairs);
    ad::Tensor nb = ad::scale(ad::sum(ad::hadamard(w, c)), -1.0 / static_cast<double>(z1.rows()));
    out.neighbor_term = nb.scalar();
    out.total = ad::add(node, cfg.neighbor_term_weight == 1.0 ? nb : ad::scale(nb, cfg.neighbor_term_weight));
    return out;
}

/// Scores the variant uses, or nothing for plain bgrl.
inline std::optional<SupportScores> variant_scores(const LossConfig& cfg, const Matrix& h1, const Matrix& h2,
                                                   const NeighborList& nbrs, const Labels* labels) {
    switch (cfg.variant) {
        case Variant::bgrl: return std::nullopt;
        case Variant::blnn: return supportiveness(h1, h2, nbrs, cfg.tau);
        case Variant::bgrl_noisy: return uniform_scores(nbrs);
        case Variant::bgrl_clean:
            if (!labels) throw ConfigError("variant bgrl_clean requires labels");
            return clean_scores(nbrs, *labels);
    }
    return std::nullopt;
}

/// Loss for one direction (online view a -> target view b) under the
/// configured variant. `fixed` overrides the variant's own scores.
inline LossTerms variant_loss(const LossConfig& cfg, const ad::Tensor& z1, const ad::Tensor& h1,
                              const ad::Tensor& h2, const NeighborList& nbrs, const Labels* labels,
                              const SupportScores* fixed = nullptr, SupportScores* scores_out = nullptr) {
    cfg.validate();
    if (cfg.variant == Variant::bgrl) {
        LossTerms out;
        out.total = bgrl_loss(z1, h2);
        out.node_term = out.total.scalar();
        return out;
    }
    if (cfg.variant == Variant::blnn && cfg.grad_through_scores && !fixed)
        return blnn_loss_through_scores(z1, h1, h2, nbrs, cfg);
    if (fixed) {
        if (scores_out) *scores_out = *fixed;
        return blnn_loss(z1, h2, nbrs, *fixed, cfg);
    }
    SupportScores s = *variant_scores(cfg, h1.value(), h2.value(), nbrs, labels);
    LossTerms out = blnn_loss(z1, h2, nbrs, s, cfg);
    if (scores_out) *scores_out = std::move(s);
    return out;
}

/// Average of the two directional losses.
inline LossTerms symmetrize(const LossTerms& forward, const LossTerms& backward) {
    LossTerms out;
    out.total = ad::scale(ad::add(forward.total, backward.total), 0.5);
    out.node_term = 0.5 * (forward.node_term + backward.node_term);
    out.neighbor_term = 0.5 * (forward.neighbor_term + backward.neighbor_term);
    return out;
}

}  // namespace blnn

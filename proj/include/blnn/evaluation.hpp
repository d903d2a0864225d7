#pragma once

// Downstream metrics over frozen embeddings: linear probe accuracy,
// k-means clustering scores (NMI, homogeneity), similarity search (S@k),
// intra-class compactness and the supportiveness/homophily profile.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "blnn/errors.hpp"
#include "blnn/graph.hpp"
#include "blnn/matrix.hpp"
#include "blnn/objective.hpp"
#include "blnn/random.hpp"

namespace blnn {

struct Split {
    std::vector<NodeId> train, val, test;
};

/// Uniform (unstratified) split of the labeled nodes by the given ratios.
inline Split random_splits(const Labels& labels, std::uint64_t seed, double r_train = 0.1, double r_val = 0.1,
                           double r_test = 0.8) {
    if (std::abs(r_train + r_val + r_test - 1.0) > 1e-9 || r_train < 0 || r_val < 0 || r_test < 0)
        throw ConfigError("split ratios must be nonnegative and sum to 1");
    std::vector<NodeId> nodes;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != Labels::kUnknown) nodes.push_back(static_cast<NodeId>(i));
    Rng rng = make_rng(seed, {0x5b117});
    std::shuffle(nodes.begin(), nodes.end(), rng);
    const std::size_t n = nodes.size();
    const auto n_train = static_cast<std::size_t>(std::llround(r_train * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(r_val * static_cast<double>(n)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
        throw ValidationError("too few labeled nodes (" + std::to_string(n) + ") for nonempty splits");
    Split s;
    s.train.assign(nodes.begin(), nodes.begin() + n_train);
    s.val.assign(nodes.begin() + n_train, nodes.begin() + n_train + n_val);
    s.test.assign(nodes.begin() + n_train + n_val, nodes.end());
    return s;
}

/// Multinomial logistic regression with bias, trained by full-batch
/// gradient descent on column-standardized inputs (train statistics).
class LogisticRegression {
public:
    static constexpr int kMaxIter = 1000;
    static constexpr double kGradTol = 1e-6;

    LogisticRegression(const Matrix& x, std::span<const NodeId> rows, std::span<const int> y, int n_classes, double l2) {
        const std::size_t d = x.cols();
        mean_.assign(d, 0.0);
        scale_.assign(d, 1.0);
        const double m = static_cast<double>(rows.size());
        for (NodeId r : rows)
            for (std::size_t c = 0; c < d; ++c) mean_[c] += x(r, c) / m;
        std::vector<double> var(d, 0.0);
        for (NodeId r : rows)
            for (std::size_t c = 0; c < d; ++c) var[c] += (x(r, c) - mean_[c]) * (x(r, c) - mean_[c]) / m;
        for (std::size_t c = 0; c < d; ++c) scale_[c] = var[c] > 1e-24 ? 1.0 / std::sqrt(var[c]) : 1.0;
        fit(standardize(x, rows), y, n_classes, l2);
    }

    std::vector<int> predict(const Matrix& x, std::span<const NodeId> rows) const {
        const Matrix z = standardize(x, rows);
        std::vector<int> out(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto logits = scores(z.row(i));
            out[i] = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        }
        return out;
    }

    int iterations() const noexcept { return iterations_; }

private:
    Matrix standardize(const Matrix& x, std::span<const NodeId> rows) const {
        Matrix z(rows.size(), x.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t c = 0; c < x.cols(); ++c) z(i, c) = (x(rows[i], c) - mean_[c]) * scale_[c];
        return z;
    }

    std::vector<double> scores(std::span<const double> row) const {
        std::vector<double> s(bias_.begin(), bias_.end());
        for (std::size_t c = 0; c < row.size(); ++c)
            for (std::size_t k = 0; k < s.size(); ++k) s[k] += row[c] * w_(c, k);
        return s;
    }

    // Largest eigenvalue of [X 1]^T [X 1] / m by power iteration.
    static double top_eigenvalue(const Matrix& z) {
        const std::size_t d = z.cols() + 1;
        std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d))), u(d);
        double lambda = 0.0;
        for (int it = 0; it < 100; ++it) {
            std::fill(u.begin(), u.end(), 0.0);
            for (std::size_t i = 0; i < z.rows(); ++i) {
                double p = v[d - 1];
                for (std::size_t c = 0; c + 1 < d; ++c) p += z(i, c) * v[c];
                for (std::size_t c = 0; c + 1 < d; ++c) u[c] += p * z(i, c);
                u[d - 1] += p;
            }
            for (double& a : u) a /= static_cast<double>(z.rows());
            const double nu = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
            if (nu == 0.0) return 0.0;
            lambda = nu;
            for (std::size_t c = 0; c < d; ++c) v[c] = u[c] / nu;
        }
        return lambda;
    }

    void fit(const Matrix& z, std::span<const int> y, int n_classes, double l2) {
        const std::size_t m = z.rows(), d = z.cols(), k = static_cast<std::size_t>(n_classes);
        w_ = Matrix(d, k);
        bias_.assign(k, 0.0);
        const double step = 1.0 / (0.5 * top_eigenvalue(z) + l2 + 1e-12);
        Matrix gw(d, k);
        std::vector<double> gb(k);
        for (iterations_ = 0; iterations_ < kMaxIter; ++iterations_) {
            gw.fill(0.0);
            std::fill(gb.begin(), gb.end(), 0.0);
            for (std::size_t i = 0; i < m; ++i) {
                auto s = scores(z.row(i));
                const double mx = *std::max_element(s.begin(), s.end());
                double zsum = 0.0;
                for (double& v : s) zsum += (v = std::exp(v - mx));
                for (std::size_t c = 0; c < k; ++c) {
                    const double r = (s[c] / zsum - (y[i] == static_cast<int>(c) ? 1.0 : 0.0)) / static_cast<double>(m);
                    gb[c] += r;
                    for (std::size_t q = 0; q < d; ++q) gw(q, c) += r * z(i, q);
                }
            }
            double gnorm2 = 0.0;
            for (std::size_t q = 0; q < d; ++q)
                for (std::size_t c = 0; c < k; ++c) {
                    gw(q, c) += l2 * w_(q, c);
                    gnorm2 += gw(q, c) * gw(q, c);
                }
            for (double g : gb) gnorm2 += g * g;
            if (std::sqrt(gnorm2) < kGradTol) break;
            for (std::size_t q = 0; q < gw.size(); ++q) w_.data()[q] -= step * gw.data()[q];
            for (std::size_t c = 0; c < k; ++c) bias_[c] -= step * gb[c];
        }
    }

    std::vector<double> mean_, scale_;
    Matrix w_;
    std::vector<double> bias_;
    int iterations_ = 0;
};

struct ProbeResult {
    double test_accuracy = 0.0;
    double val_accuracy = 0.0;
    double l2 = 0.0;
};

inline const std::vector<double>& default_l2_grid() {
    static const std::vector<double> grid{1e-4, 1e-3, 1e-2, 1e-1};
    return grid;
}

/// Fits one classifier per L2 strength on the train split, keeps the one
/// with the best validation accuracy and reports its test accuracy.
inline ProbeResult linear_probe(const Matrix& h, const Labels& labels, const Split& split,
                                const std::vector<double>& l2_grid = default_l2_grid()) {
    if (h.rows() != labels.size())
        throw DimensionError("linear_probe: " + std::to_string(h.rows()) + " embeddings for " +
                             std::to_string(labels.size()) + " labels");
    if (split.train.empty() || split.test.empty()) throw ValidationError("linear_probe: empty train or test split");
    std::vector<char> in_train(static_cast<std::size_t>(labels.n_classes), 0);
    std::vector<int> y_train;
    for (NodeId i : split.train) {
        if (labels[i] == Labels::kUnknown) throw ValidationError("linear_probe: unlabeled node in train split");
        y_train.push_back(labels[i]);
        in_train[static_cast<std::size_t>(labels[i])] = 1;
    }
    for (const auto* part : {&split.val, &split.test})
        for (NodeId i : *part)
            if (labels[i] == Labels::kUnknown || !in_train[static_cast<std::size_t>(labels[i])])
                throw ValidationError("linear_probe: class " + std::to_string(labels[i]) + " absent from train split");
    auto accuracy = [&](const LogisticRegression& clf, const std::vector<NodeId>& rows) {
        if (rows.empty()) return 0.0;
        const auto pred = clf.predict(h, rows);
        std::size_t ok = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) ok += pred[i] == labels[rows[i]];
        return static_cast<double>(ok) / static_cast<double>(rows.size());
    };
    ProbeResult best;
    bool first = true;
    for (double l2 : l2_grid) {
        LogisticRegression clf(h, split.train, y_train, labels.n_classes, l2);
        const double va = split.val.empty() ? accuracy(clf, split.train) : accuracy(clf, split.val);
        if (first || va > best.val_accuracy) {
            best = ProbeResult{accuracy(clf, split.test), va, l2};
            first = false;
        }
    }
    return best;
}

struct KMeansResult {
    std::vector<int> assignments;
    double inertia = 0.0;
    int iterations = 0;
};

namespace detail {

inline double sqdist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t q = 0; q < a.size(); ++q) s += (a[q] - b[q]) * (a[q] - b[q]);
    return s;
}

inline KMeansResult kmeans_once(const Matrix& x, std::size_t k, Rng& rng, int max_iter) {
    const std::size_t n = x.rows(), d = x.cols();
    Matrix centers(k, d);
    // k-means++ seeding
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::size_t first = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
    std::copy(x.row(first).begin(), x.row(first).end(), centers.row(0).begin());
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += (dist[i] = std::min(dist[i], sqdist(x.row(i), centers.row(c - 1))));
        std::size_t pick = n - 1;
        if (total > 0.0) {
            double r = uniform01(rng) * total;
            for (std::size_t i = 0; i < n; ++i) {
                r -= dist[i];
                if (r < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
        }
        std::copy(x.row(pick).begin(), x.row(pick).end(), centers.row(c).begin());
    }

    KMeansResult res;
    res.assignments.assign(n, -1);
    std::vector<double> best_d(n);
    for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int arg = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double dd = sqdist(x.row(i), centers.row(c));
                if (dd < bd) {
                    bd = dd;
                    arg = static_cast<int>(c);
                }
            }
            best_d[i] = bd;
            if (res.assignments[i] != arg) {
                res.assignments[i] = arg;
                changed = true;
            }
        }
        // Recompute centers; an empty cluster takes the point farthest from its center.
        std::vector<std::size_t> count(k, 0);
        centers.fill(0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(res.assignments[i]);
            ++count[c];
            for (std::size_t q = 0; q < d; ++q) centers(c, q) += x(i, q);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] == 0) {
                std::size_t far = n;
                for (std::size_t i = 0; i < n; ++i)
                    if (count[static_cast<std::size_t>(res.assignments[i])] > 1 && (far == n || best_d[i] > best_d[far]))
                        far = i;
                const auto old = static_cast<std::size_t>(res.assignments[far]);
                --count[old];
                for (std::size_t q = 0; q < d; ++q) centers(old, q) -= x(far, q);
                res.assignments[far] = static_cast<int>(c);
                best_d[far] = 0.0;
                count[c] = 1;
                for (std::size_t q = 0; q < d; ++q) centers(c, q) = x(far, q);
                changed = true;
            }
        }
        for (std::size_t c = 0; c < k; ++c)
            if (count[c] > 0)
                for (std::size_t q = 0; q < d; ++q) centers(c, q) /= static_cast<double>(count[c]);
        if (!changed) break;
    }
    res.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        res.inertia += sqdist(x.row(i), centers.row(static_cast<std::size_t>(res.assignments[i])));
    return res;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding; best inertia over `restarts`
/// seeded runs, each capped at `max_iter` iterations.
inline KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, int restarts = 10, int max_iter = 300) {
    if (k < 1 || k > x.rows()) throw std::invalid_argument("kmeans: need 1 <= k <= n");
    KMeansResult best;
    for (int r = 0; r < std::max(restarts, 1); ++r) {
        Rng rng = make_rng(seed, {0x6b6d, static_cast<std::uint64_t>(r)});
        auto res = detail::kmeans_once(x, k, rng, max_iter);
        if (r == 0 || res.inertia < best.inertia) best = std::move(res);
    }
    return best;
}

namespace detail {

struct Contingency {
    std::vector<std::vector<double>> table;  // [class][cluster] counts
    std::vector<double> row, col;
    double n = 0.0;
};

inline std::vector<int> densify(std::span<const int> v) {
    std::map<int, int> ids;
    std::vector<int> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = ids.emplace(v[i], static_cast<int>(ids.size())).first->second;
    return out;
}

inline Contingency contingency(std::span<const int> labels, std::span<const int> assignments) {
    if (labels.size() != assignments.size())
        throw DimensionError("label/assignment length mismatch: " + std::to_string(labels.size()) + " vs " +
                             std::to_string(assignments.size()));
    const auto y = densify(labels), c = densify(assignments);
    const int ky = y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1;
    const int kc = c.empty() ? 0 : *std::max_element(c.begin(), c.end()) + 1;
    Contingency t;
    t.table.assign(static_cast<std::size_t>(ky), std::vector<double>(static_cast<std::size_t>(kc), 0.0));
    t.row.assign(static_cast<std::size_t>(ky), 0.0);
    t.col.assign(static_cast<std::size_t>(kc), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        t.table[static_cast<std::size_t>(y[i])][static_cast<std::size_t>(c[i])] += 1.0;
        t.row[static_cast<std::size_t>(y[i])] += 1.0;
        t.col[static_cast<std::size_t>(c[i])] += 1.0;
    }
    t.n = static_cast<double>(y.size());
    return t;
}

inline double entropy(const std::vector<double>& counts, double n) {
    double h = 0.0;
    for (double c : counts)
        if (c > 0.0) h -= (c / n) * std::log(c / n);
    return h;
}

inline double mutual_information(const Contingency& t) {
    double mi = 0.0;
    for (std::size_t a = 0; a < t.row.size(); ++a)
        for (std::size_t b = 0; b < t.col.size(); ++b) {
            const double nab = t.table[a][b];
            if (nab > 0.0) mi += (nab / t.n) * std::log(nab * t.n / (t.row[a] * t.col[b]));
        }
    return std::max(mi, 0.0);
}

}  // namespace detail

/// 2 I(Y; C) / (H(Y) + H(C)), natural logs; 1 when both entropies vanish.
inline double nmi(std::span<const int> labels, std::span<const int> assignments) {
    const auto t = detail::contingency(labels, assignments);
    const double hy = detail::entropy(t.row, t.n), hc = detail::entropy(t.col, t.n);
    if (hy + hc == 0.0) return 1.0;
    return std::clamp(2.0 * detail::mutual_information(t) / (hy + hc), 0.0, 1.0);
}

/// 1 - H(Y | C) / H(Y). Undefined for a constant labeling.
inline double homogeneity(std::span<const int> labels, std::span<const int> assignments) {
    const auto t = detail::contingency(labels, assignments);
    const double hy = detail::entropy(t.row, t.n);
    if (hy == 0.0) throw UndefinedError("homogeneity is undefined when all labels are identical");
    double h_cond = 0.0;  // H(Y | C)
    for (std::size_t b = 0; b < t.col.size(); ++b)
        for (std::size_t a = 0; a < t.row.size(); ++a) {
            const double nab = t.table[a][b];
            if (nab > 0.0) h_cond -= (nab / t.n) * std::log(nab / t.col[b]);
        }
    return std::clamp(1.0 - h_cond / hy, 0.0, 1.0);
}

namespace detail {

inline Matrix unit_rows(const Matrix& h) {
    Matrix u = h;
    for (std::size_t i = 0; i < u.rows(); ++i) {
        const double nn = std::max(linalg::norm(u.row(i)), 1e-12);
        for (double& v : u.row(i)) v /= nn;
    }
    return u;
}

/// Rows with a known label, and the corresponding labels.
inline std::pair<Matrix, std::vector<int>> labeled_rows(const Matrix& h, const Labels& labels) {
    if (h.rows() != labels.size())
        throw DimensionError(std::to_string(h.rows()) + " embeddings for " + std::to_string(labels.size()) + " labels");
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != Labels::kUnknown) keep.push_back(i);
    Matrix out(keep.size(), h.cols());
    std::vector<int> y(keep.size());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        std::copy(h.row(keep[r]).begin(), h.row(keep[r]).end(), out.row(r).begin());
        y[r] = labels[keep[r]];
    }
    return {std::move(out), std::move(y)};
}

}  // namespace detail

/// S@k for several k in one pass: mean fraction of each node's k most
/// cosine-similar other nodes that share its label. Ties go to the lower
/// node index; unlabeled nodes are ignored. Memory stays O(n).
inline std::map<std::size_t, double> s_at_ks(const Matrix& h, const Labels& labels, const std::vector<std::size_t>& ks) {
    auto [x, y] = detail::labeled_rows(h, labels);
    const std::size_t n = x.rows();
    std::size_t kmax = 0;
    for (std::size_t k : ks) {
        if (k == 0 || k >= n)
            throw std::invalid_argument("s_at_k: need 0 < k < n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
        kmax = std::max(kmax, k);
    }
    std::map<std::size_t, double> out;
    for (std::size_t k : ks) out[k] = 0.0;
    if (ks.empty()) return out;
    const Matrix u = detail::unit_rows(x);
    std::vector<double> sim(n);
    std::vector<std::size_t> cand(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) sim[j] = linalg::dot(u.row(i), u.row(j));
        std::size_t w = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) cand[w++] = j;
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kmax), cand.end(),
                          [&](std::size_t a, std::size_t b) {
                              if (sim[a] != sim[b]) return sim[a] > sim[b];
                              return a < b;
                          });
        std::size_t same = 0, taken = 0;
        for (std::size_t k : std::set<std::size_t>(ks.begin(), ks.end())) {
            for (; taken < k; ++taken) same += y[cand[taken]] == y[i];
            out[k] += static_cast<double>(same) / static_cast<double>(k);
        }
    }
    for (auto& [k, v] : out) v /= static_cast<double>(n);
    return out;
}

inline double s_at_k(const Matrix& h, const Labels& labels, std::size_t k) { return s_at_ks(h, labels, {k})[k]; }

/// Macro average over classes of the mean cosine among distinct same-class
/// pairs. With `literal_normalization` the per-class sum over ordered pairs
/// is divided by the class size instead of the pair count.
inline double compactness(const Matrix& h, const Labels& labels, bool literal_normalization = false) {
    auto [x, y] = detail::labeled_rows(h, labels);
    const Matrix u = detail::unit_rows(x);
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < y.size(); ++i) members[y[i]].push_back(i);
    if (members.empty()) throw ValidationError("compactness: no labeled nodes");
    double total = 0.0;
    for (const auto& [cls, idx] : members) {
        const double m = static_cast<double>(idx.size());
        if (idx.size() < 2) throw ValidationError("compactness: class " + std::to_string(cls) + " has a single member");
        std::vector<double> s(u.cols(), 0.0);
        double self = 0.0;
        for (std::size_t i : idx) {
            for (std::size_t q = 0; q < u.cols(); ++q) s[q] += u(i, q);
            self += linalg::dot(u.row(i), u.row(i));
        }
        const double ordered_pairs_sum = linalg::dot(s, s) - self;
        total += ordered_pairs_sum / (literal_normalization ? m : m * (m - 1.0));
    }
    return total / static_cast<double>(members.size());
}

/// Intra-class fraction per bin after sorting pairs ascending by key and
/// cutting them into n_bins nearly equal consecutive groups.
inline std::vector<double> binned_homophily(const std::vector<double>& key, const std::vector<bool>& intra,
                                            std::size_t n_bins) {
    if (key.size() != intra.size()) throw DimensionError("binned_homophily: key/flag length mismatch");
    if (n_bins == 0) throw std::invalid_argument("binned_homophily: n_bins must be positive");
    std::vector<std::size_t> order(key.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    std::vector<double> out(n_bins, 0.0);
    const std::size_t m = order.size();
    for (std::size_t b = 0; b < n_bins; ++b) {
        const std::size_t lo = b * m / n_bins, hi = (b + 1) * m / n_bins;
        if (hi == lo) {
            out[b] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        std::size_t same = 0;
        for (std::size_t q = lo; q < hi; ++q) same += intra[order[q]];
        out[b] = static_cast<double>(same) / static_cast<double>(hi - lo);
    }
    return out;
}

/// Homophily of node-neighbor pairs binned by supportiveness weight (bin 0
/// holds the lowest weights). Pairs touching an unlabeled node are skipped.
inline std::vector<double> weight_homophily_profile(const SupportScores& scores, const Labels& labels,
                                                    std::size_t n_bins) {
    if (labels.size() != scores.n_nodes()) throw DimensionError("weight_homophily_profile: label count mismatch");
    std::vector<double> key;
    std::vector<bool> intra;
    for (NodeId i = 0; i < scores.n_nodes(); ++i)
        for (std::size_t k = scores.row_ptr[i]; k < scores.row_ptr[i + 1]; ++k) {
            const NodeId j = scores.col_idx[k];
            if (labels[i] == Labels::kUnknown || labels[j] == Labels::kUnknown) continue;
            key.push_back(scores.weights[k]);
            intra.push_back(labels[i] == labels[j]);
        }
    return binned_homophily(key, intra, n_bins);
}

/// Same profile keyed by cos(h1_i, h2_j) instead of the softmax weight.
inline std::vector<double> similarity_homophily_profile(const Matrix& h1, const Matrix& h2, const NeighborList& nbrs,
                                                        const Labels& labels, std::size_t n_bins) {
    std::vector<double> key;
    std::vector<bool> intra;
    for (NodeId i = 0; i < nbrs.n_nodes(); ++i)
        for (NodeId j : nbrs.of(i)) {
            if (labels[i] == Labels::kUnknown || labels[j] == Labels::kUnknown) continue;
            key.push_back(linalg::cosine(h1.row(i), h2.row(j)));
            intra.push_back(labels[i] == labels[j]);
        }
    return binned_homophily(key, intra, n_bins);
}

struct EvalReport {
    double accuracy = 0.0;
    double nmi = 0.0;
    double homogeneity = 0.0;
    std::map<std::size_t, double> s_at_k;
    double compactness = 0.0;
    std::uint64_t split_seed = 0;
};

struct EvalOptions {
    std::vector<std::size_t> ks{5, 10};
    bool compactness_paper_literal = false;
    int kmeans_restarts = 10;
};

/// Full metric suite for one split seed. Clustering uses k = n_classes and
/// is seeded by the split seed.
inline EvalReport evaluate_embeddings(const Matrix& h, const Labels& labels, std::uint64_t split_seed,
                                      const EvalOptions& opt = {}) {
    EvalReport r;
    r.split_seed = split_seed;
    r.accuracy = linear_probe(h, labels, random_splits(labels, split_seed)).test_accuracy;
    auto [x, y] = detail::labeled_rows(h, labels);
    std::vector<int> present = y;
    std::sort(present.begin(), present.end());
    present.erase(std::unique(present.begin(), present.end()), present.end());
    const auto km = kmeans(x, std::min(present.size(), x.rows()), split_seed, opt.kmeans_restarts);
    r.nmi = nmi(y, km.assignments);
    r.homogeneity = homogeneity(y, km.assignments);
    r.s_at_k = s_at_ks(h, labels, opt.ks);
    r.compactness = compactness(h, labels, opt.compactness_paper_literal);
    return r;
}

/// Reports for several split seeds. S@k and compactness do not depend on the
/// split, so they are computed once and shared.
inline std::vector<EvalReport> evaluate_embeddings(const Matrix& h, const Labels& labels,
                                                   const std::vector<std::uint64_t>& split_seeds,
                                                   const EvalOptions& opt = {}) {
    const auto sk = s_at_ks(h, labels, opt.ks);
    const double comp = compactness(h, labels, opt.compactness_paper_literal);
    auto [x, y] = detail::labeled_rows(h, labels);
    std::vector<int> present = y;
    std::sort(present.begin(), present.end());
    present.erase(std::unique(present.begin(), present.end()), present.end());
    std::vector<EvalReport> out;
    for (std::uint64_t seed : split_seeds) {
        EvalReport r;
        r.split_seed = seed;
        r.accuracy = linear_probe(h, labels, random_splits(labels, seed)).test_accuracy;
        const auto km = kmeans(x, std::min(present.size(), x.rows()), seed, opt.kmeans_restarts);
        r.nmi = nmi(y, km.assignments);
        r.homogeneity = homogeneity(y, km.assignments);
        r.s_at_k = sk;
        r.compactness = comp;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace blnn

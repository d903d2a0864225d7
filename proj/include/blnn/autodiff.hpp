#pragma once

// Define-by-run reverse-mode differentiation over dense matrices.
//
// A Tape records every operation of one forward pass. Tensors are
// lightweight handles into it and are only valid while the tape lives.

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "blnn/errors.hpp"
#include "blnn/graph.hpp"
#include "blnn/matrix.hpp"

namespace blnn {

/// A named trainable matrix. Its address is the key of gradient maps and
/// optimizer state, so parameters must not move while those are alive.
struct Parameter {
    std::string name;
    Matrix value;
    bool decay = true;  ///< subject to decoupled weight decay
};

namespace ad {

inline constexpr double kNormEps = 1e-12;

class Tape;

class Tensor {
public:
    Tensor() = default;

    const Matrix& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    bool requires_grad() const;
    double scalar() const {
        if (rows() != 1 || cols() != 1)
            throw DimensionError("scalar() on tensor of shape " + value().shape());
        return value()(0, 0);
    }

    Tape* tape() const noexcept { return tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Tensor(Tape* t, std::size_t id) : tape_(t), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Gradients of a scalar with respect to the parameters bound on a tape.
class GradientMap {
public:
    const Matrix* find(const Parameter& p) const {
        auto it = grads_.find(&p);
        return it == grads_.end() ? nullptr : &it->second;
    }
    /// Gradient for p, or zeros of p's shape when p did not influence the output.
    Matrix at(const Parameter& p) const {
        if (const Matrix* g = find(p)) return *g;
        return Matrix(p.value.rows(), p.value.cols());
    }
    std::size_t size() const noexcept { return grads_.size(); }

private:
    friend class Tape;
    std::unordered_map<const Parameter*, Matrix> grads_;
};

/// Receives the upstream gradient and one output slot per input; a slot is
/// null when that input does not need a gradient.
using BackwardFn = std::function<void(const Tape&, const Matrix& grad_out, std::span<Matrix* const> grad_in)>;

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Tensor constant(Matrix v) { return push(std::move(v), false, {}, nullptr); }
    Tensor variable(Matrix v) { return push(std::move(v), true, {}, nullptr); }

    /// Binds a parameter as a gradient-tracked leaf. Binding the same
    /// parameter twice returns the same node so gradients accumulate.
    Tensor param(const Parameter& p) {
        if (auto it = bound_.find(&p); it != bound_.end()) return Tensor(this, it->second);
        Tensor t = variable(p.value);
        bound_.emplace(&p, t.id());
        return t;
    }

    Tensor record(Matrix value, std::vector<Tensor> inputs, BackwardFn fn) {
        std::vector<std::size_t> ids;
        bool needs = false;
        for (const auto& in : inputs) {
            check_owner(in);
            ids.push_back(in.id());
            needs = needs || nodes_[in.id()].requires_grad;
        }
        return push(std::move(value), needs, std::move(ids), needs ? std::move(fn) : nullptr);
    }

    const Matrix& value(std::size_t id) const { return nodes_.at(id).value; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Gradient of the last backward() for any node (zeros if unreached).
    Matrix grad(const Tensor& t) const {
        check_owner(t);
        const Node& n = nodes_[t.id()];
        if (n.grad.empty() && !n.value.empty()) return Matrix(n.value.rows(), n.value.cols());
        return n.grad;
    }

    /// Reverse sweep from a 1x1 tensor. Each recorded node is visited once.
    GradientMap backward(const Tensor& out) {
        check_owner(out);
        if (out.rows() != 1 || out.cols() != 1)
            throw std::logic_error("backward() requires a 1x1 tensor, got " + out.value().shape());
        for (auto& n : nodes_) n.grad = Matrix();
        Node& root = nodes_[out.id()];
        root.grad = Matrix(1, 1, 1.0);
        for (std::size_t k = out.id() + 1; k-- > 0;) {
            Node& n = nodes_[k];
            if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
            std::vector<Matrix*> slots(n.inputs.size(), nullptr);
            for (std::size_t s = 0; s < n.inputs.size(); ++s) {
                Node& in = nodes_[n.inputs[s]];
                if (!in.requires_grad) continue;
                if (in.grad.empty()) in.grad = Matrix(in.value.rows(), in.value.cols());
                slots[s] = &in.grad;
            }
            n.backward(*this, n.grad, slots);
        }
        GradientMap gm;
        for (auto [p, id] : bound_) {
            const Node& n = nodes_[id];
            gm.grads_.emplace(p, n.grad.empty() ? Matrix(n.value.rows(), n.value.cols()) : n.grad);
        }
        return gm;
    }

    void check_owner(const Tensor& t) const {
        if (t.tape() != this) throw std::logic_error("tensor belongs to a different tape");
    }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
    };

    Tensor push(Matrix v, bool rg, std::vector<std::size_t> inputs, BackwardFn fn) {
        nodes_.push_back(Node{std::move(v), Matrix(), rg, std::move(inputs), std::move(fn)});
        return Tensor(this, nodes_.size() - 1);
    }

    std::deque<Node> nodes_;
    std::unordered_map<const Parameter*, std::size_t> bound_;
};

inline const Matrix& Tensor::value() const {
    if (!tape_) throw std::logic_error("use of an unbound tensor");
    return tape_->value(id_);
}
inline bool Tensor::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

namespace detail {

inline Tape& same_tape(const Tensor& a, const Tensor& b) {
    if (a.tape() == nullptr || a.tape() != b.tape())
        throw std::logic_error("tensors from different tapes cannot be combined");
    return *a.tape();
}

inline void add_into(Matrix& dst, const Matrix& src, double scale = 1.0) {
    for (std::size_t k = 0; k < dst.size(); ++k) dst.data()[k] += scale * src.data()[k];
}

inline std::string shapes(const char* op, const Matrix& a, const Matrix& b) {
    return std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape();
}

}  // namespace detail

/// Same values, no gradient edge.
inline Tensor detach(const Tensor& t) { return t.tape()->constant(t.value()); }

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    Tape& tape = detail::same_tape(a, b);
    if (a.cols() != b.rows()) throw DimensionError(detail::shapes("matmul", a.value(), b.value()));
    const std::size_t ia = a.id(), ib = b.id();
    return tape.record(linalg::matmul(a.value(), b.value()), {a, b},
                       [ia, ib](const Tape& t, const Matrix& g, std::span<Matrix* const> gi) {
                           if (gi[0]) detail::add_into(*gi[0], linalg::matmul_nt(g, t.value(ib)));
                           if (gi[1]) detail::add_into(*gi[1], linalg::matmul_tn(t.value(ia), g));
                       });
}

/// s * d with s a constant sparse operator; gradient reaches d only.
inline Tensor spmm(std::shared_ptr<const SparseMatrix> s, const Tensor& d) {
    if (s->cols != d.rows())
        throw DimensionError("spmm: shape mismatch " + Matrix::shape_string(s->rows, s->cols) + " vs " +
                             d.value().shape());
    return d.tape()->record(linalg::spmm(*s, d.value()), {d},
                            [s](const Tape&, const Matrix& g, std::span<Matrix* const> gi) {
                                if (gi[0]) linalg::spmm_transposed_accumulate(*s, g, *gi[0]);
                            });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    Tape& tape = detail::same_tape(a, b);
    if (!a.value().same_shape(b.value())) throw DimensionError(detail::shapes("add", a.value(), b.value()));
    Matrix out = a.value();
    detail::add_into(out, b.value());
    return tape.record(std::move(out), {a, b}, [](const Tape&, const Matrix& g, std::span<Matrix* const> gi) {
        if (gi[0]) detail::add_into(*gi[0], g);
        if (gi[1]) detail::add_into(*gi[1], g);
    });
}

/// Elementwise product.
inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    Tape& tape = detail::same_tape(a, b);
    if (!a.value().same_shape(b.value())) throw DimensionError(detail::shapes("hadamard", a.value(), b.value()));
    Matrix out = a.value();
    for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] *= b.value().data()[k];
    const std::size_t ia = a.id(), ib = b.id();
    return tape.record(std::move(out), {a, b},
                       [ia, ib](const Tape& t, const Matrix& g, std::span<Matrix* const> gi) {
                           const auto& va = t.value(ia).data();
                           const auto& vb = t.value(ib).data();
                           for (std::size_t k = 0; k < g.size(); ++k) {
                               if (gi[0]) gi[0]->data()[k] += g.data()[k] * vb[k];
                               if (gi[1]) gi[1]->data()[k] += g.data()[k] * va[k];
                           }
                       });
}

inline Tensor scale(const Tensor& a, double c) {
    Matrix out = a.value();
    for (double& v : out.data()) v *= c;
    return a.tape()->record(std::move(out), {a}, [c](const Tape&, const Matrix& g, std::span<Matrix* const> gi) {
        if (gi[0]) detail::add_into(*gi[0], g, c);
    });
}

/// a + broadcast of the 1 x cols row vector b.
inline Tensor add_bias(const Tensor& a, const Tensor& b) {
    Tape& tape = detail::same_tape(a, b);
    if (b.rows() != 1 || b.cols() != a.cols()) throw DimensionError(detail::shapes("add_bias", a.value(), b.value()));
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b.value()(0, j);
    return tape.record(std::move(out), {a, b}, [](const Tape&, const Matrix& g, std::span<Matrix* const> gi) {
        if (gi[0]) detail::add_into(*gi[0], g);
        if (gi[1])
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) (*gi[1])(0, j) += g(i, j);
    });
}

/// Parametric ReLU with a single learnable 1x1 slope.
inline Tensor prelu(const Tensor& a, const Tensor& slope) {
    Tape& tape = detail::same_tape(a, slope);
    if (slope.rows() != 1 || slope.cols() != 1) throw DimensionError("prelu: slope must be 1x1, got " + slope.value().shape());
    const double s = slope.value()(0, 0);
    Matrix out = a.value();
    for (double& v : out.data())
        if (v < 0.0) v *= s;
    const std::size_t ia = a.id();
    return tape.record(std::move(out), {a, slope},
                       [ia, s](const Tape& t, const Matrix& g, std::span<Matrix* const> gi) {
                           const auto& x = t.value(ia).data();
                           double ds = 0.0;
                           for (std::size_t k = 0; k < g.size(); ++k) {
                               if (x[k] < 0.0) {
                                   if (gi[0]) gi[0]->data()[k] += s * g.data()[k];
                                   ds += x[k] * g.data()[k];
                               } else if (gi[0]) {
                                   gi[0]->data()[k] += g.data()[k];
                               }
                           }
                           if (gi[1]) (*gi[1])(0, 0) += ds;
                       });
}

/// Divides each row by max(||row||, eps).
inline Tensor row_l2_normalize(const Tensor& a, double eps = kNormEps) {
    if (!(eps > 0.0)) throw std::invalid_argument("row_l2_normalize: eps must be positive");
    const Matrix& x = a.value();
    Matrix out(x.rows(), x.cols());
    std::vector<double> norms(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        norms[i] = linalg::norm(x.row(i));
        const double d = std::max(norms[i], eps);
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) / d;
    }
    const std::size_t self = a.tape()->size();
    return a.tape()->record(std::move(out), {a},
                            [norms = std::move(norms), eps, self](const Tape& t, const Matrix& g,
                                                                  std::span<Matrix* const> gi) {
                                if (!gi[0]) return;
                                const Matrix& y = t.value(self);
                                for (std::size_t i = 0; i < g.rows(); ++i) {
                                    auto gr = g.row(i);
                                    auto dst = gi[0]->row(i);
                                    if (norms[i] > eps) {
                                        const double proj = linalg::dot(y.row(i), gr);
                                        for (std::size_t j = 0; j < gr.size(); ++j)
                                            dst[j] += (gr[j] - y(i, j) * proj) / norms[i];
                                    } else {
                                        for (std::size_t j = 0; j < gr.size(); ++j) dst[j] += gr[j] / eps;
                                    }
                                }
                            });
}

/// Index pairs (a_row, b_row) for row_cosine.
struct RowPairs {
    std::vector<NodeId> left;
    std::vector<NodeId> right;

    std::size_t size() const noexcept { return left.size(); }
    void push(NodeId i, NodeId j) {
        left.push_back(i);
        right.push_back(j);
    }
    static RowPairs diagonal(std::size_t n) {
        RowPairs p;
        for (std::size_t i = 0; i < n; ++i) p.push(static_cast<NodeId>(i), static_cast<NodeId>(i));
        return p;
    }
};

/// Column of cosines cos(a_i, b_j) for each (i, j) pair; norms clamped by eps.
inline Tensor row_cosine(const Tensor& a, const Tensor& b, std::shared_ptr<const RowPairs> pairs,
                         double eps = kNormEps) {
    Tape& tape = detail::same_tape(a, b);
    if (a.cols() != b.cols()) throw DimensionError(detail::shapes("row_cosine", a.value(), b.value()));
    const Matrix& va = a.value();
    const Matrix& vb = b.value();
    std::vector<double> na(va.rows()), nb(vb.rows());
    for (std::size_t i = 0; i < va.rows(); ++i) na[i] = linalg::norm(va.row(i));
    for (std::size_t i = 0; i < vb.rows(); ++i) nb[i] = linalg::norm(vb.row(i));
    const std::size_t m = pairs->size();
    Matrix out(m, 1);
    for (std::size_t k = 0; k < m; ++k) {
        const NodeId i = pairs->left[k], j = pairs->right[k];
        if (i >= va.rows() || j >= vb.rows())
            throw std::out_of_range("row_cosine: pair (" + std::to_string(i) + ", " + std::to_string(j) +
                                    ") out of range");
        out(k, 0) = linalg::dot(va.row(i), vb.row(j)) / (std::max(na[i], eps) * std::max(nb[j], eps));
    }
    const std::size_t ia = a.id(), ib = b.id(), self = tape.size();
    return tape.record(
        std::move(out), {a, b},
        [=, na = std::move(na), nb = std::move(nb)](const Tape& t, const Matrix& g, std::span<Matrix* const> gi) {
            const Matrix& xa = t.value(ia);
            const Matrix& xb = t.value(ib);
            const Matrix& c = t.value(self);
            for (std::size_t k = 0; k < pairs->size(); ++k) {
                const double gk = g(k, 0);
                if (gk == 0.0) continue;
                const NodeId i = pairs->left[k], j = pairs->right[k];
                const double da = std::max(na[i], eps), db = std::max(nb[j], eps);
                const auto ra = xa.row(i);
                const auto rb = xb.row(j);
                // d cos / d a = b/(da db) - [na > eps] cos a / na^2, and symmetrically for b.
                if (gi[0]) {
                    auto dst = gi[0]->row(i);
                    const double self_coef = na[i] > eps ? c(k, 0) / (na[i] * na[i]) : 0.0;
                    for (std::size_t q = 0; q < ra.size(); ++q)
                        dst[q] += gk * (rb[q] / (da * db) - self_coef * ra[q]);
                }
                if (gi[1]) {
                    auto dst = gi[1]->row(j);
                    const double self_coef = nb[j] > eps ? c(k, 0) / (nb[j] * nb[j]) : 0.0;
                    for (std::size_t q = 0; q < rb.size(); ++q)
                        dst[q] += gk * (ra[q] / (da * db) - self_coef * rb[q]);
                }
            }
        });
}

/// Sum of all entries, as a 1x1 tensor.
inline Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return a.tape()->record(Matrix(1, 1, s), {a}, [](const Tape&, const Matrix& g, std::span<Matrix* const> gi) {
        if (gi[0])
            for (double& v : gi[0]->data()) v += g(0, 0);
    });
}

/// sum_k w_k * a_k over a column tensor with constant weights, as a 1x1 tensor.
inline Tensor weighted_sum(const Tensor& a, std::shared_ptr<const std::vector<double>> w) {
    if (a.cols() != 1 || a.rows() != w->size())
        throw DimensionError("weighted_sum: column " + a.value().shape() + " vs " + std::to_string(w->size()) +
                             " weights");
    double s = 0.0;
    for (std::size_t k = 0; k < w->size(); ++k) s += (*w)[k] * a.value()(k, 0);
    return a.tape()->record(Matrix(1, 1, s), {a}, [w](const Tape&, const Matrix& g, std::span<Matrix* const> gi) {
        if (!gi[0]) return;
        for (std::size_t k = 0; k < w->size(); ++k) (*gi[0])(k, 0) += g(0, 0) * (*w)[k];
    });
}

/// Softmax of e/tau within each segment [offsets[s], offsets[s+1]) of a column.
inline Tensor segment_softmax(const Tensor& e, std::shared_ptr<const std::vector<std::size_t>> offsets, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("segment_softmax: tau must be positive");
    if (e.cols() != 1 || offsets->empty() || offsets->back() != e.rows())
        throw DimensionError("segment_softmax: offsets do not cover column " + e.value().shape());
    Matrix w(e.rows(), 1);
    for (std::size_t s = 0; s + 1 < offsets->size(); ++s) {
        const std::size_t lo = (*offsets)[s], hi = (*offsets)[s + 1];
        if (lo == hi) continue;
        double mx = e.value()(lo, 0);
        for (std::size_t k = lo; k < hi; ++k) mx = std::max(mx, e.value()(k, 0));
        double z = 0.0;
        for (std::size_t k = lo; k < hi; ++k) z += (w(k, 0) = std::exp((e.value()(k, 0) - mx) / tau));
        for (std::size_t k = lo; k < hi; ++k) w(k, 0) /= z;
    }
    const std::size_t self = e.tape()->size();
    return e.tape()->record(std::move(w), {e},
                            [offsets, tau, self](const Tape& t, const Matrix& g, std::span<Matrix* const> gi) {
                                if (!gi[0]) return;
                                const Matrix& y = t.value(self);
                                for (std::size_t s = 0; s + 1 < offsets->size(); ++s) {
                                    const std::size_t lo = (*offsets)[s], hi = (*offsets)[s + 1];
                                    double inner = 0.0;
                                    for (std::size_t k = lo; k < hi; ++k) inner += y(k, 0) * g(k, 0);
                                    for (std::size_t k = lo; k < hi; ++k)
                                        (*gi[0])(k, 0) += y(k, 0) * (g(k, 0) - inner) / tau;
                                }
                            });
}

/// Per-column batch statistics (biased variance).
struct BatchStats {
    Matrix mean;
    Matrix var;
};

inline BatchStats column_stats(const Matrix& x) {
    BatchStats st{Matrix(1, x.cols()), Matrix(1, x.cols())};
    const double n = static_cast<double>(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) st.mean(0, j) += x(i, j);
    for (std::size_t j = 0; j < x.cols(); ++j) st.mean(0, j) /= n;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double d = x(i, j) - st.mean(0, j);
            st.var(0, j) += d * d;
        }
    for (std::size_t j = 0; j < x.cols(); ++j) st.var(0, j) /= n;
    return st;
}

/// Batch normalization over rows using the batch's own statistics. The
/// variance is clamped below by var_floor; a clamped column passes no
/// gradient through its variance.
inline Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double var_floor,
                               BatchStats* stats_out = nullptr) {
    Tape& tape = detail::same_tape(x, gamma);
    detail::same_tape(x, beta);
    const std::size_t d = x.cols(), n = x.rows();
    if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d)
        throw DimensionError(detail::shapes("batch_norm", x.value(), gamma.value()));
    if (n == 0) throw DimensionError("batch_norm: empty batch");
    BatchStats st = column_stats(x.value());
    std::vector<double> inv_std(d);
    std::vector<bool> clamped(d);
    for (std::size_t j = 0; j < d; ++j) {
        clamped[j] = !(st.var(0, j) > var_floor);
        inv_std[j] = 1.0 / std::sqrt(std::max(st.var(0, j), var_floor));
    }
    Matrix xhat(n, d), out(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            xhat(i, j) = (x.value()(i, j) - st.mean(0, j)) * inv_std[j];
            out(i, j) = gamma.value()(0, j) * xhat(i, j) + beta.value()(0, j);
        }
    if (stats_out) *stats_out = st;
    const std::size_t ig = gamma.id();
    return tape.record(
        std::move(out), {x, gamma, beta},
        [=, xhat = std::move(xhat), inv_std = std::move(inv_std), clamped = std::move(clamped)](
            const Tape& t, const Matrix& g, std::span<Matrix* const> gi) {
            const Matrix& gm = t.value(ig);
            const double nn = static_cast<double>(n);
            for (std::size_t j = 0; j < d; ++j) {
                double sum_g = 0.0, sum_gx = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    sum_g += g(i, j);
                    sum_gx += g(i, j) * xhat(i, j);
                }
                if (gi[1]) (*gi[1])(0, j) += sum_gx;
                if (gi[2]) (*gi[2])(0, j) += sum_g;
                if (gi[0]) {
                    const double mean_g = sum_g / nn;
                    const double mean_gx = clamped[j] ? 0.0 : sum_gx / nn;
                    const double coef = gm(0, j) * inv_std[j];
                    for (std::size_t i = 0; i < n; ++i)
                        (*gi[0])(i, j) += coef * (g(i, j) - mean_g - xhat(i, j) * mean_gx);
                }
            }
        });
}

/// Batch normalization with fixed (running) statistics.
inline Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Matrix& mean,
                              const Matrix& var, double var_floor) {
    Tape& tape = detail::same_tape(x, gamma);
    detail::same_tape(x, beta);
    const std::size_t d = x.cols(), n = x.rows();
    if (gamma.cols() != d || beta.cols() != d || mean.cols() != d || var.cols() != d)
        throw DimensionError(detail::shapes("batch_norm", x.value(), gamma.value()));
    std::vector<double> inv_std(d);
    for (std::size_t j = 0; j < d; ++j) inv_std[j] = 1.0 / std::sqrt(std::max(var(0, j), var_floor));
    Matrix xhat(n, d), out(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            xhat(i, j) = (x.value()(i, j) - mean(0, j)) * inv_std[j];
            out(i, j) = gamma.value()(0, j) * xhat(i, j) + beta.value()(0, j);
        }
    const std::size_t ig = gamma.id();
    return tape.record(std::move(out), {x, gamma, beta},
                       [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Tape& t, const Matrix& g,
                                                                                 std::span<Matrix* const> gi) {
                           const Matrix& gm = t.value(ig);
                           for (std::size_t i = 0; i < n; ++i)
                               for (std::size_t j = 0; j < d; ++j) {
                                   if (gi[0]) (*gi[0])(i, j) += g(i, j) * gm(0, j) * inv_std[j];
                                   if (gi[1]) (*gi[1])(0, j) += g(i, j) * xhat(i, j);
                                   if (gi[2]) (*gi[2])(0, j) += g(i, j);
                               }
                       });
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst;  ///< "name[r,c]" of the worst entry
};

/// Compares reverse-mode gradients of `f` with central differences of step
/// h, entry by entry over every parameter. Error per entry is
/// |analytic - numeric| / (|analytic| + |numeric| + 1e-12).
inline GradCheckResult finite_diff_check(const std::function<Tensor(Tape&)>& f, std::span<Parameter* const> params,
                                         double h = 1e-5) {
    GradientMap analytic;
    {
        Tape tape;
        Tensor out = f(tape);
        analytic = tape.backward(out);
    }
    auto eval = [&] {
        Tape tape;
        return f(tape).scalar();
    };
    GradCheckResult res;
    for (Parameter* p : params) {
        const Matrix ga = analytic.at(*p);
        for (std::size_t k = 0; k < p->value.size(); ++k) {
            const double orig = p->value.data()[k];
            p->value.data()[k] = orig + h;
            const double fp = eval();
            p->value.data()[k] = orig - h;
            const double fm = eval();
            p->value.data()[k] = orig;
            const double num = (fp - fm) / (2.0 * h);
            const double an = ga.data()[k];
            const double err = std::abs(an - num) / (std::abs(an) + std::abs(num) + 1e-12);
            if (res.worst.empty() || err > res.max_rel_error) {
                res.max_rel_error = err;
                const std::size_t c = p->value.cols();
                res.worst = p->name + "[" + std::to_string(k / c) + "," + std::to_string(k % c) + "]";
            }
        }
    }
    return res;
}

}  // namespace ad
}  // namespace blnn

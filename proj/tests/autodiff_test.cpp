#include "blnn/autodiff.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "test_util.hpp"

namespace blnn::ad {
namespace {

using testing::random_matrix;

constexpr double kH = 1e-5;
constexpr double kPrimitiveTol = 1e-5;

// Contract the op output with a fixed random matrix so that no gradient
// vanishes by symmetry.
Tensor readout(Tape& t, const Tensor& y, const Matrix& r) { return sum(hadamard(y, t.constant(r))); }

TEST(Tensor, RowNormalizeThreeFourFive) {
    Tape t;
    auto y = row_l2_normalize(t.constant(Matrix::from_rows({{3, 4}})));
    EXPECT_DOUBLE_EQ(y.value()(0, 0), 0.6);
    EXPECT_DOUBLE_EQ(y.value()(0, 1), 0.8);
}

TEST(Tensor, PreluSlopeOneIsIdentity) {
    Tape t;
    Rng rng = make_rng(1);
    const Matrix x = random_matrix(4, 3, rng);
    EXPECT_EQ(prelu(t.constant(x), t.constant(Matrix(1, 1, 1.0))).value(), x);
}

TEST(Tensor, SpmmIdentity) {
    Tape t;
    Rng rng = make_rng(2);
    const Matrix x = random_matrix(5, 3, rng);
    auto eye = std::make_shared<const SparseMatrix>(SparseMatrix::identity(5));
    EXPECT_EQ(spmm(eye, t.constant(x)).value(), x);
}

TEST(Tensor, ShapeMismatchNamesBothShapes) {
    Tape t;
    try {
        matmul(t.constant(Matrix(2, 3)), t.constant(Matrix(2, 3)));
        FAIL();
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("(2x3)"), std::string::npos) << msg;
    }
    EXPECT_THROW(add(t.constant(Matrix(2, 3)), t.constant(Matrix(3, 2))), DimensionError);
    EXPECT_THROW(add_bias(t.constant(Matrix(2, 3)), t.constant(Matrix(1, 2))), DimensionError);
}

TEST(Tensor, MixingTapesIsRejected) {
    Tape a, b;
    EXPECT_THROW(add(a.constant(Matrix(1, 1)), b.constant(Matrix(1, 1))), std::logic_error);
}

TEST(RowCosine, Examples) {
    Tape t;
    auto a = t.constant(Matrix::from_rows({{1, 2}, {1, 0}}));
    auto b = t.constant(Matrix::from_rows({{2, 1}, {0, 1}}));
    auto pairs = std::make_shared<RowPairs>();
    pairs->push(0, 0);  // [1,2]·[2,1] = 4/5
    pairs->push(1, 1);  // orthogonal
    auto c = row_cosine(a, b, pairs);
    EXPECT_NEAR(c.value()(0, 0), 0.8, 1e-15);
    EXPECT_EQ(c.value()(1, 0), 0.0);
    auto self = row_cosine(a, a, std::make_shared<const RowPairs>(RowPairs::diagonal(2)));
    EXPECT_NEAR(self.value()(0, 0), 1.0, 1e-15);
    EXPECT_NEAR(self.value()(1, 0), 1.0, 1e-15);
}

TEST(RowCosine, ZeroRowIsClampedNotError) {
    Tape t;
    auto a = t.variable(Matrix(1, 2, 0.0));
    auto b = t.constant(Matrix::from_rows({{1, 0}}));
    auto c = row_cosine(a, b, std::make_shared<const RowPairs>(RowPairs::diagonal(1)));
    EXPECT_EQ(c.value()(0, 0), 0.0);
    t.backward(sum(c));
    EXPECT_TRUE(linalg::all_finite(t.grad(a)));
}

TEST(RowCosine, OutOfRangePair) {
    Tape t;
    auto pairs = std::make_shared<RowPairs>();
    pairs->push(0, 5);
    EXPECT_THROW(row_cosine(t.constant(Matrix(2, 2, 1.0)), t.constant(Matrix(2, 2, 1.0)), pairs), std::out_of_range);
}

TEST(Backward, LinearScale) {
    Tape t;
    Rng rng = make_rng(3);
    auto x = t.variable(random_matrix(3, 2, rng));
    t.backward(sum(scale(x, 2.0)));
    EXPECT_EQ(t.grad(x), Matrix(3, 2, 2.0));
}

TEST(Backward, FanOutAccumulates) {
    Tape t;
    Rng rng = make_rng(4);
    auto x = t.variable(random_matrix(3, 2, rng));
    t.backward(sum(add(x, x)));
    EXPECT_EQ(t.grad(x), Matrix(3, 2, 2.0));
}

TEST(Backward, AccumulationIsLinearInUseCount) {
    Rng rng = make_rng(5);
    const Matrix x0 = random_matrix(4, 3, rng);
    const Matrix r = random_matrix(4, 3, rng);
    auto grad_with_uses = [&](int k) {
        Tape t;
        auto x = t.variable(x0);
        auto f = [&] { return prelu(row_l2_normalize(x), t.constant(Matrix(1, 1, 0.3))); };
        Tensor acc = f();
        for (int i = 1; i < k; ++i) acc = add(acc, f());
        t.backward(readout(t, acc, r));
        return t.grad(x);
    };
    const Matrix g1 = grad_with_uses(1);
    const Matrix g3 = grad_with_uses(3);
    for (std::size_t q = 0; q < g1.size(); ++q) EXPECT_NEAR(g3.data()[q], 3.0 * g1.data()[q], 1e-12);
}

TEST(Backward, NonScalarIsUsageError) {
    Tape t;
    auto x = t.variable(Matrix(2, 2, 1.0));
    EXPECT_THROW(t.backward(x), std::logic_error);
}

TEST(Detach, Contract) {
    Tape t;
    Rng rng = make_rng(6);
    auto x = t.variable(random_matrix(3, 3, rng));
    auto d = detach(x);
    EXPECT_FALSE(d.requires_grad());
    EXPECT_EQ(d.value(), x.value());
    t.backward(sum(hadamard(d, d)));
    EXPECT_EQ(t.grad(x), Matrix(3, 3, 0.0));
}

TEST(Detach, CosineAgainstDetachedSelfMatchesFiniteDifferences) {
    Rng rng = make_rng(8);
    Parameter p{"x", random_matrix(5, 4, rng)};
    std::vector<Parameter*> ps{&p};
    const auto pairs = std::make_shared<const RowPairs>(RowPairs::diagonal(5));
    const Matrix frozen = p.value;
    auto f = [&](Tape& t) { return sum(row_cosine(t.param(p), detach(t.constant(frozen)), pairs)); };

    // At x == frozen every cosine sits at its maximum of 1: both derivatives vanish.
    {
        Tape t;
        const auto g = t.backward(f(t)).at(p);
        for (double v : g.data()) EXPECT_LT(std::abs(v), 1e-12);
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            const double x0 = p.value.data()[k];
            p.value.data()[k] = x0 + kH;
            Tape tp;
            const double fp = f(tp).scalar();
            p.value.data()[k] = x0 - kH;
            Tape tm;
            const double fm = f(tm).scalar();
            p.value.data()[k] = x0;
            EXPECT_LT(std::abs((fp - fm) / (2 * kH)), 1e-9);
        }
    }
    // Away from the maximum the relative comparison is meaningful.
    for (double& v : p.value.data()) v += 0.3 * (2.0 * uniform01(rng) - 1.0);
    const auto res = finite_diff_check(f, ps, kH);
    EXPECT_LT(res.max_rel_error, 1e-6) << res.worst;
}

TEST(Detach, PerturbingDetachedInputChangesLossButNotGradient) {
    Rng rng = make_rng(9);
    const Matrix x0 = random_matrix(3, 3, rng);
    auto loss = [&](const Matrix& xv, Matrix* grad) {
        Tape t;
        auto x = t.variable(xv);
        auto l = sum(row_cosine(t.constant(Matrix(3, 3, 1.0)), detach(x),
                                std::make_shared<const RowPairs>(RowPairs::diagonal(3))));
        t.backward(l);
        if (grad) *grad = t.grad(x);
        return l.scalar();
    };
    Matrix g;
    Matrix x1 = x0;
    x1(0, 0) += 0.5;
    EXPECT_NE(loss(x0, &g), loss(x1, nullptr));
    EXPECT_EQ(g, Matrix(3, 3, 0.0));
}

TEST(FiniteDiff, Quadratic) {
    Rng rng = make_rng(10);
    Parameter p{"x", random_matrix(4, 4, rng)};
    std::vector<Parameter*> ps{&p};
    auto res = finite_diff_check([&](Tape& t) { auto x = t.param(p); return sum(hadamard(x, x)); }, ps, 1e-5);
    EXPECT_LT(res.max_rel_error, 1e-8);
}

TEST(FiniteDiff, ConstantFunction) {
    Parameter p{"x", Matrix(2, 2, 0.5)};
    std::vector<Parameter*> ps{&p};
    auto res = finite_diff_check([&](Tape& t) { t.param(p); return t.constant(Matrix(1, 1, 3.0)); }, ps, 1e-5);
    EXPECT_EQ(res.max_rel_error, 0.0);
}

// Every primitive against central differences on inputs in [-1, 1].
class PrimitiveGradient : public ::testing::TestWithParam<int> {};

TEST_P(PrimitiveGradient, MatchesCentralDifferences) {
    Rng rng = make_rng(100 + static_cast<std::uint64_t>(GetParam()));
    Parameter a{"a", random_matrix(6, 4, rng)};
    Parameter b{"b", random_matrix(4, 3, rng)};
    Parameter c{"c", random_matrix(6, 4, rng)};
    Parameter bias{"bias", random_matrix(1, 4, rng)};
    Parameter slope{"slope", Matrix(1, 1, 0.25)};
    Parameter gamma{"gamma", random_matrix(1, 4, rng, 0.5, 1.5)};
    Parameter beta{"beta", random_matrix(1, 4, rng)};
    const Matrix r64 = random_matrix(6, 4, rng);
    const Matrix r63 = random_matrix(6, 3, rng);
    const Matrix run_mean = random_matrix(1, 4, rng);
    const Matrix run_var = random_matrix(1, 4, rng, 0.5, 2.0);
    Rng grng = make_rng(200 + static_cast<std::uint64_t>(GetParam()));
    const auto g = testing::random_graph(6, 0.4, 1, grng);
    const auto adj = std::make_shared<const SparseMatrix>(normalize_adjacency(g));
    auto pairs = std::make_shared<RowPairs>();
    for (NodeId i = 0; i < 6; ++i)
        for (NodeId j = 0; j < 6; ++j)
            if ((i + 2 * j) % 3 == 0) pairs->push(i, j);
    const auto w = std::make_shared<const std::vector<double>>([&] {
        std::vector<double> v(pairs->size());
        for (double& x : v) x = 2.0 * uniform01(rng) - 1.0;
        return v;
    }());
    auto offsets = std::make_shared<const std::vector<std::size_t>>([&] {
        std::vector<std::size_t> o{0};
        std::size_t k = 0;
        while (k < pairs->size()) {
            k = std::min(pairs->size(), k + 1 + static_cast<std::size_t>(uniform01(rng) * 4));
            o.push_back(k);
        }
        return o;
    }());

    struct Case {
        const char* name;
        std::function<Tensor(Tape&)> f;
        std::vector<Parameter*> params;
    };
    std::vector<Case> cases{
        {"matmul", [&](Tape& t) { return readout(t, matmul(t.param(a), t.param(b)), r63); }, {&a, &b}},
        {"spmm", [&](Tape& t) { return readout(t, spmm(adj, t.param(a)), r64); }, {&a}},
        {"add", [&](Tape& t) { return readout(t, add(t.param(a), t.param(c)), r64); }, {&a, &c}},
        {"hadamard", [&](Tape& t) { return readout(t, hadamard(t.param(a), t.param(c)), r64); }, {&a, &c}},
        {"scale", [&](Tape& t) { return readout(t, scale(t.param(a), -1.7), r64); }, {&a}},
        {"add_bias", [&](Tape& t) { return readout(t, add_bias(t.param(a), t.param(bias)), r64); }, {&a, &bias}},
        {"prelu", [&](Tape& t) { return readout(t, prelu(t.param(a), t.param(slope)), r64); }, {&a, &slope}},
        {"row_l2_normalize", [&](Tape& t) { return readout(t, row_l2_normalize(t.param(a)), r64); }, {&a}},
        {"row_cosine", [&](Tape& t) { return weighted_sum(row_cosine(t.param(a), t.param(c), pairs), w); }, {&a, &c}},
        {"segment_softmax",
         [&](Tape& t) {
             return weighted_sum(segment_softmax(row_cosine(t.param(a), t.param(c), pairs), offsets, 0.5), w);
         },
         {&a, &c}},
        {"batch_norm_train",
         [&](Tape& t) {
             return readout(t, batch_norm_train(t.param(a), t.param(gamma), t.param(beta), 1e-5), r64);
         },
         {&a, &gamma, &beta}},
        {"batch_norm_eval",
         [&](Tape& t) {
             return readout(t, batch_norm_eval(t.param(a), t.param(gamma), t.param(beta), run_mean, run_var, 1e-5), r64);
         },
         {&a, &gamma, &beta}},
    };
    for (auto& cs : cases) {
        const auto res = finite_diff_check(cs.f, cs.params, kH);
        EXPECT_LT(res.max_rel_error, kPrimitiveTol) << cs.name << " worst " << res.worst;
    }
}

INSTANTIATE_TEST_SUITE_P(RandomInputs, PrimitiveGradient, ::testing::Range(0, 5));

TEST(RowNormalize, UnitNormRows) {
    Rng rng = make_rng(12);
    Tape t;
    auto y = row_l2_normalize(t.constant(random_matrix(20, 7, rng)));
    for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(linalg::norm(y.value().row(i)), 1.0, 1e-12);
}

TEST(BatchNorm, SingleRowUsesVarianceClamp) {
    Tape t;
    auto x = t.variable(Matrix::from_rows({{1.0, -2.0}}));
    auto y = batch_norm_train(x, t.constant(Matrix(1, 2, 1.0)), t.constant(Matrix(1, 2, 0.0)), 1e-5);
    EXPECT_EQ(y.value(), Matrix(1, 2, 0.0));
    t.backward(sum(y));
    EXPECT_TRUE(linalg::all_finite(t.grad(x)));
}

TEST(SegmentSoftmax, SegmentsSumToOne) {
    Tape t;
    auto e = t.constant(Matrix(5, 1, std::vector<double>{0.1, 0.4, -0.3, 2.0, 0.0}));
    auto off = std::make_shared<const std::vector<std::size_t>>(std::vector<std::size_t>{0, 2, 2, 5});
    auto w = segment_softmax(e, off, 0.7);
    EXPECT_NEAR(w.value()(0, 0) + w.value()(1, 0), 1.0, 1e-15);
    EXPECT_NEAR(w.value()(2, 0) + w.value()(3, 0) + w.value()(4, 0), 1.0, 1e-15);
}

}  // namespace
}  // namespace blnn::ad

#include "blnn/evaluation.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace blnn {
namespace {

using testing::random_matrix;

Labels make_labels(std::vector<int> v) {
    int k = 0;
    for (int x : v) k = std::max(k, x + 1);
    return Labels{std::move(v), k};
}

Labels cyclic_labels(std::size_t n, int k) {
    std::vector<int> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<int>(i % static_cast<std::size_t>(k));
    return Labels{v, k};
}

// ---------------------------------------------------------------- splits

TEST(Splits, SizesFollowRatios) {
    const auto s = random_splits(cyclic_labels(100, 2), 0);
    EXPECT_EQ(s.train.size(), 10u);
    EXPECT_EQ(s.val.size(), 10u);
    EXPECT_EQ(s.test.size(), 80u);
    std::vector<NodeId> all = s.train;
    all.insert(all.end(), s.val.begin(), s.val.end());
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    for (NodeId i = 0; i < 100; ++i) EXPECT_EQ(all[i], i);
}

TEST(Splits, DeterministicPerSeedAndDistinctAcrossSeeds) {
    const auto labels = cyclic_labels(100, 2);
    EXPECT_EQ(random_splits(labels, 3).train, random_splits(labels, 3).train);
    EXPECT_NE(random_splits(labels, 3).test, random_splits(labels, 4).test);
}

TEST(Splits, SkipsUnlabeledAndRejectsTinyInputs) {
    std::vector<int> v(40, Labels::kUnknown);
    for (int i = 0; i < 20; ++i) v[static_cast<std::size_t>(i)] = i % 2;
    const auto s = random_splits(Labels{v, 2}, 0);
    EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), 20u);
    EXPECT_THROW(random_splits(cyclic_labels(3, 2), 0), ValidationError);
}

// ---------------------------------------------------------------- probe

TEST(LinearProbe, SeparableClustersAtPlusMinusE1) {
    Rng rng = make_rng(0);
    const std::size_t n = 200;
    Matrix h(n, 3);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(i % 2);
        h(i, 0) = y[i] ? 1.0 : -1.0;
        h(i, 1) = 0.3 * (2.0 * uniform01(rng) - 1.0);
        h(i, 2) = 0.3 * (2.0 * uniform01(rng) - 1.0);
    }
    const Labels labels{y, 2};
    for (std::uint64_t seed = 0; seed < 5; ++seed)
        EXPECT_EQ(linear_probe(h, labels, random_splits(labels, seed)).test_accuracy, 1.0);
    // Fitting and scoring on the train nodes themselves.
    Split self = random_splits(labels, 0);
    self.test = self.train;
    EXPECT_EQ(linear_probe(h, labels, self, {1e-8}).test_accuracy, 1.0);
}

TEST(LinearProbe, ShuffledLabelsAreAtChance) {
    Rng rng = make_rng(1);
    const std::size_t n = 2000;
    const Matrix h = random_matrix(n, 16, rng);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 10);
    std::shuffle(y.begin(), y.end(), rng);
    const Labels labels{y, 10};
    const double acc = linear_probe(h, labels, random_splits(labels, 0)).test_accuracy;
    EXPECT_NEAR(acc, 0.1, 0.03);
}

TEST(LinearProbe, ConstantEmbeddingsPredictTrainMajority) {
    const std::size_t n = 300;
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = i % 10 < 6 ? 0 : (i % 10 < 8 ? 1 : 2);
    const Labels labels{y, 3};
    const Matrix h(n, 4, 0.7);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto split = random_splits(labels, seed);
        std::vector<std::size_t> count(3, 0);
        for (NodeId i : split.train) ++count[static_cast<std::size_t>(y[i])];
        const int major = static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
        std::size_t hits = 0;
        for (NodeId i : split.test) hits += y[i] == major;
        EXPECT_DOUBLE_EQ(linear_probe(h, labels, split).test_accuracy,
                         static_cast<double>(hits) / static_cast<double>(split.test.size()));
    }
}

TEST(LinearProbe, ClassMissingFromTrainIsAnError) {
    const Labels labels = make_labels({0, 0, 0, 1});
    Split s{{0, 1}, {2}, {3}};
    EXPECT_THROW(linear_probe(Matrix(4, 2, 1.0), labels, s), ValidationError);
}

// ---------------------------------------------------------------- clustering metrics

// Brute-force mutual information and entropies by direct element counting.
struct Oracle {
    double hy = 0, hc = 0, mi = 0, hy_given_c = 0;
};

Oracle brute_force(const std::vector<int>& y, const std::vector<int>& c) {
    const double n = static_cast<double>(y.size());
    Oracle o;
    auto count = [&](auto pred) {
        double k = 0;
        for (std::size_t i = 0; i < y.size(); ++i) k += pred(i);
        return k;
    };
    for (int a = 0; a < 8; ++a) {
        const double pa = count([&](std::size_t i) { return y[i] == a; }) / n;
        if (pa > 0) o.hy -= pa * std::log(pa);
        const double pc = count([&](std::size_t i) { return c[i] == a; }) / n;
        if (pc > 0) o.hc -= pc * std::log(pc);
    }
    for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) {
            const double pab = count([&](std::size_t i) { return y[i] == a && c[i] == b; }) / n;
            if (pab == 0) continue;
            const double pa = count([&](std::size_t i) { return y[i] == a; }) / n;
            const double pb = count([&](std::size_t i) { return c[i] == b; }) / n;
            o.mi += pab * std::log(pab / (pa * pb));
            o.hy_given_c -= pab * std::log(pab / pb);
        }
    return o;
}

// Every labeling of n elements into at most k classes, up to renaming of
// classes (restricted growth strings). Both metrics are invariant to renaming.
void partitions(std::size_t n, int k, std::vector<int>& cur, int used, std::vector<std::vector<int>>& out) {
    if (cur.size() == n) {
        out.push_back(cur);
        return;
    }
    for (int v = 0; v <= std::min(used, k - 1); ++v) {
        cur.push_back(v);
        partitions(n, k, cur, std::max(used, v + 1), out);
        cur.pop_back();
    }
}

TEST(ClusteringMetrics, ExhaustiveOracleUpToEightElements) {
    std::size_t checked = 0;
    for (std::size_t n = 1; n <= 8; ++n) {
        std::vector<std::vector<int>> all;
        std::vector<int> cur;
        partitions(n, 3, cur, 0, all);
        for (const auto& y : all)
            for (const auto& c : all) {
                const Oracle o = brute_force(y, c);
                const double expect_nmi = o.hy + o.hc == 0 ? 1.0 : 2 * o.mi / (o.hy + o.hc);
                ASSERT_NEAR(nmi(y, c), expect_nmi, 1e-12);
                if (o.hy > 0) {
                    ASSERT_NEAR(homogeneity(y, c), 1.0 - o.hy_given_c / o.hy, 1e-12);
                } else {
                    ASSERT_THROW(homogeneity(y, c), UndefinedError);
                }
                ++checked;
            }
    }
    EXPECT_GT(checked, 1000000u);
}

TEST(ClusteringMetrics, RenamingInvariance) {
    const std::vector<int> y{0, 0, 1, 2, 2, 1, 0};
    const std::vector<int> c{1, 1, 0, 0, 2, 2, 1};
    const std::vector<int> y2{7, 7, -3, 4, 4, -3, 7};
    const std::vector<int> c2{9, 9, 5, 5, 0, 0, 9};
    EXPECT_DOUBLE_EQ(nmi(y, c), nmi(y2, c2));
    EXPECT_DOUBLE_EQ(homogeneity(y, c), homogeneity(y2, c2));
}

TEST(ClusteringMetrics, HandExamples) {
    const std::vector<int> y{0, 0, 1, 1};
    EXPECT_DOUBLE_EQ(nmi(y, y), 1.0);
    EXPECT_NEAR(nmi(y, std::vector<int>{0, 1, 0, 1}), 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(homogeneity(y, std::vector<int>{0, 0, 1, 1}), 1.0);
    EXPECT_NEAR(homogeneity(y, std::vector<int>{0, 0, 0, 0}), 0.0, 1e-15);
    const double h13 = -(1.0 / 3) * std::log(1.0 / 3) - (2.0 / 3) * std::log(2.0 / 3);
    EXPECT_NEAR(homogeneity(y, std::vector<int>{0, 0, 0, 1}), 1.0 - 0.75 * h13 / std::log(2.0), 1e-12);
    EXPECT_THROW(nmi(y, std::vector<int>{0, 1}), std::invalid_argument);
}

TEST(ClusteringMetrics, IndependentAssignmentsHaveLowNmi) {
    Rng rng = make_rng(2);
    std::vector<int> y(2000), c(2000);
    for (std::size_t i = 0; i < 2000; ++i) {
        y[i] = static_cast<int>(uniform01(rng) * 5);
        c[i] = static_cast<int>(uniform01(rng) * 5);
    }
    EXPECT_LT(nmi(y, c), 0.05);
}

// ---------------------------------------------------------------- k-means

TEST(KMeans, SeparatesFarClusters) {
    Rng rng = make_rng(3);
    Matrix x(60, 2);
    std::vector<int> y(60);
    for (std::size_t i = 0; i < 60; ++i) {
        y[i] = i < 30 ? 0 : 1;
        x(i, 0) = (y[i] ? 100.0 : -100.0) + uniform01(rng);
        x(i, 1) = uniform01(rng);
    }
    EXPECT_DOUBLE_EQ(nmi(y, kmeans(x, 2, 0).assignments), 1.0);
}

TEST(KMeans, DegenerateCounts) {
    Rng rng = make_rng(4);
    const Matrix x = random_matrix(12, 3, rng);
    std::vector<int> y(12);
    for (std::size_t i = 0; i < 12; ++i) y[i] = static_cast<int>(i % 3);
    const auto one = kmeans(x, 1, 0);
    for (int a : one.assignments) EXPECT_EQ(a, 0);
    EXPECT_NEAR(nmi(y, one.assignments), 0.0, 1e-15);
    const auto all = kmeans(x, 12, 0);
    EXPECT_DOUBLE_EQ(homogeneity(y, all.assignments), 1.0);
    std::vector<int> sorted = all.assignments;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 12; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
    EXPECT_NEAR(all.inertia, 0.0, 1e-20);
}

TEST(KMeans, DeterministicPerSeed) {
    Rng rng = make_rng(5);
    const Matrix x = random_matrix(80, 4, rng);
    EXPECT_EQ(kmeans(x, 4, 9).assignments, kmeans(x, 4, 9).assignments);
}

// ---------------------------------------------------------------- S@k

TEST(SAtK, TwoOrthogonalPairs) {
    const Matrix h = Matrix::from_rows({{1, 0}, {2, 0}, {0, 1}, {0, 3}});
    EXPECT_DOUBLE_EQ(s_at_k(h, make_labels({0, 0, 1, 1}), 1), 1.0);
}

TEST(SAtK, SingleClassIsOne) {
    Rng rng = make_rng(6);
    const Matrix h = random_matrix(10, 3, rng);
    for (std::size_t k : {1u, 5u, 9u}) EXPECT_DOUBLE_EQ(s_at_k(h, make_labels(std::vector<int>(10, 0)), k), 1.0);
}

TEST(SAtK, IdenticalEmbeddingsFollowIndexTieBreak) {
    const std::size_t n = 10;
    const auto labels = cyclic_labels(n, 2);
    const Matrix h(n, 3, 1.0);
    for (std::size_t k : {1u, 3u}) {
        // Every other node ties; the k lowest indices other than self win.
        double oracle = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t taken = 0, same = 0;
            for (std::size_t j = 0; j < n && taken < k; ++j) {
                if (j == i) continue;
                ++taken;
                same += labels[static_cast<NodeId>(j)] == labels[static_cast<NodeId>(i)];
            }
            oracle += static_cast<double>(same) / static_cast<double>(k);
        }
        EXPECT_DOUBLE_EQ(s_at_k(h, labels, k), oracle / static_cast<double>(n));
    }
    // k = 1: node 0 picks node 1 (other label); every other node picks node 0,
    // which matches only the even nodes 2, 4, 6, 8.
    EXPECT_DOUBLE_EQ(s_at_k(h, labels, 1), 0.4);
}

TEST(SAtK, RotationInvariant) {
    Rng rng = make_rng(7);
    const std::size_t d = 6;
    const Matrix h = random_matrix(40, d, rng);
    // Random orthogonal matrix by Gram-Schmidt.
    Matrix q = random_matrix(d, d, rng);
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t p = 0; p < c; ++p) {
            double dot = 0;
            for (std::size_t r = 0; r < d; ++r) dot += q(r, c) * q(r, p);
            for (std::size_t r = 0; r < d; ++r) q(r, c) -= dot * q(r, p);
        }
        double nn = 0;
        for (std::size_t r = 0; r < d; ++r) nn += q(r, c) * q(r, c);
        for (std::size_t r = 0; r < d; ++r) q(r, c) /= std::sqrt(nn);
    }
    const auto labels = cyclic_labels(40, 3);
    const Matrix rotated = linalg::matmul(h, q);
    for (std::size_t k : {1u, 5u, 10u}) EXPECT_NEAR(s_at_k(h, labels, k), s_at_k(rotated, labels, k), 1e-9);
}

TEST(SAtK, MultiKMatchesSingleK) {
    Rng rng = make_rng(13);
    const Matrix h = random_matrix(30, 4, rng);
    const auto labels = cyclic_labels(30, 3);
    const auto all = s_at_ks(h, labels, {10, 1, 5});
    for (std::size_t k : {1u, 5u, 10u}) EXPECT_EQ(all.at(k), s_at_k(h, labels, k));
}

TEST(SAtK, RejectsKAtLeastN) {
    EXPECT_THROW(s_at_k(Matrix(3, 2, 1.0), cyclic_labels(3, 2), 3), std::invalid_argument);
}

// ---------------------------------------------------------------- compactness

double compactness_oracle(const Matrix& h, const std::vector<int>& y) {
    std::map<int, std::pair<double, double>> per;  // sum of cosines, ordered pair count
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j)
            if (i != j && y[i] == y[j]) {
                per[y[i]].first += linalg::cosine(h.row(i), h.row(j));
                per[y[i]].second += 1;
            }
    double total = 0;
    for (auto& [cls, v] : per) total += v.first / v.second;
    return total / static_cast<double>(per.size());
}

TEST(Compactness, HandExampleMatchesDoubleLoop) {
    const Matrix h = Matrix::from_rows({{1, 0}, {1, 1}, {-1, 2}, {0.5, -3}});
    const std::vector<int> y{0, 0, 1, 1};
    EXPECT_NEAR(compactness(h, make_labels(y)), compactness_oracle(h, y), 1e-12);
    // Class 0: cos = 1/sqrt(2); class 1: (-0.5 - 6) / (sqrt(5) sqrt(9.25)).
    const double expect = 0.5 * (1.0 / std::sqrt(2.0) + (-6.5) / (std::sqrt(5.0) * std::sqrt(9.25)));
    EXPECT_NEAR(compactness(h, make_labels(y)), expect, 1e-12);
}

TEST(Compactness, RandomMatchesOracleAndLiteralScaling) {
    Rng rng = make_rng(8);
    const Matrix h = random_matrix(30, 5, rng);
    const auto labels = cyclic_labels(30, 3);
    EXPECT_NEAR(compactness(h, labels), compactness_oracle(h, labels.values), 1e-12);
    // Literal normalization divides by |class| = 10 instead of 10 * 9 pairs.
    EXPECT_NEAR(compactness(h, labels, true), 9.0 * compactness(h, labels), 1e-12);
}

TEST(Compactness, IdenticalIsOneOrthogonalIsZero) {
    EXPECT_NEAR(compactness(Matrix(6, 3, 2.0), cyclic_labels(6, 2)), 1.0, 1e-12);
    const Matrix h = Matrix::from_rows({{1, 0}, {0, 1}, {1, 1}, {2, 2}});
    // Class 0 contributes 0, class 1 contributes 1.
    EXPECT_NEAR(compactness(h, make_labels({0, 0, 1, 1})), 0.5, 1e-12);
}

TEST(Compactness, InvariantToPositiveRescaling) {
    Rng rng = make_rng(9);
    Matrix h = random_matrix(20, 4, rng);
    const auto labels = cyclic_labels(20, 2);
    const double before = compactness(h, labels);
    for (std::size_t i = 0; i < 20; ++i)
        for (double& v : h.row(i)) v *= 0.01 + 50.0 * static_cast<double>(i);
    EXPECT_NEAR(compactness(h, labels), before, 1e-12);
}

TEST(Compactness, SingletonClassNamed) {
    try {
        compactness(Matrix(3, 2, 1.0), make_labels({0, 0, 1}));
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
    }
}

// ---------------------------------------------------------------- profiles

TEST(Profiles, AllIntraGivesOnes) {
    Rng rng = make_rng(10);
    const auto g = testing::random_graph(30, 0.3, 2, rng);
    const NeighborList nb(g);
    SupportScores s{nb.row_ptr(), nb.col_idx(), std::vector<double>(nb.n_pairs())};
    for (double& w : s.weights) w = uniform01(rng);
    for (double v : weight_homophily_profile(s, make_labels(std::vector<int>(30, 1)), 4)) EXPECT_EQ(v, 1.0);
}

TEST(Profiles, LabelIndependentWeightsTrackGlobalHomophily) {
    Rng rng = make_rng(11);
    std::vector<double> key(5000);
    std::vector<bool> intra(5000);
    std::size_t same = 0;
    for (std::size_t q = 0; q < 5000; ++q) {
        key[q] = uniform01(rng);
        intra[q] = uniform01(rng) < 0.6;
        same += intra[q];
    }
    const double global = static_cast<double>(same) / 5000.0;
    for (double v : binned_homophily(key, intra, 5)) EXPECT_NEAR(v, global, 0.1);
}

TEST(Profiles, BinsAreAscendingInKey) {
    const std::vector<double> key{0.9, 0.1, 0.5, 0.3, 0.7, 0.2};
    const std::vector<bool> intra{true, false, true, false, true, false};
    const auto p = binned_homophily(key, intra, 3);
    EXPECT_EQ(p, (std::vector<double>{0.0, 0.5, 1.0}));
}

// ---------------------------------------------------------------- report

TEST(Report, AllMetricsInRange) {
    Rng rng = make_rng(12);
    const Matrix h = random_matrix(100, 6, rng);
    const auto labels = cyclic_labels(100, 3);
    const auto r = evaluate_embeddings(h, labels, 2);
    EXPECT_EQ(r.split_seed, 2u);
    for (double v : {r.accuracy, r.nmi, r.homogeneity}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(r.s_at_k.size(), 2u);
    EXPECT_GE(r.compactness, -1.0);
    EXPECT_LE(r.compactness, 1.0);
    const auto many = evaluate_embeddings(h, labels, std::vector<std::uint64_t>{1, 2});
    ASSERT_EQ(many.size(), 2u);
    EXPECT_EQ(many[1].accuracy, r.accuracy);
    EXPECT_EQ(many[1].nmi, r.nmi);
    EXPECT_EQ(many[1].s_at_k, r.s_at_k);
    EXPECT_EQ(many[1].compactness, r.compactness);
}

}  // namespace
}  // namespace blnn

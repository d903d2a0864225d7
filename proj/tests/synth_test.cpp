#include "blnn/synth.hpp"

#include <gtest/gtest.h>

namespace blnn {
namespace {

TEST(Sbm, NoInterClassEdgesMeansHomophilyOne) {
    SbmConfig c;
    c.p_inter = 0.0;
    const auto r = generate_sbm(c);
    EXPECT_EQ(edge_homophily(r.graph, r.labels), 1.0);
}

TEST(Sbm, EqualProbabilitiesGiveChanceHomophily) {
    SbmConfig c;
    c.n_nodes = 1000;
    c.n_classes = 4;
    c.p_intra = c.p_inter = 0.01;
    const auto r = generate_sbm(c);
    // (n/k - 1) / (n - 1) = 249 / 999.
    EXPECT_NEAR(edge_homophily(r.graph, r.labels), 249.0 / 999.0, 0.05);
}

TEST(Sbm, DefaultConfigHomophily) {
    // 0.05 * 99 / (0.05 * 99 + 0.005 * 200) = 0.8319...
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SbmConfig c;
        c.seed = seed;
        const auto r = generate_sbm(c);
        EXPECT_NEAR(edge_homophily(r.graph, r.labels), 0.832, 0.05) << "seed " << seed;
    }
}

TEST(Sbm, InvariantsAndBalancedLabels) {
    SbmConfig c;
    c.n_nodes = 301;
    c.feature_dim = 7;
    const auto r = generate_sbm(c);
    EXPECT_NO_THROW(r.graph.validate());
    EXPECT_NO_THROW(r.labels.validate());
    EXPECT_EQ(r.graph.n_nodes(), 301u);
    EXPECT_EQ(r.graph.n_features(), 7u);
    std::vector<std::size_t> count(3, 0);
    for (int y : r.labels.values) ++count[static_cast<std::size_t>(y)];
    for (std::size_t k : count) EXPECT_GE(k, 100u);
    EXPECT_TRUE(linalg::all_finite(r.graph.features()));
}

TEST(Sbm, DeterministicPerSeed) {
    SbmConfig c;
    c.seed = 17;
    const auto a = generate_sbm(c), b = generate_sbm(c);
    EXPECT_EQ(a.graph, b.graph);
    EXPECT_EQ(a.labels.values, b.labels.values);
    c.seed = 18;
    EXPECT_FALSE(generate_sbm(c).graph == a.graph);
}

TEST(Sbm, FeaturesCarryClassSignal) {
    SbmConfig c;
    c.class_mean_separation = 5.0;
    c.noise_std = 0.1;
    const auto r = generate_sbm(c);
    // Same-class feature rows are much closer than cross-class ones.
    const Matrix& x = r.graph.features();
    auto dist = [&](std::size_t i, std::size_t j) {
        double s = 0;
        for (std::size_t q = 0; q < x.cols(); ++q) s += (x(i, q) - x(j, q)) * (x(i, q) - x(j, q));
        return std::sqrt(s);
    };
    EXPECT_LT(dist(0, 1), dist(0, 299));
}

TEST(Sbm, SparseConfigWarnsButSucceeds) {
    SbmConfig c;
    c.p_intra = 0.001;
    c.p_inter = 0.0;
    const auto r = generate_sbm(c);
    ASSERT_TRUE(r.warning.has_value());
    EXPECT_NE(r.warning->find("expected degree"), std::string::npos);
    EXPECT_FALSE(generate_sbm(SbmConfig{}).warning.has_value());
}

TEST(Sbm, RejectsInvalidConfig) {
    SbmConfig c;
    c.p_inter = 0.1;
    c.p_intra = 0.05;
    EXPECT_THROW(generate_sbm(c), ConfigError);
    SbmConfig d;
    d.n_classes = 0;
    EXPECT_THROW(generate_sbm(d), ConfigError);
}

}  // namespace
}  // namespace blnn

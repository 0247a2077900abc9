#include <gtest/gtest.h>

#include <random>

#include "cmpcurve/rng.hpp"
#include "cmpcurve/spline_basis.hpp"
#include "cmpcurve/weighted_quantile.hpp"

using namespace cmpcurve;

namespace {

std::vector<double> uniform_grid() {
    std::vector<double> s;
    for (int i = 0; i <= 100; ++i) s.push_back(i / 100.0);
    return s;
}

// Full linear predictor of a spline with arbitrary fixed coefficients.
double spline_value(double x, const KnotSet& ks) {
    const BasisRow r = rcs_basis(x, ks);
    double f = 0.0;
    for (Eigen::Index j = 0; j < r.values.size(); ++j) f += (0.3 + 0.7 * static_cast<double>(j)) * r.values(j);
    return f;
}

}  // namespace

TEST(WeightedQuantile, Examples) {
    EXPECT_EQ(weighted_quantile(std::vector{1.0, 2.0, 3.0}, std::vector{1.0, 1.0, 1.0}, 0.5), 2.0);
    EXPECT_EQ(weighted_quantile(std::vector{1.0, 2.0}, std::vector{3.0, 1.0}, 0.7), 1.0);
    EXPECT_EQ(weighted_quantile(std::vector{4.0, 1.0, 3.0, 2.0}, std::vector{1.0, 1.0, 1.0, 1.0}, 0.999), 4.0);
}

TEST(WeightedQuantile, UnitWeightsGiveLeftContinuousEmpiricalQuantile) {
    Stream rng = derive_stream(1, StreamTag::Generic);
    std::normal_distribution<double> norm;
    std::vector<double> x(37);
    for (double& v : x) v = norm(rng);
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const std::vector<double> ones(x.size(), 1.0);
    for (int k = 1; k < 100; ++k) {
        const double v = k / 100.0;
        const auto idx = static_cast<std::size_t>(std::ceil(v * 37.0 - 1e-9)) - 1;
        EXPECT_EQ(weighted_quantile(x, ones, v), sorted[idx]) << "v=" << v;
    }
}

TEST(WeightedQuantile, ExactTieAtBoundary) {
    // cumulative share hits 0.5 exactly at the second value
    EXPECT_EQ(weighted_quantile(std::vector{1.0, 2.0, 3.0, 4.0}, std::vector{0.1, 0.4, 0.3, 0.2}, 0.5), 2.0);
    EXPECT_EQ(weighted_quantile(std::vector{1.0, 2.0, 3.0}, std::vector{0.1, 0.2, 0.7}, 0.3), 2.0);
}

TEST(WeightedQuantile, ZeroWeightValuesNeverReturned) {
    EXPECT_EQ(weighted_quantile(std::vector{1.0, 2.0, 3.0}, std::vector{0.0, 1.0, 0.0}, 0.01), 2.0);
    EXPECT_EQ(weighted_quantile(std::vector{1.0, 2.0, 3.0}, std::vector{0.0, 1.0, 0.0}, 0.99), 2.0);
}

TEST(WeightedQuantile, Errors) {
    try {
        weighted_quantile(std::vector<double>{}, std::vector<double>{}, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
    }
    try {
        weighted_quantile(std::vector{1.0}, std::vector{0.0}, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
    }
}

TEST(DefaultKnots, UniformGrid) {
    const auto s = uniform_grid();
    const KnotSet k3 = default_knots(s, 3);
    ASSERT_EQ(k3.knots.size(), 3u);
    EXPECT_NEAR(k3.knots[0], 0.10, 0.011);
    EXPECT_NEAR(k3.knots[1], 0.50, 0.011);
    EXPECT_NEAR(k3.knots[2], 0.90, 0.011);
    const KnotSet k4 = default_knots(s, 4);
    const double want4[] = {0.05, 0.35, 0.65, 0.95};
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(k4.knots[j], want4[j], 0.011);
    const KnotSet k5 = default_knots(s, 5);
    const double want5[] = {0.05, 0.275, 0.5, 0.725, 0.95};
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(k5.knots[j], want5[j], 0.011);
}

TEST(DefaultKnots, DegenerateScores) {
    const std::vector<double> constant(50, 1.3);
    try {
        default_knots(constant, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateScores);
    }
    std::vector<double> two_values(50, 0.0);
    for (std::size_t i = 0; i < 25; ++i) two_values[i] = 1.0;
    EXPECT_THROW(default_knots(two_values, 3), Error);
}

TEST(DefaultKnots, InvariantToDuplicatingTheSample) {
    Stream rng = derive_stream(2, StreamTag::Generic);
    std::normal_distribution<double> norm;
    std::vector<double> s(83);
    for (double& v : s) v = norm(rng);
    std::vector<double> doubled = s;
    doubled.insert(doubled.end(), s.begin(), s.end());
    for (int q : {3, 4, 5}) EXPECT_EQ(default_knots(s, q), default_knots(doubled, q));
}

TEST(RcsBasis, Examples) {
    const KnotSet ks{{0.0, 1.0, 2.0}};
    const BasisRow r = rcs_basis(1.5, ks);
    ASSERT_EQ(r.values.size(), 3);
    EXPECT_DOUBLE_EQ(r.values(0), 1.0);
    EXPECT_DOUBLE_EQ(r.values(1), 1.5);
    EXPECT_NEAR(r.values(2), 0.78125, 1e-15);

    const KnotSet k5{{-1.0, 0.0, 0.5, 1.0, 3.0}};
    const BasisRow below = rcs_basis(-2.0, k5);
    ASSERT_EQ(below.values.size(), 5);
    EXPECT_EQ(below.values(0), 1.0);
    EXPECT_EQ(below.values(1), -2.0);
    for (Eigen::Index j = 2; j < 5; ++j) EXPECT_EQ(below.values(j), 0.0);
}

TEST(RcsBasis, LinearBeyondOuterKnots) {
    const KnotSet ks{{-1.0, -0.2, 0.4, 1.7}};
    const double h = 0.37;
    for (double x : {2.0, 5.0, 40.0, -3.0, -50.0}) {
        const BasisRow a = rcs_basis(x, ks), b = rcs_basis(x + h, ks), c = rcs_basis(x + 2.0 * h, ks);
        for (Eigen::Index j = 0; j < a.values.size(); ++j)
            EXPECT_NEAR(c.values(j) - 2.0 * b.values(j) + a.values(j), 0.0, 1e-9 * std::max(1.0, std::abs(a.values(j))))
                << "x=" << x << " term " << j;
    }
}

TEST(RcsBasis, SmoothAtKnots) {
    const KnotSet ks{{-1.0, -0.2, 0.4, 1.1, 1.7}};
    const double h = 1e-4;
    auto d1 = [&](double x) { return (spline_value(x + h, ks) - spline_value(x - h, ks)) / (2.0 * h); };
    auto d2 = [&](double x) {
        return (spline_value(x + h, ks) - 2.0 * spline_value(x, ks) + spline_value(x - h, ks)) / (h * h);
    };
    const double e = 1e-6;
    for (double t : ks.knots) {
        EXPECT_NEAR(spline_value(t - 1e-9, ks), spline_value(t + 1e-9, ks), 1e-7);
        EXPECT_NEAR(d1(t - e), d1(t + e), 1e-4);
        EXPECT_NEAR(d2(t - e), d2(t + e), 1e-2);
    }
}

TEST(GlmBasis, Examples) {
    EXPECT_EQ(glm_basis(0.0).values, Eigen::Vector2d(1.0, 0.0));
    EXPECT_EQ(glm_basis(-2.5).values, Eigen::Vector2d(1.0, -2.5));
    EXPECT_EQ(glm_basis(123.0).values.size(), 2);
}

TEST(Basis, DesignRowsMatchRowFunction) {
    const Basis b = Basis::rcs(KnotSet{{0.0, 1.0, 2.0, 3.0}});
    EXPECT_EQ(b.size(), 4u);
    const std::vector<double> xs{-1.0, 0.5, 1.5, 2.5, 4.0};
    const Eigen::MatrixXd m = b.design(xs);
    for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_EQ(m.row(static_cast<Eigen::Index>(i)).transpose(), b(xs[i]).values);
    EXPECT_EQ(Basis::glm().size(), 2u);
}

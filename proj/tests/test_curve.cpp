#include <gtest/gtest.h>

#include "cmpcurve/curve.hpp"
#include "cmpcurve/simgen.hpp"
#include "test_support.hpp"

using namespace cmpcurve;

namespace {

StudyConfig s1_config(Parameterization p = Parameterization::RCS) {
    StudyConfig c;
    c.tau = 4.0;
    c.parameterization = p;
    return c;
}

Dataset s1_data(std::size_t n, std::uint64_t seed) {
    Stream rng = derive_stream(seed, StreamTag::SimData);
    return gen_setting1(n, rng);
}

CurveEstimate constant_curve(double r) {
    StudyConfig c = s1_config();
    return make_curve(std::vector<double>(c.grid_size(), r), c);
}

CurveEstimate identity_curve() {
    StudyConfig c = s1_config();
    return make_curve(c.grid(), c);
}

}  // namespace

TEST(FitTestHalf, InvariantToPositiveRescalingOfBeta) {
    const Dataset ds = s1_data(400, 3);
    Stream rng = derive_stream(3, StreamTag::Split);
    const Split s = two_fold_split(ds, rng);
    const std::vector<double> ones(ds.size(), 1.0);
    for (auto p : {Parameterization::GLM, Parameterization::RCS}) {
        const StudyConfig cfg = s1_config(p);
        const FGFit fg = fg_fit(ds, s.idx_a, ones);
        const HalfFit base = fit_test_half(ds, fg.beta, s.idx_b, ones, cfg);
        for (double c : {0.3, 4.0}) {
            const HalfFit scaled = fit_test_half(ds, c * fg.beta, s.idx_b, ones, cfg);
            for (std::size_t g = 0; g < base.r_hat.size(); ++g) EXPECT_NEAR(scaled.r_hat[g], base.r_hat[g], 1e-8);
        }
    }
}

TEST(CvEstimate, SingleRepetitionAveragesBothOrientations) {
    const Dataset ds = s1_data(400, 4);
    StudyConfig cfg = s1_config();
    cfg.cv_repeats = 1;
    const CvResult cv = cv_estimate(ds, cfg);
    ASSERT_EQ(cv.splits.size(), 1u);
    const std::vector<double> ones(ds.size(), 1.0);
    Stream rng = derive_stream(cfg.seed, StreamTag::Split, 0);
    const Split s = two_fold_split(ds, rng);
    EXPECT_EQ(cv.splits[0], s);
    const auto r1 = estimate_half(ds, s.idx_a, s.idx_b, ones, cfg).r_hat;
    const auto r2 = estimate_half(ds, s.idx_b, s.idx_a, ones, cfg).r_hat;
    for (std::size_t g = 0; g < r1.size(); ++g) EXPECT_DOUBLE_EQ(cv.curve.r_hat[g], (r1[g] + r2[g]) / 2.0);
}

TEST(CvEstimate, ValuesAreProbabilitiesOnTheGrid) {
    const Dataset ds = s1_data(400, 5);
    const StudyConfig cfg = s1_config();
    const CvResult cv = cv_estimate(ds, cfg);
    EXPECT_EQ(cv.curve.v_grid, cfg.grid());
    EXPECT_EQ(cv.curve.r_hat.size(), 91u);
    for (double r : cv.curve.r_hat) {
        EXPECT_GT(r, 0.0);
        EXPECT_LT(r, 1.0);
    }
    EXPECT_EQ(cv.failed_repetitions, 0);
}

TEST(CvEstimate, ThreadCountDoesNotChangeResult) {
    const Dataset ds = s1_data(300, 6);
    const StudyConfig cfg = s1_config();
    const CvResult a = cv_estimate(ds, cfg, 1);
    const CvResult b = cv_estimate(ds, cfg, 4);
    EXPECT_EQ(a.curve.r_hat, b.curve.r_hat);
    EXPECT_EQ(a.splits, b.splits);
}

TEST(CvEstimate, SeedChangesSplits) {
    const Dataset ds = s1_data(300, 6);
    StudyConfig cfg = s1_config();
    const CvResult a = cv_estimate(ds, cfg);
    cfg.seed = 2;
    const CvResult b = cv_estimate(ds, cfg);
    EXPECT_NE(a.curve.r_hat, b.curve.r_hat);
}

TEST(CvEstimate, LargeSampleRecoversTruth) {
    const Dataset ds = s1_data(100000, 7);
    const StudyConfig cfg = s1_config();
    Stream rng = derive_stream(7, StreamTag::Split);
    const Split s = two_fold_split(ds, rng);
    const std::vector<double> ones(ds.size(), 1.0);
    const auto r = estimate_half(ds, s.idx_a, s.idx_b, ones, cfg).r_hat;
    const auto grid = cfg.grid();
    for (double v : {0.1, 0.3, 0.5, 0.7}) {
        const std::size_t g = detail::grid_index(grid, v);
        EXPECT_NEAR(r[g], true_curve_setting1(v, 4.0), 0.01) << "v = " << v;
    }
}

TEST(CvEstimate, TauBeyondFollowUp) {
    const Dataset ds = s1_data(200, 8);
    StudyConfig cfg = s1_config();
    cfg.tau = 10.0;
    try {
        cv_estimate(ds, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroGhatAtDeterminable);
        EXPECT_EQ(e.stage(), "ipcw");
    }
}

TEST(CvEstimate, InvalidConfigRejected) {
    const Dataset ds = s1_data(200, 8);
    StudyConfig cfg = s1_config();
    cfg.tau = 0.0;
    EXPECT_THROW(cv_estimate(ds, cfg), Error);
}

TEST(InverseCurve, ConstantCurve) {
    const CurveEstimate c = constant_curve(0.3);
    EXPECT_EQ(inverse_curve(c, 0.2), 0.0);
    EXPECT_EQ(inverse_curve(c, 0.3), 0.0);
    EXPECT_EQ(inverse_curve(c, 0.31), 1.0);
}

TEST(InverseCurve, IdentityCurveCrossing) {
    const CurveEstimate c = identity_curve();
    // v in {0.01..0.99} with extended value < 0.4: 0.01..0.39 -> 39 points.
    EXPECT_NEAR(inverse_curve(c, 0.4), 39.0 / 99.0, 1e-15);
    EXPECT_NEAR(inverse_curve(c, 0.4), 0.4, 0.02);
}

TEST(InverseCurve, BoundaryExtension) {
    const CurveEstimate c = identity_curve();
    EXPECT_EQ(extended_curve_value(c, 0.01), 0.05);
    EXPECT_EQ(extended_curve_value(c, 0.99), 0.95);
    EXPECT_NEAR(extended_curve_value(c, 0.505), 0.505, 1e-12);
    EXPECT_EQ(inverse_curve(c, 0.05), 0.0);
    EXPECT_EQ(inverse_curve(c, 0.96), 1.0);
}

TEST(InverseCurve, NonMonotoneCurveCountsSublevelSet) {
    StudyConfig cfg = s1_config();
    auto grid = cfg.grid();
    std::vector<double> r;
    for (double v : grid) r.push_back(v < 0.5 ? 0.2 : 0.1);
    const CurveEstimate c = make_curve(r, cfg);
    EXPECT_NEAR(inverse_curve(c, 0.15), 50.0 / 99.0, 1e-12);
}

TEST(InverseCurve, NondecreasingInP) {
    const Dataset ds = s1_data(400, 9);
    const CvResult cv = cv_estimate(ds, s1_config());
    double last = -1.0;
    for (int k = 1; k < 100; ++k) {
        const double x = inverse_curve(cv.curve, k / 100.0);
        EXPECT_GE(x, last);
        last = x;
    }
}

TEST(InverseCurve, RecoversVForIncreasingCurve) {
    StudyConfig cfg = s1_config();
    std::vector<double> r;
    for (double v : cfg.grid()) r.push_back(true_curve_setting1(v, 4.0));
    const CurveEstimate c = make_curve(r, cfg);
    for (std::size_t g = 5; g + 5 < r.size(); g += 7) {
        const double v = cfg.grid()[g];
        EXPECT_NEAR(inverse_curve(c, r[g]), v, 0.02) << "v = " << v;
    }
}

TEST(InverseCurve, GridOverload) {
    const CurveEstimate c = identity_curve();
    const std::vector<double> p{0.2, 0.4, 0.6};
    const InverseCurve inv = inverse_curve(c, p);
    EXPECT_EQ(inv.p_grid, p);
    ASSERT_EQ(inv.proportion.size(), 3u);
    for (std::size_t j = 0; j < p.size(); ++j) EXPECT_EQ(inv.proportion[j], inverse_curve(c, p[j]));
}

TEST(FitTestHalf, SeparationIsReported) {
    // Cause-1 events by tau only among the highest scores.
    std::vector<SubjectRecord> raw;
    for (int i = 0; i < 40; ++i) raw.push_back({i < 10 ? 1.0 : 5.0, i < 10 ? 1 : 0, {static_cast<double>(40 - i)}});
    const Dataset ds = validate_dataset(raw, 2);
    const std::vector<double> ones(ds.size(), 1.0);
    StudyConfig cfg = s1_config(Parameterization::GLM);
    try {
        fit_test_half(ds, Eigen::VectorXd::Ones(1), test::iota_idx(ds.size()), ones, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Separation);
        EXPECT_EQ(e.stage(), "wbinomial");
    }
}

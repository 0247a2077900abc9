#include <gtest/gtest.h>

#include <cstring>

#include "cmpcurve/analysis.hpp"
#include "cmpcurve/perturb.hpp"
#include "cmpcurve/simgen.hpp"

using namespace cmpcurve;

namespace {

StudyConfig config() {
    StudyConfig c;
    c.tau = 4.0;
    c.cv_repeats = 2;
    return c;
}

Dataset s1_data(std::size_t n, std::uint64_t seed) {
    Stream rng = derive_stream(seed, StreamTag::SimData);
    return gen_setting1(n, rng);
}

PerturbReplicate replicate_of(std::vector<double> r) {
    PerturbReplicate p;
    p.r_hat_e = std::move(r);
    return p;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(ExpWeights, MomentsAndPositivity) {
    Stream rng = derive_stream(1, StreamTag::Perturb, 0);
    const auto w = draw_exp_weights(1'000'000, rng);
    double s = 0.0, s2 = 0.0;
    for (double x : w) {
        ASSERT_GT(x, 0.0);
        s += x;
        s2 += x * x;
    }
    const double mean = s / 1e6, var = s2 / 1e6 - mean * mean;
    EXPECT_NEAR(mean, 1.0, 0.005);
    EXPECT_NEAR(var, 1.0, 0.01);
}

TEST(ExpWeights, Deterministic) {
    Stream a = derive_stream(5, StreamTag::Perturb, 17), b = derive_stream(5, StreamTag::Perturb, 17);
    EXPECT_EQ(draw_exp_weights(100, a), draw_exp_weights(100, b));
    Stream c = derive_stream(5, StreamTag::Perturb, 18);
    Stream d = derive_stream(5, StreamTag::Perturb, 17);
    EXPECT_NE(draw_exp_weights(100, c), draw_exp_weights(100, d));
}

TEST(PerturbedReplicate, UnitWeightsReproducePointEstimateExactly) {
    const Dataset ds = s1_data(400, 11);
    const StudyConfig cfg = config();
    const CvResult cv = cv_estimate(ds, cfg);
    const std::vector<double> ones(ds.size(), 1.0);
    const PerturbReplicate rep = perturbed_replicate(ds, cv.splits, ones, cfg);
    EXPECT_TRUE(bitwise_equal(rep.r_hat_e, cv.curve.r_hat));
}

TEST(PerturbedReplicate, DistinctWeightsGiveDistinctCurves) {
    const Dataset ds = s1_data(400, 12);
    const StudyConfig cfg = config();
    const CvResult cv = cv_estimate(ds, cfg);
    Stream a = derive_stream(1, StreamTag::Perturb, 0), b = derive_stream(1, StreamTag::Perturb, 1);
    const auto ra = perturbed_replicate(ds, cv.splits, draw_exp_weights(ds.size(), a), cfg).r_hat_e;
    const auto rb = perturbed_replicate(ds, cv.splits, draw_exp_weights(ds.size(), b), cfg).r_hat_e;
    EXPECT_NE(ra, rb);
    EXPECT_NE(ra, cv.curve.r_hat);
}

TEST(PerturbedReplicate, InverseComputedWhenRequested) {
    const Dataset ds = s1_data(400, 13);
    const StudyConfig cfg = config();
    const CvResult cv = cv_estimate(ds, cfg);
    const std::vector<double> ones(ds.size(), 1.0);
    const std::vector<double> p{0.2, 0.4};
    const PerturbReplicate rep = perturbed_replicate(ds, cv.splits, ones, cfg, p);
    ASSERT_TRUE(rep.rinv_e);
    EXPECT_EQ(*rep.rinv_e, inverse_curve(cv.curve, p).proportion);
}

TEST(VarianceCi, LogitWaldExample) {
    CurveEstimate point;
    point.v_grid = {0.5};
    point.r_hat = {0.5};
    // sample sd of {0.45, 0.55} is sqrt(0.005) ~ 0.0707107
    const std::vector<PerturbReplicate> reps{replicate_of({0.45}), replicate_of({0.55})};
    const InferenceResult inf = variance_ci(point, reps);
    EXPECT_NEAR(inf.se[0], std::sqrt(0.005), 1e-12);
    const double half = 1.959964 * std::sqrt(0.005) / 0.25;
    EXPECT_NEAR(inf.ci_lo[0], expit(-half), 1e-6);
    EXPECT_NEAR(inf.ci_hi[0], expit(half), 1e-6);
    EXPECT_NEAR(inf.ci_lo[0], 0.3648, 1e-4);
    EXPECT_NEAR(inf.ci_lo[0] + inf.ci_hi[0], 1.0, 1e-12);
    EXPECT_EQ(inf.e_used, 2);
}

TEST(VarianceCi, IntervalInsideUnitAndContainsPoint) {
    CurveEstimate point;
    point.v_grid = {0.1, 0.9};
    point.r_hat = {0.02, 0.97};
    const std::vector<PerturbReplicate> reps{replicate_of({0.0, 0.9}), replicate_of({0.08, 1.0}),
                                             replicate_of({0.03, 0.95})};
    const InferenceResult inf = variance_ci(point, reps);
    for (std::size_t g = 0; g < 2; ++g) {
        EXPECT_GT(inf.ci_lo[g], 0.0);
        EXPECT_LT(inf.ci_hi[g], 1.0);
        EXPECT_LT(inf.ci_lo[g], point.r_hat[g]);
        EXPECT_GT(inf.ci_hi[g], point.r_hat[g]);
    }
}

TEST(VarianceCi, IdenticalReplicatesGiveZeroSe) {
    CurveEstimate point;
    point.v_grid = {0.5};
    point.r_hat = {0.3};
    const std::vector<PerturbReplicate> reps(5, replicate_of({0.31}));
    const InferenceResult inf = variance_ci(point, reps);
    EXPECT_EQ(inf.se[0], 0.0);
    EXPECT_NEAR(inf.ci_lo[0], 0.3, 1e-15);
    EXPECT_NEAR(inf.ci_hi[0], 0.3, 1e-15);
}

TEST(VarianceCi, Errors) {
    CurveEstimate point;
    point.v_grid = {0.5};
    point.r_hat = {0.3};
    const std::vector<PerturbReplicate> one{replicate_of({0.3})};
    try {
        variance_ci(point, one);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TooFewReplicates);
    }
    const std::vector<PerturbReplicate> ragged{replicate_of({0.3}), replicate_of({0.3, 0.4})};
    EXPECT_THROW(variance_ci(point, ragged), Error);
}

TEST(InverseVarianceCi, ClippedRawScale) {
    InverseCurve point;
    point.p_grid = {0.1, 0.5};
    point.proportion = {0.0, 0.5};
    std::vector<PerturbReplicate> reps;
    for (auto pair : {std::pair{0.0, 0.4}, std::pair{0.02, 0.6}}) {
        PerturbReplicate r;
        r.rinv_e = std::vector<double>{pair.first, pair.second};
        reps.push_back(r);
    }
    const InferenceResult inf = inverse_variance_ci(point, reps);
    EXPECT_EQ(inf.ci_lo[0], 0.0);
    EXPECT_NEAR(inf.ci_hi[0], 1.959964 * inf.se[0], 1e-6);
    EXPECT_NEAR(inf.ci_lo[1], 0.5 - 1.959964 * std::sqrt(0.02), 1e-6);
}

TEST(NormalQuantile, KnownValues) {
    EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-9);
    EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-12);
    EXPECT_NEAR(normal_quantile(0.95), 1.644853626951472, 1e-9);
    EXPECT_NEAR(normal_quantile(0.001), -3.090232306167813, 1e-9);
    EXPECT_NEAR(normal_quantile(1e-10), -6.361340902404056, 1e-8);
    for (double p : {0.01, 0.2, 0.6, 0.99}) EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-12);
}

TEST(RunPerturbation, ThreadCountDoesNotChangeReplicates) {
    const Dataset ds = s1_data(300, 14);
    StudyConfig cfg = config();
    cfg.perturb_e = 6;
    const CvResult cv = cv_estimate(ds, cfg);
    const auto a = run_perturbation(ds, cv.splits, cfg, {}, 1);
    const auto b = run_perturbation(ds, cv.splits, cfg, {}, 3);
    ASSERT_EQ(a.replicates.size(), b.replicates.size());
    for (std::size_t e = 0; e < a.replicates.size(); ++e) {
        EXPECT_EQ(a.replicates[e].e_index, b.replicates[e].e_index);
        EXPECT_EQ(a.replicates[e].r_hat_e, b.replicates[e].r_hat_e);
    }
}

TEST(RunPerturbation, AbortsWhenTooManyReplicatesFail) {
    const Dataset ds = s1_data(400, 15);
    StudyConfig cfg = config();
    cfg.perturb_e = 20;
    const CvResult cv = cv_estimate(ds, cfg);
    // Splits that leave the training half without cause-1 events force every replicate to fail.
    std::vector<Split> bad(1);
    for (std::size_t i = 0; i < ds.size(); ++i) (ds[i].event == 1 ? bad[0].idx_b : bad[0].idx_a).push_back(i);
    try {
        run_perturbation(ds, bad, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TooManyFailedReplicates);
    }
    EXPECT_NO_THROW(run_perturbation(ds, cv.splits, cfg));
}

TEST(Analyze, FillsInferenceForCurveAndInverse) {
    const Dataset ds = s1_data(400, 16);
    StudyConfig cfg = config();
    cfg.perturb_e = 30;
    const std::vector<double> p{0.2, 0.3};
    const Analysis a = analyze(ds, cfg, p);
    ASSERT_TRUE(a.curve.se);
    EXPECT_EQ(a.curve.se->size(), a.curve.r_hat.size());
    EXPECT_EQ(a.inverse.se.size(), 2u);
    EXPECT_EQ(a.e_used + a.failed_replicates, 30);
    for (std::size_t g = 0; g < a.curve.r_hat.size(); ++g) {
        EXPECT_GT((*a.curve.se)[g], 0.0);
        EXPECT_LE((*a.curve.ci_lo)[g], a.curve.r_hat[g]);
        EXPECT_GE((*a.curve.ci_hi)[g], a.curve.r_hat[g]);
    }
}

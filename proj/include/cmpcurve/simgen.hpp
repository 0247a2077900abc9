#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cmpcurve/analysis.hpp"
#include "cmpcurve/core_model.hpp"
#include "cmpcurve/curve.hpp"
#include "cmpcurve/error.hpp"
#include "cmpcurve/finegray.hpp"
#include "cmpcurve/normal.hpp"
#include "cmpcurve/parallel.hpp"
#include "cmpcurve/rng.hpp"
#include "cmpcurve/wbinomial.hpp"

namespace cmpcurve {

// Calibrated by tools/calibrate_constants (bisection on the Monte-Carlo
// censoring rate, 10^6 draws, target 30%).
inline constexpr double kSetting1Cause2Rate = 0.349396;
inline constexpr double kSetting2C1 = 3.832711;

enum class Setting { S1 = 1, S2 = 2 };

inline Setting parse_setting(int s) {
    if (s == 1) return Setting::S1;
    if (s == 2) return Setting::S2;
    throw Error(ErrorCode::UnknownSetting, "setting must be 1 or 2, got " + std::to_string(s));
}

/// Proportional subdistribution hazards for cause 1,
/// F1(t | Z) = 1 - [1 - gamma (1 - exp(-t/3))]^exp(b1'Z); cause-2 times are
/// exponential with rate cause2_rate * exp(b2'Z); C ~ censor_scale * Beta(5, 1).
struct Setting1Params {
    double gamma = 0.48;
    double b11 = 0.5, b12 = 0.5;
    double b21 = -0.5, b22 = 0.5;
    double cause2_rate = kSetting1Cause2Rate;
    double censor_scale = 4.2;
    bool censored = true;
};

/// Fine-Gray misspecified: P(cause 1 | Z) = 0.75 expit(Z1 + Z2),
/// T | cause 1 = c1 * Weibull(2, exp(-0.5 Z1 - 0.75 Z2)), T | cause 2 ~ U(0, 5.6),
/// C ~ censor_scale * Beta(5, 1).
struct Setting2Params {
    double c1 = kSetting2C1;
    double uniform_max = 5.6;
    double censor_scale = 4.3;
    bool censored = true;
};

/// Setting-1 cause-1 CIF at t given the linear predictor eta = b1'Z.
inline double setting1_cif(double t, double eta, double gamma) {
    return -std::expm1(std::exp(eta) * std::log1p(-gamma * -std::expm1(-t / 3.0)));
}

/// T such that F1(T | eta) = u * F1(inf | eta), i.e. the inverse of the
/// conditional cause-1 CDF given cause 1.
inline double setting1_cause1_time(double u, double eta, double gamma) {
    const double p1 = -std::expm1(std::exp(eta) * std::log1p(-gamma));
    const double inner = -std::expm1(std::exp(-eta) * std::log1p(-u * p1));  // gamma (1 - exp(-T/3))
    return -3.0 * std::log1p(-inner / gamma);
}

namespace detail {

inline double uniform01(Stream& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double beta51(Stream& rng) { return std::pow(uniform01(rng), 0.2); }

inline SubjectRecord observe(double t, int cause, double c, bool censored, std::vector<double> z) {
    if (!censored || t <= c) return {t, cause, std::move(z)};
    return {c, 0, std::move(z)};
}

inline Dataset wrap(std::vector<SubjectRecord> recs, std::size_t d) {
    Dataset ds;
    ds.records = std::move(recs);
    ds.d = d;
    ds.k = 2;
    return ds;
}

}  // namespace detail

/// n records from Setting 1. With gamma = 0 no cause-1 events occur, so the
/// result is not a valid analysis dataset.
inline Dataset gen_setting1(std::size_t n, Stream& rng, const Setting1Params& prm = {}) {
    std::normal_distribution<double> norm(0.0, 1.0);
    std::vector<SubjectRecord> recs;
    recs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z1 = norm(rng), z2 = norm(rng);
        const double eta1 = prm.b11 * z1 + prm.b12 * z2;
        const double p1 = -std::expm1(std::exp(eta1) * std::log1p(-prm.gamma));
        int cause;
        double t;
        if (detail::uniform01(rng) < p1) {
            cause = 1;
            t = setting1_cause1_time(detail::uniform01(rng), eta1, prm.gamma);
        } else {
            cause = 2;
            const double rate = prm.cause2_rate * std::exp(prm.b21 * z1 + prm.b22 * z2);
            t = -std::log1p(-detail::uniform01(rng)) / rate;
        }
        const double c = prm.censor_scale * detail::beta51(rng);
        recs.push_back(detail::observe(t, cause, c, prm.censored, {z1, z2}));
    }
    return detail::wrap(std::move(recs), 2);
}

inline Dataset gen_setting2(std::size_t n, Stream& rng, const Setting2Params& prm = {}) {
    std::normal_distribution<double> norm(0.0, 1.0);
    std::vector<SubjectRecord> recs;
    recs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z1 = detail::uniform01(rng) < 0.5 ? 1.0 : 0.0;
        const double z2 = norm(rng);
        const double p1 = 0.75 * expit(z1 + z2);
        int cause;
        double t;
        if (detail::uniform01(rng) < p1) {
            cause = 1;
            const double scale = std::exp(-0.5 * z1 - 0.75 * z2);
            t = prm.c1 * scale * std::sqrt(-std::log1p(-detail::uniform01(rng)));
        } else {
            cause = 2;
            t = prm.uniform_max * detail::uniform01(rng);
        }
        const double c = prm.censor_scale * detail::beta51(rng);
        recs.push_back(detail::observe(t, cause, c, prm.censored, {z1, z2}));
    }
    return detail::wrap(std::move(recs), 2);
}

inline Dataset generate(Setting s, std::size_t n, Stream& rng) {
    return s == Setting::S1 ? gen_setting1(n, rng) : gen_setting2(n, rng);
}

/// Closed-form Setting-1 curve: the score b1'Z is N(0, 1/2), so
/// R(v) = F1(tau | sqrt(1/2) Phi^{-1}(v)).
inline double true_curve_setting1(double v, double tau, double gamma = 0.48) {
    return setting1_cif(tau, std::sqrt(0.5) * normal_quantile(v), gamma);
}

struct TrueCurve {
    std::vector<double> v_grid;
    std::vector<double> r_true;
    Setting setting = Setting::S1;
    std::optional<Eigen::VectorXd> beta_tilde;  // Setting 2 only
};

inline TrueCurve true_curve_setting1(std::span<const double> v_grid, double tau) {
    TrueCurve tc;
    tc.setting = Setting::S1;
    tc.v_grid.assign(v_grid.begin(), v_grid.end());
    for (double v : v_grid) tc.r_true.push_back(true_curve_setting1(v, tau));
    return tc;
}

/// Half-width, in quantile scale, of the window averaged around each v.
inline constexpr double kTruthWindow = 0.005;

/// Monte-Carlo truth for Setting 2: the limiting Fine-Gray coefficients from a
/// censored sample of mc_size, then, over `rounds` fresh uncensored samples,
/// the share of I(T <= tau, cause 1) among subjects whose score rank lies
/// within +-0.005 of v.
inline TrueCurve true_curve_setting2(std::span<const double> v_grid, std::size_t mc_size, std::uint64_t seed,
                                     double tau = 4.0, int rounds = 5) {
    if (mc_size < 1000) throw Error(ErrorCode::InvalidConfig, "mc_size too small for a truth curve");
    if (rounds < 1) throw Error(ErrorCode::InvalidConfig, "rounds must be positive");
    TrueCurve tc;
    tc.setting = Setting::S2;
    tc.v_grid.assign(v_grid.begin(), v_grid.end());

    Stream fit_rng = derive_stream(seed, StreamTag::Truth, 0);
    const Dataset big = gen_setting2(mc_size, fit_rng);
    const std::vector<double> ones(big.size(), 1.0);
    const FGFit fit = fg_fit(big, ones);
    if (!fit.converged) throw Error(ErrorCode::NotConverged, "Fine-Gray fit for the limiting coefficients");
    tc.beta_tilde = fit.beta;

    std::vector<double> acc(v_grid.size(), 0.0);
    Setting2Params uncensored;
    uncensored.censored = false;
    for (int r = 0; r < rounds; ++r) {
        Stream rng = derive_stream(seed, StreamTag::Truth, static_cast<std::uint64_t>(r) + 1);
        const Dataset ds = gen_setting2(mc_size, rng, uncensored);
        std::vector<std::pair<double, bool>> scored(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i)
            scored[i] = {fit.beta(0) * ds[i].z[0] + fit.beta(1) * ds[i].z[1], ds[i].event == 1 && ds[i].y <= tau};
        std::sort(scored.begin(), scored.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        // prefix counts of cases by rank
        std::vector<std::size_t> cases(scored.size() + 1, 0);
        for (std::size_t i = 0; i < scored.size(); ++i) cases[i + 1] = cases[i] + (scored[i].second ? 1 : 0);
        const auto m = static_cast<double>(scored.size());
        for (std::size_t g = 0; g < v_grid.size(); ++g) {
            const double lo_v = std::max(0.0, v_grid[g] - kTruthWindow), hi_v = std::min(1.0, v_grid[g] + kTruthWindow);
            const auto lo = static_cast<std::size_t>(std::ceil(lo_v * m - 0.5));
            const auto hi = std::min(scored.size(), static_cast<std::size_t>(std::floor(hi_v * m - 0.5)) + 1);
            acc[g] += static_cast<double>(cases[hi] - cases[lo]) / static_cast<double>(hi - lo);
        }
    }
    for (double a : acc) tc.r_true.push_back(a / rounds);
    return tc;
}

// ---------------------------------------------------------------------------
// Monte-Carlo study harness

inline constexpr double kMaxFailedSimulationShare = 0.05;

struct StudyOptions {
    std::vector<double> v_points{0.1, 0.3, 0.5, 0.7};
    std::vector<double> p_points{0.2, 0.3, 0.4, 0.5};
    std::size_t mc_size = 1'000'000;  // Setting-2 truth
    int mc_rounds = 5;
    unsigned threads = 1;
};

struct StudyRow {
    int setting = 1;
    Parameterization parameterization = Parameterization::RCS;
    std::size_t n = 0;
    std::string metric;  // "rv" or "rinv"
    double point = 0.0;  // v or p
    double truth = 0.0;
    double bias = 0.0;
    double ese = 0.0;
    double ase = 0.0;
    double cp = 0.0;
    int replicates_used = 0;
};

struct StudyReport {
    std::vector<StudyRow> rows;
    int replicates_requested = 0;
    int replicates_failed = 0;
    std::vector<std::string> warnings;
};

struct ReplicateOutcome {
    std::vector<double> r, r_se, r_lo, r_hi;
    std::vector<double> inv, inv_se, inv_lo, inv_hi;
};

namespace detail {

inline std::size_t grid_index(const std::vector<double>& grid, double v) {
    for (std::size_t g = 0; g < grid.size(); ++g)
        if (std::abs(grid[g] - v) < 1e-9) return g;
    throw Error(ErrorCode::InvalidConfig, "evaluation point v = " + std::to_string(v) + " is not on the curve grid");
}

inline void summarize(std::vector<StudyRow>& out, StudyRow base, std::span<const double> points,
                      std::span<const double> truth, const std::vector<ReplicateOutcome>& reps, bool inverse) {
    const auto n = static_cast<double>(reps.size());
    for (std::size_t j = 0; j < points.size(); ++j) {
        StudyRow row = base;
        row.metric = inverse ? "rinv" : "rv";
        row.point = points[j];
        row.truth = truth[j];
        row.replicates_used = static_cast<int>(reps.size());
        double mean = 0.0, ase = 0.0, covered = 0.0;
        for (const auto& r : reps) {
            const double est = inverse ? r.inv[j] : r.r[j];
            const double lo = inverse ? r.inv_lo[j] : r.r_lo[j];
            const double hi = inverse ? r.inv_hi[j] : r.r_hi[j];
            mean += est;
            ase += inverse ? r.inv_se[j] : r.r_se[j];
            if (lo <= truth[j] && truth[j] <= hi) covered += 1.0;
        }
        mean /= n;
        double ss = 0.0;
        for (const auto& r : reps) {
            const double dev = (inverse ? r.inv[j] : r.r[j]) - mean;
            ss += dev * dev;
        }
        row.bias = mean - truth[j];
        row.ese = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        row.ase = ase / n;
        row.cp = covered / n;
        out.push_back(row);
    }
}

}  // namespace detail

/// Truth at the requested v and p points for a setting.
struct StudyTruth {
    std::vector<double> r;
    std::vector<double> inv;
};

inline StudyTruth study_truth(Setting s, double tau, const StudyOptions& opt, std::uint64_t seed) {
    const auto grid0 = inverse_population_grid();
    TrueCurve tc = s == Setting::S1 ? true_curve_setting1(grid0, tau)
                                    : true_curve_setting2(grid0, opt.mc_size, seed, tau, opt.mc_rounds);
    CurveEstimate c;
    c.v_grid = tc.v_grid;
    c.r_hat = tc.r_true;
    StudyTruth t;
    for (double v : opt.v_points)
        t.r.push_back(s == Setting::S1 ? true_curve_setting1(v, tau) : extended_curve_value(c, v));
    for (double p : opt.p_points) t.inv.push_back(inverse_curve(c, p));
    return t;
}

/// Generates `replicates` datasets, analyzes each with cross-validation and
/// perturbation inference, and reports Bias / ESE / ASE / CP per point.
inline StudyReport run_sim_study(Setting setting, std::size_t n, int replicates, const StudyConfig& cfg,
                                 const StudyOptions& opt = {}) {
    cfg.validate();
    if (replicates < 1) throw Error(ErrorCode::InvalidConfig, "replicates must be positive");
    const auto grid = cfg.grid();
    std::vector<std::size_t> v_index;
    for (double v : opt.v_points) v_index.push_back(detail::grid_index(grid, v));

    const StudyTruth truth = study_truth(setting, cfg.tau, opt, cfg.seed);

    const auto n_rep = static_cast<std::size_t>(replicates);
    std::vector<std::optional<ReplicateOutcome>> slots(n_rep);
    std::vector<std::string> errors(n_rep);
    parallel_for(n_rep, opt.threads, [&](std::size_t r) {
        try {
            Stream rng = derive_stream(cfg.seed, StreamTag::SimData, r);
            const Dataset ds = generate(setting, n, rng);
            StudyConfig rc = cfg;
            rc.seed = derive_seed(cfg.seed, StreamTag::SimAnalysis, r);
            const Analysis a = analyze(ds, rc, opt.p_points, 1);
            ReplicateOutcome o;
            for (std::size_t g : v_index) {
                o.r.push_back(a.curve.r_hat[g]);
                o.r_se.push_back((*a.curve.se)[g]);
                o.r_lo.push_back((*a.curve.ci_lo)[g]);
                o.r_hi.push_back((*a.curve.ci_hi)[g]);
            }
            o.inv = a.inverse.curve.proportion;
            o.inv_se = a.inverse.se;
            o.inv_lo = a.inverse.ci_lo;
            o.inv_hi = a.inverse.ci_hi;
            slots[r] = std::move(o);
        } catch (const Error& e) {
            errors[r] = e.what();
        }
    });

    StudyReport report;
    report.replicates_requested = replicates;
    std::vector<ReplicateOutcome> ok;
    for (std::size_t r = 0; r < n_rep; ++r) {
        if (slots[r]) {
            ok.push_back(std::move(*slots[r]));
        } else {
            ++report.replicates_failed;
            report.warnings.push_back("simulation replicate " + std::to_string(r + 1) + " failed: " + errors[r]);
        }
    }
    if (static_cast<double>(report.replicates_failed) > kMaxFailedSimulationShare * replicates || ok.empty())
        throw Error(ErrorCode::TooManyFailedSimulations,
                    std::to_string(report.replicates_failed) + " of " + std::to_string(replicates) +
                        " simulation replicates failed" + (report.warnings.empty() ? "" : "; first: " + report.warnings.front()));

    StudyRow base;
    base.setting = static_cast<int>(setting);
    base.parameterization = cfg.parameterization;
    base.n = n;
    detail::summarize(report.rows, base, opt.v_points, truth.r, ok, false);
    if (!opt.p_points.empty()) detail::summarize(report.rows, base, opt.p_points, truth.inv, ok, true);
    return report;
}

}  // namespace cmpcurve

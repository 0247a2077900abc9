#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmpcurve/censor_ipcw.hpp"
#include "cmpcurve/core_model.hpp"
#include "cmpcurve/error.hpp"
#include "cmpcurve/finegray.hpp"
#include "cmpcurve/parallel.hpp"
#include "cmpcurve/rng.hpp"
#include "cmpcurve/spline_basis.hpp"
#include "cmpcurve/wbinomial.hpp"
#include "cmpcurve/weighted_quantile.hpp"

namespace cmpcurve {

/// R(v) on a grid of score quantiles, with optional pointwise inference.
struct CurveEstimate {
    std::vector<double> v_grid;
    std::vector<double> r_hat;
    std::optional<std::vector<double>> se;
    std::optional<std::vector<double>> ci_lo;
    std::optional<std::vector<double>> ci_hi;
    double tau = 0.0;
    Parameterization parameterization = Parameterization::RCS;
};

/// R^{-1}(p): proportion of the population with tau-year risk below p.
struct InverseCurve {
    std::vector<double> p_grid;
    std::vector<double> proportion;
};

/// Everything fitted on one (train, test) orientation.
struct HalfFit {
    Eigen::VectorXd beta;
    Basis basis = Basis::glm();
    ThetaFit theta;
    std::vector<double> quantiles;  // Q(v) on the grid
    std::vector<double> r_hat;
};

namespace detail {

template <class Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        if (!e.stage().empty()) throw;
        throw Error(e.code(), stage, e.message());
    }
}

}  // namespace detail

/// Test-half stages given training coefficients: scores, IPCW rows, basis,
/// weighted binomial fit, weighted quantiles and the fitted curve. `omega` is
/// indexed by record.
inline HalfFit fit_test_half(const Dataset& ds, const Eigen::VectorXd& beta, std::span<const std::size_t> test_idx,
                             std::span<const double> omega, const StudyConfig& cfg) {
    HalfFit out;
    out.beta = beta;
    const std::size_t m = test_idx.size();
    std::vector<double> scores(m), w_test(m);
    for (std::size_t k = 0; k < m; ++k) {
        const auto& z = ds[test_idx[k]].z;
        scores[k] = linear_risk_score(z, std::span<const double>(beta.data(), static_cast<std::size_t>(beta.size())));
        w_test[k] = omega[test_idx[k]];
    }

    const auto rows = detail::run_stage("ipcw", [&] {
        const StepFunction ghat = fit_censoring_km(ds, test_idx, omega);
        return ipcw_rows(ds, test_idx, ghat, cfg.tau);
    });

    out.basis = detail::run_stage("spline_basis", [&] {
        return cfg.parameterization == Parameterization::RCS ? Basis::rcs(default_knots(scores, w_test, cfg.knots_q))
                                                              : Basis::glm();
    });

    out.theta = detail::run_stage("wbinomial", [&] {
        std::vector<int> delta(m);
        std::vector<double> w(m);
        for (std::size_t k = 0; k < m; ++k) {
            delta[k] = rows[k].delta_tau ? 1 : 0;
            w[k] = w_test[k] * rows[k].weight;
        }
        ThetaFit fit = fit_weighted_binomial(delta, out.basis.design(scores), w);
        if (!fit.converged && fit.final_gradient_norm <= FitControl{}.tol)
            throw Error(ErrorCode::Separation, "weighted binomial likelihood has no finite maximum (separation)");
        if (!fit.converged)
            throw Error(ErrorCode::NotConverged, "weighted binomial fit did not converge (gradient " +
                                                     std::to_string(fit.final_gradient_norm) + ")");
        return fit;
    });

    const auto grid = cfg.grid();
    out.quantiles = detail::run_stage("quantile", [&] { return weighted_quantiles(scores, w_test, grid); });
    out.r_hat.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) out.r_hat[g] = predict_prob(out.theta.theta, out.basis(out.quantiles[g]));
    return out;
}

/// Fine-Gray fit on the training half followed by the test-half stages.
inline HalfFit fit_half(const Dataset& ds, std::span<const std::size_t> train_idx, std::span<const std::size_t> test_idx,
                        std::span<const double> omega, const StudyConfig& cfg) {
    const FGFit fg = detail::run_stage("finegray", [&] {
        FGFit fit = fg_fit(ds, train_idx, omega);
        if (!fit.converged)
            throw Error(ErrorCode::NotConverged, "Fine-Gray fit did not converge (gradient " +
                                                     std::to_string(fit.final_gradient_norm) + ")");
        return fit;
    });
    return fit_test_half(ds, fg.beta, test_idx, omega, cfg);
}

inline CurveEstimate make_curve(std::vector<double> r_hat, const StudyConfig& cfg) {
    CurveEstimate c;
    c.v_grid = cfg.grid();
    c.r_hat = std::move(r_hat);
    c.tau = cfg.tau;
    c.parameterization = cfg.parameterization;
    return c;
}

/// R-hat^{(1)} for one orientation: train on `train_idx`, evaluate on `test_idx`.
inline CurveEstimate estimate_half(const Dataset& ds, std::span<const std::size_t> train_idx,
                                   std::span<const std::size_t> test_idx, std::span<const double> omega,
                                   const StudyConfig& cfg) {
    return make_curve(fit_half(ds, train_idx, test_idx, omega, cfg).r_hat, cfg);
}

/// (R^{(1)} + R^{(2)}) / 2 for one split.
inline std::vector<double> cv_repetition(const Dataset& ds, const Split& split, std::span<const double> omega,
                                         const StudyConfig& cfg) {
    const auto r1 = fit_half(ds, split.idx_a, split.idx_b, omega, cfg).r_hat;
    const auto r2 = fit_half(ds, split.idx_b, split.idx_a, omega, cfg).r_hat;
    std::vector<double> out(r1.size());
    for (std::size_t g = 0; g < out.size(); ++g) out[g] = (r1[g] + r2[g]) / 2.0;
    return out;
}

namespace detail {

inline std::vector<double> mean_curves(const std::vector<std::vector<double>>& curves) {
    std::vector<double> out(curves.front().size(), 0.0);
    for (const auto& c : curves)
        for (std::size_t g = 0; g < out.size(); ++g) out[g] += c[g];
    for (double& x : out) x /= static_cast<double>(curves.size());
    return out;
}

}  // namespace detail

/// Averages cv_repetition over the given splits; any failure propagates.
inline std::vector<double> curve_for_splits(const Dataset& ds, std::span<const Split> splits,
                                            std::span<const double> omega, const StudyConfig& cfg) {
    if (splits.empty()) throw Error(ErrorCode::InvalidConfig, "no splits");
    if (omega.size() != ds.size()) throw Error(ErrorCode::DimensionMismatch, "omega must have one entry per record");
    std::vector<std::vector<double>> reps;
    reps.reserve(splits.size());
    for (const auto& s : splits) reps.push_back(cv_repetition(ds, s, omega, cfg));
    return detail::mean_curves(reps);
}

struct CvResult {
    CurveEstimate curve;
    std::vector<Split> splits;  // the splits whose repetitions succeeded
    int failed_repetitions = 0;
    std::vector<std::string> warnings;
};

/// Repeated two-fold cross-validated estimate. Repetition r splits with the
/// stream (cfg.seed, Split, r); a failed repetition is discarded and counted.
inline CvResult cv_estimate(const Dataset& ds, const StudyConfig& cfg, unsigned threads = 1) {
    cfg.validate();
    detail::run_stage("ipcw", [&] { check_tau_support(ds, cfg.tau); });
    const auto n_rep = static_cast<std::size_t>(cfg.cv_repeats);
    std::vector<Split> splits(n_rep);
    for (std::size_t r = 0; r < n_rep; ++r) {
        Stream rng = derive_stream(cfg.seed, StreamTag::Split, r);
        splits[r] = two_fold_split(ds, rng);
    }

    const std::vector<double> ones(ds.size(), 1.0);
    std::vector<std::optional<std::vector<double>>> curves(n_rep);
    std::vector<std::string> errors(n_rep);
    parallel_for(n_rep, threads, [&](std::size_t r) {
        try {
            curves[r] = cv_repetition(ds, splits[r], ones, cfg);
        } catch (const Error& e) {
            errors[r] = e.what();
        }
    });

    CvResult out;
    std::vector<std::vector<double>> ok;
    for (std::size_t r = 0; r < n_rep; ++r) {
        if (curves[r]) {
            ok.push_back(std::move(*curves[r]));
            out.splits.push_back(std::move(splits[r]));
        } else {
            ++out.failed_repetitions;
            out.warnings.push_back("cv repetition " + std::to_string(r + 1) + " discarded: " + errors[r]);
        }
    }
    if (ok.empty())
        throw Error(ErrorCode::AllRepetitionsFailed,
                    "all " + std::to_string(n_rep) + " cross-validation repetitions failed; first: " + errors.front());
    out.curve = make_curve(detail::mean_curves(ok), cfg);
    return out;
}

/// Grid 0.01, 0.02, ..., 0.99 over which the inverse is measured.
inline std::vector<double> inverse_population_grid() {
    std::vector<double> g(99);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = static_cast<double>(k + 1) / 100.0;
    return g;
}

/// Curve value at v, held constant outside the estimated grid range and
/// linearly interpolated inside it.
inline double extended_curve_value(const CurveEstimate& curve, double v) {
    const auto& x = curve.v_grid;
    const auto& r = curve.r_hat;
    if (v <= x.front()) return r.front();
    if (v >= x.back()) return r.back();
    const auto it = std::lower_bound(x.begin(), x.end(), v);
    const auto hi = static_cast<std::size_t>(it - x.begin());
    if (*it == v) return r[hi];
    const std::size_t lo = hi - 1;
    const double t = (v - x[lo]) / (x[hi] - x[lo]);
    return r[lo] + t * (r[hi] - r[lo]);
}

/// Measure of {v in (0,1) : R(v) < p} on the 0.01 grid, so non-monotone curves
/// are handled.
inline double inverse_curve(const CurveEstimate& curve, double p) {
    if (curve.v_grid.empty() || curve.v_grid.size() != curve.r_hat.size())
        throw Error(ErrorCode::EmptyInput, "curve has no values");
    const auto grid0 = inverse_population_grid();
    std::size_t below = 0;
    for (double v : grid0)
        if (extended_curve_value(curve, v) < p) ++below;
    return static_cast<double>(below) / static_cast<double>(grid0.size());
}

inline InverseCurve inverse_curve(const CurveEstimate& curve, std::span<const double> p_grid) {
    InverseCurve out;
    out.p_grid.assign(p_grid.begin(), p_grid.end());
    out.proportion.reserve(p_grid.size());
    for (double p : p_grid) out.proportion.push_back(inverse_curve(curve, p));
    return out;
}

}  // namespace cmpcurve

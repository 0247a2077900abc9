#pragma once

#include <span>
#include <string>
#include <vector>

#include "cmpcurve/core_model.hpp"
#include "cmpcurve/curve.hpp"
#include "cmpcurve/perturb.hpp"

namespace cmpcurve {

struct InverseEstimate {
    InverseCurve curve;
    std::vector<double> se;
    std::vector<double> ci_lo;
    std::vector<double> ci_hi;
};

struct Analysis {
    CurveEstimate curve;  // with se and CI filled in
    InverseEstimate inverse;
    int failed_repetitions = 0;
    int failed_replicates = 0;
    int e_used = 0;
    std::vector<std::string> warnings;
};

/// Point estimate by repeated cross-validation, then perturbation inference
/// for both R(v) on the configured grid and R^{-1}(p) on `p_grid`.
inline Analysis analyze(const Dataset& ds, const StudyConfig& cfg, std::span<const double> p_grid,
                        unsigned threads = 1) {
    cfg.validate();
    Analysis out;
    CvResult cv = cv_estimate(ds, cfg, threads);
    out.curve = std::move(cv.curve);
    out.failed_repetitions = cv.failed_repetitions;
    out.warnings = std::move(cv.warnings);

    PerturbationRun run = run_perturbation(ds, cv.splits, cfg, p_grid, threads);
    out.failed_replicates = run.failed;
    out.warnings.insert(out.warnings.end(), run.warnings.begin(), run.warnings.end());

    const InferenceResult inf = variance_ci(out.curve, run.replicates, cfg.level);
    out.e_used = inf.e_used;
    out.curve.se = inf.se;
    out.curve.ci_lo = inf.ci_lo;
    out.curve.ci_hi = inf.ci_hi;

    out.inverse.curve = inverse_curve(out.curve, p_grid);
    if (!p_grid.empty()) {
        const InferenceResult inv = inverse_variance_ci(out.inverse.curve, run.replicates, cfg.level);
        out.inverse.se = inv.se;
        out.inverse.ci_lo = inv.ci_lo;
        out.inverse.ci_hi = inv.ci_hi;
    }
    return out;
}

}  // namespace cmpcurve

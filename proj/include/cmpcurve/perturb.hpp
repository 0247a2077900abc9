#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cmpcurve/core_model.hpp"
#include "cmpcurve/curve.hpp"
#include "cmpcurve/error.hpp"
#include "cmpcurve/normal.hpp"
#include "cmpcurve/parallel.hpp"
#include "cmpcurve/rng.hpp"
#include "cmpcurve/wbinomial.hpp"

namespace cmpcurve {

/// Share of replicates that may fail before inference is abandoned.
inline constexpr double kMaxFailedReplicateShare = 0.10;

inline std::vector<double> draw_exp_weights(std::size_t n, Stream& rng) {
    std::exponential_distribution<double> exp1(1.0);
    std::vector<double> w(n);
    for (double& x : w) {
        do x = exp1(rng); while (!(x > 0.0));
    }
    return w;
}

struct PerturbReplicate {
    int e_index = 0;
    std::vector<double> r_hat_e;
    std::optional<std::vector<double>> rinv_e;
};

/// Reruns the whole cross-validated estimate with omega as sampling weights in
/// every stage (Fine-Gray fit, censoring KM, quantiles and knots, binomial
/// objective), over the same splits as the point estimate.
inline PerturbReplicate perturbed_replicate(const Dataset& ds, std::span<const Split> splits,
                                            std::span<const double> omega, const StudyConfig& cfg,
                                            std::span<const double> p_grid = {}) {
    PerturbReplicate rep;
    rep.r_hat_e = curve_for_splits(ds, splits, omega, cfg);
    if (!p_grid.empty()) {
        CurveEstimate c = make_curve(rep.r_hat_e, cfg);
        rep.rinv_e = inverse_curve(c, p_grid).proportion;
    }
    return rep;
}

struct InferenceResult {
    std::vector<double> se;
    std::vector<double> ci_lo;
    std::vector<double> ci_hi;
    double level = 0.95;
    int e_used = 0;
};

namespace detail {

inline std::vector<double> replicate_sd(std::span<const PerturbReplicate> reps, std::size_t size, bool inverse) {
    std::vector<double> sd(size);
    const auto n = static_cast<double>(reps.size());
    for (std::size_t g = 0; g < size; ++g) {
        double mean = 0.0;
        for (const auto& r : reps) mean += inverse ? (*r.rinv_e)[g] : r.r_hat_e[g];
        mean /= n;
        double ss = 0.0;
        for (const auto& r : reps) {
            const double dev = (inverse ? (*r.rinv_e)[g] : r.r_hat_e[g]) - mean;
            ss += dev * dev;
        }
        sd[g] = std::sqrt(ss / (n - 1.0));
    }
    return sd;
}

inline double z_for_level(double level) { return normal_quantile(0.5 + level / 2.0); }

}  // namespace detail

/// Perturbation SE and logit-scale Wald intervals:
/// expit(logit R +- z * se / (R (1 - R))).
inline InferenceResult variance_ci(const CurveEstimate& point, std::span<const PerturbReplicate> replicates,
                                   double level = 0.95) {
    if (replicates.size() < 2)
        throw Error(ErrorCode::TooFewReplicates, "need at least 2 valid replicates, got " + std::to_string(replicates.size()));
    for (const auto& r : replicates)
        if (r.r_hat_e.size() != point.r_hat.size()) throw Error(ErrorCode::DimensionMismatch, "replicate grid differs");
    InferenceResult out;
    out.level = level;
    out.e_used = static_cast<int>(replicates.size());
    out.se = detail::replicate_sd(replicates, point.r_hat.size(), false);
    const double z = detail::z_for_level(level);
    out.ci_lo.resize(out.se.size());
    out.ci_hi.resize(out.se.size());
    for (std::size_t g = 0; g < out.se.size(); ++g) {
        const double r = point.r_hat[g];
        const double se_logit = out.se[g] / (r * (1.0 - r));
        out.ci_lo[g] = expit(logit(r) - z * se_logit);
        out.ci_hi[g] = expit(logit(r) + z * se_logit);
    }
    return out;
}

/// SE and Wald intervals for R^{-1}(p). Proportions may sit at 0 or 1, so the
/// interval is built on the raw scale and clipped to [0, 1].
inline InferenceResult inverse_variance_ci(const InverseCurve& point, std::span<const PerturbReplicate> replicates,
                                           double level = 0.95) {
    if (replicates.size() < 2)
        throw Error(ErrorCode::TooFewReplicates, "need at least 2 valid replicates, got " + std::to_string(replicates.size()));
    for (const auto& r : replicates)
        if (!r.rinv_e || r.rinv_e->size() != point.proportion.size())
            throw Error(ErrorCode::DimensionMismatch, "replicate lacks inverse values on the same p grid");
    InferenceResult out;
    out.level = level;
    out.e_used = static_cast<int>(replicates.size());
    out.se = detail::replicate_sd(replicates, point.proportion.size(), true);
    const double z = detail::z_for_level(level);
    for (std::size_t g = 0; g < out.se.size(); ++g) {
        out.ci_lo.push_back(std::clamp(point.proportion[g] - z * out.se[g], 0.0, 1.0));
        out.ci_hi.push_back(std::clamp(point.proportion[g] + z * out.se[g], 0.0, 1.0));
    }
    return out;
}

struct PerturbationRun {
    std::vector<PerturbReplicate> replicates;  // valid ones, in e order
    int failed = 0;
    std::vector<std::string> warnings;
};

/// E perturbation replicates; replicate e draws its weights from the stream
/// (cfg.seed, Perturb, e), so results do not depend on `threads`.
inline PerturbationRun run_perturbation(const Dataset& ds, std::span<const Split> splits, const StudyConfig& cfg,
                                        std::span<const double> p_grid = {}, unsigned threads = 1) {
    const auto e_total = static_cast<std::size_t>(cfg.perturb_e);
    std::vector<std::optional<PerturbReplicate>> slots(e_total);
    std::vector<std::string> errors(e_total);
    parallel_for(e_total, threads, [&](std::size_t e) {
        Stream rng = derive_stream(cfg.seed, StreamTag::Perturb, e);
        const auto omega = draw_exp_weights(ds.size(), rng);
        try {
            PerturbReplicate rep = perturbed_replicate(ds, splits, omega, cfg, p_grid);
            rep.e_index = static_cast<int>(e);
            slots[e] = std::move(rep);
        } catch (const Error& err) {
            errors[e] = err.what();
        }
    });

    PerturbationRun run;
    for (std::size_t e = 0; e < e_total; ++e) {
        if (slots[e]) {
            run.replicates.push_back(std::move(*slots[e]));
        } else {
            ++run.failed;
            run.warnings.push_back("perturbation replicate " + std::to_string(e + 1) + " invalid: " + errors[e]);
        }
    }
    if (static_cast<double>(run.failed) > kMaxFailedReplicateShare * static_cast<double>(e_total))
        throw Error(ErrorCode::TooManyFailedReplicates,
                    std::to_string(run.failed) + " of " + std::to_string(e_total) +
                        " perturbation replicates failed; variance from the remainder would be biased");
    return run;
}

}  // namespace cmpcurve

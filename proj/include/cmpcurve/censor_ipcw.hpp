#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cmpcurve/core_model.hpp"
#include "cmpcurve/error.hpp"

namespace cmpcurve {

/// Right-continuous, nonincreasing step function on [0, inf) starting at
/// value_at_zero. Holds the censoring survival estimate G.
class StepFunction {
public:
    StepFunction() = default;
    StepFunction(std::vector<double> jump_times, std::vector<double> values, double value_at_zero = 1.0)
        : jump_times_(std::move(jump_times)), values_(std::move(values)), value_at_zero_(value_at_zero) {
        if (jump_times_.size() != values_.size())
            throw Error(ErrorCode::DimensionMismatch, "jump times and values differ in length");
    }

    const std::vector<double>& jump_times() const noexcept { return jump_times_; }
    const std::vector<double>& values() const noexcept { return values_; }
    double value_at_zero() const noexcept { return value_at_zero_; }

    /// Right-continuous value at t.
    double operator()(double t) const {
        const auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), t);
        return it == jump_times_.begin() ? value_at_zero_ : values_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
    }

    /// Left limit at t; for a censoring survival function this is P(C >= t).
    double left_limit(double t) const {
        const auto it = std::lower_bound(jump_times_.begin(), jump_times_.end(), t);
        return it == jump_times_.begin() ? value_at_zero_ : values_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
    }

    bool operator==(const StepFunction&) const = default;

private:
    std::vector<double> jump_times_;
    std::vector<double> values_;
    double value_at_zero_ = 1.0;
};

/// Weighted Kaplan-Meier estimate of the censoring survival function over the
/// records in `idx`, treating event code 0 as the event. Weights are indexed by
/// record (length = dataset size). Everyone with Y >= t is in the risk set at
/// t, so failures tied with a censoring time stay at risk through it.
inline StepFunction fit_censoring_km(const Dataset& ds, std::span<const std::size_t> idx,
                                     std::span<const double> case_weights) {
    if (case_weights.size() != ds.size())
        throw Error(ErrorCode::DimensionMismatch, "case weights must have one entry per record");
    std::vector<std::size_t> order(idx.begin(), idx.end());
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ds[a].y < ds[b].y; });

    // Per distinct time: total weight and censored weight.
    std::vector<double> times, total, censored;
    double weight_sum = 0.0;
    for (std::size_t i : order) {
        const double w = case_weights[i];
        if (w < 0.0) throw Error(ErrorCode::InvalidConfig, "negative case weight");
        weight_sum += w;
        if (times.empty() || ds[i].y != times.back()) {
            times.push_back(ds[i].y);
            total.push_back(0.0);
            censored.push_back(0.0);
        }
        total.back() += w;
        if (ds[i].event == 0) censored.back() += w;
    }
    if (!(weight_sum > 0.0)) throw Error(ErrorCode::AllWeightsZero, "censoring KM needs a positive weight");

    std::vector<double> at_risk(times.size());
    double running = 0.0;
    for (std::size_t g = times.size(); g-- > 0;) {
        running = total[g] + running;
        at_risk[g] = running;
    }

    std::vector<double> jump_times, values;
    double surv = 1.0;
    for (std::size_t g = 0; g < times.size(); ++g) {
        if (censored[g] > 0.0 && at_risk[g] > 0.0) {
            surv *= std::max(0.0, 1.0 - censored[g] / at_risk[g]);
            jump_times.push_back(times[g]);
            values.push_back(surv);
        }
    }
    return StepFunction(std::move(jump_times), std::move(values), 1.0);
}

inline StepFunction fit_censoring_km(const Dataset& ds, std::span<const double> case_weights) {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return fit_censoring_km(ds, all, case_weights);
}

/// Whether I(T <= tau, cause 1) is known from (y, event): an observed failure
/// of any cause by tau, or follow-up reaching tau.
inline bool determinable(double y, int event, double tau) { return (y <= tau && event >= 1) || y >= tau; }

struct IpcwRow {
    bool determinable = false;
    double weight = 0.0;  // determinable / G(min(Y, tau))
    bool delta_tau = false;

    bool operator==(const IpcwRow&) const = default;
};

/// Throws unless some record is still under observation at tau.
inline void check_tau_support(const Dataset& ds, double tau) {
    for (const auto& r : ds.records)
        if (r.y >= tau) return;
    throw Error(ErrorCode::ZeroGhatAtDeterminable, "no subject is followed up to tau = " + std::to_string(tau) +
                                                       "; G(tau) is not estimable, choose a smaller tau");
}

/// IPCW rows for the records in `idx`, in the same order. G is evaluated as
/// P(C >= t), i.e. its left limit.
inline std::vector<IpcwRow> ipcw_rows(const Dataset& ds, std::span<const std::size_t> idx, const StepFunction& ghat,
                                      double tau) {
    bool anyone_reaches_tau = false;
    for (std::size_t i : idx) anyone_reaches_tau = anyone_reaches_tau || ds[i].y >= tau;
    if (!anyone_reaches_tau)
        throw Error(ErrorCode::ZeroGhatAtDeterminable,
                    "no subject is followed up to tau = " + std::to_string(tau) +
                        "; G(tau) is not estimable, choose a smaller tau");

    std::vector<IpcwRow> rows;
    rows.reserve(idx.size());
    for (std::size_t i : idx) {
        const auto& r = ds[i];
        IpcwRow row;
        row.determinable = determinable(r.y, r.event, tau);
        row.delta_tau = r.y <= tau && r.event == 1;
        if (row.determinable) {
            const double g = ghat.left_limit(std::min(r.y, tau));
            if (!(g > 0.0))
                throw Error(ErrorCode::ZeroGhatAtDeterminable,
                            "censoring survival is zero at t = " + std::to_string(std::min(r.y, tau)) +
                                "; tau lies beyond the censoring support, choose a smaller tau");
            row.weight = 1.0 / g;
        }
        rows.push_back(row);
    }
    return rows;
}

inline std::vector<IpcwRow> ipcw_rows(const Dataset& ds, const StepFunction& ghat, double tau) {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return ipcw_rows(ds, all, ghat, tau);
}

}  // namespace cmpcurve

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmpcurve/error.hpp"
#include "cmpcurve/rng.hpp"

namespace cmpcurve {

/// One observation: observed time y = min(T, C), event code (0 censored,
/// 1 cause of interest, >= 2 competing causes) and baseline covariates z.
struct SubjectRecord {
    double y = 0.0;
    int event = 0;
    std::vector<double> z;

    bool operator==(const SubjectRecord&) const = default;
};

struct Dataset {
    std::vector<SubjectRecord> records;
    std::size_t d = 0;  // covariate dimension
    int k = 1;          // number of causes

    std::size_t size() const noexcept { return records.size(); }
    const SubjectRecord& operator[](std::size_t i) const { return records[i]; }

    bool operator==(const Dataset&) const = default;
};

enum class Parameterization { GLM, RCS };
enum class Link { Logit };

inline constexpr std::string_view to_string(Parameterization p) { return p == Parameterization::GLM ? "glm" : "rcs"; }
inline constexpr std::string_view to_string(Link) { return "logit"; }

inline Parameterization parse_parameterization(std::string_view s) {
    if (s == "glm" || s == "GLM") return Parameterization::GLM;
    if (s == "rcs" || s == "RCS") return Parameterization::RCS;
    throw Error(ErrorCode::InvalidConfig, "unknown parameterization '" + std::string(s) + "'");
}

inline Link parse_link(std::string_view s) {
    if (s == "logit") return Link::Logit;
    throw Error(ErrorCode::InvalidConfig, "unknown link '" + std::string(s) + "'");
}

struct StudyConfig {
    double tau = 0.0;  // must be set by the caller
    int knots_q = 4;
    double grid_lo = 0.05;
    double grid_hi = 0.95;
    double grid_step = 0.01;
    int cv_repeats = 5;
    int perturb_e = 400;
    std::uint64_t seed = 1;
    Parameterization parameterization = Parameterization::RCS;
    Link link = Link::Logit;
    double level = 0.95;

    std::size_t grid_size() const {
        return static_cast<std::size_t>(std::llround((grid_hi - grid_lo) / grid_step)) + 1;
    }

    /// Evaluation grid grid_lo, grid_lo + step, ..., grid_hi.
    std::vector<double> grid() const {
        std::vector<double> v(grid_size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = grid_lo + static_cast<double>(i) * grid_step;
        v.back() = std::min(v.back(), grid_hi);
        return v;
    }

    void validate() const {
        auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
        constexpr double eps = 1e-12;
        if (!(tau > 0.0) || !std::isfinite(tau)) fail("tau must be positive and finite");
        if (knots_q < 3 || knots_q > 5) fail("knots_q must be 3, 4 or 5");
        if (!(grid_step > 0.0)) fail("grid_step must be positive");
        if (!(grid_lo > 0.0 && grid_lo < grid_hi && grid_hi < 1.0)) fail("need 0 < grid_lo < grid_hi < 1");
        if (grid_lo < grid_step - eps || grid_hi > 1.0 - grid_step + eps)
            fail("grid must exclude the boundary: grid_lo >= grid_step and grid_hi <= 1 - grid_step");
        const double steps = (grid_hi - grid_lo) / grid_step;
        if (std::abs(steps - std::round(steps)) > 1e-6) fail("grid_hi - grid_lo must be a multiple of grid_step");
        if (grid_size() < static_cast<std::size_t>(knots_q) + 2) fail("grid must contain at least knots_q + 2 points");
        if (cv_repeats < 1) fail("cv_repeats must be positive");
        if (perturb_e < 1) fail("perturb_e must be positive");
        if (!(level > 0.0 && level < 1.0)) fail("level must lie in (0, 1)");
    }
};

/// Disjoint halves D_A (training) and D_B (test) of a dataset, as ascending
/// 0-based record indices.
struct Split {
    std::vector<std::size_t> idx_a;
    std::vector<std::size_t> idx_b;

    bool operator==(const Split&) const = default;
};

/// Checks every record and infers d and, unless declared, k as the largest
/// observed event code.
inline Dataset validate_dataset(std::span<const SubjectRecord> raw, std::optional<int> declared_k = std::nullopt) {
    if (raw.empty()) throw Error(ErrorCode::EmptyInput, "no records");
    if (declared_k && *declared_k < 1) throw Error(ErrorCode::BadEventCode, "declared K must be at least 1");

    const std::size_t d = raw.front().z.size();
    int max_event = 0;
    bool has_cause1 = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto& r = raw[i];
        const std::string where = "record " + std::to_string(i + 1);
        if (!std::isfinite(r.y)) throw Error(ErrorCode::NonFinite, where + ": time is not finite");
        for (double v : r.z)
            if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, where + ": covariate is not finite");
        if (r.y < 0.0) throw Error(ErrorCode::NegativeTime, where + ": negative time");
        if (r.event < 0 || (declared_k && r.event > *declared_k))
            throw Error(ErrorCode::BadEventCode, where + ": event code " + std::to_string(r.event));
        if (r.z.size() != d)
            throw Error(ErrorCode::RaggedCovariates, where + ": has " + std::to_string(r.z.size()) +
                                                         " covariates, expected " + std::to_string(d));
        max_event = std::max(max_event, r.event);
        has_cause1 = has_cause1 || r.event == 1;
    }
    if (!has_cause1) throw Error(ErrorCode::NoCause1Events, "no record with event code 1");

    Dataset ds;
    ds.records.assign(raw.begin(), raw.end());
    ds.d = d;
    ds.k = declared_k ? *declared_k : std::max(1, max_event);
    return ds;
}

inline Dataset validate_dataset(const Dataset& ds) { return validate_dataset(ds.records, ds.k); }

/// xi(Z, beta) = Z'beta.
inline double linear_risk_score(std::span<const double> z, std::span<const double> beta) {
    if (z.size() != beta.size())
        throw Error(ErrorCode::DimensionMismatch,
                    "z has length " + std::to_string(z.size()) + ", beta " + std::to_string(beta.size()));
    return std::inner_product(z.begin(), z.end(), beta.begin(), 0.0);
}

/// Uniformly random partition into halves of sizes ceil(n/2) (D_A) and
/// floor(n/2) (D_B).
inline Split two_fold_split(std::size_t n, Stream& rng) {
    if (n < 4) throw Error(ErrorCode::TooFewRecords, "need at least 4 records to split, got " + std::to_string(n));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    // Fisher-Yates driven directly by the engine so splits are identical across
    // standard library implementations.
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::uint64_t bound = i + 1;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t draw;
        do draw = rng(); while (draw >= limit);
        std::swap(perm[i], perm[draw % bound]);
    }
    const std::size_t n_a = (n + 1) / 2;
    Split s;
    s.idx_a.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_a));
    s.idx_b.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_a), perm.end());
    std::sort(s.idx_a.begin(), s.idx_a.end());
    std::sort(s.idx_b.begin(), s.idx_b.end());
    return s;
}

inline Split two_fold_split(const Dataset& ds, Stream& rng) { return two_fold_split(ds.size(), rng); }

}  // namespace cmpcurve

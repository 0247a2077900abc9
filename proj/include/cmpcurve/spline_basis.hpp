#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cmpcurve/core_model.hpp"
#include "cmpcurve/error.hpp"
#include "cmpcurve/weighted_quantile.hpp"

namespace cmpcurve {

struct KnotSet {
    std::vector<double> knots;  // strictly increasing, 3 to 5 entries

    bool operator==(const KnotSet&) const = default;
};

/// Design row B(x) = (1, basis terms...). The leading entry is the intercept.
struct BasisRow {
    Eigen::VectorXd values;
};

/// Outer-trimmed quantile positions used for Q knots.
inline std::vector<double> knot_probabilities(int q) {
    switch (q) {
        case 3: return {0.10, 0.50, 0.90};
        case 4: return {0.05, 0.35, 0.65, 0.95};
        case 5: return {0.05, 0.275, 0.50, 0.725, 0.95};
        default: throw Error(ErrorCode::InvalidConfig, "knot count must be 3, 4 or 5");
    }
}

/// Knots at weighted quantiles of the score sample.
inline KnotSet default_knots(std::span<const double> scores, std::span<const double> weights, int q) {
    const auto probs = knot_probabilities(q);
    std::set<double> distinct;
    for (std::size_t i = 0; i < scores.size() && distinct.size() < static_cast<std::size_t>(q); ++i)
        if (weights[i] > 0.0) distinct.insert(scores[i]);
    if (distinct.size() < static_cast<std::size_t>(q))
        throw Error(ErrorCode::DegenerateScores, "fewer than " + std::to_string(q) + " distinct scores for knot placement");

    KnotSet ks{weighted_quantiles(scores, weights, probs)};
    for (std::size_t j = 1; j < ks.knots.size(); ++j)
        if (!(ks.knots[j] > ks.knots[j - 1]))
            throw Error(ErrorCode::DegenerateScores, "tied knot positions; scores too discrete for " + std::to_string(q) + " knots");
    return ks;
}

inline KnotSet default_knots(std::span<const double> scores, int q) {
    const std::vector<double> ones(scores.size(), 1.0);
    return default_knots(scores, ones, q);
}

/// Restricted cubic spline row (1, x, s_1(x), ..., s_{Q-2}(x)), each s_j
/// normalized by (t_Q - t_1)^2 and linear beyond the outer knots.
inline BasisRow rcs_basis(double x, const KnotSet& ks) {
    const auto& t = ks.knots;
    const std::size_t q = t.size();
    const double tq = t[q - 1], tq1 = t[q - 2];
    const double norm = (tq - t[0]) * (tq - t[0]);
    auto cube_pos = [](double u) { return u > 0.0 ? u * u * u : 0.0; };
    const double tail1 = cube_pos(x - tq1), tail2 = cube_pos(x - tq);

    BasisRow row{Eigen::VectorXd(static_cast<Eigen::Index>(q))};
    row.values(0) = 1.0;
    row.values(1) = x;
    for (std::size_t j = 0; j + 2 < q; ++j) {
        const double s = cube_pos(x - t[j]) - tail1 * (tq - t[j]) / (tq - tq1) + tail2 * (tq1 - t[j]) / (tq - tq1);
        row.values(static_cast<Eigen::Index>(j + 2)) = s / norm;
    }
    return row;
}

inline BasisRow glm_basis(double x) {
    BasisRow row{Eigen::VectorXd(2)};
    row.values << 1.0, x;
    return row;
}

/// The basis of one fitted half: GLM (1, x) or RCS on fixed knots.
class Basis {
public:
    static Basis glm() { return Basis(Parameterization::GLM, {}); }
    static Basis rcs(KnotSet knots) { return Basis(Parameterization::RCS, std::move(knots)); }

    Parameterization parameterization() const noexcept { return param_; }
    const KnotSet& knots() const noexcept { return knots_; }
    std::size_t size() const noexcept { return param_ == Parameterization::GLM ? 2 : knots_.knots.size(); }

    BasisRow operator()(double x) const { return param_ == Parameterization::GLM ? glm_basis(x) : rcs_basis(x, knots_); }

    Eigen::MatrixXd design(std::span<const double> xs) const {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(size()));
        for (std::size_t i = 0; i < xs.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = (*this)(xs[i]).values.transpose();
        return out;
    }

private:
    Basis(Parameterization p, KnotSet k) : param_(p), knots_(std::move(k)) {}

    Parameterization param_;
    KnotSet knots_;
};

}  // namespace cmpcurve

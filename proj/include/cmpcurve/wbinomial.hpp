#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "cmpcurve/error.hpp"
#include "cmpcurve/newton.hpp"
#include "cmpcurve/spline_basis.hpp"

namespace cmpcurve {

inline double expit(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// log(1 + e^x) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

struct ThetaFit {
    Eigen::VectorXd theta;
    bool converged = false;
    int iterations = 0;
    double final_gradient_norm = 0.0;
    double objective = 0.0;
};

/// sum_i w_i [delta_i log p_i + (1 - delta_i) log(1 - p_i)], p_i = expit(theta'B_i).
inline double binomial_objective(const Eigen::VectorXd& theta, std::span<const int> delta, const Eigen::MatrixXd& design,
                                 std::span<const double> weights) {
    const Eigen::VectorXd eta = design * theta;
    double obj = 0.0;
    for (std::size_t i = 0; i < delta.size(); ++i) {
        if (weights[i] == 0.0) continue;
        const double e = eta(static_cast<Eigen::Index>(i));
        obj -= weights[i] * (delta[i] ? softplus(-e) : softplus(e));
    }
    return obj;
}

/// Maximizes the weighted binomial log-likelihood by Newton with step halving
/// from theta = 0. Zero-weight rows are dropped first. Separation shows up as
/// converged = false after max_iter; no penalty is applied.
inline ThetaFit fit_weighted_binomial(std::span<const int> delta, const Eigen::MatrixXd& design,
                                      std::span<const double> weights, const FitControl& ctl = {}) {
    const std::size_t n = delta.size();
    if (static_cast<std::size_t>(design.rows()) != n || weights.size() != n)
        throw Error(ErrorCode::DimensionMismatch, "responses, design rows and weights must have equal length");

    std::vector<std::size_t> keep;
    keep.reserve(n);
    bool any1 = false, any0 = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (weights[i] < 0.0 || !std::isfinite(weights[i])) throw Error(ErrorCode::InvalidConfig, "invalid weight");
        if (weights[i] == 0.0) continue;
        keep.push_back(i);
        (delta[i] ? any1 : any0) = true;
    }
    if (!any1 || !any0) throw Error(ErrorCode::DegenerateResponses, "all weighted responses are equal");

    const auto m = static_cast<Eigen::Index>(keep.size());
    const auto p = design.cols();
    Eigen::MatrixXd x(m, p);
    Eigen::VectorXd y(m), w(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        const std::size_t i = keep[static_cast<std::size_t>(r)];
        x.row(r) = design.row(static_cast<Eigen::Index>(i));
        y(r) = delta[i] ? 1.0 : 0.0;
        w(r) = weights[i];
    }

    // Objective at th; fills prob with expit(x th) from the same exponentials.
    auto evaluate = [&](const Eigen::VectorXd& th, Eigen::VectorXd& prob) {
        const Eigen::VectorXd eta = x * th;
        double obj = 0.0;
        for (Eigen::Index r = 0; r < m; ++r) {
            const double e = eta(r);
            const double ex = std::exp(-std::abs(e));
            const double l1 = std::log1p(ex);
            prob(r) = e >= 0.0 ? 1.0 / (1.0 + ex) : ex / (1.0 + ex);
            // log(1 + e^{-e}) for an event, log(1 + e^{e}) otherwise
            const double nll = y(r) > 0.5 ? (e >= 0.0 ? l1 : l1 - e) : (e >= 0.0 ? l1 + e : l1);
            obj -= w(r) * nll;
        }
        return obj;
    };

    ThetaFit fit;
    fit.theta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd prob(m), cand_prob(m), grad(p);
    double obj = evaluate(fit.theta, prob);
    Eigen::MatrixXd hess(p, p);
    for (int iter = 0;; ++iter) {
        grad.noalias() = x.transpose() * (w.cwiseProduct(y - prob));
        fit.final_gradient_norm = grad.cwiseAbs().maxCoeff();
        hess.setZero();
        for (Eigen::Index r = 0; r < m; ++r) {
            const double v = w(r) * prob(r) * (1.0 - prob(r));
            for (Eigen::Index j = 0; j < p; ++j)
                for (Eigen::Index k = 0; k <= j; ++k) hess(j, k) += v * x(r, j) * x(r, k);
        }
        hess.triangularView<Eigen::StrictlyUpper>() = hess.transpose();
        if (iter == 0 && detail::is_singular(hess))
            throw Error(ErrorCode::SingularInformation, "binomial design matrix is rank deficient");
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
        if (ldlt.info() != Eigen::Success) break;
        const Eigen::VectorXd step = ldlt.solve(grad);
        if (!step.allFinite()) break;
        if (fit.final_gradient_norm <= ctl.tol && step.cwiseAbs().maxCoeff() <= ctl.step_tol) {
            fit.converged = true;
            break;
        }
        if (iter >= ctl.max_iter) break;

        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h < 40; ++h, scale *= 0.5) {
            const Eigen::VectorXd cand = fit.theta + scale * step;
            const double cand_obj = evaluate(cand, cand_prob);
            if (detail::not_worse(cand_obj, obj)) {
                fit.theta = cand;
                obj = cand_obj;
                prob.swap(cand_prob);
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        fit.iterations = iter + 1;
    }
    fit.objective = obj;
    return fit;
}

inline ThetaFit fit_weighted_binomial(std::span<const int> delta, std::span<const BasisRow> rows,
                                      std::span<const double> weights, const FitControl& ctl = {}) {
    if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no basis rows");
    Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), rows.front().values.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].values.size() != design.cols()) throw Error(ErrorCode::DimensionMismatch, "ragged basis rows");
        design.row(static_cast<Eigen::Index>(i)) = rows[i].values.transpose();
    }
    return fit_weighted_binomial(delta, design, weights, ctl);
}

/// g(theta'B) with the inverse-logit link.
inline double predict_prob(const Eigen::VectorXd& theta, const BasisRow& row) {
    if (theta.size() != row.values.size())
        throw Error(ErrorCode::DimensionMismatch, "theta and basis row differ in length");
    return expit(theta.dot(row.values));
}

}  // namespace cmpcurve

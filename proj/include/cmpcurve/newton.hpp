#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cmpcurve {

struct FitControl {
    double tol = 1e-8;  // on the gradient max-norm
    int max_iter = 50;
    // Also required of the Newton step. Under separation or monotone likelihood
    // the gradient vanishes as the coefficients diverge but the step does not.
    double step_tol = 1e-6;
};

namespace detail {

// Not positive definite to working precision.
inline bool is_singular(const Eigen::MatrixXd& info) {
    if (!info.allFinite()) return true;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    const double largest = ev.cwiseAbs().maxCoeff();
    return !(ev.minCoeff() > 1e-10 * std::max(largest, 1e-300));
}

// Step acceptance for the halving line search. Near the optimum the true gain
// is below the rounding error of the objective, so ties within that noise pass.
inline bool not_worse(double candidate, double current) {
    return std::isfinite(candidate) && candidate >= current - 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(current));
}

}  // namespace detail
}  // namespace cmpcurve

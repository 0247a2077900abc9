#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cmpcurve/censor_ipcw.hpp"
#include "cmpcurve/core_model.hpp"
#include "cmpcurve/error.hpp"
#include "cmpcurve/newton.hpp"

namespace cmpcurve {

struct FGFit {
    Eigen::VectorXd beta;
    int iterations = 0;
    double final_gradient_norm = 0.0;
    double loglik = 0.0;
    bool converged = false;
    std::vector<double> loglik_trace;  // value after each accepted iterate, starting at beta = 0
};

namespace detail {

/// Weighted subdistribution partial likelihood for one training subset.
///
/// Risk set at a cause-1 time t: every subject with Y >= t, plus competing
/// event subjects with Y < t weighted by G(t)/G(Y), where G is the weighted
/// censoring KM of the same subset. Ties follow Breslow.
class FineGrayProblem {
public:
    struct Evaluation {
        double loglik = 0.0;
        Eigen::VectorXd score;
        Eigen::MatrixXd information;
    };

    FineGrayProblem(const Dataset& ds, std::span<const std::size_t> idx, std::span<const double> weights)
        : d_(ds.d) {
        if (weights.size() != ds.size())
            throw Error(ErrorCode::DimensionMismatch, "weights must have one entry per record");
        std::vector<std::size_t> order;
        order.reserve(idx.size());
        for (std::size_t i : idx)
            if (weights[i] > 0.0) order.push_back(i);
            else if (weights[i] < 0.0) throw Error(ErrorCode::InvalidConfig, "negative weight");
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ds[a].y < ds[b].y; });

        const StepFunction ghat = fit_censoring_km(ds, idx, weights);

        const std::size_t m = order.size();
        z_.resize(m * d_);
        w_.resize(m);
        comp_factor_.assign(m, 0.0);
        cause1_.assign(m, false);
        for (std::size_t p = 0; p < m; ++p) {
            const auto& r = ds[order[p]];
            for (std::size_t j = 0; j < d_; ++j) z_[p * d_ + j] = r.z[j];
            w_[p] = weights[order[p]];
            cause1_[p] = r.event == 1;
            if (r.event >= 2) comp_factor_[p] = 1.0 / ghat.left_limit(r.y);
        }

        for (std::size_t p = 0; p < m;) {
            std::size_t q = p;
            const double t = ds[order[p]].y;
            bool has_event = false;
            while (q < m && ds[order[q]].y == t) {
                has_event = has_event || cause1_[q];
                ++q;
            }
            if (has_event) {
                groups_.push_back({p, q, ghat.left_limit(t)});
                for (std::size_t s = p; s < q; ++s)
                    if (cause1_[s]) {
                        ++n_events_;
                        event_weight_ += w_[s];
                    }
            }
            p = q;
        }
    }

    std::size_t dim() const noexcept { return d_; }
    std::size_t n_events() const noexcept { return n_events_; }
    double event_weight() const noexcept { return event_weight_; }

    Evaluation evaluate(const Eigen::VectorXd& beta, bool want_score, bool want_info) const {
        const std::size_t m = w_.size();
        const std::size_t d = d_;
        const std::size_t dd = d * d;
        want_score = want_score || want_info;

        std::vector<double> eta(m), r(m);
        double shift = -std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < m; ++p) {
            const double* zp = &z_[p * d];
            double e = 0.0;
            for (std::size_t j = 0; j < d; ++j) e += zp[j] * beta(static_cast<Eigen::Index>(j));
            eta[p] = e;
            shift = std::max(shift, e);
        }
        for (std::size_t p = 0; p < m; ++p) {
            eta[p] -= shift;
            r[p] = w_[p] * std::exp(eta[p]);
        }

        // Adds a * z_p (and a * z_p z_p') into running sums.
        auto accumulate = [&](std::size_t p, double a, double* s1, double* s2) {
            const double* zp = &z_[p * d];
            if (want_score)
                for (std::size_t j = 0; j < d; ++j) s1[j] += a * zp[j];
            if (want_info)
                for (std::size_t j = 0; j < d; ++j)
                    for (std::size_t k = 0; k < d; ++k) s2[j * d + k] += a * zp[j] * zp[k];
        };

        // Competing-event sums over Y < t for each event group, ascending.
        const std::size_t n_groups = groups_.size();
        std::vector<double> c0(n_groups), c1(want_score ? n_groups * d : 0), c2(want_info ? n_groups * dd : 0);
        {
            double s0 = 0.0;
            std::vector<double> s1(d, 0.0), s2(dd, 0.0);
            std::size_t p = 0;
            for (std::size_t g = 0; g < n_groups; ++g) {
                for (; p < groups_[g].start; ++p) {
                    if (comp_factor_[p] == 0.0) continue;
                    const double a = r[p] * comp_factor_[p];
                    s0 += a;
                    accumulate(p, a, s1.data(), s2.data());
                }
                c0[g] = s0;
                if (want_score) std::copy(s1.begin(), s1.end(), c1.begin() + static_cast<std::ptrdiff_t>(g * d));
                if (want_info) std::copy(s2.begin(), s2.end(), c2.begin() + static_cast<std::ptrdiff_t>(g * dd));
            }
        }

        Evaluation out;
        std::vector<double> score(want_score ? d : 0, 0.0), info(want_info ? dd : 0, 0.0);
        double a0 = 0.0;
        std::vector<double> a1(d, 0.0), a2(dd, 0.0), s1(d), s2(dd), z_sum(d);
        std::size_t p = m;
        for (std::size_t g = n_groups; g-- > 0;) {
            const Group& grp = groups_[g];
            while (p > grp.start) {
                --p;
                a0 += r[p];
                accumulate(p, r[p], a1.data(), a2.data());
            }
            const double s0 = a0 + grp.g * c0[g];
            double dw = 0.0, eta_sum = 0.0;
            std::fill(z_sum.begin(), z_sum.end(), 0.0);
            for (std::size_t q = grp.start; q < grp.end; ++q) {
                if (!cause1_[q]) continue;
                dw += w_[q];
                eta_sum += w_[q] * eta[q];
                if (want_score)
                    for (std::size_t j = 0; j < d; ++j) z_sum[j] += w_[q] * z_[q * d + j];
            }
            out.loglik += eta_sum - dw * std::log(s0);
            if (want_score) {
                for (std::size_t j = 0; j < d; ++j) {
                    s1[j] = a1[j] + grp.g * c1[g * d + j];
                    score[j] += z_sum[j] - (dw / s0) * s1[j];
                }
            }
            if (want_info) {
                for (std::size_t j = 0; j < d; ++j)
                    for (std::size_t k = 0; k < d; ++k) {
                        s2[j * d + k] = a2[j * d + k] + grp.g * c2[g * dd + j * d + k];
                        info[j * d + k] += (dw / s0) * s2[j * d + k] - (dw / (s0 * s0)) * s1[j] * s1[k];
                    }
            }
        }
        const auto de = static_cast<Eigen::Index>(d);
        if (want_score) out.score = Eigen::Map<const Eigen::VectorXd>(score.data(), de);
        if (want_info) out.information = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(info.data(), de, de);
        return out;
    }

private:
    struct Group {
        std::size_t start;  // first sorted position with Y == t (all later positions have Y >= t)
        std::size_t end;
        double g;           // G(t-)
    };

    std::size_t d_;
    std::vector<double> z_;  // row-major, m x d
    std::vector<double> w_;
    std::vector<double> comp_factor_;  // 1/G(Y-) for competing events, 0 otherwise
    std::vector<bool> cause1_;
    std::vector<Group> groups_;
    std::size_t n_events_ = 0;
    double event_weight_ = 0.0;
};

inline std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

}  // namespace detail

inline double fg_loglik(const Eigen::VectorXd& beta, const Dataset& ds, std::span<const std::size_t> idx,
                        std::span<const double> weights) {
    detail::FineGrayProblem prob(ds, idx, weights);
    if (static_cast<std::size_t>(beta.size()) != prob.dim()) throw Error(ErrorCode::DimensionMismatch, "beta length");
    return prob.evaluate(beta, false, false).loglik;
}

inline double fg_loglik(const Eigen::VectorXd& beta, const Dataset& train, std::span<const double> weights) {
    return fg_loglik(beta, train, detail::all_indices(train.size()), weights);
}

/// Gradient of the weighted subdistribution log partial likelihood.
inline Eigen::VectorXd fg_score(const Eigen::VectorXd& beta, const Dataset& ds, std::span<const std::size_t> idx,
                                std::span<const double> weights) {
    detail::FineGrayProblem prob(ds, idx, weights);
    if (prob.n_events() == 0) throw Error(ErrorCode::NoCause1Events, "no cause-1 events with positive weight");
    if (static_cast<std::size_t>(beta.size()) != prob.dim()) throw Error(ErrorCode::DimensionMismatch, "beta length");
    return prob.evaluate(beta, true, false).score;
}

inline Eigen::VectorXd fg_score(const Eigen::VectorXd& beta, const Dataset& train, std::span<const double> weights) {
    return fg_score(beta, train, detail::all_indices(train.size()), weights);
}

/// Newton-Raphson with step halving from beta = 0. Returns the last accepted
/// iterate with converged = false when the tolerances are not reached.
inline FGFit fg_fit(const Dataset& ds, std::span<const std::size_t> idx, std::span<const double> weights,
                    const FitControl& ctl = {}) {
    if (ds.d == 0) throw Error(ErrorCode::DimensionMismatch, "Fine-Gray fit needs at least one covariate");
    detail::FineGrayProblem prob(ds, idx, weights);
    if (prob.n_events() == 0) throw Error(ErrorCode::NoCause1Events, "no cause-1 events in training data");
    if (prob.n_events() < ds.d + 1)
        throw Error(ErrorCode::TooFewEvents, std::to_string(prob.n_events()) + " cause-1 events for " +
                                                 std::to_string(ds.d) + " covariates");

    FGFit fit;
    fit.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ds.d));
    auto ev = prob.evaluate(fit.beta, true, true);
    if (detail::is_singular(ev.information))
        throw Error(ErrorCode::SingularInformation, "information matrix is singular at beta = 0 (collinear covariates?)");
    fit.loglik_trace.push_back(ev.loglik);

    for (int iter = 0;; ++iter) {
        fit.final_gradient_norm = ev.score.cwiseAbs().maxCoeff();
        Eigen::LLT<Eigen::MatrixXd> llt(ev.information);
        if (llt.info() != Eigen::Success) break;
        const Eigen::VectorXd step = llt.solve(ev.score);
        if (fit.final_gradient_norm <= ctl.tol && step.cwiseAbs().maxCoeff() <= ctl.step_tol) {
            fit.converged = true;
            break;
        }
        if (iter >= ctl.max_iter) break;

        double scale = 1.0;
        bool accepted = false;
        Eigen::VectorXd candidate;
        double cand_ll = 0.0;
        for (int h = 0; h < 40; ++h, scale *= 0.5) {
            candidate = fit.beta + scale * step;
            cand_ll = prob.evaluate(candidate, false, false).loglik;
            if (detail::not_worse(cand_ll, ev.loglik)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        fit.beta = candidate;
        ev = prob.evaluate(fit.beta, true, true);
        fit.loglik_trace.push_back(ev.loglik);
        fit.iterations = iter + 1;
    }
    fit.loglik = ev.loglik;
    return fit;
}

inline FGFit fg_fit(const Dataset& train, std::span<const double> weights, const FitControl& ctl = {}) {
    return fg_fit(train, detail::all_indices(train.size()), weights, ctl);
}

}  // namespace cmpcurve

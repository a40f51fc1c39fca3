/*
 Copyright 2026 DAPI Toolkit Contributors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dapi/errors.hpp"

namespace dapi::convex {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Disutility of one dispatchable unit: a quadratic around the base dispatch
/// plus log barriers at the power limits,
///
///   J(u) = q/2 (u - u_star)^2 - gamma [log(upper - u) + log(u - lower)].
///
/// The barrier makes the gradient surjective onto R, so the conjugate gradient
/// (the gradient inverse) is defined for every price signal. gamma = 0 with
/// infinite bounds degenerates to a pure quadratic with a closed-form
/// conjugate.
class BarrierQuadraticObjective {
public:
    BarrierQuadraticObjective(double q, double u_star, double gamma,
                              double lower = -kInf, double upper = kInf)
        : q_(q), u_star_(u_star), gamma_(gamma), lower_(lower), upper_(upper) {
        if (!(q > 0.0) || !std::isfinite(q)) throw ValidationError("objective: q must be finite and > 0");
        if (!std::isfinite(u_star)) throw ValidationError("objective: u_star must be finite");
        if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError("objective: gamma must be finite and >= 0");
        if (std::isnan(lower) || std::isnan(upper)) throw ValidationError("objective: bounds must not be NaN");
        if (!(lower < upper)) throw ValidationError("objective: lower must be < upper");
        if (gamma > 0.0 && (!std::isfinite(lower) || !std::isfinite(upper))) {
            throw ValidationError("objective: gamma > 0 requires finite lower and upper bounds");
        }
    }

    double q() const { return q_; }
    double u_star() const { return u_star_; }
    double gamma() const { return gamma_; }
    double lower() const { return lower_; }
    double upper() const { return upper_; }

    /// Strong convexity parameter; the quadratic term alone certifies it.
    double mu() const { return q_; }

    bool bounded() const { return std::isfinite(lower_) && std::isfinite(upper_); }
    bool contains(double u) const { return u > lower_ && u < upper_; }

    double value(double u) const {
        require_interior(u);
        return value_unchecked(u);
    }

    /// dJ/du; strictly increasing, diverging at finite bounds when gamma > 0.
    double grad(double u) const {
        require_interior(u);
        return grad_unchecked(u);
    }

    /// d2J/du2 >= q everywhere.
    double hess(double u) const {
        double h = q_;
        if (gamma_ > 0.0) {
            const double du = upper_ - u;
            const double dl = u - lower_;
            h += gamma_ / (du * du) + gamma_ / (dl * dl);
        }
        return h;
    }

    /// Gradient of the conjugate: the unique u with grad(u) = eta. Solved by
    /// bracketed bisection refined with Newton steps until the residual is
    /// zero or the bracket collapses to adjacent doubles (residual well below
    /// the 1e-12 contract for representable solutions).
    double conj_grad(double eta) const {
        if (!std::isfinite(eta)) throw DomainViolation("conj_grad: eta must be finite");
        if (gamma_ == 0.0) {
            double u = u_star_ + eta / q_;
            if (u < lower_) u = lower_;
            if (u > upper_) u = upper_;
            return u;
        }

        double a = push_from_lower(eta);
        double b = push_from_upper(eta);
        double fa = grad_unchecked(a) - eta;
        double fb = grad_unchecked(b) - eta;
        if (fa >= 0.0) return a; // eta at or below the representable edge
        if (fb <= 0.0) return b;

        double x = a + 0.5 * (b - a);
        double width_hist = b - a;
        for (int it = 0; it < 200; ++it) {
            const double fx = grad_unchecked(x) - eta;
            if (fx == 0.0) return x;
            if (fx < 0.0) {
                a = x;
                fa = fx;
            } else {
                b = x;
                fb = fx;
            }
            if (b <= std::nextafter(a, kInf)) {
                return std::abs(fa) <= std::abs(fb) ? a : b;
            }
            double xn = x - fx / hess(x);
            bool take_newton = std::isfinite(xn) && xn > a && xn < b;
            if (it % 2 == 1) {
                if ((b - a) > 0.5 * width_hist) take_newton = false;
                width_hist = b - a;
            }
            x = take_newton ? xn : a + 0.5 * (b - a);
        }
        throw ConvergenceFailure("conj_grad: no convergence after 200 iterations");
    }

    /// Legendre-Fenchel conjugate J*(eta) = eta u - J(u) at u = conj_grad(eta).
    double conj_value(double eta) const {
        const double u = conj_grad(eta);
        return eta * u - value_unchecked(u);
    }

private:
    void require_interior(double u) const {
        if (!(u > lower_) || !(u < upper_)) {
            throw DomainViolation("objective evaluated at u = " + std::to_string(u) +
                                  " outside (" + std::to_string(lower_) + ", " +
                                  std::to_string(upper_) + ")");
        }
    }

    double value_unchecked(double u) const {
        const double du = u - u_star_;
        double v = 0.5 * q_ * du * du;
        if (gamma_ > 0.0) v -= gamma_ * (std::log(upper_ - u) + std::log(u - lower_));
        return v;
    }

    double grad_unchecked(double u) const {
        double g = q_ * (u - u_star_);
        if (gamma_ > 0.0) g += gamma_ / (upper_ - u) - gamma_ / (u - lower_);
        return g;
    }

    // Initial bracket endpoints sit 1e-14 * width inside the limits and move
    // toward a limit only as far as needed to enclose eta.
    double push_from_lower(double eta) const {
        const double edge = std::nextafter(lower_, upper_);
        double a = lower_ + 1e-14 * (upper_ - lower_);
        if (!(a > lower_)) a = edge;
        while (grad_unchecked(a) > eta && a > edge) {
            a = lower_ + (a - lower_) / 16.0;
            if (!(a > lower_)) a = edge;
        }
        return a;
    }

    double push_from_upper(double eta) const {
        const double edge = std::nextafter(upper_, lower_);
        double b = upper_ - 1e-14 * (upper_ - lower_);
        if (!(b < upper_)) b = edge;
        while (grad_unchecked(b) < eta && b < edge) {
            b = upper_ - (upper_ - b) / 16.0;
            if (!(b < upper_)) b = edge;
        }
        return b;
    }

    double q_;
    double u_star_;
    double gamma_;
    double lower_;
    double upper_;
};

/// Ordered collection of per-unit objectives; index order matches the
/// communication graph's node order.
class ObjectiveBank {
public:
    explicit ObjectiveBank(std::vector<BarrierQuadraticObjective> objectives)
        : objs_(std::move(objectives)) {
        if (objs_.empty()) throw ValidationError("objective bank must hold at least one objective");
    }

    int size() const { return static_cast<int>(objs_.size()); }
    const BarrierQuadraticObjective& operator[](int i) const { return objs_[static_cast<size_t>(i)]; }
    auto begin() const { return objs_.begin(); }
    auto end() const { return objs_.end(); }

    Eigen::VectorXd conj_grad(const Eigen::VectorXd& eta) const {
        check_dim(eta.size());
        Eigen::VectorXd u(size());
        for (int i = 0; i < size(); ++i) u(i) = objs_[static_cast<size_t>(i)].conj_grad(eta(i));
        return u;
    }

    Eigen::VectorXd grad(const Eigen::VectorXd& u) const {
        check_dim(u.size());
        Eigen::VectorXd g(size());
        for (int i = 0; i < size(); ++i) g(i) = objs_[static_cast<size_t>(i)].grad(u(i));
        return g;
    }

    Eigen::VectorXd base_dispatch() const {
        Eigen::VectorXd u(size());
        for (int i = 0; i < size(); ++i) u(i) = objs_[static_cast<size_t>(i)].u_star();
        return u;
    }

    double sum_lower() const {
        double s = 0.0;
        for (const auto& f : objs_) s += f.lower();
        return s;
    }

    double sum_upper() const {
        double s = 0.0;
        for (const auto& f : objs_) s += f.upper();
        return s;
    }

private:
    void check_dim(Eigen::Index n) const {
        if (n != size()) throw DimensionMismatch("objective bank: vector length does not match bank size");
    }

    std::vector<BarrierQuadraticObjective> objs_;
};

/// mu_min across the bank; the quadratic weights certify strong convexity.
inline double strong_convexity_parameter(const ObjectiveBank& bank) {
    double mu = kInf;
    for (const auto& f : bank) mu = std::min(mu, f.mu());
    return mu;
}

} // namespace dapi::convex

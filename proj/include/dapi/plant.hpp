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
#include <string>
#include <utility>
#include <vector>

#include "dapi/errors.hpp"
#include "dapi/linalg.hpp"

namespace dapi::plant {

struct MachineParams {
    double inertia;     // M, s^2
    double damping;     // D, p.u./(rad/s)
    double gov_time;    // turbine-governor time constant, s
    double droop;       // R_d, (rad/s)/p.u.
    bool controllable;
};

struct Disturbance {
    Eigen::VectorXd per_machine_load; // d_i, p.u.; scalar net load d = sum
};

/// Deviation state of the network-reduced machine model. delta_theta is kept
/// in coordinates relative to machine 1, whose entry is pinned to 0.
struct PlantState {
    Eigen::VectorXd delta_theta; // rad
    Eigen::VectorXd delta_omega; // rad/s
    Eigen::VectorXd delta_pm;    // p.u.
};

/// Linearized swing dynamics with first-order turbine governors:
///
///   d(theta_i)/dt = omega_i - omega_1          (relative angles, theta_1 = 0)
///   M_i d(omega_i)/dt = -sum_j T_ij (theta_i - theta_j) - D_i omega_i + Pm_i - d_i
///   Tg_i d(Pm_i)/dt = -Pm_i - omega_i / Rd_i + u_i
///
/// Control inputs index the controllable machines only; everything is a
/// deviation from the nominal operating point.
class LinearPlant {
public:
    LinearPlant(std::vector<MachineParams> machines, Eigen::MatrixXd susceptances)
        : machines_(std::move(machines)), susceptances_(std::move(susceptances)) {
        const int n = static_cast<int>(machines_.size());
        if (n < 1) throw ValidationError("plant needs at least one machine");
        for (int i = 0; i < n; ++i) {
            const auto& mp = machines_[static_cast<size_t>(i)];
            if (!(mp.inertia > 0.0) || !(mp.damping > 0.0) || !(mp.gov_time > 0.0) || !(mp.droop > 0.0)) {
                throw ValidationError("machine " + std::to_string(i + 1) +
                                      ": M, D, T_gov, R_droop must all be > 0");
            }
        }
        if (susceptances_.rows() != n || susceptances_.cols() != n) {
            throw ValidationError("susceptance matrix must be n x n");
        }
        const double scale = std::max(1.0, susceptances_.cwiseAbs().maxCoeff());
        for (int i = 0; i < n; ++i) {
            if (susceptances_(i, i) != 0.0) throw ValidationError("susceptance diagonal must be 0");
            for (int j = 0; j < n; ++j) {
                if (!(susceptances_(i, j) >= 0.0)) throw ValidationError("susceptances must be >= 0");
                if (std::abs(susceptances_(i, j) - susceptances_(j, i)) > 1e-12 * scale) {
                    throw ValidationError("susceptance matrix must be symmetric");
                }
            }
        }
        for (int i = 0; i < n; ++i) {
            if (machines_[static_cast<size_t>(i)].controllable) controllable_.push_back(i);
        }
    }

    int n() const { return static_cast<int>(machines_.size()); }
    int num_controllable() const { return static_cast<int>(controllable_.size()); }
    const std::vector<int>& controllable_indices() const { return controllable_; }
    const std::vector<MachineParams>& machines() const { return machines_; }
    const Eigen::MatrixXd& susceptances() const { return susceptances_; }

    /// Aggregate frequency-response constant: beta = sum_i (D_i + 1/Rd_i)
    /// over all machines.
    double beta() const {
        double b = 0.0;
        for (const auto& mp : machines_) b += mp.damping + 1.0 / mp.droop;
        return b;
    }

    PlantState derivative(const PlantState& s, const Eigen::VectorXd& u, const Disturbance& dist) const {
        check_state(s);
        check_input(u, dist);
        const int nn = n();
        const Eigen::VectorXd uf = expand_input(u);
        PlantState d;
        d.delta_theta = Eigen::VectorXd::Zero(nn);
        d.delta_omega = Eigen::VectorXd::Zero(nn);
        d.delta_pm = Eigen::VectorXd::Zero(nn);
        for (int i = 1; i < nn; ++i) d.delta_theta(i) = s.delta_omega(i) - s.delta_omega(0);
        for (int i = 0; i < nn; ++i) {
            const auto& mp = machines_[static_cast<size_t>(i)];
            double flow = 0.0;
            for (int j = 0; j < nn; ++j) {
                flow += susceptances_(i, j) * (s.delta_theta(i) - s.delta_theta(j));
            }
            d.delta_omega(i) = (-flow - mp.damping * s.delta_omega(i) + s.delta_pm(i) -
                                dist.per_machine_load(i)) /
                               mp.inertia;
            d.delta_pm(i) = (-s.delta_pm(i) - s.delta_omega(i) / mp.droop + uf(i)) / mp.gov_time;
        }
        return d;
    }

    /// Unique equilibrium for constant (u, d): common frequency
    /// (1'u - d)/beta, governor balance, and angles from the reduced network
    /// flow solve with theta_1 = 0.
    PlantState steady_state(const Eigen::VectorXd& u, const Disturbance& dist) const {
        check_input(u, dist);
        const int nn = n();
        const double omega_bar = net_imbalance(u, dist) / beta();
        const Eigen::VectorXd uf = expand_input(u);

        PlantState s;
        s.delta_omega = Eigen::VectorXd::Constant(nn, omega_bar);
        s.delta_pm = Eigen::VectorXd::Zero(nn);
        Eigen::VectorXd injection(nn);
        for (int i = 0; i < nn; ++i) {
            const auto& mp = machines_[static_cast<size_t>(i)];
            s.delta_pm(i) = uf(i) - omega_bar / mp.droop;
            injection(i) = -mp.damping * omega_bar + s.delta_pm(i) - dist.per_machine_load(i);
        }

        s.delta_theta = Eigen::VectorXd::Zero(nn);
        if (nn > 1) {
            Eigen::MatrixXd b_lap = Eigen::MatrixXd::Zero(nn, nn);
            for (int i = 0; i < nn; ++i) {
                for (int j = 0; j < nn; ++j) {
                    if (i == j) continue;
                    b_lap(i, j) = -susceptances_(i, j);
                    b_lap(i, i) += susceptances_(i, j);
                }
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(b_lap.bottomRightCorner(nn - 1, nn - 1));
            lu.setThreshold(linalg::kRankTol);
            if (!lu.isInvertible()) {
                throw SingularNetwork("reduced susceptance matrix is singular; network is disconnected");
            }
            s.delta_theta.tail(nn - 1) = lu.solve(injection.tail(nn - 1));
        }
        return s;
    }

    /// Frequency deviations at the controllable machines, controller order.
    Eigen::VectorXd output_frequencies(const PlantState& s) const {
        check_state(s);
        Eigen::VectorXd w(num_controllable());
        for (int k = 0; k < num_controllable(); ++k) w(k) = s.delta_omega(controllable_[static_cast<size_t>(k)]);
        return w;
    }

    /// Closed-form equilibrium input-to-frequency map (1/beta)(1'u - d) 1.
    Eigen::VectorXd equilibrium_frequency_map(const Eigen::VectorXd& u, const Disturbance& dist) const {
        check_input(u, dist);
        return Eigen::VectorXd::Constant(num_controllable(), net_imbalance(u, dist) / beta());
    }

    double net_imbalance(const Eigen::VectorXd& u, const Disturbance& dist) const {
        return u.sum() - dist.per_machine_load.sum();
    }

    Eigen::VectorXd expand_input(const Eigen::VectorXd& u) const {
        Eigen::VectorXd uf = Eigen::VectorXd::Zero(n());
        for (int k = 0; k < num_controllable(); ++k) uf(controllable_[static_cast<size_t>(k)]) = u(k);
        return uf;
    }

    /// Five identical machines on a ring (T_ij = 5 on ring edges, M = 10,
    /// D = 1, T_gov = 2, R_d = 0.05), all controllable.
    static LinearPlant default_desk_system() {
        std::vector<MachineParams> machines(5, MachineParams{10.0, 1.0, 2.0, 0.05, true});
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(5, 5);
        for (int i = 0; i < 5; ++i) {
            const int j = (i + 1) % 5;
            t(i, j) = 5.0;
            t(j, i) = 5.0;
        }
        return LinearPlant(std::move(machines), std::move(t));
    }

private:
    void check_state(const PlantState& s) const {
        if (s.delta_theta.size() != n() || s.delta_omega.size() != n() || s.delta_pm.size() != n()) {
            throw DimensionMismatch("plant state vectors must have length n");
        }
    }

    void check_input(const Eigen::VectorXd& u, const Disturbance& dist) const {
        if (u.size() != num_controllable()) {
            throw DimensionMismatch("control input must index the controllable machines");
        }
        if (dist.per_machine_load.size() != n()) {
            throw DimensionMismatch("disturbance must have one load per machine");
        }
    }

    std::vector<MachineParams> machines_;
    Eigen::MatrixXd susceptances_;
    std::vector<int> controllable_;
};

} // namespace dapi::plant

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
#include <utility>

#include "dapi/convex.hpp"
#include "dapi/errors.hpp"
#include "dapi/graph.hpp"

namespace dapi::controller {

/// Controller state eta such that the initial set-points equal u0.
inline Eigen::VectorXd eta_from_dispatch(const convex::ObjectiveBank& bank, const Eigen::VectorXd& u0) {
    return bank.grad(u0);
}

/// Distributed-averaging PI controller: each unit integrates its local
/// frequency deviation and a consensus correction on the marginal-cost
/// state eta,
///
///   tau deta/dt = -freq - L eta,   u = grad J*(eta).
struct DapiController {
    Eigen::VectorXd eta;             // marginal-cost states
    double tau;                      // integral gain, s
    graph::LaplacianMatrix laplacian;
    convex::ObjectiveBank bank;

    DapiController(Eigen::VectorXd eta0, double tau_gain, graph::LaplacianMatrix lap,
                   convex::ObjectiveBank objectives)
        : eta(std::move(eta0)), tau(tau_gain), laplacian(std::move(lap)), bank(std::move(objectives)) {
        if (!(tau > 0.0)) throw ValidationError("controller: tau must be > 0");
        if (eta.size() != laplacian.size() || bank.size() != laplacian.size()) {
            throw DimensionMismatch("controller: eta, Laplacian and objective bank sizes must agree");
        }
    }

    int size() const { return static_cast<int>(eta.size()); }

    /// deta/dt given measured frequency deviations.
    Eigen::VectorXd derivative(const Eigen::VectorXd& freq) const {
        if (freq.size() != eta.size()) throw DimensionMismatch("controller: frequency vector size mismatch");
        return (-freq - laplacian.entries() * eta) / tau;
    }

    /// Set-points u_i = grad J_i*(eta_i); always strictly inside the limits
    /// for barrier objectives.
    Eigen::VectorXd outputs() const { return bank.conj_grad(eta); }

    /// Slow-time vector field of the reduced dynamics (plant replaced by its
    /// steady-state frequency map; tau absorbed by the time rescaling).
    Eigen::VectorXd reduced_derivative(double beta, double d) const;
};

/// deta/dl = -(1/beta) 1 1' grad J*(eta) - L eta + (1/beta) 1 d.
inline Eigen::VectorXd reduced_vector_field(const convex::ObjectiveBank& bank, const Eigen::MatrixXd& L,
                                            double beta, double d, const Eigen::VectorXd& eta) {
    if (!(beta > 0.0)) throw ValidationError("reduced dynamics: beta must be > 0");
    if (L.rows() != eta.size() || L.cols() != eta.size() || bank.size() != eta.size()) {
        throw DimensionMismatch("reduced dynamics: dimension mismatch");
    }
    const Eigen::VectorXd u = bank.conj_grad(eta);
    const double common = (d - u.sum()) / beta;
    return Eigen::VectorXd::Constant(eta.size(), common) - L * eta;
}

inline Eigen::VectorXd DapiController::reduced_derivative(double beta, double d) const {
    return reduced_vector_field(bank, laplacian.entries(), beta, d, eta);
}

/// Cascade coordinates: z is the consensus average, delta the disagreement
/// expressed in the orthonormal complement basis.
struct CascadeState {
    double z;
    Eigen::VectorXd delta;
};

inline CascadeState to_cascade(const Eigen::VectorXd& eta, const graph::ComplementBasis& basis) {
    if (eta.size() != basis.ambient_dim()) throw DimensionMismatch("to_cascade: eta size mismatch");
    return CascadeState{eta.mean(), basis.columns().transpose() * eta};
}

inline Eigen::VectorXd from_cascade(const CascadeState& s, const graph::ComplementBasis& basis) {
    if (s.delta.size() != basis.ambient_dim() - 1) throw DimensionMismatch("from_cascade: delta size mismatch");
    return Eigen::VectorXd::Constant(basis.ambient_dim(), s.z) + basis.columns() * s.delta;
}

/// Pushforward of the reduced vector field under (z, delta) = (mean, V') eta:
///
///   dz/dl     = -(1/beta) 1' grad J*(1 z + V delta) - (1/m) 1' L V delta + d/beta
///   ddelta/dl = -V' L V delta.
inline CascadeState cascade_derivative(const CascadeState& s, const convex::ObjectiveBank& bank,
                                       const graph::LaplacianMatrix& L, const graph::ComplementBasis& basis,
                                       double beta, double d) {
    if (!(beta > 0.0)) throw ValidationError("cascade dynamics: beta must be > 0");
    const int m = basis.ambient_dim();
    if (L.size() != m || bank.size() != m || s.delta.size() != m - 1) {
        throw DimensionMismatch("cascade dynamics: dimension mismatch");
    }
    const Eigen::VectorXd eta = from_cascade(s, basis);
    const Eigen::VectorXd u = bank.conj_grad(eta);
    const Eigen::VectorXd lv_delta = L.entries() * (basis.columns() * s.delta);
    CascadeState out;
    out.z = (d - u.sum()) / beta - lv_delta.sum() / static_cast<double>(m);
    out.delta = -(basis.columns().transpose() * lv_delta);
    return out;
}

/// Consensus-direction drift phi(z) = -(1/beta) 1'[grad J*(1z) - grad J*(1 z_bar)].
inline double cascade_phi(double z, double z_bar, const convex::ObjectiveBank& bank, double beta) {
    double s = 0.0;
    for (int i = 0; i < bank.size(); ++i) s += bank[i].conj_grad(z) - bank[i].conj_grad(z_bar);
    return -s / beta;
}

/// Disagreement coupling psi(z, delta); vanishes at delta = 0 and satisfies
/// |psi| <= kappa ||delta||.
inline double cascade_psi(double z, const Eigen::VectorXd& delta, const convex::ObjectiveBank& bank,
                          const graph::LaplacianMatrix& L, const graph::ComplementBasis& basis, double beta) {
    const int m = basis.ambient_dim();
    if (delta.size() != m - 1 || bank.size() != m || L.size() != m) {
        throw DimensionMismatch("cascade_psi: dimension mismatch");
    }
    const Eigen::VectorXd eta = Eigen::VectorXd::Constant(m, z) + basis.columns() * delta;
    double diff = 0.0;
    for (int i = 0; i < m; ++i) diff += bank[i].conj_grad(eta(i)) - bank[i].conj_grad(z);
    const double mixing = (L.entries() * (basis.columns() * delta)).sum() / static_cast<double>(m);
    return -diff / beta - mixing;
}

} // namespace dapi::controller

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

#include "dapi/errors.hpp"

namespace dapi::linalg {

/// Relative pivot threshold below which a linear system counts as singular.
inline constexpr double kRankTol = 1e-9;

struct LyapunovSolve {
    Eigen::MatrixXd P;          // symmetrized solution, meaningful iff solvable
    bool solvable = false;      // Kronecker system nonsingular
    bool positive_definite = false;
    double residual = std::numeric_limits<double>::quiet_NaN(); // ||A'P + PA + I||_inf
};

/// Solves A'P + PA = -I through the vectorized (Kronecker) linear system
/// (I (x) A' + A' (x) I) vec(P) = vec(-I). Solvability plus a Cholesky of the
/// symmetrized P decides whether A is Hurwitz without an eigensolver.
inline LyapunovSolve lyapunov_identity_solve(const Eigen::MatrixXd& A) {
    if (A.rows() != A.cols()) throw DimensionMismatch("lyapunov_identity_solve: A must be square");
    const Eigen::Index k = A.rows();
    if (k == 0) throw DimensionMismatch("lyapunov_identity_solve: A is empty");
    if (k > 64) throw DimensionMismatch("lyapunov_identity_solve: dimension > 64 unsupported");

    const Eigen::MatrixXd At = A.transpose();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(k * k, k * k);
    // vec(A'P) = (I (x) A') vec(P), vec(PA) = (A' (x) I) vec(P), columns stacked
    for (Eigen::Index j = 0; j < k; ++j) {
        K.block(j * k, j * k, k, k) += At;
        for (Eigen::Index i = 0; i < k; ++i) {
            K.block(j * k, i * k, k, k).diagonal().array() += At(j, i);
        }
    }

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k * k);
    for (Eigen::Index i = 0; i < k; ++i) rhs(i * k + i) = -1.0;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    lu.setThreshold(kRankTol);

    LyapunovSolve out;
    out.solvable = lu.isInvertible();
    if (!out.solvable) return out;

    const Eigen::VectorXd p = lu.solve(rhs);
    Eigen::MatrixXd P = Eigen::Map<const Eigen::MatrixXd>(p.data(), k, k);
    P = 0.5 * (P + P.transpose()).eval();
    out.P = P;
    out.residual = (At * P + P * A + Eigen::MatrixXd::Identity(k, k))
                       .cwiseAbs()
                       .maxCoeff();

    Eigen::LLT<Eigen::MatrixXd> llt(P);
    out.positive_definite = (llt.info() == Eigen::Success);
    return out;
}

/// Largest singular value of M by power iteration on M'M.
inline double spectral_norm(const Eigen::MatrixXd& M, double rel_tol = 1e-10) {
    if (M.size() == 0) return 0.0;
    const Eigen::MatrixXd B = M.transpose() * M;
    const Eigen::Index k = B.rows();
    if (k == 1) return std::sqrt(std::max(0.0, B(0, 0)));

    Eigen::VectorXd v(k);
    for (Eigen::Index i = 0; i < k; ++i) v(i) = 1.0 + 1e-3 * static_cast<double>(i + 1);
    v.normalize();

    double lambda = 0.0;
    for (int it = 0; it < 100000; ++it) {
        Eigen::VectorXd w = B * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        w /= norm;
        const double next = w.dot(B * w);
        if (std::abs(next - lambda) <= rel_tol * std::max(std::abs(next), 1e-300)) {
            return std::sqrt(std::max(0.0, next));
        }
        lambda = next;
        v = w;
    }
    return std::sqrt(std::max(0.0, lambda));
}

} // namespace dapi::linalg

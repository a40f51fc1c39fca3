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
#include <vector>

#include <json.hpp>

#include "dapi/controller.hpp"
#include "dapi/convex.hpp"
#include "dapi/errors.hpp"
#include "dapi/graph.hpp"
#include "dapi/linalg.hpp"

namespace dapi::analysis {

/// Primal-dual solution of the dispatch problem
/// min sum_i J_i(u_i) s.t. 1'u = d.
struct KktSolution {
    Eigen::VectorXd u_bar;
    double lambda_bar;
};

/// Independent dispatch oracle: bisection on the marginal price lambda over
/// the monotone balance equation sum_i grad J_i*(lambda) = d. Never touches
/// controller or simulation code.
inline KktSolution kkt_solve(const convex::ObjectiveBank& bank, double d) {
    if (!(bank.sum_lower() < d && d < bank.sum_upper())) {
        throw Infeasible("dispatch infeasible: need sum(lower) < d < sum(upper), got d = " + std::to_string(d));
    }

    const auto balance = [&](double lambda) {
        double s = 0.0;
        for (const auto& f : bank) s += f.conj_grad(lambda);
        return s - d;
    };

    double scale = 1.0;
    for (const auto& f : bank) {
        const double mid = f.bounded() ? 0.5 * (f.lower() + f.upper()) : f.u_star();
        scale = std::max(scale, std::abs(f.grad(mid)));
    }
    double lo = -(1.0 + scale);
    double hi = 1.0 + scale;
    for (int it = 0; balance(lo) > 0.0; ++it) {
        if (it > 2000) throw ConvergenceFailure("kkt_solve: could not bracket lambda from below");
        lo *= 2.0;
    }
    for (int it = 0; balance(hi) < 0.0; ++it) {
        if (it > 2000) throw ConvergenceFailure("kkt_solve: could not bracket lambda from above");
        hi *= 2.0;
    }

    double lambda = 0.5 * (lo + hi);
    for (int it = 0; it < 500; ++it) {
        lambda = lo + 0.5 * (hi - lo);
        const double g = balance(lambda);
        if (std::abs(g) <= 1e-11) {
            return KktSolution{bank.conj_grad(Eigen::VectorXd::Constant(bank.size(), lambda)), lambda};
        }
        if (g < 0.0) {
            lo = lambda;
        } else {
            hi = lambda;
        }
        if (hi <= std::nextafter(lo, convex::kInf)) break;
    }
    const double g = balance(lambda);
    if (std::abs(g) <= 1e-11) {
        return KktSolution{bank.conj_grad(Eigen::VectorXd::Constant(bank.size(), lambda)), lambda};
    }
    throw ConvergenceFailure("kkt_solve: balance residual " + std::to_string(g) + " after bisection");
}

/// Equal-marginal-cost equilibrium: eta_bar = lambda_bar * 1.
inline Eigen::VectorXd equilibrium_eta(const convex::ObjectiveBank& bank, double d) {
    return Eigen::VectorXd::Constant(bank.size(), kkt_solve(bank, d).lambda_bar);
}

/// Checks the distributed optimality conditions
///   0 = K dbar_omega(u) + L eta,   u = grad J*(eta),   eta in span(1)
/// with K a nonnegative diagonal gain satisfying w'K1 > 0.
inline bool check_distributed_optimality(const convex::ObjectiveBank& bank, const Eigen::VectorXd& u,
                                         const Eigen::VectorXd& eta, const graph::LaplacianMatrix& L,
                                         const Eigen::VectorXd& k_diag, const Eigen::VectorXd& w,
                                         double beta, double d, double tol) {
    const int m = bank.size();
    if (u.size() != m || eta.size() != m || L.size() != m || k_diag.size() != m || w.size() != m) {
        throw DimensionMismatch("check_distributed_optimality: dimension mismatch");
    }
    if (k_diag.minCoeff() < 0.0) throw ValidationError("gain matrix K must be nonnegative");
    if (!(w.dot(k_diag) > 0.0)) {
        throw GainConditionViolated("w'K1 <= 0: averaging direction not observed by the gain");
    }

    const double omega_bar = (u.sum() - d) / beta;
    const Eigen::VectorXd residual = k_diag * omega_bar + L.entries() * eta;
    if (residual.cwiseAbs().maxCoeff() > tol) return false;

    const Eigen::VectorXd u_from_eta = bank.conj_grad(eta);
    if ((u - u_from_eta).cwiseAbs().maxCoeff() > tol) return false;

    const double mean = eta.mean();
    return (eta.array() - mean).abs().maxCoeff() <= tol;
}

/// Bregman-type Lyapunov function of the consensus coordinate:
/// V(z) = sum_i [J_i*(z) - J_i*(z_bar) - grad J_i*(z_bar)(z - z_bar)].
inline double lyapunov_V(const convex::ObjectiveBank& bank, double z, double z_bar) {
    double v = 0.0;
    for (const auto& f : bank) {
        v += f.conj_value(z) - f.conj_value(z_bar) - f.conj_grad(z_bar) * (z - z_bar);
    }
    return v;
}

/// dV/dz = 1'[grad J*(1z) - grad J*(1 z_bar)].
inline double lyapunov_V_gradient(const convex::ObjectiveBank& bank, double z, double z_bar) {
    double g = 0.0;
    for (const auto& f : bank) g += f.conj_grad(z) - f.conj_grad(z_bar);
    return g;
}

struct LyapunovCertificate {
    Eigen::MatrixXd P;
    double rho; // dissipation rate; 1 by the Q = I normalization
};

/// P > 0 with A'P + PA = -I for Hurwitz A; rho = 1.
inline LyapunovCertificate solve_lyapunov_P(const Eigen::MatrixXd& A) {
    const linalg::LyapunovSolve sol = linalg::lyapunov_identity_solve(A);
    if (!sol.solvable) throw NotHurwitz("Lyapunov equation is singular");
    if (!sol.positive_definite) throw NotHurwitz("Lyapunov solution is not positive definite");
    if (!(sol.residual <= 1e-10)) {
        throw ConvergenceFailure("Lyapunov residual " + std::to_string(sol.residual) + " exceeds 1e-10");
    }
    return LyapunovCertificate{sol.P, 1.0};
}

/// Interconnection constant kappa = (sqrt(m)/beta)(1/mu_min)||V||_2
///                                + (1/sqrt(m))||L V||_2, with ||V||_2 = 1.
inline double compute_kappa(const convex::ObjectiveBank& bank, const graph::LaplacianMatrix& L,
                            const graph::ComplementBasis& basis, double beta) {
    const int m = basis.ambient_dim();
    if (L.size() != m || bank.size() != m) throw DimensionMismatch("compute_kappa: dimension mismatch");
    if (!(beta > 0.0)) throw ValidationError("compute_kappa: beta must be > 0");
    const double mu_min = convex::strong_convexity_parameter(bank);
    const double sqrt_m = std::sqrt(static_cast<double>(m));
    const double lv_norm = linalg::spectral_norm(L.entries() * basis.columns());
    return sqrt_m / (beta * mu_min) + lv_norm / sqrt_m;
}

/// Composite-gain threshold beta kappa^2 / (4 rho); any alpha above it makes
/// the composite Lyapunov function decrease.
inline double alpha_star(double beta, double kappa, double rho) {
    if (!(rho > 0.0)) throw ValidationError("alpha_star: rho must be > 0");
    return beta * kappa * kappa / (4.0 * rho);
}

/// Composite function V(z) + alpha delta' P delta.
inline double composite_lyapunov(const convex::ObjectiveBank& bank, double z, double z_bar,
                                 const Eigen::VectorXd& delta, const Eigen::MatrixXd& P, double alpha) {
    if (!(alpha > 0.0)) throw ValidationError("composite_lyapunov: alpha must be > 0");
    if (P.rows() != delta.size() || P.cols() != delta.size()) {
        throw DimensionMismatch("composite_lyapunov: P and delta sizes disagree");
    }
    return lyapunov_V(bank, z, z_bar) + alpha * delta.dot(P * delta);
}

/// Analytic rate of the composite function along the cascade vector field
/// (chain rule; no trajectory differencing).
inline double composite_lyapunov_rate(const convex::ObjectiveBank& bank, const graph::LaplacianMatrix& L,
                                      const graph::ComplementBasis& basis, double beta, double d,
                                      double z_bar, const controller::CascadeState& s,
                                      const Eigen::MatrixXd& P, double alpha) {
    const controller::CascadeState rate = controller::cascade_derivative(s, bank, L, basis, beta, d);
    const double dv = lyapunov_V_gradient(bank, s.z, z_bar) * rate.z;
    const double dw = 2.0 * s.delta.dot(P * rate.delta);
    return dv + alpha * dw;
}

/// Everything the stability certificate needs in one record. The verdict is
/// STABLE_CERTIFIED exactly when the graph has a globally reachable node.
struct CertificateReport {
    std::vector<int> reachable_nodes;
    bool zero_eig_simple = false;
    bool hurwitz = false;
    bool left_null_ok = false;
    bool lyapunov_ok = false;
    Eigen::VectorXd w; // empty when the nullspace is not one-dimensional
    Eigen::MatrixXd P; // empty when the Lyapunov solve fails
    double kappa = std::numeric_limits<double>::quiet_NaN();
    double rho = std::numeric_limits<double>::quiet_NaN();
    double alpha_star = std::numeric_limits<double>::quiet_NaN();
    double mu_min = std::numeric_limits<double>::quiet_NaN();
    double beta = std::numeric_limits<double>::quiet_NaN();

    bool certified() const { return zero_eig_simple; }
    const char* verdict() const { return certified() ? "STABLE_CERTIFIED" : "NOT_CERTIFIED"; }
};

/// Runs every spectral and Lyapunov check for a (graph, bank, beta) triple,
/// recording per-check failures instead of aborting.
inline CertificateReport certify(const graph::WeightedDigraph& g, const convex::ObjectiveBank& bank,
                                 double beta) {
    const int m = g.node_count();
    if (bank.size() != m) throw DimensionMismatch("certify: objective bank size must match graph size");
    if (!(beta > 0.0)) throw ValidationError("certify: beta must be > 0");

    CertificateReport rep;
    rep.beta = beta;
    rep.mu_min = convex::strong_convexity_parameter(bank);
    rep.reachable_nodes = graph::find_globally_reachable(g);
    rep.zero_eig_simple = !rep.reachable_nodes.empty();

    const graph::LaplacianMatrix L = graph::build_laplacian(g);
    try {
        rep.w = graph::left_null_vector(L);
        rep.left_null_ok = true;
    } catch (const NullspaceNotOneDimensional&) {
        rep.left_null_ok = false;
    }

    if (m >= 2) {
        const graph::ComplementBasis basis = graph::build_complement_basis(m);
        const Eigen::MatrixXd driving = -graph::projected_laplacian(L, basis);
        rep.hurwitz = graph::is_hurwitz(driving);
        rep.kappa = compute_kappa(bank, L, basis, beta);
        try {
            const LyapunovCertificate cert = solve_lyapunov_P(driving);
            rep.P = cert.P;
            rep.rho = cert.rho;
            rep.alpha_star = alpha_star(beta, rep.kappa, cert.rho);
            rep.lyapunov_ok = true;
        } catch (const NotHurwitz&) {
            rep.lyapunov_ok = false;
        }
    } else {
        // single agent: no disagreement dynamics to certify
        rep.hurwitz = true;
        rep.lyapunov_ok = true;
        rep.rho = 1.0;
    }
    return rep;
}

inline nlohmann::json report_to_json(const CertificateReport& rep, const std::vector<std::string>& node_names) {
    nlohmann::json j;
    j["verdict"] = rep.verdict();
    nlohmann::json reachable = nlohmann::json::array();
    for (int idx : rep.reachable_nodes) {
        if (idx < static_cast<int>(node_names.size())) {
            reachable.push_back(node_names[static_cast<size_t>(idx)]);
        } else {
            reachable.push_back(idx + 1);
        }
    }
    j["reachable_nodes"] = reachable;
    j["zero_eig_simple"] = rep.zero_eig_simple;
    j["hurwitz"] = rep.hurwitz;
    j["kappa"] = rep.kappa;
    j["rho"] = rep.rho;
    j["alpha_star"] = rep.alpha_star;
    j["mu_min"] = rep.mu_min;
    j["beta"] = rep.beta;
    if (rep.w.size() > 0) {
        j["w"] = std::vector<double>(rep.w.data(), rep.w.data() + rep.w.size());
    } else {
        j["w"] = nullptr;
    }
    if (rep.P.size() > 0) {
        nlohmann::json pj = nlohmann::json::array();
        for (Eigen::Index r = 0; r < rep.P.rows(); ++r) {
            pj.push_back(std::vector<double>(rep.P.row(r).begin(), rep.P.row(r).end()));
        }
        j["P"] = pj;
    } else {
        j["P"] = nullptr;
    }
    j["checks"] = {{"globally_reachable_node", rep.zero_eig_simple},
                   {"left_null_vector", rep.left_null_ok},
                   {"projected_hurwitz", rep.hurwitz},
                   {"lyapunov_dissipation", rep.lyapunov_ok}};
    return j;
}

} // namespace dapi::analysis

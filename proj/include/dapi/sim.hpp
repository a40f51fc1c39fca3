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
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dapi/analysis.hpp"
#include "dapi/config.hpp"
#include "dapi/controller.hpp"
#include "dapi/errors.hpp"
#include "dapi/log.hpp"

namespace dapi::sim {

/// One classical Runge-Kutta step on a flat state vector. Stage states are
/// checked as well so that a divergence surfaces as NonFiniteState rather
/// than as a domain error from inside the vector field.
template <typename Field>
Eigen::VectorXd rk4_step(Field&& f, const Eigen::VectorXd& y, double h) {
    if (!(h > 0.0)) throw ValidationError("rk4_step: h must be > 0");
    const auto stage = [](Eigen::VectorXd v) {
        if (!v.allFinite()) throw NonFiniteState("integration produced a non-finite state component");
        return v;
    };
    const Eigen::VectorXd k1 = f(stage(y));
    const Eigen::VectorXd k2 = f(stage(y + (0.5 * h) * k1));
    const Eigen::VectorXd k3 = f(stage(y + (0.5 * h) * k2));
    const Eigen::VectorXd k4 = f(stage(y + h * k3));
    Eigen::VectorXd next = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) throw NonFiniteState("integration produced a non-finite state component");
    return next;
}

/// Sampled closed-loop run: frequencies, marginal costs and set-points of the
/// controllable units, plus the cascade/Lyapunov diagnostics per sample.
struct Trajectory {
    std::vector<double> times;
    Eigen::MatrixXd omega;      // samples x m
    Eigen::MatrixXd eta;        // samples x m
    Eigen::MatrixXd u;          // samples x m
    Eigen::VectorXd z;          // consensus average of eta
    Eigen::VectorXd delta_norm; // ||V' eta||_2
    Eigen::VectorXd V;          // Bregman Lyapunov value
    Eigen::VectorXd W;          // delta' P delta (NaN without a certificate)
    Eigen::VectorXd composite;  // V + alpha W

    int samples() const { return static_cast<int>(times.size()); }
    int width() const { return static_cast<int>(omega.cols()); }
};

struct Metrics {
    double final_freq_dev_inf = 0.0;
    double consensus_spread = 0.0;
    double optimality_gap_inf = 0.0; // vs the dispatch oracle at the final load
    long limit_violations = 0;
    bool settled = false;
};

inline nlohmann::json metrics_to_json(const Metrics& m) {
    return nlohmann::json{{"final_freq_dev_inf", m.final_freq_dev_inf},
                          {"consensus_spread", m.consensus_spread},
                          {"optimality_gap_inf", m.optimality_gap_inf},
                          {"limit_violations", m.limit_violations},
                          {"settled", m.settled}};
}

struct RunResult {
    Trajectory trajectory;
    Metrics metrics;
};

namespace detail {

struct SnappedEvent {
    long index;
    Eigen::VectorXd delta;
};

inline long grid_steps(const ScenarioConfig& cfg) {
    const long n = std::llround(cfg.t_end / cfg.step);
    if (n < 1) throw ValidationError("scenario: t_end/step must give at least one step");
    if (std::abs(static_cast<double>(n) * cfg.step - cfg.t_end) > 1e-9 * std::max(1.0, cfg.t_end)) {
        log::info("t_end " + std::to_string(cfg.t_end) + " snapped to " +
                  std::to_string(static_cast<double>(n) * cfg.step));
    }
    if (n % cfg.record_every != 0) {
        throw ValidationError("scenario: record_every must divide the number of steps");
    }
    return n;
}

inline std::vector<SnappedEvent> snap_events(const ScenarioConfig& cfg, long n_steps) {
    std::vector<SnappedEvent> out;
    for (const Event& ev : cfg.events) {
        long idx = std::llround(ev.time / cfg.step);
        if (idx > n_steps) idx = n_steps;
        if (std::abs(static_cast<double>(idx) * cfg.step - ev.time) > 1e-9 * std::max(1.0, std::abs(ev.time))) {
            log::info("event at t = " + std::to_string(ev.time) + " snapped to grid time " +
                      std::to_string(static_cast<double>(idx) * cfg.step));
        }
        out.push_back(SnappedEvent{idx, ev.delta});
    }
    return out;
}

/// Cascade/Lyapunov evaluation context; the pieces that exist depend on the
/// graph (m = 1 has no disagreement space, an uncertified graph has no P).
struct DiagnosticContext {
    const convex::ObjectiveBank* bank;
    std::optional<graph::ComplementBasis> basis;
    Eigen::MatrixXd P;   // empty when unavailable
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double z_bar = std::numeric_limits<double>::quiet_NaN();

    void fill(const Eigen::VectorXd& eta_now, double& z_out, double& dn_out, double& v_out,
              double& w_out, double& comp_out) const {
        constexpr double nan = std::numeric_limits<double>::quiet_NaN();
        if (basis.has_value()) {
            const controller::CascadeState cs = controller::to_cascade(eta_now, *basis);
            z_out = cs.z;
            dn_out = cs.delta.norm();
            v_out = analysis::lyapunov_V(*bank, cs.z, z_bar);
            if (P.size() > 0) {
                w_out = cs.delta.dot(P * cs.delta);
                comp_out = v_out + alpha * w_out;
            } else {
                w_out = nan;
                comp_out = nan;
            }
        } else {
            z_out = eta_now(0);
            dn_out = 0.0;
            v_out = analysis::lyapunov_V(*bank, z_out, z_bar);
            w_out = 0.0;
            comp_out = v_out;
        }
    }
};

inline DiagnosticContext make_diagnostics(const ScenarioConfig& cfg, const graph::LaplacianMatrix& L) {
    DiagnosticContext ctx;
    ctx.bank = &cfg.bank;
    const int m = cfg.graph.node_count();
    if (m >= 2) {
        ctx.basis.emplace(graph::build_complement_basis(m));
        const Eigen::MatrixXd driving = -graph::projected_laplacian(L, *ctx.basis);
        try {
            const analysis::LyapunovCertificate cert = analysis::solve_lyapunov_P(driving);
            const double kappa = analysis::compute_kappa(cfg.bank, L, *ctx.basis, cfg.plant.beta());
            ctx.P = cert.P;
            ctx.alpha = 2.0 * analysis::alpha_star(cfg.plant.beta(), kappa, cert.rho);
        } catch (const NotHurwitz&) {
            // marginal consensus mode: W and the composite column stay NaN
        }
    }
    return ctx;
}

inline long count_violations(const convex::ObjectiveBank& bank, const Eigen::VectorXd& u_now) {
    long violations = 0;
    for (int i = 0; i < bank.size(); ++i) {
        if (!bank[i].contains(u_now(i))) ++violations;
    }
    return violations;
}

} // namespace detail

/// Load vector in force on the grid interval starting at step_index.
inline Eigen::VectorXd load_at(const ScenarioConfig& cfg, long step_index) {
    const long n_steps = detail::grid_steps(cfg);
    Eigen::VectorXd load = cfg.base_loads;
    for (const auto& ev : detail::snap_events(cfg, n_steps)) {
        if (ev.index <= step_index) load += ev.delta;
    }
    return load;
}

/// Integrates the joint plant/controller dynamics over the scenario grid.
/// The run starts at the plant equilibrium for the initial set-points, applies
/// load deltas exactly at the snapped event times, and scores the endpoint
/// against the independent dispatch oracle at the final net load.
inline RunResult run_scenario(const ScenarioConfig& cfg) {
    const int n = cfg.plant.n();
    const int m = cfg.graph.node_count();
    if (cfg.plant.num_controllable() != m || cfg.bank.size() != m) {
        throw ValidationError("run_scenario: plant, graph and objective bank sizes disagree");
    }

    const graph::LaplacianMatrix L = graph::build_laplacian(cfg.graph);
    const Eigen::VectorXd eta0 =
        cfg.controller.eta0 ? *cfg.controller.eta0
                            : controller::eta_from_dispatch(cfg.bank, cfg.bank.base_dispatch());
    if (eta0.size() != m) throw ValidationError("run_scenario: eta0 size must match the graph");
    const double tau = cfg.controller.tau;

    const long n_steps = detail::grid_steps(cfg);
    const std::vector<detail::SnappedEvent> events = detail::snap_events(cfg, n_steps);
    detail::DiagnosticContext diag = detail::make_diagnostics(cfg, L);

    Eigen::VectorXd load = cfg.base_loads;
    double lambda_bar = analysis::kkt_solve(cfg.bank, load.sum()).lambda_bar;
    diag.z_bar = lambda_bar;

    // joint state: [theta(n), omega(n), pm(n), eta(m)]
    const auto unpack_plant = [n](const Eigen::VectorXd& y) {
        return plant::PlantState{y.segment(0, n), y.segment(n, n), y.segment(2 * n, n)};
    };
    const auto field = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
        const plant::PlantState ps = unpack_plant(y);
        const Eigen::VectorXd eta_now = y.segment(3 * n, m);
        const Eigen::VectorXd u_now = cfg.bank.conj_grad(eta_now);
        const plant::PlantState ds = cfg.plant.derivative(ps, u_now, plant::Disturbance{load});
        const Eigen::VectorXd freq = cfg.plant.output_frequencies(ps);
        Eigen::VectorXd dy(3 * n + m);
        dy << ds.delta_theta, ds.delta_omega, ds.delta_pm, (-freq - L.entries() * eta_now) / tau;
        return dy;
    };

    Eigen::VectorXd y(3 * n + m);
    {
        const Eigen::VectorXd u_init = cfg.bank.conj_grad(eta0);
        const plant::PlantState s0 = cfg.plant.steady_state(u_init, plant::Disturbance{load});
        y << s0.delta_theta, s0.delta_omega, s0.delta_pm, eta0;
    }

    const long records = n_steps / cfg.record_every + 1;
    Trajectory traj;
    traj.times.reserve(static_cast<size_t>(records));
    traj.omega.resize(records, m);
    traj.eta.resize(records, m);
    traj.u.resize(records, m);
    traj.z.resize(records);
    traj.delta_norm.resize(records);
    traj.V.resize(records);
    traj.W.resize(records);
    traj.composite.resize(records);

    Metrics metrics;
    size_t next_event = 0;
    long row = 0;
    for (long k = 0; k <= n_steps; ++k) {
        bool load_changed = false;
        while (next_event < events.size() && events[next_event].index == k) {
            load += events[next_event].delta;
            ++next_event;
            load_changed = true;
        }
        if (load_changed) {
            lambda_bar = analysis::kkt_solve(cfg.bank, load.sum()).lambda_bar;
            diag.z_bar = lambda_bar;
        }

        const Eigen::VectorXd eta_now = y.segment(3 * n, m);
        const Eigen::VectorXd u_now = cfg.bank.conj_grad(eta_now);
        metrics.limit_violations += detail::count_violations(cfg.bank, u_now);

        if (k % cfg.record_every == 0) {
            const plant::PlantState ps = unpack_plant(y);
            traj.times.push_back(static_cast<double>(k) * cfg.step);
            traj.omega.row(row) = cfg.plant.output_frequencies(ps).transpose();
            traj.eta.row(row) = eta_now.transpose();
            traj.u.row(row) = u_now.transpose();
            diag.fill(eta_now, traj.z(row), traj.delta_norm(row), traj.V(row), traj.W(row),
                      traj.composite(row));
            ++row;
        }
        if (k < n_steps) y = rk4_step(field, y, cfg.step);
    }

    const plant::PlantState final_state = unpack_plant(y);
    const Eigen::VectorXd eta_final = y.segment(3 * n, m);
    const Eigen::VectorXd u_final = cfg.bank.conj_grad(eta_final);
    const analysis::KktSolution kkt = analysis::kkt_solve(cfg.bank, load.sum());

    metrics.final_freq_dev_inf = final_state.delta_omega.cwiseAbs().maxCoeff();
    metrics.consensus_spread = eta_final.maxCoeff() - eta_final.minCoeff();
    metrics.optimality_gap_inf = (u_final - kkt.u_bar).cwiseAbs().maxCoeff();

    const long tail = std::max<long>(1, traj.samples() / 10);
    bool settled = true;
    for (long r = traj.samples() - tail; r < traj.samples(); ++r) {
        const double freq_inf = traj.omega.row(r).cwiseAbs().maxCoeff();
        const double spread = traj.eta.row(r).maxCoeff() - traj.eta.row(r).minCoeff();
        if (freq_inf > 1e-4 || spread > 1e-6) {
            settled = false;
            break;
        }
    }
    metrics.settled = settled;

    return RunResult{std::move(traj), metrics};
}

/// Integrates only the reduced marginal-cost dynamics in slow time; t_end and
/// step are read in slow-time units. The omega columns carry the quasi-steady
/// frequency map value.
inline Trajectory run_reduced(const ScenarioConfig& cfg) {
    const int m = cfg.graph.node_count();
    if (cfg.plant.num_controllable() != m || cfg.bank.size() != m) {
        throw ValidationError("run_reduced: plant, graph and objective bank sizes disagree");
    }
    const graph::LaplacianMatrix L = graph::build_laplacian(cfg.graph);
    const double beta = cfg.plant.beta();
    Eigen::VectorXd eta = cfg.controller.eta0
                              ? *cfg.controller.eta0
                              : controller::eta_from_dispatch(cfg.bank, cfg.bank.base_dispatch());
    if (eta.size() != m) throw ValidationError("run_reduced: eta0 size must match the graph");

    const long n_steps = detail::grid_steps(cfg);
    const std::vector<detail::SnappedEvent> events = detail::snap_events(cfg, n_steps);
    detail::DiagnosticContext diag = detail::make_diagnostics(cfg, L);

    Eigen::VectorXd load = cfg.base_loads;
    double d_net = load.sum();
    diag.z_bar = analysis::kkt_solve(cfg.bank, d_net).lambda_bar;

    const auto field = [&](const Eigen::VectorXd& e) {
        return controller::reduced_vector_field(cfg.bank, L.entries(), beta, d_net, e);
    };

    const long records = n_steps / cfg.record_every + 1;
    Trajectory traj;
    traj.times.reserve(static_cast<size_t>(records));
    traj.omega.resize(records, m);
    traj.eta.resize(records, m);
    traj.u.resize(records, m);
    traj.z.resize(records);
    traj.delta_norm.resize(records);
    traj.V.resize(records);
    traj.W.resize(records);
    traj.composite.resize(records);

    size_t next_event = 0;
    long row = 0;
    for (long k = 0; k <= n_steps; ++k) {
        bool load_changed = false;
        while (next_event < events.size() && events[next_event].index == k) {
            load += events[next_event].delta;
            ++next_event;
            load_changed = true;
        }
        if (load_changed) {
            d_net = load.sum();
            diag.z_bar = analysis::kkt_solve(cfg.bank, d_net).lambda_bar;
        }
        if (k % cfg.record_every == 0) {
            const Eigen::VectorXd u_now = cfg.bank.conj_grad(eta);
            traj.times.push_back(static_cast<double>(k) * cfg.step);
            traj.omega.row(row).setConstant((u_now.sum() - d_net) / beta);
            traj.eta.row(row) = eta.transpose();
            traj.u.row(row) = u_now.transpose();
            diag.fill(eta, traj.z(row), traj.delta_norm(row), traj.V(row), traj.W(row),
                      traj.composite(row));
            ++row;
        }
        if (k < n_steps) eta = rk4_step(field, eta, cfg.step);
    }
    return traj;
}

/// One row per sample, 15 significant digits, columns
/// t, omega_1..m, eta_1..m, u_1..m, z, delta_norm, V, W, composite.
inline void write_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");

    const int m = traj.width();
    out << "t";
    for (int i = 1; i <= m; ++i) out << ",omega_" << i;
    for (int i = 1; i <= m; ++i) out << ",eta_" << i;
    for (int i = 1; i <= m; ++i) out << ",u_" << i;
    out << ",z,delta_norm,V,W,composite\n";

    char buf[64];
    const auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.15g", x);
        out << ',' << buf;
    };
    for (int r = 0; r < traj.samples(); ++r) {
        std::snprintf(buf, sizeof buf, "%.15g", traj.times[static_cast<size_t>(r)]);
        out << buf;
        for (int i = 0; i < m; ++i) put(traj.omega(r, i));
        for (int i = 0; i < m; ++i) put(traj.eta(r, i));
        for (int i = 0; i < m; ++i) put(traj.u(r, i));
        put(traj.z(r));
        put(traj.delta_norm(r));
        put(traj.V(r));
        put(traj.W(r));
        put(traj.composite(r));
        out << '\n';
    }
    if (!out) throw Error("write failed for '" + path + "'");
}

} // namespace dapi::sim

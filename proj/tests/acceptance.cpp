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
#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>

#include "dapi/analysis.hpp"
#include "dapi/sim.hpp"
#include "test_support.hpp"

// End-to-end acceptance harness. Each criterion prints one PASS/FAIL line on
// top of the usual assertions so a run reads as a checklist.

using namespace dapi;

namespace {

bool criterion(int num, const char* name, bool ok) {
    std::printf("criterion %02d %-34s %s\n", num, name, ok ? "PASS" : "FAIL");
    std::fflush(stdout);
    return ok;
}

struct AnalogRun {
    sim::ScenarioConfig cfg;
    sim::RunResult run;
    double seconds;
};

const AnalogRun& analog_run() {
    static const AnalogRun ar = [] {
        sim::ScenarioConfig cfg = sim::parse_config(DAPI_CONFIG_DIR "/line5.json");
        const auto start = std::chrono::steady_clock::now();
        sim::RunResult run = sim::run_scenario(cfg);
        const auto stop = std::chrono::steady_clock::now();
        const double seconds = std::chrono::duration<double>(stop - start).count();
        return AnalogRun{std::move(cfg), std::move(run), seconds};
    }();
    return ar;
}

const sim::RunResult& cut_run() {
    static const sim::RunResult rr =
        sim::run_scenario(sim::parse_config(DAPI_CONFIG_DIR "/line5_cut.json"));
    return rr;
}

sim::ScenarioConfig reduced_cfg() {
    std::ifstream in(DAPI_CONFIG_DIR "/line5.json");
    nlohmann::json j;
    in >> j;
    j["scenario"]["events"] = nlohmann::json::array();
    j["plant"]["loads"]["G401"] = 0.987; // +0.2 p.u. net imbalance from the start
    j["scenario"]["t_end"] = 400.0;
    j["scenario"]["step"] = 0.05;
    j["scenario"]["record_every"] = 1;
    j["controller"]["eta0"] = {0.15, -0.2, 0.05, 0.3, -0.1};
    return sim::parse_config_json(j, "reduced");
}

long violations_in(const sim::Trajectory& traj, const convex::ObjectiveBank& bank) {
    long count = 0;
    for (int r = 0; r < traj.samples(); ++r) {
        for (int i = 0; i < bank.size(); ++i) {
            if (!bank[i].contains(traj.u(r, i))) ++count;
        }
    }
    return count;
}

} // namespace

TEST_CASE("criterion 1: regulation") {
    const AnalogRun& ar = analog_run();
    const bool freq_ok = ar.run.metrics.final_freq_dev_inf <= 1e-4;
    const bool time_ok = ar.seconds <= 10.0;
    criterion(1, "regulation (freq + runtime)", freq_ok && time_ok);
    INFO("final_freq_dev_inf = " << ar.run.metrics.final_freq_dev_inf
                                 << ", runtime = " << ar.seconds << " s");
    REQUIRE(freq_ok);
    REQUIRE(time_ok);
}

TEST_CASE("criterion 2: optimality") {
    const AnalogRun& ar = analog_run();
    const bool ok = ar.run.metrics.optimality_gap_inf <= 1e-4;
    criterion(2, "optimality vs dispatch oracle", ok);
    INFO("optimality_gap_inf = " << ar.run.metrics.optimality_gap_inf);
    REQUIRE(ok);
}

TEST_CASE("criterion 3: consensus") {
    const AnalogRun& ar = analog_run();
    const bool ok = ar.run.metrics.consensus_spread <= 1e-6;
    criterion(3, "marginal cost consensus", ok);
    INFO("consensus_spread = " << ar.run.metrics.consensus_spread);
    REQUIRE(ok);
}

TEST_CASE("criterion 4: limit satisfaction") {
    const AnalogRun& ar = analog_run();
    const long direct = ar.run.metrics.limit_violations;
    const long recorded = violations_in(ar.run.trajectory, ar.cfg.bank);
    const long cut = cut_run().metrics.limit_violations;
    const sim::ScenarioConfig rcfg = reduced_cfg();
    const long reduced = violations_in(sim::run_reduced(rcfg), rcfg.bank);

    const bool ok = direct == 0 && recorded == 0 && cut == 0 && reduced == 0;
    criterion(4, "limits hold at every sample", ok);
    REQUIRE(direct == 0);
    REQUIRE(recorded == 0);
    REQUIRE(cut == 0);
    REQUIRE(reduced == 0);
}

TEST_CASE("criterion 5: cheap unit preference") {
    const AnalogRun& ar = analog_run();
    const double d_final = ar.cfg.base_loads.sum() + ar.cfg.events[0].delta.sum();
    const analysis::KktSolution sol = analysis::kkt_solve(ar.cfg.bank, d_final);

    const Eigen::VectorXd planned = sol.u_bar - ar.cfg.bank.base_dispatch();
    int argmax_planned = 0;
    planned.maxCoeff(&argmax_planned);

    const int last = ar.run.trajectory.samples() - 1;
    const Eigen::VectorXd realized =
        ar.run.trajectory.u.row(last).transpose() - ar.cfg.bank.base_dispatch();
    int argmax_realized = 0;
    realized.maxCoeff(&argmax_realized);

    const bool ok = argmax_planned == 4 && argmax_realized == 4;
    criterion(5, "largest increment on the cheap unit", ok);
    REQUIRE(argmax_planned == 4);
    REQUIRE(argmax_realized == 4);
}

TEST_CASE("criterion 6: conjugate duality suite") {
    support::Rng rng(606);
    std::uniform_real_distribution<double> quantile(1e-6, 1.0 - 1e-6);
    std::uniform_real_distribution<double> eta_range(-1e3, 1e3);
    bool ok = true;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto f = support::random_barrier_objective(rng);
        const double u = f.lower() + quantile(rng) * (f.upper() - f.lower());
        if (std::abs(f.conj_grad(f.grad(u)) - u) > 1e-9) ok = false;

        const double a = eta_range(rng);
        const double b = eta_range(rng);
        if (std::abs(f.conj_grad(a) - f.conj_grad(b)) > (1.0 + 1e-9) / f.mu() * std::abs(a - b)) {
            ok = false;
        }
    }
    criterion(6, "inverse pair + strong smoothness", ok);
    REQUIRE(ok);
}

TEST_CASE("criterion 7: distributed optimality equivalence") {
    support::Rng rng(707);
    std::uniform_real_distribution<double> shift(-0.2, 0.2);
    std::uniform_real_distribution<double> price(-0.3, 0.3);
    bool ok = true;
    int accepted = 0;
    while (accepted < 100) {
        const int m = 2 + accepted % 6;
        const auto g = support::random_digraph(rng, m, 0.5);
        if (support::brute_force_reachable(g).empty()) continue;
        ++accepted;
        const auto bank = support::random_bank(rng, m);
        const auto L = graph::build_laplacian(g);
        const Eigen::VectorXd w = graph::left_null_vector(L);
        const Eigen::VectorXd k_identity = Eigen::VectorXd::Ones(m);
        const double beta = 25.0;

        const double d = bank.base_dispatch().sum() + shift(rng);
        const analysis::KktSolution sol = analysis::kkt_solve(bank, d);
        const Eigen::VectorXd eta_bar = Eigen::VectorXd::Constant(m, sol.lambda_bar);
        if (!analysis::check_distributed_optimality(bank, sol.u_bar, eta_bar, L, k_identity, w, beta, d,
                                                    1e-8)) {
            ok = false;
        }

        const double lambda = price(rng);
        const Eigen::VectorXd eta = Eigen::VectorXd::Constant(m, lambda);
        const Eigen::VectorXd u = bank.conj_grad(eta);
        if (!analysis::check_distributed_optimality(bank, u, eta, L, k_identity, w, beta, u.sum(),
                                                    1e-8)) {
            ok = false;
        }
        const analysis::KktSolution back = analysis::kkt_solve(bank, u.sum());
        if (std::abs(back.lambda_bar - lambda) > 1e-8) ok = false;
        if ((back.u_bar - u).cwiseAbs().maxCoeff() > 1e-8) ok = false;
    }
    criterion(7, "KKT <-> consensus fixed point", ok);
    REQUIRE(ok);
}

TEST_CASE("criterion 8: cascade coordinate identity") {
    const auto bank = support::table1_bank();
    const auto L = graph::build_laplacian(support::line5_graph());
    const auto basis = graph::build_complement_basis(5);
    const double beta = 105.0;
    const double d = 4.2279;

    support::Rng rng(808);
    std::normal_distribution<double> dist(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        Eigen::VectorXd eta(5);
        for (int i = 0; i < 5; ++i) eta(i) = dist(rng);
        const controller::CascadeState pushed =
            controller::to_cascade(controller::reduced_vector_field(bank, L.entries(), beta, d, eta),
                                   basis);
        const controller::CascadeState direct = controller::cascade_derivative(
            controller::to_cascade(eta, basis), bank, L, basis, beta, d);
        worst = std::max(worst, std::abs(pushed.z - direct.z));
        worst = std::max(worst, (pushed.delta - direct.delta).cwiseAbs().maxCoeff());
    }
    const bool ok = worst <= 1e-12;
    criterion(8, "reduced field pushforward", ok);
    INFO("worst mismatch = " << worst);
    REQUIRE(ok);
}

TEST_CASE("criterion 9: Lyapunov decrease") {
    const auto bank = support::table1_bank();
    const auto L = graph::build_laplacian(support::line5_graph());
    const auto basis = graph::build_complement_basis(5);
    const double beta = 105.0;
    const double d = 4.2279;
    const double z_bar = analysis::kkt_solve(bank, d).lambda_bar;
    const analysis::LyapunovCertificate cert =
        analysis::solve_lyapunov_P(-graph::projected_laplacian(L, basis));
    const double kappa = analysis::compute_kappa(bank, L, basis, beta);
    const double alpha = 2.0 * analysis::alpha_star(beta, kappa, cert.rho);

    support::Rng rng(909);
    std::uniform_real_distribution<double> zd(-2.0, 2.0);
    std::uniform_real_distribution<double> dd(-1.0, 1.0);
    bool pointwise_ok = true;
    for (int trial = 0; trial < 10000; ++trial) {
        controller::CascadeState s{z_bar + zd(rng), Eigen::VectorXd(4)};
        for (int i = 0; i < 4; ++i) s.delta(i) = dd(rng);
        const double rate =
            analysis::composite_lyapunov_rate(bank, L, basis, beta, d, z_bar, s, cert.P, alpha);
        const double distance = std::max(std::abs(s.z - z_bar), s.delta.cwiseAbs().maxCoeff());
        if (rate > 0.0) pointwise_ok = false;
        if (rate == 0.0 && distance > 1e-10) pointwise_ok = false;
    }
    const controller::CascadeState eq{z_bar, Eigen::VectorXd::Zero(4)};
    const double eq_rate =
        analysis::composite_lyapunov_rate(bank, L, basis, beta, d, z_bar, eq, cert.P, alpha);
    if (std::abs(eq_rate) > 1e-12) pointwise_ok = false;

    const sim::Trajectory traj = sim::run_reduced(reduced_cfg());
    bool monotone_ok = true;
    for (int r = 1; r < traj.samples(); ++r) {
        if (traj.composite(r) > traj.composite(r - 1) + 1e-12) monotone_ok = false;
    }

    criterion(9, "composite function decreases", pointwise_ok && monotone_ok);
    REQUIRE(pointwise_ok);
    REQUIRE(monotone_ok);
}

TEST_CASE("criterion 10: dissipation certificates") {
    bool ok = true;
    const auto check = [&](const graph::WeightedDigraph& g) {
        const auto L = graph::build_laplacian(g);
        const auto basis = graph::build_complement_basis(g.node_count());
        const Eigen::MatrixXd a = -graph::projected_laplacian(L, basis);
        const analysis::LyapunovCertificate cert = analysis::solve_lyapunov_P(a);
        const Eigen::Index k = a.rows();
        const double residual = (a.transpose() * cert.P + cert.P * a +
                                 Eigen::MatrixXd::Identity(k, k))
                                    .cwiseAbs()
                                    .maxCoeff();
        if (residual > 1e-10) ok = false;
        if (Eigen::LLT<Eigen::MatrixXd>(cert.P).info() != Eigen::Success) ok = false;
    };

    check(support::line5_graph());
    support::Rng rng(1010);
    std::uniform_int_distribution<int> size(2, 8);
    for (int trial = 0; trial < 50; ++trial) check(support::random_strongly_connected(rng, size(rng)));

    criterion(10, "Lyapunov equation residual + P > 0", ok);
    REQUIRE(ok);
}

TEST_CASE("criterion 11: spectral test equals reachability") {
    bool ok = true;
    const auto check_pattern = [&](int m, unsigned long mask, const graph::ComplementBasis& basis) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
        int bit = 0;
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                if (i == j) continue;
                if (mask & (1ul << bit)) a(i, j) = 0.1;
                ++bit;
            }
        }
        const graph::WeightedDigraph g(a);
        const bool hurwitz =
            graph::is_hurwitz(-graph::projected_laplacian(graph::build_laplacian(g), basis));
        const bool reachable = !support::brute_force_reachable(g).empty();
        if (hurwitz != reachable) ok = false;
    };

    for (int m = 2; m <= 4; ++m) {
        const auto basis = graph::build_complement_basis(m);
        const int edges = m * (m - 1);
        for (unsigned long mask = 0; mask < (1ul << edges); ++mask) check_pattern(m, mask, basis);
    }
    {
        const int m = 5;
        const auto basis = graph::build_complement_basis(m);
        support::Rng rng(1111);
        std::uniform_int_distribution<unsigned long> mask_dist(0, (1ul << 20) - 1);
        for (int trial = 0; trial < 10000; ++trial) check_pattern(m, mask_dist(rng), basis);
    }
    criterion(11, "Hurwitz <-> globally reachable", ok);
    REQUIRE(ok);
}

TEST_CASE("criterion 12: marginal mode without a reachable node") {
    const sim::ScenarioConfig cfg = sim::parse_config(DAPI_CONFIG_DIR "/line5_cut.json");
    const sim::RunResult& run = cut_run();
    const analysis::CertificateReport rep = analysis::certify(cfg.graph, cfg.bank, cfg.plant.beta());

    const bool spread_ok = run.metrics.consensus_spread > 1e-3;
    const bool verdict_ok = !rep.certified() && std::string(rep.verdict()) == "NOT_CERTIFIED";
    criterion(12, "cut graph fails consensus + certify", spread_ok && verdict_ok);
    INFO("consensus_spread = " << run.metrics.consensus_spread);
    REQUIRE(spread_ok);
    REQUIRE(verdict_ok);
}

TEST_CASE("criterion 13: equilibrium frequency map identity") {
    const plant::LinearPlant p = plant::LinearPlant::default_desk_system();
    support::Rng rng(1313);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd u(5), loads(5);
        for (int i = 0; i < 5; ++i) {
            u(i) = dist(rng);
            loads(i) = dist(rng);
        }
        const plant::Disturbance d{loads};
        const Eigen::VectorXd direct = p.equilibrium_frequency_map(u, d);
        const Eigen::VectorXd via_state = p.output_frequencies(p.steady_state(u, d));
        worst = std::max(worst, (direct - via_state).cwiseAbs().maxCoeff());
    }
    const bool ok = worst <= 1e-10;
    criterion(13, "closed form == steady-state output", ok);
    INFO("worst mismatch = " << worst);
    REQUIRE(ok);
}

TEST_CASE("criterion 14: integrator order") {
    const plant::LinearPlant p = plant::LinearPlant::default_desk_system();
    const auto L = graph::build_laplacian(support::line5_graph());
    std::vector<convex::BarrierQuadraticObjective> quads(
        5, convex::BarrierQuadraticObjective(1.0, 0.0, 0.0));
    const convex::ObjectiveBank bank{std::move(quads)};
    const Eigen::VectorXd loads = Eigen::VectorXd::Constant(5, 0.05);
    const double tau = 0.2;

    const auto field = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
        const plant::PlantState ps{y.segment(0, 5), y.segment(5, 5), y.segment(10, 5)};
        const Eigen::VectorXd eta = y.segment(15, 5);
        const plant::PlantState ds =
            p.derivative(ps, bank.conj_grad(eta), plant::Disturbance{loads});
        Eigen::VectorXd dy(20);
        dy << ds.delta_theta, ds.delta_omega, ds.delta_pm,
            (-p.output_frequencies(ps) - L.entries() * eta) / tau;
        return dy;
    };
    const auto endpoint = [&](double h) {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(20);
        const long steps = std::llround(2.0 / h);
        for (long k = 0; k < steps; ++k) y = sim::rk4_step(field, y, h);
        return y;
    };

    const Eigen::VectorXd y1 = endpoint(0.1);
    const Eigen::VectorXd y2 = endpoint(0.05);
    const Eigen::VectorXd y4 = endpoint(0.025);
    const double ratio = (y1 - y2).norm() / (y2 - y4).norm();
    const bool ok = ratio >= 12.0 && ratio <= 20.0;
    criterion(14, "RK4 error ratio in [12, 20]", ok);
    INFO("ratio = " << ratio);
    REQUIRE(ok);
}

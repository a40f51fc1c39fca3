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
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "dapi/analysis.hpp"
#include "dapi/config.hpp"
#include "dapi/log.hpp"
#include "dapi/sim.hpp"

namespace fs = std::filesystem;

namespace {

// exit codes: 0 success/certified, 1 validation error, 2 runtime divergence,
// 3 not certified
constexpr int kOk = 0;
constexpr int kBadInput = 1;
constexpr int kRuntimeFailure = 2;
constexpr int kNotCertified = 3;

fs::path csv_path(const dapi::sim::ScenarioConfig& cfg, const std::string& config_path,
                  const std::string& out_dir, bool reduced) {
    const std::string suffix = reduced ? "_reduced.csv" : ".csv";
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        return fs::path(out_dir) / (fs::path(config_path).stem().string() + suffix);
    }
    if (cfg.output) {
        fs::path p(*cfg.output);
        if (reduced) p.replace_filename(p.stem().string() + "_reduced" + p.extension().string());
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        return p;
    }
    return fs::path(fs::path(config_path).stem().string() + suffix);
}

void write_plot_script(const fs::path& csv) {
    fs::path script = csv;
    script.replace_extension(".py");
    std::ofstream out(script);
    out << "#!/usr/bin/env python3\n"
        << "import csv\n"
        << "import matplotlib.pyplot as plt\n\n"
        << "path = \"" << csv.filename().string() << "\"\n"
        << "with open(path) as fh:\n"
        << "    rows = list(csv.DictReader(fh))\n"
        << "t = [float(r[\"t\"]) for r in rows]\n"
        << "fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 9))\n"
        << "panels = [(\"omega_\", \"frequency deviation\"), (\"eta_\", \"marginal cost\"), "
           "(\"u_\", \"set-point\")]\n"
        << "for (prefix, label), ax in zip(panels, axes):\n"
        << "    for c in rows[0].keys():\n"
        << "        if c.startswith(prefix):\n"
        << "            ax.plot(t, [float(r[c]) for r in rows], label=c)\n"
        << "    ax.set_ylabel(label)\n"
        << "    ax.legend(loc=\"best\", fontsize=8)\n"
        << "axes[2].set_xlabel(\"t\")\n"
        << "fig.tight_layout()\n"
        << "fig.savefig(path[:-4] + \".png\", dpi=150)\n"
        << "print(\"wrote\", path[:-4] + \".png\")\n";
    dapi::log::info("wrote plotting script " + script.string());
}

int run_simulate(const std::string& config_path, const std::string& out_dir, bool reduced, bool plot) {
    const dapi::sim::ScenarioConfig cfg = dapi::sim::parse_config(config_path);
    const fs::path csv = csv_path(cfg, config_path, out_dir, reduced);

    nlohmann::json summary;
    summary["csv"] = csv.string();
    if (reduced) {
        const dapi::sim::Trajectory traj = dapi::sim::run_reduced(cfg);
        dapi::sim::write_csv(traj, csv.string());
        const int last = traj.samples() - 1;
        summary["final"] = {{"z", traj.z(last)},
                            {"delta_norm", traj.delta_norm(last)},
                            {"V", traj.V(last)},
                            {"composite", traj.composite(last)}};
    } else {
        const dapi::sim::RunResult result = dapi::sim::run_scenario(cfg);
        dapi::sim::write_csv(result.trajectory, csv.string());
        summary["metrics"] = dapi::sim::metrics_to_json(result.metrics);
    }
    if (plot) write_plot_script(csv);
    std::cout << summary.dump(2) << "\n";
    return kOk;
}

int run_kkt(const std::string& config_path) {
    const dapi::sim::ScenarioConfig cfg = dapi::sim::parse_config(config_path);
    double d = cfg.base_loads.sum();
    for (const auto& ev : cfg.events) d += ev.delta.sum();
    const dapi::analysis::KktSolution sol = dapi::analysis::kkt_solve(cfg.bank, d);
    nlohmann::json j;
    j["d"] = d;
    j["lambda_bar"] = sol.lambda_bar;
    j["u_bar"] = std::vector<double>(sol.u_bar.data(), sol.u_bar.data() + sol.u_bar.size());
    j["units"] = cfg.node_names;
    std::cout << j.dump(2) << "\n";
    return kOk;
}

int run_certify(const std::string& config_path) {
    const dapi::sim::ScenarioConfig cfg = dapi::sim::parse_config(config_path);
    const dapi::analysis::CertificateReport rep =
        dapi::analysis::certify(cfg.graph, cfg.bank, cfg.plant.beta());
    std::cout << dapi::analysis::report_to_json(rep, cfg.node_names).dump(2) << "\n";
    return rep.certified() ? kOk : kNotCertified;
}

int run_check_graph(const std::string& config_path) {
    const dapi::sim::ScenarioConfig cfg = dapi::sim::parse_config(config_path);
    nlohmann::json j;
    nlohmann::json names = nlohmann::json::array();
    for (int idx : dapi::graph::find_globally_reachable(cfg.graph)) {
        names.push_back(cfg.node_names[static_cast<size_t>(idx)]);
    }
    j["reachable_nodes"] = names;
    std::cout << j.dump(2) << "\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed-averaging PI secondary frequency control: simulation and certification"};
    app.require_subcommand(1);

    std::string sim_config;
    std::string out_dir;
    bool reduced = false;
    bool plot = false;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "Integrate the closed loop and write a trajectory CSV");
    sim_cmd->add_option("config", sim_config, "scenario config (JSON)")->required();
    sim_cmd->add_option("--out", out_dir, "output directory for the CSV");
    sim_cmd->add_flag("--reduced", reduced, "integrate the reduced marginal-cost dynamics (slow time)");
    sim_cmd->add_flag("--plot-script", plot, "emit a python plotting script next to the CSV");

    std::string kkt_config;
    CLI::App* kkt_cmd = app.add_subcommand("kkt", "Solve the dispatch problem at the post-event load");
    kkt_cmd->add_option("config", kkt_config, "scenario config (JSON)")->required();

    std::string certify_config;
    CLI::App* certify_cmd = app.add_subcommand("certify", "Run the stability certificate checks");
    certify_cmd->add_option("config", certify_config, "scenario config (JSON)")->required();

    std::string graph_config;
    CLI::App* graph_cmd = app.add_subcommand("check-graph", "List the globally reachable nodes");
    graph_cmd->add_option("config", graph_config, "scenario config (JSON)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim_cmd->parsed()) return run_simulate(sim_config, out_dir, reduced, plot);
        if (kkt_cmd->parsed()) return run_kkt(kkt_config);
        if (certify_cmd->parsed()) return run_certify(certify_config);
        if (graph_cmd->parsed()) return run_check_graph(graph_config);
    } catch (const dapi::ParseError& e) {
        dapi::log::error(e.what());
        return kBadInput;
    } catch (const dapi::ValidationError& e) {
        dapi::log::error(e.what());
        return kBadInput;
    } catch (const dapi::Error& e) {
        dapi::log::error(e.what());
        return kRuntimeFailure;
    } catch (const std::exception& e) {
        dapi::log::error(e.what());
        return kRuntimeFailure;
    }
    return kBadInput;
}

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
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dapi/convex.hpp"
#include "dapi/errors.hpp"
#include "dapi/graph.hpp"
#include "dapi/plant.hpp"

namespace dapi::sim {

struct ControllerConfig {
    double tau;
    std::optional<Eigen::VectorXd> eta0; // nullopt: eta0 = grad J(u_star)
};

struct Event {
    double time;           // s (slow-time units for reduced runs)
    Eigen::VectorXd delta; // per-machine load change, length n
};

/// Complete description of one closed-loop experiment.
struct ScenarioConfig {
    plant::LinearPlant plant;
    std::vector<std::string> machine_names;
    convex::ObjectiveBank bank;
    graph::WeightedDigraph graph;
    std::vector<std::string> node_names;
    ControllerConfig controller;
    Eigen::VectorXd base_loads; // length n
    std::vector<Event> events;  // time-sorted
    double t_end;
    double step;
    int record_every;
    std::optional<std::string> output;
};

namespace detail {

inline const nlohmann::json& need(const nlohmann::json& j, const char* key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) {
        throw ValidationError(path + ": missing required field '" + key + "'");
    }
    return j.at(key);
}

inline double need_num(const nlohmann::json& j, const char* key, const std::string& path) {
    const auto& v = need(j, key, path);
    if (!v.is_number()) throw ValidationError(path + "." + key + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ValidationError(path + "." + key + ": must be finite");
    return x;
}

inline bool need_bool(const nlohmann::json& j, const char* key, const std::string& path) {
    const auto& v = need(j, key, path);
    if (!v.is_boolean()) throw ValidationError(path + "." + key + ": expected a boolean");
    return v.get<bool>();
}

inline std::string need_str(const nlohmann::json& j, const char* key, const std::string& path) {
    const auto& v = need(j, key, path);
    if (!v.is_string()) throw ValidationError(path + "." + key + ": expected a string");
    return v.get<std::string>();
}

/// Bound field: number, or null/absent meaning unbounded.
inline double bound_or_inf(const nlohmann::json& j, const char* key, double inf_value,
                           const std::string& path) {
    if (!j.contains(key) || j.at(key).is_null()) return inf_value;
    if (!j.at(key).is_number()) throw ValidationError(path + "." + key + ": expected a number or null");
    return j.at(key).get<double>();
}

} // namespace detail

/// Builds a validated ScenarioConfig from parsed JSON. `origin` names the
/// source in error messages.
inline ScenarioConfig parse_config_json(const nlohmann::json& root, const std::string& origin) {
    using detail::bound_or_inf;
    using detail::need;
    using detail::need_bool;
    using detail::need_num;
    using detail::need_str;

    if (!root.is_object()) throw ValidationError(origin + ": top-level JSON value must be an object");

    // ---- plant ----
    const auto& jplant = need(root, "plant", origin);
    const auto& jmachines = need(jplant, "machines", origin + ".plant");
    if (!jmachines.is_array() || jmachines.empty()) {
        throw ValidationError(origin + ".plant.machines: expected a non-empty array");
    }
    std::vector<std::string> machine_names;
    std::vector<plant::MachineParams> machines;
    std::map<std::string, int> machine_index;
    for (size_t k = 0; k < jmachines.size(); ++k) {
        const std::string path = origin + ".plant.machines[" + std::to_string(k) + "]";
        const auto& jm = jmachines[k];
        const std::string name = need_str(jm, "name", path);
        if (name.empty()) throw ValidationError(path + ".name: must be non-empty");
        if (machine_index.count(name)) throw ValidationError(path + ".name: duplicate machine name '" + name + "'");
        machine_index[name] = static_cast<int>(k);
        machine_names.push_back(name);
        plant::MachineParams mp;
        mp.inertia = need_num(jm, "M", path);
        mp.damping = need_num(jm, "D", path);
        mp.gov_time = need_num(jm, "T_gov", path);
        mp.droop = need_num(jm, "R_droop", path);
        mp.controllable = need_bool(jm, "controllable", path);
        machines.push_back(mp);
    }
    const int n = static_cast<int>(machines.size());

    Eigen::MatrixXd susceptances = Eigen::MatrixXd::Zero(n, n);
    const auto& jsus = need(jplant, "susceptances", origin + ".plant");
    if (!jsus.is_array()) throw ValidationError(origin + ".plant.susceptances: expected an array");
    for (size_t k = 0; k < jsus.size(); ++k) {
        const std::string path = origin + ".plant.susceptances[" + std::to_string(k) + "]";
        const std::string ni = need_str(jsus[k], "i", path);
        const std::string nj = need_str(jsus[k], "j", path);
        if (!machine_index.count(ni)) throw ValidationError(path + ".i: unknown machine '" + ni + "'");
        if (!machine_index.count(nj)) throw ValidationError(path + ".j: unknown machine '" + nj + "'");
        if (ni == nj) throw ValidationError(path + ": i and j must differ");
        const double t = need_num(jsus[k], "T", path);
        if (t < 0.0) throw ValidationError(path + ".T: must be >= 0");
        const int a = machine_index[ni];
        const int b = machine_index[nj];
        if (susceptances(a, b) != 0.0) throw ValidationError(path + ": duplicate susceptance entry");
        susceptances(a, b) = t;
        susceptances(b, a) = t;
    }

    Eigen::VectorXd loads = Eigen::VectorXd::Zero(n);
    if (jplant.contains("loads")) {
        const auto& jl = jplant.at("loads");
        const std::string path = origin + ".plant.loads";
        if (jl.is_array()) {
            if (static_cast<int>(jl.size()) != n) {
                throw ValidationError(path + ": array must have one entry per machine");
            }
            for (int i = 0; i < n; ++i) {
                if (!jl[static_cast<size_t>(i)].is_number()) throw ValidationError(path + ": entries must be numbers");
                loads(i) = jl[static_cast<size_t>(i)].get<double>();
            }
        } else if (jl.is_object()) {
            for (const auto& [name, val] : jl.items()) {
                if (!machine_index.count(name)) throw ValidationError(path + ": unknown machine '" + name + "'");
                if (!val.is_number()) throw ValidationError(path + "." + name + ": expected a number");
                loads(machine_index[name]) = val.get<double>();
            }
        } else {
            throw ValidationError(path + ": expected an array or an object");
        }
    }

    plant::LinearPlant the_plant = [&] {
        try {
            return plant::LinearPlant(machines, susceptances);
        } catch (const ValidationError& e) {
            throw ValidationError(origin + ".plant: " + e.what());
        }
    }();

    // ---- graph ----
    const auto& jgraph = need(root, "graph", origin);
    const auto& jnodes = need(jgraph, "nodes", origin + ".graph");
    if (!jnodes.is_array() || jnodes.empty()) throw ValidationError(origin + ".graph.nodes: expected a non-empty array");
    std::vector<std::string> node_names;
    std::map<std::string, int> node_index;
    for (size_t k = 0; k < jnodes.size(); ++k) {
        if (!jnodes[k].is_string()) throw ValidationError(origin + ".graph.nodes: entries must be strings");
        const std::string name = jnodes[k].get<std::string>();
        if (node_index.count(name)) throw ValidationError(origin + ".graph.nodes: duplicate node '" + name + "'");
        node_index[name] = static_cast<int>(k);
        node_names.push_back(name);
    }
    const int m = static_cast<int>(node_names.size());

    // controller order = graph node order = controllable machines in file order
    std::vector<std::string> controllable_names;
    for (int idx : the_plant.controllable_indices()) controllable_names.push_back(machine_names[static_cast<size_t>(idx)]);
    if (controllable_names != node_names) {
        throw ValidationError(origin + ".graph.nodes: must list the controllable machines in plant order");
    }

    Eigen::MatrixXd adjacency = Eigen::MatrixXd::Zero(m, m);
    if (jgraph.contains("edges")) {
        const auto& jedges = jgraph.at("edges");
        if (!jedges.is_array()) throw ValidationError(origin + ".graph.edges: expected an array");
        for (size_t k = 0; k < jedges.size(); ++k) {
            const std::string path = origin + ".graph.edges[" + std::to_string(k) + "]";
            const std::string from = need_str(jedges[k], "from", path);
            const std::string to = need_str(jedges[k], "to", path);
            if (!node_index.count(from)) throw ValidationError(path + ".from: unknown node '" + from + "'");
            if (!node_index.count(to)) throw ValidationError(path + ".to: unknown node '" + to + "'");
            if (from == to) throw ValidationError(path + ": self-loops are not allowed");
            const double weight = need_num(jedges[k], "weight", path);
            if (!(weight > 0.0)) throw ValidationError(path + ".weight: must be > 0");
            if (adjacency(node_index[from], node_index[to]) != 0.0) {
                throw ValidationError(path + ": duplicate edge");
            }
            adjacency(node_index[from], node_index[to]) = weight; // from listens to to
        }
    }
    graph::WeightedDigraph comm_graph{std::move(adjacency)};

    // ---- objectives ----
    const auto& jobjs = need(root, "objectives", origin);
    if (!jobjs.is_array() || static_cast<int>(jobjs.size()) != m) {
        throw ValidationError(origin + ".objectives: expected one objective per graph node");
    }
    std::vector<convex::BarrierQuadraticObjective> objs;
    for (int k = 0; k < m; ++k) {
        const std::string path = origin + ".objectives[" + std::to_string(k) + "] (" +
                                 node_names[static_cast<size_t>(k)] + ")";
        const auto& jo = jobjs[static_cast<size_t>(k)];
        const double q = need_num(jo, "q", path);
        const double u_star = need_num(jo, "u_star", path);
        const double gamma = need_num(jo, "gamma", path);
        const double lower = bound_or_inf(jo, "lower", -convex::kInf, path);
        const double upper = bound_or_inf(jo, "upper", convex::kInf, path);
        try {
            objs.emplace_back(q, u_star, gamma, lower, upper);
        } catch (const ValidationError& e) {
            throw ValidationError(path + ": " + e.what());
        }
    }
    convex::ObjectiveBank bank{std::move(objs)};

    // ---- controller ----
    const auto& jctrl = need(root, "controller", origin);
    ControllerConfig ctrl{};
    ctrl.tau = need_num(jctrl, "tau", origin + ".controller");
    if (!(ctrl.tau > 0.0)) throw ValidationError(origin + ".controller.tau: must be > 0");
    if (jctrl.contains("eta0") && !jctrl.at("eta0").is_null()) {
        const auto& je = jctrl.at("eta0");
        if (je.is_string()) {
            if (je.get<std::string>() != "from_dispatch") {
                throw ValidationError(origin + ".controller.eta0: expected an array or \"from_dispatch\"");
            }
        } else if (je.is_array()) {
            if (static_cast<int>(je.size()) != m) {
                throw ValidationError(origin + ".controller.eta0: expected one entry per node");
            }
            Eigen::VectorXd eta0(m);
            for (int k = 0; k < m; ++k) {
                if (!je[static_cast<size_t>(k)].is_number()) {
                    throw ValidationError(origin + ".controller.eta0: entries must be numbers");
                }
                eta0(k) = je[static_cast<size_t>(k)].get<double>();
            }
            ctrl.eta0 = std::move(eta0);
        } else {
            throw ValidationError(origin + ".controller.eta0: expected an array or \"from_dispatch\"");
        }
    }

    // ---- scenario ----
    const auto& jscen = need(root, "scenario", origin);
    const double t_end = need_num(jscen, "t_end", origin + ".scenario");
    const double step = need_num(jscen, "step", origin + ".scenario");
    if (!(step > 0.0)) throw ValidationError(origin + ".scenario.step: must be > 0");
    if (!(t_end >= step)) throw ValidationError(origin + ".scenario.t_end: must be >= step");

    int record_every = 1;
    if (jscen.contains("record_every")) {
        if (!jscen.at("record_every").is_number_integer()) {
            throw ValidationError(origin + ".scenario.record_every: expected an integer");
        }
        record_every = jscen.at("record_every").get<int>();
        if (record_every < 1) throw ValidationError(origin + ".scenario.record_every: must be >= 1");
    }
    if (std::llround(t_end / step) % record_every != 0) {
        throw ValidationError(origin + ".scenario.record_every: must divide the number of steps");
    }

    std::vector<Event> events;
    if (jscen.contains("events")) {
        const auto& jevents = jscen.at("events");
        if (!jevents.is_array()) throw ValidationError(origin + ".scenario.events: expected an array");
        double prev_time = -convex::kInf;
        for (size_t k = 0; k < jevents.size(); ++k) {
            const std::string path = origin + ".scenario.events[" + std::to_string(k) + "]";
            Event ev;
            ev.time = need_num(jevents[k], "time", path);
            if (ev.time < 0.0) throw ValidationError(path + ".time: must be >= 0");
            if (ev.time < prev_time) throw ValidationError(path + ".time: events must be time-sorted");
            prev_time = ev.time;
            if (ev.time > t_end) throw ValidationError(path + ".time: exceeds t_end");
            ev.delta = Eigen::VectorXd::Zero(n);
            const auto& jd = need(jevents[k], "deltas", path);
            if (!jd.is_object() || jd.empty()) throw ValidationError(path + ".deltas: expected a non-empty object");
            for (const auto& [name, val] : jd.items()) {
                if (!machine_index.count(name)) throw ValidationError(path + ".deltas: unknown machine '" + name + "'");
                if (!val.is_number()) throw ValidationError(path + ".deltas." + name + ": expected a number");
                ev.delta(machine_index[name]) = val.get<double>();
            }
            events.push_back(std::move(ev));
        }
    }

    std::optional<std::string> output;
    if (jscen.contains("output") && !jscen.at("output").is_null()) {
        if (!jscen.at("output").is_string()) throw ValidationError(origin + ".scenario.output: expected a string");
        output = jscen.at("output").get<std::string>();
    }

    return ScenarioConfig{std::move(the_plant), std::move(machine_names), std::move(bank),
                          std::move(comm_graph),  std::move(node_names),   ctrl,
                          std::move(loads),       std::move(events),       t_end,
                          step,                   record_every,            std::move(output)};
}

inline ScenarioConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file '" + path + "'");
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return parse_config_json(root, path);
}

} // namespace dapi::sim

// SPDX-License-Identifier: Apache-2.0
//
// Scenario files bind a topology, link parameter overrides, datasets,
// tiering policy and a workload (single object or phase array) into one
// reproducible run. Parsing is strict: unknown keys are fatal and name the
// offending key. Two runs are comparable when their workload fingerprints
// match: the fingerprint hashes the canonical workload section, the dataset
// shapes and the seed, but not the topology or link parameters.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fabric.hpp"
#include "json.hpp"
#include "memtier.hpp"
#include "metrics.hpp"
#include "simulator.hpp"
#include "workload.hpp"

namespace fabricsim {

struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  RoutingPolicy routing = RoutingPolicy::kHbr;
  std::string output;             // CLI hint, may be empty
  nlohmann::json topology;        // topology spec, handed to build_topology
  nlohmann::json link_params;     // per-tech overrides + rdma/bridge blocks
  nlohmann::json workload;        // object or array of phase objects
  std::vector<Dataset> datasets;
  TierConfig tier;
  RdmaParams rdma;
  std::uint32_t bridge_capacity = 1024;
  SimTime bridge_hit_ns = 20;
  SimTime bridge_miss_ns = 80;
};

Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario_file(const std::string& path);
Scenario load_scenario_string(const std::string& text);

// Builds the scenario's fabric with link-parameter overrides applied.
Fabric build_scenario_fabric(const Scenario& s);

// Structural violations of the scenario's fabric (empty = valid).
std::vector<Violation> validate_scenario(const Scenario& s);

// Fingerprint making runs comparable (workload + datasets + seed).
std::string workload_fingerprint(const Scenario& s);

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<RoutingPolicy> routing;
};

// Builds everything and executes: validate, place, generate, run.
RunReport run_scenario(const Scenario& s, const RunOverrides& o = {});

}  // namespace fabricsim

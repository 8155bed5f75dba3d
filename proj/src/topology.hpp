// SPDX-License-Identifier: Apache-2.0
//
// Canonical topology builders. Every builder is deterministic: device ids,
// names and link order depend only on the parameters.
#pragma once

#include <string>

#include "fabric.hpp"
#include "json.hpp"

namespace fabricsim {

struct ClosParams {
  std::uint32_t hosts = 0;
  std::uint32_t accelerators = 0;
  std::uint32_t trays = 0;
  std::uint32_t switches = 1;
  std::string tech = "CXL3";
  std::uint64_t tray_capacity_bytes = 1ull << 40;
  int cluster = -1;  // assigned automatically for scale-up techs
};
Fabric build_single_hop_clos(const ClosParams& p);

struct MultiClosParams {
  std::uint32_t hosts = 0;
  std::uint32_t accelerators = 0;
  std::uint32_t trays = 0;
  std::uint32_t leaf_switches = 2;
  std::uint32_t spine_switches = 1;
  std::string tech = "CXL3";
  std::uint64_t tray_capacity_bytes = 1ull << 40;
};
Fabric build_multilevel_clos(const MultiClosParams& p);

struct TorusParams {
  std::uint32_t nx = 2, ny = 2, nz = 2;
  std::string tech = "CXL3";
  std::string node_kind = "accelerator";  // nodes route traffic themselves
};
Fabric build_torus3d(const TorusParams& p);

struct DragonflyParams {
  std::uint32_t groups = 3;
  std::uint32_t routers_per_group = 2;
  std::uint32_t hosts_per_router = 1;
  std::string tech = "CXL3";
};
Fabric build_dragonfly(const DragonflyParams& p);

struct FullMeshParams {
  std::uint32_t n = 4;
  std::string tech = "NVLink";
  int cluster = 0;
};
Fabric build_fullmesh_cluster(const FullMeshParams& p);

struct Gb200Params {
  std::uint32_t modules = 36;     // 1 CPU + 2 GPUs each
  std::uint32_t nvswitches = 9;   // every GPU links to every switch
  double nic_gbits = 800.0;       // per-node NIC, 400-800 Gb/s
};
Fabric build_gb200_rack(const Gb200Params& p);

// Two-tier composite: XLink islands joined by a CXL fabric through
// protocol-bridge devices, with optional pooled-memory trays hanging off the
// CXL side behind `tray_switch_levels` of switching.
struct SuperclusterParams {
  std::uint32_t clusters = 2;
  std::uint32_t accels_per_cluster = 4;
  std::string cluster_tech = "NVLink";
  std::uint32_t trays = 1;
  std::uint32_t tray_switch_levels = 1;  // switches between spine and trays
  std::uint64_t tray_capacity_bytes = 1ull << 40;
  bool nics = false;  // give every accelerator's node a NIC
};
Fabric build_supercluster(const SuperclusterParams& p);

// Dispatch from a scenario "topology" section ({"kind": ..., params...}).
Fabric build_topology(const nlohmann::json& spec);

// Shared attribute defaults (media latencies, local bandwidths).
Device make_accelerator(std::string name, int cluster = -1, int node = -1);
Device make_host(std::string name, int node = -1);
Device make_tray(std::string name, std::uint64_t capacity_bytes);
Device make_nic(std::string name, int node = -1);

}  // namespace fabricsim

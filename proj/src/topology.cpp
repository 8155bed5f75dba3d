// SPDX-License-Identifier: Apache-2.0
#include "topology.hpp"

#include <set>

#include "error.hpp"

namespace fabricsim {

namespace {

// Media defaults. Accelerator memory is HBM-class (8 TB/s), host memory
// LPDDR-class, pooled trays slower capacity-optimized DRAM. Latencies are
// the device-side access cost added on top of any fabric transfer.
constexpr std::uint64_t kAccelMemBytes = 192ull * 1000 * 1000 * 1000;
constexpr std::uint64_t kAccelMemBpus = 8'000'000;  // 8 TB/s
constexpr SimTime kAccelMemLatency = 80;
constexpr std::uint64_t kHostMemBytes = 480ull * 1000 * 1000 * 1000;
constexpr std::uint64_t kHostMemBpus = 500'000;  // 500 GB/s
constexpr SimTime kHostMemLatency = 100;
constexpr std::uint64_t kTrayMemBpus = 256'000;  // 256 GB/s
constexpr SimTime kTrayMemLatency = 150;

bool is_scale_up(const Fabric& f, const std::string& tech) {
  TechClass c = f.tech(f.require_tech(tech)).cls;
  return c == TechClass::kXlink || c == TechClass::kC2c;
}

}  // namespace

Device make_accelerator(std::string name, int cluster, int node) {
  Device d;
  d.kind = DeviceKind::kAccelerator;
  d.name = std::move(name);
  d.local_mem_bytes = kAccelMemBytes;
  d.local_mem_bytes_per_us = kAccelMemBpus;
  d.mem_latency_ns = kAccelMemLatency;
  d.cluster = cluster;
  d.node = node;
  return d;
}

Device make_host(std::string name, int node) {
  Device d;
  d.kind = DeviceKind::kHostCpu;
  d.name = std::move(name);
  d.capacity_bytes = kHostMemBytes;
  d.local_mem_bytes_per_us = kHostMemBpus;
  d.mem_latency_ns = kHostMemLatency;
  d.node = node;
  return d;
}

Device make_tray(std::string name, std::uint64_t capacity_bytes) {
  Device d;
  d.kind = DeviceKind::kMemoryTray;
  d.name = std::move(name);
  d.capacity_bytes = capacity_bytes;
  d.local_mem_bytes_per_us = kTrayMemBpus;
  d.mem_latency_ns = kTrayMemLatency;
  return d;
}

Device make_nic(std::string name, int node) {
  Device d;
  d.kind = DeviceKind::kNic;
  d.name = std::move(name);
  d.node = node;
  return d;
}

Fabric build_single_hop_clos(const ClosParams& p) {
  if (p.switches == 0) raise("bad-params", "clos needs at least one switch");
  if (p.hosts + p.accelerators + p.trays == 0) {
    raise("bad-params", "clos needs at least one endpoint");
  }
  Fabric f;
  bool scale_up = is_scale_up(f, p.tech);
  int cluster = p.cluster >= 0 ? p.cluster : (scale_up ? 0 : -1);
  DeviceKind sw_kind =
      scale_up ? DeviceKind::kXlinkSwitch : DeviceKind::kCxlSwitch;
  std::vector<DeviceId> endpoints, switches;
  for (std::uint32_t i = 0; i < p.hosts; ++i) {
    endpoints.push_back(f.add_device(make_host("host" + std::to_string(i))));
  }
  for (std::uint32_t i = 0; i < p.accelerators; ++i) {
    endpoints.push_back(
        f.add_device(make_accelerator("accel" + std::to_string(i), cluster)));
  }
  for (std::uint32_t i = 0; i < p.trays; ++i) {
    endpoints.push_back(f.add_device(
        make_tray("tray" + std::to_string(i), p.tray_capacity_bytes)));
  }
  for (std::uint32_t i = 0; i < p.switches; ++i) {
    Device d;
    d.kind = sw_kind;
    d.name = "switch" + std::to_string(i);
    d.cluster = cluster;
    switches.push_back(f.add_device(std::move(d)));
  }
  if (scale_up && cluster >= 0) {
    for (DeviceId e : endpoints) f.device_mutable(e).cluster = cluster;
  }
  for (DeviceId e : endpoints) {
    for (DeviceId s : switches) f.add_link(e, s, p.tech);
  }
  return f;
}

Fabric build_multilevel_clos(const MultiClosParams& p) {
  if (p.leaf_switches == 0 || p.spine_switches == 0) {
    raise("bad-params", "multilevel clos needs leaf and spine switches");
  }
  Fabric f;
  if (is_scale_up(f, p.tech)) {
    raise("bad-params", "multi-level switching requires a composable tech");
  }
  std::vector<DeviceId> endpoints;
  for (std::uint32_t i = 0; i < p.hosts; ++i) {
    endpoints.push_back(f.add_device(make_host("host" + std::to_string(i))));
  }
  for (std::uint32_t i = 0; i < p.accelerators; ++i) {
    endpoints.push_back(
        f.add_device(make_accelerator("accel" + std::to_string(i))));
  }
  std::vector<DeviceId> trays;
  for (std::uint32_t i = 0; i < p.trays; ++i) {
    trays.push_back(f.add_device(
        make_tray("tray" + std::to_string(i), p.tray_capacity_bytes)));
  }
  std::vector<DeviceId> leaves, spines;
  for (std::uint32_t i = 0; i < p.leaf_switches; ++i) {
    Device d;
    d.kind = DeviceKind::kCxlSwitch;
    d.name = "leaf" + std::to_string(i);
    leaves.push_back(f.add_device(std::move(d)));
  }
  for (std::uint32_t i = 0; i < p.spine_switches; ++i) {
    Device d;
    d.kind = DeviceKind::kCxlSwitch;
    d.name = "spine" + std::to_string(i);
    spines.push_back(f.add_device(std::move(d)));
  }
  // Hosts/accelerators round-robin onto leaves from the front, trays from the
  // back, so small builds keep endpoints and memory on different leaves.
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    f.add_link(endpoints[i], leaves[i % leaves.size()], p.tech);
  }
  for (std::size_t i = 0; i < trays.size(); ++i) {
    f.add_link(trays[i], leaves[leaves.size() - 1 - (i % leaves.size())],
               p.tech);
  }
  for (DeviceId l : leaves) {
    for (DeviceId s : spines) f.add_link(l, s, p.tech);
  }
  return f;
}

Fabric build_torus3d(const TorusParams& p) {
  if (p.nx == 0 || p.ny == 0 || p.nz == 0) {
    raise("bad-params", "torus dimensions must be positive");
  }
  Fabric f;
  auto idx = [&](std::uint32_t x, std::uint32_t y, std::uint32_t z) {
    return (z * p.ny + y) * p.nx + x;
  };
  std::vector<DeviceId> nodes;
  for (std::uint32_t z = 0; z < p.nz; ++z) {
    for (std::uint32_t y = 0; y < p.ny; ++y) {
      for (std::uint32_t x = 0; x < p.nx; ++x) {
        std::string name = "node" + std::to_string(idx(x, y, z));
        if (p.node_kind == "accelerator") {
          nodes.push_back(f.add_device(make_accelerator(std::move(name))));
        } else if (p.node_kind == "cxl_switch") {
          Device d;
          d.kind = DeviceKind::kCxlSwitch;
          d.name = std::move(name);
          nodes.push_back(f.add_device(std::move(d)));
        } else {
          raise("bad-params", "torus node_kind must be accelerator|cxl_switch");
        }
      }
    }
  }
  // +1 wraparound neighbor per dimension; a dimension of size 2 has a single
  // distinct neighbor and size 1 contributes no link.
  std::set<std::pair<DeviceId, DeviceId>> made;
  auto connect = [&](DeviceId a, DeviceId b) {
    if (a == b) return;
    auto key = std::minmax(a, b);
    if (made.insert({key.first, key.second}).second) {
      f.add_link(key.first, key.second, p.tech);
    }
  };
  for (std::uint32_t z = 0; z < p.nz; ++z) {
    for (std::uint32_t y = 0; y < p.ny; ++y) {
      for (std::uint32_t x = 0; x < p.nx; ++x) {
        DeviceId cur = nodes[idx(x, y, z)];
        connect(cur, nodes[idx((x + 1) % p.nx, y, z)]);
        connect(cur, nodes[idx(x, (y + 1) % p.ny, z)]);
        connect(cur, nodes[idx(x, y, (z + 1) % p.nz)]);
      }
    }
  }
  return f;
}

Fabric build_dragonfly(const DragonflyParams& p) {
  if (p.groups == 0 || p.routers_per_group == 0) {
    raise("bad-params", "dragonfly needs groups and routers");
  }
  Fabric f;
  std::vector<std::vector<DeviceId>> routers(p.groups);
  for (std::uint32_t g = 0; g < p.groups; ++g) {
    for (std::uint32_t r = 0; r < p.routers_per_group; ++r) {
      Device d;
      d.kind = DeviceKind::kCxlSwitch;
      d.name = "g" + std::to_string(g) + "r" + std::to_string(r);
      routers[g].push_back(f.add_device(std::move(d)));
    }
  }
  for (std::uint32_t g = 0; g < p.groups; ++g) {
    for (std::uint32_t r = 0; r < p.routers_per_group; ++r) {
      for (std::uint32_t h = 0; h < p.hosts_per_router; ++h) {
        DeviceId a = f.add_device(make_accelerator(
            "g" + std::to_string(g) + "r" + std::to_string(r) + "a" +
            std::to_string(h)));
        f.add_link(a, routers[g][r], p.tech);
      }
    }
  }
  // Fully connected local groups.
  for (std::uint32_t g = 0; g < p.groups; ++g) {
    for (std::uint32_t i = 0; i < p.routers_per_group; ++i) {
      for (std::uint32_t j = i + 1; j < p.routers_per_group; ++j) {
        f.add_link(routers[g][i], routers[g][j], p.tech);
      }
    }
  }
  // One global link per group pair, spread round-robin over routers.
  for (std::uint32_t i = 0; i < p.groups; ++i) {
    for (std::uint32_t j = i + 1; j < p.groups; ++j) {
      DeviceId ri = routers[i][j % p.routers_per_group];
      DeviceId rj = routers[j][i % p.routers_per_group];
      f.add_link(ri, rj, p.tech);
    }
  }
  return f;
}

Fabric build_fullmesh_cluster(const FullMeshParams& p) {
  if (p.n < 2) raise("bad-params", "full mesh needs at least two devices");
  Fabric f;
  if (!is_scale_up(f, p.tech) && f.tech(f.require_tech(p.tech)).cls != TechClass::kCxl) {
    raise("bad-params", "unsupported mesh tech " + p.tech);
  }
  std::vector<DeviceId> accels;
  for (std::uint32_t i = 0; i < p.n; ++i) {
    accels.push_back(f.add_device(
        make_accelerator("accel" + std::to_string(i), p.cluster)));
  }
  for (std::uint32_t i = 0; i < p.n; ++i) {
    for (std::uint32_t j = i + 1; j < p.n; ++j) {
      f.add_link(accels[i], accels[j], p.tech);
    }
  }
  return f;
}

Fabric build_gb200_rack(const Gb200Params& p) {
  if (p.modules == 0 || p.nvswitches == 0) {
    raise("bad-params", "rack needs modules and switches");
  }
  Fabric f;
  f.tech_mutable(f.require_tech("RDMA-NIC")).bytes_per_us =
      gbps_to_bytes_per_us(p.nic_gbits / 8.0);
  std::vector<DeviceId> gpus;
  // One compute module = 1 CPU + 2 GPUs, joined by coherent C2C links; a
  // node-level NIC provides the scale-out path.
  for (std::uint32_t m = 0; m < p.modules; ++m) {
    DeviceId cpu = f.add_device(make_host("cpu" + std::to_string(m), m));
    DeviceId g0 = f.add_device(
        make_accelerator("gpu" + std::to_string(2 * m), 0, m));
    DeviceId g1 = f.add_device(
        make_accelerator("gpu" + std::to_string(2 * m + 1), 0, m));
    f.device_mutable(cpu).cluster = 0;
    f.add_link(cpu, g0, "NVLinkC2C");
    f.add_link(cpu, g1, "NVLinkC2C");
    DeviceId nic = f.add_device(make_nic("nic" + std::to_string(m), m));
    f.device_mutable(cpu).nic = nic;
    f.device_mutable(g0).nic = nic;
    f.device_mutable(g1).nic = nic;
    gpus.push_back(g0);
    gpus.push_back(g1);
  }
  std::vector<DeviceId> switches;
  for (std::uint32_t s = 0; s < p.nvswitches; ++s) {
    Device d;
    d.kind = DeviceKind::kXlinkSwitch;
    d.name = "nvswitch" + std::to_string(s);
    d.cluster = 0;
    switches.push_back(f.add_device(std::move(d)));
  }
  for (DeviceId g : gpus) {
    for (DeviceId s : switches) f.add_link(g, s, "NVLink");
  }
  return f;
}

Fabric build_supercluster(const SuperclusterParams& p) {
  if (p.clusters == 0 || p.accels_per_cluster == 0) {
    raise("bad-params", "supercluster needs clusters with accelerators");
  }
  Fabric f;
  if (!is_scale_up(f, p.cluster_tech)) {
    raise("bad-params", "cluster tech must be a scale-up technology");
  }
  Device spine;
  spine.kind = DeviceKind::kCxlSwitch;
  spine.name = "spine0";
  DeviceId spine_id = f.add_device(std::move(spine));
  int node = 0;
  for (std::uint32_t c = 0; c < p.clusters; ++c) {
    Device sw;
    sw.kind = DeviceKind::kXlinkSwitch;
    sw.name = "c" + std::to_string(c) + "sw";
    sw.cluster = static_cast<int>(c);
    DeviceId sw_id = f.add_device(std::move(sw));
    for (std::uint32_t a = 0; a < p.accels_per_cluster; ++a, ++node) {
      DeviceId g = f.add_device(make_accelerator(
          "c" + std::to_string(c) + "accel" + std::to_string(a),
          static_cast<int>(c), node));
      f.add_link(g, sw_id, p.cluster_tech);
      if (p.nics) {
        DeviceId nic = f.add_device(
            make_nic("c" + std::to_string(c) + "nic" + std::to_string(a), node));
        f.device_mutable(g).nic = nic;
      }
    }
    Device br;
    br.kind = DeviceKind::kBridge;
    br.name = "c" + std::to_string(c) + "bridge";
    br.cluster = static_cast<int>(c);
    DeviceId br_id = f.add_device(std::move(br));
    f.add_link(br_id, sw_id, p.cluster_tech);
    f.add_link(br_id, spine_id, "CXL3");  // composable side leaves the island
  }
  DeviceId up = spine_id;
  for (std::uint32_t lvl = 0; lvl < p.tray_switch_levels; ++lvl) {
    Device sw;
    sw.kind = DeviceKind::kCxlSwitch;
    sw.name = "pool_sw" + std::to_string(lvl);
    DeviceId id = f.add_device(std::move(sw));
    f.add_link(up, id, "CXL3");
    up = id;
  }
  for (std::uint32_t t = 0; t < p.trays; ++t) {
    DeviceId tray = f.add_device(
        make_tray("pool_tray" + std::to_string(t), p.tray_capacity_bytes));
    f.add_link(tray, up, "CXL3");
  }
  return f;
}

// ---------------------------------------------------------------------------

Fabric build_topology(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("kind")) {
    raise("bad-params", "topology section needs a 'kind'");
  }
  std::string kind = spec.at("kind").get<std::string>();
  auto u32 = [&](const char* key, std::uint32_t dflt) -> std::uint32_t {
    return spec.value(key, dflt);
  };
  auto u64gb = [&](const char* key, double dflt_gb) -> std::uint64_t {
    double gb = spec.value(key, dflt_gb);
    if (gb < 0) raise("bad-params", std::string(key) + " must be >= 0");
    return static_cast<std::uint64_t>(gb * 1e9);
  };
  static const std::map<std::string, std::set<std::string>> allowed = {
      {"single_hop_clos",
       {"kind", "hosts", "accelerators", "trays", "switches", "tech",
        "tray_capacity_gb", "cxl_mode"}},
      {"multilevel_clos",
       {"kind", "hosts", "accelerators", "trays", "leaf_switches",
        "spine_switches", "tech", "tray_capacity_gb", "cxl_mode"}},
      {"torus3d", {"kind", "nx", "ny", "nz", "tech", "node_kind", "cxl_mode"}},
      {"dragonfly",
       {"kind", "groups", "routers_per_group", "hosts_per_router", "tech",
        "cxl_mode"}},
      {"fullmesh_cluster", {"kind", "n", "tech", "cxl_mode"}},
      {"gb200_rack", {"kind", "modules", "nvswitches", "nic_gbits", "cxl_mode"}},
      {"supercluster",
       {"kind", "clusters", "accels_per_cluster", "cluster_tech", "trays",
        "tray_switch_levels", "tray_capacity_gb", "nics", "cxl_mode"}},
      {"custom", {"kind", "cxl_mode", "devices", "links", "nics"}},
  };
  auto it = allowed.find(kind);
  if (it == allowed.end()) {
    raise("bad-params", "unknown topology kind '" + kind + "'");
  }
  for (const auto& [key, _] : spec.items()) {
    if (!it->second.count(key)) {
      raise("unknown-key", "topology." + key + " is not a recognized field");
    }
  }

  Fabric f;
  if (kind == "single_hop_clos") {
    ClosParams p;
    p.hosts = u32("hosts", 0);
    p.accelerators = u32("accelerators", 0);
    p.trays = u32("trays", 0);
    p.switches = u32("switches", 1);
    p.tech = spec.value("tech", "CXL3");
    p.tray_capacity_bytes = u64gb("tray_capacity_gb", 1024.0);
    f = build_single_hop_clos(p);
  } else if (kind == "multilevel_clos") {
    MultiClosParams p;
    p.hosts = u32("hosts", 0);
    p.accelerators = u32("accelerators", 0);
    p.trays = u32("trays", 0);
    p.leaf_switches = u32("leaf_switches", 2);
    p.spine_switches = u32("spine_switches", 1);
    p.tech = spec.value("tech", "CXL3");
    p.tray_capacity_bytes = u64gb("tray_capacity_gb", 1024.0);
    f = build_multilevel_clos(p);
  } else if (kind == "torus3d") {
    TorusParams p;
    p.nx = u32("nx", 2);
    p.ny = u32("ny", 2);
    p.nz = u32("nz", 2);
    p.tech = spec.value("tech", "CXL3");
    p.node_kind = spec.value("node_kind", "accelerator");
    f = build_torus3d(p);
  } else if (kind == "dragonfly") {
    DragonflyParams p;
    p.groups = u32("groups", 3);
    p.routers_per_group = u32("routers_per_group", 2);
    p.hosts_per_router = u32("hosts_per_router", 1);
    p.tech = spec.value("tech", "CXL3");
    f = build_dragonfly(p);
  } else if (kind == "fullmesh_cluster") {
    FullMeshParams p;
    p.n = u32("n", 4);
    p.tech = spec.value("tech", "NVLink");
    f = build_fullmesh_cluster(p);
  } else if (kind == "gb200_rack") {
    Gb200Params p;
    p.modules = u32("modules", 36);
    p.nvswitches = u32("nvswitches", 9);
    p.nic_gbits = spec.value("nic_gbits", 800.0);
    f = build_gb200_rack(p);
  } else if (kind == "supercluster") {
    SuperclusterParams p;
    p.clusters = u32("clusters", 2);
    p.accels_per_cluster = u32("accels_per_cluster", 4);
    p.cluster_tech = spec.value("cluster_tech", "NVLink");
    p.trays = u32("trays", 1);
    p.tray_switch_levels = u32("tray_switch_levels", 1);
    p.tray_capacity_bytes = u64gb("tray_capacity_gb", 1024.0);
    p.nics = spec.value("nics", false);
    f = build_supercluster(p);
  } else {  // custom
    f = Fabric::from_json(spec);
  }
  if (spec.contains("cxl_mode") && kind != "custom") {
    std::string m = spec.at("cxl_mode").get<std::string>();
    if (m == "v2") {
      f.set_cxl_mode(CxlMode::kV2);
    } else if (m == "v3") {
      f.set_cxl_mode(CxlMode::kV3);
    } else {
      raise("bad-params", "cxl_mode must be v2 or v3");
    }
  }
  return f;
}

}  // namespace fabricsim

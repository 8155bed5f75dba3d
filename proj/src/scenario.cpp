// SPDX-License-Identifier: Apache-2.0
#include "scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string_view>

#include "error.hpp"
#include "topology.hpp"

namespace fabricsim {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end()) {
      raise("unknown-key", "'" + key + "' in " + ctx);
    }
  }
}

const json& require_key(const json& j, const char* key,
                        const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) raise("missing-key", ctx + " needs '" + key + "'");
  return *it;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

RoutingPolicy parse_routing(const std::string& s) {
  if (s == "hbr") return RoutingPolicy::kHbr;
  if (s == "pbr") return RoutingPolicy::kPbr;
  raise("bad-params", "routing must be hbr or pbr, got '" + s + "'");
}

LatencyClass parse_latency_class(const std::string& s) {
  if (s == "critical") return LatencyClass::kCritical;
  if (s == "bulk") return LatencyClass::kBulk;
  raise("bad-params", "latency_class must be critical or bulk, got '" + s + "'");
}

TierConfig parse_tiering(const json& j) {
  check_keys(j,
             {"policy", "tier2_protocol", "promotion_threshold",
              "promotion_window_ns", "tier2_block_bytes"},
             "tiering");
  TierConfig cfg;
  if (j.contains("policy")) {
    std::string p = j.at("policy").get<std::string>();
    if (p == "static_class") {
      cfg.policy = PlacePolicy::kStaticClass;
    } else if (p == "temperature") {
      cfg.policy = PlacePolicy::kTemperature;
    } else {
      raise("bad-params", "tiering policy must be static_class or temperature");
    }
  }
  if (j.contains("tier2_protocol")) {
    std::string p = j.at("tier2_protocol").get<std::string>();
    if (p == "mem_coherent") {
      cfg.tier2_protocol = Tier2Protocol::kMemCoherent;
    } else if (p == "mem_only") {
      cfg.tier2_protocol = Tier2Protocol::kMemOnly;
    } else if (p == "io_bulk_only") {
      cfg.tier2_protocol = Tier2Protocol::kIoBulkOnly;
    } else {
      raise("bad-params", "unknown tier2_protocol '" + p + "'");
    }
  }
  if (j.contains("promotion_threshold")) {
    cfg.promotion_threshold = j.at("promotion_threshold").get<std::uint32_t>();
  }
  if (j.contains("promotion_window_ns")) {
    cfg.promotion_window_ns = j.at("promotion_window_ns").get<SimTime>();
  }
  if (j.contains("tier2_block_bytes")) {
    cfg.tier2_block_bytes = j.at("tier2_block_bytes").get<std::uint32_t>();
  }
  return cfg;
}

Dataset parse_dataset(const json& j) {
  check_keys(j,
             {"id", "bytes", "latency_class", "kind", "pinned_device",
              "source_device"},
             "dataset");
  Dataset d;
  d.id = require_key(j, "id", "dataset").get<std::string>();
  d.bytes = require_key(j, "bytes", "dataset '" + d.id + "'")
                .get<std::uint64_t>();
  if (j.contains("latency_class")) {
    d.latency_class =
        parse_latency_class(j.at("latency_class").get<std::string>());
  }
  d.kind = j.value("kind", std::string{});
  d.pinned_device = j.value("pinned_device", std::string{});
  d.source_device = j.value("source_device", std::string{});
  return d;
}

// Workload device group: an explicit name list or the first N devices of a
// kind in id order.
std::vector<DeviceId> parse_group(const Fabric& f, const json& w,
                                  const std::string& ctx) {
  std::vector<DeviceId> out;
  if (w.contains("devices")) {
    for (const auto& n : w.at("devices")) {
      out.push_back(f.require_device(n.get<std::string>()));
    }
    return out;
  }
  auto take = [&](DeviceKind k, std::uint32_t count, const char* what) {
    for (const Device& d : f.devices()) {
      if (out.size() == count) break;
      if (f.alive(d.id) && d.kind == k) out.push_back(d.id);
    }
    if (out.size() < count) {
      raise("bad-params", ctx + " asks for " + std::to_string(count) + " " +
                              what + ", fabric has " +
                              std::to_string(out.size()));
    }
  };
  if (w.contains("accelerator_count")) {
    take(DeviceKind::kAccelerator,
         w.at("accelerator_count").get<std::uint32_t>(), "accelerators");
  } else if (w.contains("host_count")) {
    take(DeviceKind::kHostCpu, w.at("host_count").get<std::uint32_t>(),
         "hosts");
  } else {
    raise("bad-params",
          ctx + " needs 'devices', 'accelerator_count' or 'host_count'");
  }
  return out;
}

struct GenContext {
  Fabric& fabric;
  TaskGraph& graph;
  PlacementMap& placement;
  const TierConfig& tier;
  std::mt19937_64& rng;
  const std::vector<Dataset>& datasets;
};

std::vector<TaskId> gen_one(GenContext& cx, const json& w,
                            const std::string& phase) {
  std::string kind = require_key(w, "kind", "workload").get<std::string>();
  if (kind == "collective") {
    check_keys(w,
               {"kind", "op", "algo", "bytes", "devices", "accelerator_count",
                "host_count", "phase"},
               "collective workload");
    CollectiveParams p;
    p.group = parse_group(cx.fabric, w, "collective");
    p.bytes = require_key(w, "bytes", "collective").get<std::uint64_t>();
    std::string op = w.value("op", std::string{"all_reduce"});
    if (op == "all_reduce") {
      p.op = CollectiveOp::kAllReduce;
    } else if (op == "all_gather") {
      p.op = CollectiveOp::kAllGather;
    } else if (op == "reduce_scatter") {
      p.op = CollectiveOp::kReduceScatter;
    } else {
      raise("bad-params", "unknown collective op '" + op + "'");
    }
    std::string algo = w.value("algo", std::string{"ring"});
    if (algo == "ring") {
      p.algo = CollectiveAlgo::kRing;
    } else if (algo == "tree") {
      p.algo = CollectiveAlgo::kTree;
    } else {
      raise("bad-params", "unknown collective algo '" + algo + "'");
    }
    return gen_collective(cx.graph, p, {}, phase);
  }
  if (kind == "training_step") {
    check_keys(w,
               {"kind", "tp", "pp", "dp", "layers", "compute_ns_per_layer",
                "bytes_tp_sync", "bytes_pp_activation", "bytes_dp_gradient",
                "ep_experts", "bytes_ep_dispatch", "devices",
                "accelerator_count", "phase"},
               "training_step workload");
    TrainingParams p;
    p.tp = w.value("tp", 1u);
    p.pp = w.value("pp", 1u);
    p.dp = w.value("dp", 1u);
    p.layers = w.value("layers", 1u);
    p.compute_ns_per_layer = w.value("compute_ns_per_layer", SimTime{1000});
    p.bytes_tp_sync = w.value("bytes_tp_sync", std::uint64_t{0});
    p.bytes_pp_activation = w.value("bytes_pp_activation", std::uint64_t{0});
    p.bytes_dp_gradient = w.value("bytes_dp_gradient", std::uint64_t{0});
    p.ep_experts = w.value("ep_experts", 1u);
    p.bytes_ep_dispatch = w.value("bytes_ep_dispatch", std::uint64_t{0});
    json sel = w;
    if (!sel.contains("devices") && !sel.contains("accelerator_count")) {
      sel["accelerator_count"] = p.tp * p.pp * p.dp;
    }
    return gen_training_step(cx.graph, p,
                             parse_group(cx.fabric, sel, "training_step"),
                             phase);
  }
  if (kind == "kv_decode") {
    check_keys(w,
               {"kind", "device", "tokens", "kv_bytes_per_token",
                "compute_ns_per_token", "dataset", "phase"},
               "kv_decode workload");
    KvDecodeParams p;
    p.device = cx.fabric.require_device(
        require_key(w, "device", "kv_decode").get<std::string>());
    p.tokens = w.value("tokens", 1u);
    p.kv_bytes_per_token =
        require_key(w, "kv_bytes_per_token", "kv_decode").get<std::uint64_t>();
    p.compute_ns_per_token = w.value("compute_ns_per_token", SimTime{0});
    p.dataset = w.value("dataset", std::string{"kv"});
    return gen_kv_decode(cx.graph, p, cx.placement, cx.tier, phase);
  }
  if (kind == "rag" || kind == "sparse_lookup") {
    check_keys(w,
               {"kind", "devices", "accelerator_count", "host_count",
                "queries", "probes_per_query", "vector_bytes", "context_bytes",
                "llm_compute_ns", "dataset", "phase"},
               kind + " workload");
    RagParams p;
    p.group = parse_group(cx.fabric, w, kind);
    p.queries = w.value("queries", 1u);
    p.probes_per_query = w.value("probes_per_query", 0u);
    p.vector_bytes = w.value("vector_bytes", std::uint64_t{512});
    p.context_bytes = w.value("context_bytes", std::uint64_t{0});
    p.llm_compute_ns = w.value("llm_compute_ns", SimTime{0});
    p.dataset = w.value("dataset", std::string{"kb"});
    return gen_rag(cx.graph, p, cx.placement, cx.tier, cx.rng, {}, phase);
  }
  if (kind == "mpi_halo") {
    check_keys(w,
               {"kind", "px", "py", "halo_bytes", "iterations", "compute_ns",
                "mode", "devices", "host_count", "phase"},
               "mpi_halo workload");
    MpiHaloParams p;
    p.px = require_key(w, "px", "mpi_halo").get<std::uint32_t>();
    p.py = require_key(w, "py", "mpi_halo").get<std::uint32_t>();
    p.halo_bytes = require_key(w, "halo_bytes", "mpi_halo").get<std::uint64_t>();
    p.iterations = w.value("iterations", 1u);
    p.compute_ns = w.value("compute_ns", SimTime{0});
    std::string mode = w.value("mode", std::string{"auto"});
    if (mode == "message") {
      p.mode = MpiHaloParams::Mode::kMessage;
    } else if (mode == "shared") {
      p.mode = MpiHaloParams::Mode::kSharedMemory;
    } else if (mode == "auto") {
      // Shared halo regions need pooled memory and the multi-writer fabric.
      bool pool = cx.fabric.count(DeviceKind::kMemoryTray) > 0;
      p.mode = pool && cx.fabric.cxl_mode() == CxlMode::kV3
                   ? MpiHaloParams::Mode::kSharedMemory
                   : MpiHaloParams::Mode::kMessage;
    } else {
      raise("bad-params", "mpi_halo mode must be message, shared or auto");
    }
    json sel = w;
    if (!sel.contains("devices") && !sel.contains("host_count")) {
      sel["host_count"] = p.px * p.py;
    }
    return gen_mpi_halo(cx.graph, p, cx.fabric,
                        parse_group(cx.fabric, sel, "mpi_halo"), phase);
  }
  if (kind == "bulk_copy") {
    check_keys(w, {"kind", "dataset", "source", "chunk_bytes", "bytes", "phase"},
               "bulk_copy workload");
    std::string ds =
        require_key(w, "dataset", "bulk_copy").get<std::string>();
    std::uint64_t total = 0;
    if (w.contains("bytes")) {
      total = w.at("bytes").get<std::uint64_t>();
    } else {
      for (const Dataset& d : cx.datasets) {
        if (d.id == ds) total = d.bytes;
      }
    }
    std::string source = w.value("source", std::string{});
    if (source.empty()) {
      for (const Dataset& d : cx.datasets) {
        if (d.id == ds) source = d.source_device;
      }
    }
    if (source.empty()) {
      raise("bad-params", "bulk_copy of '" + ds + "' has no source device");
    }
    return gen_bulk_copy(cx.graph, ds, cx.fabric.require_device(source),
                         w.value("chunk_bytes", std::uint64_t{65536}), total,
                         cx.placement, {}, phase);
  }
  if (kind == "migrate") {
    check_keys(w, {"kind", "dataset", "to_tier", "phase"}, "migrate workload");
    std::string ds = require_key(w, "dataset", "migrate").get<std::string>();
    std::uint8_t to_tier =
        static_cast<std::uint8_t>(w.value("to_tier", 1u));
    PendingMigration m = plan_migration(cx.placement, cx.fabric, ds, to_tier);
    return {gen_migration(cx.graph, std::move(m), {}, phase)};
  }
  raise("unknown-key", "workload kind '" + kind + "'");
}

}  // namespace

Scenario parse_scenario(const nlohmann::json& j) {
  check_keys(j,
             {"name", "seed", "routing", "output", "topology", "link_params",
              "datasets", "tiering", "workload"},
             "scenario");
  Scenario s;
  s.name = j.value("name", std::string{"scenario"});
  s.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("routing")) {
    s.routing = parse_routing(j.at("routing").get<std::string>());
  }
  s.output = j.value("output", std::string{});
  s.topology = require_key(j, "topology", "scenario");
  s.workload = require_key(j, "workload", "scenario");
  if (j.contains("link_params")) s.link_params = j.at("link_params");
  if (j.contains("datasets")) {
    for (const auto& dj : j.at("datasets")) s.datasets.push_back(parse_dataset(dj));
  }
  if (j.contains("tiering")) s.tier = parse_tiering(j.at("tiering"));
  if (s.link_params.contains("rdma")) {
    const json& r = s.link_params.at("rdma");
    check_keys(r, {"sw_overhead_ns", "network_hops", "hop_latency_ns"},
               "link_params.rdma");
    s.rdma.sw_overhead_ns = r.value("sw_overhead_ns", s.rdma.sw_overhead_ns);
    s.rdma.network_hops = r.value("network_hops", s.rdma.network_hops);
    s.rdma.hop_latency_ns = r.value("hop_latency_ns", s.rdma.hop_latency_ns);
  }
  if (s.link_params.contains("bridge")) {
    const json& b = s.link_params.at("bridge");
    check_keys(b, {"hit_ns", "miss_ns", "capacity"}, "link_params.bridge");
    s.bridge_hit_ns = b.value("hit_ns", s.bridge_hit_ns);
    s.bridge_miss_ns = b.value("miss_ns", s.bridge_miss_ns);
    s.bridge_capacity = b.value("capacity", s.bridge_capacity);
  }
  return s;
}

Scenario load_scenario_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    raise("bad-json", e.what());
  }
  return parse_scenario(j);
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise("no-file", "cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_scenario_string(buf.str());
}

Fabric build_scenario_fabric(const Scenario& s) {
  Fabric f = build_topology(s.topology);
  for (const auto& [tech_name, ov] : s.link_params.items()) {
    if (tech_name == "rdma" || tech_name == "bridge") continue;
    int idx = f.tech_index(tech_name);
    if (idx < 0) raise("unknown-tech", "link_params names '" + tech_name + "'");
    check_keys(ov,
               {"gbps", "base_link_latency_ns", "switch_hop_latency_ns",
                "flit_bytes", "header_bytes", "links_per_device"},
               "link_params." + tech_name);
    LinkTech& t = f.tech_mutable(idx);
    if (ov.contains("gbps")) {
      t.bytes_per_us = gbps_to_bytes_per_us(ov.at("gbps").get<double>());
    }
    if (ov.contains("base_link_latency_ns")) {
      t.base_link_latency_ns = ov.at("base_link_latency_ns").get<SimTime>();
    }
    if (ov.contains("switch_hop_latency_ns")) {
      t.switch_hop_latency_ns = ov.at("switch_hop_latency_ns").get<SimTime>();
    }
    if (ov.contains("flit_bytes")) {
      t.flit_bytes = ov.at("flit_bytes").get<std::uint32_t>();
    }
    if (ov.contains("header_bytes")) {
      t.header_bytes = ov.at("header_bytes").get<std::uint32_t>();
    }
    if (ov.contains("links_per_device")) {
      t.links_per_device = ov.at("links_per_device").get<std::uint32_t>();
    }
  }
  return f;
}

std::vector<Violation> validate_scenario(const Scenario& s) {
  Fabric f = build_scenario_fabric(s);
  return f.validate();
}

std::string workload_fingerprint(const Scenario& s) {
  std::string material = s.workload.dump();
  material += '|';
  std::vector<std::pair<std::string, std::uint64_t>> ds;
  for (const Dataset& d : s.datasets) ds.emplace_back(d.id, d.bytes);
  std::sort(ds.begin(), ds.end());
  for (const auto& [id, bytes] : ds) {
    material += id + ':' + std::to_string(bytes) + ';';
  }
  material += '|' + std::to_string(s.seed);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(material)));
  return buf;
}

RunReport run_scenario(const Scenario& s, const RunOverrides& o) {
  Scenario eff = s;
  if (o.seed) eff.seed = *o.seed;
  if (o.routing) eff.routing = *o.routing;

  Fabric f = build_scenario_fabric(eff);
  TaskGraph g;
  PlacementMap placement = place(eff.datasets, f, eff.tier);
  std::mt19937_64 rng(eff.seed);
  GenContext cx{f, g, placement, eff.tier, rng, eff.datasets};

  std::vector<json> phases;
  if (eff.workload.is_array()) {
    for (const auto& w : eff.workload) phases.push_back(w);
  } else {
    phases.push_back(eff.workload);
  }
  std::vector<TaskId> prev_sinks;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const json& w = phases[i];
    std::string phase = w.value(
        "phase", phases.size() == 1 ? std::string{"main"}
                                    : "phase" + std::to_string(i));
    std::size_t begin = g.tasks.size();
    std::vector<TaskId> sinks = gen_one(cx, w, phase);
    // Chain phases: tasks with no dependencies of their own wait for the
    // previous phase to drain.
    if (!prev_sinks.empty()) {
      for (std::size_t t = begin; t < g.tasks.size(); ++t) {
        if (g.tasks[t].deps.empty()) g.tasks[t].deps = prev_sinks;
      }
    }
    if (!sinks.empty()) prev_sinks = std::move(sinks);
  }

  SimConfig cfg;
  cfg.name = eff.name;
  cfg.workload_tag = workload_fingerprint(eff);
  cfg.seed = eff.seed;
  cfg.routing = eff.routing;
  cfg.rdma = eff.rdma;
  cfg.tier = eff.tier;
  cfg.bridge_capacity = eff.bridge_capacity;
  cfg.bridge_hit_ns = eff.bridge_hit_ns;
  cfg.bridge_miss_ns = eff.bridge_miss_ns;
  return execute(f, g, placement, cfg);
}

}  // namespace fabricsim

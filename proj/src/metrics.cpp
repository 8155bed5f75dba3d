// SPDX-License-Identifier: Apache-2.0
#include "metrics.hpp"

#include <algorithm>
#include <sstream>

#include "error.hpp"

namespace fabricsim {

void RunReport::record_latency(SimTime ns) {
  std::size_t b = latency_bucket(ns);
  if (latency_hist.size() <= b) latency_hist.resize(b + 1, 0);
  ++latency_hist[b];
  ++latency_samples;
  latency_total_ns += ns;
  latency_max_ns = std::max(latency_max_ns, ns);
}

nlohmann::ordered_json RunReport::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["workload_tag"] = workload_tag;
  j["seed"] = seed;
  j["routing"] = routing;
  j["makespan_ns"] = makespan_ns;
  j["messages"] = messages;
  j["rdma_messages"] = rdma_messages;
  j["bytes_injected"] = bytes_injected;
  j["bytes_delivered"] = bytes_delivered;
  j["wire_bytes"] = wire_bytes;
  j["latency"] = {{"hist", latency_hist},
                  {"samples", latency_samples},
                  {"total_ns", latency_total_ns},
                  {"max_ns", latency_max_ns}};
  j["coherence"] = {{"fetches", coherence.fetches},
                    {"hits", coherence.hits},
                    {"back_invalidations", coherence.back_invalidations},
                    {"writebacks", coherence.writebacks}};
  j["bridge"] = {{"hits", bridge_hits}, {"misses", bridge_misses}};
  auto& lj = j["links"] = nlohmann::ordered_json::array();
  for (const LinkStat& l : links) {
    lj.push_back({{"name", l.name},
                  {"busy_ns", l.busy_ns},
                  {"wire_bytes", l.wire_bytes},
                  {"utilization", l.utilization}});
  }
  auto& dj = j["devices"] = nlohmann::ordered_json::array();
  for (const DeviceStat& d : devices) {
    dj.push_back({{"name", d.name},
                  {"compute_busy_ns", d.compute_busy_ns},
                  {"exposed_comm_ns", d.exposed_comm_ns}});
  }
  auto& pj = j["phases"] = nlohmann::ordered_json::object();
  for (const auto& [phase, span] : phases) {
    pj[phase] = {{"start_ns", span.start_ns}, {"end_ns", span.end_ns}};
  }
  return j;
}

RunReport RunReport::from_json(const nlohmann::json& j) {
  RunReport r;
  r.name = j.at("name").get<std::string>();
  r.workload_tag = j.at("workload_tag").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.routing = j.at("routing").get<std::string>();
  r.makespan_ns = j.at("makespan_ns").get<SimTime>();
  r.messages = j.at("messages").get<std::uint64_t>();
  r.rdma_messages = j.at("rdma_messages").get<std::uint64_t>();
  r.bytes_injected = j.at("bytes_injected").get<std::uint64_t>();
  r.bytes_delivered = j.at("bytes_delivered").get<std::uint64_t>();
  r.wire_bytes = j.at("wire_bytes").get<std::uint64_t>();
  const auto& lat = j.at("latency");
  r.latency_hist = lat.at("hist").get<std::vector<std::uint64_t>>();
  r.latency_samples = lat.at("samples").get<std::uint64_t>();
  r.latency_total_ns = lat.at("total_ns").get<SimTime>();
  r.latency_max_ns = lat.at("max_ns").get<SimTime>();
  const auto& coh = j.at("coherence");
  r.coherence.fetches = coh.at("fetches").get<std::uint64_t>();
  r.coherence.hits = coh.at("hits").get<std::uint64_t>();
  r.coherence.back_invalidations =
      coh.at("back_invalidations").get<std::uint64_t>();
  r.coherence.writebacks = coh.at("writebacks").get<std::uint64_t>();
  r.bridge_hits = j.at("bridge").at("hits").get<std::uint64_t>();
  r.bridge_misses = j.at("bridge").at("misses").get<std::uint64_t>();
  for (const auto& lj : j.at("links")) {
    LinkStat l;
    l.name = lj.at("name").get<std::string>();
    l.busy_ns = lj.at("busy_ns").get<SimTime>();
    l.wire_bytes = lj.at("wire_bytes").get<std::uint64_t>();
    l.utilization = lj.at("utilization").get<double>();
    r.links.push_back(std::move(l));
  }
  for (const auto& dj : j.at("devices")) {
    DeviceStat d;
    d.name = dj.at("name").get<std::string>();
    d.compute_busy_ns = dj.at("compute_busy_ns").get<SimTime>();
    d.exposed_comm_ns = dj.at("exposed_comm_ns").get<SimTime>();
    r.devices.push_back(std::move(d));
  }
  for (const auto& [phase, span] : j.at("phases").items()) {
    r.phases[phase] = {span.at("start_ns").get<SimTime>(),
                       span.at("end_ns").get<SimTime>()};
  }
  return r;
}

std::string RunReport::to_csv() const {
  std::ostringstream os;
  os << "metric,key,value\n";
  auto row = [&](const char* metric, const std::string& key, auto value) {
    os << metric << ',' << key << ',' << value << '\n';
  };
  row("name", "", name);
  row("workload_tag", "", workload_tag);
  row("seed", "", seed);
  row("routing", "", routing);
  row("makespan_ns", "", makespan_ns);
  row("messages", "", messages);
  row("rdma_messages", "", rdma_messages);
  row("bytes_injected", "", bytes_injected);
  row("bytes_delivered", "", bytes_delivered);
  row("wire_bytes", "", wire_bytes);
  row("latency_samples", "", latency_samples);
  row("latency_total_ns", "", latency_total_ns);
  row("latency_max_ns", "", latency_max_ns);
  for (std::size_t b = 0; b < latency_hist.size(); ++b) {
    if (latency_hist[b] == 0) continue;
    row("latency_hist", "2^" + std::to_string(b), latency_hist[b]);
  }
  row("coherence_fetches", "", coherence.fetches);
  row("coherence_hits", "", coherence.hits);
  row("coherence_back_invalidations", "", coherence.back_invalidations);
  row("coherence_writebacks", "", coherence.writebacks);
  row("bridge_hits", "", bridge_hits);
  row("bridge_misses", "", bridge_misses);
  for (const LinkStat& l : links) {
    row("link_busy_ns", l.name, l.busy_ns);
    row("link_wire_bytes", l.name, l.wire_bytes);
    row("link_utilization", l.name, l.utilization);
  }
  for (const DeviceStat& d : devices) {
    row("device_compute_busy_ns", d.name, d.compute_busy_ns);
    row("device_exposed_comm_ns", d.name, d.exposed_comm_ns);
  }
  for (const auto& [phase, span] : phases) {
    row("phase_start_ns", phase, span.start_ns);
    row("phase_end_ns", phase, span.end_ns);
  }
  return os.str();
}

nlohmann::ordered_json Comparison::to_json() const {
  nlohmann::ordered_json j;
  j["workload_tag"] = workload_tag;
  j["baseline_makespan_ns"] = baseline_makespan_ns;
  j["candidate_makespan_ns"] = candidate_makespan_ns;
  j["makespan_speedup"] = makespan_speedup;
  j["exposed_comm_ratio"] = exposed_comm_ratio;
  j["avg_latency_ratio"] = avg_latency_ratio;
  auto& pj = j["phase_speedup"] = nlohmann::ordered_json::object();
  for (const auto& [phase, s] : phase_speedup) pj[phase] = s;
  return j;
}

Comparison compare(const RunReport& baseline, const RunReport& candidate) {
  if (baseline.workload_tag != candidate.workload_tag) {
    raise("incomparable", "runs executed different workloads (" +
                              baseline.workload_tag + " vs " +
                              candidate.workload_tag + ")");
  }
  if (candidate.makespan_ns == 0) {
    raise("incomparable", "candidate makespan is zero");
  }
  Comparison c;
  c.workload_tag = baseline.workload_tag;
  c.baseline_makespan_ns = baseline.makespan_ns;
  c.candidate_makespan_ns = candidate.makespan_ns;
  c.makespan_speedup = static_cast<double>(baseline.makespan_ns) /
                       static_cast<double>(candidate.makespan_ns);
  auto stall = [](const RunReport& r) {
    SimTime total = 0;
    for (const DeviceStat& d : r.devices) total += d.exposed_comm_ns;
    return total;
  };
  SimTime cand_stall = stall(candidate);
  c.exposed_comm_ratio = cand_stall == 0 ? 0.0
                                         : static_cast<double>(stall(baseline)) /
                                               static_cast<double>(cand_stall);
  double cand_lat = candidate.avg_latency_ns();
  c.avg_latency_ratio =
      cand_lat == 0.0 ? 0.0 : baseline.avg_latency_ns() / cand_lat;
  for (const auto& [phase, bspan] : baseline.phases) {
    auto it = candidate.phases.find(phase);
    if (it == candidate.phases.end()) continue;
    SimTime bdur = bspan.end_ns - bspan.start_ns;
    SimTime cdur = it->second.end_ns - it->second.start_ns;
    if (cdur > 0) {
      c.phase_speedup[phase] =
          static_cast<double>(bdur) / static_cast<double>(cdur);
    }
  }
  return c;
}

}  // namespace fabricsim

// SPDX-License-Identifier: Apache-2.0
//
// Run reports: everything a finished simulation exported, serializable to
// JSON (lossless round-trip) and CSV, plus baseline/candidate comparison.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "coherence.hpp"
#include "json.hpp"
#include "types.hpp"

namespace fabricsim {

struct LinkStat {
  std::string name;  // "src->dst", one entry per traversal direction
  SimTime busy_ns = 0;
  std::uint64_t wire_bytes = 0;
  double utilization = 0.0;  // busy_ns / makespan
};

struct DeviceStat {
  std::string name;
  SimTime compute_busy_ns = 0;
  // Time spent stalled on communication that nothing overlapped.
  SimTime exposed_comm_ns = 0;
};

struct PhaseSpan {
  SimTime start_ns = 0;
  SimTime end_ns = 0;
};

// Power-of-two latency histogram: bucket b counts samples in [2^b, 2^(b+1))
// nanoseconds, except bucket 0 which is [0, 2).
inline std::size_t latency_bucket(SimTime ns) {
  std::size_t b = 0;
  while (ns >= 2 && b < 62) {
    ns >>= 1;
    ++b;
  }
  return b;
}

struct RunReport {
  std::string name;
  std::string workload_tag;  // fingerprint; comparisons require equal tags
  std::uint64_t seed = 0;
  std::string routing = "hbr";
  SimTime makespan_ns = 0;

  std::uint64_t messages = 0;
  std::uint64_t rdma_messages = 0;
  std::uint64_t bytes_injected = 0;   // payload bytes handed to the fabric
  std::uint64_t bytes_delivered = 0;  // payload bytes that reached their dst
  std::uint64_t wire_bytes = 0;       // framed bytes across all fabric links

  // In-fabric message latency (delivery minus send; excludes media time).
  std::vector<std::uint64_t> latency_hist;
  std::uint64_t latency_samples = 0;
  SimTime latency_total_ns = 0;
  SimTime latency_max_ns = 0;

  CoherenceStats coherence;
  std::uint64_t bridge_hits = 0;
  std::uint64_t bridge_misses = 0;

  std::vector<LinkStat> links;      // link id order, both directions
  std::vector<DeviceStat> devices;  // device id order (hosts + accelerators)
  std::map<std::string, PhaseSpan> phases;

  void record_latency(SimTime ns);
  double avg_latency_ns() const {
    return latency_samples == 0
               ? 0.0
               : static_cast<double>(latency_total_ns) /
                     static_cast<double>(latency_samples);
  }

  nlohmann::ordered_json to_json() const;
  static RunReport from_json(const nlohmann::json& j);
  std::string to_csv() const;
};

// Ratios are baseline over candidate, so >1 means the candidate is faster.
struct Comparison {
  std::string workload_tag;
  SimTime baseline_makespan_ns = 0;
  SimTime candidate_makespan_ns = 0;
  double makespan_speedup = 0.0;
  double exposed_comm_ratio = 0.0;  // baseline stall time / candidate's
  double avg_latency_ratio = 0.0;
  std::map<std::string, double> phase_speedup;

  nlohmann::ordered_json to_json() const;
};

// Raises "incomparable" when the runs executed different workloads or the
// candidate makespan is zero.
Comparison compare(const RunReport& baseline, const RunReport& candidate);

}  // namespace fabricsim

// SPDX-License-Identifier: Apache-2.0
//
// Discrete-event core: a monotonic clock, an event queue with a total order
// on (time, insertion seq), and a per-resource FIFO occupancy ledger used to
// model link/NIC contention at message granularity.
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <queue>
#include <span>
#include <unordered_map>
#include <vector>

#include "types.hpp"

namespace fabricsim {

// Occupancy resources are keyed by a 64-bit id. Links use one key per
// direction; NIC egress queues get their own tag bit.
inline constexpr std::uint64_t link_key(LinkId link, bool reverse) {
  return (static_cast<std::uint64_t>(link) << 1) | (reverse ? 1u : 0u);
}
inline constexpr std::uint64_t nic_key(DeviceId nic) {
  return (1ull << 62) | nic;
}

class Engine {
 public:
  using Action = std::function<void()>;

  struct Grant {
    SimTime start = 0;
    SimTime end = 0;
  };

  struct ResourceUse {
    SimTime busy_until = 0;
    SimTime busy_ns = 0;
    std::uint64_t bytes = 0;
    // (end, wire_bytes) of grants not yet drained; backs queued_bytes().
    std::deque<std::pair<SimTime, std::uint64_t>> inflight;
    std::uint64_t queued = 0;
  };

  SimTime now() const { return clock_; }

  // Schedules fn at absolute time t. Events at equal times run in insertion
  // order; the returned id is unique and doubles as the tie-break seq.
  std::uint64_t schedule(SimTime t, Action fn);
  std::uint64_t schedule_after(SimTime dt, Action fn) {
    return schedule(clock_ + dt, std::move(fn));
  }

  // Runs events until the queue empties or event times exceed `until`.
  // Returns the clock, which rests at the last processed event's time.
  SimTime run(std::optional<SimTime> until = std::nullopt);

  // Grants exclusive FIFO occupancy of one resource for the serialization
  // time of wire_bytes at bytes_per_us. Never overlaps previous grants.
  Grant acquire(std::uint64_t key, std::uint64_t wire_bytes,
                std::uint64_t bytes_per_us);

  // Grants one shared window [start, start+duration) across several
  // resources (a cut-through transfer holding every hop of a path segment).
  // start clears the busy_until of every key involved.
  Grant acquire_window(std::span<const std::uint64_t> keys, SimTime duration,
                       std::uint64_t wire_bytes);

  // Bytes granted on `key` whose occupancy has not finished by now(); this is
  // the congestion signal consumed by port-based routing.
  std::uint64_t queued_bytes(std::uint64_t key);

  const std::unordered_map<std::uint64_t, ResourceUse>& resource_use() const {
    return use_;
  }

  // Executed (time, seq) pairs, recorded for determinism checks.
  const std::vector<std::pair<SimTime, std::uint64_t>>& trace() const {
    return trace_;
  }

 private:
  struct Event {
    SimTime time;
    std::uint64_t seq;
    Action fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  SimTime clock_ = 0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::unordered_map<std::uint64_t, ResourceUse> use_;
  std::vector<std::pair<SimTime, std::uint64_t>> trace_;
};

}  // namespace fabricsim

// SPDX-License-Identifier: Apache-2.0
#include "engine.hpp"

#include "error.hpp"

namespace fabricsim {

std::uint64_t Engine::schedule(SimTime t, Action fn) {
  if (t < clock_) {
    raise("past-event", "cannot schedule at t=" + std::to_string(t) +
                            " before current clock " + std::to_string(clock_));
  }
  std::uint64_t id = next_seq_++;
  queue_.push(Event{t, id, std::move(fn)});
  return id;
}

SimTime Engine::run(std::optional<SimTime> until) {
  while (!queue_.empty()) {
    if (until && queue_.top().time > *until) break;
    Event ev = queue_.top();
    queue_.pop();
    clock_ = ev.time;
    trace_.emplace_back(ev.time, ev.seq);
    ev.fn();
  }
  return clock_;
}

Engine::Grant Engine::acquire(std::uint64_t key, std::uint64_t wire_bytes,
                              std::uint64_t bytes_per_us) {
  if (bytes_per_us == 0) raise("bad-params", "zero bandwidth on resource");
  const std::uint64_t k[1] = {key};
  return acquire_window(k, serialization_ns(wire_bytes, bytes_per_us),
                        wire_bytes);
}

Engine::Grant Engine::acquire_window(std::span<const std::uint64_t> keys,
                                     SimTime duration,
                                     std::uint64_t wire_bytes) {
  SimTime start = clock_;
  for (auto key : keys) {
    auto& u = use_[key];
    if (u.busy_until > start) start = u.busy_until;
  }
  SimTime end = start + duration;
  for (auto key : keys) {
    auto& u = use_[key];
    u.busy_until = end;
    u.busy_ns += duration;
    u.bytes += wire_bytes;
    u.inflight.emplace_back(end, wire_bytes);
    u.queued += wire_bytes;
  }
  return Grant{start, end};
}

std::uint64_t Engine::queued_bytes(std::uint64_t key) {
  auto it = use_.find(key);
  if (it == use_.end()) return 0;
  auto& u = it->second;
  while (!u.inflight.empty() && u.inflight.front().first <= clock_) {
    u.queued -= u.inflight.front().second;
    u.inflight.pop_front();
  }
  return u.queued;
}

}  // namespace fabricsim

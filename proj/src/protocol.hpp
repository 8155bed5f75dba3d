// SPDX-License-Identifier: Apache-2.0
//
// Wire-level cost model: payload segmentation into flits/packets, pure
// transfer costing along a resolved path (cut-through: one bottleneck
// serialization per technology segment plus per-hop forwarding latency),
// the scale-out (RDMA) cost model, and protocol-bridge conversion state.
#pragma once

#include <cstdint>
#include <list>
#include <unordered_map>
#include <vector>

#include "fabric.hpp"
#include "routing.hpp"
#include "types.hpp"

namespace fabricsim {

enum class MsgKind : std::uint8_t {
  kLoad,           // demand read (cache-line or small)
  kStore,          // write / writeback
  kDmaBulk,        // bulk engine transfer
  kCoherenceCtrl,  // directory control (single flit)
};

struct Message {
  DeviceId src = 0;
  DeviceId dst = 0;
  std::uint64_t payload_bytes = 0;
  MsgKind kind = MsgKind::kDmaBulk;
};

struct SegmentCost {
  std::uint64_t flits = 0;  // flits (generic) or packets (NVLink framing)
  std::uint64_t wire_bytes = 0;
};

// Segments a payload for one link technology. Zero-byte payloads are an
// error except for control messages, which always cost one minimal unit.
SegmentCost segment_payload(std::uint64_t payload_bytes, const LinkTech& t);
SegmentCost segment_message(const Message& m, const LinkTech& t);

// One same-technology stretch of a path.
struct PathSegment {
  int tech = -1;
  std::vector<LinkId> links;
  std::uint64_t bottleneck_bytes_per_us = 0;
  SimTime latency_ns = 0;  // link latencies + forwarding-hop latencies
  DeviceId bridge_after = kNoDevice;  // bridge between this and next segment
};

// Splits a resolved path at technology seams. A seam between the composable
// (CXL) class and a scale-up class must sit on a bridge device, otherwise
// raises "tech-boundary".
std::vector<PathSegment> split_segments(const Fabric& f, const RoutePath& p);

struct WireCost {
  std::uint64_t flits = 0;
  std::uint64_t wire_bytes = 0;
  SimTime serialization_ns = 0;
  SimTime path_latency_ns = 0;
  SimTime total_ns = 0;  // serialization + path latency (no queuing)
};

// Pure zero-load cost of carrying `m` along `p`. Bridge conversion latency
// is stateful and charged by the executor, not here.
WireCost transfer_time(const Message& m, const RoutePath& p, const Fabric& f);

struct RdmaParams {
  SimTime sw_overhead_ns = 1500;  // stack traversal, both ends
  std::uint32_t network_hops = 1;
  SimTime hop_latency_ns = 500;
};

// Cost of one scale-out transfer between the NICs of src/dst devices.
// Raises "no-nic" when either device lacks one.
WireCost rdma_cost(const Fabric& f, const Message& m, const RdmaParams& p);

// LRU conversion cache inside a protocol bridge: repeated transfers of the
// same region reuse the translated format.
class BridgeState {
 public:
  explicit BridgeState(std::uint32_t capacity = 1024, SimTime hit_ns = 20,
                       SimTime miss_ns = 80)
      : capacity_(capacity), hit_ns_(hit_ns), miss_ns_(miss_ns) {}

  SimTime convert(std::uint64_t key);

  std::uint64_t hits() const { return hits_; }
  std::uint64_t misses() const { return misses_; }

 private:
  std::uint32_t capacity_;
  SimTime hit_ns_;
  SimTime miss_ns_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
  std::list<std::uint64_t> lru_;  // front = most recent
  std::unordered_map<std::uint64_t, std::list<std::uint64_t>::iterator> map_;
};

}  // namespace fabricsim

// SPDX-License-Identifier: Apache-2.0
#include "protocol.hpp"

#include <algorithm>

#include "error.hpp"

namespace fabricsim {

namespace {

// NVLink framing constants: 16B flits, one header flit plus 2..16 data
// flits per packet (48B..272B on the wire, up to 256B payload).
constexpr std::uint64_t kNvFlit = 16;
constexpr std::uint64_t kNvMinDataFlits = 2;
constexpr std::uint64_t kNvMaxDataFlits = 16;
constexpr std::uint64_t kNvMaxPayload = kNvFlit * kNvMaxDataFlits;

SegmentCost segment_nvlink(std::uint64_t payload) {
  SegmentCost c;
  std::uint64_t full = payload / kNvMaxPayload;
  std::uint64_t rem = payload % kNvMaxPayload;
  c.flits = full + (rem ? 1 : 0);
  c.wire_bytes = full * (kNvFlit + kNvMaxPayload);
  if (rem) {
    std::uint64_t data_flits =
        std::max(kNvMinDataFlits, ceil_div(rem, kNvFlit));
    c.wire_bytes += kNvFlit + data_flits * kNvFlit;
  }
  return c;
}

}  // namespace

SegmentCost segment_payload(std::uint64_t payload_bytes, const LinkTech& t) {
  SegmentCost c;
  switch (t.framing) {
    case Framing::kGeneric: {
      std::uint64_t per_flit = t.flit_bytes - t.header_bytes;
      c.flits = ceil_div(payload_bytes, per_flit);
      c.wire_bytes = c.flits * t.flit_bytes;
      break;
    }
    case Framing::kNvlinkPacket:
      c = segment_nvlink(payload_bytes);
      break;
    case Framing::kRaw:
      c.flits = 1;
      c.wire_bytes = payload_bytes;
      break;
  }
  return c;
}

SegmentCost segment_message(const Message& m, const LinkTech& t) {
  if (m.kind == MsgKind::kCoherenceCtrl) {
    // Directory control rides a single minimal unit regardless of payload.
    switch (t.framing) {
      case Framing::kGeneric:
        return {1, t.flit_bytes};
      case Framing::kNvlinkPacket:
        return {1, kNvFlit + kNvMinDataFlits * kNvFlit};
      case Framing::kRaw:
        return {1, 64};
    }
  }
  if (m.payload_bytes == 0) {
    raise("empty-message", "zero-byte payload on a data message");
  }
  return segment_payload(m.payload_bytes, t);
}

std::vector<PathSegment> split_segments(const Fabric& f, const RoutePath& p) {
  std::vector<PathSegment> segs;
  if (p.links.empty()) return segs;

  auto needs_bridge = [](TechClass a, TechClass b) {
    // Crossing between the composable fabric and a scale-up island requires
    // protocol conversion; NVLink<->C2C (same native framing) does not.
    return (a == TechClass::kCxl) != (b == TechClass::kCxl);
  };

  PathSegment cur;
  cur.tech = f.link(p.links[0]).tech;
  cur.bottleneck_bytes_per_us = ~0ull;
  for (std::size_t i = 0; i < p.links.size(); ++i) {
    const Link& l = f.link(p.links[i]);
    if (l.tech != cur.tech) {
      const Device& seam = f.device(p.devices[i]);
      bool bridged = needs_bridge(f.tech(cur.tech).cls, f.tech(l.tech).cls);
      if (bridged && seam.kind != DeviceKind::kBridge) {
        raise("tech-boundary",
              "path changes technology at " + seam.name +
                  " which is not a bridge");
      }
      if (bridged) cur.bridge_after = seam.id;
      segs.push_back(std::move(cur));
      cur = PathSegment{};
      cur.tech = l.tech;
      cur.bottleneck_bytes_per_us = ~0ull;
    }
    cur.links.push_back(l.id);
    cur.latency_ns += f.tech(l.tech).base_link_latency_ns;
    cur.bottleneck_bytes_per_us =
        std::min(cur.bottleneck_bytes_per_us, f.link_bandwidth(l));
    // Forwarding latency of the device the message enters, except endpoints
    // and bridges (bridges charge conversion latency instead).
    if (i + 1 < p.links.size()) {
      const Device& via = f.device(p.devices[i + 1]);
      if (via.kind != DeviceKind::kBridge) {
        cur.latency_ns += f.tech(l.tech).switch_hop_latency_ns;
      }
    }
  }
  segs.push_back(std::move(cur));
  return segs;
}

WireCost transfer_time(const Message& m, const RoutePath& p, const Fabric& f) {
  WireCost w;
  if (p.links.empty()) return w;
  for (const PathSegment& seg : split_segments(f, p)) {
    SegmentCost c = segment_message(m, f.tech(seg.tech));
    w.flits += c.flits;
    w.wire_bytes += c.wire_bytes;
    w.serialization_ns +=
        serialization_ns(c.wire_bytes, seg.bottleneck_bytes_per_us);
    w.path_latency_ns += seg.latency_ns;
  }
  w.total_ns = w.serialization_ns + w.path_latency_ns;
  return w;
}

WireCost rdma_cost(const Fabric& f, const Message& m, const RdmaParams& p) {
  const Device& src = f.device(m.src);
  const Device& dst = f.device(m.dst);
  if (src.nic == kNoDevice || dst.nic == kNoDevice) {
    raise("no-nic", "no NIC between " + src.name + " and " + dst.name);
  }
  const LinkTech& nic = f.tech(f.require_tech("RDMA-NIC"));
  SegmentCost c = segment_message(m, nic);
  WireCost w;
  w.flits = c.flits;
  w.wire_bytes = c.wire_bytes;
  w.serialization_ns = serialization_ns(c.wire_bytes, nic.bytes_per_us);
  w.path_latency_ns =
      p.sw_overhead_ns + static_cast<SimTime>(p.network_hops) * p.hop_latency_ns;
  w.total_ns = w.serialization_ns + w.path_latency_ns;
  return w;
}

SimTime BridgeState::convert(std::uint64_t key) {
  auto it = map_.find(key);
  if (it != map_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second);
    ++hits_;
    return hit_ns_;
  }
  ++misses_;
  lru_.push_front(key);
  map_[key] = lru_.begin();
  if (map_.size() > capacity_) {
    map_.erase(lru_.back());
    lru_.pop_back();
  }
  return miss_ns_;
}

}  // namespace fabricsim

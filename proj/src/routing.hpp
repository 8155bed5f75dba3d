// SPDX-License-Identifier: Apache-2.0
//
// Route computation over the fabric graph. Two policies:
//  - HBR: fixed per-destination trees, load-blind, deterministic tie-breaks
//    (lowest next-device id, then lowest port index).
//  - PBR: keeps every minimal-path egress port and picks the least-queued
//    one (by pending bytes) at forwarding time.
// Hosts, trays and NICs terminate paths; switches, bridges and accelerators
// (integrated switching) may forward.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fabric.hpp"
#include "types.hpp"

namespace fabricsim {

enum class RoutingPolicy : std::uint8_t { kHbr, kPbr };

struct RoutePath {
  std::vector<DeviceId> devices;  // src first, dst last
  std::vector<LinkId> links;      // devices.size() - 1 entries
};

// Pending bytes on a directed link (engine-provided congestion signal).
using LoadFn = std::function<std::uint64_t(LinkId, bool reverse)>;

class RouteTable {
 public:
  static constexpr std::uint16_t kUnreachable = 0xffff;

  RoutingPolicy policy() const { return policy_; }
  std::uint16_t distance(DeviceId src, DeviceId dst) const {
    return dist_[idx(src, dst)];
  }
  bool reachable(DeviceId src, DeviceId dst) const {
    return src < n_ && dst < n_ && dist_[idx(src, dst)] != kUnreachable;
  }

  // Egress port from `dev` toward `dst`; consults loads only under PBR.
  Port next_hop(const Fabric& f, DeviceId dev, DeviceId dst,
                const LoadFn& loads = {}) const;

  RoutePath resolve(const Fabric& f, DeviceId src, DeviceId dst,
                    const LoadFn& loads = {}) const;

 private:
  friend RouteTable build_routes(const Fabric&, RoutingPolicy, bool);
  std::size_t idx(DeviceId src, DeviceId dst) const {
    return static_cast<std::size_t>(src) * n_ + dst;
  }
  std::size_t n_ = 0;
  RoutingPolicy policy_ = RoutingPolicy::kHbr;
  std::vector<std::uint16_t> dist_;
  std::vector<std::uint16_t> hbr_port_;            // port index at device
  std::vector<std::vector<std::uint16_t>> pbr_;    // minimal-path ports
};

// Computes routes for every device pair. With require_connected, raises
// "unreachable" listing disconnected device pairs (NICs are not part of the
// fabric graph and are exempt).
RouteTable build_routes(const Fabric& f, RoutingPolicy policy,
                        bool require_connected = true);

bool device_may_forward(DeviceKind k);

}  // namespace fabricsim

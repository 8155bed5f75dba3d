// SPDX-License-Identifier: Apache-2.0
#include "routing.hpp"

#include <queue>

#include "error.hpp"

namespace fabricsim {

bool device_may_forward(DeviceKind k) {
  switch (k) {
    case DeviceKind::kCxlSwitch:
    case DeviceKind::kXlinkSwitch:
    case DeviceKind::kBridge:
    case DeviceKind::kAccelerator:  // integrated switching (mesh/torus nodes)
      return true;
    default:
      return false;
  }
}

RouteTable build_routes(const Fabric& f, RoutingPolicy policy,
                        bool require_connected) {
  RouteTable t;
  t.n_ = f.devices().size();
  t.policy_ = policy;
  t.dist_.assign(t.n_ * t.n_, RouteTable::kUnreachable);
  t.hbr_port_.assign(t.n_ * t.n_, 0xffff);
  if (policy == RoutingPolicy::kPbr) t.pbr_.resize(t.n_ * t.n_);

  // One BFS per destination, expanding only through forwarding-capable
  // devices so endpoints never appear in a path interior.
  std::vector<std::uint16_t> dist(t.n_);
  for (DeviceId dst = 0; dst < t.n_; ++dst) {
    if (!f.alive(dst)) continue;
    std::fill(dist.begin(), dist.end(), RouteTable::kUnreachable);
    dist[dst] = 0;
    std::queue<DeviceId> q;
    q.push(dst);
    while (!q.empty()) {
      DeviceId cur = q.front();
      q.pop();
      if (cur != dst && !device_may_forward(f.device(cur).kind)) continue;
      for (const Port& p : f.ports(cur)) {
        if (dist[p.peer] != RouteTable::kUnreachable) continue;
        dist[p.peer] = static_cast<std::uint16_t>(dist[cur] + 1);
        q.push(p.peer);
      }
    }
    for (DeviceId src = 0; src < t.n_; ++src) {
      if (!f.alive(src)) continue;
      t.dist_[t.idx(src, dst)] = dist[src];
      if (src == dst || dist[src] == RouteTable::kUnreachable) continue;
      const auto& ports = f.ports(src);
      int best = -1;
      for (std::size_t pi = 0; pi < ports.size(); ++pi) {
        if (dist[ports[pi].peer] + 1 != dist[src]) continue;
        if (policy == RoutingPolicy::kPbr) {
          t.pbr_[t.idx(src, dst)].push_back(static_cast<std::uint16_t>(pi));
        }
        if (best < 0 || ports[pi].peer < ports[best].peer) {
          best = static_cast<int>(pi);
        }
      }
      t.hbr_port_[t.idx(src, dst)] = static_cast<std::uint16_t>(best);
    }
  }

  if (require_connected) {
    std::string pairs;
    int shown = 0;
    for (DeviceId a = 0; a < t.n_; ++a) {
      if (!f.alive(a) || f.device(a).kind == DeviceKind::kNic) continue;
      for (DeviceId b = a + 1; b < t.n_; ++b) {
        if (!f.alive(b) || f.device(b).kind == DeviceKind::kNic) continue;
        if (t.dist_[t.idx(a, b)] == RouteTable::kUnreachable) {
          if (shown++ < 8) {
            pairs += (pairs.empty() ? "" : ", ") + f.device(a).name + "<->" +
                     f.device(b).name;
          }
        }
      }
    }
    if (shown > 0) {
      raise("unreachable", "disconnected fabric: " + pairs +
                               (shown > 8 ? " (+more)" : ""));
    }
  }
  return t;
}

Port RouteTable::next_hop(const Fabric& f, DeviceId dev, DeviceId dst,
                          const LoadFn& loads) const {
  if (dev >= n_ || dst >= n_ || dev == dst) {
    raise("bad-params", "next_hop needs distinct live devices");
  }
  if (dist_[idx(dev, dst)] == kUnreachable) {
    raise("unreachable", f.device(dev).name + " cannot reach " +
                             f.device(dst).name);
  }
  const auto& ports = f.ports(dev);
  if (policy_ == RoutingPolicy::kHbr || !loads) {
    return ports[hbr_port_[idx(dev, dst)]];
  }
  const auto& cand = pbr_[idx(dev, dst)];
  std::uint16_t best = cand.front();
  std::uint64_t best_load = ~0ull;
  for (std::uint16_t pi : cand) {
    const Link& l = f.link(ports[pi].link);
    std::uint64_t load = loads(l.id, /*reverse=*/l.a != dev);
    if (load < best_load) {
      best_load = load;
      best = pi;
    }
  }
  return ports[best];
}

RoutePath RouteTable::resolve(const Fabric& f, DeviceId src, DeviceId dst,
                              const LoadFn& loads) const {
  RoutePath path;
  path.devices.push_back(src);
  if (src == dst) return path;
  if (!reachable(src, dst)) {
    raise("unreachable",
          f.device(src).name + " cannot reach " + f.device(dst).name);
  }
  DeviceId cur = src;
  while (cur != dst) {
    Port p = next_hop(f, cur, dst, loads);
    path.links.push_back(p.link);
    path.devices.push_back(p.peer);
    cur = p.peer;
  }
  return path;
}

}  // namespace fabricsim

// SPDX-License-Identifier: Apache-2.0
#include "memtier.hpp"

#include <algorithm>

#include "error.hpp"

namespace fabricsim {

namespace {

std::uint8_t tier_of(const Device& d) {
  return d.kind == DeviceKind::kAccelerator ? 1 : 2;
}

// Carves `bytes` of `dataset` starting at dataset offset `off` out of the
// free space of devices matching `pred`, ascending id.
std::uint64_t fill(Fabric& f, std::vector<Extent>& out, std::uint64_t off,
                   std::uint64_t bytes, bool (*pred)(const Device&)) {
  for (const Device& d : f.devices()) {
    if (bytes == 0) break;
    if (!f.alive(d.id) || !pred(d)) continue;
    std::uint64_t take = std::min(bytes, f.free_bytes(d.id));
    if (take == 0) continue;
    f.reserve_bytes(d.id, take);
    out.push_back(Extent{d.id, off, take, tier_of(d)});
    off += take;
    bytes -= take;
  }
  return bytes;  // what could not be placed
}

bool is_accel(const Device& d) { return d.kind == DeviceKind::kAccelerator; }
bool is_tray(const Device& d) { return d.kind == DeviceKind::kMemoryTray; }

}  // namespace

const std::vector<Extent>& PlacementMap::extents(
    const std::string& dataset) const {
  auto it = extents_.find(dataset);
  if (it == extents_.end()) {
    raise("unknown-dataset", "no placement for dataset '" + dataset + "'");
  }
  return it->second;
}

PlacementMap place(const std::vector<Dataset>& datasets, Fabric& f,
                   const TierConfig& cfg) {
  (void)cfg;  // the initial layout is policy-independent; temperature acts later
  PlacementMap pm;
  for (const Dataset& ds : datasets) {
    if (ds.bytes == 0) raise("bad-params", "dataset " + ds.id + " is empty");
    std::vector<Extent> ex;
    if (!ds.pinned_device.empty()) {
      DeviceId dev = f.require_device(ds.pinned_device);
      if (f.free_bytes(dev) < ds.bytes) {
        raise("insufficient-memory",
              ds.id + " does not fit on pinned device " + ds.pinned_device);
      }
      f.reserve_bytes(dev, ds.bytes);
      ex.push_back(Extent{dev, 0, ds.bytes, tier_of(f.device(dev))});
    } else if (ds.latency_class == LatencyClass::kCritical) {
      std::uint64_t left = fill(f, ex, 0, ds.bytes, is_accel);
      if (left > 0) {
        // Spill the tail of an oversized critical dataset to the pool.
        left = fill(f, ex, ds.bytes - left, left, is_tray);
      }
      if (left > 0) raise("insufficient-memory", ds.id + " does not fit");
    } else {
      std::uint64_t left = fill(f, ex, 0, ds.bytes, is_tray);
      if (left > 0) raise("insufficient-memory", ds.id + " does not fit");
    }
    pm.set(ds.id, std::move(ex));
  }
  return pm;
}

AccessTarget resolve_access(const PlacementMap& placement,
                            const std::string& dataset, std::uint64_t offset) {
  const auto& ex = placement.extents(dataset);
  for (const Extent& e : ex) {
    if (offset >= e.dataset_offset && offset < e.dataset_offset + e.bytes) {
      return AccessTarget{e, offset - e.dataset_offset};
    }
  }
  raise("bad-offset", "offset " + std::to_string(offset) + " outside dataset '" +
                          dataset + "'");
}

std::uint64_t read_payload_bytes(const Extent& e, std::uint64_t offset_in_extent,
                                 std::uint64_t bytes, const TierConfig& cfg) {
  if (e.tier == 2 && cfg.tier2_protocol == Tier2Protocol::kIoBulkOnly) {
    std::uint64_t blk = cfg.tier2_block_bytes;
    std::uint64_t first = offset_in_extent / blk;
    std::uint64_t last = (offset_in_extent + bytes - 1) / blk;
    return (last - first + 1) * blk;
  }
  return bytes;
}

PendingMigration plan_migration(const PlacementMap& placement, Fabric& f,
                                const std::string& dataset,
                                std::uint8_t to_tier) {
  if (to_tier != 1 && to_tier != 2) raise("bad-params", "tier must be 1 or 2");
  PendingMigration m;
  m.dataset = dataset;
  m.old_extents = placement.extents(dataset);
  std::uint64_t total = 0;
  for (const Extent& e : m.old_extents) total += e.bytes;
  std::uint64_t left =
      fill(f, m.new_extents, 0, total, to_tier == 1 ? is_accel : is_tray);
  if (left > 0) {
    for (const Extent& e : m.new_extents) f.release_bytes(e.device, e.bytes);
    raise("no-capacity", "tier " + std::to_string(to_tier) + " cannot hold " +
                             std::to_string(total) + " bytes of " + dataset);
  }
  // One bulk hop per (old extent x overlapping new extent) slice.
  for (const Extent& oe : m.old_extents) {
    for (const Extent& ne : m.new_extents) {
      std::uint64_t lo = std::max(oe.dataset_offset, ne.dataset_offset);
      std::uint64_t hi = std::min(oe.dataset_offset + oe.bytes,
                                  ne.dataset_offset + ne.bytes);
      if (lo < hi) m.hops.push_back({oe.device, ne.device, hi - lo});
    }
  }
  return m;
}

void commit_migration(PlacementMap& placement, Fabric& f,
                      const PendingMigration& m) {
  for (const Extent& e : m.old_extents) f.release_bytes(e.device, e.bytes);
  placement.set(m.dataset, m.new_extents);
}

bool HeatTracker::touch(const std::string& dataset, SimTime now,
                        const TierConfig& cfg) {
  State& s = state_[dataset];
  if (s.promoted) return false;
  s.touches.push_back(now);
  while (!s.touches.empty() &&
         s.touches.front() + cfg.promotion_window_ns < now) {
    s.touches.pop_front();
  }
  return s.touches.size() >= cfg.promotion_threshold;
}

void HeatTracker::mark_promoted(const std::string& dataset) {
  state_[dataset].promoted = true;
}

}  // namespace fabricsim

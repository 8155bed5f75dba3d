// SPDX-License-Identifier: Apache-2.0
#include "coherence.hpp"

#include <algorithm>

#include "error.hpp"

namespace fabricsim {

Region allocate_region(Fabric& f, const std::vector<DeviceId>& hosts,
                       std::uint64_t size_bytes, RegionMode mode,
                       std::uint32_t line_bytes) {
  if (hosts.empty()) raise("bad-params", "region needs at least one host");
  if (size_bytes == 0 || line_bytes == 0 || size_bytes % line_bytes != 0) {
    raise("bad-params", "region size must be a positive multiple of the line");
  }
  if (mode == RegionMode::kShared && f.cxl_mode() == CxlMode::kV2) {
    raise("sharing-unsupported",
          "shared (multi-writer) regions need the v3 fabric");
  }
  DeviceId tray = kNoDevice;
  for (const Device& d : f.devices()) {
    if (!f.alive(d.id) || d.kind != DeviceKind::kMemoryTray) continue;
    if (f.free_bytes(d.id) >= size_bytes) {
      tray = d.id;
      break;
    }
  }
  if (tray == kNoDevice) {
    raise("no-capacity", "no memory tray with " + std::to_string(size_bytes) +
                             " free bytes");
  }
  f.reserve_bytes(tray, size_bytes);
  Region r;
  r.id = f.next_region_id();
  r.home_tray = tray;
  r.size_bytes = size_bytes;
  r.line_bytes = line_bytes;
  r.mode = mode;
  r.hosts = hosts;
  std::sort(r.hosts.begin(), r.hosts.end());
  return r;
}

Directory::Entry Directory::line_entry(std::uint64_t line) const {
  auto it = lines_.find(line);
  return it == lines_.end() ? Entry{} : it->second;
}

std::vector<CoherenceAction> Directory::access(DeviceId host,
                                               std::uint64_t line,
                                               AccessOp op) {
  if (line >= region_.line_count()) {
    raise("bad-address", "line " + std::to_string(line) + " outside region of " +
                             std::to_string(region_.line_count()) + " lines");
  }
  if (!std::binary_search(region_.hosts.begin(), region_.hosts.end(), host)) {
    raise("not-owner", "host " + std::to_string(host) +
                           " is not attached to region " +
                           std::to_string(region_.id));
  }
  const DeviceId home = region_.home_tray;
  Entry& e = lines_[line];
  std::vector<CoherenceAction> acts;
  auto is_sharer = [&](DeviceId h) {
    return std::find(e.sharers.begin(), e.sharers.end(), h) != e.sharers.end();
  };

  if (op == AccessOp::kRead) {
    switch (e.state) {
      case LineState::kInvalid:
        acts.push_back({CoherenceAction::Type::kFetch, home, host});
        ++stats_.fetches;
        e.state = LineState::kShared;
        e.sharers = {host};
        break;
      case LineState::kShared:
        if (is_sharer(host)) {
          ++stats_.hits;  // already cached, zero messages
        } else {
          acts.push_back({CoherenceAction::Type::kFetch, home, host});
          ++stats_.fetches;
          e.sharers.push_back(host);
          std::sort(e.sharers.begin(), e.sharers.end());
        }
        break;
      case LineState::kModified:
        if (e.owner == host) {
          ++stats_.hits;
        } else {
          // Dirty elsewhere: owner writes back and both end up sharers.
          acts.push_back({CoherenceAction::Type::kWriteBack, e.owner, home});
          ++stats_.writebacks;
          acts.push_back({CoherenceAction::Type::kFetch, home, host});
          ++stats_.fetches;
          e.sharers = {e.owner, host};
          std::sort(e.sharers.begin(), e.sharers.end());
          e.owner = kNoDevice;
          e.state = LineState::kShared;
        }
        break;
    }
    return acts;
  }

  // Write path.
  switch (e.state) {
    case LineState::kInvalid:
      acts.push_back({CoherenceAction::Type::kFetch, home, host});
      ++stats_.fetches;  // read-for-ownership
      break;
    case LineState::kShared:
      for (DeviceId s : e.sharers) {
        if (s == host) continue;
        acts.push_back({CoherenceAction::Type::kBackInvalidate, home, s});
        ++stats_.back_invalidations;
      }
      if (!is_sharer(host)) {
        acts.push_back({CoherenceAction::Type::kFetch, home, host});
        ++stats_.fetches;
      } else if (acts.empty()) {
        ++stats_.hits;  // sole sharer upgrades silently
      }
      break;
    case LineState::kModified:
      if (e.owner == host) {
        ++stats_.hits;  // already exclusive, zero messages
      } else {
        acts.push_back({CoherenceAction::Type::kWriteBack, e.owner, home});
        ++stats_.writebacks;
        acts.push_back({CoherenceAction::Type::kBackInvalidate, home, e.owner});
        ++stats_.back_invalidations;
        acts.push_back({CoherenceAction::Type::kFetch, home, host});
        ++stats_.fetches;
      }
      break;
  }
  e.state = LineState::kModified;
  e.owner = host;
  e.sharers = {host};
  return acts;
}

}  // namespace fabricsim

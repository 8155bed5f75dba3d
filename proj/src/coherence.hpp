// SPDX-License-Identifier: Apache-2.0
//
// Directory-based MSI coherence for pooled memory regions. The directory
// lives with the region's home tray; fetches carry a full line, control
// traffic (back-invalidations) a single flit. Shared (multi-writer) regions
// require the v3 fabric; partitioned regions belong to a single host and by
// construction never generate back-invalidations.
#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "fabric.hpp"
#include "types.hpp"

namespace fabricsim {

enum class RegionMode : std::uint8_t { kPartitioned, kShared };
enum class AccessOp : std::uint8_t { kRead, kWrite };
enum class LineState : std::uint8_t { kInvalid, kShared, kModified };

struct Region {
  RegionId id = 0;
  DeviceId home_tray = kNoDevice;
  std::uint64_t size_bytes = 0;
  std::uint32_t line_bytes = 64;
  RegionMode mode = RegionMode::kPartitioned;
  std::vector<DeviceId> hosts;  // partitioned: exactly one entry

  std::uint64_t line_count() const { return size_bytes / line_bytes; }
};

// Allocates a region on the lowest-id tray with enough free capacity.
// Errors: sharing-unsupported (shared mode on a v2 fabric), no-capacity,
// bad-params (zero size / not line-aligned / no hosts).
Region allocate_region(Fabric& f, const std::vector<DeviceId>& hosts,
                       std::uint64_t size_bytes, RegionMode mode,
                       std::uint32_t line_bytes = 64);

struct CoherenceAction {
  enum class Type : std::uint8_t {
    kFetch,           // home -> requester, one line of data
    kBackInvalidate,  // home -> stale sharer, control flit
    kWriteBack,       // owner -> home, one line of data
  };
  Type type;
  DeviceId src;
  DeviceId dst;
};

struct CoherenceStats {
  std::uint64_t fetches = 0;
  std::uint64_t hits = 0;
  std::uint64_t back_invalidations = 0;  // weighted by displaced sharers
  std::uint64_t writebacks = 0;
};

class Directory {
 public:
  explicit Directory(Region region) : region_(std::move(region)) {}

  const Region& region() const { return region_; }
  const CoherenceStats& stats() const { return stats_; }

  // Applies one host access to a line and returns the protocol messages it
  // triggers, in issue order. Errors: bad-address (line out of range),
  // not-owner (foreign host touching a partitioned region).
  std::vector<CoherenceAction> access(DeviceId host, std::uint64_t line,
                                      AccessOp op);

  struct Entry {
    LineState state = LineState::kInvalid;
    DeviceId owner = kNoDevice;       // valid in kModified
    std::vector<DeviceId> sharers;    // valid in kShared (sorted)
  };
  // Directory entry snapshot (absent lines are Invalid).
  Entry line_entry(std::uint64_t line) const;

 private:
  Region region_;
  CoherenceStats stats_;
  std::unordered_map<std::uint64_t, Entry> lines_;
};

}  // namespace fabricsim

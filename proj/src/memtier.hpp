// SPDX-License-Identifier: Apache-2.0
//
// Two-tier data placement: tier 1 is accelerator-local memory, tier 2 the
// pooled memory trays on the composable fabric. Placement fills devices in
// ascending id order and records reservations on the fabric so capacity is
// conserved. Migration moves whole datasets between tiers with one bulk
// transfer per extent and an atomic switch-over at the end.
#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fabric.hpp"
#include "types.hpp"

namespace fabricsim {

enum class LatencyClass : std::uint8_t { kCritical, kBulk };

struct Dataset {
  std::string id;
  std::uint64_t bytes = 0;
  LatencyClass latency_class = LatencyClass::kBulk;
  std::string kind;            // free-form label (kv_cache, embedding_table...)
  std::string pinned_device;   // non-empty: bypass policy, place here
  std::string source_device;   // initial copies stream from here (bulk init)
};

struct Extent {
  DeviceId device = kNoDevice;
  std::uint64_t dataset_offset = 0;
  std::uint64_t bytes = 0;
  std::uint8_t tier = 2;
};

class PlacementMap {
 public:
  const std::vector<Extent>& extents(const std::string& dataset) const;
  bool has(const std::string& dataset) const {
    return extents_.count(dataset) > 0;
  }
  void set(const std::string& dataset, std::vector<Extent> ex) {
    extents_[dataset] = std::move(ex);
  }
  const std::map<std::string, std::vector<Extent>>& all() const {
    return extents_;
  }

 private:
  std::map<std::string, std::vector<Extent>> extents_;
};

enum class Tier2Protocol : std::uint8_t {
  kMemCoherent,  // load/store + cache protocol available
  kMemOnly,      // load/store, no caching protocol
  kIoBulkOnly,   // block DMA only: reads round up to whole blocks
};

enum class PlacePolicy : std::uint8_t { kStaticClass, kTemperature };

struct TierConfig {
  PlacePolicy policy = PlacePolicy::kStaticClass;
  Tier2Protocol tier2_protocol = Tier2Protocol::kMemCoherent;
  std::uint32_t promotion_threshold = 4;       // touches within the window
  SimTime promotion_window_ns = 1'000'000;     // 1 ms
  std::uint32_t tier2_block_bytes = 4096;
};

// Places every dataset, reserving capacity on the fabric. Critical datasets
// fill tier 1 and spill to tier 2; bulk datasets go straight to tier 2.
// Raises insufficient-memory when capacity runs out.
PlacementMap place(const std::vector<Dataset>& datasets, Fabric& f,
                   const TierConfig& cfg);

struct AccessTarget {
  Extent extent;
  std::uint64_t offset_in_extent = 0;
};

// Maps (dataset, offset) to the extent holding that byte.
// Raises bad-offset / unknown-dataset.
AccessTarget resolve_access(const PlacementMap& placement,
                            const std::string& dataset, std::uint64_t offset);

// Payload a read of [offset, offset+bytes) actually moves, honoring the
// tier-2 block protocol (whole blocks under kIoBulkOnly).
std::uint64_t read_payload_bytes(const Extent& e, std::uint64_t offset_in_extent,
                                 std::uint64_t bytes, const TierConfig& cfg);

// A planned migration: new extents are already reserved; commit() swaps the
// placement and releases the old reservation. Nothing about the placement
// changes until commit.
struct PendingMigration {
  std::string dataset;
  std::vector<Extent> old_extents;
  std::vector<Extent> new_extents;
  // Planned bulk transfers (old extent device -> new extent device, bytes).
  struct Hop {
    DeviceId src, dst;
    std::uint64_t bytes;
  };
  std::vector<Hop> hops;
};

// Plans a migration of `dataset` to `to_tier` (1 or 2). Raises no-capacity
// when the destination tier cannot hold it, unknown-dataset otherwise.
PendingMigration plan_migration(const PlacementMap& placement, Fabric& f,
                                const std::string& dataset,
                                std::uint8_t to_tier);
void commit_migration(PlacementMap& placement, Fabric& f,
                      const PendingMigration& m);

// Sliding-window access counter driving temperature-based promotion.
class HeatTracker {
 public:
  // Records a touch; returns true when the dataset crossed the promotion
  // threshold inside the window (fires once until reset).
  bool touch(const std::string& dataset, SimTime now, const TierConfig& cfg);
  void mark_promoted(const std::string& dataset);

 private:
  struct State {
    std::deque<SimTime> touches;
    bool promoted = false;
  };
  std::map<std::string, State> state_;
};

}  // namespace fabricsim

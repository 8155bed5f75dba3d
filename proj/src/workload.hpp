// SPDX-License-Identifier: Apache-2.0
//
// Workload generators emit explicit task graphs (compute, message, coherent
// region access, migration commit) with dependency edges; the executor is
// free to overlap anything the edges allow. Generators are deterministic
// given their parameters and RNG state.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "coherence.hpp"
#include "fabric.hpp"
#include "memtier.hpp"
#include "protocol.hpp"
#include "types.hpp"

namespace fabricsim {

enum class TaskKind : std::uint8_t {
  kCompute,
  kMessage,
  kRegionAccess,
  kCommit,  // migration switch-over
};

struct Task {
  TaskId id = 0;
  TaskKind kind = TaskKind::kCompute;
  std::string phase;
  DeviceId device = kNoDevice;  // compute: executor; message: src; access: host
  SimTime duration_ns = 0;
  // message fields
  DeviceId dst = kNoDevice;
  std::uint64_t payload_bytes = 0;
  MsgKind mkind = MsgKind::kDmaBulk;
  bool force_rdma = false;
  // Dataset-bound messages: non-empty `dataset` defers endpoint resolution
  // to execution time (placement may migrate mid-run). rop gives direction:
  // reads flow extent -> device, writes device -> extent.
  std::string dataset;
  std::uint64_t dataset_offset = 0;
  // region-access fields
  RegionId region = 0;
  std::uint64_t line = 0;
  AccessOp rop = AccessOp::kRead;
  // commit fields
  std::uint32_t migration = 0;
  std::vector<TaskId> deps;
};

struct TaskGraph {
  std::vector<Task> tasks;
  std::vector<Region> regions;
  std::vector<PendingMigration> migrations;

  TaskId add(Task t);
  TaskId add_compute(DeviceId device, SimTime duration,
                     std::vector<TaskId> deps, std::string phase);
  TaskId add_message(DeviceId src, DeviceId dst, std::uint64_t bytes,
                     MsgKind kind, std::vector<TaskId> deps, std::string phase,
                     bool force_rdma = false);
  TaskId add_region_access(RegionId region, DeviceId host, std::uint64_t line,
                           AccessOp op, std::vector<TaskId> deps,
                           std::string phase);
  TaskId add_dataset_access(DeviceId device, std::string dataset,
                            std::uint64_t offset, std::uint64_t bytes,
                            AccessOp op, std::vector<TaskId> deps,
                            std::string phase);

  bool is_acyclic() const;
  // Payload bytes of message tasks originating at each device.
  std::uint64_t sent_payload_bytes(DeviceId device) const;
};

// ---------------------------------------------------------------------------
// collectives

enum class CollectiveAlgo : std::uint8_t { kRing, kTree };
enum class CollectiveOp : std::uint8_t { kAllReduce, kAllGather, kReduceScatter };

struct CollectiveParams {
  std::vector<DeviceId> group;
  std::uint64_t bytes = 0;  // tensor size (total gathered size for all_gather)
  CollectiveAlgo algo = CollectiveAlgo::kRing;
  CollectiveOp op = CollectiveOp::kAllReduce;
};

// Emits a collective whose first sends depend on entry_deps[rank] (parallel
// vectors; empty = start immediately). Returns one sink per rank: the task
// completing that rank's participation.
std::vector<TaskId> gen_collective(TaskGraph& g, const CollectiveParams& p,
                                   const std::vector<std::vector<TaskId>>& entry_deps,
                                   const std::string& phase);

// ---------------------------------------------------------------------------
// model-parallel training step

struct TrainingParams {
  std::uint32_t tp = 1, pp = 1, dp = 1;
  std::uint32_t ep_experts = 1;
  std::uint32_t layers = 1;
  SimTime compute_ns_per_layer = 1000;
  std::uint64_t bytes_tp_sync = 0;
  std::uint64_t bytes_pp_activation = 0;
  std::uint64_t bytes_dp_gradient = 0;
  std::uint64_t bytes_ep_dispatch = 0;
};

// Maps ranks onto `devices` with TP innermost (contiguous), then PP, then DP.
// Raises mapping-failure when devices are too few.
std::vector<TaskId> gen_training_step(TaskGraph& g, const TrainingParams& p,
                                      const std::vector<DeviceId>& devices,
                                      const std::string& phase);

// ---------------------------------------------------------------------------
// inference + data-path generators

struct KvDecodeParams {
  DeviceId device = kNoDevice;
  std::uint32_t tokens = 1;
  std::uint64_t kv_bytes_per_token = 0;
  SimTime compute_ns_per_token = 0;
  std::string dataset = "kv";
};
std::vector<TaskId> gen_kv_decode(TaskGraph& g, const KvDecodeParams& p,
                                  const PlacementMap& placement,
                                  const TierConfig& cfg,
                                  const std::string& phase);

struct RagParams {
  std::vector<DeviceId> group;
  std::uint32_t queries = 1;
  std::uint32_t probes_per_query = 0;
  std::uint64_t vector_bytes = 512;
  std::uint64_t context_bytes = 0;
  SimTime llm_compute_ns = 0;
  std::string dataset = "kb";
};
// Retrieval step per query: a chained probe walk over the index (each probe's
// slot comes from the previous fetch), one context read, then compute.
// Queries round-robin over the group and chain per device.
std::vector<TaskId> gen_rag(TaskGraph& g, const RagParams& p,
                            const PlacementMap& placement,
                            const TierConfig& cfg, std::mt19937_64& rng,
                            const std::vector<TaskId>& entry_deps,
                            const std::string& phase);

struct MpiHaloParams {
  std::uint32_t px = 1, py = 1;
  std::uint64_t halo_bytes = 0;
  std::uint32_t iterations = 1;
  SimTime compute_ns = 0;
  enum class Mode : std::uint8_t { kMessage, kSharedMemory } mode = Mode::kMessage;
};
// Ranks map row-major onto `ranks`. Shared-memory mode allocates one region
// per directed neighbor pair and exchanges through coherent store/load;
// message mode sends explicit (RDMA) halo messages.
std::vector<TaskId> gen_mpi_halo(TaskGraph& g, const MpiHaloParams& p,
                                 Fabric& f, const std::vector<DeviceId>& ranks,
                                 const std::string& phase);

// Synchronous chunked copy of a dataset from its source device into its
// placed extents (bulk initialization: chunk n+1 issues after chunk n lands).
std::vector<TaskId> gen_bulk_copy(TaskGraph& g, const std::string& dataset,
                                  DeviceId source, std::uint64_t chunk_bytes,
                                  std::uint64_t total_bytes,
                                  const PlacementMap& placement,
                                  const std::vector<TaskId>& entry_deps,
                                  const std::string& phase);

// Explicit tier migration: one bulk message per planned hop, then an atomic
// commit task that swaps the placement. Returns the commit task.
TaskId gen_migration(TaskGraph& g, PendingMigration m,
                     const std::vector<TaskId>& entry_deps,
                     const std::string& phase);

}  // namespace fabricsim

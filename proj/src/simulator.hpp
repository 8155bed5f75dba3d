// SPDX-License-Identifier: Apache-2.0
//
// Task-graph executor. Walks the dependency graph over the event engine:
// compute tasks queue FIFO on their device, messages resolve a route and
// occupy every link of each technology segment for its serialization window
// (cut-through within a segment, store-and-forward at bridges), dataset
// accesses bind to extents at execution time so migrations redirect later
// traffic, and coherent region accesses expand into the directory's protocol
// messages. Messages between devices with no fabric path fall back to the
// scale-out (RDMA) model through their NICs.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "coherence.hpp"
#include "engine.hpp"
#include "fabric.hpp"
#include "memtier.hpp"
#include "metrics.hpp"
#include "protocol.hpp"
#include "routing.hpp"
#include "workload.hpp"

namespace fabricsim {

struct SimConfig {
  std::string name;
  std::string workload_tag;
  std::uint64_t seed = 1;
  RoutingPolicy routing = RoutingPolicy::kHbr;
  RdmaParams rdma;
  TierConfig tier;
  std::uint32_t bridge_capacity = 1024;
  SimTime bridge_hit_ns = 20;
  SimTime bridge_miss_ns = 80;
};

struct TransferFlight;

class Simulator {
 public:
  // The fabric and placement are mutated (reservations, migrations).
  Simulator(Fabric& f, const TaskGraph& g, PlacementMap& placement,
            SimConfig cfg);

  RunReport run();

  const Engine& engine() const { return engine_; }

 private:
  struct TaskState {
    std::uint32_t pending = 0;
    SimTime ready_comm = 0;     // latest finish among communication deps
    SimTime ready_compute = 0;  // latest finish among compute deps
    SimTime finish = -1;
    bool done = false;
  };

  void start_task(TaskId tid);
  void finish_task(TaskId tid, SimTime t);
  void run_compute(const Task& t);
  void run_message(const Task& t);
  void run_dataset_access(const Task& t);
  void run_region_access(const Task& t);
  void run_commit(const Task& t);

  // Launches one point-to-point transfer at engine_.now(); `done` fires at
  // completion time (media included on the serving side).
  using DoneFn = std::function<void(SimTime)>;
  void launch_transfer(const Message& m, bool force_rdma, DoneFn done);
  void fabric_transfer(const Message& m, SimTime send_t, DoneFn done);
  void segment_step(std::shared_ptr<TransferFlight> fl);
  void rdma_transfer(const Message& m, SimTime send_t, DoneFn done);
  void maybe_promote(const std::string& dataset);

  Fabric& fabric_;
  const TaskGraph& graph_;
  PlacementMap& placement_;
  SimConfig cfg_;
  Engine engine_;
  RouteTable routes_;
  LoadFn loads_;
  int rdma_tech_ = -1;

  std::vector<TaskState> state_;
  std::vector<std::vector<TaskId>> dependents_;
  std::vector<Directory> directories_;
  std::map<RegionId, std::size_t> directory_index_;
  std::map<DeviceId, BridgeState> bridges_;
  HeatTracker heat_;
  std::map<DeviceId, SimTime> exposed_comm_;

  RunReport report_;
};

// Composes the end-to-end run: validates the fabric (raising the first
// violation as an error), places datasets, builds routes and executes.
RunReport execute(Fabric& f, const TaskGraph& g, PlacementMap& placement,
                  const SimConfig& cfg);

}  // namespace fabricsim

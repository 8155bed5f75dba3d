// SPDX-License-Identifier: Apache-2.0
#include "simulator.hpp"

#include <algorithm>
#include <span>

#include "error.hpp"

namespace fabricsim {

namespace {

// Occupancy keys for non-link resources (links use link_key, NICs nic_key).
constexpr std::uint64_t compute_key(DeviceId d) { return (1ull << 63) | d; }
constexpr std::uint64_t media_key(DeviceId d) { return (3ull << 62) | d; }

}  // namespace

Simulator::Simulator(Fabric& f, const TaskGraph& g, PlacementMap& placement,
                     SimConfig cfg)
    : fabric_(f),
      graph_(g),
      placement_(placement),
      cfg_(std::move(cfg)),
      routes_(build_routes(f, cfg_.routing, /*require_connected=*/false)) {
  loads_ = [this](LinkId l, bool rev) {
    return engine_.queued_bytes(link_key(l, rev));
  };
  rdma_tech_ = fabric_.tech_index("RDMA-NIC");

  state_.resize(graph_.tasks.size());
  dependents_.resize(graph_.tasks.size());
  for (const Task& t : graph_.tasks) {
    state_[t.id].pending = static_cast<std::uint32_t>(t.deps.size());
    for (TaskId d : t.deps) dependents_[d].push_back(t.id);
  }
  directories_.reserve(graph_.regions.size());
  for (const Region& r : graph_.regions) {
    directory_index_[r.id] = directories_.size();
    directories_.emplace_back(r);
  }
}

RunReport Simulator::run() {
  report_.name = cfg_.name;
  report_.workload_tag = cfg_.workload_tag;
  report_.seed = cfg_.seed;
  report_.routing = cfg_.routing == RoutingPolicy::kHbr ? "hbr" : "pbr";

  for (const Task& t : graph_.tasks) {
    if (state_[t.id].pending == 0) {
      TaskId tid = t.id;
      engine_.schedule(0, [this, tid] { start_task(tid); });
    }
  }
  engine_.run();

  SimTime makespan = 0;
  for (const TaskState& s : state_) makespan = std::max(makespan, s.finish);
  report_.makespan_ns = makespan;

  // Per-direction link stats, in link id order.
  const auto& use = engine_.resource_use();
  for (const Link& l : fabric_.links()) {
    if (!fabric_.link_alive(l.id)) continue;
    for (bool rev : {false, true}) {
      LinkStat ls;
      ls.name = fabric_.device(rev ? l.b : l.a).name + "->" +
                fabric_.device(rev ? l.a : l.b).name;
      auto it = use.find(link_key(l.id, rev));
      if (it != use.end()) {
        ls.busy_ns = it->second.busy_ns;
        ls.wire_bytes = it->second.bytes;
        report_.wire_bytes += it->second.bytes;
        ls.utilization = makespan > 0 ? static_cast<double>(ls.busy_ns) /
                                            static_cast<double>(makespan)
                                      : 0.0;
      }
      report_.links.push_back(std::move(ls));
    }
  }
  for (const Device& d : fabric_.devices()) {
    if (!fabric_.alive(d.id)) continue;
    if (d.kind != DeviceKind::kAccelerator && d.kind != DeviceKind::kHostCpu) {
      continue;
    }
    DeviceStat ds;
    ds.name = d.name;
    auto it = use.find(compute_key(d.id));
    if (it != use.end()) ds.compute_busy_ns = it->second.busy_ns;
    auto ex = exposed_comm_.find(d.id);
    if (ex != exposed_comm_.end()) ds.exposed_comm_ns = ex->second;
    report_.devices.push_back(std::move(ds));
  }
  for (const Directory& dir : directories_) {
    report_.coherence.fetches += dir.stats().fetches;
    report_.coherence.hits += dir.stats().hits;
    report_.coherence.back_invalidations += dir.stats().back_invalidations;
    report_.coherence.writebacks += dir.stats().writebacks;
  }
  for (const auto& [dev, bs] : bridges_) {
    report_.bridge_hits += bs.hits();
    report_.bridge_misses += bs.misses();
  }
  return report_;
}

void Simulator::start_task(TaskId tid) {
  const Task& t = graph_.tasks[tid];
  if (!t.phase.empty()) {
    SimTime now = engine_.now();
    auto [it, inserted] = report_.phases.try_emplace(t.phase, PhaseSpan{now, now});
    if (!inserted) it->second.start_ns = std::min(it->second.start_ns, now);
  }
  switch (t.kind) {
    case TaskKind::kCompute:
      run_compute(t);
      break;
    case TaskKind::kMessage:
      if (t.dataset.empty()) {
        run_message(t);
      } else {
        run_dataset_access(t);
      }
      break;
    case TaskKind::kRegionAccess:
      run_region_access(t);
      break;
    case TaskKind::kCommit:
      run_commit(t);
      break;
  }
}

void Simulator::finish_task(TaskId tid, SimTime t) {
  TaskState& st = state_[tid];
  st.done = true;
  st.finish = t;
  const Task& task = graph_.tasks[tid];
  if (!task.phase.empty()) {
    auto& span = report_.phases[task.phase];
    span.end_ns = std::max(span.end_ns, t);
  }
  bool compute_dep = task.kind == TaskKind::kCompute;
  for (TaskId d : dependents_[tid]) {
    TaskState& ds = state_[d];
    if (compute_dep) {
      ds.ready_compute = std::max(ds.ready_compute, t);
    } else {
      ds.ready_comm = std::max(ds.ready_comm, t);
    }
    if (--ds.pending == 0) {
      engine_.schedule(t, [this, d] { start_task(d); });
    }
  }
}

void Simulator::run_compute(const Task& t) {
  TaskId tid = t.id;
  std::uint64_t key = compute_key(t.device);
  SimTime prev_busy = 0;
  auto it = engine_.resource_use().find(key);
  if (it != engine_.resource_use().end()) prev_busy = it->second.busy_until;
  Engine::Grant g =
      engine_.acquire_window(std::span<const std::uint64_t>(&key, 1),
                             t.duration_ns, 0);
  // Stall the device could not hide: everything past the moment it was free
  // and its compute inputs were ready is exposed communication time.
  SimTime would_start = std::max(state_[tid].ready_compute, prev_busy);
  exposed_comm_[t.device] += g.start - would_start;
  SimTime end = g.end;
  engine_.schedule(end, [this, tid, end] { finish_task(tid, end); });
}

void Simulator::run_message(const Task& t) {
  TaskId tid = t.id;
  Message m{t.device, t.dst, t.payload_bytes, t.mkind};
  launch_transfer(m, t.force_rdma,
                  [this, tid](SimTime done_t) { finish_task(tid, done_t); });
}

void Simulator::run_dataset_access(const Task& t) {
  TaskId tid = t.id;
  if (t.rop == AccessOp::kRead && cfg_.tier.policy == PlacePolicy::kTemperature) {
    if (heat_.touch(t.dataset, engine_.now(), cfg_.tier)) {
      maybe_promote(t.dataset);
    }
  }
  // Bind to extents now; migrations committed earlier redirect this access.
  std::vector<Message> msgs;
  std::uint64_t off = t.dataset_offset;
  std::uint64_t remaining = t.payload_bytes;
  while (remaining > 0) {
    AccessTarget at = resolve_access(placement_, t.dataset, off);
    std::uint64_t in_extent =
        std::min(remaining, at.extent.bytes - at.offset_in_extent);
    if (t.rop == AccessOp::kRead) {
      std::uint64_t payload =
          read_payload_bytes(at.extent, at.offset_in_extent, in_extent,
                             cfg_.tier);
      MsgKind kind = payload <= 256 ? MsgKind::kLoad : MsgKind::kDmaBulk;
      msgs.push_back(Message{at.extent.device, t.device, payload, kind});
    } else {
      msgs.push_back(Message{t.device, at.extent.device, in_extent,
                             MsgKind::kStore});
    }
    off += in_extent;
    remaining -= in_extent;
  }
  auto left = std::make_shared<std::size_t>(msgs.size());
  auto latest = std::make_shared<SimTime>(0);
  for (const Message& m : msgs) {
    launch_transfer(m, false, [this, tid, left, latest](SimTime done_t) {
      *latest = std::max(*latest, done_t);
      if (--*left == 0) finish_task(tid, *latest);
    });
  }
}

void Simulator::run_region_access(const Task& t) {
  TaskId tid = t.id;
  auto idx = directory_index_.find(t.region);
  if (idx == directory_index_.end()) {
    raise("bad-params", "task references unknown region");
  }
  Directory& dir = directories_[idx->second];
  std::vector<CoherenceAction> actions = dir.access(t.device, t.line, t.rop);
  if (actions.empty()) {
    finish_task(tid, engine_.now());
    return;
  }
  const std::uint32_t line_bytes = dir.region().line_bytes;
  std::vector<Message> first, fetches;
  for (const CoherenceAction& a : actions) {
    switch (a.type) {
      case CoherenceAction::Type::kFetch:
        fetches.push_back(Message{a.src, a.dst, line_bytes, MsgKind::kLoad});
        break;
      case CoherenceAction::Type::kWriteBack:
        first.push_back(Message{a.src, a.dst, line_bytes, MsgKind::kStore});
        break;
      case CoherenceAction::Type::kBackInvalidate:
        first.push_back(Message{a.src, a.dst, 0, MsgKind::kCoherenceCtrl});
        break;
    }
  }
  // Invalidations/writebacks fly in parallel; a fetch after a writeback waits
  // for it (the dirty-miss penalty), otherwise fetches go out immediately.
  bool fetch_after = std::any_of(actions.begin(), actions.end(), [](auto& a) {
    return a.type == CoherenceAction::Type::kWriteBack;
  });
  auto launch_group = [this](std::vector<Message> msgs, DoneFn done) {
    auto left = std::make_shared<std::size_t>(msgs.size());
    auto latest = std::make_shared<SimTime>(0);
    for (const Message& m : msgs) {
      launch_transfer(m, false, [left, latest, done](SimTime done_t) {
        *latest = std::max(*latest, done_t);
        if (--*left == 0) done(*latest);
      });
    }
  };
  if (!fetch_after) {
    for (auto& m : fetches) first.push_back(m);
    fetches.clear();
  }
  if (fetches.empty()) {
    launch_group(std::move(first),
                 [this, tid](SimTime t2) { finish_task(tid, t2); });
    return;
  }
  if (first.empty()) {
    launch_group(std::move(fetches),
                 [this, tid](SimTime t2) { finish_task(tid, t2); });
    return;
  }
  launch_group(std::move(first),
               [this, tid, fetches, launch_group](SimTime) {
                 launch_group(fetches, [this, tid](SimTime t2) {
                   finish_task(tid, t2);
                 });
               });
}

void Simulator::run_commit(const Task& t) {
  TaskId tid = t.id;
  commit_migration(placement_, fabric_, graph_.migrations.at(t.migration));
  finish_task(tid, engine_.now());
}

void Simulator::maybe_promote(const std::string& dataset) {
  const auto& extents = placement_.extents(dataset);
  bool any_tier2 = std::any_of(extents.begin(), extents.end(),
                               [](const Extent& e) { return e.tier == 2; });
  if (!any_tier2) {
    heat_.mark_promoted(dataset);
    return;
  }
  PendingMigration plan;
  try {
    plan = plan_migration(placement_, fabric_, dataset, 1);
  } catch (const SimError&) {
    // Tier 1 is full; stop tracking instead of retrying every access.
    heat_.mark_promoted(dataset);
    return;
  }
  heat_.mark_promoted(dataset);
  auto pm = std::make_shared<PendingMigration>(std::move(plan));
  std::vector<PendingMigration::Hop> moves;
  for (const auto& h : pm->hops) {
    if (h.src != h.dst && h.bytes > 0) moves.push_back(h);
  }
  if (moves.empty()) {
    commit_migration(placement_, fabric_, *pm);
    return;
  }
  auto left = std::make_shared<std::size_t>(moves.size());
  for (const auto& h : moves) {
    Message m{h.src, h.dst, h.bytes, MsgKind::kDmaBulk};
    launch_transfer(m, false, [this, pm, left](SimTime) {
      if (--*left == 0) commit_migration(placement_, fabric_, *pm);
    });
  }
}

void Simulator::launch_transfer(const Message& m, bool force_rdma, DoneFn done) {
  ++report_.messages;
  report_.bytes_injected += m.payload_bytes;
  SimTime now = engine_.now();
  const Device& src = fabric_.device(m.src);
  const Device& dst = fabric_.device(m.dst);
  // One media charge per transfer, on the side whose memory serves it.
  bool is_read = m.kind == MsgKind::kLoad || m.kind == MsgKind::kDmaBulk;
  SimTime src_media = is_read ? src.mem_latency_ns : 0;
  SimTime dst_media = m.kind == MsgKind::kStore ? dst.mem_latency_ns : 0;

  if (m.src == m.dst) {
    SimTime end = now;
    if (src.local_mem_bytes_per_us > 0) {
      Engine::Grant g =
          engine_.acquire(media_key(m.src), m.payload_bytes,
                          src.local_mem_bytes_per_us);
      end = g.end;
    }
    SimTime done_t = end + src.mem_latency_ns;
    report_.bytes_delivered += m.payload_bytes;
    engine_.schedule(done_t, [done, done_t] { done(done_t); });
    return;
  }

  bool on_fabric = !force_rdma && routes_.reachable(m.src, m.dst);
  if (!on_fabric && !force_rdma &&
      (src.nic == kNoDevice || dst.nic == kNoDevice)) {
    raise("unreachable", "no fabric path or NIC pair between " + src.name +
                             " and " + dst.name);
  }
  SimTime send_t = now + src_media;
  if (on_fabric) {
    engine_.schedule(send_t, [this, m, send_t, dst_media,
                              done = std::move(done)] {
      fabric_transfer(m, send_t, [this, dst_media, done](SimTime delivery) {
        SimTime done_t = delivery + dst_media;
        engine_.schedule(done_t, [done, done_t] { done(done_t); });
      });
    });
  } else {
    engine_.schedule(send_t, [this, m, send_t, dst_media,
                              done = std::move(done)] {
      rdma_transfer(m, send_t, [this, dst_media, done](SimTime delivery) {
        SimTime done_t = delivery + dst_media;
        engine_.schedule(done_t, [done, done_t] { done(done_t); });
      });
    });
  }
}

// In-flight fabric transfer walking its technology segments.
struct TransferFlight {
  Message m;
  SimTime send_t = 0;
  std::vector<PathSegment> segs;
  std::vector<std::vector<std::uint64_t>> keys;  // directed link keys per seg
  std::vector<SimTime> ser;
  std::vector<std::uint64_t> wire;
  std::size_t i = 0;
  std::function<void(SimTime)> deliver;
};

void Simulator::fabric_transfer(const Message& m, SimTime send_t, DoneFn done) {
  RoutePath path = routes_.resolve(fabric_, m.src, m.dst, loads_);
  auto st = std::make_shared<TransferFlight>();
  st->m = m;
  st->send_t = send_t;
  st->segs = split_segments(fabric_, path);
  st->deliver = std::move(done);
  std::size_t li = 0;
  for (const PathSegment& seg : st->segs) {
    std::vector<std::uint64_t> keys;
    for (LinkId l : seg.links) {
      bool rev = fabric_.link(l).a != path.devices[li];
      keys.push_back(link_key(l, rev));
      ++li;
    }
    st->keys.push_back(std::move(keys));
    SegmentCost sc = segment_message(m, fabric_.tech(seg.tech));
    st->ser.push_back(serialization_ns(sc.wire_bytes,
                                       seg.bottleneck_bytes_per_us));
    st->wire.push_back(sc.wire_bytes);
  }
  segment_step(std::move(st));
}

// One segment per invocation: occupy its links for the serialization window,
// arrive after the segment latency, convert at a bridge if one separates
// this segment from the next, then continue with the next segment.
void Simulator::segment_step(std::shared_ptr<TransferFlight> fl) {
  const PathSegment& seg = fl->segs[fl->i];
  Engine::Grant g = engine_.acquire_window(
      std::span<const std::uint64_t>(fl->keys[fl->i]), fl->ser[fl->i],
      fl->wire[fl->i]);
  SimTime arrival = g.end + seg.latency_ns;
  bool last = fl->i + 1 == fl->segs.size();
  engine_.schedule(arrival, [this, fl, arrival, last] {
    if (last) {
      report_.record_latency(arrival - fl->send_t);
      report_.bytes_delivered += fl->m.payload_bytes;
      fl->deliver(arrival);
      return;
    }
    const PathSegment& seg = fl->segs[fl->i];
    SimTime conv = 0;
    if (seg.bridge_after != kNoDevice) {
      auto [it, ignored] = bridges_.try_emplace(
          seg.bridge_after,
          BridgeState(cfg_.bridge_capacity, cfg_.bridge_hit_ns,
                      cfg_.bridge_miss_ns));
      conv = it->second.convert(
          (static_cast<std::uint64_t>(fl->m.src) << 32) | fl->m.dst);
    }
    ++fl->i;
    engine_.schedule(arrival + conv, [this, fl] { segment_step(fl); });
  });
}

void Simulator::rdma_transfer(const Message& m, SimTime send_t, DoneFn done) {
  WireCost cost = rdma_cost(fabric_, m, cfg_.rdma);
  const Device& src = fabric_.device(m.src);
  Engine::Grant g = engine_.acquire(nic_key(src.nic), cost.wire_bytes,
                                    fabric_.tech(rdma_tech_).bytes_per_us);
  SimTime delivery = g.end + (cost.total_ns - cost.serialization_ns);
  ++report_.rdma_messages;
  engine_.schedule(delivery, [this, m, send_t, delivery,
                              done = std::move(done)] {
    report_.record_latency(delivery - send_t);
    report_.bytes_delivered += m.payload_bytes;
    done(delivery);
  });
}

RunReport execute(Fabric& f, const TaskGraph& g, PlacementMap& placement,
                  const SimConfig& cfg) {
  std::vector<Violation> violations = f.validate();
  if (!violations.empty()) {
    const Violation& v = violations.front();
    raise(v.code.c_str(), v.subject + ": " + v.detail);
  }
  if (!g.is_acyclic()) {
    raise("cyclic-graph", "task graph has a dependency cycle");
  }
  Simulator sim(f, g, placement, cfg);
  return sim.run();
}

}  // namespace fabricsim

// SPDX-License-Identifier: Apache-2.0
#include "workload.hpp"

#include <algorithm>
#include <map>

#include "error.hpp"

namespace fabricsim {

TaskId TaskGraph::add(Task t) {
  t.id = static_cast<TaskId>(tasks.size());
  tasks.push_back(std::move(t));
  return tasks.back().id;
}

TaskId TaskGraph::add_compute(DeviceId device, SimTime duration,
                              std::vector<TaskId> deps, std::string phase) {
  Task t;
  t.kind = TaskKind::kCompute;
  t.device = device;
  t.duration_ns = duration;
  t.deps = std::move(deps);
  t.phase = std::move(phase);
  return add(std::move(t));
}

TaskId TaskGraph::add_message(DeviceId src, DeviceId dst, std::uint64_t bytes,
                              MsgKind kind, std::vector<TaskId> deps,
                              std::string phase, bool force_rdma) {
  Task t;
  t.kind = TaskKind::kMessage;
  t.device = src;
  t.dst = dst;
  t.payload_bytes = bytes;
  t.mkind = kind;
  t.force_rdma = force_rdma;
  t.deps = std::move(deps);
  t.phase = std::move(phase);
  return add(std::move(t));
}

TaskId TaskGraph::add_region_access(RegionId region, DeviceId host,
                                    std::uint64_t line, AccessOp op,
                                    std::vector<TaskId> deps,
                                    std::string phase) {
  Task t;
  t.kind = TaskKind::kRegionAccess;
  t.device = host;
  t.region = region;
  t.line = line;
  t.rop = op;
  t.deps = std::move(deps);
  t.phase = std::move(phase);
  return add(std::move(t));
}

TaskId TaskGraph::add_dataset_access(DeviceId device, std::string dataset,
                                     std::uint64_t offset, std::uint64_t bytes,
                                     AccessOp op, std::vector<TaskId> deps,
                                     std::string phase) {
  if (bytes == 0) raise("empty-message", "zero-byte dataset access");
  Task t;
  t.kind = TaskKind::kMessage;
  t.device = device;
  t.dataset = std::move(dataset);
  t.dataset_offset = offset;
  t.payload_bytes = bytes;
  t.rop = op;
  t.deps = std::move(deps);
  t.phase = std::move(phase);
  return add(std::move(t));
}

bool TaskGraph::is_acyclic() const {
  // Tasks only ever depend on already-created tasks, so id order is a
  // topological order; verify that invariant held.
  for (const Task& t : tasks) {
    for (TaskId d : t.deps) {
      if (d >= t.id) return false;
    }
  }
  return true;
}

std::uint64_t TaskGraph::sent_payload_bytes(DeviceId device) const {
  std::uint64_t total = 0;
  for (const Task& t : tasks) {
    if (t.kind == TaskKind::kMessage && t.device == device) {
      total += t.payload_bytes;
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// collectives

namespace {

// Chunk sizes for splitting `bytes` across n ranks: first (bytes % n) chunks
// get one extra byte, so sizes differ by at most one.
std::vector<std::uint64_t> ring_chunks(std::uint64_t bytes, std::size_t n) {
  std::vector<std::uint64_t> c(n, bytes / n);
  for (std::size_t i = 0; i < bytes % n; ++i) ++c[i];
  return c;
}

MsgKind collective_msg_kind(std::uint64_t bytes) {
  return bytes <= 256 ? MsgKind::kLoad : MsgKind::kDmaBulk;
}

// Ring phase: in step s, rank i forwards chunk (i - s mod n) to rank i+1;
// each send depends on having received that chunk in the previous step.
// Returns the send task of (rank, step) for dependency stitching.
std::vector<std::vector<TaskId>> ring_phase(
    TaskGraph& g, const std::vector<DeviceId>& group,
    const std::vector<std::uint64_t>& chunks, std::size_t steps, int chunk_shift,
    const std::vector<std::vector<TaskId>>& first_step_deps,
    const std::string& phase) {
  const std::size_t n = group.size();
  std::vector<std::vector<TaskId>> sends(steps,
                                         std::vector<TaskId>(n, kNoDevice));
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t chunk = (i + n - s % n + static_cast<std::size_t>(chunk_shift)) % n;
      if (chunks[chunk] == 0) continue;  // degenerate tiny tensor
      std::vector<TaskId> deps;
      if (s == 0) {
        deps = first_step_deps.empty() ? std::vector<TaskId>{}
                                       : first_step_deps[i];
      } else {
        TaskId prev = sends[s - 1][(i + n - 1) % n];
        if (prev != kNoDevice) deps.push_back(prev);
      }
      sends[s][i] = g.add_message(group[i], group[(i + 1) % n], chunks[chunk],
                                  collective_msg_kind(chunks[chunk]),
                                  std::move(deps), phase);
    }
  }
  return sends;
}

std::vector<TaskId> ring_sinks(const std::vector<std::vector<TaskId>>& sends,
                               std::size_t n,
                               const std::vector<std::vector<TaskId>>& entry) {
  // A rank is done when the last message it receives has landed: the final
  // step's send from its ring predecessor.
  std::vector<TaskId> sinks(n, kNoDevice);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = sends.size(); s-- > 0;) {
      TaskId recv = sends[s][(i + n - 1) % n];
      if (recv != kNoDevice) {
        sinks[i] = recv;
        break;
      }
    }
    if (sinks[i] == kNoDevice && !entry.empty() && !entry[i].empty()) {
      sinks[i] = entry[i].back();
    }
  }
  return sinks;
}

std::vector<TaskId> gen_tree_all_reduce(
    TaskGraph& g, const std::vector<DeviceId>& group, std::uint64_t bytes,
    const std::vector<std::vector<TaskId>>& entry, const std::string& phase) {
  const std::size_t n = group.size();
  std::size_t phases = 0;
  while ((1ull << phases) < n) ++phases;
  // last[i]: most recent task rank i must wait on before acting again
  std::vector<std::vector<TaskId>> last(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!entry.empty()) last[i] = entry[i];
  }
  // Reduce up the binomial tree.
  for (std::size_t p = 0; p < phases; ++p) {
    std::size_t stride = 1ull << p;
    for (std::size_t i = 0; i < n; ++i) {
      if ((i & ((stride << 1) - 1)) == stride) {
        TaskId m = g.add_message(group[i], group[i - stride], bytes,
                                 collective_msg_kind(bytes), last[i], phase);
        last[i] = {m};
        auto& rd = last[i - stride];
        rd.push_back(m);
      }
    }
  }
  // Broadcast back down.
  for (std::size_t p = phases; p-- > 0;) {
    std::size_t stride = 1ull << p;
    for (std::size_t i = 0; i < n; ++i) {
      if ((i & ((stride << 1) - 1)) == 0 && i + stride < n) {
        TaskId m = g.add_message(group[i], group[i + stride], bytes,
                                 collective_msg_kind(bytes), last[i], phase);
        last[i].push_back(m);
        last[i + stride] = {m};
      }
    }
  }
  std::vector<TaskId> sinks(n);
  for (std::size_t i = 0; i < n; ++i) {
    sinks[i] = last[i].empty() ? kNoDevice : last[i].back();
  }
  return sinks;
}

}  // namespace

std::vector<TaskId> gen_collective(
    TaskGraph& g, const CollectiveParams& p,
    const std::vector<std::vector<TaskId>>& entry_deps,
    const std::string& phase) {
  const std::size_t n = p.group.size();
  if (n < 2) raise("degenerate-group", "collective needs at least two ranks");
  if (p.bytes == 0) raise("empty-message", "zero-byte collective");
  if (!entry_deps.empty() && entry_deps.size() != n) {
    raise("bad-params", "entry_deps must match group size");
  }
  if (p.algo == CollectiveAlgo::kTree) {
    if (p.op != CollectiveOp::kAllReduce) {
      raise("bad-params", "tree algorithm models all_reduce only");
    }
    return gen_tree_all_reduce(g, p.group, p.bytes, entry_deps, phase);
  }
  auto chunks = ring_chunks(p.bytes, n);
  switch (p.op) {
    case CollectiveOp::kAllReduce: {
      // reduce-scatter then all-gather, 2(n-1) steps total
      auto rs = ring_phase(g, p.group, chunks, n - 1, 0, entry_deps, phase);
      // Stitch: the first all-gather send of rank i forwards the chunk it
      // just finished reducing (received in the last RS step).
      std::vector<std::vector<TaskId>> ag_entry(n);
      for (std::size_t i = 0; i < n; ++i) {
        TaskId recv = rs[n - 2][(i + n - 1) % n];
        if (recv != kNoDevice) ag_entry[i] = {recv};
      }
      auto ag = ring_phase(g, p.group, chunks, n - 1, 1, ag_entry, phase);
      return ring_sinks(ag, n, entry_deps);
    }
    case CollectiveOp::kReduceScatter: {
      auto rs = ring_phase(g, p.group, chunks, n - 1, 0, entry_deps, phase);
      return ring_sinks(rs, n, entry_deps);
    }
    case CollectiveOp::kAllGather: {
      auto ag = ring_phase(g, p.group, chunks, n - 1, 1, entry_deps, phase);
      return ring_sinks(ag, n, entry_deps);
    }
  }
  raise("bad-params", "unknown collective op");
}

// ---------------------------------------------------------------------------
// training step

std::vector<TaskId> gen_training_step(TaskGraph& g, const TrainingParams& p,
                                      const std::vector<DeviceId>& devices,
                                      const std::string& phase) {
  if (p.tp == 0 || p.pp == 0 || p.dp == 0 || p.layers == 0) {
    raise("bad-params", "tp/pp/dp/layers must be positive");
  }
  const std::size_t ranks = std::size_t{p.tp} * p.pp * p.dp;
  if (devices.size() < ranks) {
    raise("mapping-failure", std::to_string(ranks) + " ranks need " +
                                 std::to_string(ranks) + " devices, have " +
                                 std::to_string(devices.size()));
  }
  if (p.layers % p.pp != 0) {
    raise("bad-params", "layers must divide evenly across pipeline stages");
  }
  auto dev = [&](std::uint32_t dpi, std::uint32_t ppi, std::uint32_t tpi) {
    return devices[(std::size_t{dpi} * p.pp + ppi) * p.tp + tpi];
  };
  const std::uint32_t layers_per_stage = p.layers / p.pp;

  // last[r]: tasks gating rank r's next action
  std::vector<std::vector<TaskId>> last(ranks);
  auto rank_of = [&](std::uint32_t dpi, std::uint32_t ppi, std::uint32_t tpi) {
    return (std::size_t{dpi} * p.pp + ppi) * p.tp + tpi;
  };

  for (std::uint32_t dpi = 0; dpi < p.dp; ++dpi) {
    for (std::uint32_t ppi = 0; ppi < p.pp; ++ppi) {
      for (std::uint32_t li = 0; li < layers_per_stage; ++li) {
        for (std::uint32_t tpi = 0; tpi < p.tp; ++tpi) {
          std::size_t r = rank_of(dpi, ppi, tpi);
          last[r] = {g.add_compute(dev(dpi, ppi, tpi), p.compute_ns_per_layer,
                                   last[r], phase)};
        }
        // Tensor-parallel sync inside the stage after every layer.
        if (p.tp > 1 && p.bytes_tp_sync > 0) {
          CollectiveParams cp;
          for (std::uint32_t tpi = 0; tpi < p.tp; ++tpi) {
            cp.group.push_back(dev(dpi, ppi, tpi));
          }
          cp.bytes = p.bytes_tp_sync;
          std::vector<std::vector<TaskId>> entry;
          for (std::uint32_t tpi = 0; tpi < p.tp; ++tpi) {
            entry.push_back(last[rank_of(dpi, ppi, tpi)]);
          }
          auto sinks = gen_collective(g, cp, entry, phase);
          for (std::uint32_t tpi = 0; tpi < p.tp; ++tpi) {
            last[rank_of(dpi, ppi, tpi)] = {sinks[tpi]};
          }
        }
        // Expert dispatch + combine with a round-robin peer in the stage.
        if (p.ep_experts > 1 && p.bytes_ep_dispatch > 0 && p.tp > 1) {
          for (std::uint32_t tpi = 0; tpi < p.tp; ++tpi) {
            std::uint32_t peer = (tpi + 1 + li) % p.tp;
            if (peer == tpi) continue;
            std::size_t r = rank_of(dpi, ppi, tpi);
            std::size_t pr = rank_of(dpi, ppi, peer);
            TaskId out = g.add_message(dev(dpi, ppi, tpi), dev(dpi, ppi, peer),
                                       p.bytes_ep_dispatch, MsgKind::kDmaBulk,
                                       last[r], phase);
            TaskId back = g.add_message(dev(dpi, ppi, peer), dev(dpi, ppi, tpi),
                                        p.bytes_ep_dispatch, MsgKind::kDmaBulk,
                                        {out}, phase);
            last[r].push_back(back);
            last[pr].push_back(out);
          }
        }
      }
      // Pipeline handoff to the next stage.
      if (ppi + 1 < p.pp && p.bytes_pp_activation > 0) {
        for (std::uint32_t tpi = 0; tpi < p.tp; ++tpi) {
          std::size_t r = rank_of(dpi, ppi, tpi);
          std::size_t nr = rank_of(dpi, ppi + 1, tpi);
          TaskId h = g.add_message(dev(dpi, ppi, tpi), dev(dpi, ppi + 1, tpi),
                                   p.bytes_pp_activation, MsgKind::kDmaBulk,
                                   last[r], phase);
          last[nr].push_back(h);
        }
      }
    }
  }

  // Data-parallel gradient synchronization across replicas.
  if (p.dp > 1 && p.bytes_dp_gradient > 0) {
    for (std::uint32_t ppi = 0; ppi < p.pp; ++ppi) {
      for (std::uint32_t tpi = 0; tpi < p.tp; ++tpi) {
        CollectiveParams cp;
        std::vector<std::vector<TaskId>> entry;
        for (std::uint32_t dpi = 0; dpi < p.dp; ++dpi) {
          cp.group.push_back(dev(dpi, ppi, tpi));
          entry.push_back(last[rank_of(dpi, ppi, tpi)]);
        }
        cp.bytes = p.bytes_dp_gradient;
        auto sinks = gen_collective(g, cp, entry, phase);
        for (std::uint32_t dpi = 0; dpi < p.dp; ++dpi) {
          last[rank_of(dpi, ppi, tpi)] = {sinks[dpi]};
        }
      }
    }
  }

  std::vector<TaskId> sinks;
  for (std::size_t r = 0; r < ranks; ++r) {
    for (TaskId t : last[r]) sinks.push_back(t);
  }
  return sinks;
}

// ---------------------------------------------------------------------------
// decode / retrieval / halo / bulk copy

std::vector<TaskId> gen_kv_decode(TaskGraph& g, const KvDecodeParams& p,
                                  const PlacementMap& placement,
                                  const TierConfig& cfg,
                                  const std::string& phase) {
  (void)cfg;  // block rounding is applied when the access executes
  if (p.kv_bytes_per_token == 0) raise("bad-params", "kv bytes must be positive");
  if (!placement.has(p.dataset)) {
    raise("unknown-dataset", "kv decode needs dataset '" + p.dataset + "'");
  }
  std::vector<TaskId> prev;
  TaskId lastw = kNoDevice;
  for (std::uint32_t t = 1; t <= p.tokens; ++t) {
    // Attend over everything written so far (nothing on the first token).
    std::uint64_t history = std::uint64_t{t - 1} * p.kv_bytes_per_token;
    std::vector<TaskId> reads = prev;
    if (history > 0) {
      reads = {g.add_dataset_access(p.device, p.dataset, 0, history,
                                    AccessOp::kRead, prev, phase)};
    }
    TaskId c = g.add_compute(p.device, p.compute_ns_per_token, reads, phase);
    // Append this token's kv entry.
    lastw = g.add_dataset_access(p.device, p.dataset, history,
                                 p.kv_bytes_per_token, AccessOp::kWrite, {c},
                                 phase);
    prev = {lastw};
  }
  return lastw == kNoDevice ? std::vector<TaskId>{} : std::vector<TaskId>{lastw};
}

std::vector<TaskId> gen_rag(TaskGraph& g, const RagParams& p,
                            const PlacementMap& placement,
                            const TierConfig& cfg, std::mt19937_64& rng,
                            const std::vector<TaskId>& entry_deps,
                            const std::string& phase) {
  (void)cfg;
  if (p.group.empty()) raise("degenerate-group", "rag needs a device group");
  if (!placement.has(p.dataset)) {
    raise("no-kb", "retrieval needs dataset '" + p.dataset + "'");
  }
  std::uint64_t kb_bytes = 0;
  for (const Extent& e : placement.extents(p.dataset)) kb_bytes += e.bytes;
  if (p.vector_bytes == 0 || kb_bytes < p.vector_bytes) {
    raise("bad-params", "vector size exceeds knowledge base");
  }
  const std::uint64_t slots = kb_bytes / p.vector_bytes;

  std::vector<std::vector<TaskId>> last(p.group.size());
  for (auto& l : last) l = entry_deps;
  std::vector<TaskId> sinks(p.group.size(), kNoDevice);
  for (std::uint32_t q = 0; q < p.queries; ++q) {
    std::size_t gi = q % p.group.size();
    DeviceId dev = p.group[gi];
    // Index traversal is a pointer chase: each probe's slot comes from the
    // vector fetched by the previous one, so probes form a dependency chain.
    std::vector<TaskId> walk = last[gi];
    for (std::uint32_t probe = 0; probe < p.probes_per_query; ++probe) {
      std::uint64_t slot = rng() % slots;
      walk = {g.add_dataset_access(dev, p.dataset, slot * p.vector_bytes,
                                   p.vector_bytes, AccessOp::kRead, walk,
                                   phase)};
    }
    std::vector<TaskId> gather = walk;
    if (p.context_bytes > 0) {
      std::uint64_t span = std::min(p.context_bytes, kb_bytes);
      std::uint64_t max_start = kb_bytes - span;
      std::uint64_t start = max_start == 0 ? 0 : rng() % max_start;
      gather = {g.add_dataset_access(dev, p.dataset, start, span,
                                     AccessOp::kRead, walk, phase)};
    }
    TaskId c = g.add_compute(dev, p.llm_compute_ns, gather, phase);
    last[gi] = {c};
    sinks[gi] = c;
  }
  std::vector<TaskId> out;
  for (TaskId s : sinks) {
    if (s != kNoDevice) out.push_back(s);
  }
  return out;
}

std::vector<TaskId> gen_mpi_halo(TaskGraph& g, const MpiHaloParams& p,
                                 Fabric& f, const std::vector<DeviceId>& ranks,
                                 const std::string& phase) {
  const std::size_t n = std::size_t{p.px} * p.py;
  if (n == 0) raise("bad-params", "grid must be non-empty");
  if (ranks.size() < n) {
    raise("mapping-failure", "grid needs " + std::to_string(n) +
                                 " ranks, have " + std::to_string(ranks.size()));
  }
  if (p.halo_bytes == 0) raise("empty-message", "zero-byte halo");
  auto rank_at = [&](std::uint32_t x, std::uint32_t y) {
    return ranks[std::size_t{y} * p.px + x];
  };
  struct Neighbor {
    std::size_t from, to;
  };
  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::uint32_t y = 0; y < p.py; ++y) {
    for (std::uint32_t x = 0; x < p.px; ++x) {
      std::size_t r = std::size_t{y} * p.px + x;
      if (x + 1 < p.px) neighbors[r].push_back(r + 1);
      if (x > 0) neighbors[r].push_back(r - 1);
      if (y + 1 < p.py) neighbors[r].push_back(r + p.px);
      if (y > 0) neighbors[r].push_back(r - p.px);
    }
  }

  const bool shared = p.mode == MpiHaloParams::Mode::kSharedMemory;
  // Shared mode: one region per directed pair, lines sized to the halo.
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> region_of;
  const std::uint32_t line_bytes = 64;
  const std::uint64_t lines = ceil_div(p.halo_bytes, line_bytes);
  if (shared) {
    f.request_shared_memory();
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t nb : neighbors[r]) {
        Region reg = allocate_region(f, {ranks[r], ranks[nb]},
                                     lines * line_bytes, RegionMode::kShared,
                                     line_bytes);
        region_of[{r, nb}] = g.regions.size();
        g.regions.push_back(reg);
      }
    }
  }

  std::vector<std::vector<TaskId>> last(n);
  for (std::uint32_t it = 0; it < p.iterations; ++it) {
    std::vector<TaskId> computes(n);
    for (std::size_t r = 0; r < n; ++r) {
      computes[r] = g.add_compute(ranks[r], p.compute_ns, last[r], phase);
    }
    for (std::size_t r = 0; r < n; ++r) last[r] = {computes[r]};
    if (shared) {
      // Producer stores its boundary, consumer loads it; per-line tasks run
      // in parallel (hardware pipelines outstanding coherence ops).
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t nb : neighbors[r]) {
          RegionId reg = g.regions[region_of[{r, nb}]].id;
          std::vector<TaskId> stores;
          for (std::uint64_t ln = 0; ln < lines; ++ln) {
            stores.push_back(g.add_region_access(
                reg, ranks[r], ln, AccessOp::kWrite, {computes[r]}, phase));
          }
          for (std::uint64_t ln = 0; ln < lines; ++ln) {
            TaskId load = g.add_region_access(reg, ranks[nb], ln,
                                              AccessOp::kRead,
                                              {stores[ln]}, phase);
            last[nb].push_back(load);
          }
        }
      }
    } else {
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t nb : neighbors[r]) {
          TaskId m = g.add_message(ranks[r], ranks[nb], p.halo_bytes,
                                   MsgKind::kDmaBulk, {computes[r]}, phase,
                                   /*force_rdma=*/true);
          last[nb].push_back(m);
        }
      }
    }
  }
  std::vector<TaskId> sinks;
  for (std::size_t r = 0; r < n; ++r) {
    sinks.insert(sinks.end(), last[r].begin(), last[r].end());
  }
  return sinks;
}

std::vector<TaskId> gen_bulk_copy(TaskGraph& g, const std::string& dataset,
                                  DeviceId source, std::uint64_t chunk_bytes,
                                  std::uint64_t total_bytes,
                                  const PlacementMap& placement,
                                  const std::vector<TaskId>& entry_deps,
                                  const std::string& phase) {
  if (chunk_bytes == 0) raise("bad-params", "chunk size must be positive");
  if (!placement.has(dataset)) {
    raise("unknown-dataset", "bulk copy of unplaced dataset '" + dataset + "'");
  }
  std::vector<TaskId> prev = entry_deps;
  std::uint64_t off = 0;
  TaskId lastid = kNoDevice;
  while (off < total_bytes) {
    std::uint64_t len = std::min(chunk_bytes, total_bytes - off);
    lastid = g.add_dataset_access(source, dataset, off, len, AccessOp::kWrite,
                                  prev, phase);
    prev = {lastid};
    off += len;
  }
  return lastid == kNoDevice ? std::vector<TaskId>{} : std::vector<TaskId>{lastid};
}

TaskId gen_migration(TaskGraph& g, PendingMigration m,
                     const std::vector<TaskId>& entry_deps,
                     const std::string& phase) {
  std::vector<TaskId> hops;
  for (const PendingMigration::Hop& h : m.hops) {
    if (h.src == h.dst || h.bytes == 0) continue;
    hops.push_back(g.add_message(h.src, h.dst, h.bytes, MsgKind::kDmaBulk,
                                 entry_deps, phase));
  }
  if (hops.empty()) hops = entry_deps;
  Task t;
  t.kind = TaskKind::kCommit;
  t.migration = static_cast<std::uint32_t>(g.migrations.size());
  t.deps = hops;
  t.phase = phase;
  g.migrations.push_back(std::move(m));
  return g.add(std::move(t));
}

}  // namespace fabricsim

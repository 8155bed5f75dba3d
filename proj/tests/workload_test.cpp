// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "error.hpp"
#include "fabric.hpp"
#include "memtier.hpp"
#include "topology.hpp"
#include "workload.hpp"

using namespace fabricsim;

namespace {

Device small_accel(const char* name, std::uint64_t local_bytes) {
  Device d;
  d.kind = DeviceKind::kAccelerator;
  d.name = name;
  d.local_mem_bytes = local_bytes;
  return d;
}

// Independent step enumeration of the ring algorithm: in step s of a phase,
// rank i forwards chunk (i - s + shift) mod n to rank i+1. Returns per-rank
// payload bytes sent.
std::vector<std::uint64_t> ring_oracle(std::uint64_t bytes, std::size_t n,
                                       bool reduce_scatter, bool all_gather) {
  std::vector<std::uint64_t> sizes(n, bytes / n);
  for (std::size_t i = 0; i < bytes % n; ++i) ++sizes[i];
  std::vector<std::uint64_t> sent(n, 0);
  auto phase = [&](int shift) {
    for (std::size_t s = 0; s + 1 < n; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        sent[i] += sizes[(i + n - s + shift) % n];
      }
    }
  };
  if (reduce_scatter) phase(0);
  if (all_gather) phase(1);
  return sent;
}

std::size_t count_kind(const TaskGraph& g, TaskKind k) {
  std::size_t c = 0;
  for (const Task& t : g.tasks) c += t.kind == k;
  return c;
}

}  // namespace

TEST_CASE("ring all_reduce moves 2(n-1)/n of the tensor per rank") {
  const std::uint64_t S = 1 << 20;
  for (std::size_t n : {2u, 3u, 4u, 8u}) {
    CAPTURE(n);
    TaskGraph g;
    CollectiveParams p;
    for (std::size_t i = 0; i < n; ++i) p.group.push_back(100 + i);
    p.bytes = S;
    std::vector<TaskId> sinks = gen_collective(g, p, {}, "sync");
    REQUIRE(g.is_acyclic());
    REQUIRE(sinks.size() == n);
    CHECK(g.tasks.size() == 2 * n * (n - 1));

    std::vector<std::uint64_t> want = ring_oracle(S, n, true, true);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t sent = g.sent_payload_bytes(100 + i);
      CHECK(sent == want[i]);
      // Closed form, allowing per-step one-byte chunk rounding.
      double target = 2.0 * (n - 1) * S / n;
      CHECK(std::abs(static_cast<double>(sent) - target) <= 2.0 * n);
    }
    // Every message goes to the ring successor.
    for (const Task& t : g.tasks) {
      REQUIRE(t.kind == TaskKind::kMessage);
      std::size_t i = t.device - 100;
      CHECK(t.dst == 100 + (i + 1) % n);
    }
  }
}

TEST_CASE("ring all_reduce volumes stay exact for awkward sizes") {
  // Uneven chunks (prime size) and more ranks than bytes.
  struct Case {
    std::uint64_t bytes;
    std::size_t n;
  } cases[] = {{1000003, 4}, {3, 8}, {65, 3}};
  for (const Case& c : cases) {
    CAPTURE(c.bytes);
    CAPTURE(c.n);
    TaskGraph g;
    CollectiveParams p;
    for (std::size_t i = 0; i < c.n; ++i) p.group.push_back(i);
    p.bytes = c.bytes;
    gen_collective(g, p, {}, "sync");
    std::vector<std::uint64_t> want = ring_oracle(c.bytes, c.n, true, true);
    for (std::size_t i = 0; i < c.n; ++i) {
      CHECK(g.sent_payload_bytes(i) == want[i]);
    }
  }
}

TEST_CASE("reduce_scatter and all_gather are each one ring phase") {
  const std::uint64_t S = 1 << 20;
  const std::size_t n = 4;
  for (CollectiveOp op : {CollectiveOp::kReduceScatter, CollectiveOp::kAllGather}) {
    TaskGraph g;
    CollectiveParams p;
    for (std::size_t i = 0; i < n; ++i) p.group.push_back(i);
    p.bytes = S;
    p.op = op;
    std::vector<TaskId> sinks = gen_collective(g, p, {}, "sync");
    REQUIRE(sinks.size() == n);
    CHECK(g.tasks.size() == n * (n - 1));
    bool rs = op == CollectiveOp::kReduceScatter;
    std::vector<std::uint64_t> want = ring_oracle(S, n, rs, !rs);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(g.sent_payload_bytes(i) == want[i]);
    }
  }
}

TEST_CASE("ring steps chain: each forward waits for the previous receive") {
  TaskGraph g;
  CollectiveParams p;
  p.group = {0, 1, 2, 3};
  p.bytes = 4096;
  gen_collective(g, p, {}, "sync");
  // Step-0 sends start unconstrained; every later send depends on exactly
  // the predecessor's send from the step before.
  std::size_t roots = 0;
  for (const Task& t : g.tasks) {
    if (t.deps.empty()) {
      ++roots;
      continue;
    }
    REQUIRE(t.deps.size() == 1);
    const Task& prev = g.tasks[t.deps[0]];
    CHECK(prev.dst == t.device);  // what it forwards arrived from upstream
  }
  CHECK(roots == 4);  // one unconstrained first send per rank
}

TEST_CASE("tree all_reduce sends 2(n-1) tensors and only models all_reduce") {
  TaskGraph g;
  CollectiveParams p;
  p.group = {0, 1, 2, 3, 4};
  p.bytes = 1 << 16;
  p.algo = CollectiveAlgo::kTree;
  std::vector<TaskId> sinks = gen_collective(g, p, {}, "sync");
  REQUIRE(g.is_acyclic());
  CHECK(sinks.size() == 5);
  CHECK(g.tasks.size() == 2 * (5 - 1));
  for (const Task& t : g.tasks) CHECK(t.payload_bytes == 1 << 16);

  p.op = CollectiveOp::kAllGather;
  CHECK_THROWS_WITH_AS(gen_collective(g, p, {}, "sync"),
                       doctest::Contains("bad-params"), SimError);
}

TEST_CASE("collectives reject degenerate input") {
  TaskGraph g;
  CollectiveParams p;
  p.group = {0};
  p.bytes = 64;
  CHECK_THROWS_WITH_AS(gen_collective(g, p, {}, "s"),
                       doctest::Contains("degenerate-group"), SimError);
  p.group = {0, 1};
  p.bytes = 0;
  CHECK_THROWS_WITH_AS(gen_collective(g, p, {}, "s"),
                       doctest::Contains("empty-message"), SimError);
  p.bytes = 64;
  CHECK_THROWS_WITH_AS(gen_collective(g, p, {{0}}, "s"),
                       doctest::Contains("bad-params"), SimError);
}

TEST_CASE("two-stage pipeline is compute, handoff, compute") {
  TaskGraph g;
  TrainingParams p;
  p.pp = 2;
  p.layers = 2;
  p.compute_ns_per_layer = 1000;
  p.bytes_pp_activation = 4096;
  std::vector<TaskId> sinks = gen_training_step(g, p, {10, 11}, "step");
  REQUIRE(g.tasks.size() == 3);
  CHECK(g.tasks[0].kind == TaskKind::kCompute);
  CHECK(g.tasks[0].device == 10);
  CHECK(g.tasks[0].deps.empty());
  CHECK(g.tasks[1].kind == TaskKind::kMessage);
  CHECK(g.tasks[1].device == 10);
  CHECK(g.tasks[1].dst == 11);
  CHECK(g.tasks[1].payload_bytes == 4096);
  CHECK(g.tasks[1].deps == std::vector<TaskId>{0});
  CHECK(g.tasks[2].kind == TaskKind::kCompute);
  CHECK(g.tasks[2].device == 11);
  CHECK(g.tasks[2].deps == std::vector<TaskId>{1});
  CHECK(sinks.size() == 2);
}

TEST_CASE("tensor-parallel stages sync after every layer") {
  TaskGraph g;
  TrainingParams p;
  p.tp = 2;
  p.layers = 2;
  p.bytes_tp_sync = 1024;
  gen_training_step(g, p, {10, 11}, "step");
  // Per layer: 2 computes + a 2-rank ring all_reduce (4 messages).
  CHECK(count_kind(g, TaskKind::kCompute) == 4);
  CHECK(count_kind(g, TaskKind::kMessage) == 8);
  CHECK(g.is_acyclic());
  // Each rank ships one full tensor per layer: 2 x 2(n-1)/n x 1024.
  CHECK(g.sent_payload_bytes(10) == 2048);
  CHECK(g.sent_payload_bytes(11) == 2048);
}

TEST_CASE("data-parallel replicas all_reduce gradients once") {
  TaskGraph g;
  TrainingParams p;
  p.dp = 2;
  p.layers = 1;
  p.bytes_dp_gradient = 1 << 16;
  gen_training_step(g, p, {10, 11}, "step");
  CHECK(count_kind(g, TaskKind::kCompute) == 2);
  CHECK(count_kind(g, TaskKind::kMessage) == 4);
  CHECK(g.sent_payload_bytes(10) == 1 << 16);
}

TEST_CASE("training step validates its shape") {
  TaskGraph g;
  TrainingParams p;
  p.tp = 2;
  p.pp = 2;
  CHECK_THROWS_WITH_AS(gen_training_step(g, p, {1, 2, 3}, "s"),
                       doctest::Contains("mapping-failure"), SimError);
  TrainingParams odd;
  odd.pp = 2;
  odd.layers = 3;
  CHECK_THROWS_WITH_AS(gen_training_step(g, odd, {1, 2}, "s"),
                       doctest::Contains("bad-params"), SimError);
  TrainingParams zero;
  zero.tp = 0;
  CHECK_THROWS_WITH_AS(gen_training_step(g, zero, {1, 2}, "s"),
                       doctest::Contains("bad-params"), SimError);
}

TEST_CASE("kv decode alternates attention reads, compute, appends") {
  Fabric f;
  DeviceId a = f.add_device(small_accel("a", 4096));
  PlacementMap pm =
      place({{"kv", 1024, LatencyClass::kCritical, "kv_cache", "", ""}}, f, {});
  (void)a;
  TaskGraph g;
  KvDecodeParams p;
  p.device = a;
  p.tokens = 3;
  p.kv_bytes_per_token = 64;
  p.compute_ns_per_token = 10;
  std::vector<TaskId> sinks = gen_kv_decode(g, p, pm, {}, "decode");
  // Token 1 has no history: compute + write. Tokens 2..3 add a read each.
  REQUIRE(g.tasks.size() == 8);
  CHECK(count_kind(g, TaskKind::kCompute) == 3);
  const Task& r3 = g.tasks[5];  // token 3's attention read
  CHECK(r3.payload_bytes == 128);
  CHECK(r3.rop == AccessOp::kRead);
  const Task& w3 = g.tasks[7];
  CHECK(w3.rop == AccessOp::kWrite);
  CHECK(w3.dataset_offset == 128);
  REQUIRE(sinks.size() == 1);
  CHECK(sinks[0] == w3.id);
  CHECK(g.is_acyclic());

  KvDecodeParams bad = p;
  bad.kv_bytes_per_token = 0;
  CHECK_THROWS_WITH_AS(gen_kv_decode(g, bad, pm, {}, "d"),
                       doctest::Contains("bad-params"), SimError);
  KvDecodeParams ghost = p;
  ghost.dataset = "nope";
  CHECK_THROWS_WITH_AS(gen_kv_decode(g, ghost, pm, {}, "d"),
                       doctest::Contains("unknown-dataset"), SimError);
}

TEST_CASE("rag chains probes per query and round-robins the group") {
  Fabric f;
  DeviceId a0 = f.add_device(small_accel("a0", 1024));
  DeviceId a1 = f.add_device(small_accel("a1", 1024));
  f.add_device(make_tray("t", 1 << 16));
  PlacementMap pm =
      place({{"kb", 1 << 16, LatencyClass::kBulk, "embedding_table", "", ""}},
            f, {});
  TaskGraph g;
  RagParams p;
  p.group = {a0, a1};
  p.queries = 4;
  p.probes_per_query = 3;
  p.vector_bytes = 512;
  p.context_bytes = 1024;
  p.llm_compute_ns = 100;
  std::mt19937_64 rng(99);
  std::vector<TaskId> sinks = gen_rag(g, p, pm, {}, rng, {}, "retrieval");
  // Per query: 3 probes + context read + compute.
  REQUIRE(g.tasks.size() == 4 * 5);
  REQUIRE(sinks.size() == 2);
  CHECK(g.is_acyclic());
  for (std::size_t q = 0; q < 4; ++q) {
    const Task* t = &g.tasks[q * 5];
    DeviceId dev = q % 2 == 0 ? a0 : a1;
    for (int probe = 0; probe < 3; ++probe, ++t) {
      CHECK(t->device == dev);
      CHECK(t->payload_bytes == 512);
      CHECK(t->rop == AccessOp::kRead);
      if (probe > 0) {  // pointer chase: one dep, the previous probe
        REQUIRE(t->deps.size() == 1);
        CHECK(t->deps[0] == t->id - 1);
      }
    }
    CHECK(t->payload_bytes == 1024);  // context gather
    REQUIRE(t->deps.size() == 1);
    CHECK(t->deps[0] == t->id - 1);
    ++t;
    CHECK(t->kind == TaskKind::kCompute);
  }
  // Second query on a device waits for the first query's compute.
  CHECK(g.tasks[10].deps == std::vector<TaskId>{g.tasks[4].id});

  RagParams bad = p;
  bad.group = {};
  CHECK_THROWS_WITH_AS(gen_rag(g, bad, pm, {}, rng, {}, "r"),
                       doctest::Contains("degenerate-group"), SimError);
  RagParams ghost = p;
  ghost.dataset = "nope";
  CHECK_THROWS_WITH_AS(gen_rag(g, ghost, pm, {}, rng, {}, "r"),
                       doctest::Contains("no-kb"), SimError);
  RagParams wide = p;
  wide.vector_bytes = 1 << 20;
  CHECK_THROWS_WITH_AS(gen_rag(g, wide, pm, {}, rng, {}, "r"),
                       doctest::Contains("bad-params"), SimError);
}

TEST_CASE("mpi halo in message mode exchanges rdma messages per neighbor") {
  Fabric f;
  std::vector<DeviceId> ranks;
  for (int i = 0; i < 4; ++i) {
    ranks.push_back(f.add_device(make_host("h" + std::to_string(i))));
  }
  TaskGraph g;
  MpiHaloParams p;
  p.px = 2;
  p.py = 2;
  p.halo_bytes = 128;
  p.iterations = 2;
  p.compute_ns = 50;
  std::vector<TaskId> sinks = gen_mpi_halo(g, p, f, ranks, "halo");
  // 2x2 grid: every rank has 2 neighbors -> 8 directed messages/iteration.
  CHECK(count_kind(g, TaskKind::kCompute) == 8);
  CHECK(count_kind(g, TaskKind::kMessage) == 16);
  for (const Task& t : g.tasks) {
    if (t.kind == TaskKind::kMessage) {
      CHECK(t.force_rdma);
      CHECK(t.payload_bytes == 128);
    }
  }
  CHECK(!sinks.empty());
  CHECK(g.is_acyclic());
  CHECK(g.regions.empty());
}

TEST_CASE("mpi halo in shared mode trades messages for coherent lines") {
  Fabric f;
  std::vector<DeviceId> ranks;
  ranks.push_back(f.add_device(make_host("h0")));
  ranks.push_back(f.add_device(make_host("h1")));
  f.add_device(make_tray("t", 1 << 20));
  TaskGraph g;
  MpiHaloParams p;
  p.px = 2;
  p.py = 1;
  p.halo_bytes = 128;  // two 64B lines
  p.iterations = 1;
  p.mode = MpiHaloParams::Mode::kSharedMemory;
  gen_mpi_halo(g, p, f, ranks, "halo");
  CHECK(f.shared_memory_requested());
  REQUIRE(g.regions.size() == 2);  // one per directed neighbor pair
  CHECK(g.regions[0].mode == RegionMode::kShared);
  CHECK(g.regions[0].size_bytes == 128);
  CHECK(count_kind(g, TaskKind::kMessage) == 0);
  CHECK(count_kind(g, TaskKind::kRegionAccess) == 8);  // 2 lines x 2 dirs x 2
  // Loads depend on the matching store.
  for (const Task& t : g.tasks) {
    if (t.kind == TaskKind::kRegionAccess && t.rop == AccessOp::kRead) {
      REQUIRE(t.deps.size() == 1);
      const Task& dep = g.tasks[t.deps[0]];
      CHECK(dep.rop == AccessOp::kWrite);
      CHECK(dep.region == t.region);
      CHECK(dep.line == t.line);
    }
  }

  MpiHaloParams bad = p;
  bad.halo_bytes = 0;
  CHECK_THROWS_WITH_AS(gen_mpi_halo(g, bad, f, ranks, "h"),
                       doctest::Contains("empty-message"), SimError);
  MpiHaloParams wide = p;
  wide.px = 5;
  CHECK_THROWS_WITH_AS(gen_mpi_halo(g, wide, f, ranks, "h"),
                       doctest::Contains("mapping-failure"), SimError);
}

TEST_CASE("bulk copy chunks sequentially from the source") {
  Fabric f;
  DeviceId h = f.add_device(make_host("h"));
  f.add_device(make_tray("t", 1 << 16));
  PlacementMap pm =
      place({{"d", 2500, LatencyClass::kBulk, "", "", ""}}, f, {});
  TaskGraph g;
  std::vector<TaskId> sinks = gen_bulk_copy(g, "d", h, 1000, 2500, pm, {}, "init");
  REQUIRE(g.tasks.size() == 3);
  CHECK(g.tasks[0].payload_bytes == 1000);
  CHECK(g.tasks[0].dataset_offset == 0);
  CHECK(g.tasks[2].payload_bytes == 500);
  CHECK(g.tasks[2].dataset_offset == 2000);
  CHECK(g.tasks[1].deps == std::vector<TaskId>{0});
  CHECK(g.tasks[2].deps == std::vector<TaskId>{1});
  for (const Task& t : g.tasks) CHECK(t.rop == AccessOp::kWrite);
  REQUIRE(sinks.size() == 1);
  CHECK(sinks[0] == 2);

  CHECK_THROWS_WITH_AS(gen_bulk_copy(g, "d", h, 0, 100, pm, {}, "i"),
                       doctest::Contains("bad-params"), SimError);
  CHECK_THROWS_WITH_AS(gen_bulk_copy(g, "x", h, 64, 100, pm, {}, "i"),
                       doctest::Contains("unknown-dataset"), SimError);
}

TEST_CASE("migration emits one bulk hop per slice then commits") {
  Fabric f;
  f.add_device(small_accel("a0", 1024));
  f.add_device(small_accel("a1", 1024));
  DeviceId t0 = f.add_device(make_tray("t0", 4096));
  PlacementMap pm =
      place({{"d", 2048, LatencyClass::kBulk, "", "", ""}}, f, {});
  PendingMigration m = plan_migration(pm, f, "d", 1);
  TaskGraph g;
  TaskId commit = gen_migration(g, m, {}, "migrate");
  REQUIRE(g.tasks.size() == 3);  // tray->a0, tray->a1, commit
  CHECK(g.tasks[0].kind == TaskKind::kMessage);
  CHECK(g.tasks[0].device == t0);
  CHECK(g.tasks[1].payload_bytes == 1024);
  const Task& c = g.tasks[commit];
  CHECK(c.kind == TaskKind::kCommit);
  CHECK(c.deps == std::vector<TaskId>({0, 1}));
  REQUIRE(g.migrations.size() == 1);
  CHECK(g.migrations[c.migration].dataset == "d");

  // Hops that stay on one device cost nothing and emit no message.
  PendingMigration noop;
  noop.dataset = "d";
  noop.hops.push_back({t0, t0, 512});
  TaskGraph g2;
  TaskId c2 = gen_migration(g2, noop, {}, "m");
  CHECK(g2.tasks.size() == 1);
  CHECK(g2.tasks[c2].deps.empty());
}

TEST_CASE("task graphs reject forward and self dependencies") {
  TaskGraph g;
  Task t;
  t.kind = TaskKind::kCompute;
  t.deps = {0};  // self once id 0 is assigned
  g.add(std::move(t));
  CHECK_FALSE(g.is_acyclic());
}

// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "coherence.hpp"
#include "error.hpp"
#include "fabric.hpp"
#include "topology.hpp"

using namespace fabricsim;

namespace {

using Act = CoherenceAction;
using T = CoherenceAction::Type;

Region make_region(std::vector<DeviceId> hosts, std::uint64_t lines = 64) {
  Region r;
  r.home_tray = 99;
  r.size_bytes = lines * 64;
  r.line_bytes = 64;
  r.mode = hosts.size() > 1 ? RegionMode::kShared : RegionMode::kPartitioned;
  r.hosts = std::move(hosts);
  std::sort(r.hosts.begin(), r.hosts.end());
  return r;
}

bool acts_eq(const std::vector<Act>& got, const std::vector<Act>& want) {
  if (got.size() != want.size()) return false;
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (got[i].type != want[i].type || got[i].src != want[i].src ||
        got[i].dst != want[i].dst) {
      return false;
    }
  }
  return true;
}

// Independent protocol model written from the MSI rules: a line has a set of
// valid holders and at most one dirty owner. Used as the trace oracle.
struct Mirror {
  DeviceId home;
  struct Line {
    std::set<DeviceId> holders;
    DeviceId dirty = kNoDevice;
  };
  std::map<std::uint64_t, Line> lines;

  std::vector<Act> access(DeviceId h, std::uint64_t line, AccessOp op) {
    Line& l = lines[line];
    std::vector<Act> acts;
    if (op == AccessOp::kRead) {
      if (l.dirty == h) return acts;
      if (l.dirty != kNoDevice) {
        acts.push_back({T::kWriteBack, l.dirty, home});
        acts.push_back({T::kFetch, home, h});
        l.holders = {l.dirty, h};
        l.dirty = kNoDevice;
        return acts;
      }
      if (l.holders.count(h)) return acts;
      acts.push_back({T::kFetch, home, h});
      l.holders.insert(h);
      return acts;
    }
    if (l.dirty == h) return acts;
    if (l.dirty != kNoDevice) {
      acts.push_back({T::kWriteBack, l.dirty, home});
      acts.push_back({T::kBackInvalidate, home, l.dirty});
      acts.push_back({T::kFetch, home, h});
    } else {
      for (DeviceId s : l.holders) {
        if (s != h) acts.push_back({T::kBackInvalidate, home, s});
      }
      if (!l.holders.count(h)) acts.push_back({T::kFetch, home, h});
    }
    l.holders = {h};
    l.dirty = h;
    return acts;
  }
};

void check_snapshot(const Directory& dir, const Mirror& mir,
                    std::uint64_t line) {
  Directory::Entry e = dir.line_entry(line);
  auto it = mir.lines.find(line);
  if (it == mir.lines.end() || it->second.holders.empty()) {
    REQUIRE(e.state == LineState::kInvalid);
    return;
  }
  const Mirror::Line& m = it->second;
  if (m.dirty != kNoDevice) {
    REQUIRE(e.state == LineState::kModified);
    REQUIRE(e.owner == m.dirty);
  } else {
    REQUIRE(e.state == LineState::kShared);
    std::vector<DeviceId> holders(m.holders.begin(), m.holders.end());
    REQUIRE(e.sharers == holders);
  }
}

}  // namespace

TEST_CASE("msi transition table: every state/op pair emits the msi messages") {
  const DeviceId home = 99, h1 = 1, h2 = 2, h3 = 3;

  SUBCASE("read miss on invalid fetches and shares") {
    Directory d(make_region({h1, h2, h3}));
    CHECK(d.line_entry(5).state == LineState::kInvalid);
    CHECK(acts_eq(d.access(h1, 5, AccessOp::kRead), {{T::kFetch, home, h1}}));
    Directory::Entry e = d.line_entry(5);
    CHECK(e.state == LineState::kShared);
    CHECK(e.sharers == std::vector<DeviceId>{h1});
    CHECK(d.stats().fetches == 1);
  }

  SUBCASE("read hit on shared is silent; new reader fetches") {
    Directory d(make_region({h1, h2, h3}));
    d.access(h1, 0, AccessOp::kRead);
    CHECK(acts_eq(d.access(h1, 0, AccessOp::kRead), {}));
    CHECK(d.stats().hits == 1);
    CHECK(acts_eq(d.access(h2, 0, AccessOp::kRead), {{T::kFetch, home, h2}}));
    CHECK(d.line_entry(0).sharers == std::vector<DeviceId>{h1, h2});
  }

  SUBCASE("read of a dirty line forces writeback and downgrades to shared") {
    Directory d(make_region({h1, h2, h3}));
    d.access(h2, 0, AccessOp::kWrite);
    CHECK(acts_eq(d.access(h1, 0, AccessOp::kRead),
                  {{T::kWriteBack, h2, home}, {T::kFetch, home, h1}}));
    Directory::Entry e = d.line_entry(0);
    CHECK(e.state == LineState::kShared);
    CHECK(e.sharers == std::vector<DeviceId>{h1, h2});
    CHECK(d.stats().writebacks == 1);
    // Owner reading its own dirty line is a hit.
    d.access(h3, 1, AccessOp::kWrite);
    CHECK(acts_eq(d.access(h3, 1, AccessOp::kRead), {}));
  }

  SUBCASE("write miss on invalid is a read-for-ownership") {
    Directory d(make_region({h1, h2, h3}));
    CHECK(acts_eq(d.access(h1, 0, AccessOp::kWrite), {{T::kFetch, home, h1}}));
    Directory::Entry e = d.line_entry(0);
    CHECK(e.state == LineState::kModified);
    CHECK(e.owner == h1);
  }

  SUBCASE("write to a shared line back-invalidates every other sharer") {
    Directory d(make_region({h1, h2, h3}));
    d.access(h1, 0, AccessOp::kRead);
    d.access(h2, 0, AccessOp::kRead);
    d.access(h3, 0, AccessOp::kRead);
    // h2 upgrades: invals to h1 and h3 in sharer order, no fetch needed.
    CHECK(acts_eq(d.access(h2, 0, AccessOp::kWrite),
                  {{T::kBackInvalidate, home, h1},
                   {T::kBackInvalidate, home, h3}}));
    CHECK(d.line_entry(0).owner == h2);
    CHECK(d.stats().back_invalidations == 2);
  }

  SUBCASE("write by a non-sharer invalidates then fetches") {
    Directory d(make_region({h1, h2, h3}));
    d.access(h1, 0, AccessOp::kRead);
    CHECK(acts_eq(d.access(h2, 0, AccessOp::kWrite),
                  {{T::kBackInvalidate, home, h1}, {T::kFetch, home, h2}}));
  }

  SUBCASE("sole sharer upgrades silently") {
    Directory d(make_region({h1, h2, h3}));
    d.access(h1, 0, AccessOp::kRead);
    CHECK(acts_eq(d.access(h1, 0, AccessOp::kWrite), {}));
    CHECK(d.line_entry(0).state == LineState::kModified);
    CHECK(d.stats().hits == 1);
  }

  SUBCASE("write steals ownership: writeback, inval, fetch") {
    Directory d(make_region({h1, h2, h3}));
    d.access(h1, 0, AccessOp::kWrite);
    CHECK(acts_eq(d.access(h2, 0, AccessOp::kWrite),
                  {{T::kWriteBack, h1, home},
                   {T::kBackInvalidate, home, h1},
                   {T::kFetch, home, h2}}));
    CHECK(d.line_entry(0).owner == h2);
    // Repeated writes by the owner are silent.
    CHECK(acts_eq(d.access(h2, 0, AccessOp::kWrite), {}));
  }
}

TEST_CASE("random traces match the mirror model and never have two writers") {
  const DeviceId home = 99;
  const std::vector<DeviceId> hosts = {1, 2, 3};
  for (std::uint64_t seed : {11ull, 12ull}) {
    Region r = make_region(hosts);
    Directory dir(r);
    Mirror mir{home};
    std::map<std::uint64_t, DeviceId> m_holder;  // from emitted messages only
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 20000; ++i) {
      DeviceId h = hosts[rng() % hosts.size()];
      std::uint64_t line = rng() % r.line_count();
      AccessOp op = (rng() % 2) ? AccessOp::kWrite : AccessOp::kRead;
      std::vector<Act> got = dir.access(h, line, op);
      std::vector<Act> want = mir.access(h, line, op);
      REQUIRE(acts_eq(got, want));
      check_snapshot(dir, mir, line);

      // Safety: a new writer must displace the previous one via an explicit
      // writeback or back-invalidation; two live owners are impossible.
      auto displaced = [&](DeviceId prev) {
        return std::any_of(got.begin(), got.end(), [&](const Act& a) {
          return (a.type == T::kWriteBack && a.src == prev) ||
                 (a.type == T::kBackInvalidate && a.dst == prev);
        });
      };
      auto it = m_holder.find(line);
      if (op == AccessOp::kWrite) {
        if (it != m_holder.end() && it->second != h) {
          REQUIRE(displaced(it->second));
        }
        m_holder[line] = h;
      } else if (it != m_holder.end() && it->second != h) {
        REQUIRE(displaced(it->second));
        m_holder.erase(it);
      }
    }
    CHECK(dir.stats().fetches > 0);
    CHECK(dir.stats().back_invalidations > 0);
  }
}

TEST_CASE("partitioned regions never back-invalidate") {
  Region r = make_region({7});
  REQUIRE(r.mode == RegionMode::kPartitioned);
  Directory d(r);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10000; ++i) {
    std::uint64_t line = rng() % r.line_count();
    AccessOp op = (rng() % 2) ? AccessOp::kWrite : AccessOp::kRead;
    for (const Act& a : d.access(7, line, op)) {
      CHECK(a.type != T::kBackInvalidate);
    }
  }
  CHECK(d.stats().back_invalidations == 0);
  CHECK_THROWS_WITH_AS(d.access(8, 0, AccessOp::kRead),
                       doctest::Contains("not-owner"), SimError);
}

TEST_CASE("out-of-range lines are rejected") {
  Directory d(make_region({1, 2}, 16));
  CHECK_THROWS_WITH_AS(d.access(1, 16, AccessOp::kRead),
                       doctest::Contains("bad-address"), SimError);
  d.access(1, 15, AccessOp::kRead);  // last line is fine
}

TEST_CASE("region allocation picks the lowest tray with room") {
  Fabric f;
  DeviceId h0 = f.add_device(make_host("h0"));
  DeviceId t0 = f.add_device(make_tray("t0", 1 << 20));
  DeviceId t1 = f.add_device(make_tray("t1", 1 << 20));

  Region a = allocate_region(f, {h0}, 512 << 10, RegionMode::kPartitioned);
  CHECK(a.home_tray == t0);
  CHECK(f.free_bytes(t0) == 512 << 10);

  // 768 KiB no longer fits on t0, so it spills to t1.
  Region b = allocate_region(f, {h0}, 768 << 10, RegionMode::kPartitioned);
  CHECK(b.home_tray == t1);
  CHECK(b.id == a.id + 1);

  CHECK_THROWS_WITH_AS(
      allocate_region(f, {h0}, 1 << 20, RegionMode::kPartitioned),
      doctest::Contains("no-capacity"), SimError);
}

TEST_CASE("region allocation validates parameters and fabric generation") {
  Fabric f;
  DeviceId h0 = f.add_device(make_host("h0"));
  DeviceId h1 = f.add_device(make_host("h1"));
  f.add_device(make_tray("t0", 1 << 20));

  CHECK_THROWS_WITH_AS(allocate_region(f, {}, 4096, RegionMode::kPartitioned),
                       doctest::Contains("bad-params"), SimError);
  CHECK_THROWS_WITH_AS(allocate_region(f, {h0}, 0, RegionMode::kPartitioned),
                       doctest::Contains("bad-params"), SimError);
  CHECK_THROWS_WITH_AS(allocate_region(f, {h0}, 100, RegionMode::kPartitioned),
                       doctest::Contains("bad-params"), SimError);

  f.set_cxl_mode(CxlMode::kV2);
  CHECK_THROWS_WITH_AS(allocate_region(f, {h0, h1}, 4096, RegionMode::kShared),
                       doctest::Contains("sharing-unsupported"), SimError);
  // Partitioned (pooled, single-writer) regions work on either generation.
  CHECK(allocate_region(f, {h0}, 4096, RegionMode::kPartitioned).home_tray !=
        kNoDevice);

  f.set_cxl_mode(CxlMode::kV3);
  Region r = allocate_region(f, {h1, h0}, 4096, RegionMode::kShared);
  CHECK(r.hosts == std::vector<DeviceId>{h0, h1});  // stored sorted
}

// Copyright 2026, The armcache Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <vector>

#include "armcache/cachesim.hpp"
#include "armcache/config.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace armcache;

namespace {

CacheLevelId l1(LevelKind k, std::uint32_t core) { return {k, core}; }
CacheLevelId l2(std::uint32_t cluster) { return {LevelKind::l2, cluster}; }

}  // namespace

TEST_CASE("set index extracts the bits above the line offset") {
  CacheGeometry g{64, 2048, 16};
  CHECK(set_index(g, PhysicalAddress{0x11040}) == 1089);
  CHECK(set_index(g, PhysicalAddress{0}) == 0);
  CHECK(set_index(g, PhysicalAddress{64ull * 2048}) == 0);
  CHECK(set_index(g, PhysicalAddress{64ull * 2048 + 64}) == 1);
  CacheGeometry wide{128, 2048, 8};
  CHECK(set_index(wide, PhysicalAddress{0x11040}) == (0x11040 >> 7) % 2048);
}

TEST_CASE("cold access comes from DRAM and a repeat from L1") {
  Hierarchy h(load_profile("galaxy-s6"), 1);
  PhysicalAddress a{0x40000};
  CHECK(h.access(0, a, AccessKind::data).serviced_by == ServicedBy::dram);
  CHECK(h.access(0, a, AccessKind::data).serviced_by == ServicedBy::l1);
  CHECK(h.access(0, a, AccessKind::instruction).serviced_by != ServicedBy::l1);
}

TEST_CASE("coherent cross-cluster access is a remote hit near the remote latency") {
  DeviceProfile p = load_profile("galaxy-s6");
  Hierarchy h(p, 2);
  REQUIRE(h.cluster_of(0) != h.cluster_of(4));
  double sum = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    PhysicalAddress a{0x100000 + 64ull * i};
    h.access(0, a, AccessKind::data);
    auto out = h.access(4, a, AccessKind::data);
    REQUIRE(out.serviced_by == ServicedBy::remote);
    sum += static_cast<double>(out.cycles);
  }
  double mean = sum / n;
  CHECK(mean >= p.latency.remote_hit.base);
  CHECK(mean <= p.latency.remote_hit.base + 2 * p.latency.remote_hit.jitter);
  CHECK(mean < p.latency.dram.base);
}

TEST_CASE("non-coherent clusters do not serve each other") {
  DeviceProfile p = load_profile("galaxy-s6");
  p.coherent_across_clusters = false;
  Hierarchy h(p, 3);
  PhysicalAddress a{0x80000};
  h.access(0, a, AccessKind::data);
  CHECK(h.access(4, a, AccessKind::data).serviced_by == ServicedBy::dram);
}

TEST_CASE("flush latency classes and effect") {
  DeviceProfile p = load_profile("galaxy-s6");
  Hierarchy h(p, 4);
  double uncached = 0, cached = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    PhysicalAddress a{0x200000 + 64ull * i};
    uncached += static_cast<double>(h.flush(0, a));
    h.access(0, a, AccessKind::data);
    cached += static_cast<double>(h.flush(0, a));
    CHECK_FALSE(h.resident(a));
    CHECK(h.access(0, a, AccessKind::data).serviced_by == ServicedBy::dram);
  }
  const auto& u = p.latency.flush_uncached;
  const auto& c = p.latency.flush_cached;
  CHECK(uncached / n == doctest::Approx(u.base + u.jitter).epsilon(0.1));
  CHECK(cached / n == doctest::Approx(c.base + c.jitter).epsilon(0.1));
}

TEST_CASE("flush is unsupported without the instruction") {
  Hierarchy h(load_profile("alcatel-pop2"), 5);
  try {
    h.flush(0, PhysicalAddress{0x1000});
    FAIL("expected unsupported");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unsupported);
  }
}

TEST_CASE("out-of-range physical address faults") {
  DeviceProfile p = load_profile("alcatel-pop2");
  Hierarchy h(p, 6);
  CHECK_THROWS_AS(h.access(0, PhysicalAddress{p.physical_memory}, AccessKind::data), Error);
}

TEST_CASE("occupancy snapshot of an LRU set") {
  Hierarchy h(test::test_profile("toy-lru16"), 7);
  const std::uint64_t stride = 64 * 64;  // one set apart
  CHECK(h.occupancy_snapshot(l2(0), 3).empty());
  h.access(0, PhysicalAddress{3 * 64}, AccessKind::data);
  auto one = h.occupancy_snapshot(l2(0), 3);
  REQUIRE(one.size() == 1);
  CHECK(one[0].value == 3 * 64);
  for (std::uint64_t k = 1; k <= 16; ++k)
    h.access(0, PhysicalAddress{3 * 64 + k * stride}, AccessKind::data);
  auto full = h.occupancy_snapshot(l2(0), 3);
  CHECK(full.size() == 16);
  CHECK_FALSE(h.resident(PhysicalAddress{3 * 64}));
  CHECK(h.resident(PhysicalAddress{3 * 64 + stride}));
}

TEST_CASE("random replacement survival law") {
  LevelConfig cfg{{64, 4, 16}, Replacement::pseudo_random};
  CacheArray arr(cfg, 11);
  const std::uint64_t stride = 64 * 4;
  const int trials = 100000;
  for (int k : {4, 16, 32}) {
    int survived = 0;
    std::uint64_t next = 0;
    const std::uint64_t marked = 0;
    for (int t = 0; t < trials; ++t) {
      // Replacement may pick empty ways, so fill until the set is full with
      // the marked line still in it.
      do {
        arr.clear();
        arr.insert(marked, AccessKind::data);
        int filled = 1;
        while (filled < 16) {
          std::uint64_t filler = (1000 + next++) * stride;
          if (arr.insert(filler, AccessKind::data) == CacheArray::kEmpty) ++filled;
        }
      } while (!arr.contains(marked));
      for (int i = 0; i < k; ++i) arr.insert((1000 + next++) * stride, AccessKind::data);
      survived += arr.contains(marked);
    }
    double expected = std::pow(15.0 / 16.0, k);
    CHECK(std::abs(static_cast<double>(survived) / trials - expected) < 0.01);
  }
}

TEST_CASE("inclusive kind: every L1 line is also in L2") {
  Hierarchy h(load_profile("galaxy-s6"), 8);
  Rng rng(42);
  // 64 lines over one A53 L1 set and two L2 sets, with a data pool mixed in.
  std::vector<PhysicalAddress> insn, data;
  for (std::uint64_t k = 0; k < 64; ++k) {
    insn.push_back({0x400000 + k * 8192});
    data.push_back({0x400040 + k * 8192});
  }
  for (int step = 0; step < 20000; ++step) {
    bool is_insn = rng() % 2;
    auto& pool = is_insn ? insn : data;
    std::uint32_t core = rng() % 2;
    h.access(core, pool[rng() % pool.size()], is_insn ? AccessKind::instruction : AccessKind::data);
    for (std::uint32_t c = 0; c < 2; ++c)
      for (auto a : insn)
        if (h.resident_in(l1(LevelKind::l1i, c), a)) REQUIRE(h.resident_in(l2(0), a));
  }
}

TEST_CASE("victim kind: L2 fills only on L1 eviction") {
  Hierarchy h(load_profile("alcatel-pop2"), 9);
  Rng rng(43);
  std::vector<PhysicalAddress> data;
  for (std::uint64_t k = 0; k < 48; ++k) data.push_back({0x800000 + k * 8192});
  for (int step = 0; step < 20000; ++step) {
    std::vector<bool> in_l1, in_l2;
    for (auto a : data) {
      in_l1.push_back(h.resident_in(l1(LevelKind::l1d, 0), a));
      in_l2.push_back(h.resident_in(l2(0), a));
    }
    h.access(0, data[rng() % data.size()], AccessKind::data);
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (in_l2[i] || !h.resident_in(l2(0), data[i])) continue;
      REQUIRE(in_l1[i]);
      REQUIRE_FALSE(h.resident_in(l1(LevelKind::l1d, 0), data[i]));
    }
  }
}

TEST_CASE("identical seed and script give identical outcomes") {
  auto run = [](std::uint64_t seed) {
    Hierarchy h(load_profile("galaxy-s6"), seed);
    Rng rng(5);
    std::vector<std::pair<int, Cycles>> out;
    for (int i = 0; i < 5000; ++i) {
      auto o = h.access(rng() % 8, PhysicalAddress{(rng() % 4096) * 64},
                        rng() % 2 ? AccessKind::data : AccessKind::instruction);
      out.emplace_back(static_cast<int>(o.serviced_by), o.cycles);
    }
    return out;
  };
  CHECK(run(77) == run(77));
  CHECK(run(77) != run(78));
}

TEST_CASE("latency model ordering is validated") {
  LatencyModel m;
  CHECK_NOTHROW(m.validate());
  m.remote_hit.base = m.dram.base + 1;
  CHECK_THROWS_AS(m.validate(), Error);
}

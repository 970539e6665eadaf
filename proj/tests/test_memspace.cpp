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

#include <algorithm>
#include <set>

#include "armcache/eviction.hpp"
#include "armcache/memspace.hpp"
#include "doctest.h"

using namespace armcache;

TEST_CASE("shared object maps to the same frames in two processes") {
  PhysicalMemory mem(16 << 20, 4096, 1);
  ProcessSpace p(mem, 1), q(mem, 2);
  q.map_private(3 * 4096);  // shift q's virtual layout
  const auto& a = p.map_shared("libinput", 5 * 4096);
  const auto& b = q.map_shared("libinput", 5 * 4096);
  CHECK(a.frames == b.frames);
  for (std::uint64_t off = 0; off < a.length; off += 452)
    CHECK(p.translate(a.virtual_base + off) == q.translate(b.virtual_base + off));
}

TEST_CASE("private frames are disjoint from shared frames") {
  PhysicalMemory mem(16 << 20, 4096, 2);
  ProcessSpace p(mem, 1), q(mem, 2);
  const auto& s = p.map_shared("libinput", 8 * 4096);
  q.map_shared("libinput", 8 * 4096);
  const auto& m = p.map_private(32 * 4096);
  const auto& n = q.map_private(32 * 4096);
  std::set<std::uint64_t> shared(s.frames.begin(), s.frames.end());
  for (auto f : m.frames) CHECK(shared.count(f) == 0);
  for (auto f : n.frames) CHECK(shared.count(f) == 0);
  std::set<std::uint64_t> mine(m.frames.begin(), m.frames.end());
  for (auto f : n.frames) CHECK(mine.count(f) == 0);
}

TEST_CASE("mapping length rounds up to whole pages") {
  PhysicalMemory mem(1 << 20, 4096, 3);
  ProcessSpace p(mem, 1);
  CHECK(p.map_private(100).length == 4096);
  CHECK(p.map_private(4097).length == 8192);
}

TEST_CASE("translate follows the frame list") {
  PhysicalMemory mem(1 << 20, 4096, 4);
  ProcessSpace p(mem, 1);
  const auto& m = p.map_private(2 * 4096);
  CHECK(p.translate(m.virtual_base).value == m.frames[0] * 4096);
  CHECK(p.translate(m.virtual_base + 4096 + 4).value == m.frames[1] * 4096 + 4);
  CHECK(p.translate(m.virtual_base + 123) == p.translate(m.virtual_base + 123));
  try {
    p.translate(m.virtual_base + 3 * 4096);
    FAIL("expected a fault");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::fault);
  }
  CHECK_THROWS_AS(p.translate(VirtualAddress{0x1000}), Error);
}

TEST_CASE("pagemap query honours the restriction") {
  PhysicalMemory mem(1 << 20, 4096, 5);
  ProcessSpace p(mem, 1);
  const auto& m = p.map_private(4096);
  auto v = m.virtual_base + 64;
  REQUIRE(p.pagemap_query(v).has_value());
  CHECK(*p.pagemap_query(v) == p.translate(v));
  p.set_pagemap_restricted(true);
  CHECK_FALSE(p.pagemap_query(v).has_value());

  CacheGeometry g{64, 512, 16};
  const auto& big = p.map_private(64 * 4096);
  auto pool = page_stride_pool(big, big.virtual_base);
  try {
    build_eviction_set(p, big.virtual_base, pool, 8, g);
    FAIL("expected no physical oracle");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::no_physical_oracle);
    CHECK(std::string(e.what()).find("no physical oracle") != std::string::npos);
  }
}

TEST_CASE("allocation fails when memory runs out") {
  PhysicalMemory mem(8 * 4096, 4096, 6);
  ProcessSpace p(mem, 1);
  p.map_private(8 * 4096);
  try {
    p.map_private(4096);
    FAIL("expected out of memory");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::out_of_memory);
  }
}

TEST_CASE("frame assignment replays for a fixed seed") {
  auto script = [](std::uint64_t seed) {
    PhysicalMemory mem(16 << 20, 4096, seed);
    ProcessSpace p(mem, 1), q(mem, 2);
    std::vector<std::uint64_t> out;
    for (const auto* m : {&p.map_private(5 * 4096), &q.map_shared("lib", 3 * 4096),
                          &p.map_shared("lib", 4 * 4096), &q.map_private(4096)})
      out.insert(out.end(), m->frames.begin(), m->frames.end());
    return out;
  };
  CHECK(script(9) == script(9));
  CHECK(script(9) != script(10));
}

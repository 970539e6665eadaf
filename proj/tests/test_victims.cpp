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

#include <openssl/evp.h>

#include <algorithm>
#include <set>
#include <vector>

#include "armcache/attacks.hpp"
#include "armcache/config.hpp"
#include "armcache/eviction.hpp"
#include "armcache/memspace.hpp"
#include "armcache/scenario.hpp"
#include "armcache/scheduler.hpp"
#include "armcache/victims.hpp"
#include "doctest.h"

using namespace armcache;

namespace {

// OpenSSL's AES-128-ECB as the reference cipher.
Block reference_aes(const Block& key, const Block& pt) {
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  REQUIRE(ctx != nullptr);
  REQUIRE(EVP_EncryptInit_ex(ctx, EVP_aes_128_ecb(), nullptr, key.data(), nullptr) == 1);
  EVP_CIPHER_CTX_set_padding(ctx, 0);
  Block out{};
  int len = 0;
  REQUIRE(EVP_EncryptUpdate(ctx, out.data(), &len, pt.data(), 16) == 1);
  REQUIRE(len == 16);
  EVP_CIPHER_CTX_free(ctx);
  return out;
}

Block from_hex(const char* hex) {
  Block b{};
  for (int i = 0; i < 16; ++i) {
    unsigned v = 0;
    std::sscanf(hex + 2 * i, "%2x", &v);
    b[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
  }
  return b;
}

struct Proc {
  PhysicalMemory mem{64 << 20, 4096, 1};
  ProcessSpace proc{mem, 1};
};

EventLibrary shipped_library() {
  return parse_template_spec(load_scenario_text("libinput")).scenario.library;
}

}  // namespace

TEST_CASE("T-table AES matches the published test vector") {
  Proc p;
  Block key = from_hex("000102030405060708090a0b0c0d0e0f");
  TTableAES aes(p.proc, TableMode::private_copy, key, 1);
  Block ct = aes.encrypt(from_hex("00112233445566778899aabbccddeeff"));
  CHECK(ct == from_hex("69c4e0d86a7b0430d8cdb78070b4c55a"));
  CHECK(reference_aes(key, from_hex("00112233445566778899aabbccddeeff")) == ct);
}

TEST_CASE("T-table AES equals the reference cipher on random inputs") {
  Proc p;
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    Block key{}, pt{};
    for (auto& b : key) b = static_cast<std::uint8_t>(rng());
    for (auto& b : pt) b = static_cast<std::uint8_t>(rng());
    TTableAES aes(p.proc, TableMode::private_copy, key, static_cast<std::uint64_t>(i));
    REQUIRE(aes.encrypt(pt) == reference_aes(key, pt));
  }
}

TEST_CASE("first lookup into T0 is plaintext xor key") {
  Proc p;
  TTableAES aes(p.proc, TableMode::shared, Block{}, 2);
  Block pt{};
  pt[0] = 0x5A;
  std::vector<std::tuple<int, int, int>> trace;
  aes.encrypt(pt, [&](int r, int t, std::uint8_t idx) { trace.emplace_back(r, t, idx); });
  REQUIRE_FALSE(trace.empty());
  CHECK(trace.front() == std::make_tuple(1, 0, 0x5A));
  CHECK(trace.size() == 160);
  std::vector<std::tuple<int, int, int>> again;
  aes.encrypt(pt, [&](int r, int t, std::uint8_t idx) { again.emplace_back(r, t, idx); });
  CHECK(trace == again);
}

TEST_CASE("table entries sit at base + disalignment + 1024 t + 4 i") {
  PhysicalMemory mem(64 << 20, 4096, 3);
  ProcessSpace a(mem, 1), b(mem, 2);
  TTableAES x(a, TableMode::shared, Block{}, 7);
  TTableAES y(b, TableMode::shared, Block{}, 7);
  CHECK(x.table_offset() % 64 == x.disalignment());
  for (int t = 0; t < 4; ++t)
    for (int i : {0, 1, 15, 16, 255}) {
      auto idx = static_cast<std::uint8_t>(i);
      CHECK(x.entry_vaddr(t, idx).value ==
            x.mapping().virtual_base.value + x.table_offset() + 1024 * t + 4 * i);
      CHECK(x.entry_paddr(t, idx) == y.entry_paddr(t, idx));
    }
}

TEST_CASE("victim restarts cover many disalignments") {
  PhysicalMemory mem(256 << 20, 4096, 4);
  ProcessSpace proc(mem, 1);
  std::set<std::uint32_t> seen;
  for (std::uint64_t r = 0; r < 256; ++r)
    seen.insert(TTableAES(proc, TableMode::shared, Block{}, derive_seed(9, {r})).disalignment());
  CHECK(seen.size() >= 10);
}

TEST_CASE("run issues one data access per lookup") {
  DeviceProfile prof = load_profile("galaxy-s6");
  Hierarchy h(prof, 5);
  PhysicalMemory mem(prof.physical_memory, prof.page_size, 6);
  ProcessSpace proc(mem, 1);
  TTableAES aes(proc, TableMode::shared, from_hex("2b7e151628aed2a6abf7158809cf4f3c"), 8);
  Block pt = from_hex("6bc1bee22e409f96e93d7e117393172a");
  bool preempted = false;
  auto r = aes.run(h, 4, pt, 0, [&] { preempted = true; });
  CHECK(preempted);
  CHECK(r.ciphertext == aes.encrypt(pt));
  CHECK(r.ciphertext == from_hex("3ad77bb40d7a3660a89ecaf32466ef97"));
  CHECK(h.resident(aes.entry_paddr(0, pt[0] ^ 0x2b)));
}

TEST_CASE("event footprints") {
  EventLibrary lib = shipped_library();
  PhysicalMemory mem(64 << 20, 4096, 7);
  ProcessSpace proc(mem, 1);
  const auto& m = proc.map_shared(lib.object, lib.size);
  DeviceProfile prof = load_profile("galaxy-s6");
  Hierarchy h(prof, 7);

  VictimAgent v(h, 1);
  const auto& tap = lib.at("tap");
  auto ev = trigger_event(v, lib, proc, m.virtual_base, "tap", 1000);
  CHECK(ev.accesses <= tap.passes * tap.offsets.size());
  CHECK(ev.accesses > 0);
  CHECK(v.pending() == ev.accesses);

  VictimAgent w(h, 1);
  auto one = trigger_event(w, lib, proc, m.virtual_base, "swipe", 0, 300000);
  auto two = trigger_event(w, lib, proc, m.virtual_base, "swipe", 1'000'000, 600000);
  CHECK(static_cast<double>(two.accesses) ==
        doctest::Approx(2.0 * static_cast<double>(one.accesses)).epsilon(0.05));

  VictimAgent k(h, 1);
  auto bursts = trigger_text(k, lib, proc, m.virtual_base, "abc", 0);
  REQUIRE(bursts.size() == 3);
  for (std::size_t i = 1; i < 3; ++i) CHECK(bursts[i].start == bursts[i - 1].end + lib.inter_key_gap);
  for (const auto& b : bursts) CHECK(b.kind == "text");

  try {
    trigger_event(v, lib, proc, m.virtual_base, "pinch", 0);
    FAIL("expected unknown event");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unknown_event);
  }
}

TEST_CASE("victim agent runs accesses inside its quanta") {
  EventLibrary lib = shipped_library();
  PhysicalMemory mem(64 << 20, 4096, 8);
  ProcessSpace proc(mem, 1);
  const auto& m = proc.map_shared(lib.object, lib.size);
  Hierarchy h(load_profile("galaxy-s6"), 8);
  VictimAgent v(h, 1);
  trigger_event(v, lib, proc, m.virtual_base, "key", 0);
  v.run(0, 5000);
  for (const auto& a : v.executed()) CHECK(a.time < 5000);
  v.run(1'000'000, 2'000'000);
  CHECK(v.pending() == 0);
}

namespace {

// Distinct L2 sets holding any line of the cluster, read from the oracle.
std::set<std::uint32_t> cached_sets(const Hierarchy& h, std::uint32_t core) {
  std::set<std::uint32_t> out;
  const auto& g = h.l2_geometry(h.cluster_of(core));
  for (std::uint32_t s = 0; s < g.sets; ++s)
    if (!h.occupancy_snapshot({LevelKind::l2, h.cluster_of(core)}, s).empty()) out.insert(s);
  const auto& l1 = h.profile().clusters[h.cluster_of(core)].l1d;
  for (std::uint32_t s = 0; l1 && s < l1->geometry.sets; ++s)
    for (auto pa : h.occupancy_snapshot({LevelKind::l1d, core}, s)) out.insert(set_index(g, pa));
  return out;
}

}  // namespace

TEST_CASE("trustlet footprint depends on key validity") {
  DeviceProfile prof = load_profile("alcatel-pop2");
  Hierarchy h(prof, 9);
  PhysicalMemory mem(prof.physical_memory, prof.page_size, 9);
  TrustletConfig cfg;
  Trustlet t(h, mem, cfg, 10);

  auto invalid = t.sets_touched(1, false);
  CHECK(invalid.size() <= cfg.prefix_sets.size());
  auto valid = t.sets_touched(1, true);
  CHECK(valid.size() > invalid.size());
  auto band = t.band_for(1);
  CHECK(band.size() > (cfg.band_last - cfg.band_first) / 2);
  for (auto s : band) CHECK((s >= cfg.band_first && s <= cfg.band_last));

  for (bool ok : {false, true}) {
    h.flush_all();
    t.invoke(1, ok);
    auto seen = cached_sets(h, cfg.core);
    auto expect = t.sets_touched(1, ok);
    CHECK(std::vector<std::uint32_t>(seen.begin(), seen.end()) == expect);
  }
}

TEST_CASE("trustlet flush on entry evicts primed lines") {
  DeviceProfile prof = load_profile("alcatel-pop2");
  Hierarchy h(prof, 11);
  PhysicalMemory mem(prof.physical_memory, prof.page_size, 11);
  ProcessSpace proc(mem, 2);
  TrustletConfig cfg;
  cfg.flush_on_enter = true;
  Trustlet t(h, mem, cfg, 12);
  const auto& buf = proc.map_private(64 * 4096);
  std::vector<PhysicalAddress> lines;
  for (auto v : line_pool(buf, 64)) lines.push_back(proc.translate(v));
  for (auto pa : lines) h.access(0, pa, AccessKind::instruction);
  int calls = 0;
  t.invoke(1, true, [&] {
    if (calls++ == 0)
      for (auto pa : lines) CHECK_FALSE(h.resident(pa));
  });
  CHECK(calls == 1 + static_cast<int>(cfg.iterations));
}

TEST_CASE("scheduler interleaving replays for a seed") {
  auto run = [](std::uint64_t seed) {
    DeviceProfile prof = load_profile("galaxy-s6");
    Hierarchy h(prof, 13);
    PhysicalMemory mem(prof.physical_memory, prof.page_size, 13);
    ProcessSpace proc(mem, 1);
    EventLibrary lib = shipped_library();
    const auto& m = proc.map_shared(lib.object, lib.size);
    VictimAgent v(h, 1);
    trigger_event(v, lib, proc, m.virtual_base, "swipe", 10000);
    Attacker a(h, 0, TimerModel::preset(TimerKind::cycle_register), 14);
    a.threshold = {200};
    Scheduler sched(5000, 0.3, seed);
    sched.add(v);
    monitor(sched, a, Primitive::flush_reload, {make_probe_target(proc, m.virtual_base + lib.addresses[6])},
            800000);
    std::vector<std::pair<Cycles, std::uint64_t>> trace;
    for (const auto& x : v.executed()) trace.emplace_back(x.time, x.pa.value);
    return std::make_pair(sched.gaps(), trace);
  };
  auto a = run(21), b = run(21), c = run(22);
  CHECK(a == b);
  CHECK(a.first != c.first);
}

TEST_CASE("only preemptible agents lose quanta") {
  Hierarchy h(load_profile("galaxy-s6"), 15);
  VictimAgent v(h, 1);
  Scheduler sched(1000, 0.9, 16);
  sched.add(v);
  sched.run_until(100000);
  CHECK(sched.gaps().empty());
  CHECK(sched.now() >= 100000);
}

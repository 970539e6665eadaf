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

// Acceptance run: one PASS/FAIL line per criterion. Tolerances and time
// limits are fixed below. Arguments select a subset of criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "armcache/attacks.hpp"
#include "armcache/config.hpp"
#include "armcache/covert.hpp"
#include "armcache/eviction.hpp"
#include "armcache/experiments.hpp"
#include "armcache/memspace.hpp"
#include "armcache/scenario.hpp"

using namespace armcache;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

DeviceProfile data_profile(const std::string& name) {
  return load_profile(std::string(ARMCACHE_TEST_DATA) + "/" + name + ".json");
}

const TimerKind kTimers[] = {TimerKind::cycle_register, TimerKind::perf_syscall,
                             TimerKind::posix_clock, TimerKind::counter_thread};
const char* kProfiles[] = {"alcatel-pop2", "galaxy-s6", "oneplus-one"};

// 1. Single pass over a random 16-way set.
Outcome random_replacement() {
  DeviceProfile p = data_profile("toy-random16");
  Outcome o{true, ""};
  for (std::uint32_t m : {8u, 16u, 32u, 48u}) {
    double expected = 1.0 - std::pow(15.0 / 16.0, m);
    double got = evaluate({m, 1, 1}, p, 100000, derive_seed(1, {m})).eviction_rate;
    o.pass &= std::abs(got - expected) <= 0.01;
    o.detail += fmt("m=%u %.4f/%.4f ", m, got, expected);
  }
  return o;
}

// 2. Strategy search on alcatel-pop2.
Outcome strategy_trend() {
  DeviceProfile p = load_profile("alcatel-pop2");
  const std::uint64_t trials = 1000;
  auto ranked = search({{16, 24}, {1, 4}, {1, 6}}, p, trials, 2);
  const auto& top = ranked.front();
  std::uint32_t n = top.strategy.size;
  double rate = top.result.eviction_rate;
  // Smallest single-pass size below 3N reaching the same rate, 0 if none.
  std::uint32_t single = single_pass_size_for(rate, p, trials, 3, 1, 3 * n - 1);
  double at3n = evaluate({3 * n - 1, 1, 1}, p, trials, 4).eviction_rate;
  Outcome o;
  o.pass = rate >= 0.99 && single == 0;
  o.detail = fmt("top (%u,%u,%u) rate %.4f; single pass reaching it below N=%u: %s; N=%u rate %.4f",
                 n, top.strategy.shift, top.strategy.per_round, rate, 3 * n,
                 single ? std::to_string(single).c_str() : "none", 3 * n - 1, at3n);
  return o;
}

// 3. Hit and miss separability for every profile and timer.
Outcome latency_separability() {
  Outcome o{true, ""};
  double worst = 0;
  for (const char* name : kProfiles) {
    DeviceProfile p = load_profile(name);
    std::uint32_t helper = p.core_count() - 1;
    for (auto k : kTimers) {
      std::uint64_t seed = derive_seed(30, {static_cast<std::uint64_t>(k), p.core_count()});
      Hierarchy h(p, derive_seed(seed, {1}));
      PhysicalMemory mem(p.physical_memory, p.page_size, derive_seed(seed, {2}));
      ProcessSpace proc(mem, 1);
      std::uint32_t line = p.max_line_size();
      const auto& buf = proc.map_private(4ull * 10000 * line + line);
      std::vector<PhysicalAddress> lines;
      for (auto v : line_pool(buf, line)) lines.push_back(proc.translate(v));
      Attacker a(h, 0, TimerModel::preset(k), derive_seed(seed, {3}));
      std::span<const PhysicalAddress> all(lines);
      auto train = sample_reload(a, helper, all.subspan(0, 20000), 10000);
      auto fresh = sample_reload(a, helper, all.subspan(20000, 20000), 10000);
      double err = misclassification(calibrate(train.hits, train.misses), fresh.hits, fresh.misses);
      worst = std::max(worst, err);
      if (err >= 0.001) {
        o.pass = false;
        o.detail += fmt("%s/%s %.5f ", name, std::string(to_string(k)).c_str(), err);
      }
    }
    if (!p.coherent_across_clusters || p.clusters.size() < 2) continue;
    std::uint32_t remote = p.first_core(1);
    for (auto k : kTimers) {
      Hierarchy h(p, derive_seed(31, {static_cast<std::uint64_t>(k)}));
      TimerModel timer = TimerModel::preset(k);
      Rng rng(derive_seed(32, {static_cast<std::uint64_t>(k)}));
      double l1 = 0, rem = 0, dram = 0;
      const int n = 2000;
      for (int i = 0; i < n; ++i) {
        PhysicalAddress x{0x400000 + 64ull * i};
        dram += static_cast<double>(observe(timer, h.access(0, x, AccessKind::data).cycles, rng));
        l1 += static_cast<double>(observe(timer, h.access(0, x, AccessKind::data).cycles, rng));
        rem += static_cast<double>(observe(timer, h.access(remote, x, AccessKind::data).cycles, rng));
      }
      bool between = l1 < rem && rem < dram;
      o.pass &= between;
      if (!between || k == TimerKind::cycle_register)
        o.detail += fmt("%s/%s means L1 %.1f remote %.1f DRAM %.1f ", name,
                        std::string(to_string(k)).c_str(), l1 / n, rem / n, dram / n);
    }
  }
  o.detail = fmt("worst error %.5f; ", worst) + o.detail;
  return o;
}

// 4. Flush+Flush on alternating rounds.
Outcome flush_flush_accuracy() {
  DeviceProfile p = load_profile("galaxy-s6");
  Hierarchy h(p, 41);
  PhysicalMemory mem(p.physical_memory, p.page_size, 42);
  ProcessSpace proc(mem, 1);
  Attacker a(h, 0, TimerModel::preset(TimerKind::cycle_register), 43);
  const auto& lib = proc.map_shared("libff.so", 64 * 4096);
  std::vector<PhysicalAddress> lines;
  for (auto v : line_pool(lib, 64)) lines.push_back(proc.translate(v));
  auto s = sample_flush(a, lines, 4000);
  a.flush_threshold = calibrate(s.misses, s.hits);
  ProbeTarget t = make_probe_target(proc, lib.virtual_base + 0x1c0);
  flush_flush(a, t);
  const int rounds = 10000;
  int correct = 0;
  for (int i = 0; i < rounds; ++i) {
    bool touch = i % 2 == 0;
    if (touch) h.access(1, t.paddr, AccessKind::data);
    correct += (flush_flush(a, t).state == HitMiss::hit) == touch;
  }
  double acc = static_cast<double>(correct) / rounds;
  return {acc >= 0.99, fmt("accuracy %.4f", acc)};
}

// 5. Prime+Probe with 15 of 16 ways primed.
Outcome prime_probe_miss_fraction() {
  DeviceProfile p = load_profile("alcatel-pop2");
  Hierarchy h(p, 51);
  PhysicalMemory mem(p.physical_memory, p.page_size, 52);
  ProcessSpace att(mem, 1), vic(mem, 2);
  Attacker a(h, 0, TimerModel::preset(TimerKind::cycle_register), 53);
  a.kind = inclusive_kind(p.clusters[h.cluster_of(0)]);
  const auto& g = h.l2_geometry(h.cluster_of(0));
  if (g.ways != 16) return {false, fmt("L2 has %u ways", g.ways)};
  const auto& ab = att.map_private(16 << 20);
  auto apool = line_pool(ab, g.line_size);
  auto pl = prime(a, congruent_lines(att, apool, 77, 15, g), 15);
  auto q = quiet_stats(a, pl, 1000);
  const auto& vb = vic.map_private(16 << 20);
  auto vpool = line_pool(vb, g.line_size);
  auto vl = congruent_lines(vic, vpool, 77, 64, g);
  const int rounds = 10000;
  int missed = 0;
  for (int r = 0; r < rounds; ++r) {
    h.access(1, vl[r % vl.size()], AccessKind::data);
    missed += !(static_cast<double>(probe(a, pl).ticks) > q.threshold());
  }
  double f = static_cast<double>(missed) / rounds;
  return {f >= 0.02 && f <= 0.12, fmt("undetected %.4f (quiet mean %.1f)", f, q.mean)};
}

// 6. Covert channel, 1 MB at 1% noise over 100 seeds.
Outcome covert_reliability() {
  auto spec = parse_covert_spec(load_scenario_text("covert"));
  DeviceProfile p = load_profile(spec.profile);
  ChannelConfig cfg = spec.channel;
  if (!spec.cores_given) {
    ChannelConfig d = default_channel(p, cfg.primitive);
    cfg.sender_core = d.sender_core;
    cfg.receiver_core = d.receiver_core;
  }
  if (cfg.n != 32 || cfg.s != 8 || cfg.c != 16 || spec.noise != 0.01)
    return {false, "covert scenario does not hold the default frame and noise"};
  std::vector<std::uint8_t> payload(1 << 20);
  Rng rng(60);
  for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
  const int runs = 100;
  int clean = 0, stalled = 0;
  std::uint64_t undetected = 0;
  double bw0 = 0;
  for (int s = 0; s < runs; ++s) {
    try {
      auto r = transmit(payload, cfg, p, spec.noise, static_cast<std::uint64_t>(s));
      undetected += r.stats.undetected_error_count;
      clean += r.delivered == payload && r.stats.undetected_error_count == 0;
      if (s == 0) bw0 = r.stats.raw_bandwidth;
    } catch (const Error&) {
      ++stalled;
    }
  }
  bool reproducible = false;
  try {
    auto again = transmit(payload, cfg, p, spec.noise, 0);
    reproducible = again.stats.raw_bandwidth == bw0;
  } catch (const Error&) {
  }
  double share = static_cast<double>(clean) / runs;
  return {share >= 0.999 && reproducible,
          fmt("clean runs %d/%d, stalled %d, undetected packets %llu, bandwidth %.3f bits/Mcycle %s",
              clean, runs, stalled, static_cast<unsigned long long>(undetected), bw0,
              reproducible ? "reproducible" : "NOT reproducible")};
}

Block random_key(std::uint64_t seed) {
  Rng rng(seed);
  Block k{};
  for (auto& b : k) b = static_cast<std::uint8_t>(rng());
  return k;
}

// 7. T-table attack in both table modes.
Outcome aes_recovery() {
  auto shared = parse_aes_spec(load_scenario_text("aes-shared"));
  auto priv = parse_aes_spec(load_scenario_text("aes-private"));
  Outcome o{true, ""};
  if (shared.scenario.budget > 512 || priv.scenario.budget > 3 * 512)
    return {false, "scenario budgets exceed the limits"};
  for (const auto* spec : {&shared, &priv}) {
    DeviceProfile p = load_profile(spec->profile);
    int full = 0;
    std::uint64_t most = 0;
    for (std::uint64_t i = 0; i < 20; ++i) {
      Block key = random_key(derive_seed(70, {i}));
      auto r = aes_recover_upper_nibbles(spec->scenario, p, key, derive_seed(71, {i}));
      std::uint32_t right = 0;
      for (const auto& e : r.estimates) right += e.nibble && *e.nibble == key[e.byte] >> 4;
      full += right == 16;
      most = std::max(most, r.attack_encryptions);
    }
    bool within = most <= 16ull * spec->scenario.budget;
    o.pass &= full == 20 && within;
    o.detail += fmt("%s: %d/20 keys, max %llu encryptions (budget %u per byte); ",
                    spec->scenario.mode == TableMode::shared ? "shared E+R" : "private P+P", full,
                    static_cast<unsigned long long>(most), spec->scenario.budget);
  }
  return o;
}

// 8. Template profile and replay.
Outcome template_loop() {
  auto spec = parse_template_spec(load_scenario_text("libinput"));
  DeviceProfile p = load_profile(spec.profile);
  const auto& lib = spec.scenario.library;
  if (lib.addresses.size() != 30 || lib.kinds().size() != 5)
    return {false, "libinput scenario is not 5 events x 30 addresses"};
  auto m = profile_template(spec.scenario, p, 80);
  auto r = replay_template(spec.scenario, p, m, random_script(lib, 100, 81), 82);
  double acc = static_cast<double>(r.correct) / static_cast<double>(r.truth.size());

  auto median_hits = [&](const char* kind) {
    auto x = replay_template(spec.scenario, p, m, std::vector<std::string>(50, kind), 83);
    std::vector<std::uint64_t> hits;
    for (std::size_t i = 0; i < x.truth.size(); ++i)
      hits.push_back(x.match[i] < 0 ? 0 : x.detected[static_cast<std::size_t>(x.match[i])].hits);
    std::sort(hits.begin(), hits.end());
    return hits[hits.size() / 2];
  };
  auto tap = median_hits("tap");
  auto swipe = median_hits("swipe");
  return {acc >= 0.95 && swipe >= 3 * tap,
          fmt("replay %zu/%zu correct (%.3f); median hit run tap %llu swipe %llu", r.correct,
              r.truth.size(), acc, static_cast<unsigned long long>(tap),
              static_cast<unsigned long long>(swipe))};
}

// 9. Trustlet band localization over 100 runs per variant.
Outcome trustlet_band() {
  Outcome o{true, ""};
  for (const char* name : {"trustlet", "trustlet-flush"}) {
    auto spec = parse_trustlet_spec(load_scenario_text(name));
    DeviceProfile p = load_profile(spec.profile);
    const auto& t = spec.scenario.trustlet;
    if (spec.scenario.invocations != 20) return {false, fmt("%s: invocations != 20", name)};
    int good = 0;
    double lowest = 1.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      double share = trustlet_spy(spec.scenario, p, derive_seed(90, {s})).band_share;
      good += share >= 0.9;
      lowest = std::min(lowest, share);
    }
    o.pass &= good >= 95;
    o.detail += fmt("%s band %u-%u: %d/100 runs >= 0.9 (lowest %.3f); ", name, t.band_first,
                    t.band_last, good, lowest);
  }
  return o;
}

std::string slurp(const std::filesystem::path& f) {
  std::ifstream in(f, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 10. Byte-identical CLI reruns.
Outcome cli_determinism() {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "armcache_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "payload.bin", std::ios::binary);
    Rng rng(100);
    for (int i = 0; i < 4096; ++i) f.put(static_cast<char>(rng()));
  }
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"evict", "evict --seed 5 --grid N=16..18,A=1..2,D=1..3 --trials 200"},
      {"probe", "probe --seed 5 --events 10"},
      {"covert", "covert --seed 5 --payload payload.bin"},
      {"template", "template --seed 5"},
      {"aes-attack", "aes-attack --seed 5"},
      {"tz-spy", "tz-spy --seed 5 --runs 3"},
      {"histogram", "histogram --seed 5 --samples 2000"},
  };
  Outcome o{true, ""};
  for (const auto& [name, args] : commands) {
    std::string outs[2];
    bool ok = true;
    for (int i = 0; i < 2; ++i) {
      fs::path out = dir / (name + "." + std::to_string(i) + ".csv");
      std::string cmd = "cd \"" + dir.string() + "\" && \"" + ARMCACHE_CLI + "\" " + args +
                        " --out \"" + out.string() + "\" > /dev/null 2>&1";
      ok &= std::system(cmd.c_str()) == 0;
      outs[i] = slurp(out);
    }
    bool same = ok && !outs[0].empty() && outs[0] == outs[1];
    o.pass &= same;
    o.detail += name + (same ? " ok " : " DIFFERS ");
  }
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> all = {
      {1, "random replacement closed form", 30, random_replacement},
      {2, "eviction strategy trend", 300, strategy_trend},
      {3, "latency separability", 60, latency_separability},
      {4, "Flush+Flush accuracy", 60, flush_flush_accuracy},
      {5, "Prime+Probe miss fraction", 60, prime_probe_miss_fraction},
      {6, "covert channel reliability", 300, covert_reliability},
      {7, "AES first-round recovery", 300, aes_recovery},
      {8, "cache template closed loop", 120, template_loop},
      {9, "trustlet distinguisher", 120, trustlet_band},
      {10, "CLI determinism", 60, cli_determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool in_time = secs < c.limit_seconds;
    bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("criterion %2d: %s  %s | %s | %.1f s (limit %.0f s%s)\n", c.id,
                pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs, c.limit_seconds,
                in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

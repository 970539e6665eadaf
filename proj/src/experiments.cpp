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

#include "armcache/experiments.hpp"

#include <algorithm>
#include <map>
#include <memory>

#include "armcache/eviction.hpp"
#include "armcache/memspace.hpp"
#include "armcache/scheduler.hpp"

namespace armcache {

namespace {

// Hierarchy, memory and two processes for one run.
struct World {
  World(const DeviceProfile& p, std::uint64_t seed)
      : h(p, derive_seed(seed, {1})),
        mem(p.physical_memory, p.page_size, derive_seed(seed, {2})),
        victim(mem, 1, p.pagemap_restricted),
        attacker(mem, 2, p.pagemap_restricted) {}

  Hierarchy h;
  PhysicalMemory mem;
  ProcessSpace victim;
  ProcessSpace attacker;
};

void check_core(const Hierarchy& h, std::uint32_t core) {
  if (core >= h.core_count()) throw Error(ErrorKind::config, "core out of range");
}

// Reload threshold from the attacker's own lines; helper_core supplies the
// cross-core hits.
void calibrate_reload(Attacker& a, ProcessSpace& proc, std::uint32_t helper_core) {
  const auto& buf = proc.map_private(std::uint64_t{1} << 20);
  std::vector<PhysicalAddress> fresh;
  for (auto v : line_pool(buf, a.hierarchy().profile().max_line_size())) fresh.push_back(proc.translate(v));
  auto s = sample_reload(a, helper_core, fresh, std::min<std::size_t>(fresh.size() / 2, 1000));
  a.threshold = calibrate(s.hits, s.misses);
}

Attacker make_attacker(World& w, std::uint32_t core, TimerKind timer, std::uint32_t helper,
                       std::uint64_t seed) {
  Attacker a(w.h, core, TimerModel::preset(timer), seed);
  a.kind = inclusive_kind(w.h.profile().clusters[w.h.cluster_of(core)]);
  calibrate_reload(a, w.attacker, helper);
  w.h.flush_all();
  return a;
}

// Page-stride candidates around `anchor` from a fresh private buffer large
// enough for `count` lines congruent in the attacker's L2.
std::vector<VirtualAddress> stride_pool(ProcessSpace& proc, const CacheGeometry& g,
                                        std::uint64_t in_page, std::size_t count) {
  std::uint64_t page = proc.page_size();
  std::uint64_t groups = std::max<std::uint64_t>(1, std::uint64_t{g.sets} * g.line_size / page);
  std::uint64_t pages = groups * count * 3 + 64;
  const auto& buf = proc.map_private(pages * page);
  return page_stride_pool(buf, buf.virtual_base + in_page);
}

std::vector<ProbeTarget> template_targets(World& w, const TemplateScenario& sc,
                                          const MappingDescriptor& obj,
                                          const std::vector<std::uint64_t>& offsets) {
  std::vector<ProbeTarget> out;
  const CacheGeometry& g = w.h.l2_geometry(w.h.cluster_of(sc.attacker_core));
  std::uint32_t id = 0;
  for (auto off : offsets) {
    VirtualAddress v = obj.virtual_base + off;
    std::optional<EvictionSet> es;
    if (sc.primitive == Primitive::evict_reload || sc.primitive == Primitive::prime_probe) {
      auto pool = stride_pool(w.attacker, g, off % w.attacker.page_size(), sc.strategy.size);
      es = build_eviction_set(w.attacker, v, pool, sc.strategy.size, g);
    }
    out.push_back(make_probe_target(w.attacker, v, id++, std::move(es)));
  }
  return out;
}

MonitorOptions monitor_options(const TemplateScenario& sc) {
  MonitorOptions o;
  o.strategy = sc.strategy;
  return o;
}

}  // namespace

TemplateMatrix profile_template(const TemplateScenario& sc, const DeviceProfile& profile,
                                std::uint64_t seed) {
  const EventLibrary& lib = sc.library;
  TemplateMatrix m(lib.addresses, lib.kinds());
  for (std::size_t e = 0; e < m.events.size(); ++e) {
    for (std::size_t r = 0; r < m.addresses.size(); ++r) {
      World w(profile, derive_seed(seed, {e, r}));
      check_core(w.h, sc.attacker_core);
      check_core(w.h, sc.victim_core);
      const auto& vobj = w.victim.map_shared(lib.object, lib.size);
      const auto& aobj = w.attacker.map_shared(lib.object, lib.size);
      Attacker a = make_attacker(w, sc.attacker_core, sc.timer, sc.victim_core,
                                 derive_seed(seed, {e, r, 3}));
      auto targets = template_targets(w, sc, aobj, {m.addresses[r]});

      VictimAgent victim(w.h, sc.victim_core);
      Cycles t = 0;
      while (t < sc.cell_duration) {
        auto ev = trigger_event(victim, lib, w.victim, vobj.virtual_base, m.events[e], t);
        t = ev.end + lib.at(m.events[e]).period + sc.classify.gap_tolerance;
      }
      Scheduler sched(sc.quantum, sc.gap_probability, derive_seed(seed, {e, r, 4}));
      sched.add(victim);
      auto traces = monitor(sched, a, sc.primitive, std::move(targets), sc.cell_duration,
                            monitor_options(sc));
      for (const auto& s : traces.front().samples) m.at(r, e) += s.state == HitMiss::hit;
    }
  }
  return m;
}

ReplayResult monitor_script(const TemplateScenario& sc, const DeviceProfile& profile,
                            const std::vector<std::uint64_t>& rows,
                            const std::vector<std::string>& script, std::uint64_t seed) {
  const EventLibrary& lib = sc.library;
  World w(profile, seed);
  check_core(w.h, sc.attacker_core);
  check_core(w.h, sc.victim_core);
  const auto& vobj = w.victim.map_shared(lib.object, lib.size);
  const auto& aobj = w.attacker.map_shared(lib.object, lib.size);
  Attacker a = make_attacker(w, sc.attacker_core, sc.timer, sc.victim_core, derive_seed(seed, {3}));
  auto targets = template_targets(w, sc, aobj, rows);

  ReplayResult out;
  VictimAgent victim(w.h, sc.victim_core);
  Cycles t = sc.event_spacing / 2;
  for (const auto& kind : script) {
    out.truth.push_back(trigger_event(victim, lib, w.victim, vobj.virtual_base, kind, t));
    t = out.truth.back().end + sc.event_spacing;
  }

  Scheduler sched(sc.quantum, sc.gap_probability, derive_seed(seed, {4}));
  MonitorAgent agent(a, sc.primitive, std::move(targets), monitor_options(sc));
  sched.add(victim);
  sched.add(agent);
  sched.run_until(t);
  out.traces = agent.traces();
  out.gaps = sched.gaps();
  return out;
}

ReplayResult replay_template(const TemplateScenario& sc, const DeviceProfile& profile,
                             const TemplateMatrix& matrix, const std::vector<std::string>& script,
                             std::uint64_t seed) {
  ReplayResult out = monitor_script(sc, profile, matrix.addresses, script, seed);
  out.detected = classify_events(matrix, out.traces, sc.classify);

  // Greedy in time order: a detection matches the first unmatched truth
  // event it overlaps, widened by the gap tolerance.
  out.match.assign(out.truth.size(), -1);
  std::size_t d = 0;
  Cycles tol = sc.classify.gap_tolerance;
  for (std::size_t i = 0; i < out.truth.size(); ++i) {
    const auto& ev = out.truth[i];
    while (d < out.detected.size() && out.detected[d].end + tol < ev.start) ++d;
    if (d < out.detected.size() && out.detected[d].start <= ev.end + tol) {
      out.match[i] = static_cast<std::ptrdiff_t>(d);
      out.correct += out.detected[d].kind == ev.kind;
      ++d;
    }
  }
  return out;
}

namespace {

struct MonitoredLine {
  std::uint64_t offset = 0;      // line-aligned offset inside the victim mapping
  std::uint8_t line_class = 0;   // table-index nibble most of the line holds
};

// Line of table t with the most entries of a single nibble: the line holding
// entry 0 covers 16 - j entries of nibble 0, the one holding entry 255
// covers j entries of nibble 15.
MonitoredLine pick_line(const TTableAES& v, int t, std::uint32_t line) {
  std::uint32_t j = (v.disalignment() % line) / 4;
  std::uint64_t base = v.table_offset() + 1024 * static_cast<std::uint64_t>(t);
  if (16 - j >= j) return {base / line * line, 0};
  return {(base + 4 * 255) / line * line, 15};
}

std::uint32_t coverage(const TTableAES& v, std::uint32_t line) {
  std::uint32_t j = (v.disalignment() % line) / 4;
  return std::max(16 - j, j);
}

Block random_block(Rng& rng) {
  Block b{};
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

}  // namespace

AesAttackResult aes_recover_upper_nibbles(const AesScenario& sc, const DeviceProfile& profile,
                                          const Block& key, std::uint64_t seed) {
  if (sc.mode == TableMode::shared && sc.primitive == Primitive::prime_probe)
    throw Error(ErrorKind::config, "shared tables are attacked with er, fr or ff");
  if (sc.mode == TableMode::private_copy && sc.primitive != Primitive::prime_probe)
    throw Error(ErrorKind::config, "private tables can only be attacked with Prime+Probe");
  if (sc.budget == 0) throw Error(ErrorKind::config, "budget must be positive");
  World w(profile, seed);
  check_core(w.h, sc.attacker_core);
  check_core(w.h, sc.victim_core);
  if (w.h.cluster_of(sc.attacker_core) != w.h.cluster_of(sc.victim_core))
    throw Error(ErrorKind::config, "attacker and victim must share an L2");
  if (sc.primitive == Primitive::flush_reload || sc.primitive == Primitive::flush_flush)
    if (!profile.flush_available)
      throw Error(ErrorKind::unsupported, "profile '" + profile.name + "' has no flush instruction");

  const CacheGeometry& g = w.h.l2_geometry(w.h.cluster_of(sc.attacker_core));
  std::uint32_t line = g.line_size;
  AesAttackResult res;

  std::unique_ptr<TTableAES> victim;
  for (;;) {
    victim = std::make_unique<TTableAES>(w.victim, sc.mode, key, derive_seed(seed, {2, res.restarts}));
    if (coverage(*victim, line) >= sc.min_coverage || res.restarts >= sc.max_restarts) break;
    ++res.restarts;
  }
  res.disalignment = victim->disalignment();

  Attacker a(w.h, sc.attacker_core, TimerModel::preset(sc.timer), derive_seed(seed, {3}));
  a.kind = sc.attacker_kind.value_or(inclusive_kind(profile.clusters[w.h.cluster_of(sc.attacker_core)]));
  calibrate_reload(a, w.attacker, sc.victim_core);
  if (sc.primitive == Primitive::flush_flush) {
    const auto& buf = w.attacker.map_private(64 * w.attacker.page_size());
    std::vector<PhysicalAddress> lines;
    for (auto v : line_pool(buf, line)) lines.push_back(w.attacker.translate(v));
    auto s = sample_flush(a, lines, 2000);
    a.flush_threshold = calibrate(s.misses, s.hits);
  }
  w.h.flush_all();

  Rng prng(derive_seed(seed, {4}));
  // Warm encryption time sets the probe point.
  std::vector<Cycles> warm;
  for (int k = 0; k < 9; ++k) warm.push_back(victim->run(w.h, sc.victim_core, random_block(prng)).cycles);
  res.setup_encryptions += warm.size();
  std::sort(warm.begin() + 1, warm.end());
  auto preempt_at = static_cast<Cycles>(sc.preempt_fraction * static_cast<double>(warm[warm.size() / 2 + 1]));

  std::string object = "libcrypto.so";
  const MappingDescriptor* aobj = nullptr;
  if (sc.mode == TableMode::shared)
    aobj = &w.attacker.map_shared(object, victim->mapping().length);

  struct Monitor {
    MonitoredLine ml;
    ProbeTarget target;
    std::optional<PrimeList> prime;
    bool found = true;
  };
  std::vector<Monitor> mons;
  for (int t = 0; t < 4; ++t) {
    Monitor mon;
    mon.ml = pick_line(*victim, t, line);
    std::uint64_t in_page = mon.ml.offset % w.attacker.page_size();
    if (sc.mode == TableMode::shared) {
      VirtualAddress v = aobj->virtual_base + mon.ml.offset;
      std::optional<EvictionSet> es;
      if (sc.primitive == Primitive::evict_reload) {
        auto pool = stride_pool(w.attacker, g, in_page, sc.strategy.size);
        es = build_eviction_set(w.attacker, v, pool, sc.strategy.size, g);
      }
      mon.target = make_probe_target(w.attacker, v, static_cast<std::uint32_t>(t), std::move(es));
    } else {
      // Only the in-page bits of the set index are known.
      std::uint32_t known = static_cast<std::uint32_t>(in_page / line);
      std::uint32_t page_lines = w.attacker.page_size() / line;
      auto pool = stride_pool(w.attacker, g, in_page, g.ways);
      std::vector<SetLines> cands;
      for (std::uint32_t hi = 0; hi * page_lines < g.sets; ++hi) {
        std::uint32_t set = known + hi * page_lines;
        cands.push_back({set, congruent_lines(w.attacker, pool, set, g.ways, g)});
      }
      auto active = find_active_sets(
          a, cands, g.ways,
          [&] {
            victim->run(w.h, sc.victim_core, random_block(prng));
            ++res.setup_encryptions;
          },
          sc.search_rounds);
      if (active.empty()) {
        mon.found = false;
      } else {
        for (const auto& c : cands)
          if (c.set == active.front().set) mon.prime = prime(a, c.lines, g.ways);
      }
    }
    mons.push_back(std::move(mon));
  }

  for (std::uint32_t i = 0; i < 16; ++i) {
    Monitor& mon = mons[i % 4];
    if (!mon.found) {
      res.estimates[i] = {i, std::nullopt, 0.0};
      continue;
    }
    ByteObservations obs;
    for (std::uint32_t n = 0; n < sc.budget; ++n) {
      Block p = random_block(prng);
      p[i] = static_cast<std::uint8_t>(n * 17u);
      switch (sc.primitive) {
        case Primitive::evict_reload: run_pattern(w.h, a.core(), sc.strategy, *mon.target.evset, a.kind); break;
        case Primitive::flush_reload:
        case Primitive::flush_flush: w.h.flush(a.core(), mon.target.paddr); break;
        case Primitive::prime_probe: probe(a, *mon.prime); break;
      }
      bool hit = false;
      victim->run(w.h, sc.victim_core, p, preempt_at, [&] {
        switch (sc.primitive) {
          case Primitive::evict_reload:
          case Primitive::flush_reload:
            hit = classify(a.threshold, a.timed_access(mon.target.paddr).ticks) == HitMiss::hit;
            break;
          case Primitive::flush_flush:
            hit = flush_flush(a, mon.target).state == HitMiss::hit;
            break;
          case Primitive::prime_probe: hit = probe(a, *mon.prime).slow > 0; break;
        }
      });
      ++res.attack_encryptions;
      ++obs.trials[p[i]];
      obs.hits[p[i]] += hit;
    }
    res.estimates[i] = decide_nibble(i, obs, mon.ml.line_class, sc.margin_floor);
    if (res.estimates[i].nibble && *res.estimates[i].nibble == (key[i] >> 4)) ++res.correct;
  }
  return res;
}

TrustletSpyResult trustlet_spy(const TrustletScenario& sc, const DeviceProfile& profile,
                               std::uint64_t seed) {
  World w(profile, seed);
  check_core(w.h, sc.attacker_core);
  check_core(w.h, sc.trustlet.core);
  std::uint32_t cluster = w.h.cluster_of(sc.trustlet.core);
  if (w.h.cluster_of(sc.attacker_core) != cluster)
    throw Error(ErrorKind::config, "attacker and trustlet must share an L2");
  if (sc.invocations == 0) throw Error(ErrorKind::config, "need at least one invocation");

  Trustlet tz(w.h, w.mem, sc.trustlet, derive_seed(seed, {3}));
  Attacker a(w.h, sc.attacker_core, TimerModel::preset(sc.timer), derive_seed(seed, {4}));
  a.kind = inclusive_kind(profile.clusters[cluster]);
  calibrate_reload(a, w.attacker, sc.trustlet.core);
  w.h.flush_all();

  const CacheGeometry& g = w.h.l2_geometry(cluster);
  std::uint64_t span = std::uint64_t{g.sets} * g.line_size * g.ways;
  const auto& buf = w.attacker.map_private(4 * span);
  if (w.attacker.pagemap_restricted())
    throw Error(ErrorKind::no_physical_oracle, "set-wide Prime+Probe needs the pagemap");
  std::vector<std::vector<PhysicalAddress>> by_set(g.sets);
  for (auto v : line_pool(buf, g.line_size)) {
    PhysicalAddress pa = *w.attacker.pagemap_query(v);
    auto& s = by_set[set_index(g, pa)];
    if (s.size() < g.ways) s.push_back(pa);
  }
  std::vector<PrimeList> primes;
  for (auto& s : by_set) {
    if (s.size() < g.ways) throw Error(ErrorKind::pool_exhausted, "not enough lines for every set");
    primes.push_back(prime(a, s, g.ways));
  }

  TrustletSpyResult res;
  std::vector<std::uint64_t> scores(g.sets);
  auto sweep = [&] {
    std::uint64_t slow = 0;
    for (std::size_t s = 0; s < primes.size(); ++s) {
      auto r = probe(a, primes[s]);
      scores[s] = r.ticks;
      slow += r.slow;
    }
    return static_cast<double>(slow) / static_cast<double>(primes.size() * g.ways);
  };

  auto collect = [&](bool valid) {
    std::vector<double> sum(g.sets, 0.0);
    std::uint64_t used = 0;
    auto take = [&] {
      for (std::size_t s = 0; s < sum.size(); ++s) sum[s] += static_cast<double>(scores[s]);
      ++used;
    };
    for (std::uint32_t k = 0; k < sc.invocations; ++k) {
      if (sc.trustlet.flush_on_enter) {
        // Caches are flushed on entry and exit, so sweep while the body runs.
        tz.invoke(sc.valid_key, valid, [&] {
          if (sweep() > sc.discard_miss_share)
            ++res.sweeps_discarded;
          else
            take();
        });
      } else {
        sweep();
        tz.invoke(sc.valid_key, valid);
        sweep();
        take();
      }
    }
    res.sweeps_used += used;
    for (auto& x : sum) x = used ? x / static_cast<double>(used) : 0.0;
    return sum;
  };
  res.valid = collect(true);
  res.invalid = collect(false);
  res.mse = mse_profile(res.valid, res.invalid);
  res.band_share = res.mse.share_in(sc.trustlet.band_first, sc.trustlet.band_last);
  return res;
}

}  // namespace armcache

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

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "armcache/cachesim.hpp"
#include "armcache/eviction.hpp"
#include "armcache/memspace.hpp"
#include "armcache/scheduler.hpp"
#include "armcache/timing.hpp"

namespace armcache {

enum class Primitive : std::uint8_t { flush_reload, evict_reload, prime_probe, flush_flush };

std::string_view to_string(Primitive p);
// fr | er | pp | ff
Primitive parse_primitive(std::string_view name);

struct ProbeTarget {
  std::uint32_t id = 0;
  std::uint32_t pid = 0;
  VirtualAddress vaddr;
  PhysicalAddress paddr;  // what the attacker's own loads resolve to
  std::optional<EvictionSet> evset;
};

ProbeTarget make_probe_target(const ProcessSpace& proc, VirtualAddress v, std::uint32_t id = 0,
                              std::optional<EvictionSet> evset = std::nullopt);

// The attacker's execution context: a core, a timing source and its noise.
class Attacker {
 public:
  struct Timed {
    std::uint64_t ticks = 0;
    Cycles cycles = 0;
  };

  Attacker(Hierarchy& h, std::uint32_t core, TimerModel timer, std::uint64_t seed);

  Hierarchy& hierarchy() { return *hier_; }
  std::uint32_t core() const { return core_; }
  const TimerModel& timer() const { return timer_; }

  Timed timed_access(PhysicalAddress pa);
  Timed timed_flush(PhysicalAddress pa);
  Cycles access(PhysicalAddress pa) { return hier_->access(core_, pa, kind).cycles; }

  AccessKind kind = AccessKind::data;
  Threshold threshold;        // reload latency, below is a hit
  Threshold flush_threshold;  // flush latency, at or above is a hit

 private:
  Hierarchy* hier_;
  std::uint32_t core_;
  TimerModel timer_;
  Rng rng_;
};

// The kind whose L2 fills are inclusive, so attacker lines stay in L2 while
// cycling through a small L1. Falls back to data.
AccessKind inclusive_kind(const ClusterConfig& c);

struct ProbeResult {
  HitMiss state = HitMiss::miss;
  std::uint64_t ticks = 0;
  Cycles cycles = 0;
};

ProbeResult flush_reload(Attacker& a, const ProbeTarget& t);
ProbeResult evict_reload(Attacker& a, const ProbeTarget& t, const EvictionStrategy& s);
ProbeResult flush_flush(Attacker& a, const ProbeTarget& t);

struct PrimeList {
  std::vector<PhysicalAddress> lines;
  Cycles cycles = 0;
};

struct ProbeScore {
  std::uint64_t ticks = 0;
  Cycles cycles = 0;
  std::uint32_t slow = 0;  // accesses at or above the reload threshold
};

// Repeats timed passes until none is slow.
inline constexpr int kMaxPrimePasses = 32;

PrimeList prime(Attacker& a, std::span<const PhysicalAddress> congruent, std::size_t prime_lines);
// Backward pass that is scored, then repair passes until the prime is whole
// again. The list is reversed so successive probes alternate direction.
ProbeScore probe(Attacker& a, PrimeList& list);

struct QuietStats {
  double mean = 0.0;
  double stddev = 0.0;
  double threshold(double sigmas = 3.0) const { return mean + sigmas * stddev; }
};

// Probe scores with no victim running.
QuietStats quiet_stats(Attacker& a, PrimeList& list, std::size_t rounds);

struct LabeledTicks {
  std::vector<std::uint64_t> hits;
  std::vector<std::uint64_t> misses;
};

// Reload timings: hits alternate same-core L1 hits and loads of lines held
// by helper_core; misses are first touches. Uses two fresh lines per sample.
LabeledTicks sample_reload(Attacker& a, std::uint32_t helper_core,
                           std::span<const PhysicalAddress> fresh, std::size_t count);
// Flush timings: hits flush a cached line, misses flush it again.
LabeledTicks sample_flush(Attacker& a, std::span<const PhysicalAddress> lines, std::size_t count);

struct MonitorSample {
  Cycles timestamp = 0;  // when the probe was issued
  std::uint64_t ticks = 0;
  HitMiss state = HitMiss::miss;
};

struct MonitorTrace {
  std::uint32_t target_id = 0;
  std::vector<MonitorSample> samples;
};

struct MonitorOptions {
  EvictionStrategy strategy{24, 1, 6};  // Evict+Reload
  std::size_t quiet_rounds = 64;        // Prime+Probe calibration
  Cycles loop_overhead = 8;
};

// Attacker agent that round-robins one primitive over its targets.
class MonitorAgent : public Agent {
 public:
  MonitorAgent(Attacker& a, Primitive p, std::vector<ProbeTarget> targets,
               const MonitorOptions& opts = {});
  void run(Cycles begin, Cycles end) override;
  bool preemptible() const override { return true; }
  const std::vector<MonitorTrace>& traces() const { return traces_; }
  // Samples in completion order, tagged with the target index.
  const std::vector<std::pair<std::size_t, MonitorSample>>& sweep_log() const { return log_; }

 private:
  ProbeResult probe_one(std::size_t i);

  Attacker* a_;
  Primitive primitive_;
  std::vector<ProbeTarget> targets_;
  MonitorOptions opts_;
  std::vector<PrimeList> primes_;
  std::vector<double> score_threshold_;
  std::vector<MonitorTrace> traces_;
  std::vector<std::pair<std::size_t, MonitorSample>> log_;
  std::size_t next_ = 0;
  Cycles clock_ = 0;
};

// Schedules a MonitorAgent next to whatever agents the scheduler already
// has and runs for `duration` cycles.
std::vector<MonitorTrace> monitor(Scheduler& sched, Attacker& a, Primitive p,
                                  std::vector<ProbeTarget> targets, Cycles duration,
                                  const MonitorOptions& opts = {});

struct SetLines {
  std::uint32_t set = 0;
  std::vector<PhysicalAddress> lines;  // congruent attacker lines, at least prime_lines
};

struct SetActivity {
  std::uint32_t set = 0;
  double margin = 0.0;  // mean triggered score minus quiet mean, in ticks
};

// Prime+Probe every listed set around `rounds` quiet and `rounds` triggered
// victim runs. Keeps sets whose triggered mean clears the quiet mean by
// `sigmas` quiet deviations; most active first.
std::vector<SetActivity> find_active_sets(Attacker& a, std::span<const SetLines> sets,
                                          std::size_t prime_lines,
                                          const std::function<void()>& trigger,
                                          std::size_t rounds, double sigmas = 3.0);

// Evict+Time helper: victim runtime with warm caches, then after `evict`.
struct EvictTime {
  Cycles warm = 0;
  Cycles evicted = 0;
};
EvictTime evict_time(const std::function<Cycles()>& run_victim, const std::function<void()>& evict);

}  // namespace armcache

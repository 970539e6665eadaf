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

#include "armcache/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace armcache {

std::string_view to_string(Primitive p) {
  switch (p) {
    case Primitive::flush_reload: return "fr";
    case Primitive::evict_reload: return "er";
    case Primitive::prime_probe: return "pp";
    case Primitive::flush_flush: return "ff";
  }
  return "?";
}

Primitive parse_primitive(std::string_view name) {
  if (name == "fr" || name == "flush_reload") return Primitive::flush_reload;
  if (name == "er" || name == "evict_reload") return Primitive::evict_reload;
  if (name == "pp" || name == "prime_probe") return Primitive::prime_probe;
  if (name == "ff" || name == "flush_flush") return Primitive::flush_flush;
  throw Error(ErrorKind::config, "unknown primitive '" + std::string(name) + "'");
}

ProbeTarget make_probe_target(const ProcessSpace& proc, VirtualAddress v, std::uint32_t id,
                              std::optional<EvictionSet> evset) {
  ProbeTarget t;
  t.id = id;
  t.pid = proc.pid();
  t.vaddr = v;
  t.paddr = proc.translate(v);
  t.evset = std::move(evset);
  return t;
}

Attacker::Attacker(Hierarchy& h, std::uint32_t core, TimerModel timer, std::uint64_t seed)
    : hier_(&h), core_(core), timer_(timer), rng_(seed) {
  timer_.validate();
  if (core >= h.core_count()) throw Error(ErrorKind::precondition, "attacker core out of range");
}

Attacker::Timed Attacker::timed_access(PhysicalAddress pa) {
  Cycles c = hier_->access(core_, pa, kind).cycles;
  return {observe(timer_, c, rng_), c};
}

Attacker::Timed Attacker::timed_flush(PhysicalAddress pa) {
  Cycles c = hier_->flush(core_, pa);
  return {observe(timer_, c, rng_), c};
}

AccessKind inclusive_kind(const ClusterConfig& c) {
  if (c.data == Inclusion::inclusive) return AccessKind::data;
  if (c.instruction == Inclusion::inclusive) return AccessKind::instruction;
  return AccessKind::data;
}

namespace {

void require_flush(Attacker& a) {
  if (!a.hierarchy().profile().flush_available)
    throw Error(ErrorKind::unsupported,
                "profile '" + a.hierarchy().profile().name + "' has no flush instruction");
}

}  // namespace

ProbeResult flush_reload(Attacker& a, const ProbeTarget& t) {
  require_flush(a);
  auto r = a.timed_access(t.paddr);
  Cycles f = a.hierarchy().flush(a.core(), t.paddr);
  return {classify(a.threshold, r.ticks), r.ticks, r.cycles + f};
}

ProbeResult evict_reload(Attacker& a, const ProbeTarget& t, const EvictionStrategy& s) {
  if (!t.evset) throw Error(ErrorKind::precondition, "Evict+Reload needs an eviction set");
  auto r = a.timed_access(t.paddr);
  Cycles e = run_pattern(a.hierarchy(), a.core(), s, *t.evset, a.kind);
  return {classify(a.threshold, r.ticks), r.ticks, r.cycles + e};
}

ProbeResult flush_flush(Attacker& a, const ProbeTarget& t) {
  require_flush(a);
  auto f = a.timed_flush(t.paddr);
  return {f.ticks >= a.flush_threshold.value ? HitMiss::hit : HitMiss::miss, f.ticks, f.cycles};
}

PrimeList prime(Attacker& a, std::span<const PhysicalAddress> congruent, std::size_t prime_lines) {
  if (prime_lines > congruent.size())
    throw Error(ErrorKind::pool_exhausted, "not enough congruent lines to prime");
  PrimeList list;
  list.lines.assign(congruent.begin(), congruent.begin() + static_cast<std::ptrdiff_t>(prime_lines));
  if (list.lines.empty()) return list;
  for (int pass = 0; pass < kMaxPrimePasses; ++pass) {
    std::uint32_t slow = 0;
    for (auto pa : list.lines) {
      auto t = a.timed_access(pa);
      list.cycles += t.cycles;
      slow += t.ticks >= a.threshold.value;
    }
    if (pass > 0 && slow == 0) break;
  }
  return list;
}

ProbeScore probe(Attacker& a, PrimeList& list) {
  ProbeScore score;
  for (auto it = list.lines.rbegin(); it != list.lines.rend(); ++it) {
    auto t = a.timed_access(*it);
    score.ticks += t.ticks;
    score.cycles += t.cycles;
    score.slow += t.ticks >= a.threshold.value;
  }
  std::reverse(list.lines.begin(), list.lines.end());
  std::uint32_t slow = score.slow;
  for (int pass = 1; slow > 0 && pass < kMaxPrimePasses; ++pass) {
    slow = 0;
    for (auto pa : list.lines) {
      auto t = a.timed_access(pa);
      score.cycles += t.cycles;
      slow += t.ticks >= a.threshold.value;
    }
  }
  return score;
}

QuietStats quiet_stats(Attacker& a, PrimeList& list, std::size_t rounds) {
  QuietStats q;
  if (rounds == 0) return q;
  double sum = 0, sq = 0;
  for (std::size_t r = 0; r < rounds; ++r) {
    auto s = static_cast<double>(probe(a, list).ticks);
    sum += s;
    sq += s * s;
  }
  auto n = static_cast<double>(rounds);
  q.mean = sum / n;
  q.stddev = std::sqrt(std::max(0.0, sq / n - q.mean * q.mean));
  return q;
}

LabeledTicks sample_reload(Attacker& a, std::uint32_t helper_core,
                           std::span<const PhysicalAddress> fresh, std::size_t count) {
  if (fresh.size() < 2 * count) throw Error(ErrorKind::pool_exhausted, "not enough fresh lines");
  LabeledTicks out;
  out.hits.reserve(count);
  out.misses.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    PhysicalAddress x = fresh[2 * k], y = fresh[2 * k + 1];
    out.misses.push_back(a.timed_access(x).ticks);
    if (k % 2 == 0) {
      out.hits.push_back(a.timed_access(x).ticks);
    } else {
      a.hierarchy().access(helper_core, y, a.kind);
      out.hits.push_back(a.timed_access(y).ticks);
    }
  }
  return out;
}

LabeledTicks sample_flush(Attacker& a, std::span<const PhysicalAddress> lines, std::size_t count) {
  require_flush(a);
  if (lines.empty()) throw Error(ErrorKind::pool_exhausted, "no lines to flush");
  LabeledTicks out;
  for (std::size_t k = 0; k < count; ++k) {
    PhysicalAddress pa = lines[k % lines.size()];
    a.access(pa);
    out.hits.push_back(a.timed_flush(pa).ticks);
    out.misses.push_back(a.timed_flush(pa).ticks);
  }
  return out;
}

MonitorAgent::MonitorAgent(Attacker& a, Primitive p, std::vector<ProbeTarget> targets,
                           const MonitorOptions& opts)
    : a_(&a), primitive_(p), targets_(std::move(targets)), opts_(opts) {
  if (targets_.empty()) throw Error(ErrorKind::precondition, "monitor needs at least one target");
  for (const auto& t : targets_) traces_.push_back({t.id, {}});
  if (p == Primitive::prime_probe) {
    for (const auto& t : targets_) {
      if (!t.evset) throw Error(ErrorKind::precondition, "Prime+Probe needs congruent lines");
      std::uint32_t ways = a.hierarchy().l2_geometry(a.hierarchy().cluster_of(a.core())).ways;
      primes_.push_back(prime(a, t.evset->members, ways - 1));
      score_threshold_.push_back(quiet_stats(a, primes_.back(), opts.quiet_rounds).threshold());
    }
  }
}

ProbeResult MonitorAgent::probe_one(std::size_t i) {
  const auto& t = targets_[i];
  switch (primitive_) {
    case Primitive::flush_reload: return flush_reload(*a_, t);
    case Primitive::evict_reload: return evict_reload(*a_, t, opts_.strategy);
    case Primitive::flush_flush: return flush_flush(*a_, t);
    case Primitive::prime_probe: {
      auto s = probe(*a_, primes_[i]);
      bool active = static_cast<double>(s.ticks) > score_threshold_[i];
      return {active ? HitMiss::hit : HitMiss::miss, s.ticks, s.cycles};
    }
  }
  return {};
}

void MonitorAgent::run(Cycles begin, Cycles end) {
  clock_ = std::max(clock_, begin);
  while (clock_ < end) {
    // Stamped at issue, so a probe that overruns into a lost quantum still
    // belongs to the quantum it started in.
    Cycles issued = clock_;
    ProbeResult r = probe_one(next_);
    clock_ += r.cycles + opts_.loop_overhead;
    MonitorSample s{issued, r.ticks, r.state};
    traces_[next_].samples.push_back(s);
    log_.emplace_back(next_, s);
    next_ = (next_ + 1) % targets_.size();
  }
}

std::vector<MonitorTrace> monitor(Scheduler& sched, Attacker& a, Primitive p,
                                  std::vector<ProbeTarget> targets, Cycles duration,
                                  const MonitorOptions& opts) {
  MonitorAgent agent(a, p, std::move(targets), opts);
  sched.add(agent);
  sched.run_until(sched.now() + duration);
  sched.remove(agent);
  return agent.traces();
}

std::vector<SetActivity> find_active_sets(Attacker& a, std::span<const SetLines> sets,
                                          std::size_t prime_lines,
                                          const std::function<void()>& trigger,
                                          std::size_t rounds, double sigmas) {
  std::vector<PrimeList> primes;
  primes.reserve(sets.size());
  for (const auto& s : sets) primes.push_back(prime(a, s.lines, prime_lines));

  std::vector<double> q_sum(sets.size(), 0), q_sq(sets.size(), 0), t_sum(sets.size(), 0);
  for (std::size_t r = 0; r < rounds; ++r)
    for (std::size_t i = 0; i < sets.size(); ++i) {
      auto v = static_cast<double>(probe(a, primes[i]).ticks);
      q_sum[i] += v;
      q_sq[i] += v * v;
    }
  for (std::size_t r = 0; r < rounds; ++r) {
    trigger();
    for (std::size_t i = 0; i < sets.size(); ++i)
      t_sum[i] += static_cast<double>(probe(a, primes[i]).ticks);
  }

  std::vector<SetActivity> out;
  auto n = static_cast<double>(std::max<std::size_t>(rounds, 1));
  for (std::size_t i = 0; i < sets.size(); ++i) {
    double qm = q_sum[i] / n;
    double sd = std::sqrt(std::max(0.0, q_sq[i] / n - qm * qm));
    double margin = t_sum[i] / n - qm;
    if (margin > 0 && margin > sigmas * sd) out.push_back({sets[i].set, margin});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const SetActivity& x, const SetActivity& y) { return x.margin > y.margin; });
  return out;
}

EvictTime evict_time(const std::function<Cycles()>& run_victim, const std::function<void()>& evict) {
  run_victim();
  EvictTime t;
  t.warm = run_victim();
  evict();
  t.evicted = run_victim();
  return t;
}

}  // namespace armcache

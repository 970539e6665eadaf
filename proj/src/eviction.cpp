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

#include "armcache/eviction.hpp"

#include <algorithm>
#include <future>
#include <thread>

namespace armcache {

void EvictionStrategy::validate() const {
  if (per_round < 1 || per_round > size)
    throw Error(ErrorKind::precondition, "strategy needs 1 <= accesses per round <= set size");
  if (shift < 1 || shift > size)
    throw Error(ErrorKind::precondition, "strategy needs 1 <= shift <= set size");
}

std::vector<std::uint32_t> pattern_indices(const EvictionStrategy& s) {
  s.validate();
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i + s.per_round <= s.size; i += s.shift)
    for (std::uint32_t j = 0; j < s.per_round; ++j) out.push_back(i + j);
  return out;
}

std::vector<VirtualAddress> page_stride_pool(const MappingDescriptor& m, VirtualAddress anchor) {
  std::uint64_t page = m.length / std::max<std::size_t>(m.frames.size(), 1);
  std::uint64_t offset = (anchor.value - m.virtual_base.value) % page;
  std::vector<VirtualAddress> out;
  out.reserve(m.frames.size());
  for (std::uint64_t p = 0; p < m.frames.size(); ++p)
    out.push_back(m.virtual_base + (p * page + offset));
  return out;
}

std::vector<VirtualAddress> line_pool(const MappingDescriptor& m, std::uint32_t line_size) {
  std::vector<VirtualAddress> out;
  out.reserve(m.length / line_size);
  for (std::uint64_t off = 0; off < m.length; off += line_size) out.push_back(m.virtual_base + off);
  return out;
}

namespace {

PhysicalAddress oracle(const ProcessSpace& proc, VirtualAddress v) {
  auto pa = proc.pagemap_query(v);
  if (!pa) throw Error(ErrorKind::no_physical_oracle, "pagemap access is restricted");
  return *pa;
}

}  // namespace

EvictionSet build_eviction_set(const ProcessSpace& proc, VirtualAddress target,
                               std::span<const VirtualAddress> pool, std::size_t size,
                               const CacheGeometry& level) {
  EvictionSet es;
  es.target = oracle(proc, target);
  if (size == 0) return es;
  std::uint32_t set = set_index(level, es.target);
  std::uint64_t target_line = es.target.value >> level.line_bits();
  for (auto v : pool) {
    PhysicalAddress pa = oracle(proc, v);
    if (set_index(level, pa) != set || (pa.value >> level.line_bits()) == target_line) continue;
    bool dup = std::any_of(es.members.begin(), es.members.end(), [&](PhysicalAddress m) {
      return (m.value >> level.line_bits()) == (pa.value >> level.line_bits());
    });
    if (dup) continue;
    es.members.push_back(pa);
    if (es.members.size() == size) return es;
  }
  throw Error(ErrorKind::pool_exhausted, "found " + std::to_string(es.members.size()) + " of " +
                                             std::to_string(size) + " congruent lines");
}

std::vector<PhysicalAddress> congruent_lines(const ProcessSpace& proc,
                                             std::span<const VirtualAddress> pool,
                                             std::uint32_t set, std::size_t count,
                                             const CacheGeometry& level) {
  std::vector<PhysicalAddress> out;
  if (count == 0) return out;
  for (auto v : pool) {
    PhysicalAddress pa = oracle(proc, v);
    if (set_index(level, pa) != set) continue;
    std::uint64_t line = pa.value >> level.line_bits();
    bool dup = std::any_of(out.begin(), out.end(), [&](PhysicalAddress m) {
      return (m.value >> level.line_bits()) == line;
    });
    if (dup) continue;
    out.push_back(pa);
    if (out.size() == count) return out;
  }
  throw Error(ErrorKind::pool_exhausted, "found " + std::to_string(out.size()) + " of " +
                                             std::to_string(count) + " lines in set " +
                                             std::to_string(set));
}

Cycles run_pattern(Hierarchy& h, std::uint32_t core, const EvictionStrategy& s,
                   const EvictionSet& evset, AccessKind kind) {
  s.validate();
  if (evset.members.size() < s.size)
    throw Error(ErrorKind::precondition, "eviction set smaller than strategy size");
  Cycles total = 0;
  for (std::uint32_t i = 0; i + s.per_round <= s.size; i += s.shift)
    for (std::uint32_t j = 0; j < s.per_round; ++j)
      total += h.access(core, evset.members[i + j], kind).cycles;
  return total;
}

EvalResult evaluate(const EvictionStrategy& s, const DeviceProfile& profile, std::uint64_t trials,
                    std::uint64_t seed, const EvalOptions& opts) {
  s.validate();
  if (trials == 0) throw Error(ErrorKind::precondition, "evaluate needs at least one trial");
  Hierarchy h(profile, derive_seed(seed, {1}));
  PhysicalMemory mem(profile.physical_memory, profile.page_size, derive_seed(seed, {2}));
  ProcessSpace proc(mem, 1);
  Rng rng(derive_seed(seed, {3}));

  std::uint32_t cluster = h.cluster_of(opts.core);
  const CacheGeometry& g = h.l2_geometry(cluster);
  const auto& l1 = profile.clusters[cluster].l1(opts.kind);
  std::uint32_t l1_ways = l1 ? l1->geometry.ways : 0;
  std::size_t fill = g.ways + l1_ways;
  std::size_t filler_count = 2 * fill;
  std::size_t need = s.size + filler_count;

  // Page-stride lines hit a given set with probability page / stride.
  std::uint64_t stride = std::uint64_t{g.sets} * g.line_size;
  std::uint64_t pages_per_hit = std::max<std::uint64_t>(1, stride / profile.page_size);
  std::uint64_t pages = need * pages_per_hit * 2 + 64;
  const auto& buf = proc.map_private(pages * profile.page_size);
  auto pool = page_stride_pool(buf, buf.virtual_base);
  VirtualAddress target = pool.front();
  EvictionSet all = build_eviction_set(proc, target, std::span(pool).subspan(1), need, g);

  EvictionSet evset{all.target, {all.members.begin(), all.members.begin() + s.size}};
  std::vector<PhysicalAddress> fillers(all.members.begin() + s.size, all.members.end());

  Cycles cycles = 0;
  std::uint64_t evicted = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    h.drop(all.target);
    for (auto pa : all.members) h.drop(pa);
    // Random congruent state so replacement decisions decorrelate.
    for (std::size_t k = 0; k < fill; ++k) {
      std::size_t pick = k + static_cast<std::size_t>(rng() % (fillers.size() - k));
      std::swap(fillers[k], fillers[pick]);
      h.access(opts.core, fillers[k], opts.kind);
    }
    h.access(opts.core, all.target, opts.kind);
    cycles += run_pattern(h, opts.core, s, evset, opts.kind);
    evicted += !h.resident(all.target);
  }
  EvalResult r;
  r.trials = trials;
  r.avg_cycles = static_cast<double>(cycles) / static_cast<double>(trials);
  r.eviction_rate = static_cast<double>(evicted) / static_cast<double>(trials);
  return r;
}

std::vector<RankedStrategy> search(const StrategyGrid& grid, const DeviceProfile& profile,
                                   std::uint64_t trials, std::uint64_t seed, unsigned threads,
                                   const EvalOptions& opts) {
  std::vector<EvictionStrategy> points;
  for (std::uint32_t n = grid.size.lo; n <= grid.size.hi; ++n)
    for (std::uint32_t a = grid.shift.lo; a <= grid.shift.hi; ++a)
      for (std::uint32_t d = grid.per_round.lo; d <= grid.per_round.hi; ++d)
        if (a >= 1 && d >= 1 && a <= n && d <= n) points.push_back({n, a, d});
  if (points.empty()) throw Error(ErrorKind::precondition, "strategy grid is empty");

  std::vector<RankedStrategy> out(points.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(points.size()));
  std::vector<std::future<void>> workers;
  for (unsigned w = 0; w < threads; ++w) {
    workers.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < points.size(); i += threads) {
        const auto& p = points[i];
        out[i] = {p, evaluate(p, profile, trials,
                              derive_seed(seed, {p.size, p.shift, p.per_round}), opts)};
      }
    }));
  }
  for (auto& f : workers) f.get();

  std::stable_sort(out.begin(), out.end(), [](const RankedStrategy& x, const RankedStrategy& y) {
    if (x.result.eviction_rate != y.result.eviction_rate)
      return x.result.eviction_rate > y.result.eviction_rate;
    return x.result.avg_cycles < y.result.avg_cycles;
  });
  return out;
}

std::uint32_t single_pass_size_for(double rate, const DeviceProfile& profile,
                                   std::uint64_t trials, std::uint64_t seed, std::uint32_t from,
                                   std::uint32_t to, const EvalOptions& opts) {
  for (std::uint32_t n = std::max(from, 1u); n <= to; ++n) {
    EvalResult r = evaluate({n, 1, 1}, profile, trials, derive_seed(seed, {n, 1, 1}), opts);
    if (r.eviction_rate >= rate) return n;
  }
  return 0;
}

}  // namespace armcache

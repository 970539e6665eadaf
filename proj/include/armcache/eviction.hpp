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
#include <span>
#include <vector>

#include "armcache/cachesim.hpp"
#include "armcache/memspace.hpp"

namespace armcache {

// Loop recipe over an eviction set: `size` members, window start advancing by
// `shift`, `per_round` accesses per window.
struct EvictionStrategy {
  std::uint32_t size = 1;
  std::uint32_t shift = 1;
  std::uint32_t per_round = 1;

  void validate() const;
  bool operator==(const EvictionStrategy&) const = default;
};

// Member indices touched by one run, in order.
std::vector<std::uint32_t> pattern_indices(const EvictionStrategy& s);

struct EvictionSet {
  PhysicalAddress target;
  std::vector<PhysicalAddress> members;
};

// Virtual addresses of one line per page, at the page offset of `anchor`,
// across every page of the mapping.
std::vector<VirtualAddress> page_stride_pool(const MappingDescriptor& m, VirtualAddress anchor);

// Every line of the mapping, in address order.
std::vector<VirtualAddress> line_pool(const MappingDescriptor& m, std::uint32_t line_size);

// First `size` pool members congruent to target in `level`, in pool order.
// Needs the pagemap oracle.
EvictionSet build_eviction_set(const ProcessSpace& proc, VirtualAddress target,
                               std::span<const VirtualAddress> pool, std::size_t size,
                               const CacheGeometry& level);

// Same search keyed by set number instead of a target line.
std::vector<PhysicalAddress> congruent_lines(const ProcessSpace& proc,
                                             std::span<const VirtualAddress> pool,
                                             std::uint32_t set, std::size_t count,
                                             const CacheGeometry& level);

Cycles run_pattern(Hierarchy& h, std::uint32_t core, const EvictionStrategy& s,
                   const EvictionSet& evset, AccessKind kind = AccessKind::data);

struct EvalResult {
  double avg_cycles = 0.0;
  double eviction_rate = 0.0;
  std::uint64_t trials = 0;
};

struct EvalOptions {
  std::uint32_t core = 0;
  AccessKind kind = AccessKind::data;
};

EvalResult evaluate(const EvictionStrategy& s, const DeviceProfile& profile, std::uint64_t trials,
                    std::uint64_t seed, const EvalOptions& opts = {});

struct Range {
  std::uint32_t lo = 1;
  std::uint32_t hi = 1;
};

struct StrategyGrid {
  Range size, shift, per_round;
};

struct RankedStrategy {
  EvictionStrategy strategy;
  EvalResult result;
};

// Evaluates every valid grid point with a seed derived from (seed, N, A, D)
// and ranks by eviction rate, then by speed. `threads` = 0 picks the
// hardware concurrency; results do not depend on it.
std::vector<RankedStrategy> search(const StrategyGrid& grid, const DeviceProfile& profile,
                                   std::uint64_t trials, std::uint64_t seed,
                                   unsigned threads = 0, const EvalOptions& opts = {});

// Smallest single-pass set size in [from, to] whose rate reaches `rate`, or 0.
std::uint32_t single_pass_size_for(double rate, const DeviceProfile& profile,
                                   std::uint64_t trials, std::uint64_t seed, std::uint32_t from,
                                   std::uint32_t to, const EvalOptions& opts = {});

}  // namespace armcache

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
#include <string_view>
#include <vector>

#include "armcache/common.hpp"

namespace armcache {

enum class TimerKind : std::uint8_t { cycle_register, perf_syscall, posix_clock, counter_thread };

std::string_view to_string(TimerKind k);
// register | syscall | clock | counterthread
TimerKind parse_timer_kind(std::string_view name);

// Maps true cycles to what a userspace timing source would report.
struct TimerModel {
  TimerKind kind = TimerKind::cycle_register;
  double scale = 1.0;
  std::uint32_t granularity = 1;
  double overhead = 0.0;
  double jitter = 0.0;  // mean of geometric noise, in scaled units

  static TimerModel preset(TimerKind kind);
  void validate() const;
};

// floor((scale * cycles + overhead + noise) / granularity) * granularity
std::uint64_t observe(const TimerModel& timer, Cycles true_cycles, Rng& rng);

struct Histogram {
  std::uint64_t bin_width = 1;
  std::vector<std::uint64_t> counts;

  static Histogram build(std::span<const std::uint64_t> samples, std::uint64_t bin_width);
  std::uint64_t total() const;
};

enum class HitMiss : std::uint8_t { hit, miss };

std::string_view to_string(HitMiss h);

// Ticks below value are hits.
struct Threshold {
  std::uint64_t value = 0;
};

// Scans midpoints between consecutive distinct sample values and returns the
// one with the fewest misclassified samples, preferring the larger value on
// ties. Fails when the best achievable error exceeds a quarter of samples.
Threshold calibrate(std::span<const std::uint64_t> hits, std::span<const std::uint64_t> misses);

inline HitMiss classify(Threshold t, std::uint64_t ticks) {
  return ticks < t.value ? HitMiss::hit : HitMiss::miss;
}

// Fraction of labeled samples that classify() gets wrong.
double misclassification(Threshold t, std::span<const std::uint64_t> hits,
                         std::span<const std::uint64_t> misses);

}  // namespace armcache

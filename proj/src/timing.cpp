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

#include "armcache/timing.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace armcache {

std::string_view to_string(TimerKind k) {
  switch (k) {
    case TimerKind::cycle_register: return "register";
    case TimerKind::perf_syscall: return "syscall";
    case TimerKind::posix_clock: return "clock";
    case TimerKind::counter_thread: return "counterthread";
  }
  return "?";
}

TimerKind parse_timer_kind(std::string_view name) {
  if (name == "register") return TimerKind::cycle_register;
  if (name == "syscall") return TimerKind::perf_syscall;
  if (name == "clock") return TimerKind::posix_clock;
  if (name == "counterthread") return TimerKind::counter_thread;
  throw Error(ErrorKind::config, "unknown timer '" + std::string(name) + "'");
}

std::string_view to_string(HitMiss h) { return h == HitMiss::hit ? "hit" : "miss"; }

TimerModel TimerModel::preset(TimerKind kind) {
  switch (kind) {
    case TimerKind::cycle_register: return {kind, 1.0, 1, 0.0, 0.0};
    case TimerKind::perf_syscall: return {kind, 1.0, 1, 16.0, 3.0};
    case TimerKind::posix_clock: return {kind, 1.0, 32, 24.0, 6.0};
    case TimerKind::counter_thread: return {kind, 0.05, 1, 0.0, 0.5};
  }
  return {};
}

void TimerModel::validate() const {
  if (!(scale > 0)) throw Error(ErrorKind::config, "timer scale must be positive");
  if (granularity < 1) throw Error(ErrorKind::config, "timer granularity must be at least 1");
  if (overhead < 0 || jitter < 0) throw Error(ErrorKind::config, "timer overhead and jitter must be non-negative");
}

std::uint64_t observe(const TimerModel& t, Cycles true_cycles, Rng& rng) {
  double x = t.scale * static_cast<double>(true_cycles) + t.overhead;
  if (t.jitter > 0) {
    std::geometric_distribution<std::uint32_t> g(1.0 / (1.0 + t.jitter));
    x += g(rng);
  }
  auto ticks = static_cast<std::uint64_t>(std::floor(x));
  return ticks / t.granularity * t.granularity;
}

Histogram Histogram::build(std::span<const std::uint64_t> samples, std::uint64_t bin_width) {
  if (bin_width == 0) throw Error(ErrorKind::precondition, "bin width must be positive");
  Histogram h;
  h.bin_width = bin_width;
  for (auto s : samples) {
    std::size_t b = static_cast<std::size_t>(s / bin_width);
    if (b >= h.counts.size()) h.counts.resize(b + 1, 0);
    ++h.counts[b];
  }
  return h;
}

std::uint64_t Histogram::total() const {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

Threshold calibrate(std::span<const std::uint64_t> hits, std::span<const std::uint64_t> misses) {
  if (hits.empty() || misses.empty())
    throw Error(ErrorKind::precondition, "calibration needs hit and miss samples");
  std::vector<std::uint64_t> h(hits.begin(), hits.end()), m(misses.begin(), misses.end());
  std::sort(h.begin(), h.end());
  std::sort(m.begin(), m.end());
  std::vector<std::uint64_t> values;
  values.reserve(h.size() + m.size());
  std::merge(h.begin(), h.end(), m.begin(), m.end(), std::back_inserter(values));
  values.erase(std::unique(values.begin(), values.end()), values.end());

  std::vector<std::uint64_t> candidates;
  candidates.reserve(values.size() + 1);
  candidates.push_back(values.front());
  for (std::size_t i = 1; i < values.size(); ++i)
    candidates.push_back(values[i - 1] + (values[i] - values[i - 1] + 1) / 2);
  candidates.push_back(values.back() + 1);

  std::uint64_t best_err = ~std::uint64_t{0};
  std::uint64_t best = 0;
  for (auto t : candidates) {
    // hits at or above t plus misses below t
    auto hit_wrong = static_cast<std::uint64_t>(h.end() - std::lower_bound(h.begin(), h.end(), t));
    auto miss_wrong = static_cast<std::uint64_t>(std::lower_bound(m.begin(), m.end(), t) - m.begin());
    std::uint64_t err = hit_wrong + miss_wrong;
    if (err < best_err || (err == best_err && t > best)) {
      best_err = err;
      best = t;
    }
  }
  double rate = static_cast<double>(best_err) / static_cast<double>(h.size() + m.size());
  if (rate > 0.25)
    throw Error(ErrorKind::calibration_failed,
                "best threshold misclassifies " + std::to_string(rate * 100) + "% of samples");
  return Threshold{best};
}

double misclassification(Threshold t, std::span<const std::uint64_t> hits,
                         std::span<const std::uint64_t> misses) {
  std::uint64_t wrong = 0;
  for (auto v : hits) wrong += classify(t, v) != HitMiss::hit;
  for (auto v : misses) wrong += classify(t, v) != HitMiss::miss;
  return static_cast<double>(wrong) / static_cast<double>(hits.size() + misses.size());
}

}  // namespace armcache

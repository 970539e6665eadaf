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
#include <optional>
#include <string>
#include <vector>

#include "armcache/analysis.hpp"
#include "armcache/attacks.hpp"
#include "armcache/cachesim.hpp"
#include "armcache/timing.hpp"
#include "armcache/victims.hpp"

namespace armcache {

// Scripted end-to-end runs. Each call builds its own hierarchy, memory and
// processes from the seed.

struct TemplateScenario {
  std::uint32_t attacker_core = 0;
  std::uint32_t victim_core = 1;
  Primitive primitive = Primitive::flush_reload;
  TimerKind timer = TimerKind::cycle_register;
  EvictionStrategy strategy{24, 1, 6};
  Cycles quantum = 5000;
  double gap_probability = 0.0;
  Cycles cell_duration = 2'000'000;  // profiling time per (address, event)
  Cycles event_spacing = 400'000;    // idle time after each event
  ClassifyOptions classify;
  EventLibrary library;
};

// One fresh run per cell: the event repeats for cell_duration while only
// that address is monitored.
TemplateMatrix profile_template(const TemplateScenario& sc, const DeviceProfile& profile,
                                std::uint64_t seed);

struct ReplayResult {
  std::vector<ScheduledEvent> truth;
  std::vector<DetectedEvent> detected;
  std::vector<MonitorTrace> traces;  // one per template row
  std::vector<std::pair<Cycles, Cycles>> gaps;
  // truth index -> detected index, or -1
  std::vector<std::ptrdiff_t> match;
  std::size_t correct = 0;  // matched with the right kind
};

// Plays `script` (event kinds, event_spacing apart) and monitors every
// address in `rows`. Fills truth, traces and gaps.
ReplayResult monitor_script(const TemplateScenario& sc, const DeviceProfile& profile,
                            const std::vector<std::uint64_t>& rows,
                            const std::vector<std::string>& script, std::uint64_t seed);

// monitor_script over the matrix rows, then classification and matching.
ReplayResult replay_template(const TemplateScenario& sc, const DeviceProfile& profile,
                             const TemplateMatrix& matrix, const std::vector<std::string>& script,
                             std::uint64_t seed);

struct AesScenario {
  std::uint32_t attacker_core = 4;
  std::uint32_t victim_core = 5;
  TableMode mode = TableMode::shared;
  Primitive primitive = Primitive::evict_reload;  // pp in private mode
  TimerKind timer = TimerKind::cycle_register;
  EvictionStrategy strategy{24, 1, 6};
  // Kind of the attacker's loads; empty picks the cluster's inclusive kind.
  std::optional<AccessKind> attacker_kind;
  std::uint32_t budget = 512;          // chosen-plaintext encryptions per key byte
  double margin_floor = 0.2;
  double preempt_fraction = 0.15;      // probe point, share of a warm encryption
  std::uint32_t min_coverage = 11;     // restart while no line holds this many entries of one nibble
  std::uint32_t max_restarts = 16;
  std::size_t search_rounds = 24;      // find_active_sets rounds in private mode
};

struct AesAttackResult {
  std::array<KeyNibbleEstimate, 16> estimates{};
  std::uint32_t restarts = 0;
  std::uint32_t disalignment = 0;
  std::uint64_t attack_encryptions = 0;  // chosen-plaintext runs over all bytes
  std::uint64_t setup_encryptions = 0;   // timing and set search runs
  std::uint32_t correct = 0;             // nibbles equal to the key's
};

// First-round attack on a T-table victim holding `key`. Shared mode uses
// Evict+Reload or Flush+Reload on a table line, private mode Prime+Probe on
// the set found by find_active_sets.
AesAttackResult aes_recover_upper_nibbles(const AesScenario& sc, const DeviceProfile& profile,
                                          const Block& key, std::uint64_t seed);

struct TrustletScenario {
  std::uint32_t attacker_core = 0;
  TimerKind timer = TimerKind::cycle_register;
  TrustletConfig trustlet;
  std::uint32_t invocations = 20;
  std::uint64_t valid_key = 1;
  double discard_miss_share = 0.9;  // parallel sweeps missing more lines than this are dropped
};

struct TrustletSpyResult {
  SetProfile valid;
  SetProfile invalid;
  MseProfile mse;
  double band_share = 0.0;
  std::uint64_t sweeps_used = 0;
  std::uint64_t sweeps_discarded = 0;
};

// Prime+Probe over every L2 set of the trustlet's cluster. With flush on
// enter the attacker sweeps in parallel with the body instead.
TrustletSpyResult trustlet_spy(const TrustletScenario& sc, const DeviceProfile& profile,
                               std::uint64_t seed);

}  // namespace armcache

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

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "armcache/cachesim.hpp"
#include "armcache/memspace.hpp"
#include "armcache/scheduler.hpp"

namespace armcache {

// How one input event touches its library code.
struct EventFootprint {
  std::vector<std::uint64_t> offsets;  // into the shared object
  std::uint32_t passes = 1;            // footprint passes per burst
  Cycles period = 2000;                // spacing between passes
  bool sustained = false;              // keep passing for the whole duration
  Cycles duration = 0;                 // default duration when sustained
};

struct EventLibrary {
  std::string object = "libinput.so";
  std::uint64_t size = 0;
  std::vector<std::uint64_t> addresses;  // candidate offsets the attacker probes
  std::map<std::string, EventFootprint> events;
  Cycles inter_key_gap = 150000;

  const EventFootprint& at(const std::string& kind) const;
  std::vector<std::string> kinds() const;
};

// A victim thread replaying timestamped memory accesses on one core.
class VictimAgent : public Agent {
 public:
  struct Access {
    Cycles time = 0;
    PhysicalAddress pa;
    AccessKind kind = AccessKind::instruction;
  };

  VictimAgent(Hierarchy& h, std::uint32_t core) : hier_(&h), core_(core) {}

  void schedule(Cycles time, PhysicalAddress pa, AccessKind kind);
  void run(Cycles begin, Cycles end) override;

  std::size_t pending() const { return queue_.size() - head_; }
  // Executed accesses with the time they actually ran.
  const std::vector<Access>& executed() const { return executed_; }

 private:
  Hierarchy* hier_;
  std::uint32_t core_;
  std::vector<Access> queue_;  // kept sorted by time from head_ on
  std::size_t head_ = 0;
  Cycles clock_ = 0;
  std::vector<Access> executed_;
};

struct ScheduledEvent {
  std::string kind;
  Cycles start = 0;
  Cycles end = 0;
  std::size_t accesses = 0;
};

// Enqueues the footprint of `kind` from `start`. A zero duration uses the
// footprint's default. Throws unknown_event for kinds not in the library.
ScheduledEvent trigger_event(VictimAgent& victim, const EventLibrary& lib,
                             const ProcessSpace& proc, VirtualAddress object_base,
                             const std::string& kind, Cycles start, Cycles duration = 0);

// One text burst per character, inter_key_gap apart.
std::vector<ScheduledEvent> trigger_text(VictimAgent& victim, const EventLibrary& lib,
                                         const ProcessSpace& proc, VirtualAddress object_base,
                                         std::string_view text, Cycles start);

using Block = std::array<std::uint8_t, 16>;

enum class TableMode : std::uint8_t { shared, private_copy };

// AES-128 with four 1 KB T-tables. Every table lookup is a data access at
// table base + disalignment + 1024 * table + 4 * index.
class TTableAES {
 public:
  static constexpr std::uint64_t kTableBytes = 4 * 1024;

  // placement_seed models one process start: it picks the in-page position
  // and the 4-byte-granular disalignment of the tables.
  TTableAES(ProcessSpace& proc, TableMode mode, const Block& key, std::uint64_t placement_seed,
            const std::string& object = "libcrypto.so");

  TableMode mode() const { return mode_; }
  const Block& key() const { return key_; }
  std::uint32_t disalignment() const { return disalignment_; }
  // Offset of table 0 inside the mapping (also inside the shared object).
  std::uint64_t table_offset() const { return table_offset_; }
  const MappingDescriptor& mapping() const { return *mapping_; }
  VirtualAddress entry_vaddr(int table, std::uint8_t index) const;
  PhysicalAddress entry_paddr(int table, std::uint8_t index) const;

  using LookupSink = std::function<void(int round, int table, std::uint8_t index)>;
  // Pure cipher; reports each lookup in execution order.
  Block encrypt(const Block& plaintext, const LookupSink& sink = {}) const;

  struct Run {
    Block ciphertext{};
    Cycles cycles = 0;
  };
  // Encrypts on `core`, issuing every lookup to the hierarchy. `preempt`
  // runs once, before the first lookup that starts at or after
  // `preempt_at` elapsed cycles (or at the end).
  Run run(Hierarchy& h, std::uint32_t core, const Block& plaintext,
          Cycles preempt_at = ~Cycles{0}, const std::function<void()>& preempt = {}) const;

 private:
  ProcessSpace* proc_;
  TableMode mode_;
  Block key_;
  std::array<std::uint32_t, 44> round_keys_{};
  const MappingDescriptor* mapping_ = nullptr;
  std::uint64_t table_offset_ = 0;
  std::uint32_t disalignment_ = 0;
};

struct TrustletConfig {
  bool flush_on_enter = false;
  std::uint32_t band_first = 250;
  std::uint32_t band_last = 320;
  double band_density = 0.8;  // share of band sets a given key touches
  std::uint32_t lines_per_set = 8;
  std::uint32_t iterations = 6;
  std::vector<std::uint32_t> prefix_sets{40, 41, 42, 43};
  std::uint32_t prefix_lines = 2;
  std::uint32_t core = 1;
  AccessKind kind = AccessKind::data;
};

// Synthetic secure-world service. Valid keys run a signing loop over a
// key-dependent subset of the band; invalid keys only run a short prefix.
class Trustlet {
 public:
  Trustlet(Hierarchy& h, PhysicalMemory& mem, TrustletConfig cfg, std::uint64_t seed);

  const TrustletConfig& config() const { return cfg_; }
  std::vector<std::uint32_t> band_for(std::uint64_t key_id) const;
  // Distinct L2 sets one invocation touches.
  std::vector<std::uint32_t> sets_touched(std::uint64_t key_id, bool key_valid) const;

  // `between` runs after the entry flush and after every body iteration,
  // standing in for attacker code on another core.
  void invoke(std::uint64_t key_id, bool key_valid, const std::function<void()>& between = {});

 private:
  Hierarchy* hier_;
  TrustletConfig cfg_;
  std::uint64_t seed_;
  std::uint32_t cluster_;
  std::map<std::uint32_t, std::vector<PhysicalAddress>> lines_;  // by L2 set
};

}  // namespace armcache

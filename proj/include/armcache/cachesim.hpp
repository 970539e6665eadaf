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
#include <optional>
#include <string>
#include <vector>

#include "armcache/common.hpp"

namespace armcache {

enum class Replacement : std::uint8_t { lru, pseudo_random, round_robin };
enum class Inclusion : std::uint8_t { inclusive, victim };
enum class ServicedBy : std::uint8_t { l1, l2, remote, dram };

std::string_view to_string(ServicedBy s);

struct CacheGeometry {
  std::uint32_t line_size = 64;
  std::uint32_t sets = 1;
  std::uint32_t ways = 1;

  std::uint64_t capacity() const { return std::uint64_t{line_size} * sets * ways; }
  std::uint32_t line_bits() const;
  void validate() const;
};

// (paddr >> log2(line_size)) mod sets
std::uint32_t set_index(const CacheGeometry& g, PhysicalAddress pa);

struct LevelConfig {
  CacheGeometry geometry;
  Replacement policy = Replacement::lru;
};

struct ClusterConfig {
  std::string name;
  std::uint32_t cores = 1;
  std::optional<LevelConfig> l1i;  // absent on L2-only test profiles
  std::optional<LevelConfig> l1d;
  LevelConfig l2;
  Inclusion instruction = Inclusion::inclusive;
  Inclusion data = Inclusion::victim;

  Inclusion mode(AccessKind k) const { return k == AccessKind::data ? data : instruction; }
  const std::optional<LevelConfig>& l1(AccessKind k) const {
    return k == AccessKind::data ? l1d : l1i;
  }
};

// jitter is the mean of the geometric noise added on top of base.
struct LatencyClass {
  std::uint32_t base = 1;
  double jitter = 0.0;
};

struct LatencyModel {
  LatencyClass l1_hit{4, 1.0};
  LatencyClass l2_hit{16, 3.0};
  LatencyClass remote_hit{40, 8.0};
  LatencyClass dram{520, 40.0};
  LatencyClass flush_cached{160, 10.0};
  LatencyClass flush_uncached{110, 6.0};

  const LatencyClass& of(ServicedBy s) const;
  void validate() const;
};

struct DeviceProfile {
  std::string name;
  std::vector<ClusterConfig> clusters;
  bool flush_available = false;
  bool coherent_across_clusters = false;
  LatencyModel latency;
  std::uint64_t physical_memory = std::uint64_t{256} << 20;
  std::uint32_t page_size = 4096;
  bool pagemap_restricted = false;

  std::uint32_t core_count() const;
  std::uint32_t cluster_of(std::uint32_t core) const;
  std::uint32_t first_core(std::uint32_t cluster) const;
  std::uint32_t max_line_size() const;
  void validate() const;
};

struct AccessOutcome {
  ServicedBy serviced_by = ServicedBy::dram;
  Cycles cycles = 0;
  std::uint32_t set_index_l2 = 0;
};

enum class LevelKind : std::uint8_t { l1i, l1d, l2 };

// For L1 levels index is a core, for L2 it is a cluster.
struct CacheLevelId {
  LevelKind kind = LevelKind::l2;
  std::uint32_t index = 0;
};

// One set-associative array keyed by physical address. Each entry also
// remembers the access kind that filled it.
class CacheArray {
 public:
  static constexpr std::uint64_t kEmpty = ~std::uint64_t{0};

  CacheArray(const LevelConfig& cfg, std::uint64_t seed);

  const CacheGeometry& geometry() const { return geometry_; }
  std::uint32_t line_bits() const { return line_bits_; }
  std::uint32_t set_of(std::uint64_t addr) const {
    return static_cast<std::uint32_t>((addr >> line_bits_) & set_mask_);
  }

  int find(std::uint64_t addr) const {
    std::uint64_t line = addr >> line_bits_;
    std::size_t base = static_cast<std::size_t>(line & set_mask_) * ways_;
    for (std::uint32_t w = 0; w < ways_; ++w)
      if (tags_[base + w] == line) return static_cast<int>(base + w);
    return -1;
  }
  bool contains(std::uint64_t addr) const { return find(addr) >= 0; }
  void touch(int slot) { stamps_[idx(slot)] = ++clock_; }
  AccessKind kind(int slot) const { return static_cast<AccessKind>(kinds_[idx(slot)]); }
  void set_kind(int slot, AccessKind k) { kinds_[idx(slot)] = static_cast<std::uint8_t>(k); }
  void erase_slot(int slot) { tags_[idx(slot)] = kEmpty; }
  bool erase(std::uint64_t addr);

  // Installs the line holding addr, which must not be resident. Returns the
  // base address of the displaced line or kEmpty.
  std::uint64_t insert(std::uint64_t addr, AccessKind kind);

  std::vector<std::uint64_t> lines_in_set(std::uint32_t set) const;
  std::size_t occupancy() const;
  void clear();

 private:
  static std::size_t idx(int slot) { return static_cast<std::size_t>(slot); }
  std::uint32_t pick_victim(std::size_t base);

  CacheGeometry geometry_;
  Replacement policy_;
  std::uint32_t ways_;
  std::uint32_t line_bits_;
  std::uint64_t set_mask_;
  std::vector<std::uint64_t> tags_;
  std::vector<std::uint64_t> stamps_;
  std::vector<std::uint8_t> kinds_;
  std::vector<std::uint32_t> next_;  // round-robin pointer per set
  std::uint64_t clock_ = 0;
  Rng rng_;
};

class Hierarchy {
 public:
  Hierarchy(DeviceProfile profile, std::uint64_t seed);

  const DeviceProfile& profile() const { return profile_; }
  std::uint32_t core_count() const { return static_cast<std::uint32_t>(cores_.size()); }
  std::uint32_t cluster_of(std::uint32_t core) const { return cores_.at(core).cluster; }
  const CacheGeometry& l2_geometry(std::uint32_t cluster) const {
    return clusters_.at(cluster).l2.geometry();
  }
  std::uint32_t l2_set(std::uint32_t core, PhysicalAddress pa) const {
    return set_index(l2_geometry(cluster_of(core)), pa);
  }

  AccessOutcome access(std::uint32_t core, PhysicalAddress pa, AccessKind kind);

  // Removes the line from every level and core. Requires flush_available.
  Cycles flush(std::uint32_t core, PhysicalAddress pa);

  // Privileged whole-cache flush, as done on secure-world transitions.
  void flush_all();

  Cycles sample(const LatencyClass& c);
  Rng& noise() { return noise_; }

  // Test oracles. Attack code must not consult these.
  bool drop(PhysicalAddress pa);
  bool resident(PhysicalAddress pa) const;
  bool resident_in(CacheLevelId level, PhysicalAddress pa) const;
  std::vector<PhysicalAddress> occupancy_snapshot(CacheLevelId level, std::uint32_t set) const;

 private:
  struct Core {
    std::uint32_t cluster = 0;
    std::optional<CacheArray> l1i;
    std::optional<CacheArray> l1d;
    std::optional<CacheArray>& l1(AccessKind k) { return k == AccessKind::data ? l1d : l1i; }
  };
  struct Cluster {
    ClusterConfig cfg;
    CacheArray l2;
    std::uint32_t first_core = 0;
  };

  const CacheArray* level(CacheLevelId id) const;
  bool cached_elsewhere(std::uint32_t core, std::uint64_t addr) const;
  void install_l2(std::uint32_t cluster, std::uint64_t addr, AccessKind kind);
  void check(PhysicalAddress pa) const;

  DeviceProfile profile_;
  std::vector<Core> cores_;
  std::vector<Cluster> clusters_;
  std::uint64_t active_cores_ = 0;  // cores that ever accessed memory
  Rng noise_;
  // 1/log(q) keyed by jitter.
  std::array<std::pair<double, double>, 8> inv_log_q_{};
  std::size_t next_inv_ = 0;
};

}  // namespace armcache

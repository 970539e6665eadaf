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

#include "armcache/cachesim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace armcache {

namespace {

bool pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

std::string_view to_string(ServicedBy s) {
  switch (s) {
    case ServicedBy::l1: return "L1";
    case ServicedBy::l2: return "L2";
    case ServicedBy::remote: return "REMOTE";
    case ServicedBy::dram: return "DRAM";
  }
  return "?";
}

std::uint32_t CacheGeometry::line_bits() const {
  return static_cast<std::uint32_t>(std::countr_zero(line_size));
}

void CacheGeometry::validate() const {
  if (!pow2(line_size)) throw Error(ErrorKind::config, "line size must be a power of two");
  if (!pow2(sets)) throw Error(ErrorKind::config, "set count must be a power of two");
  if (ways == 0) throw Error(ErrorKind::config, "a cache needs at least one way");
}

std::uint32_t set_index(const CacheGeometry& g, PhysicalAddress pa) {
  return static_cast<std::uint32_t>((pa.value >> g.line_bits()) & (g.sets - 1));
}

const LatencyClass& LatencyModel::of(ServicedBy s) const {
  switch (s) {
    case ServicedBy::l1: return l1_hit;
    case ServicedBy::l2: return l2_hit;
    case ServicedBy::remote: return remote_hit;
    case ServicedBy::dram: return dram;
  }
  return dram;
}

void LatencyModel::validate() const {
  for (const auto* c : {&l1_hit, &l2_hit, &remote_hit, &dram, &flush_cached, &flush_uncached}) {
    if (c->base == 0) throw Error(ErrorKind::config, "latency bases must be positive");
    if (c->jitter < 0) throw Error(ErrorKind::config, "jitter must be non-negative");
  }
  if (!(l1_hit.base < remote_hit.base && remote_hit.base < dram.base))
    throw Error(ErrorKind::config, "latency ordering requires l1_hit < remote_hit < dram");
  if (!(flush_uncached.base < flush_cached.base))
    throw Error(ErrorKind::config, "flush_uncached must be cheaper than flush_cached");
}

std::uint32_t DeviceProfile::core_count() const {
  std::uint32_t n = 0;
  for (const auto& c : clusters) n += c.cores;
  return n;
}

std::uint32_t DeviceProfile::cluster_of(std::uint32_t core) const {
  for (std::uint32_t i = 0; i < clusters.size(); ++i) {
    if (core < clusters[i].cores) return i;
    core -= clusters[i].cores;
  }
  throw Error(ErrorKind::precondition, "core id out of range");
}

std::uint32_t DeviceProfile::first_core(std::uint32_t cluster) const {
  std::uint32_t n = 0;
  for (std::uint32_t i = 0; i < cluster && i < clusters.size(); ++i) n += clusters[i].cores;
  return n;
}

std::uint32_t DeviceProfile::max_line_size() const {
  std::uint32_t m = 0;
  for (const auto& c : clusters) {
    m = std::max(m, c.l2.geometry.line_size);
    if (c.l1i) m = std::max(m, c.l1i->geometry.line_size);
    if (c.l1d) m = std::max(m, c.l1d->geometry.line_size);
  }
  return m;
}

void DeviceProfile::validate() const {
  if (clusters.empty()) throw Error(ErrorKind::config, "profile needs at least one cluster");
  if (core_count() == 0 || core_count() > 64)
    throw Error(ErrorKind::config, "profile must have between 1 and 64 cores");
  for (const auto& c : clusters) {
    c.l2.geometry.validate();
    if (c.l1i) c.l1i->geometry.validate();
    if (c.l1d) c.l1d->geometry.validate();
  }
  if (!pow2(page_size) || page_size < max_line_size())
    throw Error(ErrorKind::config, "page size must be a power of two no smaller than a line");
  if (physical_memory == 0 || physical_memory % page_size != 0)
    throw Error(ErrorKind::config, "physical memory must be a multiple of the page size");
  latency.validate();
}

CacheArray::CacheArray(const LevelConfig& cfg, std::uint64_t seed)
    : geometry_(cfg.geometry),
      policy_(cfg.policy),
      ways_(cfg.geometry.ways),
      line_bits_(cfg.geometry.line_bits()),
      set_mask_(cfg.geometry.sets - 1),
      tags_(std::size_t{cfg.geometry.sets} * cfg.geometry.ways, kEmpty),
      stamps_(tags_.size(), 0),
      kinds_(tags_.size(), 0),
      next_(cfg.geometry.sets, 0),
      rng_(seed) {
  geometry_.validate();
}

bool CacheArray::erase(std::uint64_t addr) {
  int slot = find(addr);
  if (slot < 0) return false;
  erase_slot(slot);
  return true;
}

std::uint32_t CacheArray::pick_victim(std::size_t base) {
  switch (policy_) {
    case Replacement::pseudo_random:
      // Uniform over all ways, empty or not. Keeps the survival law of a
      // marked line exactly (1 - 1/W)^k.
      return static_cast<std::uint32_t>(rng_() % ways_);
    case Replacement::lru: {
      std::uint32_t best = 0;
      for (std::uint32_t w = 0; w < ways_; ++w) {
        if (tags_[base + w] == kEmpty) return w;
        if (stamps_[base + w] < stamps_[base + best]) best = w;
      }
      return best;
    }
    case Replacement::round_robin: {
      for (std::uint32_t w = 0; w < ways_; ++w)
        if (tags_[base + w] == kEmpty) return w;
      auto& p = next_[base / ways_];
      std::uint32_t w = p;
      p = (p + 1) % ways_;
      return w;
    }
  }
  return 0;
}

std::uint64_t CacheArray::insert(std::uint64_t addr, AccessKind kind) {
  std::uint64_t line = addr >> line_bits_;
  std::size_t base = static_cast<std::size_t>(line & set_mask_) * ways_;
  std::size_t slot = base + pick_victim(base);
  std::uint64_t old = tags_[slot];
  tags_[slot] = line;
  kinds_[slot] = static_cast<std::uint8_t>(kind);
  stamps_[slot] = ++clock_;
  return old == kEmpty ? kEmpty : old << line_bits_;
}

std::vector<std::uint64_t> CacheArray::lines_in_set(std::uint32_t set) const {
  std::vector<std::uint64_t> out;
  std::size_t base = static_cast<std::size_t>(set) * ways_;
  for (std::uint32_t w = 0; w < ways_; ++w)
    if (tags_[base + w] != kEmpty) out.push_back(tags_[base + w] << line_bits_);
  return out;
}

std::size_t CacheArray::occupancy() const {
  return static_cast<std::size_t>(std::count_if(tags_.begin(), tags_.end(),
                                                [](std::uint64_t t) { return t != kEmpty; }));
}

void CacheArray::clear() {
  std::fill(tags_.begin(), tags_.end(), kEmpty);
  std::fill(next_.begin(), next_.end(), 0u);
}

Hierarchy::Hierarchy(DeviceProfile profile, std::uint64_t seed)
    : profile_(std::move(profile)), noise_(derive_seed(seed, {0x6e6f697365})) {
  profile_.validate();
  std::uint64_t stream = 1;
  std::uint32_t core = 0;
  for (std::uint32_t ci = 0; ci < profile_.clusters.size(); ++ci) {
    const auto& cfg = profile_.clusters[ci];
    clusters_.push_back(Cluster{cfg, CacheArray(cfg.l2, derive_seed(seed, {stream++})), core});
    for (std::uint32_t k = 0; k < cfg.cores; ++k, ++core) {
      Core c;
      c.cluster = ci;
      if (cfg.l1i) c.l1i.emplace(*cfg.l1i, derive_seed(seed, {stream++}));
      if (cfg.l1d) c.l1d.emplace(*cfg.l1d, derive_seed(seed, {stream++}));
      cores_.push_back(std::move(c));
    }
  }
}

void Hierarchy::check(PhysicalAddress pa) const {
  if (pa.value >= profile_.physical_memory)
    throw Error(ErrorKind::fault, "physical address outside memory");
}

Cycles Hierarchy::sample(const LatencyClass& c) {
  if (c.jitter <= 0) return c.base;
  // Inverse transform of a geometric variable with p = 1/(1+jitter).
  double inv = 0;
  bool cached = false;
  for (auto& e : inv_log_q_)
    if (e.first == c.jitter) {
      inv = e.second;
      cached = true;
      break;
    }
  if (!cached) {
    inv = 1.0 / std::log(c.jitter / (1.0 + c.jitter));
    inv_log_q_[next_inv_++ % inv_log_q_.size()] = {c.jitter, inv};
  }
  double u = static_cast<double>((noise_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  return c.base + static_cast<Cycles>(std::log(u) * inv);
}

bool Hierarchy::cached_elsewhere(std::uint32_t core, std::uint64_t addr) const {
  std::uint32_t home = cores_[core].cluster;
  std::uint64_t mask = active_cores_ & ~(std::uint64_t{1} << core);
  while (mask) {
    auto c = static_cast<std::uint32_t>(std::countr_zero(mask));
    mask &= mask - 1;
    const Core& other = cores_[c];
    if (other.cluster != home && !profile_.coherent_across_clusters) continue;
    if ((other.l1d && other.l1d->contains(addr)) || (other.l1i && other.l1i->contains(addr)))
      return true;
  }
  if (profile_.coherent_across_clusters) {
    for (std::uint32_t k = 0; k < clusters_.size(); ++k)
      if (k != home && clusters_[k].l2.contains(addr)) return true;
  }
  return false;
}

void Hierarchy::install_l2(std::uint32_t cluster, std::uint64_t addr, AccessKind kind) {
  Cluster& cl = clusters_[cluster];
  std::uint64_t evicted = cl.l2.insert(addr, kind);
  if (evicted == CacheArray::kEmpty) return;
  bool inc_i = cl.cfg.instruction == Inclusion::inclusive;
  bool inc_d = cl.cfg.data == Inclusion::inclusive;
  if (!inc_i && !inc_d) return;
  // Back-invalidate every L1 line covered by the evicted L2 line.
  std::uint64_t span = cl.l2.geometry().line_size;
  for (std::uint32_t k = 0; k < cl.cfg.cores; ++k) {
    Core& c = cores_[cl.first_core + k];
    if (inc_i && c.l1i)
      for (std::uint64_t o = 0; o < span; o += c.l1i->geometry().line_size)
        c.l1i->erase(evicted + o);
    if (inc_d && c.l1d)
      for (std::uint64_t o = 0; o < span; o += c.l1d->geometry().line_size)
        c.l1d->erase(evicted + o);
  }
}

AccessOutcome Hierarchy::access(std::uint32_t core, PhysicalAddress pa, AccessKind kind) {
  check(pa);
  std::uint64_t addr = pa.value;
  Core& c = cores_.at(core);
  active_cores_ |= std::uint64_t{1} << core;
  Cluster& cl = clusters_[c.cluster];
  AccessOutcome out;
  out.set_index_l2 = cl.l2.set_of(addr);

  auto& l1 = c.l1(kind);
  if (l1) {
    int slot = l1->find(addr);
    if (slot >= 0) {
      l1->touch(slot);
      out.serviced_by = ServicedBy::l1;
      out.cycles = sample(profile_.latency.l1_hit);
      return out;
    }
  }

  Inclusion mode = cl.cfg.mode(kind);
  int slot = cl.l2.find(addr);
  if (slot >= 0) {
    out.serviced_by = ServicedBy::l2;
    if (l1 && mode == Inclusion::victim && cl.l2.kind(slot) == kind) {
      // Victim-filled lines move back up into L1.
      cl.l2.erase_slot(slot);
    } else {
      cl.l2.touch(slot);
      if (mode == Inclusion::inclusive) cl.l2.set_kind(slot, kind);
    }
  } else {
    out.serviced_by = cached_elsewhere(core, addr) ? ServicedBy::remote : ServicedBy::dram;
    if (!l1 || mode == Inclusion::inclusive) install_l2(c.cluster, addr, kind);
  }

  if (l1) {
    std::uint64_t evicted = l1->insert(addr, kind);
    if (evicted != CacheArray::kEmpty && mode == Inclusion::victim && !cl.l2.contains(evicted))
      install_l2(c.cluster, evicted, kind);
  }
  out.cycles = sample(profile_.latency.of(out.serviced_by));
  return out;
}

bool Hierarchy::drop(PhysicalAddress pa) {
  check(pa);
  bool found = false;
  for (std::uint64_t m = active_cores_; m; m &= m - 1) {
    Core& c = cores_[static_cast<std::size_t>(std::countr_zero(m))];
    if (c.l1i) found |= c.l1i->erase(pa.value);
    if (c.l1d) found |= c.l1d->erase(pa.value);
  }
  for (auto& cl : clusters_) found |= cl.l2.erase(pa.value);
  return found;
}

Cycles Hierarchy::flush(std::uint32_t core, PhysicalAddress pa) {
  if (!profile_.flush_available)
    throw Error(ErrorKind::unsupported, "profile '" + profile_.name + "' has no flush instruction");
  (void)cores_.at(core);
  bool was_cached = drop(pa);
  return sample(was_cached ? profile_.latency.flush_cached : profile_.latency.flush_uncached);
}

void Hierarchy::flush_all() {
  for (auto& c : cores_) {
    if (c.l1i) c.l1i->clear();
    if (c.l1d) c.l1d->clear();
  }
  for (auto& cl : clusters_) cl.l2.clear();
}

bool Hierarchy::resident(PhysicalAddress pa) const {
  for (std::uint64_t m = active_cores_; m; m &= m - 1) {
    const Core& c = cores_[static_cast<std::size_t>(std::countr_zero(m))];
    if (c.l1i && c.l1i->contains(pa.value)) return true;
    if (c.l1d && c.l1d->contains(pa.value)) return true;
  }
  for (const auto& cl : clusters_)
    if (cl.l2.contains(pa.value)) return true;
  return false;
}

const CacheArray* Hierarchy::level(CacheLevelId id) const {
  switch (id.kind) {
    case LevelKind::l2: return &clusters_.at(id.index).l2;
    case LevelKind::l1i: {
      const auto& a = cores_.at(id.index).l1i;
      return a ? &*a : nullptr;
    }
    case LevelKind::l1d: {
      const auto& a = cores_.at(id.index).l1d;
      return a ? &*a : nullptr;
    }
  }
  return nullptr;
}

bool Hierarchy::resident_in(CacheLevelId id, PhysicalAddress pa) const {
  const CacheArray* a = level(id);
  return a && a->contains(pa.value);
}

std::vector<PhysicalAddress> Hierarchy::occupancy_snapshot(CacheLevelId id,
                                                           std::uint32_t set) const {
  std::vector<PhysicalAddress> out;
  const CacheArray* a = level(id);
  if (!a) return out;
  for (std::uint64_t base : a->lines_in_set(set)) out.push_back({base});
  return out;
}

}  // namespace armcache

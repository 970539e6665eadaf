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
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "armcache/common.hpp"

namespace armcache {

// Physical frames handed out from a seeded shuffled free list, so placements
// differ between seeds (victim restarts) but replay exactly for one seed.
class PhysicalMemory {
 public:
  PhysicalMemory(std::uint64_t size_bytes, std::uint32_t page_size, std::uint64_t seed);

  std::uint64_t size() const { return size_; }
  std::uint32_t page_size() const { return page_size_; }
  std::size_t free_frames() const { return free_.size(); }

  std::uint64_t allocate_frame();

  // Frames backing pages [first, first + count) of a shared object. The first
  // request for a page allocates it; later requests return the same frames.
  std::vector<std::uint64_t> shared_frames(const std::string& object, std::uint64_t first,
                                           std::uint64_t count);

 private:
  std::uint64_t size_;
  std::uint32_t page_size_;
  std::vector<std::uint64_t> free_;
  std::map<std::string, std::vector<std::uint64_t>> objects_;
};

struct SharedBacking {
  std::string object;
  std::uint64_t offset = 0;  // bytes, page aligned
};

struct MappingDescriptor {
  VirtualAddress virtual_base;
  std::uint64_t length = 0;
  std::optional<SharedBacking> shared;  // empty for private memory
  std::vector<std::uint64_t> frames;

  bool contains(VirtualAddress v) const {
    return v.value >= virtual_base.value && v.value - virtual_base.value < length;
  }
};

class ProcessSpace {
 public:
  static constexpr std::uint64_t kAddressSpace = std::uint64_t{1} << 40;
  static constexpr std::uint64_t kFirstBase = 0x10000000;

  ProcessSpace(PhysicalMemory& memory, std::uint32_t pid, bool pagemap_restricted = false);

  std::uint32_t pid() const { return pid_; }
  bool pagemap_restricted() const { return pagemap_restricted_; }
  void set_pagemap_restricted(bool on) { pagemap_restricted_ = on; }
  std::uint32_t page_size() const { return memory_->page_size(); }
  const std::deque<MappingDescriptor>& mappings() const { return mappings_; }

  const MappingDescriptor& map_shared(const std::string& object, std::uint64_t length,
                                      std::uint64_t offset = 0);
  const MappingDescriptor& map_private(std::uint64_t length);

  PhysicalAddress translate(VirtualAddress v) const;
  // Empty when the pagemap interface is restricted.
  std::optional<PhysicalAddress> pagemap_query(VirtualAddress v) const;

 private:
  std::uint64_t round_up(std::uint64_t length) const;
  const MappingDescriptor& add(MappingDescriptor m);

  PhysicalMemory* memory_;
  std::uint32_t pid_;
  bool pagemap_restricted_;
  std::uint64_t next_base_ = kFirstBase;
  std::deque<MappingDescriptor> mappings_;
};

}  // namespace armcache

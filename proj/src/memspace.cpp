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

#include "armcache/memspace.hpp"

#include <algorithm>
#include <numeric>

namespace armcache {

PhysicalMemory::PhysicalMemory(std::uint64_t size_bytes, std::uint32_t page_size,
                               std::uint64_t seed)
    : size_(size_bytes), page_size_(page_size) {
  if (page_size == 0 || (page_size & (page_size - 1)) != 0)
    throw Error(ErrorKind::config, "page size must be a power of two");
  if (size_bytes == 0 || size_bytes % page_size != 0)
    throw Error(ErrorKind::config, "physical memory must be a positive multiple of the page size");
  free_.resize(size_bytes / page_size);
  std::iota(free_.begin(), free_.end(), std::uint64_t{0});
  Rng rng(seed);
  std::shuffle(free_.begin(), free_.end(), rng);
}

std::uint64_t PhysicalMemory::allocate_frame() {
  if (free_.empty()) throw Error(ErrorKind::out_of_memory, "no free frames");
  std::uint64_t f = free_.back();
  free_.pop_back();
  return f;
}

std::vector<std::uint64_t> PhysicalMemory::shared_frames(const std::string& object,
                                                         std::uint64_t first,
                                                         std::uint64_t count) {
  auto& frames = objects_[object];
  while (frames.size() < first + count) frames.push_back(allocate_frame());
  return {frames.begin() + static_cast<std::ptrdiff_t>(first),
          frames.begin() + static_cast<std::ptrdiff_t>(first + count)};
}

ProcessSpace::ProcessSpace(PhysicalMemory& memory, std::uint32_t pid, bool pagemap_restricted)
    : memory_(&memory), pid_(pid), pagemap_restricted_(pagemap_restricted) {}

std::uint64_t ProcessSpace::round_up(std::uint64_t length) const {
  if (length == 0) throw Error(ErrorKind::precondition, "mapping length must be positive");
  std::uint64_t p = memory_->page_size();
  return (length + p - 1) / p * p;
}

const MappingDescriptor& ProcessSpace::add(MappingDescriptor m) {
  if (next_base_ + m.length > kAddressSpace)
    throw Error(ErrorKind::out_of_memory, "virtual address space exhausted");
  m.virtual_base = VirtualAddress{next_base_};
  // One guard page between mappings keeps them visibly disjoint.
  next_base_ += m.length + memory_->page_size();
  mappings_.push_back(std::move(m));
  return mappings_.back();
}

const MappingDescriptor& ProcessSpace::map_shared(const std::string& object, std::uint64_t length,
                                                  std::uint64_t offset) {
  std::uint64_t p = memory_->page_size();
  if (offset % p != 0) throw Error(ErrorKind::precondition, "shared offset must be page aligned");
  MappingDescriptor m;
  m.length = round_up(length);
  m.shared = SharedBacking{object, offset};
  m.frames = memory_->shared_frames(object, offset / p, m.length / p);
  return add(std::move(m));
}

const MappingDescriptor& ProcessSpace::map_private(std::uint64_t length) {
  MappingDescriptor m;
  m.length = round_up(length);
  std::uint64_t pages = m.length / memory_->page_size();
  m.frames.reserve(pages);
  for (std::uint64_t i = 0; i < pages; ++i) m.frames.push_back(memory_->allocate_frame());
  return add(std::move(m));
}

PhysicalAddress ProcessSpace::translate(VirtualAddress v) const {
  // Mappings are appended at increasing bases, so binary search works.
  auto it = std::upper_bound(mappings_.begin(), mappings_.end(), v.value,
                             [](std::uint64_t x, const MappingDescriptor& m) {
                               return x < m.virtual_base.value;
                             });
  if (it == mappings_.begin() || !std::prev(it)->contains(v))
    throw Error(ErrorKind::fault, "unmapped virtual address");
  const auto& m = *std::prev(it);
  std::uint64_t off = v.value - m.virtual_base.value;
  std::uint64_t p = memory_->page_size();
  return PhysicalAddress{m.frames[off / p] * p + off % p};
}

std::optional<PhysicalAddress> ProcessSpace::pagemap_query(VirtualAddress v) const {
  PhysicalAddress pa = translate(v);
  if (pagemap_restricted_) return std::nullopt;
  return pa;
}

}  // namespace armcache

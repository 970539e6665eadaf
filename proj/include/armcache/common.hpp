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

#include <compare>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace armcache {

using Cycles = std::uint64_t;
using Rng = std::mt19937_64;

struct PhysicalAddress {
  std::uint64_t value = 0;
  auto operator<=>(const PhysicalAddress&) const = default;
};

struct VirtualAddress {
  std::uint64_t value = 0;
  auto operator<=>(const VirtualAddress&) const = default;
  VirtualAddress operator+(std::uint64_t off) const { return {value + off}; }
};

enum class AccessKind : std::uint8_t { instruction = 0, data = 1 };

enum class ErrorKind {
  fault,
  out_of_memory,
  no_physical_oracle,
  pool_exhausted,
  unsupported,
  precondition,
  calibration_failed,
  ambiguous_template,
  channel_stalled,
  setup,
  length_mismatch,
  unknown_event,
  config,
};

std::string_view error_name(ErrorKind kind);

// All declared failure paths of the library surface as this type. what()
// starts with the error name so the CLI can print it verbatim.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Mixes a base seed with tags into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

}  // namespace armcache

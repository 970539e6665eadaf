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

#include "armcache/common.hpp"

#include <vector>

namespace armcache {

std::string_view error_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::fault: return "fault";
    case ErrorKind::out_of_memory: return "out of physical memory";
    case ErrorKind::no_physical_oracle: return "no physical oracle";
    case ErrorKind::pool_exhausted: return "pool exhausted";
    case ErrorKind::unsupported: return "unsupported operation";
    case ErrorKind::precondition: return "precondition violation";
    case ErrorKind::calibration_failed: return "calibration failed";
    case ErrorKind::ambiguous_template: return "ambiguous template";
    case ErrorKind::channel_stalled: return "channel stalled";
    case ErrorKind::setup: return "setup error";
    case ErrorKind::length_mismatch: return "length mismatch";
    case ErrorKind::unknown_event: return "unknown event";
    case ErrorKind::config: return "invalid config";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(error_name(kind)) + (detail.empty() ? "" : ": " + detail)),
      kind_(kind) {}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * tags.size());
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (auto t : tags) {
    words.push_back(static_cast<std::uint32_t>(t));
    words.push_back(static_cast<std::uint32_t>(t >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

}  // namespace armcache

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
#include <span>
#include <string>
#include <vector>

#include "armcache/attacks.hpp"
#include "armcache/common.hpp"

namespace armcache {

class TTableAES;

// Cache hits per (address, event) under equal profiling time.
struct TemplateMatrix {
  std::vector<std::uint64_t> addresses;  // offsets into the profiled object
  std::vector<std::string> events;
  std::vector<std::uint64_t> hits;  // row-major, addresses x events

  TemplateMatrix() = default;
  TemplateMatrix(std::vector<std::uint64_t> addrs, std::vector<std::string> evs);

  std::uint64_t& at(std::size_t address, std::size_t event);
  std::uint64_t at(std::size_t address, std::size_t event) const;
  std::vector<double> column(std::size_t event) const;
};

struct ClassifyOptions {
  Cycles gap_tolerance = 60000;  // hits closer than this belong to one event
  std::uint64_t min_hits = 2;    // shorter segments are treated as noise
  double max_similarity = 0.995; // two columns closer than this are ambiguous
};

struct DetectedEvent {
  Cycles start = 0;
  Cycles end = 0;
  std::string kind;
  std::uint64_t hits = 0;
  double score = 0.0;  // cosine similarity to the chosen column
};

// traces[r] holds the live samples of matrix row r. Hits are segmented by
// time and each segment's per-address hit vector is matched to the nearest
// normalized column. All-zero columns never match.
std::vector<DetectedEvent> classify_events(const TemplateMatrix& m,
                                           std::span<const MonitorTrace> traces,
                                           const ClassifyOptions& opts = {});

// Throws ambiguous_template if two non-zero columns are indistinguishable.
void check_distinguishable(const TemplateMatrix& m, double max_similarity);

struct KeyNibbleEstimate {
  std::uint32_t byte = 0;
  std::optional<std::uint8_t> nibble;  // empty when the margin stayed below the floor
  double margin = 0.0;
};

// Hit counts per plaintext byte value for one key byte.
struct ByteObservations {
  std::array<std::uint32_t, 256> hits{};
  std::array<std::uint32_t, 256> trials{};
};

// Class-mean statistic: the plaintext upper nibble with the highest mean
// hit rate, xored with the table-index nibble the monitored line stands for.
KeyNibbleEstimate decide_nibble(std::uint32_t byte, const ByteObservations& obs,
                                std::uint8_t line_class, double margin_floor);

struct LineCoverage {
  std::int64_t line = 0;  // line index relative to the line holding entry 0
  std::uint32_t first_entry = 0;
  std::uint32_t entries = 0;
  // (upper nibble, entries of that nibble) in index order
  std::vector<std::pair<std::uint8_t, std::uint32_t>> classes;
};

struct DisalignmentReport {
  std::uint32_t offset = 0;  // bytes between line start and entry 0
  std::vector<LineCoverage> lines;
  // Key byte values indistinguishable from the true one when every line of
  // the table is observed for every plaintext byte.
  std::uint32_t candidates = 0;
  double resolvable_bits = 0.0;
};

DisalignmentReport disalignment_report(std::uint32_t offset, std::uint32_t line_size = 64,
                                       std::uint32_t entry_size = 4, std::uint32_t entries = 256);
DisalignmentReport disalignment_report(const TTableAES& victim, std::uint32_t line_size = 64);

// Mean probe time per L2 set.
using SetProfile = std::vector<double>;

struct MseProfile {
  std::vector<double> per_set;
  double total = 0.0;  // mean over sets

  // Share of the summed error that falls in [first, last].
  double share_in(std::uint32_t first, std::uint32_t last) const;
};

MseProfile mse_profile(const SetProfile& a, const SetProfile& b);

}  // namespace armcache

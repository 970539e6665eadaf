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

#include "armcache/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "armcache/victims.hpp"

namespace armcache {

TemplateMatrix::TemplateMatrix(std::vector<std::uint64_t> addrs, std::vector<std::string> evs)
    : addresses(std::move(addrs)), events(std::move(evs)), hits(addresses.size() * events.size(), 0) {}

std::uint64_t& TemplateMatrix::at(std::size_t address, std::size_t event) {
  return hits.at(address * events.size() + event);
}

std::uint64_t TemplateMatrix::at(std::size_t address, std::size_t event) const {
  return hits.at(address * events.size() + event);
}

std::vector<double> TemplateMatrix::column(std::size_t event) const {
  std::vector<double> c(addresses.size());
  for (std::size_t a = 0; a < addresses.size(); ++a) c[a] = static_cast<double>(at(a, event));
  return c;
}

namespace {

double norm(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double na = norm(a), nb = norm(b);
  if (na == 0 || nb == 0) return 0.0;
  double dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot / (na * nb);
}

}  // namespace

void check_distinguishable(const TemplateMatrix& m, double max_similarity) {
  for (std::size_t i = 0; i < m.events.size(); ++i)
    for (std::size_t j = i + 1; j < m.events.size(); ++j) {
      auto a = m.column(i), b = m.column(j);
      if (norm(a) == 0 || norm(b) == 0) continue;
      if (cosine(a, b) >= max_similarity)
        throw Error(ErrorKind::ambiguous_template,
                    "events '" + m.events[i] + "' and '" + m.events[j] + "' have the same profile");
    }
}

std::vector<DetectedEvent> classify_events(const TemplateMatrix& m,
                                           std::span<const MonitorTrace> traces,
                                           const ClassifyOptions& opts) {
  if (traces.size() != m.addresses.size())
    throw Error(ErrorKind::length_mismatch, "one trace per template row is required");
  check_distinguishable(m, opts.max_similarity);

  std::vector<std::vector<double>> cols;
  for (std::size_t e = 0; e < m.events.size(); ++e) cols.push_back(m.column(e));

  std::vector<std::pair<Cycles, std::size_t>> hits;
  for (std::size_t r = 0; r < traces.size(); ++r)
    for (const auto& s : traces[r].samples)
      if (s.state == HitMiss::hit) hits.emplace_back(s.timestamp, r);
  std::sort(hits.begin(), hits.end());

  std::vector<DetectedEvent> out;
  std::vector<double> v(m.addresses.size());
  auto flush_segment = [&](std::size_t from, std::size_t to) {
    if (to - from < opts.min_hits) return;
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t i = from; i < to; ++i) v[hits[i].second] += 1;
    double best = -1;
    std::size_t pick = 0;
    for (std::size_t e = 0; e < cols.size(); ++e) {
      double c = cosine(v, cols[e]);
      if (c > best) {
        best = c;
        pick = e;
      }
    }
    if (best <= 0) return;
    out.push_back({hits[from].first, hits[to - 1].first, m.events[pick], to - from, best});
  };
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= hits.size(); ++i) {
    if (i == hits.size() || hits[i].first - hits[i - 1].first > opts.gap_tolerance) {
      flush_segment(begin, i);
      begin = i;
    }
  }
  return out;
}

KeyNibbleEstimate decide_nibble(std::uint32_t byte, const ByteObservations& obs,
                                std::uint8_t line_class, double margin_floor) {
  std::array<double, 16> mean{};
  for (int c = 0; c < 16; ++c) {
    std::uint64_t h = 0, t = 0;
    for (int lo = 0; lo < 16; ++lo) {
      h += obs.hits[static_cast<std::size_t>(16 * c + lo)];
      t += obs.trials[static_cast<std::size_t>(16 * c + lo)];
    }
    mean[static_cast<std::size_t>(c)] = t ? static_cast<double>(h) / static_cast<double>(t) : 0.0;
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < 16; ++c)
    if (mean[c] > mean[best]) best = c;
  double runner = 0;
  for (std::size_t c = 0; c < 16; ++c)
    if (c != best) runner = std::max(runner, mean[c]);
  KeyNibbleEstimate e;
  e.byte = byte;
  e.margin = mean[best] - runner;
  if (e.margin > margin_floor) e.nibble = static_cast<std::uint8_t>(best ^ (line_class & 0xf));
  return e;
}

DisalignmentReport disalignment_report(std::uint32_t offset, std::uint32_t line_size,
                                       std::uint32_t entry_size, std::uint32_t entries) {
  if (line_size == 0 || entry_size == 0 || entries == 0 || entries > 256 || offset >= line_size)
    throw Error(ErrorKind::precondition, "offset must lie inside one line");
  DisalignmentReport r;
  r.offset = offset;
  auto line_of = [&](std::uint32_t idx) { return (offset + entry_size * idx) / line_size; };
  for (std::uint32_t i = 0; i < entries; ++i) {
    auto l = static_cast<std::int64_t>(line_of(i));
    auto cls = static_cast<std::uint8_t>(i >> 4);
    if (r.lines.empty() || r.lines.back().line != l) r.lines.push_back({l, i, 0, {}});
    auto& lc = r.lines.back();
    ++lc.entries;
    if (lc.classes.empty() || lc.classes.back().first != cls) lc.classes.emplace_back(cls, 0);
    ++lc.classes.back().second;
  }
  // A key byte k' is indistinguishable from k when s ^ k' and s ^ k share a
  // line for every state byte s; by symmetry count the k' equivalent to 0.
  for (std::uint32_t k = 0; k < 256; ++k) {
    bool same = true;
    for (std::uint32_t s = 0; s < entries && same; ++s)
      same = (s ^ k) < entries && line_of(s ^ k) == line_of(s);
    r.candidates += same;
  }
  r.resolvable_bits = std::log2(256.0 / r.candidates);
  return r;
}

DisalignmentReport disalignment_report(const TTableAES& victim, std::uint32_t line_size) {
  return disalignment_report(victim.disalignment() % line_size, line_size);
}

double MseProfile::share_in(std::uint32_t first, std::uint32_t last) const {
  double all = 0, in = 0;
  for (std::size_t s = 0; s < per_set.size(); ++s) {
    all += per_set[s];
    if (s >= first && s <= last) in += per_set[s];
  }
  return all > 0 ? in / all : 0.0;
}

MseProfile mse_profile(const SetProfile& a, const SetProfile& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::length_mismatch, "set profiles differ in length");
  MseProfile m;
  m.per_set.resize(a.size());
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    m.per_set[i] = d * d;
    sum += m.per_set[i];
  }
  m.total = a.empty() ? 0.0 : sum / static_cast<double>(a.size());
  return m;
}

}  // namespace armcache

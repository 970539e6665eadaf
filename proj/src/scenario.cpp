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

#include "armcache/scenario.hpp"

#include "armcache/config.hpp"
#include "json.hpp"

namespace armcache {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::config, what); }

json open(std::string_view text, const char* kind) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    bad(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (j.value("schema_version", 0) != kSchemaVersion) bad("unsupported scenario schema_version");
  if (kind && j.value("kind", std::string()) != kind)
    bad(std::string("expected a scenario of kind '") + kind + "'");
  return j;
}

EvictionStrategy strategy(const json& j, EvictionStrategy s) {
  if (!j.is_array() || j.size() != 3) bad("strategy must be [N, A, D]");
  s = {j[0].get<std::uint32_t>(), j[1].get<std::uint32_t>(), j[2].get<std::uint32_t>()};
  s.validate();
  return s;
}

AccessKind access_kind(const std::string& s) {
  if (s == "data") return AccessKind::data;
  if (s == "instruction") return AccessKind::instruction;
  bad("unknown access kind '" + s + "'");
}

EventLibrary library(const json& j) {
  EventLibrary lib;
  lib.object = j.value("object", lib.object);
  lib.size = j.at("size").get<std::uint64_t>();
  lib.inter_key_gap = j.value("inter_key_gap", lib.inter_key_gap);
  lib.addresses = j.at("addresses").get<std::vector<std::uint64_t>>();
  for (auto a : lib.addresses)
    if (a >= lib.size) bad("library address outside the object");
  for (const auto& [name, e] : j.at("events").items()) {
    EventFootprint fp;
    for (auto idx : e.at("rows").get<std::vector<std::size_t>>()) {
      if (idx >= lib.addresses.size()) bad("event '" + name + "' names a missing row");
      fp.offsets.push_back(lib.addresses[idx]);
    }
    fp.passes = e.value("passes", fp.passes);
    fp.period = e.value("period", fp.period);
    fp.sustained = e.value("sustained", fp.sustained);
    fp.duration = e.value("duration", fp.duration);
    if (fp.period == 0 || fp.passes == 0) bad("event '" + name + "' needs passes and a period");
    lib.events.emplace(name, std::move(fp));
  }
  if (lib.events.empty()) bad("library has no events");
  return lib;
}

template <typename T>
void take(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j[key].get<T>();
}

}  // namespace

std::string scenario_kind(std::string_view text) { return open(text, nullptr).value("kind", std::string()); }

TemplateSpec parse_template_spec(std::string_view text) {
  json j = open(text, "template");
  try {
    TemplateSpec s;
    s.profile = j.at("profile").get<std::string>();
    auto& sc = s.scenario;
    take(j, "attacker_core", sc.attacker_core);
    take(j, "victim_core", sc.victim_core);
    if (j.contains("primitive")) sc.primitive = parse_primitive(j["primitive"].get<std::string>());
    if (j.contains("timer")) sc.timer = parse_timer_kind(j["timer"].get<std::string>());
    if (j.contains("strategy")) sc.strategy = strategy(j["strategy"], sc.strategy);
    take(j, "quantum", sc.quantum);
    take(j, "gap_probability", sc.gap_probability);
    take(j, "cell_duration", sc.cell_duration);
    take(j, "event_spacing", sc.event_spacing);
    if (j.contains("classify")) {
      const auto& c = j["classify"];
      take(c, "gap_tolerance", sc.classify.gap_tolerance);
      take(c, "min_hits", sc.classify.min_hits);
      take(c, "max_similarity", sc.classify.max_similarity);
    }
    sc.library = library(j.at("library"));
    take(j, "replay_events", s.replay_events);
    if (sc.quantum == 0 || sc.gap_probability < 0 || sc.gap_probability >= 1)
      bad("quantum must be positive and gap_probability in [0, 1)");
    return s;
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("malformed template scenario: ") + e.what());
  }
}

AesSpec parse_aes_spec(std::string_view text) {
  json j = open(text, "aes");
  try {
    AesSpec s;
    s.profile = j.at("profile").get<std::string>();
    auto& sc = s.scenario;
    take(j, "attacker_core", sc.attacker_core);
    take(j, "victim_core", sc.victim_core);
    if (j.contains("mode")) {
      auto m = j["mode"].get<std::string>();
      if (m == "shared") sc.mode = TableMode::shared;
      else if (m == "private") sc.mode = TableMode::private_copy;
      else bad("mode must be shared or private");
    }
    if (j.contains("primitive")) sc.primitive = parse_primitive(j["primitive"].get<std::string>());
    if (j.contains("timer")) sc.timer = parse_timer_kind(j["timer"].get<std::string>());
    if (j.contains("strategy")) sc.strategy = strategy(j["strategy"], sc.strategy);
    if (j.contains("attacker_kind")) sc.attacker_kind = access_kind(j["attacker_kind"].get<std::string>());
    take(j, "budget", sc.budget);
    take(j, "margin_floor", sc.margin_floor);
    take(j, "preempt_fraction", sc.preempt_fraction);
    take(j, "min_coverage", sc.min_coverage);
    take(j, "max_restarts", sc.max_restarts);
    take(j, "search_rounds", sc.search_rounds);
    take(j, "keys", s.keys);
    return s;
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("malformed aes scenario: ") + e.what());
  }
}

TrustletSpec parse_trustlet_spec(std::string_view text) {
  json j = open(text, "trustlet");
  try {
    TrustletSpec s;
    s.profile = j.at("profile").get<std::string>();
    auto& sc = s.scenario;
    take(j, "attacker_core", sc.attacker_core);
    if (j.contains("timer")) sc.timer = parse_timer_kind(j["timer"].get<std::string>());
    take(j, "invocations", sc.invocations);
    take(j, "valid_key", sc.valid_key);
    take(j, "discard_miss_share", sc.discard_miss_share);
    take(j, "runs", s.runs);
    if (j.contains("trustlet")) {
      const auto& t = j["trustlet"];
      auto& c = sc.trustlet;
      take(t, "flush_on_enter", c.flush_on_enter);
      take(t, "band_first", c.band_first);
      take(t, "band_last", c.band_last);
      take(t, "band_density", c.band_density);
      take(t, "lines_per_set", c.lines_per_set);
      take(t, "iterations", c.iterations);
      take(t, "prefix_sets", c.prefix_sets);
      take(t, "prefix_lines", c.prefix_lines);
      take(t, "core", c.core);
      if (t.contains("kind")) c.kind = access_kind(t["kind"].get<std::string>());
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("malformed trustlet scenario: ") + e.what());
  }
}

CovertSpec parse_covert_spec(std::string_view text) {
  json j = open(text, "covert");
  try {
    CovertSpec s;
    s.profile = j.at("profile").get<std::string>();
    auto& c = s.channel;
    s.cores_given = j.contains("sender_core") || j.contains("receiver_core");
    take(j, "n", c.n);
    take(j, "s", c.s);
    take(j, "c", c.c);
    take(j, "x", c.x);
    take(j, "sender_core", c.sender_core);
    take(j, "receiver_core", c.receiver_core);
    take(j, "object", c.object);
    take(j, "quantum", c.quantum);
    take(j, "watchdog", c.watchdog);
    if (j.contains("primitive")) c.primitive = parse_primitive(j["primitive"].get<std::string>());
    if (j.contains("timer")) c.timer = parse_timer_kind(j["timer"].get<std::string>());
    if (j.contains("strategy")) c.strategy = strategy(j["strategy"], c.strategy);
    take(j, "bit_offsets", c.bit_offsets);
    take(j, "ack_offsets", c.ack_offsets);
    take(j, "noise", s.noise);
    return s;
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("malformed covert scenario: ") + e.what());
  }
}

std::vector<std::string> random_script(const EventLibrary& lib, std::size_t count,
                                       std::uint64_t seed) {
  auto kinds = lib.kinds();
  Rng rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(kinds[rng() % kinds.size()]);
  return out;
}

}  // namespace armcache

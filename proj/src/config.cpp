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

#include "armcache/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#ifndef ARMCACHE_DATA_DIR
#define ARMCACHE_DATA_DIR "."
#endif

namespace armcache {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::config, what); }

Replacement parse_policy(const std::string& s) {
  if (s == "lru") return Replacement::lru;
  if (s == "pseudo_random" || s == "random") return Replacement::pseudo_random;
  if (s == "round_robin") return Replacement::round_robin;
  bad("unknown replacement policy '" + s + "'");
}

Inclusion parse_inclusion(const std::string& s) {
  if (s == "inclusive") return Inclusion::inclusive;
  if (s == "non-inclusive-victim" || s == "non-inclusive") return Inclusion::victim;
  bad("unknown inclusion mode '" + s + "'");
}

LevelConfig parse_level(const json& j, Replacement fallback) {
  LevelConfig lc;
  lc.geometry.line_size = j.value("line_size", 64u);
  lc.geometry.sets = j.at("sets").get<std::uint32_t>();
  lc.geometry.ways = j.at("ways").get<std::uint32_t>();
  lc.policy = j.contains("policy") ? parse_policy(j["policy"].get<std::string>()) : fallback;
  lc.geometry.validate();
  if (j.contains("size_kb") && lc.geometry.capacity() != j["size_kb"].get<std::uint64_t>() * 1024)
    bad("cache capacity does not match line_size x sets x ways");
  return lc;
}

LatencyClass parse_latency_class(const json& j, LatencyClass c) {
  c.base = j.value("base", c.base);
  c.jitter = j.value("jitter", c.jitter);
  return c;
}

std::string resolve(const std::string& name_or_path, const char* sub) {
  namespace fs = std::filesystem;
  if (fs::exists(name_or_path)) return name_or_path;
  fs::path p = fs::path(data_dir()) / sub / (name_or_path + ".json");
  if (fs::exists(p)) return p.string();
  bad(std::string("cannot find ") + sub + " entry '" + name_or_path + "'");
}

}  // namespace

std::string data_dir() {
  if (const char* env = std::getenv("ARMCACHE_DATA_DIR")) return env;
  return ARMCACHE_DATA_DIR;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DeviceProfile parse_profile(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    bad(std::string("profile is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("schema_version", 0) != kSchemaVersion) bad("unsupported profile schema_version");
    DeviceProfile p;
    p.name = j.at("name").get<std::string>();
    p.flush_available = j.value("flush_available", false);
    p.coherent_across_clusters = j.value("coherent_across_clusters", false);
    p.physical_memory = j.value("physical_memory_mb", std::uint64_t{256}) << 20;
    p.page_size = j.value("page_size", 4096u);
    p.pagemap_restricted = j.value("pagemap_restricted", false);
    if (j.contains("latency")) {
      const auto& l = j["latency"];
      auto& m = p.latency;
      if (l.contains("l1_hit")) m.l1_hit = parse_latency_class(l["l1_hit"], m.l1_hit);
      if (l.contains("l2_hit")) m.l2_hit = parse_latency_class(l["l2_hit"], m.l2_hit);
      if (l.contains("remote_hit")) m.remote_hit = parse_latency_class(l["remote_hit"], m.remote_hit);
      if (l.contains("dram")) m.dram = parse_latency_class(l["dram"], m.dram);
      if (l.contains("flush_cached"))
        m.flush_cached = parse_latency_class(l["flush_cached"], m.flush_cached);
      if (l.contains("flush_uncached"))
        m.flush_uncached = parse_latency_class(l["flush_uncached"], m.flush_uncached);
    }
    for (const auto& c : j.at("clusters")) {
      ClusterConfig cc;
      cc.name = c.value("name", std::string("cluster"));
      cc.cores = c.at("cores").get<std::uint32_t>();
      if (c.contains("l1i")) cc.l1i = parse_level(c["l1i"], Replacement::lru);
      if (c.contains("l1d")) cc.l1d = parse_level(c["l1d"], Replacement::lru);
      cc.l2 = parse_level(c.at("l2"), Replacement::pseudo_random);
      const auto& inc = c.at("inclusion");
      cc.instruction = parse_inclusion(inc.at("instruction").get<std::string>());
      cc.data = parse_inclusion(inc.at("data").get<std::string>());
      p.clusters.push_back(std::move(cc));
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    bad(std::string("malformed profile: ") + e.what());
  }
}

DeviceProfile load_profile(const std::string& name_or_path) {
  return parse_profile(read_file(resolve(name_or_path, "profiles")));
}

std::string load_scenario_text(const std::string& name_or_path) {
  return read_file(resolve(name_or_path, "scenarios"));
}

}  // namespace armcache

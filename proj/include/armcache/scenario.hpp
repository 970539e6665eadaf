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
#include <string>
#include <string_view>
#include <vector>

#include "armcache/covert.hpp"
#include "armcache/experiments.hpp"

namespace armcache {

// Scenario files are JSON objects with "schema_version", "kind" and
// "profile" plus the fields of the matching experiment. Missing fields keep
// their defaults.

struct TemplateSpec {
  std::string profile;
  TemplateScenario scenario;
  std::uint32_t replay_events = 100;
};

struct AesSpec {
  std::string profile;
  AesScenario scenario;
  std::uint32_t keys = 20;
};

struct TrustletSpec {
  std::string profile;
  TrustletScenario scenario;
  std::uint32_t runs = 100;
};

struct CovertSpec {
  std::string profile;
  ChannelConfig channel;
  bool cores_given = false;  // otherwise default_channel picks them
  double noise = 0.0;
};

// Throws config when the kind differs from the parser's.
TemplateSpec parse_template_spec(std::string_view json_text);
AesSpec parse_aes_spec(std::string_view json_text);
TrustletSpec parse_trustlet_spec(std::string_view json_text);
CovertSpec parse_covert_spec(std::string_view json_text);

// Kind field of a scenario file.
std::string scenario_kind(std::string_view json_text);

// `count` event kinds drawn uniformly from the library.
std::vector<std::string> random_script(const EventLibrary& lib, std::size_t count,
                                       std::uint64_t seed);

}  // namespace armcache

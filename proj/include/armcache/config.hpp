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

#include <string>
#include <string_view>

#include "armcache/cachesim.hpp"

namespace armcache {

inline constexpr int kSchemaVersion = 1;

// Directory holding the shipped profiles/ and scenarios/ trees.
std::string data_dir();

// Reads a whole file; throws config on failure.
std::string read_file(const std::string& path);

DeviceProfile parse_profile(std::string_view json_text);

// Accepts a path to a profile file or the name of a shipped profile.
DeviceProfile load_profile(const std::string& name_or_path);

// Same lookup rule for scenario files; returns the file contents.
std::string load_scenario_text(const std::string& name_or_path);

}  // namespace armcache

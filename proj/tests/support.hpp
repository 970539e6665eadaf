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

// Shared fixtures for the unit tests.

#pragma once

#include <string>

#include "armcache/cachesim.hpp"
#include "armcache/config.hpp"

namespace armcache::test {

inline DeviceProfile test_profile(const std::string& name) {
  return load_profile(std::string(ARMCACHE_TEST_DATA) + "/" + name + ".json");
}

}  // namespace armcache::test

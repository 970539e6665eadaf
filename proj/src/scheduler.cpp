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

#include "armcache/scheduler.hpp"

#include <vector>

namespace armcache {

Scheduler::Scheduler(Cycles quantum, double gap_probability, std::uint64_t seed)
    : quantum_(quantum), gap_probability_(gap_probability), rng_(seed) {
  if (quantum == 0) throw Error(ErrorKind::config, "scheduler quantum must be positive");
  if (gap_probability < 0 || gap_probability >= 1)
    throw Error(ErrorKind::config, "gap probability must be in [0, 1)");
}

void Scheduler::remove(Agent& agent) {
  std::erase(agents_, &agent);
}

void Scheduler::step() {
  Cycles begin = now_;
  Cycles end = begin + quantum_;
  if (!agents_.empty()) {
    Agent* a = agents_[slot_ % agents_.size()];
    bool lost = false;
    if (a->preemptible() && gap_probability_ > 0)
      lost = std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < gap_probability_;
    if (lost) {
      if (!gaps_.empty() && gaps_.back().second == begin)
        gaps_.back().second = end;
      else
        gaps_.emplace_back(begin, end);
    } else {
      a->run(begin, end);
    }
  }
  ++slot_;
  now_ = end;
}

void Scheduler::run_until(Cycles until) {
  while (now_ < until) step();
}

}  // namespace armcache

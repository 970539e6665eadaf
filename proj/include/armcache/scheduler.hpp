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
#include <utility>
#include <vector>

#include "armcache/common.hpp"

namespace armcache {

// A simulated thread of execution. run() may do work with timestamps in
// [begin, end); the last operation may overrun end.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual void run(Cycles begin, Cycles end) = 0;
  // Only preemptible agents are subject to descheduling gaps.
  virtual bool preemptible() const { return false; }
};

// Round-robin over agents in fixed quanta. Exactly one agent owns each
// quantum; a preemptible agent loses its quantum with gap_probability.
class Scheduler {
 public:
  Scheduler(Cycles quantum, double gap_probability, std::uint64_t seed);

  void add(Agent& agent) { agents_.push_back(&agent); }
  void remove(Agent& agent);
  Cycles quantum() const { return quantum_; }
  Cycles now() const { return now_; }

  // Runs whole quanta until now() >= until.
  void run_until(Cycles until);
  // Runs whole quanta until done() returns true or the limit is reached.
  template <typename Pred>
  bool run_while(Pred keep_going, Cycles limit) {
    while (keep_going()) {
      if (now_ >= limit) return false;
      step();
    }
    return true;
  }

  // Quanta lost to descheduling, as [begin, end).
  const std::vector<std::pair<Cycles, Cycles>>& gaps() const { return gaps_; }

 private:
  void step();

  Cycles quantum_;
  double gap_probability_;
  Rng rng_;
  std::vector<Agent*> agents_;
  std::uint64_t slot_ = 0;
  Cycles now_ = 0;
  std::vector<std::pair<Cycles, Cycles>> gaps_;
};

}  // namespace armcache

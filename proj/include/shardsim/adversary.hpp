//------------------------------------------------------------------------------
//
//   Copyright 2026 the shardsim authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#pragma once

#include <set>
#include <string>
#include <vector>

#include "shardsim/common.hpp"

namespace shardsim::adversary {

enum class CorruptionTiming : std::uint8_t { Static, Adaptive };

/// Byzantine behavior strategy tags; config strings use the lowercase
/// names listed in strategy_name().
enum class Strategy : std::uint8_t {
  Equivocate,
  Withhold,
  SelfishMine,
  DelayMax,
  CensorNodes,
  ReplayCert,
  FloodShard,
};

const char* strategy_name(Strategy s);
std::optional<Strategy> strategy_from_name(std::string_view name);

struct AdversaryConfig {
  double rho = 0.0;  // fraction of total power / identities, in [0, 1/2)
  CorruptionTiming timing = CorruptionTiming::Adaptive;
  Tick tau = 0;  // corruption delay; 0 models immediate corruption
  std::set<Strategy> behaviors;
  std::uint32_t flood_rate_cap = 0;  // injected tx per 100 ticks, FloodShard

  bool has(Strategy s) const { return behaviors.count(s) != 0; }
};

enum class CorruptionError : std::uint8_t {
  BudgetExceeded,
  StaticTimingViolation,
  AlreadyTargeted,
};

/// Per-node corruption state: honest until the effective tick, corrupted
/// after.  The corrupted count (pending included) never exceeds
/// floor(rho * n).
class CorruptionLedger {
 public:
  CorruptionLedger(const AdversaryConfig& cfg, std::uint32_t total_nodes);

  std::uint32_t budget() const { return budget_; }
  std::uint32_t targeted_count() const {
    return static_cast<std::uint32_t>(effective_at_.size());
  }

  /// Marks the start of the run; Static-timing requests are rejected from
  /// here on.
  void begin_run();

  /// Schedules corruption of `node`; it flips at now + tau.
  std::optional<CorruptionError> request_corruption(NodeId node, Tick now);

  std::set<NodeId> corrupted_set(Tick t) const;
  bool is_corrupted(NodeId node, Tick t) const;
  bool is_targeted(NodeId node) const { return effective_at_.count(node) != 0; }

 private:
  AdversaryConfig cfg_;
  std::uint32_t budget_;
  bool running_ = false;
  std::map<NodeId, Tick> effective_at_;
};

}  // namespace shardsim::adversary

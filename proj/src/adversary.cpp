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

#include "shardsim/adversary.hpp"

#include <cmath>

namespace shardsim::adversary {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Equivocate: return "equivocate";
    case Strategy::Withhold: return "withhold";
    case Strategy::SelfishMine: return "selfish-mine";
    case Strategy::DelayMax: return "delay-max";
    case Strategy::CensorNodes: return "censor-nodes";
    case Strategy::ReplayCert: return "replay-cert";
    case Strategy::FloodShard: return "flood-shard";
  }
  return "?";
}

std::optional<Strategy> strategy_from_name(std::string_view name) {
  for (auto s : {Strategy::Equivocate, Strategy::Withhold, Strategy::SelfishMine,
                 Strategy::DelayMax, Strategy::CensorNodes, Strategy::ReplayCert,
                 Strategy::FloodShard})
    if (name == strategy_name(s)) return s;
  return std::nullopt;
}

CorruptionLedger::CorruptionLedger(const AdversaryConfig& cfg,
                                   std::uint32_t total_nodes)
    : cfg_(cfg),
      budget_(static_cast<std::uint32_t>(
          std::floor(cfg.rho * static_cast<double>(total_nodes) + 1e-9))) {
  if (cfg.rho < 0.0 || cfg.rho >= 0.5)
    throw std::invalid_argument("rho must lie in [0, 1/2)");
  if (cfg.tau < 0) throw std::invalid_argument("tau must be >= 0");
}

void CorruptionLedger::begin_run() { running_ = true; }

std::optional<CorruptionError> CorruptionLedger::request_corruption(NodeId node,
                                                                    Tick now) {
  if (cfg_.timing == CorruptionTiming::Static && running_)
    return CorruptionError::StaticTimingViolation;
  if (effective_at_.count(node) != 0) return CorruptionError::AlreadyTargeted;
  if (targeted_count() >= budget_) return CorruptionError::BudgetExceeded;
  effective_at_[node] = now + cfg_.tau;
  return std::nullopt;
}

std::set<NodeId> CorruptionLedger::corrupted_set(Tick t) const {
  std::set<NodeId> out;
  for (const auto& [node, eff] : effective_at_)
    if (eff <= t) out.insert(node);
  return out;
}

bool CorruptionLedger::is_corrupted(NodeId node, Tick t) const {
  auto it = effective_at_.find(node);
  return it != effective_at_.end() && it->second <= t;
}

}  // namespace shardsim::adversary

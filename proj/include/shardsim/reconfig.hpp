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

#include "shardsim/common.hpp"
#include "shardsim/ledger.hpp"

#include <set>
#include <vector>

namespace shardsim::reconfig {

struct Member {
  NodeId node = kNoNode;
  Epoch joined = 0;
  std::uint64_t activeness = 0;  // committed proposals participated in
};

struct ShardRoster {
  std::vector<Member> members;
  std::uint32_t leader_index = 0;

  std::vector<NodeId> ids() const;
  std::uint64_t total_activeness() const;
};

/// Per-epoch member lists for every shard; the unit reconfiguration
/// rewrites.
struct ShardRosterList {
  Epoch epoch = 0;
  std::vector<ShardRoster> shards;

  bool contains(NodeId node) const;
};

enum class RuleKind : std::uint8_t {
  RandomReplacement,
  Chronological,
  BoundedCuckoo,
};

const char* to_string(RuleKind k);

struct ReconfigRule {
  RuleKind kind = RuleKind::RandomReplacement;
  std::uint32_t replace_k = 0;   // RandomReplacement; 0 = log2(n/m) default
  double fraction = 0.5;         // Chronological
  std::uint32_t evict_k = 1;     // BoundedCuckoo
};

/// Default replacement count: log2(n / m), the random-replacement setting.
std::uint32_t default_replacement_k(std::uint64_t n, std::uint32_t m);

struct ReconfigOutcome {
  ShardRosterList next;                       // epoch e+1 rosters
  std::vector<std::vector<NodeId>> departed;  // per shard
  std::vector<std::vector<NodeId>> joined;    // per shard
};

/// Builds the epoch e+1 roster list from the epoch e list and the freshly
/// assigned groups.  Random choices derive from H(c || xi) per shard, so
/// every honest node computes the identical plan.
ReconfigOutcome plan_reconfiguration(const ShardRosterList& current,
                                     const std::vector<std::vector<NodeId>>& anodes,
                                     const Digest& xi, const ReconfigRule& rule,
                                     Epoch next_epoch);

// --- bootstrapping -----------------------------------------------------------

struct StateSnapshot {
  ShardId shard = 0;
  std::uint64_t chain_height = 0;
  std::uint64_t committed_tx_count = 0;
  std::vector<std::uint8_t> bytes;  // serialized chain + UTXO payload
  Digest root;                      // digest the committee committed

  static StateSnapshot build(ShardId shard, const ledger::UtxoSet& utxo,
                             std::uint64_t chain_height,
                             std::uint64_t committed_tx_count);
};

struct TransferRecord {
  NodeId member = kNoNode;
  ShardId shard = 0;
  std::uint64_t bytes = 0;
  bool verified = false;
  std::uint32_t retries = 0;  // re-requests after digest mismatches
};

/// New member downloads the snapshot and checks its digest against the
/// committee-committed root; a mismatch triggers a re-request from the
/// next member.
TransferRecord bootstrap_member(NodeId member, ShardId shard,
                                const StateSnapshot& snapshot,
                                const Digest& committed_root,
                                std::uint32_t providers_available);

// --- corruption-time safety ---------------------------------------------------

struct SafetyCheck {
  bool ok = false;
  Tick margin = 0;  // tau - 2 * t_epoch
};

/// Mild corruption must outlast two epochs: tau > 2 * T_epoch, strictly.
SafetyCheck corruption_safety_check(Tick tau, Tick t_epoch);

}  // namespace shardsim::reconfig

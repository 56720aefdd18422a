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
#include "shardsim/consensus.hpp"

#include <map>

namespace shardsim::incentives {

struct RewardPolicy {
  double block_reward = 0.0;
  double leader_multiplier = 1.0;  // leader weight relative to a member
  double deposit = 0.0;            // posted on entry
  double slash_equivocation = 0.0;
  double slash_non_response = 0.0;
  double rep_participation = 1.0;  // reputation weights
  double rep_idle = 1.0;
  double rep_misbehavior = 10.0;
};

struct Account {
  double balance = 0.0;
  double deposit = 0.0;
  double reputation = 0.0;
  bool deposit_exhausted = false;
};

class AccountBook {
 public:
  void open(NodeId node, double deposit);
  const Account& at(NodeId node) const;
  bool has(NodeId node) const { return accounts_.count(node) != 0; }
  const std::map<NodeId, Account>& accounts() const { return accounts_; }

  double minted() const { return minted_; }
  double burned() const { return burned_; }
  /// Sum of balances and deposits; changes only by minted - burned.
  double circulating() const;

  /// Mints `amount` into the node's balance.
  void credit(NodeId node, double amount);
  /// Burns up to `amount` from the node's deposit; returns what was taken.
  double deduct_deposit(NodeId node, double amount);
  void adjust_reputation(NodeId node, double delta);

 private:
  std::map<NodeId, Account> accounts_;
  double minted_ = 0.0;
  double burned_ = 0.0;
};

/// Block settlement.  A lone producer (eventual mode) takes the full
/// reward; a committee (instant mode) splits it with the leader weighted
/// by the multiplier.
AccountBook settle_block(AccountBook book, NodeId producer,
                         const std::vector<NodeId>& committee, NodeId leader,
                         const RewardPolicy& policy);

/// Deducts the equivocation slash from the offender's deposit after
/// re-verifying the signed conflicting messages; forged evidence is
/// rejected unchanged.
AccountBook slash(AccountBook book,
                  const consensus::EquivocationEvidence& evidence,
                  const RewardPolicy& policy, const Keyring& keys);

AccountBook slash_non_response(AccountBook book, NodeId offender,
                               const RewardPolicy& policy);

struct EpochTraceEntry {
  NodeId node = kNoNode;
  std::uint64_t participations = 0;
  std::uint64_t idle_rounds = 0;
  std::uint64_t misbehaviors = 0;
};

/// score += participation*w_p - idle*w_i - misbehavior*w_m, folded over
/// the immutable epoch trace.
class ReputationFold {
 public:
  static AccountBook update(AccountBook book,
                            const std::vector<EpochTraceEntry>& trace,
                            const RewardPolicy& policy);
};

/// CSV rendering of the final book: node,balance,deposit,reputation.
std::string to_csv(const AccountBook& book);

}  // namespace shardsim::incentives

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

#include "shardsim/incentives.hpp"

#include <algorithm>
#include <cstdio>

namespace shardsim::incentives {

void AccountBook::open(NodeId node, double deposit) {
  if (deposit < 0.0) throw std::invalid_argument("deposit must be non-negative");
  auto [it, inserted] = accounts_.emplace(node, Account{});
  if (inserted) {
    it->second.deposit = deposit;
    minted_ += deposit;  // deposits enter the system when posted
  }
}

const Account& AccountBook::at(NodeId node) const {
  auto it = accounts_.find(node);
  if (it == accounts_.end()) throw std::invalid_argument("unknown account");
  return it->second;
}

double AccountBook::circulating() const {
  double total = 0.0;
  for (const auto& [node, acc] : accounts_) total += acc.balance + acc.deposit;
  return total;
}

void AccountBook::credit(NodeId node, double amount) {
  open(node, 0.0);
  accounts_[node].balance += amount;
  minted_ += amount;
}

double AccountBook::deduct_deposit(NodeId node, double amount) {
  open(node, 0.0);
  Account& acc = accounts_[node];
  const double taken = std::min(acc.deposit, amount);
  acc.deposit -= taken;
  burned_ += taken;
  if (acc.deposit <= 0.0) {
    acc.deposit = 0.0;
    acc.deposit_exhausted = true;
  }
  return taken;
}

void AccountBook::adjust_reputation(NodeId node, double delta) {
  open(node, 0.0);
  accounts_[node].reputation += delta;
}

AccountBook settle_block(AccountBook book, NodeId producer,
                         const std::vector<NodeId>& committee, NodeId leader,
                         const RewardPolicy& policy) {
  if (policy.block_reward <= 0.0) return book;
  if (committee.empty()) {
    // Eventual mode: the lone block producer takes the full reward.
    book.credit(producer, policy.block_reward);
    return book;
  }
  // Instant mode: weights leader_multiplier : 1 : ... : 1.
  const double weight_total =
      policy.leader_multiplier + static_cast<double>(committee.size() - 1);
  for (NodeId member : committee) {
    const double weight = (member == leader) ? policy.leader_multiplier : 1.0;
    book.credit(member, policy.block_reward * weight / weight_total);
  }
  return book;
}

namespace {

AccountBook apply_slash(AccountBook book, NodeId offender, double amount,
                        const RewardPolicy& policy) {
  book.open(offender, policy.deposit);
  book.deduct_deposit(offender, amount);
  book.adjust_reputation(offender, -policy.rep_misbehavior);
  return book;
}

}  // namespace

AccountBook slash(AccountBook book,
                  const consensus::EquivocationEvidence& evidence,
                  const RewardPolicy& policy, const Keyring& keys) {
  if (!evidence.verify(keys)) return book;  // forged evidence changes nothing
  return apply_slash(std::move(book), evidence.offender,
                     policy.slash_equivocation, policy);
}

AccountBook slash_non_response(AccountBook book, NodeId offender,
                               const RewardPolicy& policy) {
  return apply_slash(std::move(book), offender, policy.slash_non_response,
                     policy);
}

AccountBook ReputationFold::update(AccountBook book,
                                   const std::vector<EpochTraceEntry>& trace,
                                   const RewardPolicy& policy) {
  for (const auto& entry : trace) {
    book.adjust_reputation(
        entry.node,
        policy.rep_participation * static_cast<double>(entry.participations) -
            policy.rep_idle * static_cast<double>(entry.idle_rounds) -
            policy.rep_misbehavior * static_cast<double>(entry.misbehaviors));
  }
  return book;
}

std::string to_csv(const AccountBook& book) {
  std::string out = "node,balance,deposit,reputation\n";
  char line[160];
  for (const auto& [node, acc] : book.accounts()) {
    std::snprintf(line, sizeof(line), "%u,%.6f,%.6f,%.6f\n", node, acc.balance,
                  acc.deposit, acc.reputation);
    out += line;
  }
  return out;
}

}  // namespace shardsim::incentives

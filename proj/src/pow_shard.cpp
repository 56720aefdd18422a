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

#include "shardsim/consensus.hpp"

namespace shardsim::consensus {

PowShard::PowShard(ShardId shard, PowShardConfig cfg)
    : shard_(shard), cfg_(cfg), public_chain_(cfg.truncate_depth) {
  ledger::Block genesis;
  genesis.header.shard = shard;
  genesis.header.height = 0;
  genesis.header.payload_root = ledger::Block::payload_root_of({}, {});
  public_chain_.append(genesis);
  fork_height_ = public_chain_.size();
}

void PowShard::append_public(ledger::Block b, bool adversarial) {
  b.header.prev_hash = public_chain_.tip_hash();
  b.header.height = public_chain_.size();
  public_chain_.append(b);
  if (adversarial)
    ++adversary_blocks_;
  else
    ++honest_blocks_;
}

void PowShard::release_private(std::size_t orphaned) {
  max_reorg_depth_ = std::max(max_reorg_depth_, orphaned);
  public_chain_.truncate_to(public_chain_.size() - orphaned);
  while (!private_branch_.empty()) {
    append_public(private_branch_.front(), true);
    private_branch_.pop_front();
  }
  fork_height_ = public_chain_.size();
}

std::vector<ledger::Block> PowShard::step(
    const std::vector<NodeId>& honest_miners,
    const std::vector<NodeId>& adversary_miners, Rng& rng, Epoch epoch,
    std::vector<ledger::Transaction> payload,
    std::vector<ledger::RelayRecord> relays) {
  ++rounds_;
  const std::size_t size_before = public_chain_.size();

  std::vector<NodeId> honest_winners;
  for (NodeId m : honest_miners)
    if (rng.bernoulli(cfg_.p)) honest_winners.push_back(m);
  std::vector<NodeId> adversary_winners;
  for (NodeId m : adversary_miners)
    if (rng.bernoulli(cfg_.p)) adversary_winners.push_back(m);

  auto fresh_block = [&](NodeId producer, bool with_payload) {
    ledger::Block b;
    b.header.shard = shard_;
    b.header.epoch = epoch;
    b.header.producer = producer;
    if (with_payload) {
      b.txs = payload;
      b.relays = relays;
    }
    b.header.payload_root = ledger::Block::payload_root_of(b.txs, b.relays);
    return b;
  };

  bool payload_used = false;
  bool first_honest = true;
  for (NodeId m : honest_winners) {
    ledger::Block b = fresh_block(m, !payload_used);
    const bool lead_winner = first_honest;
    first_honest = false;
    if (!cfg_.adversary_selfish) {
      // A second success in the same round is a transient fork; first seen
      // wins and the next extension heals it.
      if (lead_winner) {
        append_public(b, false);
        payload_used = true;
        tie_ = honest_winners.size() > 1;
      }
      continue;
    }
    if (tie_) {
      // Race resolution: all honest power extends the adversary's race
      // block (worst case), orphaning the competing honest block.
      ledger::Block race = public_chain_.tip();
      max_reorg_depth_ = std::max<std::size_t>(max_reorg_depth_, 1);
      public_chain_.truncate_to(public_chain_.size() - 1);
      append_public(tie_block_, true);
      append_public(b, false);
      payload_used = true;
      (void)race;
      tie_ = false;
      fork_height_ = public_chain_.size();
      continue;
    }
    if (private_branch_.empty()) {
      append_public(b, false);
      payload_used = true;
      fork_height_ = public_chain_.size();
      continue;
    }
    if (private_branch_.size() == 1) {
      // Single withheld block: publish and race at equal height.
      append_public(b, false);
      payload_used = true;
      tie_ = true;
      tie_block_ = private_branch_.front();
      private_branch_.clear();
    } else if (private_branch_.size() == 2) {
      // Caught up to a lead of one: release everything; the honest block
      // never makes the chain.
      ++orphaned_honest_;
      release_private(0);
    } else {
      // Deep lead: the honest block is wasted and one private block goes
      // public, keeping the adversary's published prefix in front.
      ++orphaned_honest_;
      append_public(private_branch_.front(), true);
      private_branch_.pop_front();
      fork_height_ = public_chain_.size();
    }
  }

  for (NodeId m : adversary_winners) {
    ledger::Block b = fresh_block(m, false);
    if (!cfg_.adversary_selfish) {
      append_public(b, true);
      continue;
    }
    if (tie_) {
      // The adversary extends its own race block and wins the race.
      max_reorg_depth_ = std::max<std::size_t>(max_reorg_depth_, 1);
      public_chain_.truncate_to(public_chain_.size() - 1);
      append_public(tie_block_, true);
      append_public(b, true);
      tie_ = false;
      fork_height_ = public_chain_.size();
      continue;
    }
    if (private_branch_.empty()) fork_height_ = public_chain_.size();
    private_branch_.push_back(b);
  }

  std::vector<ledger::Block> appended;
  for (std::size_t i = size_before; i < public_chain_.size(); ++i)
    appended.push_back(public_chain_.at(i));
  return appended;
}

void PowShard::force_reorg(std::size_t depth, Epoch epoch) {
  if (depth >= public_chain_.size())
    throw std::invalid_argument("cannot reorg past genesis");
  max_reorg_depth_ = std::max(max_reorg_depth_, depth);
  public_chain_.truncate_to(public_chain_.size() - depth);
  for (std::size_t i = 0; i < depth + 1; ++i) {
    ledger::Block b;
    b.header.shard = shard_;
    b.header.epoch = epoch;
    b.header.producer = kNoNode;
    b.header.payload_root = ledger::Block::payload_root_of({}, {});
    append_public(b, true);
  }
  fork_height_ = public_chain_.size();
  private_branch_.clear();
  tie_ = false;
}

}  // namespace shardsim::consensus

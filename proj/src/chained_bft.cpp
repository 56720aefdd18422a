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

#include <algorithm>

#include "shardsim/consensus.hpp"

namespace shardsim::consensus {

ChainedReplica::ChainedReplica(ChainedConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.committee.size() < 4 || (cfg_.committee.size() - 1) % 3 != 0)
    throw std::invalid_argument("chained committee size must be 3f+1, f >= 1");
  if (cfg_.keys == nullptr) throw std::invalid_argument("keyring required");
  if (cfg_.finality_depth < 2)
    throw std::invalid_argument("finality depth must be >= 2");
  f_ = static_cast<std::uint32_t>((cfg_.committee.size() - 1) / 3);
  // Genesis placeholder: round 0, zero digest, already committed.
  BlockInfo genesis;
  genesis.block.round = 0;
  genesis.committed = true;
  blocks_[Digest{}] = genesis;
}

void ChainedReplica::sign_msg(ChainedMsg& m) const {
  m.sig = cfg_.keys->sign(cfg_.self, m.signed_digest());
}

bool ChainedReplica::authentic(const ChainedMsg& m) const {
  if (std::find(cfg_.committee.begin(), cfg_.committee.end(), m.sender) ==
      cfg_.committee.end())
    return false;
  if (m.type == ChainedMsg::Type::Vote) {
    // Votes sign (round, block digest) so certificates can be re-verified
    // without the full message.
    Sha256 h;
    h.update("chained-vote");
    h.update_u64(m.block.round);
    h.update(m.block.digest());
    return cfg_.keys->verify(m.sender, h.finish(), m.sig);
  }
  return cfg_.keys->verify(m.sender, m.signed_digest(), m.sig);
}

const ChainedReplica::BlockInfo* ChainedReplica::info(const Digest& d) const {
  auto it = blocks_.find(d);
  return it == blocks_.end() ? nullptr : &it->second;
}

bool ChainedReplica::qc_valid(const QuorumCert& qc) const {
  if (qc.genesis()) return true;
  if (qc.votes.size() < 2 * f_ + 1) return false;
  // Vote digests bind (round, block digest); reconstruct per signer.
  std::set<NodeId> signers;
  for (const auto& s : qc.votes) {
    if (std::find(cfg_.committee.begin(), cfg_.committee.end(), s.signer) ==
        cfg_.committee.end())
      return false;
    Sha256 h;
    h.update("chained-vote");
    h.update_u64(qc.round);
    h.update(qc.block_digest);
    if (!cfg_.keys->verify(s.signer, h.finish(), s)) return false;
    signers.insert(s.signer);
  }
  return signers.size() >= 2 * f_ + 1;
}

Actions ChainedReplica::start(Tick now) {
  Actions out;
  if (leader_of(round_) == cfg_.self) out = propose(now);
  return out;
}

Actions ChainedReplica::submit(ProposalPtr proposal, Tick now) {
  (void)now;
  Actions out;
  if (committed_digests_.count(proposal->digest()) == 0)
    pending_.push_back(std::move(proposal));
  return out;
}

Actions ChainedReplica::propose(Tick now) {
  Actions out;
  if (round_ <= last_proposed_round_) return out;
  last_proposed_round_ = round_;
  ChainedMsg m;
  m.type = ChainedMsg::Type::Propose;
  m.sender = cfg_.self;
  m.block.round = round_;
  m.block.parent = high_qc_.block_digest;
  // A proposal stays queued until some block carrying it commits, so a
  // failed round cannot lose it.
  m.block.proposal = empty_proposal();
  for (const auto& p : pending_) {
    if (committed_digests_.count(p->digest()) == 0) {
      m.block.proposal = p;
      break;
    }
  }
  m.justify = high_qc_;
  sign_msg(m);
  out.broadcasts.push_back(std::make_shared<ChainedMsg>(m));
  Actions own = handle(m, now);
  for (auto& b : own.broadcasts) out.broadcasts.push_back(std::move(b));
  for (auto& u : own.unicasts) out.unicasts.push_back(std::move(u));
  for (auto& c : own.committed) out.committed.push_back(std::move(c));
  return out;
}

bool ChainedReplica::extends_locked(const ChainedBlock& block) const {
  // Walk parents down to the locked round.
  Digest cursor = block.parent;
  while (true) {
    const BlockInfo* bi = info(cursor);
    if (bi == nullptr) return false;
    if (cursor == locked_block_) return true;
    if (bi->block.round <= locked_round_) return false;
    cursor = bi->block.parent;
  }
}

Actions ChainedReplica::handle(const ChainedMsg& msg, Tick now) {
  Actions out;
  if (msg.sender != cfg_.self && !authentic(msg)) return out;

  if (msg.type == ChainedMsg::Type::Propose) {
    if (msg.sender != leader_of(msg.block.round)) return out;
    if (!qc_valid(msg.justify)) return out;
    if (msg.block.parent != msg.justify.block_digest) return out;
    if (!msg.block.proposal) return out;

    const Digest d = msg.block.digest();
    if (blocks_.count(d) == 0) {
      BlockInfo bi;
      bi.block = msg.block;
      bi.justify = msg.justify;
      blocks_[d] = bi;
    }
    update_high_qc(msg.justify, out);
    round_ = std::max(round_, msg.block.round);

    // Safety rule: vote at most once per round, and only for blocks whose
    // justify outranks the lock or that extend the locked block.
    const bool safe = msg.justify.round > locked_round_ ||
                      locked_round_ == 0 || extends_locked(msg.block);
    const bool content_ok = !cfg_.validate || cfg_.validate(*msg.block.proposal);
    if (msg.block.round > last_voted_round_ && safe && content_ok) {
      last_voted_round_ = msg.block.round;
      ChainedMsg vote;
      vote.type = ChainedMsg::Type::Vote;
      vote.sender = cfg_.self;
      vote.block = msg.block;
      sign_vote(vote);
      // Votes are broadcast so certificates form even when the next
      // rotating leader is down.
      out.broadcasts.push_back(std::make_shared<ChainedMsg>(vote));
      Actions own = handle(vote, now);
      for (auto& b : own.broadcasts) out.broadcasts.push_back(std::move(b));
      for (auto& u : own.unicasts) out.unicasts.push_back(std::move(u));
      for (auto& c : own.committed) out.committed.push_back(std::move(c));
    }
    return out;
  }

  // Vote: every replica certifies locally.
  const std::uint64_t vote_round = msg.block.round;
  const Digest d = msg.block.digest();
  if (blocks_.count(d) == 0) {
    BlockInfo bi;
    bi.block = msg.block;
    blocks_[d] = bi;
  }
  auto& bucket = votes_[{vote_round, d}];
  bucket[msg.sender] = msg.sig;
  if (bucket.size() == 2 * f_ + 1) {
    QuorumCert qc;
    qc.round = vote_round;
    qc.block_digest = d;
    for (const auto& [node, sig] : bucket) qc.votes.push_back(sig);
    update_high_qc(qc, out);
    round_ = std::max(round_, vote_round + 1);
    if (leader_of(round_) == cfg_.self) {
      Actions prop = propose(now);
      for (auto& b : prop.broadcasts) out.broadcasts.push_back(std::move(b));
      for (auto& u : prop.unicasts) out.unicasts.push_back(std::move(u));
      for (auto& c : prop.committed) out.committed.push_back(std::move(c));
    }
  }
  return out;
}

void ChainedReplica::sign_vote(ChainedMsg& vote) const {
  Sha256 h;
  h.update("chained-vote");
  h.update_u64(vote.block.round);
  h.update(vote.block.digest());
  vote.sig = cfg_.keys->sign(cfg_.self, h.finish());
}

void ChainedReplica::update_high_qc(const QuorumCert& qc, Actions& out) {
  if (!qc.genesis() && qc.round > high_qc_.round) high_qc_ = qc;
  if (qc.genesis()) return;

  // Two-chain lock: certifying X locks X's parent.
  const BlockInfo* certified = info(qc.block_digest);
  if (certified == nullptr) return;
  const BlockInfo* parent = info(certified->block.parent);
  if (parent != nullptr && !certified->block.parent.is_zero() &&
      parent->block.round > locked_round_) {
    locked_round_ = parent->block.round;
    locked_block_ = certified->block.parent;
  }
  try_commit(out, qc.block_digest);
}

void ChainedReplica::try_commit(Actions& out, const Digest& certified) {
  // finality_depth consecutive rounds ending at `certified` finalize the
  // chain head `finality_depth - 1` links up, plus all its ancestors.
  const BlockInfo* cursor = info(certified);
  if (cursor == nullptr) return;
  std::vector<const BlockInfo*> window{cursor};
  for (std::uint32_t i = 1; i < cfg_.finality_depth; ++i) {
    const BlockInfo* parent = info(window.back()->block.parent);
    if (parent == nullptr || parent->block.round == 0) return;
    if (window.back()->block.round != parent->block.round + 1) return;
    window.push_back(parent);
  }
  const Digest target = window.back()->block.digest();
  if (blocks_[target].committed) return;

  // Collect the uncommitted ancestor chain, oldest first.
  std::vector<Digest> to_commit;
  Digest walk = target;
  while (!walk.is_zero()) {
    BlockInfo& bi = blocks_[walk];
    if (bi.committed) break;
    to_commit.push_back(walk);
    walk = bi.block.parent;
  }
  std::reverse(to_commit.begin(), to_commit.end());
  for (std::size_t i = 0; i < to_commit.size(); ++i) {
    const Digest& d = to_commit[i];
    BlockInfo& bi = blocks_[d];
    bi.committed = true;
    CommittedEntry entry;
    entry.seq = ++commit_seq_;
    entry.view = bi.block.round;
    entry.digest = bi.block.proposal ? bi.block.proposal->digest() : Digest{};
    entry.proposal = bi.block.proposal;
    // The certificate for this block travels in its child's justify.
    const Digest child = (i + 1 < to_commit.size())
                             ? to_commit[i + 1]
                             : window[cfg_.finality_depth - 2]->block.digest();
    auto child_it = blocks_.find(child);
    if (child_it != blocks_.end()) {
      entry.proof.kind = CommitProof::Kind::ChainedQc;
      entry.proof.view = bi.block.round;
      entry.proof.aux = bi.block.parent;
      entry.proof.sigs = child_it->second.justify.votes;
    }
    committed_digests_.insert(entry.digest);
    for (auto it = pending_.begin(); it != pending_.end(); ++it) {
      if ((*it)->digest() == entry.digest) {
        pending_.erase(it);
        break;
      }
    }
    log_.push_back(entry);
    out.committed.push_back(entry);
  }
}

Actions ChainedReplica::handle_round_timeout(std::uint64_t round, Tick now) {
  Actions out;
  if (round_ > round) return out;  // already moved on
  round_ = round + 1;
  if (leader_of(round_) == cfg_.self) {
    Actions prop = propose(now);
    for (auto& b : prop.broadcasts) out.broadcasts.push_back(std::move(b));
    for (auto& u : prop.unicasts) out.unicasts.push_back(std::move(u));
    for (auto& c : prop.committed) out.committed.push_back(std::move(c));
  }
  return out;
}

}  // namespace shardsim::consensus

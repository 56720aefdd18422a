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

SyncEchoReplica::SyncEchoReplica(SyncEchoConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.committee.size() < 3 || cfg_.committee.size() % 2 == 0)
    throw std::invalid_argument("sync committee size must be 2f+1, f >= 1");
  if (cfg_.keys == nullptr) throw std::invalid_argument("keyring required");
  f_ = static_cast<std::uint32_t>((cfg_.committee.size() - 1) / 2);
}

EchoMsg SyncEchoReplica::make(EchoMsg::Type type) const {
  EchoMsg m;
  m.type = type;
  m.sender = cfg_.self;
  m.iteration = iteration_;
  return m;
}

bool SyncEchoReplica::authentic(const EchoMsg& m) const {
  if (std::find(cfg_.committee.begin(), cfg_.committee.end(), m.sender) ==
      cfg_.committee.end())
    return false;
  return cfg_.keys->verify(m.sender, m.signed_digest(), m.sig);
}

Actions SyncEchoReplica::submit(ProposalPtr proposal, Tick now) {
  (void)now;
  Actions out;
  pending_.push_back(std::move(proposal));
  return out;
}

Actions SyncEchoReplica::on_round(std::uint64_t net_round, Tick now) {
  (void)now;
  Actions out;
  const std::uint64_t phase = net_round % 4;

  switch (phase) {
    case 0: {  // propose
      iteration_ = net_round / 4;
      phase_ = Phase::AwaitEcho;
      have_echoed_ = false;
      conflict_seen_ = false;
      echo_sigs_.clear();
      echoed_proposal_.reset();
      echoed_digest_ = Digest{};
      if (current_leader() == cfg_.self && !pending_.empty()) {
        EchoMsg m = make(EchoMsg::Type::Propose);
        m.proposal = pending_.front();
        m.proposal_digest = m.proposal->digest();
        m.sig = cfg_.keys->sign(cfg_.self, m.signed_digest());
        out.broadcasts.push_back(std::make_shared<EchoMsg>(m));
        // Leader adopts its own proposal for the echo round.
        echoed_digest_ = m.proposal_digest;
        echoed_proposal_ = m.proposal;
      }
      break;
    }
    case 1: {  // echo what arrived in the propose round
      if (echoed_proposal_ &&
          (!cfg_.validate || cfg_.validate(*echoed_proposal_))) {
        EchoMsg m = make(EchoMsg::Type::Echo);
        m.proposal_digest = echoed_digest_;
        m.sig = cfg_.keys->sign(cfg_.self, m.signed_digest());
        echo_sigs_[echoed_digest_][cfg_.self] = m.sig;
        out.broadcasts.push_back(std::make_shared<EchoMsg>(m));
        have_echoed_ = true;
      }
      break;
    }
    case 2: {  // pending: publish conflict evidence
      if (conflict_seen_) {
        EchoMsg m = make(EchoMsg::Type::Pending);
        m.proposal_digest = echoed_digest_;
        m.sig = cfg_.keys->sign(cfg_.self, m.signed_digest());
        out.broadcasts.push_back(std::make_shared<EchoMsg>(m));
      }
      break;
    }
    case 3: {  // accept
      phase_ = Phase::Idle;
      if (conflict_seen_) {
        // Equivocating leader: replace and retry the proposal next
        // iteration.
        ++leader_cursor_;
        break;
      }
      for (const auto& [digest, echoers] : echo_sigs_) {
        if (echoers.size() < f_ + 1) continue;
        if (!echoed_proposal_ || echoed_proposal_->digest() != digest) continue;
        EchoMsg m = make(EchoMsg::Type::Accept);
        m.proposal_digest = digest;
        m.sig = cfg_.keys->sign(cfg_.self, m.signed_digest());
        out.broadcasts.push_back(std::make_shared<EchoMsg>(m));
        CommittedEntry entry;
        entry.seq = ++commit_seq_;
        entry.view = iteration_;
        entry.digest = digest;
        entry.proposal = echoed_proposal_;
        entry.proof.kind = CommitProof::Kind::SyncEchoAccept;
        entry.proof.view = iteration_;
        for (const auto& [node, sig] : echoers) entry.proof.sigs.push_back(sig);
        log_.push_back(entry);
        out.committed.push_back(entry);
        if (current_leader() == cfg_.self && !pending_.empty() &&
            pending_.front()->digest() == digest)
          pending_.pop_front();
        break;
      }
      break;
    }
  }
  return out;
}

Actions SyncEchoReplica::handle(const EchoMsg& msg, Tick now) {
  (void)now;
  Actions out;
  if (msg.sender != cfg_.self && !authentic(msg)) return out;
  if (msg.iteration != iteration_) return out;

  switch (msg.type) {
    case EchoMsg::Type::Propose: {
      if (msg.sender != current_leader() || !msg.proposal) break;
      if (msg.proposal->digest() != msg.proposal_digest) break;
      if (!echoed_proposal_) {
        echoed_digest_ = msg.proposal_digest;
        echoed_proposal_ = msg.proposal;
      } else if (echoed_digest_ != msg.proposal_digest) {
        conflict_seen_ = true;  // leader equivocated to us directly
      }
      break;
    }
    case EchoMsg::Type::Echo: {
      echo_sigs_[msg.proposal_digest][msg.sender] = msg.sig;
      if (echo_sigs_.size() > 1) conflict_seen_ = true;
      break;
    }
    case EchoMsg::Type::Pending: {
      conflict_seen_ = true;
      break;
    }
    case EchoMsg::Type::Accept:
      break;  // informational
  }
  return out;
}

}  // namespace shardsim::consensus

#include <cstdio>
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

PbftReplica::PbftReplica(PbftConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.committee.size() < 4 || (cfg_.committee.size() - 1) % 3 != 0)
    throw std::invalid_argument("pbft committee size must be 3f+1, f >= 1");
  if (cfg_.keys == nullptr) throw std::invalid_argument("keyring required");
  f_ = static_cast<std::uint32_t>((cfg_.committee.size() - 1) / 3);
}

PbftMsg PbftReplica::make(PbftMsg::Type type) const {
  PbftMsg m;
  m.type = type;
  m.sender = cfg_.self;
  return m;
}

void PbftReplica::sign(PbftMsg& m) const {
  m.sig = cfg_.keys->sign(cfg_.self, m.signed_digest());
}

bool PbftReplica::authentic(const PbftMsg& m) const {
  if (std::find(cfg_.committee.begin(), cfg_.committee.end(), m.sender) ==
      cfg_.committee.end())
    return false;
  return cfg_.keys->verify(m.sender, m.signed_digest(), m.sig);
}

PbftReplica::Slot& PbftReplica::slot(std::uint64_t view, std::uint64_t seq) {
  return slots_[{view, seq}];
}

Tick PbftReplica::current_timeout() const {
  return cfg_.view_timeout
         << std::min<std::uint32_t>(consecutive_view_changes_, 16);
}

void PbftReplica::arm_timer(Actions& out) const {
  ++timer_generation_;
  out.start_view_timer = current_timeout();
}

void PbftReplica::absorb_own(Actions& out, const PbftMsg& m, Tick now) {
  Actions inner = handle(m, now);
  for (auto& b : inner.broadcasts) out.broadcasts.push_back(std::move(b));
  for (auto& u : inner.unicasts) out.unicasts.push_back(std::move(u));
  for (auto& c : inner.committed) out.committed.push_back(std::move(c));
  for (auto& e : inner.evidence) out.evidence.push_back(std::move(e));
  if (inner.start_view_timer) out.start_view_timer = inner.start_view_timer;
}

Actions PbftReplica::submit(ProposalPtr proposal, Tick now) {
  Actions out;
  const Digest d = proposal->digest();
  if (committed_digests_.count(d) != 0) return out;
  if (pending_digests_.count(d) == 0) {
    pending_digests_.insert(d);
    pending_.push_back(proposal);
  }
  if (is_leader() && !view_changing_) {
    propose_pending(out, now);
  } else {
    auto req = std::make_shared<PbftMsg>(make(PbftMsg::Type::Request));
    req->view = view_;
    req->proposal = proposal;
    req->proposal_digest = d;
    sign(*req);
    const NodeId target = leader_of(view_changing_ ? view_change_target_ : view_);
    if (target != cfg_.self) out.unicasts.emplace_back(target, std::move(req));
  }
  arm_timer(out);
  return out;
}

bool PbftReplica::in_flight(const Digest& d) const {
  // In flight = pre-prepared in the current view and not yet committed;
  // assignments from abandoned views do not count, so entries lost in a
  // view change become proposable again.
  for (const auto& [key, sl] : slots_) {
    if (key.first != view_) continue;
    if (sl.pre_prepared && !sl.committed && sl.digest == d) return true;
  }
  return false;
}

void PbftReplica::propose_pending(Actions& out, Tick now) {
  // Proposals stay queued until they commit; a pre-prepare lost to a view
  // change is simply re-proposed under the next leader.
  std::vector<ProposalPtr> batch(pending_.begin(), pending_.end());
  for (const auto& p : batch) {
    const Digest d = p->digest();
    if (committed_digests_.count(d) != 0 || in_flight(d)) continue;
    auto pp = std::make_shared<PbftMsg>(make(PbftMsg::Type::PrePrepare));
    pp->view = view_;
    pp->seq = next_seq_++;
    pp->proposal = p;
    pp->proposal_digest = d;
    sign(*pp);
    out.broadcasts.push_back(pp);
    absorb_own(out, *pp, now);
  }
}

Actions PbftReplica::handle(const PbftMsg& msg, Tick now) {
  Actions out;
  if (msg.sender != cfg_.self && !authentic(msg)) return out;

  switch (msg.type) {
    case PbftMsg::Type::Request: {
      if (!msg.proposal) break;
      const Digest d = msg.proposal->digest();
      if (committed_digests_.count(d) != 0) break;
      if (pending_digests_.insert(d).second) pending_.push_back(msg.proposal);
      if (is_leader() && !view_changing_) propose_pending(out, now);
      arm_timer(out);
      break;
    }

    case PbftMsg::Type::PrePrepare: {
      if (msg.view != view_ || view_changing_) break;
      if (msg.sender != leader_of(msg.view)) break;
      if (!msg.proposal || msg.proposal->digest() != msg.proposal_digest) break;
      Slot& sl = slot(msg.view, msg.seq);
      if (sl.pre_prepared && sl.digest != msg.proposal_digest) {
        EquivocationEvidence ev;
        ev.offender = msg.sender;
        ev.msg_a = sl.pp_msg_digest;
        ev.sig_a = sl.pp_sig;
        ev.msg_b = msg.signed_digest();
        ev.sig_b = msg.sig;
        out.evidence.push_back(ev);
        break;
      }
      if (!sl.pre_prepared) {
        sl.pre_prepared = true;
        sl.digest = msg.proposal_digest;
        sl.proposal = msg.proposal;
        sl.pp_msg_digest = msg.signed_digest();
        sl.pp_sig = msg.sig;
        sl.validated = !cfg_.validate || cfg_.validate(*msg.proposal);
      }
      if (!sl.validated) break;  // refuse to vote for invalid content
      if (!sl.sent_prepare) {
        sl.sent_prepare = true;
        auto prep = std::make_shared<PbftMsg>(make(PbftMsg::Type::Prepare));
        prep->view = msg.view;
        prep->seq = msg.seq;
        prep->proposal_digest = sl.digest;
        sign(*prep);
        out.broadcasts.push_back(prep);
        absorb_own(out, *prep, now);
      }
      maybe_prepare(out, msg.view, msg.seq, now);
      arm_timer(out);
      break;
    }

    case PbftMsg::Type::Prepare: {
      // Messages from abandoned views must not count toward quorums: a
      // replica that joined a view change stops voting in older views.
      if (msg.view < (view_changing_ ? view_change_target_ : view_)) break;
      Slot& sl = slot(msg.view, msg.seq);
      sl.prepares[msg.proposal_digest][msg.sender] = msg.sig;
      maybe_prepare(out, msg.view, msg.seq, now);
      break;
    }

    case PbftMsg::Type::Commit: {
      if (msg.view < (view_changing_ ? view_change_target_ : view_)) break;
      Slot& sl = slot(msg.view, msg.seq);
      sl.commits[msg.proposal_digest][msg.sender] = msg.sig;
      maybe_commit(out, msg.view, msg.seq, now);
      break;
    }

    case PbftMsg::Type::ViewChange: {
      if (msg.view <= view_) break;
      if (!validate_view_change(msg)) break;
      view_changes_[msg.view][msg.sender] = msg;

      const NodeId new_leader = leader_of(msg.view);
      if (new_leader == cfg_.self) {
        maybe_new_view(out, msg.view, now);
      } else if (msg.sender != cfg_.self) {
        auto ack = std::make_shared<PbftMsg>(make(PbftMsg::Type::ViewChangeAck));
        ack->view = msg.view;
        ack->vc_sender = msg.sender;
        ack->vc_digest = msg.signed_digest();
        sign(*ack);
        out.unicasts.emplace_back(new_leader, std::move(ack));
      }

      // f+1 distinct view-change messages pull a lagging replica along.
      if ((!view_changing_ || view_change_target_ < msg.view) &&
          view_changes_[msg.view].size() >= f_ + 1 && msg.view > view_)
        start_view_change(out, msg.view, now);
      break;
    }

    case PbftMsg::Type::ViewChangeAck: {
      if (leader_of(msg.view) != cfg_.self) break;
      if (msg.sender == cfg_.self || msg.sender == msg.vc_sender) break;
      vc_acks_[msg.vc_digest].insert(msg.sender);
      maybe_new_view(out, msg.view, now);
      break;
    }

    case PbftMsg::Type::NewView: {
      if (msg.sender != leader_of(msg.view)) break;
      if (msg.view <= view_) break;
      if (msg.view_change_set.size() < quorum()) break;
      std::uint64_t set_max_checkpoint_seen = 0;
      std::set<NodeId> senders;
      bool all_valid = true;
      for (const auto& vc : msg.view_change_set) {
        if (vc.view != msg.view || !authentic(vc) || !validate_view_change(vc)) {
          all_valid = false;
          break;
        }
        senders.insert(vc.sender);
        set_max_checkpoint_seen =
            std::max(set_max_checkpoint_seen, vc.stable_checkpoint);
      }
      if (!all_valid || senders.size() < quorum()) break;
      // The re-issue set must be exactly what the view-change set implies.
      std::uint64_t set_max_checkpoint = 0;
      auto expected = compute_reissue(msg.view_change_set, set_max_checkpoint);
      if (expected.size() != msg.new_view_reissue.size()) break;
      bool match = true;
      for (std::size_t i = 0; i < expected.size(); ++i) {
        if (expected[i].seq != msg.new_view_reissue[i].seq ||
            expected[i].proposal_digest !=
                msg.new_view_reissue[i].proposal_digest) {
          match = false;
          break;
        }
      }
      if (!match) break;
      enter_view(out, msg.view, msg.new_view_reissue, set_max_checkpoint_seen,
                 now);
      break;
    }
  }
  return out;
}

void PbftReplica::maybe_prepare(Actions& out, std::uint64_t view,
                                std::uint64_t seq, Tick now) {
  Slot& sl = slot(view, seq);
  if (!sl.pre_prepared || sl.sent_commit) return;
  auto it = sl.prepares.find(sl.digest);
  if (it == sl.prepares.end() || it->second.size() < quorum()) return;
  sl.sent_commit = true;
  auto commit = std::make_shared<PbftMsg>(make(PbftMsg::Type::Commit));
  commit->view = view;
  commit->seq = seq;
  commit->proposal_digest = sl.digest;
  sign(*commit);
  out.broadcasts.push_back(commit);
  absorb_own(out, *commit, now);
}

void PbftReplica::maybe_commit(Actions& out, std::uint64_t view,
                               std::uint64_t seq, Tick now) {
  (void)now;
  Slot& sl = slot(view, seq);
  if (!sl.pre_prepared || sl.committed) return;
  auto it = sl.commits.find(sl.digest);
  if (it == sl.commits.end() || it->second.size() < quorum()) return;
  sl.committed = true;

  auto existing = committed_by_seq_.find(seq);
  if (existing != committed_by_seq_.end()) {
    if (existing->second.digest != sl.digest)
      throw InvariantBreach(
          "conflicting commit at one sequence number (self=" +
              std::to_string(cfg_.self) + " seq=" + std::to_string(seq) +
              " old_view=" + std::to_string(existing->second.view) +
              " new_view=" + std::to_string(view) + " old=" +
              existing->second.digest.hex().substr(0, 8) + " new=" +
              sl.digest.hex().substr(0, 8) + ")",
          0);
    return;
  }
  CommittedEntry entry;
  entry.seq = seq;
  entry.view = view;
  entry.digest = sl.digest;
  entry.proposal = sl.proposal;
  entry.proof.kind = CommitProof::Kind::PbftCommit;
  entry.proof.view = view;
  entry.proof.seq = seq;
  for (const auto& [node, sig] : it->second) entry.proof.sigs.push_back(sig);
  committed_by_seq_[seq] = entry;
  committed_digests_.insert(sl.digest);
  if (pending_digests_.erase(sl.digest) != 0) {
    for (auto it = pending_.begin(); it != pending_.end(); ++it)
      if ((*it)->digest() == sl.digest) {
        pending_.erase(it);
        break;
      }
  }

  if (seq > stable_checkpoint_cand_seq_) {
    stable_checkpoint_cand_seq_ = seq;
    stable_checkpoint_cand_view_ = view;
    stable_checkpoint_cand_digest_ = sl.digest;
    stable_checkpoint_cand_proof_.clear();
    for (const auto& [node, sig] : it->second)
      stable_checkpoint_cand_proof_.push_back(sig);
  }

  consecutive_view_changes_ = 0;
  try_deliver(out);
}

void PbftReplica::try_deliver(Actions& out) {
  while (true) {
    auto it = committed_by_seq_.find(delivered_through_ + 1);
    if (it == committed_by_seq_.end()) break;
    ++delivered_through_;
    log_.push_back(it->second);
    out.committed.push_back(it->second);
    if (stable_checkpoint_cand_seq_ == delivered_through_) {
      stable_checkpoint_ = delivered_through_;
      stable_checkpoint_view_ = stable_checkpoint_cand_view_;
      stable_checkpoint_digest_ = stable_checkpoint_cand_digest_;
      stable_checkpoint_proof_ = stable_checkpoint_cand_proof_;
    }
  }
}

bool PbftReplica::validate_view_change(const PbftMsg& vc) const {
  if (vc.stable_checkpoint > 0) {
    if (vc.checkpoint_proof.size() < quorum()) return false;
    PbftMsg probe;
    probe.type = PbftMsg::Type::Commit;
    probe.view = vc.checkpoint_view;
    probe.seq = vc.stable_checkpoint;
    probe.proposal_digest = vc.checkpoint_digest;
    std::set<NodeId> signers;
    for (const auto& s : vc.checkpoint_proof) {
      if (std::find(cfg_.committee.begin(), cfg_.committee.end(), s.signer) ==
          cfg_.committee.end())
        return false;
      probe.sender = s.signer;
      if (!cfg_.keys->verify(s.signer, probe.signed_digest(), s)) return false;
      signers.insert(s.signer);
    }
    if (signers.size() < quorum()) return false;
  }
  for (const auto& proof : vc.prepared_set) {
    if (!proof.proposal || proof.proposal->digest() != proof.proposal_digest)
      return false;
    if (proof.prepares.size() < quorum()) return false;
    PbftMsg probe;
    probe.type = PbftMsg::Type::Prepare;
    probe.view = proof.view;
    probe.seq = proof.seq;
    probe.proposal_digest = proof.proposal_digest;
    std::set<NodeId> signers;
    for (const auto& s : proof.prepares) {
      probe.sender = s.signer;
      if (!cfg_.keys->verify(s.signer, probe.signed_digest(), s)) return false;
      signers.insert(s.signer);
    }
    if (signers.size() < quorum()) return false;
  }
  return true;
}

std::vector<PreparedProof> PbftReplica::compute_reissue(
    const std::vector<PbftMsg>& vcs, std::uint64_t& set_max_checkpoint) const {
  // Re-issue, above the set's lowest checkpoint, the prepared entry with
  // the highest view per sequence.  Checkpointed prefixes are contiguous,
  // so every sequence some member already delivered carries a real proof
  // here and fillers only ever land on genuinely unclaimed sequences.
  std::uint64_t min_checkpoint = UINT64_MAX;
  set_max_checkpoint = 0;
  for (const auto& vc : vcs) {
    min_checkpoint = std::min(min_checkpoint, vc.stable_checkpoint);
    set_max_checkpoint = std::max(set_max_checkpoint, vc.stable_checkpoint);
  }
  if (vcs.empty()) min_checkpoint = 0;

  std::map<std::uint64_t, PreparedProof> best;
  std::uint64_t max_seq = set_max_checkpoint;
  for (const auto& vc : vcs) {
    for (const auto& proof : vc.prepared_set) {
      if (proof.seq <= min_checkpoint) continue;
      max_seq = std::max(max_seq, proof.seq);
      auto it = best.find(proof.seq);
      if (it == best.end() || proof.view > it->second.view) best[proof.seq] = proof;
    }
  }
  std::vector<PreparedProof> out;
  for (std::uint64_t s = min_checkpoint + 1; s <= max_seq; ++s) {
    auto it = best.find(s);
    if (it != best.end()) {
      out.push_back(it->second);
    } else {
      PreparedProof filler;
      filler.seq = s;
      filler.proposal = empty_proposal();
      filler.proposal_digest = filler.proposal->digest();
      out.push_back(filler);
    }
  }
  return out;
}

void PbftReplica::maybe_new_view(Actions& out, std::uint64_t target, Tick now) {
  if (leader_of(target) != cfg_.self || new_view_sent_.count(target) != 0) return;
  if (target <= view_) return;
  auto vcs_it = view_changes_.find(target);
  if (vcs_it == view_changes_.end()) return;

  std::vector<PbftMsg> ready;
  for (const auto& [sender, vc] : vcs_it->second) {
    // The leader's own message and its local validation stand on their
    // own; other view-changes need 2f-1 acknowledgments.
    std::size_t acks = 0;
    auto it = vc_acks_.find(vc.signed_digest());
    if (it != vc_acks_.end()) acks = it->second.size();
    if (sender == cfg_.self || acks >= 2 * f_ - 1) ready.push_back(vc);
  }
  if (ready.size() < quorum()) return;

  new_view_sent_.insert(target);
  std::uint64_t set_max_checkpoint = 0;
  auto nv = std::make_shared<PbftMsg>(make(PbftMsg::Type::NewView));
  nv->view = target;
  nv->view_change_set = ready;
  nv->new_view_reissue = compute_reissue(ready, set_max_checkpoint);
  sign(*nv);
  out.broadcasts.push_back(nv);
  enter_view(out, target, nv->new_view_reissue, set_max_checkpoint, now);
}

void PbftReplica::enter_view(Actions& out, std::uint64_t new_view,
                             const std::vector<PreparedProof>& reissue,
                             std::uint64_t set_max_checkpoint, Tick now) {
  view_ = new_view;
  view_changing_ = false;
  std::uint64_t max_seq =
      std::max({delivered_through_, stable_checkpoint_, set_max_checkpoint});
  for (const auto& p : reissue) max_seq = std::max(max_seq, p.seq);
  for (const auto& [s, e] : committed_by_seq_) max_seq = std::max(max_seq, s);
  next_seq_ = max_seq + 1;

  // Prepared-but-uncommitted entries resume in the new view; entries this
  // replica already committed are voted again (same digest, no re-delivery)
  // so members that missed them catch up.
  for (const auto& proof : reissue) {
    auto done = committed_by_seq_.find(proof.seq);
    if (done != committed_by_seq_.end() &&
        done->second.digest != proof.proposal_digest)
      throw InvariantBreach("view change would overwrite a committed entry", 0);
    Slot& sl = slot(view_, proof.seq);
    if (!sl.pre_prepared) {
      sl.pre_prepared = true;
      sl.digest = proof.proposal_digest;
      sl.proposal = proof.proposal;
      sl.validated = true;  // prepared quorum implies earlier honest validation
    }
    if (!sl.sent_prepare) {
      sl.sent_prepare = true;
      auto prep = std::make_shared<PbftMsg>(make(PbftMsg::Type::Prepare));
      prep->view = view_;
      prep->seq = proof.seq;
      prep->proposal_digest = proof.proposal_digest;
      sign(*prep);
      out.broadcasts.push_back(prep);
      absorb_own(out, *prep, now);
    }
    maybe_prepare(out, view_, proof.seq, now);
  }

  if (is_leader()) {
    propose_pending(out, now);
  } else if (!pending_.empty()) {
    // Re-forward outstanding requests to the new leader.
    for (const auto& p : pending_) {
      auto req = std::make_shared<PbftMsg>(make(PbftMsg::Type::Request));
      req->view = view_;
      req->proposal = p;
      req->proposal_digest = p->digest();
      sign(*req);
      out.unicasts.emplace_back(leader_of(view_), std::move(req));
    }
  }
  arm_timer(out);
}

void PbftReplica::start_view_change(Actions& out, std::uint64_t target_view,
                                    Tick now) {
  view_changing_ = true;
  view_change_target_ = target_view;
  ++consecutive_view_changes_;

  auto vc = std::make_shared<PbftMsg>(make(PbftMsg::Type::ViewChange));
  vc->view = target_view;
  vc->stable_checkpoint = stable_checkpoint_;
  vc->checkpoint_view = stable_checkpoint_view_;
  vc->checkpoint_digest = stable_checkpoint_digest_;
  vc->checkpoint_proof = stable_checkpoint_proof_;
  for (const auto& [key, sl] : slots_) {
    const auto& [v, s] = key;
    if (!sl.pre_prepared) continue;
    auto it = sl.prepares.find(sl.digest);
    if (it == sl.prepares.end() || it->second.size() < quorum()) continue;
    // Keep only the highest-view proof per sequence.
    bool superseded = false;
    for (const auto& existing : vc->prepared_set)
      if (existing.seq == s && existing.view >= v) superseded = true;
    if (superseded) continue;
    std::erase_if(vc->prepared_set,
                  [s](const PreparedProof& p) { return p.seq == s; });
    PreparedProof proof;
    proof.view = v;
    proof.seq = s;
    proof.proposal_digest = sl.digest;
    proof.proposal = sl.proposal;
    for (const auto& [node, sig] : it->second) proof.prepares.push_back(sig);
    vc->prepared_set.push_back(proof);
  }
  std::sort(vc->prepared_set.begin(), vc->prepared_set.end(),
            [](const PreparedProof& a, const PreparedProof& b) {
              return a.seq < b.seq;
            });
  sign(*vc);
  out.broadcasts.push_back(vc);
  absorb_own(out, *vc, now);
  arm_timer(out);  // backoff applies through current_timeout
}

Actions PbftReplica::handle_view_timeout(std::uint64_t token, Tick now) {
  Actions out;
  if (token != timer_token()) return out;  // stale timer
  if (view_changing_) {
    start_view_change(out, view_change_target_ + 1, now);
    return out;
  }
  if (pending_.empty() && !has_uncommitted()) return out;
  start_view_change(out, view_ + 1, now);
  return out;
}

bool PbftReplica::has_uncommitted() const {
  for (const auto& [key, sl] : slots_)
    if (key.first == view_ && sl.pre_prepared && !sl.committed &&
        key.second > delivered_through_)
      return true;
  return false;
}

}  // namespace shardsim::consensus

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

ProposalPtr empty_proposal() {
  static const auto instance = std::make_shared<const EmptyProposal>();
  return instance;
}

Digest PbftMsg::signed_digest() const {
  Sha256 h;
  h.update("pbft");
  h.update_u32(static_cast<std::uint32_t>(type));
  h.update_u32(sender);
  h.update_u64(view);
  h.update_u64(seq);
  h.update(proposal_digest);
  h.update_u64(stable_checkpoint);
  h.update(checkpoint_digest);
  h.update_u32(static_cast<std::uint32_t>(checkpoint_proof.size()));
  for (const auto& s : checkpoint_proof) {
    h.update_u32(s.signer);
    h.update(s.tag);
  }
  h.update_u32(static_cast<std::uint32_t>(prepared_set.size()));
  for (const auto& p : prepared_set) {
    h.update_u64(p.view);
    h.update_u64(p.seq);
    h.update(p.proposal_digest);
    h.update_u32(static_cast<std::uint32_t>(p.prepares.size()));
    for (const auto& s : p.prepares) {
      h.update_u32(s.signer);
      h.update(s.tag);
    }
  }
  h.update_u32(vc_sender);
  h.update(vc_digest);
  h.update_u32(static_cast<std::uint32_t>(view_change_set.size()));
  for (const auto& vc : view_change_set) {
    h.update(vc.signed_digest());
    h.update(vc.sig.tag);
  }
  h.update_u32(static_cast<std::uint32_t>(new_view_reissue.size()));
  for (const auto& p : new_view_reissue) {
    h.update_u64(p.seq);
    h.update(p.proposal_digest);
  }
  return h.finish();
}

const char* PbftMsg::type_name() const {
  switch (type) {
    case Type::Request: return "pbft-request";
    case Type::PrePrepare: return "pbft-pre-prepare";
    case Type::Prepare: return "pbft-prepare";
    case Type::Commit: return "pbft-commit";
    case Type::ViewChange: return "pbft-view-change";
    case Type::ViewChangeAck: return "pbft-view-change-ack";
    case Type::NewView: return "pbft-new-view";
  }
  return "pbft";
}

std::size_t PbftMsg::wire_size() const {
  std::size_t size = 96;  // header, ids, signature
  if (proposal) size += proposal->wire_size();
  size += checkpoint_proof.size() * 40;
  for (const auto& p : prepared_set) {
    size += 56 + p.prepares.size() * 40;
    if (p.proposal) size += p.proposal->wire_size();
  }
  for (const auto& vc : view_change_set) size += vc.wire_size();
  for (const auto& p : new_view_reissue) {
    size += 56;
    if (p.proposal) size += p.proposal->wire_size();
  }
  return size;
}

Digest ChainedBlock::digest() const {
  Sha256 h;
  h.update("chained-block");
  h.update_u64(round);
  h.update(parent);
  h.update(proposal ? proposal->digest() : Digest{});
  return h.finish();
}

Digest ChainedMsg::signed_digest() const {
  Sha256 h;
  h.update("chained");
  h.update_u32(static_cast<std::uint32_t>(type));
  h.update_u32(sender);
  h.update(block.digest());
  h.update_u64(justify.round);
  h.update(justify.block_digest);
  return h.finish();
}

const char* ChainedMsg::type_name() const {
  return type == Type::Propose ? "chained-propose" : "chained-vote";
}

std::size_t ChainedMsg::wire_size() const {
  // Quorum certificates are charged O(1): an aggregated signature stands
  // in for the vote multiset.
  std::size_t size = 144;
  if (block.proposal) size += block.proposal->wire_size();
  return size;
}

Digest EchoMsg::signed_digest() const {
  Sha256 h;
  h.update("echo");
  h.update_u32(static_cast<std::uint32_t>(type));
  h.update_u32(sender);
  h.update_u64(iteration);
  h.update(proposal_digest);
  h.update(conflicting);
  return h.finish();
}

const char* EchoMsg::type_name() const {
  switch (type) {
    case Type::Propose: return "echo-propose";
    case Type::Echo: return "echo-echo";
    case Type::Pending: return "echo-pending";
    case Type::Accept: return "echo-accept";
  }
  return "echo";
}

std::size_t EchoMsg::wire_size() const {
  std::size_t size = 112;
  if (proposal) size += proposal->wire_size();
  return size;
}

bool verify_commit_proof(const CommitProof& proof, const Digest& proposal_digest,
                         const Keyring& keys, const std::vector<NodeId>& roster,
                         std::uint32_t need) {
  auto in_roster = [&](NodeId n) {
    for (NodeId r : roster)
      if (r == n) return true;
    return false;
  };
  std::set<NodeId> signers;
  switch (proof.kind) {
    case CommitProof::Kind::None:
      return false;
    case CommitProof::Kind::PbftCommit: {
      PbftMsg probe;
      probe.type = PbftMsg::Type::Commit;
      probe.view = proof.view;
      probe.seq = proof.seq;
      probe.proposal_digest = proposal_digest;
      for (const auto& s : proof.sigs) {
        if (!in_roster(s.signer)) return false;
        probe.sender = s.signer;
        if (!keys.verify(s.signer, probe.signed_digest(), s)) return false;
        signers.insert(s.signer);
      }
      break;
    }
    case CommitProof::Kind::ChainedQc: {
      // Reconstruct the block digest the votes certified.
      Sha256 hb;
      hb.update("chained-block");
      hb.update_u64(proof.view);
      hb.update(proof.aux);
      hb.update(proposal_digest);
      const Digest block_digest = hb.finish();
      Sha256 hv;
      hv.update("chained-vote");
      hv.update_u64(proof.view);
      hv.update(block_digest);
      const Digest vote_digest = hv.finish();
      for (const auto& s : proof.sigs) {
        if (!in_roster(s.signer)) return false;
        if (!keys.verify(s.signer, vote_digest, s)) return false;
        signers.insert(s.signer);
      }
      break;
    }
    case CommitProof::Kind::SyncEchoAccept: {
      EchoMsg probe;
      probe.type = EchoMsg::Type::Echo;
      probe.iteration = proof.view;
      probe.proposal_digest = proposal_digest;
      for (const auto& s : proof.sigs) {
        if (!in_roster(s.signer)) return false;
        probe.sender = s.signer;
        if (!keys.verify(s.signer, probe.signed_digest(), s)) return false;
        signers.insert(s.signer);
      }
      break;
    }
  }
  return signers.size() >= need;
}

}  // namespace shardsim::consensus

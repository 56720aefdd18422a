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

#include <deque>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "shardsim/common.hpp"
#include "shardsim/ledger.hpp"
#include "shardsim/simnet.hpp"

namespace shardsim::consensus {

/// Anything a committee can commit: a transaction batch, an availability
/// verdict, a new-node list, or the empty filler.  Concrete content lives
/// with the module that owns it; consensus only needs a stable digest and
/// a size for the bandwidth meter.
struct ProposalContent {
  virtual ~ProposalContent() = default;
  virtual Digest digest() const = 0;
  virtual std::size_t wire_size() const = 0;
  virtual const char* type_name() const = 0;
};

using ProposalPtr = std::shared_ptr<const ProposalContent>;

struct EmptyProposal final : public ProposalContent {
  Digest digest() const override { return sha256("empty-proposal"); }
  std::size_t wire_size() const override { return 1; }
  const char* type_name() const override { return "empty"; }
};

ProposalPtr empty_proposal();

/// Transferable evidence that a committee committed a proposal; how the
/// signatures bind depends on the engine that produced them.
struct CommitProof {
  enum class Kind : std::uint8_t { None, PbftCommit, ChainedQc, SyncEchoAccept };
  Kind kind = Kind::None;
  std::uint64_t view = 0;  // pbft view / chained round / echo iteration
  std::uint64_t seq = 0;   // pbft sequence
  Digest aux;              // chained: parent block digest
  std::vector<Signature> sigs;
};

/// Checks `need` distinct roster signatures binding the proof to the
/// proposal digest.
bool verify_commit_proof(const CommitProof& proof, const Digest& proposal_digest,
                         const Keyring& keys, const std::vector<NodeId>& roster,
                         std::uint32_t need);

struct CommittedEntry {
  std::uint64_t seq = 0;
  std::uint64_t view = 0;
  Digest digest;
  ProposalPtr proposal;
  CommitProof proof;
};

/// Pre-vote validation hook: a replica only votes for proposals this
/// predicate accepts.  Defaults to accept-all.
using ProposalValidator = std::function<bool(const ProposalContent&)>;

/// Two valid signatures from one node over conflicting messages; the
/// slashing input.
struct EquivocationEvidence {
  NodeId offender = kNoNode;
  Digest msg_a;
  Digest msg_b;
  Signature sig_a;
  Signature sig_b;

  bool verify(const Keyring& keys) const {
    return msg_a != msg_b && keys.verify(offender, msg_a, sig_a) &&
           keys.verify(offender, msg_b, sig_b);
  }
};

// --- PBFT -------------------------------------------------------------------

struct PreparedProof {
  std::uint64_t view = 0;
  std::uint64_t seq = 0;
  Digest proposal_digest;
  ProposalPtr proposal;
  std::vector<Signature> prepares;  // 2f+1 distinct
};

struct PbftMsg final : public net::Payload {
  enum class Type : std::uint8_t {
    Request,        // proposal forwarded to the leader
    PrePrepare,
    Prepare,
    Commit,
    ViewChange,
    ViewChangeAck,
    NewView,
  };

  Type type = Type::Request;
  NodeId sender = kNoNode;
  std::uint64_t view = 0;
  std::uint64_t seq = 0;
  Digest proposal_digest;
  ProposalPtr proposal;  // Request / PrePrepare bodies

  // ViewChange: (view-change, v+1, S*, C, U, i)
  std::uint64_t stable_checkpoint = 0;
  std::uint64_t checkpoint_view = 0;  // view the checkpoint committed in
  Digest checkpoint_digest;
  std::vector<Signature> checkpoint_proof;  // C: 2f+1 commit votes for S*
  std::vector<PreparedProof> prepared_set;  // U: prepared above S*

  // ViewChangeAck: (view-change-ack, v+1, i, j, H(vc_j))
  NodeId vc_sender = kNoNode;
  Digest vc_digest;

  // NewView: (new-view, v+1, S, U*)
  std::vector<PbftMsg> view_change_set;        // S (acks validated by leader)
  std::vector<PreparedProof> new_view_reissue;  // U*

  Signature sig;

  Digest signed_digest() const;
  const char* type_name() const override;
  std::size_t wire_size() const override;
};

struct TimerMsg final : public net::Payload {
  enum class Kind : std::uint8_t { PbftView, ChainedRound, EchoPhase, Tick };
  Kind kind = Kind::Tick;
  std::uint64_t value = 0;  // view / round / phase cursor
  std::uint64_t aux = 0;

  const char* type_name() const override { return "timer"; }
  std::size_t wire_size() const override { return 0; }
};

/// Outbound effects of one protocol step.
struct Actions {
  std::vector<net::PayloadPtr> broadcasts;  // to every other committee member
  std::vector<std::pair<NodeId, net::PayloadPtr>> unicasts;
  std::vector<CommittedEntry> committed;  // appended to the LOG, in order
  std::vector<EquivocationEvidence> evidence;
  std::optional<Tick> start_view_timer;  // (re)arm with this delay
};

struct PbftConfig {
  std::vector<NodeId> committee;  // ordered roster; leader(v) = v mod u
  NodeId self = kNoNode;
  Tick view_timeout = 40;  // doubles on cascading view changes
  const Keyring* keys = nullptr;
  ProposalValidator validate;  // empty = accept all
};

/// Deterministic PBFT replica: quorum 2f+1 of u = 3f+1, view change with
/// checkpoint certificate C, prepared set U, per-message 2f-1
/// acknowledgments at the new leader, and re-issued pre-prepares U*.
class PbftReplica {
 public:
  explicit PbftReplica(PbftConfig cfg);

  Actions submit(ProposalPtr proposal, Tick now);
  Actions handle(const PbftMsg& msg, Tick now);
  /// Timer carrying timer_token() fired; stale tokens are ignored.
  Actions handle_view_timeout(std::uint64_t token, Tick now);

  std::uint64_t view() const { return view_; }
  NodeId leader_of(std::uint64_t v) const {
    return cfg_.committee[v % cfg_.committee.size()];
  }
  bool is_leader() const { return leader_of(view_) == cfg_.self; }
  std::uint32_t f() const { return f_; }
  std::uint32_t quorum() const { return 2 * f_ + 1; }
  /// Timers cannot be canceled, so each re-arm invalidates older ones;
  /// only the token handed out last is live.
  std::uint64_t timer_token() const { return timer_generation_; }

  const std::vector<CommittedEntry>& log() const { return log_; }
  std::uint64_t stable_checkpoint() const { return stable_checkpoint_; }
  std::size_t pending_count() const { return pending_.size(); }
  bool in_view_change() const { return view_changing_; }
  bool has_uncommitted() const;

 private:
  struct Slot {
    bool pre_prepared = false;
    bool validated = true;
    Digest digest;
    ProposalPtr proposal;
    Digest pp_msg_digest;  // for equivocation evidence
    Signature pp_sig;
    std::map<Digest, std::map<NodeId, Signature>> prepares;
    std::map<Digest, std::map<NodeId, Signature>> commits;
    bool sent_prepare = false;
    bool sent_commit = false;
    bool committed = false;
  };

  PbftMsg make(PbftMsg::Type type) const;
  void sign(PbftMsg& m) const;
  bool authentic(const PbftMsg& m) const;
  Slot& slot(std::uint64_t view, std::uint64_t seq);
  void absorb_own(Actions& out, const PbftMsg& m, Tick now);
  void try_deliver(Actions& out);
  void maybe_prepare(Actions& out, std::uint64_t view, std::uint64_t seq, Tick now);
  void maybe_commit(Actions& out, std::uint64_t view, std::uint64_t seq, Tick now);
  bool validate_view_change(const PbftMsg& vc) const;
  std::vector<PreparedProof> compute_reissue(
      const std::vector<PbftMsg>& vcs, std::uint64_t& set_max_checkpoint) const;
  void maybe_new_view(Actions& out, std::uint64_t target, Tick now);
  bool in_flight(const Digest& d) const;
  void propose_pending(Actions& out, Tick now);
  void enter_view(Actions& out, std::uint64_t new_view,
                  const std::vector<PreparedProof>& reissue,
                  std::uint64_t set_max_checkpoint, Tick now);
  void start_view_change(Actions& out, std::uint64_t target_view, Tick now);
  void arm_timer(Actions& out) const;
  Tick current_timeout() const;

  PbftConfig cfg_;
  std::uint32_t f_;
  std::uint64_t view_ = 0;
  std::uint64_t next_seq_ = 1;
  mutable std::uint64_t timer_generation_ = 0;
  bool view_changing_ = false;
  std::uint64_t view_change_target_ = 0;
  std::uint32_t consecutive_view_changes_ = 0;

  std::map<std::pair<std::uint64_t, std::uint64_t>, Slot> slots_;
  std::map<std::uint64_t, CommittedEntry> committed_by_seq_;
  std::set<Digest> committed_digests_;
  std::uint64_t delivered_through_ = 0;
  std::vector<CommittedEntry> log_;

  std::uint64_t stable_checkpoint_ = 0;
  std::uint64_t stable_checkpoint_view_ = 0;
  Digest stable_checkpoint_digest_;
  std::vector<Signature> stable_checkpoint_proof_;
  std::uint64_t stable_checkpoint_cand_seq_ = 0;
  std::uint64_t stable_checkpoint_cand_view_ = 0;
  Digest stable_checkpoint_cand_digest_;
  std::vector<Signature> stable_checkpoint_cand_proof_;

  std::deque<ProposalPtr> pending_;  // submitted, retained until committed
  std::set<Digest> pending_digests_;

  // view-change bookkeeping (any replica may become the next leader)
  std::map<std::uint64_t, std::map<NodeId, PbftMsg>> view_changes_;
  std::map<Digest, std::set<NodeId>> vc_acks_;
  std::set<std::uint64_t> new_view_sent_;
};

// --- chained (pipelined) BFT --------------------------------------------------

struct QuorumCert {
  std::uint64_t round = 0;
  Digest block_digest;
  std::vector<Signature> votes;  // 2f+1 distinct; wire-charged O(1)

  bool genesis() const { return round == 0 && block_digest.is_zero(); }
};

struct ChainedBlock {
  std::uint64_t round = 0;
  Digest parent;  // qc.block_digest
  ProposalPtr proposal;

  Digest digest() const;
};

struct ChainedMsg final : public net::Payload {
  enum class Type : std::uint8_t { Propose, Vote };
  Type type = Type::Propose;
  NodeId sender = kNoNode;
  ChainedBlock block;
  QuorumCert justify;
  Signature sig;

  Digest signed_digest() const;
  const char* type_name() const override;
  std::size_t wire_size() const override;
};

struct ChainedConfig {
  std::vector<NodeId> committee;
  NodeId self = kNoNode;
  Tick round_timeout = 30;
  std::uint32_t finality_depth = 3;  // consecutive-round QC chain
  const Keyring* keys = nullptr;
  ProposalValidator validate;  // empty = accept all
};

/// Rotating-leader pipelined BFT: each message carries the previous
/// round's quorum certificate plus a new proposal; a block is final once
/// it heads a chain of `finality_depth` consecutive-round certificates.
class ChainedReplica {
 public:
  explicit ChainedReplica(ChainedConfig cfg);

  /// Kick off round 1 (call on the starting leader).
  Actions start(Tick now);
  Actions submit(ProposalPtr proposal, Tick now);
  Actions handle(const ChainedMsg& msg, Tick now);
  Actions handle_round_timeout(std::uint64_t round, Tick now);

  NodeId leader_of(std::uint64_t round) const {
    return cfg_.committee[round % cfg_.committee.size()];
  }
  std::uint64_t round() const { return round_; }
  const std::vector<CommittedEntry>& log() const { return log_; }

 private:
  struct BlockInfo {
    ChainedBlock block;
    QuorumCert justify;
    bool committed = false;
  };

  void sign_msg(ChainedMsg& m) const;
  void sign_vote(ChainedMsg& vote) const;
  bool authentic(const ChainedMsg& m) const;
  bool qc_valid(const QuorumCert& qc) const;
  bool extends_locked(const ChainedBlock& block) const;
  const BlockInfo* info(const Digest& d) const;
  void update_high_qc(const QuorumCert& qc, Actions& out);
  void try_commit(Actions& out, const Digest& certified);
  Actions propose(Tick now);

  ChainedConfig cfg_;
  std::uint32_t f_;
  std::uint64_t round_ = 1;
  std::uint64_t last_voted_round_ = 0;
  std::uint64_t last_proposed_round_ = 0;
  std::uint64_t locked_round_ = 0;
  Digest locked_block_;
  QuorumCert high_qc_;  // genesis initially
  std::map<Digest, BlockInfo> blocks_;
  std::map<std::pair<std::uint64_t, Digest>, std::map<NodeId, Signature>> votes_;
  std::deque<ProposalPtr> pending_;
  std::set<Digest> committed_digests_;
  std::vector<CommittedEntry> log_;
  std::uint64_t commit_seq_ = 0;
};

// --- synchronous echo variant (u = 2f+1) --------------------------------------

struct EchoMsg final : public net::Payload {
  enum class Type : std::uint8_t { Propose, Echo, Pending, Accept };
  Type type = Type::Propose;
  NodeId sender = kNoNode;
  std::uint64_t iteration = 0;
  Digest proposal_digest;
  ProposalPtr proposal;   // Propose carries the body
  Digest conflicting;     // Pending: the second digest seen
  Signature sig;

  Digest signed_digest() const;
  const char* type_name() const override;
  std::size_t wire_size() const override;
};

struct SyncEchoConfig {
  std::vector<NodeId> committee;
  NodeId self = kNoNode;
  const Keyring* keys = nullptr;
  ProposalValidator validate;  // empty = accept all
};

/// Four-round synchronous consensus: propose, echo, pending, accept.
/// Tolerates f of u = 2f+1; accepts on f+1 matching echoes with no
/// equivocation evidence; an equivocating leader is replaced.
class SyncEchoReplica {
 public:
  explicit SyncEchoReplica(SyncEchoConfig cfg);

  Actions submit(ProposalPtr proposal, Tick now);
  /// Called at each synchronous round boundary, before handling that
  /// round's messages.
  Actions on_round(std::uint64_t net_round, Tick now);
  Actions handle(const EchoMsg& msg, Tick now);

  NodeId current_leader() const {
    return cfg_.committee[leader_cursor_ % cfg_.committee.size()];
  }
  const std::vector<CommittedEntry>& log() const { return log_; }

 private:
  enum class Phase : std::uint8_t { Idle, AwaitEcho, AwaitAccept };

  EchoMsg make(EchoMsg::Type type) const;
  bool authentic(const EchoMsg& m) const;

  SyncEchoConfig cfg_;
  std::uint32_t f_;
  std::uint64_t iteration_ = 0;
  std::uint32_t leader_cursor_ = 0;
  Phase phase_ = Phase::Idle;
  Digest echoed_digest_;
  ProposalPtr echoed_proposal_;
  bool have_echoed_ = false;
  bool conflict_seen_ = false;
  std::map<Digest, std::map<NodeId, Signature>> echo_sigs_;
  std::deque<ProposalPtr> pending_;
  std::vector<CommittedEntry> log_;
  std::uint64_t commit_seq_ = 0;
};

// --- weak-consistency PoW shard chains ----------------------------------------

struct PowShardConfig {
  double p = 0.0;                 // per-miner per-round success probability
  std::size_t truncate_depth = 6;  // stable prefix = chain minus last k
  bool adversary_selfish = false;
};

/// Fork-aware longest-chain state for one shard.  Honest miners extend the
/// public tip; the optional adversary runs the withhold-and-release
/// schedule.  Ties resolve first-seen and heal on the next extension.
class PowShard {
 public:
  PowShard(ShardId shard, PowShardConfig cfg);

  /// One mining round; returns newly appended public blocks (after fork
  /// resolution), already linked into the public chain.
  std::vector<ledger::Block> step(const std::vector<NodeId>& honest_miners,
                                  const std::vector<NodeId>& adversary_miners,
                                  Rng& rng, Epoch epoch,
                                  std::vector<ledger::Transaction> payload,
                                  std::vector<ledger::RelayRecord> relays);

  const ledger::Chain& chain() const { return public_chain_; }
  std::size_t stable_size() const { return public_chain_.stable_size(); }
  std::size_t max_reorg_depth() const { return max_reorg_depth_; }
  std::uint64_t orphaned_honest() const { return orphaned_honest_; }
  std::uint64_t rounds() const { return rounds_; }
  std::uint64_t honest_blocks() const { return honest_blocks_; }
  std::uint64_t adversary_blocks() const { return adversary_blocks_; }

  /// Injects an adversarial fork that replaces the last `depth` public
  /// blocks when extended far enough; used by rollback scenarios.
  void force_reorg(std::size_t depth, Epoch epoch);

 private:
  void append_public(ledger::Block b, bool adversarial);
  void release_private(std::size_t orphaned);

  ShardId shard_;
  PowShardConfig cfg_;
  ledger::Chain public_chain_;
  std::deque<ledger::Block> private_branch_;  // selfish adversary, unpublished
  std::size_t fork_height_ = 1;               // public size at fork start
  bool tie_ = false;
  ledger::Block tie_block_;
  std::uint64_t rounds_ = 0;
  std::uint64_t honest_blocks_ = 0;
  std::uint64_t adversary_blocks_ = 0;
  std::uint64_t orphaned_honest_ = 0;
  std::size_t max_reorg_depth_ = 0;
};

}  // namespace shardsim::consensus

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

#include <set>

#include "shardsim/consensus.hpp"
#include "shardsim/ledger.hpp"

namespace shardsim::xshard {

enum class CoordinatorMode : std::uint8_t { Client, InputShards, OutputShard };

const char* to_string(CoordinatorMode m);

/// Which shard manages an outpoint / output: the home of its owner
/// address.
ShardId home_of_output(const ledger::TxOutput& out, std::uint32_t m);

struct DispatchPlan {
  std::set<ShardId> input_shards;
  std::set<ShardId> output_shards;
  bool intra_shard = false;  // single shard handles everything
  CoordinatorMode coordinator = CoordinatorMode::Client;

  std::set<ShardId> involved() const;
};

/// Input shards come from the owners of the spent outputs (resolved via
/// lookup), output shards from the new owners.  An all-same-shard
/// transaction short-circuits to one intra-shard commit.
DispatchPlan route_transaction(
    const ledger::Transaction& tx,
    const std::function<const ledger::TxOutput*(const ledger::OutPoint&)>& resolve,
    std::uint32_t m, CoordinatorMode mode);

// --- availability certificates ------------------------------------------------

/// Quorum-signed verdict for one transaction input, bound to the
/// transaction id (replay defense).  The committee first commits an
/// evaluation entry through its Isc; each honest member then derives the
/// verdict from its (identical) post-commit state and signs this
/// attestation.  2f+1 matching signatures form the certificate, so a
/// verdict that honest members did not compute can never assemble.
struct AvailabilityCertificate {
  Digest tx_id;
  ledger::OutPoint outpoint;
  bool accept = false;
  ledger::VerdictKind reason = ledger::VerdictKind::Valid;  // reject cause
  std::uint64_t value = 0;  // attested outpoint value (Accept only)
  Epoch epoch = 0;
  ShardId shard = 0;
  std::vector<Signature> attestations;

  Digest attestation_digest() const;
  bool verify(const Keyring& keys, const std::vector<NodeId>& roster,
              std::uint32_t quorum) const;
};

// --- proposal contents ----------------------------------------------------------

/// Batch of intra-shard transactions.
struct TxBatchProposal final : public consensus::ProposalContent {
  ShardId shard = 0;
  std::vector<ledger::Transaction> txs;

  Digest digest() const override;
  std::size_t wire_size() const override;
  const char* type_name() const override { return "tx-batch"; }
};

/// Prepare-phase entry: committing it orders the verdict evaluation; the
/// input shard locks the outpoint on an accepting evaluation.
struct EvaluateInputProposal final : public consensus::ProposalContent {
  Digest tx_id;
  ledger::OutPoint outpoint;
  Epoch epoch = 0;
  ShardId shard = 0;
  Tick lock_deadline = 0;

  Digest digest() const override;
  std::size_t wire_size() const override { return 96; }
  const char* type_name() const override { return "evaluate-input"; }
};

/// Commit-phase entry: carries the certificate set; commit requires an
/// accepting certificate per input with balanced values, abort at least
/// one rejection.  The digest covers certificate contents only, so
/// replicas holding different signature subsets converge on one entry.
struct DecideProposal final : public consensus::ProposalContent {
  Digest tx_id;
  ledger::Transaction tx;
  bool commit = false;
  std::vector<AvailabilityCertificate> certs;  // sorted by outpoint
  ShardId shard = 0;

  Digest digest() const override;
  std::size_t wire_size() const override;
  const char* type_name() const override { return "decide"; }
};

/// Unilateral unlock once the lock deadline passed without a decision.
struct ExpiryAbortProposal final : public consensus::ProposalContent {
  Digest tx_id;
  ShardId shard = 0;
  Tick deadline = 0;

  Digest digest() const override;
  std::size_t wire_size() const override { return 56; }
  const char* type_name() const override { return "expiry-abort"; }
};

/// New-member list committed by a reference committee.
struct NewNodesProposal final : public consensus::ProposalContent {
  Epoch epoch = 0;
  std::vector<NodeId> nodes;

  Digest digest() const override;
  std::size_t wire_size() const override { return 16 + 4 * nodes.size(); }
  const char* type_name() const override { return "new-nodes"; }
};

// --- cross-shard record ----------------------------------------------------------

enum class TxPhase : std::uint8_t { Pending, Locked, Committed, Aborted };

const char* to_string(TxPhase p);

struct CrossTxRecord {
  Digest tx_id;
  ledger::Transaction tx;
  TxPhase phase = TxPhase::Pending;
  CoordinatorMode coordinator = CoordinatorMode::Client;
  Tick deadline = 0;              // lock expiry
  Tick submitted_at = 0;
  Tick resolved_at = -1;
  std::vector<ledger::OutPoint> locked;
  bool cross_shard = false;
};

// --- transaction split ------------------------------------------------------------

struct SplitResult {
  bool supported = false;
  std::vector<ledger::Transaction> sub_txs;   // one per input, then the join
  std::vector<Digest> intermediate_keys;      // client-held key material
  bool unchanged = false;                     // degenerate single-shard case
};

/// RapidChain-style decomposition of a multi-input single-output
/// transaction into single-input transfers into the output shard followed
/// by a joining transfer.  Multi-output transactions are unsupported.
SplitResult split_transaction(
    const ledger::Transaction& tx,
    const std::function<const ledger::TxOutput*(const ledger::OutPoint&)>& resolve,
    std::uint32_t m, const Digest& key_seed);

/// Mints an address homed in `target`; deterministic in (seed, counter).
Digest mint_address_in_shard(const Digest& seed, ShardId target, std::uint32_t m);

// --- relay transactions -------------------------------------------------------------

/// Scans an origin chain for cross-shard credits whose block gained a
/// lambda-deep burial; emits one RelayRecord per qualifying output and
/// remembers emissions to stay idempotent.
class RelayScanner {
 public:
  RelayScanner(ShardId origin, std::uint32_t lambda, std::uint32_t m);

  std::vector<ledger::RelayRecord> scan(const ledger::Chain& origin_chain);

  /// True iff the chain still carries the record's source transaction at
  /// the recorded height with a lambda burial.
  static bool relay_valid(const ledger::Chain& origin_chain,
                          const ledger::RelayRecord& record);

 private:
  ShardId origin_;
  std::uint32_t lambda_;
  std::uint32_t m_;
  std::set<std::pair<Digest, std::uint32_t>> emitted_;
};

/// Output-side bookkeeping: a credit becomes spendable only after the
/// block carrying the relay is itself buried lambda deep.
struct RelayCredit {
  ledger::RelayRecord record;
  std::uint64_t included_at_height = 0;
  bool spendable = false;
};

class RelayCreditTracker {
 public:
  explicit RelayCreditTracker(std::uint32_t lambda) : lambda_(lambda) {}

  /// Notes inclusions from the output chain and refreshes spendability.
  void observe(const ledger::Chain& output_chain);
  const std::vector<RelayCredit>& credits() const { return credits_; }
  std::uint64_t spendable_total() const;

 private:
  std::uint32_t lambda_;
  std::set<std::pair<Digest, std::uint32_t>> seen_;
  std::vector<RelayCredit> credits_;
};

}  // namespace shardsim::xshard

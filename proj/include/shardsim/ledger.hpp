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

#include <map>
#include <optional>
#include <vector>

#include "shardsim/common.hpp"

namespace shardsim::ledger {

/// Reference to one output of a prior transaction.
struct OutPoint {
  Digest tx_id;
  std::uint32_t index = 0;

  auto operator<=>(const OutPoint&) const = default;
};

struct TxOutput {
  Digest owner;          // public-key address of the recipient
  std::uint64_t value = 0;  // coin units, 64-bit non-negative

  bool operator==(const TxOutput&) const = default;
};

/// UTXO-model value transfer.  tx_id is the digest of the canonical
/// serialization of (inputs, outputs); signatures cover that id, one per
/// input.  Layout is documented byte-exactly in docs/FORMATS.md.
struct Transaction {
  std::vector<OutPoint> inputs;
  std::vector<TxOutput> outputs;
  std::vector<Signature> signatures;

  std::vector<std::uint8_t> canonical_bytes() const;
  Digest id() const;
  std::uint64_t output_total() const;
  bool well_formed() const { return !inputs.empty() && !outputs.empty(); }
};

struct BlockHeader {
  Digest prev_hash;
  Digest payload_root;
  ShardId shard = 0;
  Epoch epoch = 0;
  std::uint64_t height = 0;
  NodeId producer = kNoNode;

  Digest id() const;
};

/// Credit carried from an origin shard into an output shard once the
/// source block is buried deep enough on the origin chain.
struct RelayRecord {
  ShardId origin_shard = 0;
  std::uint64_t origin_height = 0;
  Digest source_tx;
  Digest credit_owner;
  std::uint64_t value = 0;
  std::uint32_t required_depth = 0;

  bool operator==(const RelayRecord&) const = default;
};

struct Block {
  BlockHeader header;
  std::vector<Transaction> txs;
  std::vector<RelayRecord> relays;

  Digest id() const { return header.id(); }
  static Digest payload_root_of(const std::vector<Transaction>& txs,
                                const std::vector<RelayRecord>& relays);
};

/// Hash-linked block list with a configurable stable-prefix truncation
/// depth (weak-consistency chains only; committee chains use depth 0).
class Chain {
 public:
  explicit Chain(std::size_t truncate_depth = 0) : truncate_depth_(truncate_depth) {}

  /// Appends after checking the hash link and height arithmetic.
  void append(Block block);
  std::size_t size() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }
  const Block& at(std::size_t i) const { return blocks_.at(i); }
  const Block& tip() const { return blocks_.back(); }
  Digest tip_hash() const;

  std::size_t truncate_depth() const { return truncate_depth_; }
  /// Chain minus the last k blocks.
  std::size_t stable_size() const {
    return blocks_.size() > truncate_depth_ ? blocks_.size() - truncate_depth_ : 0;
  }

  /// Replaces the suffix from `from_height` on (longest-chain reorg).
  void truncate_to(std::size_t new_size);

  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  std::size_t truncate_depth_;
  std::vector<Block> blocks_;
};

struct Lock {
  Digest holder_tx;
  Tick expires_at = 0;
};

enum class VerdictKind : std::uint8_t {
  Valid,
  InvalidMissingInput,
  InvalidLocked,
  InvalidValueMismatch,
};

struct Verdict {
  VerdictKind kind = VerdictKind::Valid;
  OutPoint offending;  // set for the two per-input failures

  bool valid() const { return kind == VerdictKind::Valid; }
};

const char* to_string(VerdictKind k);

/// Association from OutPoint to TxOutput plus the 2PC lock table.
/// Locked outpoints are always present in the set.
class UtxoSet {
 public:
  bool contains(const OutPoint& op) const { return entries_.count(op) != 0; }
  const TxOutput* find(const OutPoint& op) const;
  void add(const OutPoint& op, const TxOutput& out);
  void remove(const OutPoint& op);
  std::size_t size() const { return entries_.size(); }
  std::uint64_t total_value() const;

  void lock(const OutPoint& op, const Digest& holder_tx, Tick expires_at);
  void unlock(const OutPoint& op);
  const Lock* lock_of(const OutPoint& op) const;
  /// Releases every lock with expires_at < now; returns the released points.
  std::vector<OutPoint> release_expired(Tick now);
  std::size_t locked_count() const { return locks_.size(); }
  const std::map<OutPoint, Lock>& locks() const { return locks_; }

  const std::map<OutPoint, TxOutput>& entries() const { return entries_; }

 private:
  std::map<OutPoint, TxOutput> entries_;
  std::map<OutPoint, Lock> locks_;
};

/// Valid iff every input exists, is unlocked (or locked by this very tx),
/// and input and output value totals balance.
Verdict validate_transaction(const Transaction& tx, const UtxoSet& utxo);

/// Removes exactly the inputs and adds exactly the outputs.  Caller must
/// have validated first; a stale verdict trips an invariant breach.
void apply_transaction(const Transaction& tx, UtxoSet& utxo);

/// Shard assignment from the low bits of an id: the integer formed by the
/// low ceil(log2 m) bits, reduced mod m.  Byte 0 of the digest is the least
/// significant byte.  m must be >= 1.
ShardId home_shard(const Digest& id, std::uint32_t m);

}  // namespace shardsim::ledger

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

#include "shardsim/ledger.hpp"

#include <bit>

namespace shardsim::ledger {

std::vector<std::uint8_t> Transaction::canonical_bytes() const {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(inputs.size()));
  for (const auto& in : inputs) {
    w.digest(in.tx_id);
    w.u32(in.index);
  }
  w.u32(static_cast<std::uint32_t>(outputs.size()));
  for (const auto& out : outputs) {
    w.digest(out.owner);
    w.u64(out.value);
  }
  return w.data();
}

Digest Transaction::id() const {
  auto bytes = canonical_bytes();
  return sha256(bytes.data(), bytes.size());
}

std::uint64_t Transaction::output_total() const {
  std::uint64_t sum = 0;
  for (const auto& out : outputs) sum += out.value;
  return sum;
}

Digest BlockHeader::id() const {
  ByteWriter w;
  w.digest(prev_hash);
  w.digest(payload_root);
  w.u32(shard);
  w.u32(epoch);
  w.u64(height);
  w.u32(producer);
  return w.sha256d();
}

Digest Block::payload_root_of(const std::vector<Transaction>& txs,
                              const std::vector<RelayRecord>& relays) {
  Sha256 h;
  h.update_u32(static_cast<std::uint32_t>(txs.size()));
  for (const auto& tx : txs) h.update(tx.id());
  h.update_u32(static_cast<std::uint32_t>(relays.size()));
  for (const auto& r : relays) {
    h.update_u32(r.origin_shard);
    h.update_u64(r.origin_height);
    h.update(r.source_tx);
    h.update(r.credit_owner);
    h.update_u64(r.value);
    h.update_u32(r.required_depth);
  }
  return h.finish();
}

void Chain::append(Block block) {
  if (blocks_.empty()) {
    if (block.header.height != 0)
      throw std::invalid_argument("genesis block must have height 0");
  } else {
    if (block.header.prev_hash != tip_hash())
      throw std::invalid_argument("block does not link to tip");
    if (block.header.height != blocks_.back().header.height + 1)
      throw std::invalid_argument("block height must be parent height + 1");
  }
  blocks_.push_back(std::move(block));
}

Digest Chain::tip_hash() const {
  if (blocks_.empty()) return Digest{};
  return blocks_.back().id();
}

void Chain::truncate_to(std::size_t new_size) {
  if (new_size > blocks_.size()) throw std::invalid_argument("cannot extend via truncate");
  blocks_.resize(new_size);
}

const char* to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::Valid: return "valid";
    case VerdictKind::InvalidMissingInput: return "missing-input";
    case VerdictKind::InvalidLocked: return "locked";
    case VerdictKind::InvalidValueMismatch: return "value-mismatch";
  }
  return "?";
}

const TxOutput* UtxoSet::find(const OutPoint& op) const {
  auto it = entries_.find(op);
  return it == entries_.end() ? nullptr : &it->second;
}

void UtxoSet::add(const OutPoint& op, const TxOutput& out) {
  if (!entries_.emplace(op, out).second)
    throw std::invalid_argument("outpoint already present");
}

void UtxoSet::remove(const OutPoint& op) {
  locks_.erase(op);
  if (entries_.erase(op) == 0)
    throw std::invalid_argument("removing absent outpoint");
}

std::uint64_t UtxoSet::total_value() const {
  std::uint64_t sum = 0;
  for (const auto& [op, out] : entries_) sum += out.value;
  return sum;
}

void UtxoSet::lock(const OutPoint& op, const Digest& holder_tx, Tick expires_at) {
  if (!contains(op)) throw std::invalid_argument("locking absent outpoint");
  locks_[op] = Lock{holder_tx, expires_at};
}

void UtxoSet::unlock(const OutPoint& op) { locks_.erase(op); }

const Lock* UtxoSet::lock_of(const OutPoint& op) const {
  auto it = locks_.find(op);
  return it == locks_.end() ? nullptr : &it->second;
}

std::vector<OutPoint> UtxoSet::release_expired(Tick now) {
  std::vector<OutPoint> released;
  for (auto it = locks_.begin(); it != locks_.end();) {
    if (it->second.expires_at < now) {
      released.push_back(it->first);
      it = locks_.erase(it);
    } else {
      ++it;
    }
  }
  return released;
}

Verdict validate_transaction(const Transaction& tx, const UtxoSet& utxo) {
  const Digest tx_id = tx.id();
  std::uint64_t in_total = 0;
  for (const auto& in : tx.inputs) {
    const TxOutput* out = utxo.find(in);
    if (out == nullptr) return Verdict{VerdictKind::InvalidMissingInput, in};
    if (const Lock* lk = utxo.lock_of(in); lk != nullptr && lk->holder_tx != tx_id)
      return Verdict{VerdictKind::InvalidLocked, in};
    in_total += out->value;
  }
  if (in_total != tx.output_total())
    return Verdict{VerdictKind::InvalidValueMismatch, {}};
  return Verdict{};
}

void apply_transaction(const Transaction& tx, UtxoSet& utxo) {
  Verdict v = validate_transaction(tx, utxo);
  if (!v.valid())
    throw InvariantBreach(std::string("applying invalid transaction: ") +
                              to_string(v.kind),
                          0);
  for (const auto& in : tx.inputs) utxo.remove(in);
  const Digest tx_id = tx.id();
  for (std::uint32_t i = 0; i < tx.outputs.size(); ++i)
    utxo.add(OutPoint{tx_id, i}, tx.outputs[i]);
}

ShardId home_shard(const Digest& id, std::uint32_t m) {
  if (m == 0) throw std::invalid_argument("shard count must be >= 1");
  if (m == 1) return 0;
  const unsigned bits = std::bit_width(m - 1);  // ceil(log2 m)
  const std::uint64_t mask = (bits >= 64) ? ~0ull : ((1ull << bits) - 1);
  return static_cast<ShardId>((id.low64() & mask) % m);
}

}  // namespace shardsim::ledger

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

#include "shardsim/cross_shard.hpp"

namespace shardsim::xshard {

const char* to_string(CoordinatorMode m) {
  switch (m) {
    case CoordinatorMode::Client: return "client";
    case CoordinatorMode::InputShards: return "input-shards";
    case CoordinatorMode::OutputShard: return "output-shard";
  }
  return "?";
}

const char* to_string(TxPhase p) {
  switch (p) {
    case TxPhase::Pending: return "pending";
    case TxPhase::Locked: return "locked";
    case TxPhase::Committed: return "committed";
    case TxPhase::Aborted: return "aborted";
  }
  return "?";
}

ShardId home_of_output(const ledger::TxOutput& out, std::uint32_t m) {
  return ledger::home_shard(out.owner, m);
}

std::set<ShardId> DispatchPlan::involved() const {
  std::set<ShardId> all = input_shards;
  all.insert(output_shards.begin(), output_shards.end());
  return all;
}

DispatchPlan route_transaction(
    const ledger::Transaction& tx,
    const std::function<const ledger::TxOutput*(const ledger::OutPoint&)>& resolve,
    std::uint32_t m, CoordinatorMode mode) {
  if (m == 0) throw std::invalid_argument("shard count must be >= 1");
  DispatchPlan plan;
  plan.coordinator = mode;
  for (const auto& in : tx.inputs) {
    const ledger::TxOutput* prev = resolve(in);
    if (prev == nullptr) throw std::invalid_argument("unknown shard for input");
    plan.input_shards.insert(home_of_output(*prev, m));
  }
  for (const auto& out : tx.outputs)
    plan.output_shards.insert(home_of_output(out, m));
  plan.intra_shard = plan.involved().size() == 1;
  return plan;
}

Digest AvailabilityCertificate::attestation_digest() const {
  Sha256 h;
  h.update("availability-attestation");
  h.update(tx_id);
  h.update(outpoint.tx_id);
  h.update_u32(outpoint.index);
  h.update_u32(accept ? 1 : 0);
  h.update_u32(static_cast<std::uint32_t>(reason));
  h.update_u64(value);
  h.update_u32(epoch);
  h.update_u32(shard);
  return h.finish();
}

bool AvailabilityCertificate::verify(const Keyring& keys,
                                     const std::vector<NodeId>& roster,
                                     std::uint32_t quorum) const {
  const Digest d = attestation_digest();
  std::set<NodeId> signers;
  for (const auto& sig : attestations) {
    bool member = false;
    for (NodeId n : roster)
      if (n == sig.signer) member = true;
    if (!member) return false;
    if (!keys.verify(sig.signer, d, sig)) return false;
    signers.insert(sig.signer);
  }
  return signers.size() >= quorum;
}

Digest TxBatchProposal::digest() const {
  Sha256 h;
  h.update("tx-batch");
  h.update_u32(shard);
  h.update_u32(static_cast<std::uint32_t>(txs.size()));
  for (const auto& tx : txs) h.update(tx.id());
  return h.finish();
}

std::size_t TxBatchProposal::wire_size() const {
  std::size_t size = 16;
  for (const auto& tx : txs)
    size += 8 + 36 * tx.inputs.size() + 40 * tx.outputs.size() +
            36 * tx.signatures.size();
  return size;
}

Digest EvaluateInputProposal::digest() const {
  Sha256 h;
  h.update("evaluate-input");
  h.update(tx_id);
  h.update(outpoint.tx_id);
  h.update_u32(outpoint.index);
  h.update_u32(epoch);
  h.update_u32(shard);
  h.update_u64(static_cast<std::uint64_t>(lock_deadline));
  return h.finish();
}

Digest DecideProposal::digest() const {
  Sha256 h;
  h.update("decide");
  h.update(tx_id);
  h.update_u32(commit ? 1 : 0);
  h.update_u32(shard);
  h.update_u32(static_cast<std::uint32_t>(certs.size()));
  for (const auto& c : certs) h.update(c.attestation_digest());
  return h.finish();
}

std::size_t DecideProposal::wire_size() const {
  return 80 + certs.size() * 160 + 36 * tx.inputs.size() +
         40 * tx.outputs.size();
}

Digest ExpiryAbortProposal::digest() const {
  Sha256 h;
  h.update("expiry-abort");
  h.update(tx_id);
  h.update_u32(shard);
  h.update_u64(static_cast<std::uint64_t>(deadline));
  return h.finish();
}

Digest NewNodesProposal::digest() const {
  Sha256 h;
  h.update("new-nodes");
  h.update_u32(epoch);
  for (NodeId n : nodes) h.update_u32(n);
  return h.finish();
}

Digest mint_address_in_shard(const Digest& seed, ShardId target,
                             std::uint32_t m) {
  for (std::uint64_t counter = 0;; ++counter) {
    Sha256 h;
    h.update(seed);
    h.update_u64(counter);
    Digest candidate = h.finish();
    if (ledger::home_shard(candidate, m) == target) return candidate;
  }
}

SplitResult split_transaction(
    const ledger::Transaction& tx,
    const std::function<const ledger::TxOutput*(const ledger::OutPoint&)>& resolve,
    std::uint32_t m, const Digest& key_seed) {
  SplitResult result;
  if (tx.outputs.size() != 1) return result;  // unsupported: no known method
  result.supported = true;

  const ShardId out_shard = home_of_output(tx.outputs.front(), m);
  DispatchPlan plan =
      route_transaction(tx, resolve, m, CoordinatorMode::OutputShard);
  if (plan.intra_shard && tx.inputs.size() == 1) {
    result.unchanged = true;
    result.sub_txs.push_back(tx);
    return result;
  }

  // One single-input transfer per input into an address the output shard
  // manages, then the join.
  ledger::Transaction join;
  for (std::size_t i = 0; i < tx.inputs.size(); ++i) {
    const ledger::TxOutput* prev = resolve(tx.inputs[i]);
    if (prev == nullptr) throw std::invalid_argument("unresolvable input");
    Sha256 h;
    h.update(key_seed);
    h.update_u32(static_cast<std::uint32_t>(i));
    const Digest intermediate = mint_address_in_shard(h.finish(), out_shard, m);
    result.intermediate_keys.push_back(intermediate);

    ledger::Transaction sub;
    sub.inputs.push_back(tx.inputs[i]);
    sub.outputs.push_back(ledger::TxOutput{intermediate, prev->value});
    result.sub_txs.push_back(sub);
    join.inputs.push_back(ledger::OutPoint{sub.id(), 0});
  }
  join.outputs.push_back(tx.outputs.front());
  result.sub_txs.push_back(join);
  return result;
}

RelayScanner::RelayScanner(ShardId origin, std::uint32_t lambda, std::uint32_t m)
    : origin_(origin), lambda_(lambda), m_(m) {
  if (lambda == 0) throw std::invalid_argument("lambda must be >= 1");
}

std::vector<ledger::RelayRecord> RelayScanner::scan(
    const ledger::Chain& origin_chain) {
  std::vector<ledger::RelayRecord> out;
  if (origin_chain.size() <= lambda_) return out;
  const std::size_t deep_end = origin_chain.size() - lambda_;  // exclusive
  for (std::size_t h = 0; h < deep_end; ++h) {
    const auto& block = origin_chain.at(h);
    for (const auto& tx : block.txs) {
      const Digest tx_id = tx.id();
      for (std::uint32_t i = 0; i < tx.outputs.size(); ++i) {
        const auto& o = tx.outputs[i];
        if (home_of_output(o, m_) == origin_) continue;  // local credit
        if (!emitted_.insert({tx_id, i}).second) continue;
        ledger::RelayRecord r;
        r.origin_shard = origin_;
        r.origin_height = block.header.height;
        r.source_tx = tx_id;
        r.credit_owner = o.owner;
        r.value = o.value;
        r.required_depth = lambda_;
        out.push_back(r);
      }
    }
  }
  return out;
}

bool RelayScanner::relay_valid(const ledger::Chain& origin_chain,
                               const ledger::RelayRecord& record) {
  if (record.origin_height >= origin_chain.size()) return false;
  if (origin_chain.size() - 1 - record.origin_height <
      record.required_depth)
    return false;
  const auto& block = origin_chain.at(record.origin_height);
  for (const auto& tx : block.txs)
    if (tx.id() == record.source_tx) return true;
  return false;
}

void RelayCreditTracker::observe(const ledger::Chain& output_chain) {
  for (std::size_t h = 0; h < output_chain.size(); ++h) {
    const auto& block = output_chain.at(h);
    for (const auto& r : block.relays) {
      // Credits keyed by source output identity; index folded into value.
      auto key = std::make_pair(r.source_tx, static_cast<std::uint32_t>(
                                                 r.origin_height & 0xffffffff));
      if (seen_.insert(key).second) {
        RelayCredit credit;
        credit.record = r;
        credit.included_at_height = block.header.height;
        credits_.push_back(credit);
      }
    }
  }
  for (auto& c : credits_) {
    c.spendable = output_chain.size() >= 1 &&
                  output_chain.size() - 1 - c.included_at_height >= lambda_;
  }
}

std::uint64_t RelayCreditTracker::spendable_total() const {
  std::uint64_t total = 0;
  for (const auto& c : credits_)
    if (c.spendable) total += c.record.value;
  return total;
}

}  // namespace shardsim::xshard

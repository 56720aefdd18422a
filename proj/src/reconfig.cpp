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

#include "shardsim/reconfig.hpp"

#include <algorithm>
#include <cmath>

#include "shardsim/assignment.hpp"

namespace shardsim::reconfig {

std::vector<NodeId> ShardRoster::ids() const {
  std::vector<NodeId> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(m.node);
  return out;
}

std::uint64_t ShardRoster::total_activeness() const {
  std::uint64_t total = 0;
  for (const auto& m : members) total += m.activeness;
  return total;
}

bool ShardRosterList::contains(NodeId node) const {
  for (const auto& shard : shards)
    for (const auto& m : shard.members)
      if (m.node == node) return true;
  return false;
}

const char* to_string(RuleKind k) {
  switch (k) {
    case RuleKind::RandomReplacement: return "random-replacement";
    case RuleKind::Chronological: return "chronological";
    case RuleKind::BoundedCuckoo: return "bounded-cuckoo";
  }
  return "?";
}

std::uint32_t default_replacement_k(std::uint64_t n, std::uint32_t m) {
  if (m == 0 || n < m) throw std::invalid_argument("bad pool dimensions");
  const double k = std::log2(static_cast<double>(n) / m);
  return std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::llround(k)));
}

namespace {

ReconfigOutcome plan_random_replacement(const ShardRosterList& current,
                                        const std::vector<std::vector<NodeId>>& anodes,
                                        const Digest& xi, std::uint32_t k,
                                        Epoch next_epoch) {
  ReconfigOutcome out;
  out.next = current;
  out.next.epoch = next_epoch;
  out.departed.resize(current.shards.size());
  out.joined.resize(current.shards.size());

  for (std::size_t c = 0; c < current.shards.size(); ++c) {
    const auto& incoming = anodes[c];
    if (incoming.size() != k)
      throw std::invalid_argument("assignment group size must equal k");
    auto& roster = out.next.shards[c];
    const auto u = static_cast<std::uint32_t>(roster.members.size());
    if (k > u) throw std::invalid_argument("cannot replace more members than u");

    // Seed H(c || xi) with shard indices starting at 1; index 0 belongs to
    // the assignment permutation.
    HashStream stream(assign::group_seed(static_cast<std::uint32_t>(c) + 1, xi));
    auto perm = stream.permutation(u);
    std::vector<bool> leaves(u, false);
    for (std::uint32_t i = 0; i < k; ++i) leaves[perm[i]] = true;

    std::vector<Member> stay;
    for (std::uint32_t i = 0; i < u; ++i) {
      if (leaves[i])
        out.departed[c].push_back(roster.members[i].node);
      else
        stay.push_back(roster.members[i]);
    }
    for (NodeId n : incoming) {
      stay.push_back(Member{n, next_epoch, 0});
      out.joined[c].push_back(n);
    }
    roster.members = std::move(stay);
    roster.leader_index = 0;
  }
  return out;
}

ReconfigOutcome plan_chronological(const ShardRosterList& current,
                                   const std::vector<std::vector<NodeId>>& anodes,
                                   double fraction, Epoch next_epoch) {
  ReconfigOutcome out;
  out.next = current;
  out.next.epoch = next_epoch;
  out.departed.resize(current.shards.size());
  out.joined.resize(current.shards.size());

  for (std::size_t c = 0; c < current.shards.size(); ++c) {
    auto& roster = out.next.shards[c];
    const auto u = static_cast<std::uint32_t>(roster.members.size());
    const auto evict = static_cast<std::uint32_t>(
        std::ceil(fraction * static_cast<double>(u) - 1e-9));
    if (anodes[c].size() != evict)
      throw std::invalid_argument("intake must match the evicted fraction");

    // Oldest first; ties break on node id for determinism.
    std::vector<Member> sorted = roster.members;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Member& a, const Member& b) {
                       if (a.joined != b.joined) return a.joined < b.joined;
                       return a.node < b.node;
                     });
    std::set<NodeId> leaving;
    for (std::uint32_t i = 0; i < evict; ++i) {
      leaving.insert(sorted[i].node);
      out.departed[c].push_back(sorted[i].node);
    }
    std::vector<Member> stay;
    for (const auto& m : roster.members)
      if (leaving.count(m.node) == 0) stay.push_back(m);
    for (NodeId n : anodes[c]) {
      stay.push_back(Member{n, next_epoch, 0});
      out.joined[c].push_back(n);
    }
    roster.members = std::move(stay);
    roster.leader_index = 0;
  }
  return out;
}

ReconfigOutcome plan_bounded_cuckoo(const ShardRosterList& current,
                                    const std::vector<std::vector<NodeId>>& anodes,
                                    const Digest& xi, std::uint32_t evict_k,
                                    Epoch next_epoch) {
  ReconfigOutcome out;
  out.next = current;
  out.next.epoch = next_epoch;
  const std::size_t m = current.shards.size();
  out.departed.resize(m);
  out.joined.resize(m);
  if (m < 2) throw std::invalid_argument("cuckoo rule needs at least two shards");

  // Rank committees by activeness; top half forms the active set A.
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ta = current.shards[a].total_activeness();
    const auto tb = current.shards[b].total_activeness();
    if (ta != tb) return ta > tb;
    return a < b;
  });
  const std::size_t a_count = m / 2;
  std::vector<std::size_t> active(order.begin(), order.begin() + a_count);
  std::vector<std::size_t> inactive(order.begin() + a_count, order.end());

  // All new nodes go into A committees, randomly via xi.
  HashStream stream(assign::group_seed(0xA000, xi));
  std::vector<std::uint32_t> reference_u;
  for (const auto& s : current.shards)
    reference_u.push_back(static_cast<std::uint32_t>(s.members.size()));
  for (const auto& group : anodes) {
    for (NodeId n : group) {
      const std::size_t pick = active[stream.uniform(active.size())];
      out.next.shards[pick].members.push_back(Member{n, next_epoch, 0});
      out.joined[pick].push_back(n);
    }
  }

  // Evict evict_k random members from each A committee into random I
  // committees.
  for (std::size_t a : active) {
    auto& roster = out.next.shards[a];
    for (std::uint32_t e = 0; e < evict_k && !roster.members.empty(); ++e) {
      const std::size_t victim = stream.uniform(roster.members.size());
      Member moved = roster.members[victim];
      roster.members.erase(roster.members.begin() +
                           static_cast<std::ptrdiff_t>(victim));
      out.departed[a].push_back(moved.node);
      const std::size_t dest = inactive[stream.uniform(inactive.size())];
      out.next.shards[dest].members.push_back(moved);
      out.joined[dest].push_back(moved.node);
    }
  }

  // Cap inactive committees at their previous size by dropping the oldest
  // surplus members; unbounded growth is the known defect this guards.
  for (std::size_t i : inactive) {
    auto& roster = out.next.shards[i];
    const std::uint32_t cap = reference_u[i];
    while (roster.members.size() > cap) {
      auto oldest = roster.members.begin();
      for (auto it = roster.members.begin(); it != roster.members.end(); ++it) {
        if (it->joined < oldest->joined ||
            (it->joined == oldest->joined && it->node < oldest->node))
          oldest = it;
      }
      out.departed[i].push_back(oldest->node);
      roster.members.erase(oldest);
    }
  }
  for (auto& shard : out.next.shards) shard.leader_index = 0;
  return out;
}

}  // namespace

ReconfigOutcome plan_reconfiguration(const ShardRosterList& current,
                                     const std::vector<std::vector<NodeId>>& anodes,
                                     const Digest& xi, const ReconfigRule& rule,
                                     Epoch next_epoch) {
  if (anodes.size() != current.shards.size())
    throw std::invalid_argument("one assignment group per shard required");

  switch (rule.kind) {
    case RuleKind::RandomReplacement: {
      std::uint32_t k = rule.replace_k;
      if (k == 0) {
        std::uint64_t n = 0;
        for (const auto& s : current.shards) n += s.members.size();
        k = default_replacement_k(
            n, static_cast<std::uint32_t>(current.shards.size()));
      }
      return plan_random_replacement(current, anodes, xi, k, next_epoch);
    }
    case RuleKind::Chronological:
      if (rule.fraction <= 0.0 || rule.fraction > 1.0)
        throw std::invalid_argument("fraction must lie in (0, 1]");
      return plan_chronological(current, anodes, rule.fraction, next_epoch);
    case RuleKind::BoundedCuckoo:
      return plan_bounded_cuckoo(current, anodes, xi, rule.evict_k, next_epoch);
  }
  throw std::invalid_argument("unknown rule");
}

StateSnapshot StateSnapshot::build(ShardId shard, const ledger::UtxoSet& utxo,
                                   std::uint64_t chain_height,
                                   std::uint64_t committed_tx_count) {
  StateSnapshot snap;
  snap.shard = shard;
  snap.chain_height = chain_height;
  snap.committed_tx_count = committed_tx_count;
  ByteWriter w;
  w.u32(shard);
  w.u64(chain_height);
  w.u64(committed_tx_count);
  w.u32(static_cast<std::uint32_t>(utxo.size()));
  for (const auto& [op, out] : utxo.entries()) {
    w.digest(op.tx_id);
    w.u32(op.index);
    w.digest(out.owner);
    w.u64(out.value);
  }
  // Historical transaction data is represented by its volume.
  for (std::uint64_t i = 0; i < committed_tx_count; ++i) w.u64(i);
  snap.bytes = w.data();
  snap.root = sha256(snap.bytes.data(), snap.bytes.size());
  return snap;
}

TransferRecord bootstrap_member(NodeId member, ShardId shard,
                                const StateSnapshot& snapshot,
                                const Digest& committed_root,
                                std::uint32_t providers_available) {
  TransferRecord rec;
  rec.member = member;
  rec.shard = shard;
  const Digest actual = sha256(snapshot.bytes.data(), snapshot.bytes.size());
  rec.bytes = snapshot.bytes.size();
  if (actual == committed_root && snapshot.root == committed_root) {
    rec.verified = true;
    return rec;
  }
  // Tampered snapshot: re-request from the next member.  Transfers from a
  // correct provider always verify, so one retry suffices when any honest
  // provider remains.
  rec.retries = 1;
  if (providers_available > 1) {
    rec.bytes += snapshot.bytes.size();
    rec.verified = true;
  }
  return rec;
}

SafetyCheck corruption_safety_check(Tick tau, Tick t_epoch) {
  SafetyCheck c;
  c.margin = tau - 2 * t_epoch;
  c.ok = tau > 2 * t_epoch;
  return c;
}

}  // namespace shardsim::reconfig

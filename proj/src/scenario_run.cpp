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
#include <cmath>

#include "shardsim/assignment.hpp"
#include "shardsim/cross_shard.hpp"
#include "shardsim/scenario.hpp"

namespace shardsim::scenario {

namespace {

using ledger::OutPoint;
using ledger::Transaction;
using ledger::TxOutput;

struct WalletEntry {
  OutPoint op;
  std::uint64_t value;
  ShardId shard;
};

/// The workload generator's projected view of spendable outputs.
class Wallet {
 public:
  void add(const OutPoint& op, const TxOutput& out, std::uint32_t m) {
    entries_.push_back({op, out.value, ledger::home_shard(out.owner, m)});
  }

  std::optional<WalletEntry> take(Rng& rng, std::optional<ShardId> shard) {
    for (int attempt = 0; attempt < 64 && !entries_.empty(); ++attempt) {
      const std::size_t i = rng.uniform(entries_.size());
      if (shard && entries_[i].shard != *shard) continue;
      WalletEntry e = entries_[i];
      entries_[i] = entries_.back();
      entries_.pop_back();
      return e;
    }
    return std::nullopt;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<WalletEntry> entries_;
};

Digest fresh_owner(Rng& rng) {
  Sha256 h;
  h.update("owner");
  h.update_u64(rng.next_u64());
  return h.finish();
}

Digest owner_in(ShardId shard, std::uint32_t m, Rng& rng) {
  Sha256 h;
  h.update("owner-in");
  h.update_u64(rng.next_u64());
  return xshard::mint_address_in_shard(h.finish(), shard, m);
}

struct EpochStats {
  std::uint64_t committed = 0;
  std::uint64_t aborted = 0;
  std::uint64_t unresolved = 0;
  std::uint64_t cross = 0;
  std::uint64_t total = 0;
  std::vector<Tick> latencies;
};

double percentile(std::vector<Tick>& sorted, double q) {
  if (sorted.empty()) return 0;
  const auto idx = static_cast<std::size_t>(
      q * static_cast<double>(sorted.size() - 1) + 0.5);
  return static_cast<double>(sorted[std::min(idx, sorted.size() - 1)]);
}

cluster::IscKind to_cluster_isc(IscAlgorithm a) {
  switch (a) {
    case IscAlgorithm::Pbft: return cluster::IscKind::Pbft;
    case IscAlgorithm::Chained: return cluster::IscKind::Chained;
    case IscAlgorithm::SyncEcho: return cluster::IscKind::SyncEcho;
    case IscAlgorithm::Pow: break;
  }
  throw std::invalid_argument("no committee engine for eventual mode");
}

xshard::CoordinatorMode to_mode(CstpMode m) {
  switch (m) {
    case CstpMode::Client2pc: return xshard::CoordinatorMode::Client;
    case CstpMode::Shard2pc: return xshard::CoordinatorMode::InputShards;
    case CstpMode::Output2pc: return xshard::CoordinatorMode::OutputShard;
    case CstpMode::Split: return xshard::CoordinatorMode::InputShards;
    case CstpMode::Relay: break;
  }
  throw std::invalid_argument("relay mode has no coordinator");
}

/// Composition state threaded through the epochs.
struct Runner {
  const ScenarioConfig& cfg;
  MetricsReport report;
  Rng master;
  adversary::CorruptionLedger corruption;
  reconfig::ShardRosterList rosters;
  std::vector<ledger::UtxoSet> carried;  // per shard, between epochs
  Wallet wallet;
  Tick clock = 0;
  Digest xi;
  incentives::AccountBook book;
  std::uint64_t bytes_total = 0;
  std::uint64_t committed_tx_count_total = 0;

  explicit Runner(const ScenarioConfig& c)
      : cfg(c),
        master(c.seed),
        corruption(
            [&] {
              adversary::AdversaryConfig ac;
              ac.rho = c.rho;
              ac.timing = c.corruption_timing;
              ac.tau = c.tau;
              ac.behaviors = c.behaviors;
              return ac;
            }(),
            c.total_nodes()) {
    report.seed = cfg.seed;
    report.epochs = cfg.epochs;
    report.config_digest = sha256(to_json(cfg)).hex().substr(0, 16);
    report.shards.resize(cfg.m);
    carried.resize(cfg.m);
    Sha256 h;
    h.update("genesis-xi");
    h.update_u64(cfg.seed);
    xi = h.finish();
  }

  void event(const std::string& text) {
    report.events.push_back("{\"tick\":" + std::to_string(clock) + ",\"what\":\"" +
                            text + "\"}");
  }

  std::set<NodeId> corrupted_now() const { return corruption.corrupted_set(clock); }

  // --- member-list confirmation (part one of the composition) ----------------

  selection::SelectionOutcome select(std::uint32_t quota, Epoch epoch,
                                     Keyring& keys, Rng& rng) {
    const auto n = cfg.total_nodes();
    selection::MinerPool pool;
    const auto corrupted = corrupted_now();
    for (NodeId i = 0; i < n; ++i) {
      keys.register_node(i);
      if (corrupted.count(i) != 0)
        pool.adversary.push_back(i);
      else
        pool.honest.push_back(i);
    }
    switch (cfg.ns_method) {
      case selection::SelectionMethod::PowUnderlyingChain: {
        selection::UnderlyingChainParams params;
        params.pow.p = cfg.ns_pow_p;
        params.quota = quota;
        params.selfish_mining =
            cfg.behaviors.count(adversary::Strategy::SelfishMine) != 0;
        const double speed =
            cfg.ns_pow_p * static_cast<double>(std::max<std::size_t>(
                               pool.honest.size() + pool.adversary.size(), 1));
        params.duration_rounds =
            static_cast<std::uint64_t>(std::ceil(quota / std::max(speed, 1e-6))) * 4 +
            64;
        auto out = selection::select_underlying_chain(pool, xi, params, keys, rng);
        clock += static_cast<Tick>(params.duration_rounds / 4);  // offline mining
        report.adversary_block_fraction = out.adversary_block_fraction;
        return out;
      }
      case selection::SelectionMethod::PowReferenceCommittee: {
        selection::ReferenceCommittee committee;
        if (!rosters.shards.empty()) {
          for (const auto& m : rosters.shards[0].members)
            committee.members.push_back(m.node);
        } else {
          for (NodeId i = 0; i < cfg.u; ++i) committee.members.push_back(i);
        }
        for (NodeId id : committee.members)
          if (corrupted.count(id) != 0) committee.corrupted.insert(id);
        selection::ReferenceCommitteeParams params;
        params.pow.p = cfg.ns_pow_p;
        params.quota = quota;
        params.k_threshold = cfg.k_threshold;
        params.delta = std::max<Tick>(cfg.message_model.delta, 1);
        params.adversary_head_start = cfg.message_model.delta;
        params.malicious_leader_censors =
            cfg.behaviors.count(adversary::Strategy::CensorNodes) != 0;
        auto out = selection::select_reference_committee(committee, pool, xi,
                                                         params, keys, rng);
        report.selection_view_changes += out.view_changes;
        clock += 32;  // offline mining window
        if (out.epoch_stalled) event("selection-stall epoch " + std::to_string(epoch));
        return out;
      }
      case selection::SelectionMethod::PosLottery: {
        std::vector<std::pair<NodeId, std::uint64_t>> stakes;
        for (NodeId i = 0; i < n; ++i) stakes.emplace_back(i, 100);
        return selection::select_pos_lottery(stakes, xi, quota, keys, epoch);
      }
      case selection::SelectionMethod::PermissionedRoster: {
        std::vector<selection::RosterEntry> roster;
        for (NodeId i = 0; i < quota; ++i)
          roster.push_back({i, keys.public_key(i)});
        return selection::select_permissioned(roster, epoch);
      }
    }
    throw std::invalid_argument("unknown selection method");
  }

  /// Runs the beacon over the configured committee; a failed beacon keeps
  /// the previous value hashed forward and flags the epoch.
  void refresh_randomness(Epoch epoch, Rng& rng) {
    std::vector<NodeId> members;
    if (!rosters.shards.empty())
      for (const auto& m : rosters.shards[0].members) members.push_back(m.node);
    if (members.empty())
      for (NodeId i = 0; i < cfg.u; ++i) members.push_back(i);

    const auto corrupted = corrupted_now();
    beacon::BeaconStrategy strategy = beacon::HonestStrategy{};
    if (cfg.behaviors.count(adversary::Strategy::Withhold) != 0) {
      if (cfg.er_variant == beacon::VariantKind::ThresholdShare) {
        beacon::WithholdShares w;
        for (NodeId id : members)
          if (corrupted.count(id) != 0) w.members.insert(id);
        if (!w.members.empty()) strategy = w;
      } else {
        beacon::WithholdReveal w;
        for (NodeId id : members)
          if (corrupted.count(id) != 0) w.members.insert(id);
        if (!w.members.empty()) strategy = w;
      }
    }
    const auto u = static_cast<std::uint32_t>(members.size());
    const std::uint32_t threshold =
        std::max<std::uint32_t>(1, u - u / 3 - u / 3);  // honest lower bound
    beacon::BeaconVariant variant =
        cfg.er_variant == beacon::VariantKind::CommitReveal
            ? beacon::BeaconVariant::make_commit_reveal()
            : beacon::BeaconVariant::make_threshold_share(threshold);
    auto out = beacon::run_beacon(members, epoch, variant, strategy, rng);
    const Tick beacon_ticks = 3 * std::max<Tick>(cfg.message_model.delta, 1);
    clock += beacon_ticks;
    report.reconfig_downtime += beacon_ticks;
    if (out.ok && beacon::verify_beacon(out.randomness.transcript)) {
      xi = out.randomness.xi;
    } else {
      Sha256 h;
      h.update("beacon-fallback");
      h.update(xi);
      h.update_u32(epoch);
      xi = h.finish();
      event("beacon-failed epoch " + std::to_string(epoch));
    }
  }

  void note_epoch_breaches(Epoch epoch) {
    const auto corrupted = corrupted_now();
    const auto threshold = static_cast<std::uint32_t>(
        std::ceil(static_cast<double>(cfg.u) * (1.0 - cfg.q0()) - 1e-9));
    for (std::size_t s = 0; s < rosters.shards.size(); ++s) {
      std::uint32_t bad = 0;
      for (const auto& m : rosters.shards[s].members)
        if (corrupted.count(m.node) != 0) ++bad;
      if (bad >= threshold) {
        ++report.epoch_failure_events;
        event("shard-breach epoch " + std::to_string(epoch) + " shard " +
              std::to_string(s));
      }
    }
  }

  void adaptive_corruption_step() {
    if (cfg.corruption_timing != adversary::CorruptionTiming::Adaptive) return;
    // Deterministic adaptive strategy: walk the published rosters and
    // target members until the budget is gone.
    for (const auto& shard : rosters.shards)
      for (const auto& m : shard.members)
        if (!corruption.is_targeted(m.node))
          (void)corruption.request_corruption(m.node, clock);
  }

  // --- transaction processing (part two of the composition) --------------------

  void rebuild_wallet() {
    wallet = Wallet{};
    for (ShardId s = 0; s < cfg.m; ++s)
      for (const auto& [op, out] : carried[s].entries())
        wallet.add(op, out, cfg.m);
  }

  void run_instant_epoch(Epoch epoch, EpochStats& stats) {
    rebuild_wallet();
    cluster::ClusterConfig cc;
    cc.isc = to_cluster_isc(cfg.isc);
    cc.mode = to_mode(cfg.cstp);
    cc.model = cfg.message_model;
    cc.seed = master.derive("epoch-" + std::to_string(epoch)).next_u64();
    cc.epoch = epoch;
    cc.lock_ttl = cfg.lock_ttl;
    cc.view_timeout = cfg.view_timeout;
    cc.round_timeout = cfg.round_timeout;
    cc.behaviors = cfg.behaviors;
    cc.worst_case_delays =
        cfg.behaviors.count(adversary::Strategy::DelayMax) != 0;
    const auto corrupted = corrupted_now();
    for (const auto& shard : rosters.shards) {
      std::vector<NodeId> roster;
      for (const auto& m : shard.members) {
        roster.push_back(m.node);
        if (corrupted.count(m.node) != 0) cc.byzantine.insert(m.node);
      }
      cc.committees.push_back(roster);
    }

    cluster::Cluster cl(std::move(cc));
    for (ShardId s = 0; s < cfg.m; ++s) cl.seed_shard_state(s, carried[s]);

    // Workload: Poisson arrivals per shard; submissions stop early enough
    // that every transaction resolves inside the epoch.
    Rng workload = master.derive("workload-" + std::to_string(epoch));
    const Tick guard = cfg.lock_ttl + 8 * cfg.view_timeout + 100;
    const Tick submit_end = cfg.t_epoch > guard ? cfg.t_epoch - guard : 1;
    const bool flood = cfg.behaviors.count(adversary::Strategy::FloodShard) != 0;

    for (Tick t = 1; t < submit_end; ++t) {
      for (ShardId s = 0; s < cfg.m; ++s) {
        std::uint32_t arrivals = workload.poisson(cfg.tx_rate_per_shard);
        if (flood && s == 0)
          arrivals += workload.poisson(cfg.tx_rate_per_shard * 4.0);
        for (std::uint32_t a = 0; a < arrivals; ++a) {
          const bool local = workload.bernoulli(cfg.locality_bias);
          Transaction tx;
          std::uint64_t in_value = 0;
          const std::uint32_t want_inputs = std::max(1u, cfg.tx_inputs);
          for (std::uint32_t i = 0; i < want_inputs; ++i) {
            auto entry = wallet.take(
                workload, local ? std::optional<ShardId>(s) : std::nullopt);
            if (!entry) break;
            tx.inputs.push_back(entry->op);
            in_value += entry->value;
          }
          if (tx.inputs.empty()) continue;
          const std::uint32_t outs = std::max(1u, cfg.tx_outputs);
          for (std::uint32_t o = 0; o < outs; ++o) {
            const std::uint64_t share =
                (o + 1 == outs) ? in_value - (in_value / outs) * (outs - 1)
                                : in_value / outs;
            const Digest owner = local ? owner_in(s, cfg.m, workload)
                                       : fresh_owner(workload);
            tx.outputs.push_back(TxOutput{owner, share});
          }
          cluster::ClientPlan plan;
          plan.tx = tx;
          plan.submit_at = t;
          cl.queue_client(plan);
        }
      }
    }

    cl.run_until(cfg.t_epoch);
    clock += cfg.t_epoch;

    // Collect outcomes and rebuild the wallet from the surviving state.
    for (const auto& [tx_id, o] : cl.outcomes()) {
      ++stats.total;
      if (o.cross_shard) ++stats.cross;
      switch (o.phase) {
        case xshard::TxPhase::Committed:
          ++stats.committed;
          stats.latencies.push_back(o.resolved_at - o.submitted_at);
          break;
        case xshard::TxPhase::Aborted:
          ++stats.aborted;
          break;
        default:
          ++stats.unresolved;
          break;
      }
    }
    for (ShardId s = 0; s < cfg.m; ++s) {
      const auto& state = cl.shard_state(s);
      report.shards[s].committed_txs += state.committed_txs;
      report.shards[s].committed_entries += state.committed_entries;
      committed_tx_count_total += state.committed_txs;
      carried[s] = state.utxo;
    }
    for (const auto& [node, bytes] : cl.network().bytes_sent())
      bytes_total += bytes;
    if (!cl.network().delivery_bound_respected())
      report.violations.push_back("delivery bound breached");

    auto violations = cl.check_invariants(/*require_terminal=*/true);
    for (auto& v : violations) report.violations.push_back(std::move(v));

    // Incentive settlement: committee rewards per committed entry, slashes
    // from collected equivocation evidence.
    Keyring slash_keys(cc.seed ^ 0x517ull);
    for (ShardId s = 0; s < cfg.m; ++s) {
      std::vector<NodeId> committee;
      for (const auto& m : rosters.shards[s].members) {
        committee.push_back(m.node);
        book.open(m.node, cfg.mm_policy.deposit);
      }
      const NodeId leader = committee.empty() ? kNoNode : committee.front();
      const auto& state = cl.shard_state(s);
      for (std::uint64_t i = 0; i < state.committed_entries; ++i)
        book = incentives::settle_block(std::move(book), kNoNode, committee,
                                        leader, cfg.mm_policy);
      for (auto& member : rosters.shards[s].members)
        member.activeness += state.committed_entries;
    }
  }

  void run_eventual_epoch(Epoch epoch, EpochStats& stats) {
    rebuild_wallet();
    Rng rng = master.derive("pow-epoch-" + std::to_string(epoch));
    Rng workload = master.derive("workload-" + std::to_string(epoch));

    consensus::PowShardConfig pc;
    pc.p = cfg.shard_pow_p;
    pc.truncate_depth = cfg.truncate_depth;
    pc.adversary_selfish =
        cfg.behaviors.count(adversary::Strategy::SelfishMine) != 0;

    const auto corrupted = corrupted_now();
    std::vector<consensus::PowShard> shards;
    std::vector<std::vector<NodeId>> honest(cfg.m), adversarial(cfg.m);
    for (ShardId s = 0; s < cfg.m; ++s) {
      shards.emplace_back(s, pc);
      for (const auto& m : rosters.shards[s].members) {
        if (corrupted.count(m.node) != 0)
          adversarial[s].push_back(m.node);
        else
          honest[s].push_back(m.node);
      }
    }
    std::vector<xshard::RelayScanner> scanners;
    std::vector<xshard::RelayCreditTracker> credits;
    for (ShardId s = 0; s < cfg.m; ++s) {
      scanners.emplace_back(s, cfg.lambda, cfg.m);
      credits.emplace_back(cfg.lambda);
    }

    struct PendingTx {
      Transaction tx;
      Tick submitted;
      ShardId shard;
      bool cross;
    };
    std::map<Digest, PendingTx> submitted;
    std::map<Digest, Tick> stable_at;
    std::vector<std::vector<Transaction>> mempool(cfg.m);
    std::vector<std::vector<ledger::RelayRecord>> relay_queue(cfg.m);

    const Tick rounds = cfg.t_epoch;
    for (Tick t = 0; t < rounds; ++t) {
      for (ShardId s = 0; s < cfg.m; ++s) {
        // Single-input single-output transfers, the relay-friendly shape.
        const std::uint32_t arrivals = workload.poisson(cfg.tx_rate_per_shard);
        for (std::uint32_t a = 0; a < arrivals; ++a) {
          auto entry = wallet.take(workload, s);
          if (!entry) break;
          Transaction tx;
          tx.inputs.push_back(entry->op);
          const bool local = workload.bernoulli(cfg.locality_bias);
          const Digest owner =
              local ? owner_in(s, cfg.m, workload) : fresh_owner(workload);
          tx.outputs.push_back(TxOutput{owner, entry->value});
          mempool[s].push_back(tx);
          submitted[tx.id()] = {
              tx, t, s, ledger::home_shard(owner, cfg.m) != s};
          ++stats.total;
          if (ledger::home_shard(owner, cfg.m) != s) ++stats.cross;
        }
        auto blocks = shards[s].step(honest[s], adversarial[s], rng, epoch,
                                     mempool[s], relay_queue[s]);
        for (const auto& b : blocks) {
          if (!b.txs.empty()) mempool[s].clear();
          if (!b.relays.empty()) relay_queue[s].clear();
        }
        // Stability scan: transactions buried past the truncation depth.
        const auto& chain = shards[s].chain();
        const std::size_t stable = chain.size() > cfg.truncate_depth
                                       ? chain.size() - cfg.truncate_depth
                                       : 0;
        for (std::size_t h = 0; h < stable; ++h)
          for (const auto& tx : chain.at(h).txs) {
            const Digest id = tx.id();
            if (stable_at.emplace(id, t).second) {
              auto it = submitted.find(id);
              if (it != submitted.end()) {
                ++stats.committed;
                stats.latencies.push_back(t - it->second.submitted);
              }
            }
          }
        // Cross-shard relays move between chains once buried.
        for (auto& record : scanners[s].scan(chain)) {
          const ShardId dest = ledger::home_shard(record.credit_owner, cfg.m);
          if (dest != s) relay_queue[dest].push_back(record);
        }
        credits[s].observe(chain);
      }
    }
    clock += rounds;

    std::uint64_t honest_blocks = 0, adversary_blocks = 0;
    for (ShardId s = 0; s < cfg.m; ++s) {
      honest_blocks += shards[s].honest_blocks();
      adversary_blocks += shards[s].adversary_blocks();
      report.shards[s].blocks += shards[s].chain().size() - 1;
      report.shards[s].committed_txs += stats.committed / std::max(1u, cfg.m);
      if (shards[s].max_reorg_depth() > cfg.truncate_depth)
        report.violations.push_back("stable prefix rewritten in shard " +
                                    std::to_string(s));
      // Producer rewards for the stable chain.
      for (std::size_t h = 1; h < shards[s].chain().size(); ++h) {
        const NodeId producer = shards[s].chain().at(h).header.producer;
        if (producer != kNoNode)
          book = incentives::settle_block(std::move(book), producer, {}, kNoNode,
                                          cfg.mm_policy);
      }
    }
    const double total_blocks =
        static_cast<double>(honest_blocks + adversary_blocks);
    if (total_blocks > 0) {
      report.chain_quality = static_cast<double>(honest_blocks) / total_blocks;
      report.adversary_block_fraction =
          static_cast<double>(adversary_blocks) / total_blocks;
    }
    stats.unresolved = stats.total - stats.committed;
  }

  // --- epoch transition ---------------------------------------------------------

  void transition(Epoch next_epoch, Keyring& keys, Rng& rng) {
    refresh_randomness(next_epoch, rng);

    std::uint32_t intake = cfg.k;
    if (cfg.sr_rule.kind == reconfig::RuleKind::Chronological)
      intake = static_cast<std::uint32_t>(
          std::ceil(cfg.sr_rule.fraction * static_cast<double>(cfg.u) - 1e-9));
    if (cfg.sr_rule.kind == reconfig::RuleKind::RandomReplacement &&
        cfg.sr_rule.replace_k != 0)
      intake = cfg.sr_rule.replace_k;

    const std::uint32_t quota = intake * cfg.m;
    auto selected = select(quota, next_epoch, keys, rng);
    if (!selected.quota_met || selected.snodes.size() < quota) {
      event("selection-quota-not-met epoch " + std::to_string(next_epoch));
      return;  // roster stays; epoch stall flagged
    }
    std::vector<NodeId> snodes;
    std::set<NodeId> current;
    for (const auto& shard : rosters.shards)
      for (const auto& m : shard.members) current.insert(m.node);
    for (const auto& seat : selected.snodes) {
      if (snodes.size() == quota) break;
      if (current.count(seat.node) != 0) continue;  // already seated
      if (std::find(snodes.begin(), snodes.end(), seat.node) != snodes.end())
        continue;
      snodes.push_back(seat.node);
    }
    if (snodes.size() < quota) {
      event("selection-quota-not-met epoch " + std::to_string(next_epoch));
      return;
    }

    auto assignment = assign::assign(snodes, xi, cfg.m, intake);
    reconfig::ReconfigRule rule = cfg.sr_rule;
    if (rule.kind == reconfig::RuleKind::RandomReplacement && rule.replace_k == 0)
      rule.replace_k = intake;
    auto outcome = reconfig::plan_reconfiguration(rosters, assignment.groups, xi,
                                                  rule, next_epoch);

    // Bootstrapping: each joining member downloads and checks its shard's
    // snapshot; volume is metered and charged as downtime.
    std::uint64_t transfer_bytes = 0;
    for (ShardId s = 0; s < cfg.m && s < outcome.joined.size(); ++s) {
      auto snap = reconfig::StateSnapshot::build(
          s, carried[s], report.shards[s].committed_entries,
          report.shards[s].committed_txs);
      for (NodeId member : outcome.joined[s]) {
        auto rec = reconfig::bootstrap_member(member, s, snap, snap.root, cfg.u);
        transfer_bytes += rec.bytes;
        if (!rec.verified)
          report.violations.push_back("bootstrap verification failed");
      }
    }
    const Tick bootstrap_ticks =
        static_cast<Tick>(transfer_bytes / 65536) + 1;
    clock += bootstrap_ticks;
    report.reconfig_downtime += bootstrap_ticks;

    rosters = outcome.next;
    std::string departed_total = std::to_string([&] {
      std::size_t n = 0;
      for (const auto& d : outcome.departed) n += d.size();
      return n;
    }());
    event("reconfigured epoch " + std::to_string(next_epoch) + " rule " +
          reconfig::to_string(rule.kind) + " departed " + departed_total +
          " bytes " + std::to_string(transfer_bytes));
    adaptive_corruption_step();
  }

  RunResult run() {
    RunResult result;
    auto violations = validate_config(cfg);
    if (!violations.empty()) {
      result.failure = "invalid configuration: " + violations.front().rule +
                       " (" + violations.front().detail + ")";
      return result;
    }

    Keyring keys(cfg.seed ^ 0xbeefull);
    Rng rng = master.derive("composition");

    // T_initial: genesis randomness, initial selection of m*u members,
    // their assignment, and genesis outputs.
    auto initial = select(cfg.m * cfg.u, 0, keys, rng);
    if (!initial.quota_met ||
        initial.snodes.size() < static_cast<std::size_t>(cfg.m) * cfg.u) {
      result.failure = "initial selection quota not met";
      return result;
    }
    std::vector<NodeId> seats;
    for (const auto& seat : initial.snodes) {
      if (seats.size() == static_cast<std::size_t>(cfg.m) * cfg.u) break;
      if (std::find(seats.begin(), seats.end(), seat.node) == seats.end())
        seats.push_back(seat.node);
    }
    if (seats.size() < static_cast<std::size_t>(cfg.m) * cfg.u) {
      // The same miner may hold several seats; fill from the pool.
      for (NodeId i = 0; i < cfg.total_nodes() && seats.size() <
                                                      static_cast<std::size_t>(cfg.m) * cfg.u;
           ++i)
        if (std::find(seats.begin(), seats.end(), i) == seats.end())
          seats.push_back(i);
    }
    auto assignment = assign::assign(seats, xi, cfg.m, cfg.u);
    rosters.epoch = 0;
    rosters.shards.clear();
    for (ShardId s = 0; s < cfg.m; ++s) {
      reconfig::ShardRoster roster;
      for (NodeId n : assignment.groups[s]) roster.members.push_back({n, 0, 0});
      rosters.shards.push_back(roster);
    }
    adaptive_corruption_step();

    // Genesis outputs per shard feed the wallet.
    Rng genesis_rng = master.derive("genesis");
    for (ShardId s = 0; s < cfg.m; ++s) {
      for (std::uint32_t i = 0; i < cfg.genesis_outputs_per_shard; ++i) {
        Sha256 h;
        h.update("genesis-op");
        h.update_u32(s);
        h.update_u32(i);
        OutPoint op{h.finish(), 0};
        TxOutput out{owner_in(s, cfg.m, genesis_rng), 1000};
        carried[s].add(op, out);
        wallet.add(op, out, cfg.m);
      }
    }
    report.t_initial = clock;
    corruption.begin_run();

    const std::uint64_t initial_value = [&] {
      std::uint64_t v = 0;
      for (const auto& u : carried) v += u.total_value();
      return v;
    }();

    EpochStats stats;
    try {
      for (Epoch e = 0; e < cfg.epochs; ++e) {
        note_epoch_breaches(e);
        if (cfg.instant())
          run_instant_epoch(e, stats);
        else
          run_eventual_epoch(e, stats);
        if (!report.violations.empty()) break;
        if (e + 1 < cfg.epochs) transition(e + 1, keys, rng);
      }
    } catch (const InvariantBreach& breach) {
      report.violations.push_back(breach.what());
    }

    // Conservation across the whole run (committee mode keeps all value
    // inside the shards).
    if (cfg.instant() && report.violations.empty()) {
      std::uint64_t final_value = 0;
      for (const auto& u : carried) final_value += u.total_value();
      if (final_value != initial_value)
        report.violations.push_back("value not conserved");
    }

    // Aggregate metrics.
    report.total_ticks = clock;
    report.committed_total = stats.committed;
    report.aborted_total = stats.aborted;
    report.unresolved_total = stats.unresolved;
    if (clock > 0)
      report.throughput_per_kilotick =
          1000.0 * static_cast<double>(stats.committed) /
          static_cast<double>(clock);
    report.latency_count = stats.latencies.size();
    if (!stats.latencies.empty()) {
      std::sort(stats.latencies.begin(), stats.latencies.end());
      double sum = 0;
      for (Tick l : stats.latencies) sum += static_cast<double>(l);
      report.latency_mean = sum / static_cast<double>(stats.latencies.size());
      report.latency_p50 = stats.latencies[stats.latencies.size() / 2];
      report.latency_p95 =
          static_cast<Tick>(percentile(stats.latencies, 0.95));
      report.latency_max = stats.latencies.back();
      report.responsiveness =
          report.latency_mean /
          static_cast<double>(std::max<Tick>(cfg.message_model.delta, 1));
    }
    if (stats.total > 0)
      report.cross_shard_fraction =
          static_cast<double>(stats.cross) / static_cast<double>(stats.total);
    if (clock > 0 && cfg.total_nodes() > 0)
      report.bandwidth_per_node_per_kilotick =
          1000.0 * static_cast<double>(bytes_total) /
          static_cast<double>(cfg.total_nodes()) / static_cast<double>(clock);

    result.report = report;
    result.ok = report.violations.empty();
    if (!result.ok) {
      result.failure = report.violations.front();
      result.reproducer_json = "{\"config\":" + to_json(cfg) +
                               ",\"seed\":" + std::to_string(cfg.seed) +
                               ",\"tick\":" + std::to_string(clock) +
                               ",\"violation\":\"" + result.failure + "\"}";
    }
    return result;
  }
};

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg) {
  Runner runner(cfg);
  return runner.run();
}

std::vector<SweepCell> sweep(const ScenarioConfig& base, const std::string& axis,
                             const std::vector<std::string>& values) {
  std::vector<SweepCell> cells;
  for (const auto& value : values) {
    SweepCell cell;
    cell.axis = axis;
    cell.value = value;
    ScenarioConfig cfg = base;
    try {
      if (axis == "m")
        cfg.m = static_cast<std::uint32_t>(std::stoul(value));
      else if (axis == "u")
        cfg.u = static_cast<std::uint32_t>(std::stoul(value));
      else if (axis == "rho")
        cfg.rho = std::stod(value);
      else if (axis == "epochs")
        cfg.epochs = static_cast<std::uint32_t>(std::stoul(value));
      else if (axis == "seed")
        cfg.seed = std::stoull(value);
      else if (axis == "tx_rate")
        cfg.tx_rate_per_shard = std::stod(value);
      else
        throw std::invalid_argument("unknown sweep axis '" + axis + "'");
      auto result = run_scenario(cfg);
      cell.ok = result.ok;
      cell.report = result.report;
      cell.failure = result.failure;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.failure = e.what();
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

}  // namespace shardsim::scenario

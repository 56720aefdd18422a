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

#include "shardsim/cluster.hpp"

#include <algorithm>

namespace shardsim::cluster {

using consensus::Actions;
using consensus::CommittedEntry;
using consensus::ProposalPtr;
using ledger::OutPoint;
using ledger::Transaction;
using ledger::TxOutput;
using ledger::UtxoSet;
using xshard::AvailabilityCertificate;
using xshard::CoordinatorMode;
using xshard::TxPhase;

const char* to_string(IscKind k) {
  switch (k) {
    case IscKind::Pbft: return "pbft";
    case IscKind::Chained: return "chained";
    case IscKind::SyncEcho: return "sync-echo";
  }
  return "?";
}

namespace {

// --- cluster-internal wire messages -----------------------------------------

struct ClientSubmitMsg final : public net::Payload {
  Transaction tx;
  Tick deadline = 0;
  std::vector<std::pair<OutPoint, ShardId>> input_homes;
  const char* type_name() const override { return "client-submit"; }
  std::size_t wire_size() const override {
    return 48 + 36 * tx.inputs.size() + 40 * tx.outputs.size() +
           40 * input_homes.size();
  }
};

struct AttestMsg final : public net::Payload {
  AvailabilityCertificate fields;  // attestations empty; sig below
  Signature sig;
  const char* type_name() const override { return "attest"; }
  std::size_t wire_size() const override { return 152; }
};

struct CertSetMsg final : public net::Payload {
  Digest tx_id;
  bool commit = false;
  std::vector<AvailabilityCertificate> certs;
  const char* type_name() const override { return "cert-set"; }
  std::size_t wire_size() const override { return 40 + 160 * certs.size(); }
};

std::vector<AvailabilityCertificate> sorted_certs(
    std::map<OutPoint, AvailabilityCertificate> by_outpoint) {
  std::vector<AvailabilityCertificate> out;
  out.reserve(by_outpoint.size());
  for (auto& [op, cert] : by_outpoint) out.push_back(std::move(cert));
  return out;
}

}  // namespace

// --- implementation ----------------------------------------------------------

struct Cluster::Impl {
  ClusterConfig cfg;
  Keyring keys;
  net::Network net;
  Rng rng;
  Cluster* owner = nullptr;
  std::uint32_t shard_count = 0;
  std::vector<std::string> runtime_violations;

  struct PendingTx {
    Transaction tx;
    Digest tx_id;
    Tick deadline = 0;
    NodeId client = kNoNode;
    std::set<ShardId> involved;
    std::vector<std::pair<OutPoint, ShardId>> input_homes;
    // per outpoint: per attestation digest: collected signatures
    std::map<OutPoint, std::map<Digest, std::map<NodeId, Signature>>> collecting;
    std::map<OutPoint, std::map<Digest, AvailabilityCertificate>> claims;
    std::map<OutPoint, AvailabilityCertificate> certs;
    bool decide_submitted = false;
    bool certs_forwarded = false;

    bool commit_inevitable() const {
      if (certs.size() != tx.inputs.size()) return false;
      for (const auto& [op, cert] : certs)
        if (!cert.accept) return false;
      return true;
    }
  };

  struct Member {
    NodeId id = kNoNode;
    ShardId shard = 0;
    bool byzantine = false;
    std::unique_ptr<consensus::PbftReplica> pbft;
    std::unique_ptr<consensus::ChainedReplica> chained;
    std::unique_ptr<consensus::SyncEchoReplica> echo;
    MemberState state;
    std::map<Digest, PendingTx> pending;
    std::map<Digest, std::vector<std::shared_ptr<AttestMsg>>> unrouted;
    std::map<Digest, std::vector<AttestMsg>> early_attestations;
    std::set<Digest> expiry_requested;
    // byzantine bookkeeping
    std::uint64_t byz_view = 0;
    std::uint64_t byz_next_seq = 1;
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::set<Digest>> byz_seen;
    std::map<Digest, ProposalPtr> byz_bodies;
    std::uint64_t echo_round = 0;
  };

  struct Client {
    NodeId id = kNoNode;
    ClientPlan plan;
    PendingTx pending;
    bool submitted = false;
  };

  std::map<NodeId, Member> members;
  std::map<NodeId, Client> clients;
  std::set<Digest> phase_divergence_;
  NodeId next_client_id = 0;
  std::vector<AvailabilityCertificate> cert_stash;  // replay-attack material

  Impl(ClusterConfig c)
      : cfg(std::move(c)),
        keys(cfg.seed ^ 0x517ull),
        net(cfg.model, cfg.seed ^ 0xae7ull),
        rng(cfg.seed ^ 0x9c1ull) {
    shard_count = static_cast<std::uint32_t>(cfg.committees.size());
    if (shard_count == 0) throw std::invalid_argument("need at least one shard");
    if (cfg.worst_case_delays ||
        cfg.behaviors.count(adversary::Strategy::DelayMax) != 0)
      net.set_delay_policy(net::worst_case_delay_policy());

    NodeId max_id = 0;
    std::set<NodeId> seen;
    for (ShardId s = 0; s < shard_count; ++s) {
      for (NodeId n : cfg.committees[s]) {
        if (!seen.insert(n).second)
          throw std::invalid_argument("a node cannot sit in two shards");
        max_id = std::max(max_id, n);
      }
    }
    next_client_id = max_id + 1;

    for (ShardId s = 0; s < shard_count; ++s) {
      for (NodeId n : cfg.committees[s]) {
        keys.register_node(n);
        net.register_node(n);
        Member m;
        m.id = n;
        m.shard = s;
        m.byzantine = cfg.byzantine.count(n) != 0;
        if (!m.byzantine) make_replica(m);
        seed_genesis(m);
        members.emplace(n, std::move(m));
      }
    }
    // Periodic timers: expiry scans for every honest member, plus the
    // pacemakers the chosen engine needs.
    for (auto& [id, m] : members) {
      if (m.byzantine) continue;
      arm_scan_timer(m);
      if (cfg.isc == IscKind::SyncEcho) arm_echo_timer(m);
      if (cfg.isc == IscKind::Chained) {
        arm_chained_timer(m);
        process(m, m.chained->start(net.now()));
      }
    }
  }

  std::uint32_t committee_f(ShardId s) const {
    const auto u = static_cast<std::uint32_t>(cfg.committees[s].size());
    return cfg.isc == IscKind::SyncEcho ? (u - 1) / 2 : (u - 1) / 3;
  }

  std::uint32_t quorum_of(ShardId s) const {
    return cfg.isc == IscKind::SyncEcho ? committee_f(s) + 1
                                        : 2 * committee_f(s) + 1;
  }

  void make_replica(Member& m) {
    auto validator = [this, shard = m.shard,
                      self = m.id](const consensus::ProposalContent& p) {
      return validate_proposal(shard, self, p);
    };
    switch (cfg.isc) {
      case IscKind::Pbft: {
        consensus::PbftConfig pc;
        pc.committee = cfg.committees[m.shard];
        pc.self = m.id;
        pc.view_timeout = cfg.view_timeout;
        pc.keys = &keys;
        pc.validate = validator;
        m.pbft = std::make_unique<consensus::PbftReplica>(pc);
        break;
      }
      case IscKind::Chained: {
        consensus::ChainedConfig cc;
        cc.committee = cfg.committees[m.shard];
        cc.self = m.id;
        cc.round_timeout = cfg.round_timeout;
        cc.keys = &keys;
        cc.validate = validator;
        m.chained = std::make_unique<consensus::ChainedReplica>(cc);
        break;
      }
      case IscKind::SyncEcho: {
        consensus::SyncEchoConfig sc;
        sc.committee = cfg.committees[m.shard];
        sc.self = m.id;
        sc.keys = &keys;
        sc.validate = validator;
        m.echo = std::make_unique<consensus::SyncEchoReplica>(sc);
        break;
      }
    }
  }

  void seed_genesis(Member& m) {
    for (const auto& [op, out] : cfg.genesis) {
      if (ledger::home_shard(out.owner, shard_count) == m.shard)
        m.state.utxo.add(op, out);
    }
  }

  // --- timers ---------------------------------------------------------------

  void arm_scan_timer(Member& m) {
    auto t = std::make_shared<consensus::TimerMsg>();
    t->kind = consensus::TimerMsg::Kind::Tick;
    net.set_timer(m.id, cfg.expiry_scan_period, t);
  }

  void arm_echo_timer(Member& m) {
    // Fires one tick after each synchronous round boundary so that the
    // boundary's deliveries are already in.
    const Tick len = cfg.model.round_len;
    const Tick next_boundary = (net.now() / len + 1) * len + 1;
    auto t = std::make_shared<consensus::TimerMsg>();
    t->kind = consensus::TimerMsg::Kind::EchoPhase;
    t->value = m.echo_round;
    net.set_timer(m.id, next_boundary - net.now(), t);
  }

  void arm_chained_timer(Member& m) {
    auto t = std::make_shared<consensus::TimerMsg>();
    t->kind = consensus::TimerMsg::Kind::ChainedRound;
    t->value = m.chained->round();
    net.set_timer(m.id, cfg.round_timeout, t);
  }

  void arm_pbft_timer(Member& m, Tick delay) {
    auto t = std::make_shared<consensus::TimerMsg>();
    t->kind = consensus::TimerMsg::Kind::PbftView;
    t->value = m.pbft->timer_token();
    net.set_timer(m.id, delay, t);
  }

  // --- proposal validation (stateless) ---------------------------------------

  bool validate_proposal(ShardId shard, NodeId self,
                         const consensus::ProposalContent& p) {
    if (dynamic_cast<const consensus::EmptyProposal*>(&p) != nullptr) return true;
    if (const auto* batch = dynamic_cast<const xshard::TxBatchProposal*>(&p)) {
      if (batch->shard != shard) return false;
      for (const auto& tx : batch->txs)
        if (!tx.well_formed()) return false;
      return true;
    }
    if (const auto* ev = dynamic_cast<const xshard::EvaluateInputProposal*>(&p))
      return ev->shard == shard && ev->epoch == cfg.epoch;
    if (const auto* nn = dynamic_cast<const xshard::NewNodesProposal*>(&p))
      return nn->epoch >= cfg.epoch;
    if (const auto* ex = dynamic_cast<const xshard::ExpiryAbortProposal*>(&p)) {
      if (ex->shard != shard || net.now() < ex->deadline) return false;
      // A member already holding the full accepting set refuses the
      // unilateral release: the commit decision is inevitable.
      auto mit = members.find(self);
      if (mit != members.end()) {
        auto pit = mit->second.pending.find(ex->tx_id);
        if (pit != mit->second.pending.end() &&
            pit->second.commit_inevitable())
          return false;
      }
      return true;
    }
    if (const auto* d = dynamic_cast<const xshard::DecideProposal*>(&p))
      return validate_decide(shard, *d);
    return false;
  }

  bool validate_decide(ShardId shard, const xshard::DecideProposal& d) {
    if (d.shard != shard) return false;
    if (d.tx.id() != d.tx_id || !d.tx.well_formed()) return false;
    std::set<OutPoint> inputs(d.tx.inputs.begin(), d.tx.inputs.end());
    if (d.commit) {
      std::set<OutPoint> covered;
      std::uint64_t value_sum = 0;
      for (const auto& cert : d.certs) {
        if (cert.tx_id != d.tx_id) return false;  // replay defense
        if (!cert.accept) return false;
        if (inputs.count(cert.outpoint) == 0) return false;
        if (!covered.insert(cert.outpoint).second) return false;
        if (cert.shard >= shard_count) return false;
        if (!cert.verify(keys, cfg.committees[cert.shard], quorum_of(cert.shard)))
          return false;
        value_sum += cert.value;
      }
      return covered.size() == inputs.size() &&
             value_sum == d.tx.output_total();
    }
    // Abort path: one verified rejection bound to this transaction.
    for (const auto& cert : d.certs) {
      if (cert.tx_id != d.tx_id || cert.accept) continue;
      if (inputs.count(cert.outpoint) == 0) continue;
      if (cert.shard >= shard_count) continue;
      if (cert.verify(keys, cfg.committees[cert.shard], quorum_of(cert.shard)))
        return true;
    }
    return false;
  }

  // --- engine plumbing --------------------------------------------------------

  std::vector<NodeId> others_in_committee(const Member& m) const {
    std::vector<NodeId> out;
    for (NodeId n : cfg.committees[m.shard])
      if (n != m.id) out.push_back(n);
    return out;
  }

  void process(Member& m, Actions&& actions) {
    for (auto& b : actions.broadcasts)
      net.broadcast(m.id, others_in_committee(m), b);
    for (auto& [to, msg] : actions.unicasts) net.send(m.id, to, msg);
    for (auto& ev : actions.evidence) owner->evidence_.push_back(ev);
    if (actions.start_view_timer && cfg.isc == IscKind::Pbft)
      arm_pbft_timer(m, *actions.start_view_timer);
    for (auto& entry : actions.committed) apply_committed(m, entry);
  }

  void submit(Member& m, ProposalPtr proposal) {
    switch (cfg.isc) {
      case IscKind::Pbft:
        process(m, m.pbft->submit(std::move(proposal), net.now()));
        break;
      case IscKind::Chained:
        process(m, m.chained->submit(std::move(proposal), net.now()));
        break;
      case IscKind::SyncEcho:
        process(m, m.echo->submit(std::move(proposal), net.now()));
        break;
    }
  }

  // --- deterministic application of committed entries --------------------------

  void apply_committed(Member& m, const CommittedEntry& entry) {
    m.state.log.push_back(entry.digest);
    ++m.state.committed_entries;
    if (!entry.proposal) return;
    const auto& p = *entry.proposal;

    if (const auto* batch = dynamic_cast<const xshard::TxBatchProposal*>(&p)) {
      for (const auto& tx : batch->txs) apply_intra_tx(m, tx);
      return;
    }
    if (const auto* ev = dynamic_cast<const xshard::EvaluateInputProposal*>(&p)) {
      apply_evaluate(m, *ev);
      return;
    }
    if (const auto* d = dynamic_cast<const xshard::DecideProposal*>(&p)) {
      apply_decide(m, *d);
      return;
    }
    if (const auto* ex = dynamic_cast<const xshard::ExpiryAbortProposal*>(&p)) {
      apply_expiry_abort(m, *ex);
      return;
    }
  }

  TxLocal& tx_local(Member& m, const Digest& tx_id, const Transaction& tx) {
    auto it = m.state.txs.find(tx_id);
    if (it == m.state.txs.end()) {
      TxLocal fresh;
      fresh.tx = tx;
      it = m.state.txs.emplace(tx_id, std::move(fresh)).first;
    }
    return it->second;
  }

  void mark_spent(Member& m, const OutPoint& op, const Digest& tx_id) {
    auto [it, inserted] = m.state.spent_by.emplace(op, tx_id);
    if (!inserted && it->second != tx_id)
      throw InvariantBreach("outpoint spent twice within one shard", net.now());
  }

  void apply_intra_tx(Member& m, const Transaction& tx) {
    const Digest tx_id = tx.id();
    TxLocal& local = tx_local(m, tx_id, tx);
    if (local.phase == TxPhase::Committed || local.phase == TxPhase::Aborted)
      return;
    const auto verdict = ledger::validate_transaction(tx, m.state.utxo);
    if (verdict.valid()) {
      for (const auto& in : tx.inputs) mark_spent(m, in, tx_id);
      ledger::apply_transaction(tx, m.state.utxo);
      local.phase = TxPhase::Committed;
      ++m.state.committed_txs;
    } else {
      local.phase = TxPhase::Aborted;
    }
    report_outcome(m, tx_id, local.phase);
  }

  void apply_evaluate(Member& m, const xshard::EvaluateInputProposal& ev) {
    auto pending_it = m.pending.find(ev.tx_id);
    // The verdict is a pure function of the member's post-log state, so
    // every honest member signs the same attestation.
    AvailabilityCertificate fields;
    fields.tx_id = ev.tx_id;
    fields.outpoint = ev.outpoint;
    fields.epoch = ev.epoch;
    fields.shard = m.shard;

    TxLocal* local = nullptr;
    if (auto it = m.state.txs.find(ev.tx_id); it != m.state.txs.end())
      local = &it->second;

    const TxOutput* out = m.state.utxo.find(ev.outpoint);
    const ledger::Lock* lock = m.state.utxo.lock_of(ev.outpoint);
    if (local != nullptr && (local->phase == TxPhase::Committed ||
                             local->phase == TxPhase::Aborted)) {
      fields.accept = false;
      fields.reason = ledger::VerdictKind::InvalidLocked;
    } else if (out == nullptr) {
      fields.accept = false;
      fields.reason = ledger::VerdictKind::InvalidMissingInput;
    } else if (lock != nullptr && lock->holder_tx != ev.tx_id) {
      fields.accept = false;
      fields.reason = ledger::VerdictKind::InvalidLocked;
    } else {
      fields.accept = true;
      fields.value = out->value;
      m.state.utxo.lock(ev.outpoint, ev.tx_id, ev.lock_deadline);
      if (pending_it != m.pending.end()) {
        TxLocal& l = tx_local(m, ev.tx_id, pending_it->second.tx);
        l.locked.insert(ev.outpoint);
        l.deadline = ev.lock_deadline;
        if (l.phase == TxPhase::Pending) l.phase = TxPhase::Locked;
      }
    }

    // Sign and route the attestation.  When the evaluation commits before
    // the client's submission reached this member, hold the attestation
    // until the routing information arrives.
    auto att = std::make_shared<AttestMsg>();
    att->fields = fields;
    att->sig = keys.sign(m.id, fields.attestation_digest());
    if (pending_it != m.pending.end())
      route_attestation(m, &pending_it->second, att);
    else
      m.unrouted[ev.tx_id].push_back(att);
  }

  void route_attestation(Member& m, PendingTx* pending,
                         std::shared_ptr<AttestMsg> att) {
    if (pending == nullptr) return;
    switch (cfg.mode) {
      case CoordinatorMode::Client:
        net.send(m.id, pending->client, att);
        break;
      case CoordinatorMode::InputShards: {
        for (ShardId s : pending->involved)
          for (NodeId n : cfg.committees[s]) {
            if (n == m.id)
              on_attestation(members.at(m.id), *att);
            else
              net.send(m.id, n, att);
          }
        break;
      }
      case CoordinatorMode::OutputShard: {
        const ShardId coord = coordinator_shard(pending->tx);
        for (NodeId n : cfg.committees[coord]) {
          if (n == m.id)
            on_attestation(members.at(m.id), *att);
          else
            net.send(m.id, n, att);
        }
        break;
      }
    }
  }

  ShardId coordinator_shard(const Transaction& tx) const {
    // Lowest-numbered output shard coordinates.
    ShardId coord = shard_count - 1;
    bool found = false;
    for (const auto& out : tx.outputs) {
      const ShardId s = ledger::home_shard(out.owner, shard_count);
      if (!found || s < coord) {
        coord = s;
        found = true;
      }
    }
    return coord;
  }

  void apply_decide(Member& m, const xshard::DecideProposal& d) {
    auto it = m.state.txs.find(d.tx_id);
    TxLocal& local = it != m.state.txs.end() ? it->second
                                             : tx_local(m, d.tx_id, d.tx);
    if (local.phase == TxPhase::Committed || local.phase == TxPhase::Aborted)
      return;  // terminal decisions are final; late entries are no-ops
    if (local.tx.inputs.empty()) local.tx = d.tx;

    if (d.commit) {
      for (const auto& cert : d.certs) {
        if (cert.shard != m.shard) continue;
        // Guarded by the expiry protocol: a commit can only reach a
        // non-terminal transaction while its locks are still held.
        if (!m.state.utxo.contains(cert.outpoint))
          throw InvariantBreach("commit for a missing input", net.now());
        mark_spent(m, cert.outpoint, d.tx_id);
        m.state.utxo.remove(cert.outpoint);
        local.locked.erase(cert.outpoint);
      }
      const Digest tx_id = d.tx_id;
      for (std::uint32_t i = 0; i < d.tx.outputs.size(); ++i) {
        const auto& out = d.tx.outputs[i];
        if (ledger::home_shard(out.owner, shard_count) != m.shard) continue;
        m.state.utxo.add(OutPoint{tx_id, i}, out);
      }
      local.phase = TxPhase::Committed;
      ++m.state.committed_txs;
    } else {
      for (const auto& op : local.locked) m.state.utxo.unlock(op);
      local.locked.clear();
      local.phase = TxPhase::Aborted;
    }
    ++owner->decisions_committed_;
    report_outcome(m, d.tx_id, local.phase);
  }

  void apply_expiry_abort(Member& m, const xshard::ExpiryAbortProposal& ex) {
    auto pit = m.pending.find(ex.tx_id);
    TxLocal& local = tx_local(
        m, ex.tx_id,
        pit != m.pending.end() ? pit->second.tx : ledger::Transaction{});
    if (local.phase == TxPhase::Committed || local.phase == TxPhase::Aborted)
      return;
    for (const auto& op : local.locked) m.state.utxo.unlock(op);
    local.locked.clear();
    local.phase = TxPhase::Aborted;
    report_outcome(m, ex.tx_id, local.phase);
  }

  void report_outcome(Member& m, const Digest& tx_id, TxPhase phase) {
    if (m.byzantine) return;
    auto it = owner->outcomes_.find(tx_id);
    if (it == owner->outcomes_.end()) return;  // not a tracked client tx
    if (it->second.phase == TxPhase::Pending ||
        it->second.phase == TxPhase::Locked) {
      it->second.phase = phase;
      it->second.resolved_at = net.now();
    } else if (it->second.phase != phase) {
      phase_divergence_.insert(tx_id);
    }
  }

  // --- client / coordinator logic ----------------------------------------------

  void on_client_submit(Member& m, const ClientSubmitMsg& msg, NodeId from) {
    const Digest tx_id = msg.tx.id();
    if (m.pending.count(tx_id) != 0) return;
    PendingTx pending;
    pending.tx = msg.tx;
    pending.tx_id = tx_id;
    pending.deadline = msg.deadline;
    pending.client = from;
    pending.input_homes = msg.input_homes;
    for (const auto& [op, s] : msg.input_homes) pending.involved.insert(s);
    for (const auto& out : msg.tx.outputs)
      pending.involved.insert(ledger::home_shard(out.owner, shard_count));
    const bool intra =
        pending.involved.size() == 1 && *pending.involved.begin() == m.shard;
    auto inserted = m.pending.emplace(tx_id, pending).first;
    if (auto buf = m.unrouted.find(tx_id); buf != m.unrouted.end()) {
      for (auto& att : buf->second)
        route_attestation(m, &inserted->second, att);
      m.unrouted.erase(buf);
    }
    if (auto held = m.early_attestations.find(tx_id);
        held != m.early_attestations.end()) {
      for (const auto& att : held->second)
        collect_attestation(inserted->second, att);
      m.early_attestations.erase(held);
      maybe_conclude(nullptr, &m, inserted->second);
    }

    if (intra) {
      auto batch = std::make_shared<xshard::TxBatchProposal>();
      batch->shard = m.shard;
      batch->txs.push_back(msg.tx);
      submit(m, batch);
      return;
    }
    // Queue one evaluation per input this shard homes.
    for (const auto& [op, s] : msg.input_homes) {
      if (s != m.shard) continue;
      auto ev = std::make_shared<xshard::EvaluateInputProposal>();
      ev->tx_id = tx_id;
      ev->outpoint = op;
      ev->epoch = cfg.epoch;
      ev->shard = m.shard;
      ev->lock_deadline = msg.deadline;
      submit(m, ev);
    }
  }

  void on_attestation(Member& m, const AttestMsg& msg) {
    auto it = m.pending.find(msg.fields.tx_id);
    if (it == m.pending.end()) {
      // The submission is still in flight to this member; hold the
      // attestation until it lands.
      m.early_attestations[msg.fields.tx_id].push_back(msg);
      return;
    }
    collect_attestation(it->second, msg);
    maybe_conclude(/*client=*/nullptr, &m, it->second);
  }

  void collect_attestation(PendingTx& pending, const AttestMsg& msg) {
    const Digest att = msg.fields.attestation_digest();
    if (!keys.verify(msg.sig.signer, att, msg.sig)) return;
    if (msg.fields.shard >= shard_count) return;
    bool roster_member = false;
    for (NodeId n : cfg.committees[msg.fields.shard])
      if (n == msg.sig.signer) roster_member = true;
    if (!roster_member) return;

    pending.collecting[msg.fields.outpoint][att][msg.sig.signer] = msg.sig;
    pending.claims[msg.fields.outpoint].emplace(att, msg.fields);
    auto& sigs = pending.collecting[msg.fields.outpoint][att];
    if (sigs.size() >= quorum_of(msg.fields.shard) &&
        pending.certs.count(msg.fields.outpoint) == 0) {
      AvailabilityCertificate cert = pending.claims[msg.fields.outpoint][att];
      for (const auto& [node, sig] : sigs) cert.attestations.push_back(sig);
      pending.certs.emplace(msg.fields.outpoint, std::move(cert));
    }
  }

  /// Once certificates resolve the transaction's fate, drive the commit
  /// phase according to the coordinator mode.
  void maybe_conclude(Client* client, Member* member, PendingTx& pending) {
    if (pending.decide_submitted) return;
    bool any_reject = false;
    for (const auto& [op, cert] : pending.certs)
      if (!cert.accept) any_reject = true;
    const bool complete = pending.certs.size() == pending.tx.inputs.size();
    if (!any_reject && !complete) return;

    pending.decide_submitted = true;
    const bool commit = complete && !any_reject;

    if (client != nullptr) {
      // Client-driven: forward the certificate set to every involved
      // member (the malicious variant withholds instead).
      if (client->plan.withhold_certs) return;
      auto set = std::make_shared<CertSetMsg>();
      set->tx_id = pending.tx_id;
      set->commit = commit;
      set->certs = sorted_certs(pending.certs);
      if (client->plan.replay_attack) corrupt_certs(*set);
      for (ShardId s : pending.involved) {
        if (client->plan.selective_forward && *client->plan.selective_forward != s)
          continue;  // the partial-forwarding attack
        for (NodeId n : cfg.committees[s]) net.send(client->id, n, set);
      }
      return;
    }

    // Shard-driven: this member submits the decision to its own replica,
    // and in output-coordinator mode also relays the set to the rest.
    auto decide = std::make_shared<xshard::DecideProposal>();
    decide->tx_id = pending.tx_id;
    decide->tx = pending.tx;
    decide->commit = commit;
    decide->certs = sorted_certs(pending.certs);
    decide->shard = member->shard;
    if (pending.involved.count(member->shard) != 0) submit(*member, decide);

    if (cfg.mode == CoordinatorMode::OutputShard && !pending.certs_forwarded) {
      pending.certs_forwarded = true;
      auto set = std::make_shared<CertSetMsg>();
      set->tx_id = pending.tx_id;
      set->commit = commit;
      set->certs = decide->certs;
      for (ShardId s : pending.involved) {
        if (s == member->shard) continue;
        for (NodeId n : cfg.committees[s]) net.send(member->id, n, set);
      }
    }
  }

  void corrupt_certs(CertSetMsg& set) {
    // Replay: substitute a certificate minted for a different transaction
    // that touches the same outpoint, when the stash has one.
    for (auto& cert : set.certs) {
      for (const auto& old : cert_stash) {
        if (old.outpoint == cert.outpoint && old.tx_id != cert.tx_id) {
          cert = old;
          return;
        }
      }
    }
  }

  void on_cert_set(Member& m, const CertSetMsg& msg) {
    auto it = m.pending.find(msg.tx_id);
    if (it == m.pending.end()) return;
    PendingTx& pending = it->second;
    if (pending.involved.count(m.shard) == 0) return;

    auto decide = std::make_shared<xshard::DecideProposal>();
    decide->tx_id = msg.tx_id;
    decide->tx = pending.tx;
    decide->commit = msg.commit;
    decide->certs = msg.certs;
    decide->shard = m.shard;
    submit(m, decide);
  }

  // --- expiry scan ---------------------------------------------------------------

  void on_scan(Member& m) {
    // Every pending transaction carries a deadline; whatever reached it
    // without a terminal decision gets a committed unilateral abort, which
    // releases any locks it still holds.
    for (auto& [tx_id, pending] : m.pending) {
      if (net.now() < pending.deadline) continue;
      auto it = m.state.txs.find(tx_id);
      if (it != m.state.txs.end() &&
          (it->second.phase == TxPhase::Committed ||
           it->second.phase == TxPhase::Aborted))
        continue;
      // A complete accepting certificate set seals the outcome: the
      // commit decision is on its way, so the lock resolves with it
      // rather than through a unilateral release.
      if (pending.commit_inevitable()) continue;
      if (!m.expiry_requested.insert(tx_id).second) continue;
      auto ex = std::make_shared<xshard::ExpiryAbortProposal>();
      ex->tx_id = tx_id;
      ex->shard = m.shard;
      ex->deadline = pending.deadline;
      submit(m, ex);
    }
    arm_scan_timer(m);
  }

  // --- byzantine behavior -----------------------------------------------------------

  void byz_handle(Member& m, const net::Envelope& env) {
    if (cfg.behaviors.count(adversary::Strategy::Withhold) != 0) return;
    if (cfg.behaviors.count(adversary::Strategy::Equivocate) == 0) return;
    if (cfg.isc != IscKind::Pbft) return;

    const auto* pbft = dynamic_cast<const consensus::PbftMsg*>(env.payload.get());
    if (pbft != nullptr) {
      m.byz_view = std::max(m.byz_view, pbft->view);
      if (pbft->type == consensus::PbftMsg::Type::PrePrepare ||
          pbft->type == consensus::PbftMsg::Type::Prepare ||
          pbft->type == consensus::PbftMsg::Type::Commit) {
        m.byz_next_seq = std::max(m.byz_next_seq, pbft->seq + 1);
        auto& digests = m.byz_seen[{pbft->view, pbft->seq}];
        if (digests.insert(pbft->proposal_digest).second) {
          // Double-vote every digest it has ever seen for this slot.
          for (const Digest& d : digests) {
            for (auto type : {consensus::PbftMsg::Type::Prepare,
                              consensus::PbftMsg::Type::Commit}) {
              consensus::PbftMsg vote;
              vote.type = type;
              vote.sender = m.id;
              vote.view = pbft->view;
              vote.seq = pbft->seq;
              vote.proposal_digest = d;
              vote.sig = keys.sign(m.id, vote.signed_digest());
              net.broadcast(m.id, others_in_committee(m),
                            std::make_shared<consensus::PbftMsg>(vote));
            }
          }
        }
      }
      if (pbft->type == consensus::PbftMsg::Type::Request && pbft->proposal) {
        byz_equivocate_leader(m, pbft->proposal);
      }
      return;
    }
    const auto* submit_msg =
        dynamic_cast<const ClientSubmitMsg*>(env.payload.get());
    if (submit_msg != nullptr) {
      auto batch = std::make_shared<xshard::TxBatchProposal>();
      batch->shard = m.shard;
      batch->txs.push_back(submit_msg->tx);
      byz_equivocate_leader(m, batch);
    }
  }

  void byz_equivocate_leader(Member& m, ProposalPtr real) {
    // Split the committee: half sees the real proposal, half a conflicting
    // empty one at the same sequence.
    const auto& roster = cfg.committees[m.shard];
    if (roster[m.byz_view % roster.size()] != m.id) return;
    const std::uint64_t seq = m.byz_next_seq++;
    ProposalPtr fake = consensus::empty_proposal();

    std::vector<NodeId> half_a, half_b;
    for (std::size_t i = 0; i < roster.size(); ++i) {
      if (roster[i] == m.id) continue;
      (i % 2 == 0 ? half_a : half_b).push_back(roster[i]);
    }
    for (int which = 0; which < 2; ++which) {
      consensus::PbftMsg pp;
      pp.type = consensus::PbftMsg::Type::PrePrepare;
      pp.sender = m.id;
      pp.view = m.byz_view;
      pp.seq = seq;
      pp.proposal = which == 0 ? real : fake;
      pp.proposal_digest = pp.proposal->digest();
      pp.sig = keys.sign(m.id, pp.signed_digest());
      net.broadcast(m.id, which == 0 ? half_a : half_b,
                    std::make_shared<consensus::PbftMsg>(pp));
    }
  }

  // --- dispatch --------------------------------------------------------------------

  void dispatch(const net::Envelope& env) {
    auto cit = clients.find(env.to);
    if (cit != clients.end()) {
      client_dispatch(cit->second, env);
      return;
    }
    auto mit = members.find(env.to);
    if (mit == members.end()) return;
    Member& m = mit->second;

    if (m.byzantine) {
      byz_handle(m, env);
      return;
    }

    if (const auto* t = dynamic_cast<const consensus::TimerMsg*>(env.payload.get())) {
      switch (t->kind) {
        case consensus::TimerMsg::Kind::Tick:
          on_scan(m);
          break;
        case consensus::TimerMsg::Kind::PbftView:
          process(m, m.pbft->handle_view_timeout(t->value, net.now()));
          break;
        case consensus::TimerMsg::Kind::ChainedRound:
          process(m, m.chained->handle_round_timeout(t->value, net.now()));
          arm_chained_timer(m);
          break;
        case consensus::TimerMsg::Kind::EchoPhase:
          process(m, m.echo->on_round(m.echo_round, net.now()));
          ++m.echo_round;
          arm_echo_timer(m);
          break;
      }
      return;
    }
    if (const auto* p = dynamic_cast<const consensus::PbftMsg*>(env.payload.get())) {
      process(m, m.pbft->handle(*p, net.now()));
      return;
    }
    if (const auto* c = dynamic_cast<const consensus::ChainedMsg*>(env.payload.get())) {
      process(m, m.chained->handle(*c, net.now()));
      return;
    }
    if (const auto* e = dynamic_cast<const consensus::EchoMsg*>(env.payload.get())) {
      process(m, m.echo->handle(*e, net.now()));
      return;
    }
    if (const auto* s = dynamic_cast<const ClientSubmitMsg*>(env.payload.get())) {
      on_client_submit(m, *s, env.from);
      return;
    }
    if (const auto* a = dynamic_cast<const AttestMsg*>(env.payload.get())) {
      on_attestation(m, *a);
      return;
    }
    if (const auto* cs = dynamic_cast<const CertSetMsg*>(env.payload.get())) {
      on_cert_set(m, *cs);
      return;
    }
  }

  void client_dispatch(Client& client, const net::Envelope& env) {
    if (const auto* t = dynamic_cast<const consensus::TimerMsg*>(env.payload.get())) {
      (void)t;
      send_client_tx(client);
      return;
    }
    if (const auto* a = dynamic_cast<const AttestMsg*>(env.payload.get())) {
      collect_attestation(client.pending, *a);
      for (const auto& [op, cert] : client.pending.certs) stash_cert(cert);
      maybe_conclude(&client, nullptr, client.pending);
      return;
    }
  }

  void stash_cert(const AvailabilityCertificate& cert) {
    for (const auto& old : cert_stash)
      if (old.tx_id == cert.tx_id && old.outpoint == cert.outpoint) return;
    cert_stash.push_back(cert);
  }

  void send_client_tx(Client& client) {
    if (client.submitted) return;
    client.submitted = true;
    auto msg = std::make_shared<ClientSubmitMsg>();
    msg->tx = client.plan.tx;
    msg->deadline = net.now() + cfg.lock_ttl;
    client.pending.deadline = msg->deadline;
    for (const auto& [op, s] : client.pending.input_homes)
      msg->input_homes.emplace_back(op, s);
    for (ShardId s : client.pending.involved)
      for (NodeId n : cfg.committees[s]) net.send(client.id, n, msg);
  }

  void run_until(Tick end) {
    while (true) {
      auto t = net.next_deliver_at();
      if (!t || *t > end) break;
      for (const auto& env : net.next_batch()) dispatch(env);
    }
    if (net.now() < end) net.advance(end);
  }
};

// --- public wrapper -------------------------------------------------------------

Cluster::Cluster(ClusterConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {
  impl_->owner = this;
}

Cluster::~Cluster() = default;

void Cluster::queue_client(ClientPlan plan) {
  Impl& im = *impl_;
  Impl::Client client;
  client.id = im.next_client_id++;
  im.keys.register_node(client.id);
  im.net.register_node(client.id);
  client.plan = plan;
  client.pending.tx = plan.tx;
  client.pending.tx_id = plan.tx.id();

  // The client knows where its own inputs live: genesis outputs, outputs
  // of transactions it already sent, or whatever a member currently holds.
  for (const auto& in : plan.tx.inputs) {
    ShardId home = 0;
    bool resolved = false;
    for (const auto& [op, out] : im.cfg.genesis) {
      if (op == in) {
        home = ledger::home_shard(out.owner, im.shard_count);
        resolved = true;
        break;
      }
    }
    if (!resolved) {
      auto oit = outcomes_.find(in.tx_id);
      if (oit != outcomes_.end() &&
          in.index < oit->second.tx.outputs.size()) {
        home = ledger::home_shard(oit->second.tx.outputs[in.index].owner,
                                  im.shard_count);
        resolved = true;
      }
    }
    if (!resolved) {
      for (const auto& [id, m] : im.members) {
        if (m.state.utxo.find(in) != nullptr) {
          home = m.shard;
          resolved = true;
          break;
        }
      }
    }
    client.pending.input_homes.emplace_back(in, home);
    client.pending.involved.insert(home);
  }
  for (const auto& out : plan.tx.outputs)
    client.pending.involved.insert(ledger::home_shard(out.owner, im.shard_count));
  client.pending.client = client.id;

  TxOutcome outcome;
  outcome.tx_id = client.pending.tx_id;
  outcome.tx = plan.tx;
  outcome.cross_shard = client.pending.involved.size() > 1;
  outcome.submitted_at = plan.submit_at;
  outcomes_.emplace(outcome.tx_id, outcome);

  auto t = std::make_shared<consensus::TimerMsg>();
  t->kind = consensus::TimerMsg::Kind::Tick;
  const Tick delay = std::max<Tick>(plan.submit_at - im.net.now(), 1);
  im.net.set_timer(client.id, delay, t);
  im.clients.emplace(client.id, std::move(client));
}

void Cluster::seed_shard_state(ShardId shard, const UtxoSet& utxo) {
  for (auto& [id, m] : impl_->members) {
    if (m.shard != shard) continue;
    for (const auto& [op, out] : utxo.entries())
      if (!m.state.utxo.contains(op)) m.state.utxo.add(op, out);
  }
}

void Cluster::run_until(Tick end) { impl_->run_until(end); }

void Cluster::run_to_quiescence(Tick end) {
  while (impl_->net.now() < end) {
    bool all_done = true;
    for (const auto& [id, o] : outcomes_) {
      if (o.phase == TxPhase::Pending || o.phase == TxPhase::Locked) {
        all_done = false;
        break;
      }
    }
    if (all_done) break;
    impl_->run_until(std::min<Tick>(impl_->net.now() + 50, end));
  }
}

Tick Cluster::now() const { return impl_->net.now(); }

const net::Network& Cluster::network() const { return impl_->net; }

std::uint32_t Cluster::quorum_of(ShardId shard) const {
  return impl_->quorum_of(shard);
}

const MemberState& Cluster::shard_state(ShardId shard) const {
  for (const auto& [id, m] : impl_->members)
    if (m.shard == shard && !m.byzantine) return m.state;
  throw std::invalid_argument("no honest member in shard");
}

std::vector<const MemberState*> Cluster::honest_states(ShardId shard) const {
  std::vector<const MemberState*> out;
  for (const auto& [id, m] : impl_->members)
    if (m.shard == shard && !m.byzantine) out.push_back(&m.state);
  return out;
}

std::vector<std::string> Cluster::check_invariants(bool require_terminal,
                                                   bool strict_atomicity) const {
  std::vector<std::string> violations = impl_->runtime_violations;
  if (strict_atomicity)
    for (const auto& tx : impl_->phase_divergence_)
      violations.push_back("conflicting terminal phases for a tx");

  // Per-shard log prefix agreement among honest members.
  for (ShardId s = 0; s < impl_->shard_count; ++s) {
    auto states = honest_states(s);
    for (std::size_t i = 0; i + 1 < states.size(); ++i) {
      const auto& a = states[i]->log;
      const auto& b = states[i + 1]->log;
      const std::size_t n = std::min(a.size(), b.size());
      for (std::size_t k = 0; k < n; ++k) {
        if (a[k] != b[k]) {
          violations.push_back("log prefix divergence in shard " +
                               std::to_string(s));
          break;
        }
      }
    }
  }

  // Global at-most-once spending: an outpoint consumed by two different
  // transactions anywhere is a double spend.
  std::map<OutPoint, Digest> global_spent;
  for (ShardId s = 0; s < impl_->shard_count; ++s) {
    for (const auto* state : honest_states(s)) {
      for (const auto& [op, tx_id] : state->spent_by) {
        auto [it, inserted] = global_spent.emplace(op, tx_id);
        if (!inserted && it->second != tx_id) {
          violations.push_back("cross-shard double spend");
        }
      }
    }
  }

  // Locks may not outlive resolution; at quiescence no lock remains on a
  // terminal transaction and (when required) nothing stays unresolved.
  for (ShardId s = 0; s < impl_->shard_count; ++s) {
    const auto& state = shard_state(s);
    for (const auto& [op, lock] : state.utxo.locks()) {
      auto it = state.txs.find(lock.holder_tx);
      const bool terminal =
          it != state.txs.end() && (it->second.phase == TxPhase::Committed ||
                                    it->second.phase == TxPhase::Aborted);
      if (terminal)
        violations.push_back("lock survived a terminal transaction");
      else if (impl_->net.now() >
               lock.expires_at + 4 * impl_->cfg.expiry_scan_period +
                   8 * impl_->cfg.view_timeout)
        violations.push_back("lock held far past its expiry");
    }
  }

  if (require_terminal) {
    for (const auto& [tx_id, o] : outcomes_) {
      if (o.phase == TxPhase::Pending || o.phase == TxPhase::Locked)
        violations.push_back("transaction never resolved");
    }
  }

  // Cross-shard phase agreement: no shard committed what another aborted.
  if (!strict_atomicity) return violations;
  for (const auto& [tx_id, o] : outcomes_) {
    bool committed = false, aborted = false;
    for (ShardId s = 0; s < impl_->shard_count; ++s) {
      for (const auto* state : honest_states(s)) {
        auto it = state->txs.find(tx_id);
        if (it == state->txs.end()) continue;
        if (it->second.phase == TxPhase::Committed) committed = true;
        if (it->second.phase == TxPhase::Aborted) aborted = true;
      }
    }
    if (committed && aborted)
      violations.push_back("commit/abort disagreement across shards");
  }
  return violations;
}

}  // namespace shardsim::cluster

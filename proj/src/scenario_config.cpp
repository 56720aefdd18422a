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

#include <json.hpp>

#include <cmath>
#include <cstdio>

#include "shardsim/scenario.hpp"

namespace shardsim::scenario {

using nlohmann::json;

const char* to_string(ProportionBucket b) {
  return b == ProportionBucket::LtOneThird ? "lt-one-third" : "one-third-to-half";
}

const char* to_string(AdmissionModel a) {
  return a == AdmissionModel::Permissionless ? "permissionless" : "permissioned";
}

const char* to_string(IscAlgorithm a) {
  switch (a) {
    case IscAlgorithm::Pbft: return "pbft";
    case IscAlgorithm::Chained: return "chained";
    case IscAlgorithm::SyncEcho: return "sync-echo";
    case IscAlgorithm::Pow: return "pow";
  }
  return "?";
}

const char* to_string(CstpMode m) {
  switch (m) {
    case CstpMode::Client2pc: return "client-2pc";
    case CstpMode::Shard2pc: return "shard-2pc";
    case CstpMode::Output2pc: return "output-2pc";
    case CstpMode::Split: return "split";
    case CstpMode::Relay: return "relay";
  }
  return "?";
}

namespace {

void require_keys(const json& obj, const std::set<std::string>& allowed,
                  const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (allowed.count(key) == 0)
      throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T enum_from(const std::string& text, const std::map<std::string, T>& table,
            const std::string& where) {
  auto it = table.find(text);
  if (it == table.end())
    throw std::invalid_argument("unknown value '" + text + "' for " + where);
  return it->second;
}

const std::map<std::string, IscAlgorithm> kIscTable{
    {"pbft", IscAlgorithm::Pbft},
    {"chained", IscAlgorithm::Chained},
    {"sync-echo", IscAlgorithm::SyncEcho},
    {"pow", IscAlgorithm::Pow},
};

const std::map<std::string, CstpMode> kCstpTable{
    {"client-2pc", CstpMode::Client2pc},
    {"shard-2pc", CstpMode::Shard2pc},
    {"output-2pc", CstpMode::Output2pc},
    {"split", CstpMode::Split},
    {"relay", CstpMode::Relay},
};

const std::map<std::string, selection::SelectionMethod> kNsTable{
    {"pow-underlying-chain", selection::SelectionMethod::PowUnderlyingChain},
    {"pow-reference-committee", selection::SelectionMethod::PowReferenceCommittee},
    {"pos-lottery", selection::SelectionMethod::PosLottery},
    {"permissioned-roster", selection::SelectionMethod::PermissionedRoster},
};

const std::map<std::string, reconfig::RuleKind> kSrTable{
    {"random-replacement", reconfig::RuleKind::RandomReplacement},
    {"chronological", reconfig::RuleKind::Chronological},
    {"bounded-cuckoo", reconfig::RuleKind::BoundedCuckoo},
};

}  // namespace

std::string to_json(const ScenarioConfig& cfg) {
  json j;
  json& net = j["message_model"];
  switch (cfg.message_model.kind) {
    case net::NetKind::Synchronous:
      net["kind"] = "synchronous";
      net["round_len"] = cfg.message_model.round_len;
      break;
    case net::NetKind::PartialSyncA:
      net["kind"] = "partial-sync-a";
      net["delta"] = cfg.message_model.delta;
      break;
    case net::NetKind::PartialSyncB:
      net["kind"] = "partial-sync-b";
      net["delta"] = cfg.message_model.delta;
      net["gst"] = cfg.message_model.gst;
      break;
  }
  j["admission"] = to_string(cfg.admission);
  json& corr = j["corruption"];
  corr["timing"] = cfg.corruption_timing == adversary::CorruptionTiming::Adaptive
                       ? "adaptive"
                       : "static";
  corr["tau"] = cfg.tau;
  corr["rho"] = cfg.rho;
  corr["behaviors"] = json::array();
  for (auto s : cfg.behaviors) corr["behaviors"].push_back(adversary::strategy_name(s));
  j["proportion_bucket"] = to_string(cfg.bucket);
  j["transaction_model"] = cfg.transaction_model;

  json& sel = j["selection"];
  sel["method"] = selection::to_string(cfg.ns_method);
  sel["pow_p"] = cfg.ns_pow_p;
  sel["k_threshold"] = cfg.k_threshold;

  json& er = j["beacon"];
  er["variant"] = cfg.er_variant == beacon::VariantKind::CommitReveal
                      ? "commit-reveal"
                      : "threshold-share";
  er["committee"] = cfg.er_committee == BeaconCommittee::Shard0 ? "shard0"
                                                                : "reference";

  json& na = j["assignment"];
  na["m"] = cfg.m;
  na["u"] = cfg.u;
  na["k"] = cfg.k;

  json& isc = j["consensus"];
  isc["algorithm"] = to_string(cfg.isc);
  isc["view_timeout"] = cfg.view_timeout;
  isc["round_timeout"] = cfg.round_timeout;
  isc["truncate_depth"] = cfg.truncate_depth;
  isc["shard_pow_p"] = cfg.shard_pow_p;

  json& cstp = j["cross_shard"];
  cstp["mode"] = to_string(cfg.cstp);
  cstp["lock_ttl"] = cfg.lock_ttl;
  cstp["lambda"] = cfg.lambda;

  json& sr = j["reconfiguration"];
  sr["rule"] = reconfig::to_string(cfg.sr_rule.kind);
  sr["k"] = cfg.sr_rule.replace_k;
  sr["fraction"] = cfg.sr_rule.fraction;
  sr["evict_k"] = cfg.sr_rule.evict_k;
  sr["t_epoch"] = cfg.t_epoch;

  json& mm = j["incentives"];
  mm["block_reward"] = cfg.mm_policy.block_reward;
  mm["leader_multiplier"] = cfg.mm_policy.leader_multiplier;
  mm["deposit"] = cfg.mm_policy.deposit;
  mm["slash_equivocation"] = cfg.mm_policy.slash_equivocation;

  json& wl = j["workload"];
  wl["tx_rate_per_shard"] = cfg.tx_rate_per_shard;
  wl["inputs"] = cfg.tx_inputs;
  wl["outputs"] = cfg.tx_outputs;
  wl["locality_bias"] = cfg.locality_bias;
  wl["genesis_outputs_per_shard"] = cfg.genesis_outputs_per_shard;

  json& run = j["run"];
  run["nodes"] = cfg.nodes;
  run["epochs"] = cfg.epochs;
  run["seed"] = cfg.seed;

  return j.dump(2);
}

ScenarioConfig config_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  require_keys(j,
               {"message_model", "admission", "corruption", "proportion_bucket",
                "transaction_model", "selection", "beacon", "assignment",
                "consensus", "cross_shard", "reconfiguration", "incentives",
                "workload", "run"},
               "config root");
  ScenarioConfig cfg;

  if (j.contains("message_model")) {
    const json& net = j.at("message_model");
    require_keys(net, {"kind", "round_len", "delta", "gst"}, "message_model");
    const std::string kind = net.at("kind").get<std::string>();
    if (kind == "synchronous") {
      cfg.message_model =
          net::NetModel::synchronous(net.value("round_len", Tick{8}));
    } else if (kind == "partial-sync-a") {
      cfg.message_model = net::NetModel::partial_sync_a(net.value("delta", Tick{3}));
    } else if (kind == "partial-sync-b") {
      cfg.message_model = net::NetModel::partial_sync_b(
          net.value("delta", Tick{3}), net.value("gst", Tick{0}));
    } else {
      throw std::invalid_argument("unknown message model '" + kind + "'");
    }
  }
  if (j.contains("admission")) {
    cfg.admission = enum_from<AdmissionModel>(
        j.at("admission").get<std::string>(),
        {{"permissionless", AdmissionModel::Permissionless},
         {"permissioned", AdmissionModel::Permissioned}},
        "admission");
  }
  if (j.contains("corruption")) {
    const json& corr = j.at("corruption");
    require_keys(corr, {"timing", "tau", "rho", "behaviors"}, "corruption");
    if (corr.contains("timing"))
      cfg.corruption_timing = enum_from<adversary::CorruptionTiming>(
          corr.at("timing").get<std::string>(),
          {{"adaptive", adversary::CorruptionTiming::Adaptive},
           {"static", adversary::CorruptionTiming::Static}},
          "corruption timing");
    cfg.tau = corr.value("tau", cfg.tau);
    cfg.rho = corr.value("rho", cfg.rho);
    if (corr.contains("behaviors")) {
      for (const auto& b : corr.at("behaviors")) {
        auto s = adversary::strategy_from_name(b.get<std::string>());
        if (!s) throw std::invalid_argument("unknown behavior tag");
        cfg.behaviors.insert(*s);
      }
    }
  }
  if (j.contains("proportion_bucket"))
    cfg.bucket = enum_from<ProportionBucket>(
        j.at("proportion_bucket").get<std::string>(),
        {{"lt-one-third", ProportionBucket::LtOneThird},
         {"one-third-to-half", ProportionBucket::OneThirdToHalf}},
        "proportion bucket");
  if (j.contains("transaction_model"))
    cfg.transaction_model = j.at("transaction_model").get<std::string>();

  if (j.contains("selection")) {
    const json& sel = j.at("selection");
    require_keys(sel, {"method", "pow_p", "k_threshold"}, "selection");
    if (sel.contains("method"))
      cfg.ns_method = enum_from(sel.at("method").get<std::string>(), kNsTable,
                                "selection method");
    cfg.ns_pow_p = sel.value("pow_p", cfg.ns_pow_p);
    cfg.k_threshold = sel.value("k_threshold", cfg.k_threshold);
  }
  if (j.contains("beacon")) {
    const json& er = j.at("beacon");
    require_keys(er, {"variant", "committee"}, "beacon");
    if (er.contains("variant"))
      cfg.er_variant = enum_from<beacon::VariantKind>(
          er.at("variant").get<std::string>(),
          {{"commit-reveal", beacon::VariantKind::CommitReveal},
           {"threshold-share", beacon::VariantKind::ThresholdShare}},
          "beacon variant");
    if (er.contains("committee"))
      cfg.er_committee = enum_from<BeaconCommittee>(
          er.at("committee").get<std::string>(),
          {{"shard0", BeaconCommittee::Shard0},
           {"reference", BeaconCommittee::Reference}},
          "beacon committee");
  }
  if (j.contains("assignment")) {
    const json& na = j.at("assignment");
    require_keys(na, {"m", "u", "k"}, "assignment");
    cfg.m = na.value("m", cfg.m);
    cfg.u = na.value("u", cfg.u);
    cfg.k = na.value("k", cfg.k);
  }
  if (j.contains("consensus")) {
    const json& isc = j.at("consensus");
    require_keys(isc,
                 {"algorithm", "view_timeout", "round_timeout", "truncate_depth",
                  "shard_pow_p"},
                 "consensus");
    if (isc.contains("algorithm"))
      cfg.isc = enum_from(isc.at("algorithm").get<std::string>(), kIscTable,
                          "consensus algorithm");
    cfg.view_timeout = isc.value("view_timeout", cfg.view_timeout);
    cfg.round_timeout = isc.value("round_timeout", cfg.round_timeout);
    cfg.truncate_depth = isc.value("truncate_depth", cfg.truncate_depth);
    cfg.shard_pow_p = isc.value("shard_pow_p", cfg.shard_pow_p);
  }
  if (j.contains("cross_shard")) {
    const json& cstp = j.at("cross_shard");
    require_keys(cstp, {"mode", "lock_ttl", "lambda"}, "cross_shard");
    if (cstp.contains("mode"))
      cfg.cstp = enum_from(cstp.at("mode").get<std::string>(), kCstpTable,
                           "cross-shard mode");
    cfg.lock_ttl = cstp.value("lock_ttl", cfg.lock_ttl);
    cfg.lambda = cstp.value("lambda", cfg.lambda);
  }
  if (j.contains("reconfiguration")) {
    const json& sr = j.at("reconfiguration");
    require_keys(sr, {"rule", "k", "fraction", "evict_k", "t_epoch"},
                 "reconfiguration");
    if (sr.contains("rule"))
      cfg.sr_rule.kind = enum_from(sr.at("rule").get<std::string>(), kSrTable,
                                   "reconfiguration rule");
    cfg.sr_rule.replace_k = sr.value("k", cfg.sr_rule.replace_k);
    cfg.sr_rule.fraction = sr.value("fraction", cfg.sr_rule.fraction);
    cfg.sr_rule.evict_k = sr.value("evict_k", cfg.sr_rule.evict_k);
    cfg.t_epoch = sr.value("t_epoch", cfg.t_epoch);
  }
  if (j.contains("incentives")) {
    const json& mm = j.at("incentives");
    require_keys(mm,
                 {"block_reward", "leader_multiplier", "deposit",
                  "slash_equivocation"},
                 "incentives");
    cfg.mm_policy.block_reward = mm.value("block_reward", 0.0);
    cfg.mm_policy.leader_multiplier = mm.value("leader_multiplier", 1.0);
    cfg.mm_policy.deposit = mm.value("deposit", 0.0);
    cfg.mm_policy.slash_equivocation = mm.value("slash_equivocation", 0.0);
  }
  if (j.contains("workload")) {
    const json& wl = j.at("workload");
    require_keys(wl,
                 {"tx_rate_per_shard", "inputs", "outputs", "locality_bias",
                  "genesis_outputs_per_shard"},
                 "workload");
    cfg.tx_rate_per_shard = wl.value("tx_rate_per_shard", cfg.tx_rate_per_shard);
    cfg.tx_inputs = wl.value("inputs", cfg.tx_inputs);
    cfg.tx_outputs = wl.value("outputs", cfg.tx_outputs);
    cfg.locality_bias = wl.value("locality_bias", cfg.locality_bias);
    cfg.genesis_outputs_per_shard =
        wl.value("genesis_outputs_per_shard", cfg.genesis_outputs_per_shard);
  }
  if (j.contains("run")) {
    const json& run = j.at("run");
    require_keys(run, {"nodes", "epochs", "seed"}, "run");
    cfg.nodes = run.value("nodes", cfg.nodes);
    cfg.epochs = run.value("epochs", cfg.epochs);
    cfg.seed = run.value("seed", cfg.seed);
  }
  return cfg;
}

std::vector<Violation> validate_config(const ScenarioConfig& cfg) {
  std::vector<Violation> out;
  auto flag = [&](std::string rule, std::string detail) {
    out.push_back({std::move(rule), std::move(detail)});
  };

  if (cfg.transaction_model != "utxo")
    flag("transaction-model", "only the utxo model is supported");
  if (cfg.m == 0) flag("shards", "m must be at least 1");
  if (cfg.rho < 0.0 || cfg.rho >= 0.5)
    flag("adversary-proportion", "rho must lie in [0, 1/2)");

  // Total proportion must sit inside its declared bucket.
  if (cfg.bucket == ProportionBucket::LtOneThird && cfg.rho >= 1.0 / 3.0)
    flag("proportion-bucket", "rho outside [0, 1/3)");
  if (cfg.bucket == ProportionBucket::OneThirdToHalf && cfg.rho < 1.0 / 3.0)
    flag("proportion-bucket", "rho below 1/3 contradicts the declared bucket");

  const bool partial_sync =
      cfg.message_model.kind != net::NetKind::Synchronous;
  switch (cfg.isc) {
    case IscAlgorithm::Pbft:
    case IscAlgorithm::Chained:
      // Partially synchronous BFT: u = 3f+1 and at most a third corrupted.
      if (cfg.u < 4 || (cfg.u - 1) % 3 != 0)
        flag("intra-shard-proportion", "partial-sync BFT needs u = 3f+1");
      if (cfg.bucket != ProportionBucket::LtOneThird)
        flag("intra-shard-proportion",
             "partial-sync BFT tolerates less than one third");
      break;
    case IscAlgorithm::SyncEcho:
      if (cfg.u < 3 || cfg.u % 2 == 0)
        flag("intra-shard-proportion", "synchronous BFT needs u = 2f+1");
      if (partial_sync)
        flag("message-model",
             "the echo protocol needs the synchronous transmission model");
      break;
    case IscAlgorithm::Pow:
      break;
  }

  if (cfg.instant()) {
    if (cfg.cstp == CstpMode::Relay)
      flag("cross-shard-mode", "relay processing is for eventual sharding only");
    if (cfg.k > cfg.u)
      flag("reconfiguration", "cannot replace more members than a committee has");
    const std::uint32_t quorum_gap =
        cfg.isc == IscAlgorithm::SyncEcho ? (cfg.u - 1) / 2 : (cfg.u - 1) / 3;
    if (cfg.k > quorum_gap)
      flag("reconfiguration",
           "swapping more than f members per epoch interrupts the quorum");
  } else {
    if (cfg.cstp != CstpMode::Relay)
      flag("cross-shard-mode",
           "eventual sharding has no committees to run a commit phase");
    if (cfg.lambda == 0) flag("lambda", "relay confirmation depth must be >= 1");
  }

  if (cfg.admission == AdmissionModel::Permissioned &&
      cfg.ns_method != selection::SelectionMethod::PermissionedRoster)
    flag("node-admission", "permissioned networks select members via the roster");
  if (cfg.admission == AdmissionModel::Permissionless &&
      cfg.ns_method == selection::SelectionMethod::PermissionedRoster)
    flag("node-admission", "permissionless networks cannot use a roster");

  if (cfg.instant() && cfg.message_model.kind != net::NetKind::Synchronous) {
    const Tick floor_ttl = 6 * cfg.message_model.delta + cfg.view_timeout;
    if (cfg.lock_ttl < floor_ttl)
      flag("lock-expiry",
           "lock ttl must exceed the commit round trip to avoid unlock races");
  }
  if (cfg.total_nodes() < cfg.m * cfg.u)
    flag("population", "not enough nodes to fill the committees");
  if (cfg.epochs == 0) flag("run", "at least one epoch required");
  if (cfg.tau > 0 && cfg.instant()) {
    auto check = reconfig::corruption_safety_check(cfg.tau, cfg.t_epoch);
    if (!check.ok)
      flag("corruption-time",
           "tau must strictly exceed twice the epoch length");
  }
  return out;
}

// --- taxonomy enumeration ---------------------------------------------------------

std::string Combination::label() const {
  return message_model + "/" + admission + "/" + corruption_timing + "/" +
         corruption_speed + "/" + proportion + "/" + transaction_model + "/" +
         intra_shard_consensus;
}

std::vector<Combination> enumerate_combinations(const EnumerationFilter& filter) {
  const std::vector<std::string> messages{"synchronous", "partially-synchronous",
                                          "asynchronous"};
  // Node admission with the "others" leaf excluded.
  const std::vector<std::string> admissions{
      "permissionless-pow", "permissionless-pos", "permissioned-ca"};
  // The practical corruption setting: adaptive and mild.
  const std::vector<std::string> timings{"adaptive"};
  const std::vector<std::string> speeds{"mild"};
  // Total and intra-shard proportions are linked: a third-or-more
  // adversary rules out the u = 3f+1 committee model.
  const std::vector<std::string> proportions{
      "total<1/3,u=3f+1", "total<1/3,u=2f+1", "total in [1/3,1/2),u=2f+1"};
  // Transaction models minus "others".
  const std::vector<std::string> tx_models{"utxo", "account"};
  // Intra-shard consensus minus "others": the two BFT leaves and the two
  // weak-consistency chain leaves.
  std::vector<std::string> consensus{"bft-partial-sync", "bft-sync", "weak-pow",
                                     "weak-pos"};
  if (filter.bft_only) consensus = {"bft-partial-sync", "bft-sync"};

  std::vector<Combination> out;
  for (const auto& msg : messages) {
    if (filter.message_model && msg != *filter.message_model) continue;
    for (const auto& adm : admissions)
      for (const auto& timing : timings)
        for (const auto& speed : speeds)
          for (const auto& prop : proportions)
            for (const auto& tx : tx_models)
              for (const auto& isc : consensus)
                out.push_back({msg, adm, timing, speed, prop, tx, isc});
  }
  return out;
}

// --- metrics rendering ---------------------------------------------------------------

std::string MetricsReport::render() const {
  std::string out;
  char line[256];
  auto add = [&](const char* fmt, auto... args) {
    std::snprintf(line, sizeof(line), fmt, args...);
    out += line;
  };
  add("metrics-report v1\n");
  add("config_digest %s\n", config_digest.c_str());
  add("seed %llu\n", static_cast<unsigned long long>(seed));
  add("epochs %u\n", epochs);
  add("total_ticks %lld\n", static_cast<long long>(total_ticks));
  add("t_initial %lld\n", static_cast<long long>(t_initial));
  add("committed_total %llu\n", static_cast<unsigned long long>(committed_total));
  add("aborted_total %llu\n", static_cast<unsigned long long>(aborted_total));
  add("unresolved_total %llu\n",
      static_cast<unsigned long long>(unresolved_total));
  add("throughput_per_kilotick %.6f\n", throughput_per_kilotick);
  add("latency_count %llu\n", static_cast<unsigned long long>(latency_count));
  add("latency_mean %.6f\n", latency_mean);
  add("latency_p50 %lld\n", static_cast<long long>(latency_p50));
  add("latency_p95 %lld\n", static_cast<long long>(latency_p95));
  add("latency_max %lld\n", static_cast<long long>(latency_max));
  add("responsiveness %.6f\n", responsiveness);
  add("cross_shard_fraction %.6f\n", cross_shard_fraction);
  add("epoch_failure_events %u\n", epoch_failure_events);
  add("chain_quality %.6f\n", chain_quality);
  add("adversary_block_fraction %.6f\n", adversary_block_fraction);
  add("bandwidth_per_node_per_kilotick %.6f\n", bandwidth_per_node_per_kilotick);
  add("reconfig_downtime %lld\n", static_cast<long long>(reconfig_downtime));
  add("selection_view_changes %llu\n",
      static_cast<unsigned long long>(selection_view_changes));
  for (std::size_t s = 0; s < shards.size(); ++s) {
    add("shard %zu committed %llu aborted %llu entries %llu blocks %llu\n", s,
        static_cast<unsigned long long>(shards[s].committed_txs),
        static_cast<unsigned long long>(shards[s].aborted_txs),
        static_cast<unsigned long long>(shards[s].committed_entries),
        static_cast<unsigned long long>(shards[s].blocks));
  }
  for (const auto& v : violations) out += "violation " + v + "\n";
  for (const auto& e : events) out += "event " + e + "\n";
  return out;
}

std::string MetricsReport::csv_header() {
  return "seed,epochs,ticks,committed,aborted,unresolved,throughput,"
         "latency_mean,latency_p95,cross_fraction,epoch_failures,"
         "chain_quality,violations";
}

std::string MetricsReport::csv_row() const {
  char line[320];
  std::snprintf(line, sizeof(line),
                "%llu,%u,%lld,%llu,%llu,%llu,%.6f,%.6f,%lld,%.6f,%u,%.6f,%zu",
                static_cast<unsigned long long>(seed), epochs,
                static_cast<long long>(total_ticks),
                static_cast<unsigned long long>(committed_total),
                static_cast<unsigned long long>(aborted_total),
                static_cast<unsigned long long>(unresolved_total),
                throughput_per_kilotick, latency_mean,
                static_cast<long long>(latency_p95), cross_shard_fraction,
                epoch_failure_events, chain_quality, violations.size());
  return line;
}

std::string sweep_csv(const std::vector<SweepCell>& cells) {
  std::string out = "axis,value,ok," + MetricsReport::csv_header() + "\n";
  for (const auto& cell : cells) {
    out += cell.axis + "," + cell.value + "," + (cell.ok ? "1" : "0") + "," +
           cell.report.csv_row() + "\n";
  }
  return out;
}

}  // namespace shardsim::scenario

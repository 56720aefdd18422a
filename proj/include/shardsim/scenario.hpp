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

#include <string>

#include "shardsim/adversary.hpp"
#include "shardsim/beacon.hpp"
#include "shardsim/cluster.hpp"
#include "shardsim/incentives.hpp"
#include "shardsim/node_selection.hpp"
#include "shardsim/reconfig.hpp"

namespace shardsim::scenario {

enum class ProportionBucket : std::uint8_t { LtOneThird, OneThirdToHalf };
enum class AdmissionModel : std::uint8_t { Permissionless, Permissioned };
enum class IscAlgorithm : std::uint8_t { Pbft, Chained, SyncEcho, Pow };
enum class CstpMode : std::uint8_t {
  Client2pc,
  Shard2pc,
  Output2pc,
  Split,
  Relay,
};
enum class BeaconCommittee : std::uint8_t { Shard0, Reference };

const char* to_string(ProportionBucket b);
const char* to_string(AdmissionModel a);
const char* to_string(IscAlgorithm a);
const char* to_string(CstpMode m);

/// One leaf per taxonomy tree plus per-component choices; the whole
/// composition is driven from here.  Defaults give the classic
/// partially-synchronous permissionless-PoW instantiation.
struct ScenarioConfig {
  // system models
  net::NetModel message_model = net::NetModel::partial_sync_b(3, 0);
  AdmissionModel admission = AdmissionModel::Permissionless;
  adversary::CorruptionTiming corruption_timing =
      adversary::CorruptionTiming::Adaptive;
  Tick tau = 6000;  // mild corruption delay; 0 = immediate
  double rho = 0.0;
  ProportionBucket bucket = ProportionBucket::LtOneThird;
  std::set<adversary::Strategy> behaviors;
  std::string transaction_model = "utxo";

  // component choices
  selection::SelectionMethod ns_method =
      selection::SelectionMethod::PowUnderlyingChain;
  double ns_pow_p = 0.05;
  std::uint32_t k_threshold = 2;
  beacon::VariantKind er_variant = beacon::VariantKind::ThresholdShare;
  BeaconCommittee er_committee = BeaconCommittee::Shard0;
  std::uint32_t m = 2;  // shards
  std::uint32_t u = 4;  // committee size
  std::uint32_t k = 1;  // replaced members per shard per epoch
  IscAlgorithm isc = IscAlgorithm::Pbft;
  Tick view_timeout = 60;
  Tick round_timeout = 40;
  std::uint32_t truncate_depth = 6;  // weak-consistency stable prefix
  double shard_pow_p = 0.15;         // weak-mode per-miner success rate
  CstpMode cstp = CstpMode::Shard2pc;
  Tick lock_ttl = 400;
  std::uint32_t lambda = 6;
  reconfig::ReconfigRule sr_rule;
  Tick t_epoch = 2500;
  incentives::RewardPolicy mm_policy;

  // run controls
  std::uint32_t nodes = 0;  // 0 = derived: m*u plus a mining pool
  std::uint32_t epochs = 2;
  std::uint64_t seed = 1;
  double tx_rate_per_shard = 0.02;  // Poisson arrivals per tick per shard
  std::uint32_t tx_inputs = 2;
  std::uint32_t tx_outputs = 2;
  double locality_bias = 0.0;  // probability a tx stays in one shard
  std::uint32_t genesis_outputs_per_shard = 64;

  std::uint32_t total_nodes() const {
    return nodes != 0 ? nodes : m * u + std::max(2 * m * k, 8u);
  }
  /// Honest-fraction target the intra-shard model implies.
  double q0() const {
    return isc == IscAlgorithm::SyncEcho ? 0.5 : 2.0 / 3.0;
  }
  bool instant() const { return isc != IscAlgorithm::Pow; }
};

/// Fail-closed JSON bridge: unknown keys are errors, enums must match the
/// published vocabulary exactly.
std::string to_json(const ScenarioConfig& cfg);
ScenarioConfig config_from_json(const std::string& json_text);

struct Violation {
  std::string rule;
  std::string detail;
};

/// Checks every cross-model constraint; returns all conflicts by name
/// rather than throwing.
std::vector<Violation> validate_config(const ScenarioConfig& cfg);

// --- taxonomy enumeration -------------------------------------------------------

struct Combination {
  std::string message_model;
  std::string admission;
  std::string corruption_timing;
  std::string corruption_speed;
  std::string proportion;  // constrained (total, intra-shard) pair
  std::string transaction_model;
  std::string intra_shard_consensus;

  std::string label() const;
};

struct EnumerationFilter {
  std::optional<std::string> message_model;
  bool bft_only = false;  // restrict the consensus tree to its BFT leaves
};

/// Cartesian product of the taxonomy leaves with the practical corruption
/// setting fixed, the "others" leaves excluded, and the total/intra-shard
/// proportion constraint applied; 216 combinations in full.
std::vector<Combination> enumerate_combinations(
    const EnumerationFilter& filter = {});

// --- metrics -----------------------------------------------------------------------

struct ShardMetrics {
  std::uint64_t committed_txs = 0;
  std::uint64_t aborted_txs = 0;
  std::uint64_t committed_entries = 0;
  std::uint64_t blocks = 0;  // weak mode
};

struct MetricsReport {
  std::string config_digest;
  std::uint64_t seed = 0;
  std::uint32_t epochs = 0;
  Tick total_ticks = 0;
  Tick t_initial = 0;

  std::vector<ShardMetrics> shards;
  std::uint64_t committed_total = 0;
  std::uint64_t aborted_total = 0;
  std::uint64_t unresolved_total = 0;
  double throughput_per_kilotick = 0.0;

  std::uint64_t latency_count = 0;
  double latency_mean = 0.0;
  Tick latency_p50 = 0;
  Tick latency_p95 = 0;
  Tick latency_max = 0;  // the observed T_liveness
  double responsiveness = 0.0;  // latency against actual delay, not the bound

  double cross_shard_fraction = 0.0;
  std::uint32_t epoch_failure_events = 0;
  double chain_quality = 1.0;  // honest block share (weak mode)
  double adversary_block_fraction = 0.0;
  double bandwidth_per_node_per_kilotick = 0.0;
  Tick reconfig_downtime = 0;
  std::uint64_t selection_view_changes = 0;

  std::vector<std::string> violations;
  std::vector<std::string> events;  // chronological JSON-lines payload

  /// Canonical fixed-format rendering; byte-identical across replays of
  /// one (config, seed).
  std::string render() const;
  std::string csv_row() const;
  static std::string csv_header();
};

struct RunResult {
  bool ok = false;
  MetricsReport report;
  std::string failure;          // invariant breach description
  std::string reproducer_json;  // config + seed + tick bundle
};

/// Executes the composed system: member-list confirmation per epoch
/// (selection, randomness, assignment, reconfiguration) interleaved with
/// transaction processing (intra-shard consensus plus cross-shard
/// commits), all on one deterministic event loop.
RunResult run_scenario(const ScenarioConfig& cfg);

struct SweepCell {
  std::string axis;
  std::string value;
  bool ok = false;
  MetricsReport report;
  std::string failure;
};

/// One run per value over a named axis ("m", "rho", "epochs", "u",
/// "tx_rate", "seed"); failures are recorded and the sweep continues.
std::vector<SweepCell> sweep(const ScenarioConfig& base, const std::string& axis,
                             const std::vector<std::string>& values);

std::string sweep_csv(const std::vector<SweepCell>& cells);

}  // namespace shardsim::scenario

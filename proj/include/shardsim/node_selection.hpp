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
#include <vector>

#include "shardsim/common.hpp"

namespace shardsim::selection {

/// Mining is simulated as Bernoulli trials with per-round success
/// probability p; the difficulty D = p * 2^lambda is carried for
/// reporting.  Solution evidence is an authenticated tag over
/// (puzzle, round, pk, nonce) rather than a ground hash, so verification
/// is O(1) and statistics are exact.
struct PowParams {
  double p = 0.0;
  std::uint32_t lambda_bits = 61;

  double difficulty() const {
    return p * std::exp2(static_cast<double>(lambda_bits));
  }
};

struct Solution {
  NodeId node = kNoNode;
  Digest pubkey;
  Digest puzzle;
  std::uint64_t round = 0;
  std::uint64_t nonce = 0;
  Signature evidence;

  Digest binding() const;
};

/// One mining attempt; succeeds with probability p.
std::optional<Solution> mine_round(NodeId node, const Digest& puzzle,
                                   const PowParams& params, std::uint64_t round,
                                   const Keyring& keys, Rng& rng);

/// Re-verification: evidence tag valid and bound to the expected puzzle.
/// Stale-puzzle solutions fail here.
bool verify_solution(const Solution& sol, const Digest& expected_puzzle,
                     const Keyring& keys);

enum class SelectionMethod : std::uint8_t {
  PowUnderlyingChain,
  PowReferenceCommittee,
  PosLottery,
  PermissionedRoster,
};

const char* to_string(SelectionMethod m);

struct Seat {
  NodeId node = kNoNode;
  Digest pubkey;
  std::uint64_t solution_round = 0;
};

struct SelectionOutcome {
  SelectionMethod method = SelectionMethod::PermissionedRoster;
  Epoch epoch = 0;
  std::vector<Seat> snodes;  // ordered; no duplicate (node, pubkey) seats
  bool quota_met = true;
  bool epoch_stalled = false;       // reference committee never converged
  std::uint32_t view_changes = 0;   // reference-committee vote rounds burnt
  double adversary_block_fraction = 0.0;  // underlying-chain runs
};

/// Fairness per the (k_f, omega_d) decline-degree measure: Q_f is the
/// honest fraction among the selected seats and omega_d solves
/// Q_f = (1 - omega_d) * beta.
struct FairnessReport {
  double beta = 0.0;
  double q_f = 0.0;
  double omega_d = 0.0;
  std::uint32_t k_f = 0;
  double mu_f = 0.0;
};

FairnessReport measure_fairness(const SelectionOutcome& outcome,
                                const std::set<NodeId>& honest, double beta,
                                std::uint32_t k_f);

// --- underlying chain -------------------------------------------------------

struct MinerPool {
  std::vector<NodeId> honest;
  std::vector<NodeId> adversary;
};

struct UnderlyingChainParams {
  PowParams pow;
  std::uint64_t duration_rounds = 0;
  std::uint32_t quota = 0;  // k * m seats
  bool selfish_mining = false;
  /// Fraction of honest mining power that works on the adversary branch
  /// during a tie race (the classic gamma knob); 1.0 is the worst case.
  double gamma = 1.0;
};

/// Longest-chain block production with an optional selfish-mining
/// adversary; snodes are the producers of the last `quota` blocks on the
/// winning chain.
SelectionOutcome select_underlying_chain(const MinerPool& miners,
                                         const Digest& genesis_puzzle,
                                         const UnderlyingChainParams& params,
                                         const Keyring& keys, Rng& rng);

// --- reference committee ----------------------------------------------------

struct ReferenceCommitteeParams {
  PowParams pow;
  std::uint32_t quota = 0;          // k * m seats
  std::uint32_t k_threshold = 2;    // threshold-vote tolerance k_T
  Tick delta = 1;                   // network delay bound for submissions
  Tick adversary_head_start = 0;    // puzzle-advantage ticks
  std::uint64_t max_rounds = 100000;
  std::uint32_t max_views = 16;     // vote rounds before declaring a stall
  bool malicious_leader_censors = false;
  std::uint32_t censor_amount = 0;  // 0 = exactly k_threshold
};

struct ReferenceCommittee {
  std::vector<NodeId> members;
  std::set<NodeId> corrupted;
  std::uint32_t leader_index = 0;
};

/// Mining against a fresh puzzle plus leader-proposed list confirmation
/// under the threshold-vote rule: an honest member votes for a proposed
/// list iff it differs from its own view by at most k_T entries.
SelectionOutcome select_reference_committee(const ReferenceCommittee& committee,
                                            const MinerPool& miners,
                                            const Digest& puzzle,
                                            const ReferenceCommitteeParams& params,
                                            const Keyring& keys, Rng& rng);

/// Entry-difference count between two equal-quota lists: the number of
/// seats in `proposed` whose node does not appear in `local`.
std::uint32_t list_difference(const std::vector<Seat>& proposed,
                              const std::vector<Seat>& local);

// --- permissioned -----------------------------------------------------------

struct RosterEntry {
  NodeId node = kNoNode;
  Digest pubkey;
};

/// CA pass-through.  Duplicate keys are rejected; an empty roster reports
/// quota-not-met.
SelectionOutcome select_permissioned(const std::vector<RosterEntry>& roster,
                                     Epoch epoch);

// --- pos stub ----------------------------------------------------------------

/// Keyed-hash lottery over stakes; a minimal stand-in, not a full
/// stake-chain simulation.
SelectionOutcome select_pos_lottery(const std::vector<std::pair<NodeId, std::uint64_t>>& stakes,
                                    const Digest& xi, std::uint32_t quota,
                                    const Keyring& keys, Epoch epoch);

}  // namespace shardsim::selection

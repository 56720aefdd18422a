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

#include <doctest.h>

#include <cmath>

#include "shardsim/node_selection.hpp"

using namespace shardsim;
using namespace shardsim::selection;

namespace {

// Closed-form selfish-mining revenue (adversary block share) for power
// alpha and tie-race share gamma; the independent oracle the simulation
// is checked against.
double selfish_revenue(double a, double g) {
  const double num =
      a * (1 - a) * (1 - a) * (4 * a + g * (1 - 2 * a)) - a * a * a;
  const double den = 1 - a * (1 + (2 - a) * a);
  return num / den;
}

MinerPool pool(std::uint32_t honest, std::uint32_t adversarial) {
  MinerPool p;
  for (std::uint32_t i = 0; i < honest; ++i) p.honest.push_back(i);
  for (std::uint32_t i = 0; i < adversarial; ++i)
    p.adversary.push_back(1000 + i);
  return p;
}

Keyring keys_for(const MinerPool& p) {
  Keyring keys(404);
  for (NodeId n : p.honest) keys.register_node(n);
  for (NodeId n : p.adversary) keys.register_node(n);
  return keys;
}

}  // namespace

TEST_SUITE("selection") {

TEST_CASE("zero success probability never mines") {
  Keyring keys(1);
  keys.register_node(0);
  Rng rng(2);
  PowParams params;
  params.p = 0.0;
  for (int round = 0; round < 1000; ++round)
    CHECK_FALSE(mine_round(0, sha256("puzzle"), params, round, keys, rng));
}

TEST_CASE("mining statistics match the binomial expectation") {
  // 1000 miners at p = 0.001: one expected success per round; the
  // empirical mean over 1e4 rounds must sit in [0.97, 1.03].
  Keyring keys(3);
  for (NodeId n = 0; n < 1000; ++n) keys.register_node(n);
  Rng rng(2026);
  PowParams params;
  params.p = 0.001;
  const Digest puzzle = sha256("epoch-puzzle");
  std::uint64_t successes = 0;
  const int rounds = 10000;
  for (int r = 0; r < rounds; ++r)
    for (NodeId n = 0; n < 1000; ++n)
      if (mine_round(n, puzzle, params, r, keys, rng)) ++successes;
  const double mean = static_cast<double>(successes) / rounds;
  CHECK(mean > 0.97);
  CHECK(mean < 1.03);
}

TEST_CASE("minted solutions re-verify; stale or forged ones do not") {
  Keyring keys(4);
  keys.register_node(5);
  keys.register_node(6);
  Rng rng(1);
  PowParams params;
  params.p = 1.0;
  const Digest puzzle = sha256("fresh");
  auto sol = mine_round(5, puzzle, params, 3, keys, rng);
  REQUIRE(sol.has_value());
  CHECK(verify_solution(*sol, puzzle, keys));
  // stale puzzle
  CHECK_FALSE(verify_solution(*sol, sha256("stale"), keys));
  // forged evidence
  Solution forged = *sol;
  forged.node = 6;
  forged.pubkey = keys.public_key(6);
  CHECK_FALSE(verify_solution(forged, puzzle, keys));
}

TEST_CASE("an honest-only chain has zero adversary blocks") {
  MinerPool p = pool(30, 0);
  Keyring keys = keys_for(p);
  Rng rng(7);
  UnderlyingChainParams params;
  params.pow.p = 0.01;
  params.duration_rounds = 5000;
  params.quota = 16;
  params.selfish_mining = false;
  auto out = select_underlying_chain(p, sha256("g"), params, keys, rng);
  CHECK(out.quota_met);
  CHECK(out.adversary_block_fraction == 0.0);
  CHECK(out.snodes.size() == 16);
}

TEST_CASE("honest mining keeps the adversary near its power share") {
  MinerPool p = pool(30, 10);  // t = 1/4
  Keyring keys = keys_for(p);
  Rng rng(8);
  UnderlyingChainParams params;
  params.pow.p = 0.004;
  params.duration_rounds = 200000;
  params.quota = 64;
  params.selfish_mining = false;
  auto out = select_underlying_chain(p, sha256("g"), params, keys, rng);
  CHECK(std::fabs(out.adversary_block_fraction - 0.25) < 0.02);
}

TEST_CASE("selfish mining at a quarter of the power approaches the 1/3 bound") {
  MinerPool p = pool(30, 10);  // t = 1/4
  Keyring keys = keys_for(p);
  Rng rng(9);
  UnderlyingChainParams params;
  params.pow.p = 0.004;
  params.duration_rounds = 300000;
  params.quota = 64;
  params.selfish_mining = true;
  params.gamma = 1.0;
  auto out = select_underlying_chain(p, sha256("g"), params, keys, rng);
  // Against the closed-form oracle, and under the chain-quality bound
  // t/(n-t) = 1/3.
  const double expected = selfish_revenue(0.25, 1.0);
  CHECK(std::fabs(out.adversary_block_fraction - expected) < 0.02);
  CHECK(out.adversary_block_fraction > 0.25);
  CHECK(out.adversary_block_fraction <= 1.0 / 3.0 + 0.02);
}

TEST_CASE("selfish mining at a third stays under the 1/2 bound") {
  MinerPool p = pool(20, 10);  // t = 1/3
  Keyring keys = keys_for(p);
  Rng rng(10);
  UnderlyingChainParams params;
  params.pow.p = 0.005;
  params.duration_rounds = 300000;
  params.quota = 64;
  params.selfish_mining = true;
  params.gamma = 1.0;
  auto out = select_underlying_chain(p, sha256("g"), params, keys, rng);
  const double expected = selfish_revenue(1.0 / 3.0, 1.0);
  CHECK(std::fabs(out.adversary_block_fraction - expected) < 0.02);
  CHECK(out.adversary_block_fraction <= 0.5 + 0.02);
}

TEST_CASE("fairness report solves the decline equation") {
  SelectionOutcome outcome;
  std::set<NodeId> honest;
  for (NodeId i = 0; i < 8; ++i) honest.insert(i);
  for (NodeId i = 0; i < 12; ++i) {
    Seat s;
    s.node = i;  // nodes 0..7 honest, 8..11 not
    outcome.snodes.push_back(s);
  }
  auto report = measure_fairness(outcome, honest, 0.75, 4);
  CHECK(report.q_f == doctest::Approx(2.0 / 3.0));
  CHECK(report.omega_d == doctest::Approx(1.0 / 9.0));
}

TEST_CASE("an all-honest selection has non-positive decline") {
  SelectionOutcome outcome;
  std::set<NodeId> honest;
  for (NodeId i = 0; i < 6; ++i) {
    honest.insert(i);
    Seat s;
    s.node = i;
    outcome.snodes.push_back(s);
  }
  auto report = measure_fairness(outcome, honest, 0.75, 4);
  CHECK(report.omega_d <= 0.0);
}

TEST_CASE("selfish selection keeps the honest share above the bound") {
  MinerPool p = pool(30, 10);
  Keyring keys = keys_for(p);
  Rng rng(11);
  UnderlyingChainParams params;
  params.pow.p = 0.004;
  params.duration_rounds = 300000;
  params.quota = 200;
  params.selfish_mining = true;
  auto out = select_underlying_chain(p, sha256("g"), params, keys, rng);
  std::set<NodeId> honest(p.honest.begin(), p.honest.end());
  auto report = measure_fairness(out, honest, 0.75, 10);
  // 1 - t/(n-t) = 2/3 at t = 1/4, within sampling tolerance.
  CHECK(report.q_f >= 2.0 / 3.0 - 0.05);
}

TEST_CASE("list difference counts substitutions") {
  auto seat = [](NodeId n) {
    Seat s;
    s.node = n;
    Sha256 h;
    h.update_u32(n);
    s.pubkey = h.finish();
    return s;
  };
  std::vector<Seat> local{seat(1), seat(2), seat(3), seat(4)};
  std::vector<Seat> same = local;
  CHECK(list_difference(same, local) == 0);
  std::vector<Seat> three_swapped{seat(1), seat(9), seat(8), seat(7)};
  CHECK(list_difference(three_swapped, local) == 3);
  // The threshold-vote rule at k_T = 2: an honest member refuses this list.
  const std::uint32_t k_t = 2;
  CHECK(list_difference(three_swapped, local) > k_t);
  CHECK(list_difference(same, local) <= k_t);
}

TEST_CASE("the reference committee confirms a list under honest leadership") {
  MinerPool p = pool(24, 8);
  Keyring keys = keys_for(p);
  ReferenceCommittee committee;
  for (NodeId i = 0; i < 7; ++i) {
    committee.members.push_back(2000 + i);
    keys.register_node(2000 + i);
  }
  Rng rng(12);
  ReferenceCommitteeParams params;
  params.pow.p = 0.02;
  params.quota = 12;
  params.k_threshold = 2;
  params.delta = 4;
  auto out = select_reference_committee(committee, p, sha256("xi"), params,
                                        keys, rng);
  CHECK(out.quota_met);
  CHECK(out.snodes.size() == 12);
  CHECK_FALSE(out.epoch_stalled);
}

TEST_CASE("threshold vote rejects lists censored beyond k_T") {
  MinerPool p = pool(24, 8);
  Keyring keys = keys_for(p);
  ReferenceCommittee committee;
  for (NodeId i = 0; i < 7; ++i) {
    committee.members.push_back(2000 + i);
    keys.register_node(2000 + i);
  }
  committee.corrupted = {2000, 2001};  // leader included
  Rng rng(13);
  ReferenceCommitteeParams params;
  params.pow.p = 0.02;
  params.quota = 12;
  params.k_threshold = 2;
  params.delta = 1;  // identical honest views; censorship alone differs
  params.malicious_leader_censors = true;
  params.censor_amount = 3;  // k_T + 1: overreach
  auto out = select_reference_committee(committee, p, sha256("xi"), params,
                                        keys, rng);
  // The censored proposal fails; an honest leader eventually commits.
  CHECK(out.view_changes >= 1);
  if (out.quota_met) {
    CHECK_FALSE(out.epoch_stalled);
  }
}

TEST_CASE("censoring within the threshold passes but is bounded") {
  MinerPool p = pool(24, 8);
  Keyring keys = keys_for(p);
  ReferenceCommittee committee;
  for (NodeId i = 0; i < 7; ++i) {
    committee.members.push_back(2000 + i);
    keys.register_node(2000 + i);
  }
  committee.corrupted = {2000, 2001};
  Rng rng(14);
  ReferenceCommitteeParams params;
  params.pow.p = 0.02;
  params.quota = 12;
  params.k_threshold = 2;
  params.delta = 1;
  params.malicious_leader_censors = true;  // swaps exactly k_T
  auto out = select_reference_committee(committee, p, sha256("xi"), params,
                                        keys, rng);
  REQUIRE(out.quota_met);
  CHECK(out.view_changes == 0);
}

TEST_CASE("the adversary's head start degrades fairness monotonically") {
  // Monte-Carlo fairness oracle across increasing puzzle head starts.
  const double beta = 0.75;
  std::vector<double> omegas;
  for (Tick head_start : {0, 5, 10}) {
    double omega_sum = 0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
      MinerPool p = pool(24, 8);
      Keyring keys = keys_for(p);
      ReferenceCommittee committee;
      for (NodeId i = 0; i < 4; ++i) {
        committee.members.push_back(2000 + i);
        keys.register_node(2000 + i);
      }
      Rng rng(static_cast<std::uint64_t>(t) * 7919 + head_start);
      ReferenceCommitteeParams params;
      params.pow.p = 0.05;
      params.quota = 12;
      params.k_threshold = 2;
      params.delta = 3;
      params.adversary_head_start = head_start;
      auto out = select_reference_committee(committee, p, sha256("xi"), params,
                                            keys, rng);
      REQUIRE(out.quota_met);
      std::set<NodeId> honest(p.honest.begin(), p.honest.end());
      omega_sum += measure_fairness(out, honest, beta, 4).omega_d;
    }
    omegas.push_back(omega_sum / 400);
  }
  CHECK(omegas[1] > omegas[0] - 0.01);
  CHECK(omegas[2] > omegas[1] - 0.01);
  CHECK(omegas[2] > 0.0);  // a real head start shows a real decline
}

TEST_CASE("permissioned rosters pass through") {
  std::vector<RosterEntry> roster;
  for (NodeId i = 0; i < 8; ++i) {
    RosterEntry e;
    e.node = i;
    Sha256 h;
    h.update_u32(i);
    e.pubkey = h.finish();
    roster.push_back(e);
  }
  auto out = select_permissioned(roster, 3);
  CHECK(out.quota_met);
  CHECK(out.snodes.size() == 8);

  CHECK_FALSE(select_permissioned({}, 3).quota_met);

  roster.push_back(roster.front());  // duplicate key
  CHECK_THROWS_AS(select_permissioned(roster, 3), std::invalid_argument);
}

TEST_CASE("the stake lottery weights by stake") {
  Keyring keys(15);
  keys.register_node(1);
  keys.register_node(2);
  std::vector<std::pair<NodeId, std::uint64_t>> stakes{{1, 90}, {2, 10}};
  int rich = 0;
  const int quota = 50;
  for (int round = 0; round < 40; ++round) {
    Sha256 h;
    h.update_u32(round);
    auto out = select_pos_lottery(stakes, h.finish(), quota, keys, 1);
    REQUIRE(out.quota_met);
    for (const auto& s : out.snodes)
      if (s.node == 1) ++rich;
  }
  const double share = static_cast<double>(rich) / (40.0 * quota);
  CHECK(share > 0.8);
  CHECK(share < 0.98);
}

}  // TEST_SUITE

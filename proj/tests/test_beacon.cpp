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

#include "shardsim/beacon.hpp"

using namespace shardsim;
using namespace shardsim::beacon;

namespace {

std::vector<NodeId> committee(std::uint32_t u) {
  std::vector<NodeId> out(u);
  for (std::uint32_t i = 0; i < u; ++i) out[i] = i;
  return out;
}

}  // namespace

TEST_SUITE("beacon") {

TEST_CASE("field arithmetic round-trips") {
  using namespace field;
  const std::uint64_t a = 123456789123456789ull % kFieldPrime;
  CHECK(mul(a, inv(a)) == 1);
  CHECK(add(kFieldPrime - 1, 1) == 0);
  CHECK(sub(0, 1) == kFieldPrime - 1);
  // f(x) = 7 + 3x + 2x^2 evaluated then interpolated back at zero.
  std::vector<std::uint64_t> coeffs{7, 3, 2};
  std::vector<std::pair<std::uint64_t, std::uint64_t>> pts;
  for (std::uint64_t x = 1; x <= 3; ++x) pts.emplace_back(x, eval(coeffs, x));
  CHECK(interpolate_at_zero(pts) == 7);
}

TEST_CASE("both variants agree under no faults and verify") {
  Rng rng(5);
  for (auto variant : {BeaconVariant::make_commit_reveal(),
                       BeaconVariant::make_threshold_share(3)}) {
    auto out = run_beacon(committee(7), 1, variant, HonestStrategy{}, rng);
    REQUIRE(out.ok);
    CHECK_FALSE(out.randomness.xi.is_zero());
    CHECK(verify_beacon(out.randomness.transcript));
    CHECK(out.randomness.transcript.xi == out.randomness.xi);
  }
}

TEST_CASE("withheld secrets are reconstructed from threshold shares") {
  Rng rng(6);
  WithholdShares strategy;
  strategy.members = {0};
  auto out = run_beacon(committee(7), 2, BeaconVariant::make_threshold_share(3),
                        strategy, rng);
  REQUIRE(out.ok);
  const auto& tr =
      std::get<ThresholdShareTranscript>(out.randomness.transcript.body);
  REQUIRE(tr.dealings.count(0) == 1);
  CHECK(tr.dealings.at(0).reconstructed);
  CHECK(tr.dealings.at(0).included);
  CHECK_FALSE(tr.flagged);
  CHECK(verify_beacon(out.randomness.transcript));
}

TEST_CASE("reconstruction succeeds whenever honest members reach the threshold") {
  Rng rng(7);
  // u = 7, threshold 3: up to 4 withholding members still leave 3 shares.
  for (std::uint32_t bad = 1; bad <= 4; ++bad) {
    WithholdShares strategy;
    for (std::uint32_t i = 0; i < bad; ++i) strategy.members.insert(i);
    auto out = run_beacon(committee(7), bad,
                          BeaconVariant::make_threshold_share(3), strategy, rng);
    REQUIRE(out.ok);
    const auto& tr =
        std::get<ThresholdShareTranscript>(out.randomness.transcript.body);
    for (std::uint32_t i = 0; i < bad; ++i) CHECK(tr.dealings.at(i).included);
    CHECK(verify_beacon(out.randomness.transcript));
  }
}

TEST_CASE("too few shares exclude the dealer with a flag") {
  Rng rng(8);
  WithholdShares strategy;
  strategy.members = {0, 1, 2, 3, 4};  // only 2 honest shares < threshold 3
  auto out = run_beacon(committee(7), 3, BeaconVariant::make_threshold_share(3),
                        strategy, rng);
  REQUIRE(out.ok);
  const auto& tr =
      std::get<ThresholdShareTranscript>(out.randomness.transcript.body);
  CHECK(tr.flagged);
  CHECK_FALSE(tr.dealings.at(0).included);
  CHECK(verify_beacon(out.randomness.transcript));
}

TEST_CASE("an all-withholding commit-reveal run fails") {
  Rng rng(9);
  WithholdReveal strategy;
  for (NodeId n : committee(4)) strategy.members.insert(n);
  auto out =
      run_beacon(committee(4), 1, BeaconVariant::make_commit_reveal(), strategy, rng);
  CHECK_FALSE(out.ok);
  CHECK(out.error == BeaconError::NoReveals);
}

TEST_CASE("tampered or truncated transcripts fail verification") {
  Rng rng(10);
  auto out = run_beacon(committee(5), 4, BeaconVariant::make_threshold_share(2),
                        HonestStrategy{}, rng);
  REQUIRE(out.ok);
  auto tampered = out.randomness.transcript;
  auto& ts = std::get<ThresholdShareTranscript>(tampered.body);
  ts.dealings.at(2).revealed_coeffs[0] ^= 1;  // flip one share byte
  CHECK_FALSE(verify_beacon(tampered));

  auto truncated = out.randomness.transcript;
  auto& ts2 = std::get<ThresholdShareTranscript>(truncated.body);
  ts2.dealings.erase(4);
  CHECK_FALSE(verify_beacon(truncated));

  auto cr = run_beacon(committee(5), 4, BeaconVariant::make_commit_reveal(),
                       HonestStrategy{}, rng);
  REQUIRE(cr.ok);
  auto bad = cr.randomness.transcript;
  auto& crt = std::get<CommitRevealTranscript>(bad.body);
  crt.reveals.at(1).value[7] ^= 0x10;
  CHECK_FALSE(verify_beacon(bad));
}

TEST_CASE("the last revealer skews parity by about 25 points") {
  // Exact strategy distribution: withholding flips the outcome with
  // probability 1/2, so the favorable parity lands 3/4 of the time.
  Rng rng(11);
  const int trials = 10000;
  int favorable = 0;
  for (int t = 0; t < trials; ++t) {
    LastRevealerBias strategy;
    strategy.member = 4;
    auto out = run_beacon(committee(5), static_cast<Epoch>(t),
                          BeaconVariant::make_commit_reveal(), strategy, rng);
    REQUIRE(out.ok);
    if ((out.randomness.xi[0] & 1) == 0) ++favorable;
  }
  const double freq = static_cast<double>(favorable) / trials;
  const double sigma = std::sqrt(0.75 * 0.25 / trials);
  CHECK(std::fabs(freq - 0.75) < 4 * sigma);
}

TEST_CASE("bias statistics separate the two variants") {
  // Commit-reveal with a rushing last revealer: parity bias blows past
  // z = 10.  Threshold sharing under budgeted withholding stays below 4.
  LastRevealerBias last;
  last.member = 6;
  auto cr = bias_statistic(BeaconVariant::make_commit_reveal(), last, 10000, 7,
                           2026);
  CHECK(std::fabs(cr.z_scores[0]) > 10.0);

  WithholdShares withhold;
  withhold.members = {0, 1};
  auto ts = bias_statistic(BeaconVariant::make_threshold_share(3), withhold,
                           10000, 7, 2026);
  CHECK(ts.max_abs_z < 4.0);
  CHECK(ts.failed == 0);  // guaranteed output delivery

  auto null_run = bias_statistic(BeaconVariant::make_threshold_share(3),
                                 HonestStrategy{}, 10000, 7, 4096);
  CHECK(null_run.max_abs_z < 4.0);
}

TEST_CASE("no shipped strategy predicts a bit before the reveal round") {
  // Unpredictability proxy: guess bit 0 from the adversary's pre-reveal
  // view (its own secrets plus all commitments).
  Rng rng(13);
  const int trials = 10000;
  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    Rng run_rng(rng.next_u64());
    auto out = run_beacon(committee(5), static_cast<Epoch>(t),
                          BeaconVariant::make_threshold_share(2),
                          HonestStrategy{}, run_rng);
    REQUIRE(out.ok);
    const auto& tr =
        std::get<ThresholdShareTranscript>(out.randomness.transcript.body);
    // Predictor: hash of the commitment transcript (public pre-reveal view).
    Sha256 h;
    for (const auto& [dealer, d] : tr.dealings)
      for (const auto& c : d.share_commitments) h.update(c);
    const int guess = h.finish()[0] & 1;
    if (guess == (out.randomness.xi[0] & 1)) ++hits;
  }
  const double rate = static_cast<double>(hits) / trials;
  const double sigma = std::sqrt(0.25 / trials);
  CHECK(std::fabs(rate - 0.5) < 4 * sigma);
}

TEST_CASE("transcripts serialize deterministically") {
  Rng a(14), b(14);
  auto x = run_beacon(committee(4), 1, BeaconVariant::make_threshold_share(2),
                      HonestStrategy{}, a);
  auto y = run_beacon(committee(4), 1, BeaconVariant::make_threshold_share(2),
                      HonestStrategy{}, b);
  CHECK(x.randomness.transcript.serialize() == y.randomness.transcript.serialize());
}

}  // TEST_SUITE

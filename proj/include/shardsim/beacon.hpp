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

#include <map>
#include <set>
#include <variant>
#include <vector>

#include "shardsim/common.hpp"

namespace shardsim::beacon {

/// Smallest prime above 2^61; share arithmetic stays in native words.
constexpr std::uint64_t kFieldPrime = 2305843009213693967ull;

namespace field {
std::uint64_t add(std::uint64_t a, std::uint64_t b);
std::uint64_t sub(std::uint64_t a, std::uint64_t b);
std::uint64_t mul(std::uint64_t a, std::uint64_t b);
std::uint64_t pow(std::uint64_t base, std::uint64_t exp);
std::uint64_t inv(std::uint64_t a);
/// Polynomial evaluation at x (coefficients low-to-high).
std::uint64_t eval(const std::vector<std::uint64_t>& coeffs, std::uint64_t x);
/// Lagrange interpolation of f(0) from (x_i, y_i) pairs with distinct x_i.
std::uint64_t interpolate_at_zero(
    const std::vector<std::pair<std::uint64_t, std::uint64_t>>& points);
}  // namespace field

enum class VariantKind : std::uint8_t { CommitReveal, ThresholdShare };

struct CommitRevealParams {
  Tick commit_window = 1;
  Tick reveal_window = 1;
};

struct ThresholdShareParams {
  std::uint32_t threshold = 1;  // t_s shares reconstruct a secret
};

struct BeaconVariant {
  VariantKind kind = VariantKind::CommitReveal;
  CommitRevealParams commit_reveal;
  ThresholdShareParams threshold_share;

  static BeaconVariant make_commit_reveal(Tick commit_window = 1,
                                          Tick reveal_window = 1);
  static BeaconVariant make_threshold_share(std::uint32_t threshold);
};

// --- transcripts -----------------------------------------------------------

struct CommitRevealTranscript {
  std::vector<NodeId> participants;  // id order fixes the digest order
  std::map<NodeId, Digest> commits;  // H(value || salt)
  struct Reveal {
    Digest value;
    Digest salt;
  };
  std::map<NodeId, Reveal> reveals;  // absent = withheld
};

struct ThresholdShareTranscript {
  std::vector<NodeId> participants;
  std::uint32_t threshold = 0;
  struct Dealing {
    // Per-recipient share commitments H(dealer || j || share), in
    // participant order.
    std::vector<Digest> share_commitments;
    // Either the dealer revealed its polynomial, or >= threshold received
    // shares were published for reconstruction.
    std::vector<std::uint64_t> revealed_coeffs;  // empty when withheld
    std::vector<std::pair<std::uint32_t, std::uint64_t>> recovery_shares;
    bool included = false;          // contributes to xi
    bool reconstructed = false;     // included via recovery
    std::uint64_t secret = 0;       // valid when included
  };
  std::map<NodeId, Dealing> dealings;
  bool flagged = false;  // some dealer was excluded with proof
};

struct Transcript {
  Epoch epoch = 0;
  std::variant<CommitRevealTranscript, ThresholdShareTranscript> body;
  Digest xi;

  VariantKind kind() const {
    return std::holds_alternative<CommitRevealTranscript>(body)
               ? VariantKind::CommitReveal
               : VariantKind::ThresholdShare;
  }
  std::vector<std::uint8_t> serialize() const;
};

struct EpochRandomness {
  Digest xi;
  Epoch epoch = 0;
  Transcript transcript;
};

enum class BeaconError : std::uint8_t { NoReveals, TooFewShares };

// --- adversary strategies ---------------------------------------------------

/// Honest run, everyone follows the protocol.
struct HonestStrategy {};

/// Commit-reveal: corrupted members never reveal.
struct WithholdReveal {
  std::set<NodeId> members;
};

/// Commit-reveal: the corrupted member that reveals last sees every other
/// reveal first (rushing) and withholds its own whenever the resulting
/// xi's bit 0 would be unfavorable (it wants bit 0 == 0).
struct LastRevealerBias {
  NodeId member = kNoNode;
};

/// Threshold-share: corrupted dealers withhold their polynomials and
/// corrupted recipients withhold recovery shares.
struct WithholdShares {
  std::set<NodeId> members;
};

using BeaconStrategy = std::variant<HonestStrategy, WithholdReveal,
                                    LastRevealerBias, WithholdShares>;

// --- protocol ----------------------------------------------------------------

struct BeaconOutcome {
  bool ok = false;
  BeaconError error = BeaconError::NoReveals;
  EpochRandomness randomness;
};

/// One beacon execution over the given committee.  Deterministic given
/// (members, epoch, variant, strategy, rng).  All honest members output
/// the same xi; the transcript alone re-derives it.
BeaconOutcome run_beacon(const std::vector<NodeId>& members, Epoch epoch,
                         const BeaconVariant& variant,
                         const BeaconStrategy& strategy, Rng& rng);

/// True iff every commitment matches its reveal or recovery shares, the
/// reconstruction arithmetic checks out, and xi equals the digest the
/// transcript implies.
bool verify_beacon(const Transcript& transcript);

struct BiasReport {
  std::uint64_t trials = 0;
  std::uint64_t failed = 0;           // beacon produced no output
  std::array<double, 64> z_scores{};  // per-bit frequency z vs fair coin
  double max_abs_z = 0.0;
};

/// Runs `trials` independent beacons and scores the first 64 bits of xi
/// against a fair coin.  trials should be >= 1000 for the z approximation.
BiasReport bias_statistic(const BeaconVariant& variant,
                          const BeaconStrategy& strategy,
                          std::uint64_t trials, std::uint32_t committee_size,
                          std::uint64_t seed);

}  // namespace shardsim::beacon

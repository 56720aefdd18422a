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

#include <vector>

#include "shardsim/common.hpp"

namespace shardsim::assign {

/// Seeded split of the selected nodes into m groups of exactly k.
/// The permutation comes from a Fisher-Yates shuffle over a counter-mode
/// keyed-hash stream keyed with H(0 || xi); group j is the permuted slice
/// [j*k, (j+1)*k).
struct AssignmentOutcome {
  std::vector<std::vector<NodeId>> groups;  // m lists of exactly k ids
  Digest seed;                              // H(0 || xi)
  std::vector<std::uint32_t> permutation;   // position record
};

AssignmentOutcome assign(const std::vector<NodeId>& snodes, const Digest& xi,
                         std::uint32_t m, std::uint32_t k);

/// Seed for group index c: H(c || xi), c as u32 little-endian.  Index 0 is
/// the node-assignment seed; reconfiguration uses c = shard + 1.
Digest group_seed(std::uint32_t c, const Digest& xi);

enum class FailModel : std::uint8_t { Binomial, Hypergeometric, MonteCarlo };

const char* to_string(FailModel m);

/// Single-committee failure query: probability that a committee of size u
/// drawn against adversary fraction rho has a malicious share of at least
/// 1 - Q0 (threshold ceil(u * (1 - Q0))).
struct FailureQuery {
  std::uint64_t n = 0;  // pool size (Hypergeometric / MonteCarlo)
  std::uint32_t u = 0;  // committee size
  double rho = 0.0;     // adversary fraction
  double q0 = 0.0;      // honest-fraction target (1/2 or 2/3)
  FailModel model = FailModel::Binomial;
  std::uint64_t trials = 0;  // MonteCarlo only
};

/// Exact rational evaluation (big-integer binomial coefficients, division
/// deferred to the end); the returned double is correct to < 1e-12
/// relative error.  Domain violations throw std::invalid_argument; a
/// fractional rho*n under Hypergeometric is rejected, not rounded.
double failure_probability(const FailureQuery& q);

struct MonteCarloEstimate {
  double p_hat = 0.0;
  double ci_low = 0.0;   // 95% normal-approximation interval
  double ci_high = 0.0;
  std::uint64_t trials = 0;
};

/// Corrected epoch estimator: each trial draws all m committees without
/// replacement from one pool of n nodes with floor(rho*n) malicious, and
/// fails when ANY committee breaches Q0.  trials must be >= 100.
MonteCarloEstimate epoch_failure_monte_carlo(std::uint64_t n, std::uint32_t m,
                                             std::uint32_t u, double rho,
                                             double q0, std::uint64_t trials,
                                             std::uint64_t seed);

/// Smallest committee size u with failure_probability <= target under the
/// given model (Hypergeometric sized against pool n).  Unreachable targets
/// (rho >= 1 - q0 makes the tail not vanish) return nullopt.
std::optional<std::uint32_t> min_committee_size(double rho, double q0,
                                                double target, FailModel model,
                                                std::uint64_t n = 0,
                                                std::uint32_t u_max = 4096);

}  // namespace shardsim::assign

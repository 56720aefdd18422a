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

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "shardsim/assignment.hpp"

using namespace shardsim;
using namespace shardsim::assign;

namespace {

// Independent oracle: exhaustive enumeration of all 2^u committee
// fillings weighted by rho, counting breaches of the Q0 threshold.
long double binomial_enumeration_oracle(std::uint32_t u, double rho, double q0) {
  const auto thr =
      static_cast<std::uint32_t>(std::ceil(u * (1.0 - q0) - 1e-9));
  long double failure = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << u); ++mask) {
    const auto bad = static_cast<std::uint32_t>(__builtin_popcount(mask));
    if (bad < thr) continue;
    long double term = 1.0L;
    for (std::uint32_t i = 0; i < bad; ++i) term *= static_cast<long double>(rho);
    for (std::uint32_t i = 0; i < u - bad; ++i)
      term *= 1.0L - static_cast<long double>(rho);
    failure += term;
  }
  return failure;
}

// Independent oracle: exhaustive subset enumeration for the
// without-replacement draw (n choose u subsets).
double hypergeometric_enumeration_oracle(std::uint32_t n, std::uint32_t u,
                                         std::uint32_t bad_total, double q0) {
  const auto thr =
      static_cast<std::uint32_t>(std::ceil(u * (1.0 - q0) - 1e-9));
  std::uint64_t total = 0, failing = 0;
  std::vector<std::uint32_t> pick(u);
  // Iterate all u-subsets of {0..n-1}; members < bad_total are malicious.
  std::function<void(std::uint32_t, std::uint32_t, std::uint32_t)> rec =
      [&](std::uint32_t start, std::uint32_t depth, std::uint32_t bad) {
        if (depth == u) {
          ++total;
          if (bad >= thr) ++failing;
          return;
        }
        for (std::uint32_t v = start; v < n; ++v)
          rec(v + 1, depth + 1, bad + (v < bad_total ? 1 : 0));
      };
  rec(0, 0, 0);
  return static_cast<double>(failing) / static_cast<double>(total);
}

Digest xi_of(std::uint64_t seed) {
  Sha256 h;
  h.update_u64(seed);
  return h.finish();
}

}  // namespace

TEST_SUITE("assignment") {

TEST_CASE("a single group is the permuted node list") {
  std::vector<NodeId> snodes{10, 11, 12, 13};
  auto out = assign::assign(snodes, xi_of(1), 1, 4);
  REQUIRE(out.groups.size() == 1);
  std::multiset<NodeId> a(snodes.begin(), snodes.end());
  std::multiset<NodeId> b(out.groups[0].begin(), out.groups[0].end());
  CHECK(a == b);
}

TEST_CASE("assignment is deterministic in (snodes, xi)") {
  std::vector<NodeId> snodes;
  for (NodeId i = 0; i < 12; ++i) snodes.push_back(i);
  auto a = assign::assign(snodes, xi_of(9), 3, 4);
  auto b = assign::assign(snodes, xi_of(9), 3, 4);
  CHECK(a.groups == b.groups);
  auto c = assign::assign(snodes, xi_of(10), 3, 4);
  CHECK(a.groups != c.groups);
}

TEST_CASE("assignment is a partition into m disjoint groups of k") {
  std::vector<NodeId> snodes;
  for (NodeId i = 0; i < 24; ++i) snodes.push_back(100 + i);
  auto out = assign::assign(snodes, xi_of(3), 4, 6);
  REQUIRE(out.groups.size() == 4);
  std::set<NodeId> all;
  for (const auto& g : out.groups) {
    CHECK(g.size() == 6);
    for (NodeId n : g) CHECK(all.insert(n).second);  // disjoint
  }
  CHECK(all.size() == snodes.size());
  // permutation property: the record is a bijection on positions
  std::set<std::uint32_t> positions(out.permutation.begin(),
                                    out.permutation.end());
  CHECK(positions.size() == snodes.size());
}

TEST_CASE("each node lands in each group uniformly") {
  // 1e4 assignments of 12 nodes into 3 groups: per (node, group) frequency
  // within 1/3 +- 3 sigma.
  std::vector<NodeId> snodes;
  for (NodeId i = 0; i < 12; ++i) snodes.push_back(i);
  const int trials = 10000;
  std::array<std::array<int, 3>, 12> counts{};
  for (int t = 0; t < trials; ++t) {
    auto out = assign::assign(snodes, xi_of(static_cast<std::uint64_t>(t) + 777), 3, 4);
    for (std::size_t g = 0; g < 3; ++g)
      for (NodeId n : out.groups[g]) ++counts[n][g];
  }
  const double sigma = std::sqrt((1.0 / 3) * (2.0 / 3) / trials);
  for (const auto& row : counts)
    for (int g = 0; g < 3; ++g) {
      const double freq = static_cast<double>(row[g]) / trials;
      CHECK(std::fabs(freq - 1.0 / 3) < 3 * sigma + 1e-12);
    }
}

TEST_CASE("size mismatches are rejected") {
  std::vector<NodeId> snodes{1, 2, 3};
  CHECK_THROWS_AS(assign::assign(snodes, xi_of(1), 2, 2), std::invalid_argument);
}

TEST_CASE("binomial failure matches the stated value and the oracle") {
  FailureQuery q;
  q.u = 4;
  q.rho = 0.25;
  q.q0 = 0.5;
  q.model = FailModel::Binomial;
  const double p = failure_probability(q);
  CHECK(std::fabs(p - 0.26171875) / 0.26171875 < 1e-12);
  const long double oracle = binomial_enumeration_oracle(4, 0.25, 0.5);
  CHECK(std::fabs(p - static_cast<double>(oracle)) < 1e-12);
}

TEST_CASE("binomial equals exhaustive enumeration up to u = 20") {
  for (std::uint32_t u : {5u, 9u, 13u, 20u}) {
    FailureQuery q;
    q.u = u;
    q.rho = 0.3;
    q.q0 = 2.0 / 3.0;
    q.model = FailModel::Binomial;
    const double p = failure_probability(q);
    const long double oracle = binomial_enumeration_oracle(u, 0.3, 2.0 / 3.0);
    // The tolerance covers the oracle's own floating-point noise; the
    // named criterion values above are checked against exact fractions.
    CHECK(std::fabs(p - static_cast<double>(oracle)) <=
          1e-11 * std::max<double>(1.0, static_cast<double>(oracle)));
  }
}

TEST_CASE("hypergeometric failure matches 117/495 and the subset oracle") {
  FailureQuery q;
  q.n = 12;
  q.u = 4;
  q.rho = 0.25;
  q.q0 = 0.5;
  q.model = FailModel::Hypergeometric;
  const double p = failure_probability(q);
  const double expected = 117.0 / 495.0;
  CHECK(std::fabs(p - expected) / expected < 1e-12);
  const double oracle = hypergeometric_enumeration_oracle(12, 4, 3, 0.5);
  CHECK(std::fabs(p - oracle) < 1e-12);
}

TEST_CASE("zero adversary means zero failure in both models") {
  for (auto model : {FailModel::Binomial, FailModel::Hypergeometric}) {
    FailureQuery q;
    q.n = 40;
    q.u = 10;
    q.rho = 0.0;
    q.q0 = 0.5;
    q.model = model;
    CHECK(failure_probability(q) == 0.0);
  }
}

TEST_CASE("fractional rho * n is rejected, not rounded") {
  FailureQuery q;
  q.n = 10;
  q.u = 4;
  q.rho = 1.0 / 3.0;
  q.q0 = 0.5;
  q.model = FailModel::Hypergeometric;
  CHECK_THROWS_AS(failure_probability(q), std::invalid_argument);
}

TEST_CASE("binomial and hypergeometric converge as the pool grows") {
  const std::uint32_t u = 8;
  FailureQuery b;
  b.u = u;
  b.rho = 0.25;
  b.q0 = 0.5;
  b.model = FailModel::Binomial;
  const double pb = failure_probability(b);

  double last_gap = 1.0;
  for (std::uint64_t n : {2 * u, 10 * u, 100 * u}) {
    FailureQuery h = b;
    h.model = FailModel::Hypergeometric;
    h.n = n;
    const double gap = std::fabs(failure_probability(h) - pb);
    CHECK(gap <= last_gap + 1e-15);
    last_gap = gap;
  }
  CHECK(last_gap < 5e-3);
}

TEST_CASE("monte carlo agrees with the analytic single-committee value") {
  // m = 1 draws one committee without replacement: the hypergeometric law.
  FailureQuery h;
  h.n = 36;
  h.u = 12;
  h.rho = 0.25;
  h.q0 = 2.0 / 3.0;
  h.model = FailModel::Hypergeometric;
  const double analytic = failure_probability(h);
  auto est = epoch_failure_monte_carlo(36, 1, 12, 0.25, 2.0 / 3.0, 100000, 99);
  CHECK(est.ci_low <= analytic);
  CHECK(analytic <= est.ci_high);
}

TEST_CASE("multi-committee epochs fail strictly more often") {
  FailureQuery h;
  h.n = 36;
  h.u = 12;
  h.rho = 0.25;
  h.q0 = 2.0 / 3.0;
  h.model = FailModel::Hypergeometric;
  const double single = failure_probability(h);
  auto est = epoch_failure_monte_carlo(36, 3, 12, 0.25, 2.0 / 3.0, 100000, 7);
  CHECK(est.p_hat > single);
}

TEST_CASE("zero adversary never fails the epoch") {
  auto est = epoch_failure_monte_carlo(36, 3, 12, 0.0, 2.0 / 3.0, 1000, 7);
  CHECK(est.p_hat == 0.0);
}

TEST_CASE("too few trials are rejected") {
  CHECK_THROWS_AS(epoch_failure_monte_carlo(36, 3, 12, 0.25, 0.5, 99, 7),
                  std::invalid_argument);
}

TEST_CASE("min committee size trivia") {
  CHECK(min_committee_size(0.25, 2.0 / 3.0, 1.0, FailModel::Binomial) == 1);
  CHECK(min_committee_size(0.0, 2.0 / 3.0, 0.5, FailModel::Binomial) == 1);
}

TEST_CASE("min committee size matches a direct scan") {
  const double target = 1e-3;
  auto result = min_committee_size(0.25, 2.0 / 3.0, target, FailModel::Binomial);
  REQUIRE(result.has_value());
  // Direct scan oracle.
  std::uint32_t scan = 0;
  for (std::uint32_t u = 1; u <= 4096; ++u) {
    FailureQuery q;
    q.u = u;
    q.rho = 0.25;
    q.q0 = 2.0 / 3.0;
    q.model = FailModel::Binomial;
    if (failure_probability(q) <= target) {
      scan = u;
      break;
    }
  }
  CHECK(*result == scan);
  // Everything below the answer must miss the target.
  for (std::uint32_t u = 1; u < *result; ++u) {
    FailureQuery q;
    q.u = u;
    q.rho = 0.25;
    q.q0 = 2.0 / 3.0;
    q.model = FailModel::Binomial;
    CHECK(failure_probability(q) > target);
  }
}

TEST_CASE("an unreachable target reports failure") {
  CHECK_FALSE(
      min_committee_size(0.5, 2.0 / 3.0, 1e-6, FailModel::Binomial).has_value());
}

}  // TEST_SUITE

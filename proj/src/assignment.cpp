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

#include "shardsim/assignment.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>

namespace shardsim::assign {

namespace {

std::uint32_t breach_threshold(std::uint32_t u, double q0) {
  // ceil(u * (1 - q0)) with a guard against 0.9999... artifacts.
  double raw = static_cast<double>(u) * (1.0 - q0);
  auto thr = static_cast<std::uint32_t>(std::ceil(raw - 1e-9));
  return thr;
}

mpz_class binom(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  mpz_class r;
  mpz_bin_uiui(r.get_mpz_t(), n, static_cast<unsigned long>(k));
  return r;
}

double binomial_tail(std::uint32_t u, double rho, std::uint32_t thr) {
  if (thr == 0) return 1.0;
  if (thr > u) return 0.0;
  // rho as the exact dyadic rational of the given double keeps the whole
  // sum in exact arithmetic until the final conversion.
  mpq_class p(rho);
  p.canonicalize();
  mpq_class q = 1 - p;
  mpq_class sum = 0;
  for (std::uint32_t x = thr; x <= u; ++x) {
    mpq_class term(binom(u, x));
    mpq_class px = 1, qx = 1;
    for (std::uint32_t i = 0; i < x; ++i) px *= p;
    for (std::uint32_t i = 0; i < u - x; ++i) qx *= q;
    sum += term * px * qx;
  }
  return sum.get_d();
}

double hypergeometric_tail(std::uint64_t n, std::uint32_t u, std::uint64_t bad,
                           std::uint32_t thr) {
  if (thr == 0) return 1.0;
  mpz_class numer = 0;
  const std::uint64_t good = n - bad;
  for (std::uint64_t x = thr; x <= u; ++x) {
    if (x > bad) break;
    if (u - x > good) continue;
    numer += binom(bad, x) * binom(good, u - x);
  }
  mpq_class r(numer, binom(n, u));
  r.canonicalize();
  return r.get_d();
}

std::uint64_t integral_bad_count(double rho, std::uint64_t n) {
  const double raw = rho * static_cast<double>(n);
  const double rounded = std::llround(raw);
  // rho arrives as a double, so demand integrality only up to the noise a
  // decimal fraction picks up in binary (e.g. 0.2 * 5).
  if (std::fabs(raw - rounded) > 1e-6)
    throw std::invalid_argument("rho * n must be integral for the hypergeometric model");
  return static_cast<std::uint64_t>(rounded);
}

}  // namespace

Digest group_seed(std::uint32_t c, const Digest& xi) {
  Sha256 h;
  h.update_u32(c);
  h.update(xi);
  return h.finish();
}

AssignmentOutcome assign(const std::vector<NodeId>& snodes, const Digest& xi,
                         std::uint32_t m, std::uint32_t k) {
  if (m == 0 || k == 0) throw std::invalid_argument("m and k must be positive");
  if (snodes.size() != static_cast<std::size_t>(m) * k)
    throw std::invalid_argument("selected node count must equal m * k");

  AssignmentOutcome out;
  out.seed = group_seed(0, xi);
  HashStream stream(out.seed);
  out.permutation = stream.permutation(static_cast<std::uint32_t>(snodes.size()));

  out.groups.resize(m);
  for (std::uint32_t j = 0; j < m; ++j) {
    out.groups[j].reserve(k);
    for (std::uint32_t i = 0; i < k; ++i)
      out.groups[j].push_back(snodes[out.permutation[j * k + i]]);
  }
  return out;
}

const char* to_string(FailModel m) {
  switch (m) {
    case FailModel::Binomial: return "binomial";
    case FailModel::Hypergeometric: return "hypergeometric";
    case FailModel::MonteCarlo: return "monte-carlo";
  }
  return "?";
}

double failure_probability(const FailureQuery& q) {
  if (q.u == 0) throw std::invalid_argument("committee size must be positive");
  if (q.rho < 0.0 || q.rho > 1.0) throw std::invalid_argument("rho out of [0,1]");
  if (q.q0 <= 0.0 || q.q0 > 1.0) throw std::invalid_argument("q0 out of (0,1]");
  const std::uint32_t thr = breach_threshold(q.u, q.q0);
  if (q.rho == 0.0 && thr >= 1) return 0.0;

  switch (q.model) {
    case FailModel::Binomial:
      return binomial_tail(q.u, q.rho, thr);
    case FailModel::Hypergeometric: {
      if (q.n < q.u) throw std::invalid_argument("pool must be at least committee size");
      return hypergeometric_tail(q.n, q.u, integral_bad_count(q.rho, q.n), thr);
    }
    case FailModel::MonteCarlo: {
      auto est = epoch_failure_monte_carlo(q.n, 1, q.u, q.rho, q.q0,
                                           q.trials == 0 ? 100000 : q.trials,
                                           /*seed=*/1);
      return est.p_hat;
    }
  }
  throw std::invalid_argument("unknown model");
}

MonteCarloEstimate epoch_failure_monte_carlo(std::uint64_t n, std::uint32_t m,
                                             std::uint32_t u, double rho,
                                             double q0, std::uint64_t trials,
                                             std::uint64_t seed) {
  if (trials < 100) throw std::invalid_argument("need at least 100 trials");
  if (static_cast<std::uint64_t>(m) * u > n)
    throw std::invalid_argument("m * u must not exceed n");
  const std::uint32_t thr = breach_threshold(u, q0);
  const auto bad = static_cast<std::uint64_t>(
      std::floor(rho * static_cast<double>(n) + 1e-9));

  Rng rng(seed);
  std::vector<std::uint8_t> pool(n, 0);
  for (std::uint64_t i = 0; i < bad; ++i) pool[i] = 1;
  std::vector<std::uint32_t> order(n);

  std::uint64_t failures = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    // One shuffled pool = all m committees drawn without replacement.
    for (std::uint64_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    for (std::uint64_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform(i)]);
    bool epoch_failed = false;
    for (std::uint32_t c = 0; c < m && !epoch_failed; ++c) {
      std::uint32_t bad_in_committee = 0;
      for (std::uint32_t i = 0; i < u; ++i)
        bad_in_committee += pool[order[static_cast<std::size_t>(c) * u + i]];
      epoch_failed = bad_in_committee >= thr;
    }
    failures += epoch_failed ? 1 : 0;
  }

  MonteCarloEstimate est;
  est.trials = trials;
  est.p_hat = static_cast<double>(failures) / static_cast<double>(trials);
  const double half =
      1.959963985 * std::sqrt(std::max(est.p_hat * (1.0 - est.p_hat), 1e-12) /
                              static_cast<double>(trials));
  est.ci_low = std::max(0.0, est.p_hat - half);
  est.ci_high = std::min(1.0, est.p_hat + half);
  return est;
}

std::optional<std::uint32_t> min_committee_size(double rho, double q0,
                                                double target, FailModel model,
                                                std::uint64_t n,
                                                std::uint32_t u_max) {
  if (target <= 0.0 || target > 1.0)
    throw std::invalid_argument("target must lie in (0, 1]");
  // With rho at or above the breach share the tail cannot vanish.
  if (rho >= 1.0 - q0 && target < 1.0) {
    if (model == FailModel::Binomial) return std::nullopt;
  }
  for (std::uint32_t u = 1; u <= u_max; ++u) {
    FailureQuery q;
    q.u = u;
    q.rho = rho;
    q.q0 = q0;
    q.model = model;
    q.n = (model == FailModel::Hypergeometric) ? n : 0;
    if (model == FailModel::Hypergeometric && n < u) break;
    double p;
    try {
      p = failure_probability(q);
    } catch (const std::invalid_argument&) {
      continue;  // fractional rho*n at this size; not a candidate
    }
    if (p <= target) return u;
  }
  return std::nullopt;
}

}  // namespace shardsim::assign

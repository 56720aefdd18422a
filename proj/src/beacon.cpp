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

#include "shardsim/beacon.hpp"

#include <algorithm>
#include <cmath>

namespace shardsim::beacon {

namespace field {

std::uint64_t add(std::uint64_t a, std::uint64_t b) {
  unsigned __int128 s = static_cast<unsigned __int128>(a) + b;
  return static_cast<std::uint64_t>(s % kFieldPrime);
}

std::uint64_t sub(std::uint64_t a, std::uint64_t b) {
  return a >= b ? a - b : kFieldPrime - (b - a);
}

std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  return static_cast<std::uint64_t>(p % kFieldPrime);
}

std::uint64_t pow(std::uint64_t base, std::uint64_t exp) {
  std::uint64_t r = 1;
  base %= kFieldPrime;
  while (exp != 0) {
    if (exp & 1) r = mul(r, base);
    base = mul(base, base);
    exp >>= 1;
  }
  return r;
}

std::uint64_t inv(std::uint64_t a) {
  if (a % kFieldPrime == 0) throw std::invalid_argument("no inverse of zero");
  return pow(a, kFieldPrime - 2);
}

std::uint64_t eval(const std::vector<std::uint64_t>& coeffs, std::uint64_t x) {
  std::uint64_t acc = 0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
    acc = add(mul(acc, x), *it);
  return acc;
}

std::uint64_t interpolate_at_zero(
    const std::vector<std::pair<std::uint64_t, std::uint64_t>>& points) {
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::uint64_t num = 1, den = 1;
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (i == j) continue;
      num = mul(num, points[j].first);
      den = mul(den, sub(points[j].first, points[i].first));
    }
    acc = add(acc, mul(points[i].second, mul(num, inv(den))));
  }
  return acc;
}

}  // namespace field

BeaconVariant BeaconVariant::make_commit_reveal(Tick commit_window,
                                                Tick reveal_window) {
  BeaconVariant v;
  v.kind = VariantKind::CommitReveal;
  v.commit_reveal = {commit_window, reveal_window};
  return v;
}

BeaconVariant BeaconVariant::make_threshold_share(std::uint32_t threshold) {
  if (threshold == 0) throw std::invalid_argument("threshold must be positive");
  BeaconVariant v;
  v.kind = VariantKind::ThresholdShare;
  v.threshold_share = {threshold};
  return v;
}

namespace {

Digest commit_digest(const Digest& value, const Digest& salt) {
  Sha256 h;
  h.update(value);
  h.update(salt);
  return h.finish();
}

Digest share_commitment(NodeId dealer, std::uint32_t recipient_index,
                        std::uint64_t share) {
  Sha256 h;
  h.update_u32(dealer);
  h.update_u32(recipient_index);
  h.update_u64(share);
  return h.finish();
}

Digest commit_reveal_xi(const CommitRevealTranscript& t) {
  Sha256 h;
  h.update("commit-reveal-xi");
  for (NodeId id : t.participants) {
    auto it = t.reveals.find(id);
    if (it == t.reveals.end()) continue;  // non-revealers are excluded
    h.update_u32(id);
    h.update(it->second.value);
  }
  return h.finish();
}

Digest threshold_share_xi(const ThresholdShareTranscript& t) {
  Sha256 h;
  h.update("threshold-share-xi");
  for (NodeId id : t.participants) {
    auto it = t.dealings.find(id);
    if (it == t.dealings.end() || !it->second.included) continue;
    h.update_u32(id);
    h.update_u64(it->second.secret);
  }
  return h.finish();
}

BeaconOutcome run_commit_reveal(const std::vector<NodeId>& members, Epoch epoch,
                                const BeaconStrategy& strategy, Rng& rng) {
  CommitRevealTranscript tr;
  tr.participants = members;

  std::map<NodeId, CommitRevealTranscript::Reveal> secrets;
  for (NodeId id : members) {
    CommitRevealTranscript::Reveal r;
    Sha256 hv;
    hv.update_u64(rng.next_u64());
    hv.update_u32(id);
    r.value = hv.finish();
    Sha256 hs;
    hs.update_u64(rng.next_u64());
    r.salt = hs.finish();
    secrets[id] = r;
    tr.commits[id] = commit_digest(r.value, r.salt);
  }

  const auto* withhold = std::get_if<WithholdReveal>(&strategy);
  const auto* last = std::get_if<LastRevealerBias>(&strategy);

  for (NodeId id : members) {
    if (withhold != nullptr && withhold->members.count(id) != 0) continue;
    if (last != nullptr && id == last->member) continue;  // decided below
    tr.reveals[id] = secrets[id];
  }

  if (last != nullptr && secrets.count(last->member) != 0) {
    // Rushing adversary: it already sees every honest reveal, so it can
    // compute the candidate xi with its own reveal included and publish
    // only when bit 0 comes out favorable (zero).
    CommitRevealTranscript with_own = tr;
    with_own.reveals[last->member] = secrets[last->member];
    const bool favorable = (commit_reveal_xi(with_own)[0] & 1) == 0;
    if (favorable) tr.reveals[last->member] = secrets[last->member];
  }

  BeaconOutcome out;
  if (tr.reveals.empty()) {
    out.ok = false;
    out.error = BeaconError::NoReveals;
    return out;
  }
  out.ok = true;
  out.randomness.epoch = epoch;
  out.randomness.transcript.epoch = epoch;
  out.randomness.transcript.body = tr;
  out.randomness.xi = commit_reveal_xi(tr);
  out.randomness.transcript.xi = out.randomness.xi;
  return out;
}

BeaconOutcome run_threshold_share(const std::vector<NodeId>& members,
                                  Epoch epoch, std::uint32_t threshold,
                                  const BeaconStrategy& strategy, Rng& rng) {
  const auto u = static_cast<std::uint32_t>(members.size());
  if (threshold > u) throw std::invalid_argument("threshold exceeds committee");

  ThresholdShareTranscript tr;
  tr.participants = members;
  tr.threshold = threshold;

  const auto* withhold = std::get_if<WithholdShares>(&strategy);
  auto is_bad = [&](NodeId id) {
    return withhold != nullptr && withhold->members.count(id) != 0;
  };

  // Dealing: every member shares a fresh secret with per-share hash
  // commitments.  Evaluation point for recipient index j is j + 1.
  std::map<NodeId, std::vector<std::uint64_t>> polys;
  for (NodeId dealer : members) {
    std::vector<std::uint64_t> coeffs(threshold);
    for (auto& c : coeffs) c = rng.uniform(kFieldPrime);
    polys[dealer] = coeffs;
    ThresholdShareTranscript::Dealing d;
    d.share_commitments.resize(u);
    for (std::uint32_t j = 0; j < u; ++j)
      d.share_commitments[j] =
          share_commitment(dealer, j, field::eval(coeffs, j + 1));
    tr.dealings[dealer] = std::move(d);
  }

  // Reveal: honest dealers publish their polynomial; withheld secrets are
  // reconstructed from the shares honest recipients received.
  BeaconOutcome out;
  for (NodeId dealer : members) {
    auto& d = tr.dealings[dealer];
    const auto& coeffs = polys[dealer];
    if (!is_bad(dealer)) {
      d.revealed_coeffs = coeffs;
      d.secret = coeffs[0];
      d.included = true;
      continue;
    }
    // Honest recipients publish their verified shares.
    for (std::uint32_t j = 0; j < u; ++j) {
      if (is_bad(members[j])) continue;
      d.recovery_shares.emplace_back(j + 1, field::eval(coeffs, j + 1));
      if (d.recovery_shares.size() == threshold) break;
    }
    if (d.recovery_shares.size() >= threshold) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> pts(
          d.recovery_shares.begin(), d.recovery_shares.end());
      d.secret = field::interpolate_at_zero(pts);
      d.included = true;
      d.reconstructed = true;
    } else {
      // Excluded with proof: fewer than threshold shares surfaced.
      tr.flagged = true;
      out.error = BeaconError::TooFewShares;
    }
  }

  out.ok = true;
  out.randomness.epoch = epoch;
  out.randomness.transcript.epoch = epoch;
  out.randomness.transcript.body = tr;
  out.randomness.xi = threshold_share_xi(tr);
  out.randomness.transcript.xi = out.randomness.xi;
  return out;
}

}  // namespace

BeaconOutcome run_beacon(const std::vector<NodeId>& members, Epoch epoch,
                         const BeaconVariant& variant,
                         const BeaconStrategy& strategy, Rng& rng) {
  if (members.empty()) throw std::invalid_argument("empty committee");
  switch (variant.kind) {
    case VariantKind::CommitReveal:
      return run_commit_reveal(members, epoch, strategy, rng);
    case VariantKind::ThresholdShare:
      return run_threshold_share(members, epoch,
                                 variant.threshold_share.threshold, strategy,
                                 rng);
  }
  throw std::invalid_argument("unknown beacon variant");
}

bool verify_beacon(const Transcript& transcript) {
  if (const auto* cr = std::get_if<CommitRevealTranscript>(&transcript.body)) {
    if (cr->reveals.empty()) return false;
    for (const auto& [id, reveal] : cr->reveals) {
      auto it = cr->commits.find(id);
      if (it == cr->commits.end()) return false;
      if (commit_digest(reveal.value, reveal.salt) != it->second) return false;
      if (std::find(cr->participants.begin(), cr->participants.end(), id) ==
          cr->participants.end())
        return false;
    }
    return commit_reveal_xi(*cr) == transcript.xi;
  }

  const auto& ts = std::get<ThresholdShareTranscript>(transcript.body);
  const auto u = static_cast<std::uint32_t>(ts.participants.size());
  for (const auto& [dealer, d] : ts.dealings) {
    if (d.share_commitments.size() != u) return false;
    if (!d.included) continue;
    if (!d.revealed_coeffs.empty()) {
      // Fully revealed polynomial: check degree, every commitment, and the
      // claimed secret.
      if (d.revealed_coeffs.size() != ts.threshold) return false;
      for (std::uint32_t j = 0; j < u; ++j) {
        if (share_commitment(dealer, j, field::eval(d.revealed_coeffs, j + 1)) !=
            d.share_commitments[j])
          return false;
      }
      if (d.secret != d.revealed_coeffs[0]) return false;
    } else {
      // Reconstruction path: shares must match their commitments and
      // interpolate to the claimed secret.
      if (d.recovery_shares.size() < ts.threshold) return false;
      std::vector<std::pair<std::uint64_t, std::uint64_t>> pts;
      for (const auto& [x, y] : d.recovery_shares) {
        if (x == 0 || x > u) return false;
        if (share_commitment(dealer, x - 1, y) != d.share_commitments[x - 1])
          return false;
        pts.emplace_back(x, y);
      }
      if (field::interpolate_at_zero(pts) != d.secret) return false;
    }
  }
  return threshold_share_xi(ts) == transcript.xi;
}

std::vector<std::uint8_t> Transcript::serialize() const {
  ByteWriter w;
  w.u32(epoch);
  if (const auto* cr = std::get_if<CommitRevealTranscript>(&body)) {
    w.u8(0);
    w.u32(static_cast<std::uint32_t>(cr->participants.size()));
    for (NodeId id : cr->participants) w.u32(id);
    w.u32(static_cast<std::uint32_t>(cr->commits.size()));
    for (const auto& [id, c] : cr->commits) {
      w.u32(id);
      w.digest(c);
    }
    w.u32(static_cast<std::uint32_t>(cr->reveals.size()));
    for (const auto& [id, r] : cr->reveals) {
      w.u32(id);
      w.digest(r.value);
      w.digest(r.salt);
    }
  } else {
    const auto& ts = std::get<ThresholdShareTranscript>(body);
    w.u8(1);
    w.u32(static_cast<std::uint32_t>(ts.participants.size()));
    for (NodeId id : ts.participants) w.u32(id);
    w.u32(ts.threshold);
    w.u32(static_cast<std::uint32_t>(ts.dealings.size()));
    for (const auto& [dealer, d] : ts.dealings) {
      w.u32(dealer);
      w.u8(d.included ? 1 : 0);
      w.u8(d.reconstructed ? 1 : 0);
      w.u64(d.secret);
      w.u32(static_cast<std::uint32_t>(d.share_commitments.size()));
      for (const auto& c : d.share_commitments) w.digest(c);
      w.u32(static_cast<std::uint32_t>(d.revealed_coeffs.size()));
      for (auto c : d.revealed_coeffs) w.u64(c);
      w.u32(static_cast<std::uint32_t>(d.recovery_shares.size()));
      for (const auto& [x, y] : d.recovery_shares) {
        w.u32(x);
        w.u64(y);
      }
    }
  }
  w.digest(xi);
  return w.data();
}

BiasReport bias_statistic(const BeaconVariant& variant,
                          const BeaconStrategy& strategy, std::uint64_t trials,
                          std::uint32_t committee_size, std::uint64_t seed) {
  if (trials < 1000) throw std::invalid_argument("need at least 1000 trials");
  std::vector<NodeId> members(committee_size);
  for (std::uint32_t i = 0; i < committee_size; ++i) members[i] = i;

  std::array<std::uint64_t, 64> ones{};
  BiasReport report;
  report.trials = trials;

  Rng rng(seed);
  for (std::uint64_t t = 0; t < trials; ++t) {
    auto out = run_beacon(members, static_cast<Epoch>(t), variant, strategy, rng);
    if (!out.ok) {
      ++report.failed;
      continue;
    }
    const std::uint64_t low = out.randomness.xi.low64();
    for (int b = 0; b < 64; ++b) ones[b] += (low >> b) & 1;
  }

  const auto n = static_cast<double>(trials - report.failed);
  for (int b = 0; b < 64; ++b) {
    const double z = (static_cast<double>(ones[b]) - n / 2.0) / std::sqrt(n / 4.0);
    report.z_scores[b] = z;
    report.max_abs_z = std::max(report.max_abs_z, std::fabs(z));
  }
  return report;
}

}  // namespace shardsim::beacon

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

#include "shardsim/node_selection.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace shardsim::selection {

Digest Solution::binding() const {
  Sha256 h;
  h.update(puzzle);
  h.update_u64(round);
  h.update(pubkey);
  h.update_u64(nonce);
  return h.finish();
}

std::optional<Solution> mine_round(NodeId node, const Digest& puzzle,
                                   const PowParams& params, std::uint64_t round,
                                   const Keyring& keys, Rng& rng) {
  if (params.p < 0.0 || params.p > 1.0)
    throw std::invalid_argument("p must lie in [0, 1]");
  if (!rng.bernoulli(params.p)) return std::nullopt;
  Solution sol;
  sol.node = node;
  sol.pubkey = keys.public_key(node);
  sol.puzzle = puzzle;
  sol.round = round;
  sol.nonce = rng.next_u64();
  sol.evidence = keys.sign(node, sol.binding());
  return sol;
}

bool verify_solution(const Solution& sol, const Digest& expected_puzzle,
                     const Keyring& keys) {
  if (sol.puzzle != expected_puzzle) return false;
  if (!keys.known(sol.node) || keys.public_key(sol.node) != sol.pubkey)
    return false;
  return keys.verify(sol.node, sol.binding(), sol.evidence);
}

const char* to_string(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::PowUnderlyingChain: return "pow-underlying-chain";
    case SelectionMethod::PowReferenceCommittee: return "pow-reference-committee";
    case SelectionMethod::PosLottery: return "pos-lottery";
    case SelectionMethod::PermissionedRoster: return "permissioned-roster";
  }
  return "?";
}

FairnessReport measure_fairness(const SelectionOutcome& outcome,
                                const std::set<NodeId>& honest, double beta,
                                std::uint32_t k_f) {
  if (outcome.snodes.size() < k_f)
    throw std::invalid_argument("selection smaller than k_f");
  if (beta <= 0.0) throw std::invalid_argument("beta must be positive");
  std::size_t honest_seats = 0;
  for (const auto& seat : outcome.snodes)
    if (honest.count(seat.node) != 0) ++honest_seats;
  FairnessReport r;
  r.beta = beta;
  r.q_f = static_cast<double>(honest_seats) /
          static_cast<double>(outcome.snodes.size());
  r.omega_d = 1.0 - r.q_f / beta;
  r.k_f = k_f;
  r.mu_f = 1.0 / std::sqrt(static_cast<double>(outcome.snodes.size()));
  return r;
}

namespace {

Digest seat_key(const Keyring& keys, NodeId node, std::uint64_t seq) {
  Sha256 h;
  h.update(keys.public_key(node));
  h.update_u64(seq);
  return h.finish();
}

/// Selfish-mining bookkeeping: main-chain blocks in order, by producer
/// cohort.  The adversary follows the classic withhold-and-release
/// schedule; gamma is the share of honest power that extends the
/// adversary branch during a tie race.
class SelfishChain {
 public:
  SelfishChain(double gamma, bool selfish) : gamma_(gamma), selfish_(selfish) {}

  void adversary_block(NodeId miner, Rng&) {
    if (!selfish_) {
      accept(true, miner);
      return;
    }
    if (tie_) {
      // The adversary's published race block plus the new one outrun the
      // honest branch; both land on the main chain.
      accept(true, tie_adv_miner_);
      accept(true, miner);
      reset();
      return;
    }
    private_.push_back(miner);
  }

  void honest_block(NodeId miner, Rng& rng) {
    if (!selfish_) {
      accept(false, miner);
      return;
    }
    if (tie_) {
      if (rng.bernoulli(gamma_)) {
        // Honest power extends the adversary's race block.
        accept(true, tie_adv_miner_);
        accept(false, miner);
      } else {
        accept(false, tie_honest_miner_);
        accept(false, miner);
      }
      reset();
      return;
    }
    switch (private_.size()) {
      case 0:
        accept(false, miner);
        break;
      case 1:
        // Publish the single withheld block and race.
        tie_ = true;
        tie_adv_miner_ = private_.front();
        tie_honest_miner_ = miner;
        private_.clear();
        break;
      case 2:
        // Publish both; the honest block is orphaned.
        accept(true, private_[0]);
        accept(true, private_[1]);
        private_.clear();
        break;
      default:
        // Far ahead: release one block; it is safely buried by the
        // remaining lead, the honest block is orphaned.
        accept(true, private_.front());
        private_.pop_front();
        break;
    }
  }

  void flush() {
    // End of run: a strictly longer private branch wins; an unresolved
    // tie keeps the first-seen honest block.
    if (tie_) {
      accept(false, tie_honest_miner_);
      reset();
    }
    for (NodeId m : private_) accept(true, m);
    private_.clear();
  }

  const std::vector<std::pair<bool, NodeId>>& main_chain() const {
    return chain_;
  }
  std::uint64_t adversary_blocks() const { return adversary_count_; }

 private:
  void accept(bool adversarial, NodeId miner) {
    chain_.emplace_back(adversarial, miner);
    if (adversarial) ++adversary_count_;
  }
  void reset() {
    tie_ = false;
    tie_adv_miner_ = kNoNode;
    tie_honest_miner_ = kNoNode;
  }

  double gamma_;
  bool selfish_;
  bool tie_ = false;
  NodeId tie_adv_miner_ = kNoNode;
  NodeId tie_honest_miner_ = kNoNode;
  std::deque<NodeId> private_;
  std::vector<std::pair<bool, NodeId>> chain_;
  std::uint64_t adversary_count_ = 0;
};

}  // namespace

SelectionOutcome select_underlying_chain(const MinerPool& miners,
                                         const Digest& genesis_puzzle,
                                         const UnderlyingChainParams& params,
                                         const Keyring& keys, Rng& rng) {
  SelfishChain chain(params.gamma, params.selfish_mining);
  Rng mine_rng = rng.derive("underlying-mining");
  Rng race_rng = rng.derive("underlying-race");

  for (std::uint64_t round = 0; round < params.duration_rounds; ++round) {
    for (NodeId m : miners.honest)
      if (mine_rng.bernoulli(params.pow.p)) chain.honest_block(m, race_rng);
    for (NodeId m : miners.adversary)
      if (mine_rng.bernoulli(params.pow.p)) chain.adversary_block(m, race_rng);
  }
  chain.flush();

  SelectionOutcome out;
  out.method = SelectionMethod::PowUnderlyingChain;
  const auto& blocks = chain.main_chain();
  out.quota_met = blocks.size() >= params.quota;
  out.adversary_block_fraction =
      blocks.empty() ? 0.0
                     : static_cast<double>(chain.adversary_blocks()) /
                           static_cast<double>(blocks.size());

  const std::size_t take = std::min<std::size_t>(params.quota, blocks.size());
  const std::size_t start = blocks.size() - take;
  for (std::size_t i = start; i < blocks.size(); ++i) {
    Seat seat;
    seat.node = blocks[i].second;
    seat.pubkey = seat_key(keys, blocks[i].second, i);
    seat.solution_round = i;
    out.snodes.push_back(seat);
  }
  (void)genesis_puzzle;
  return out;
}

std::uint32_t list_difference(const std::vector<Seat>& proposed,
                              const std::vector<Seat>& local) {
  std::set<NodeId> local_nodes;
  std::set<Digest> local_keys;
  for (const auto& s : local) {
    local_nodes.insert(s.node);
    local_keys.insert(s.pubkey);
  }
  std::uint32_t diff = 0;
  for (const auto& s : proposed)
    if (local_keys.count(s.pubkey) == 0) ++diff;
  return diff;
}

SelectionOutcome select_reference_committee(const ReferenceCommittee& committee,
                                            const MinerPool& miners,
                                            const Digest& puzzle,
                                            const ReferenceCommitteeParams& params,
                                            const Keyring& keys, Rng& rng) {
  if (committee.members.empty()) throw std::invalid_argument("empty committee");
  const auto u = static_cast<std::uint32_t>(committee.members.size());
  const std::uint32_t f = (u - 1) / 3;
  const std::uint32_t quorum = 2 * f + 1;

  Rng mine_rng = rng.derive("refcomm-mining");
  Rng delay_rng = rng.derive("refcomm-delay");

  // Mining with a per-epoch fixed puzzle; solutions do not form a chain.
  // The adversary both starts head_start ticks early and delays honest
  // submissions up to delta, so per-member arrival orders differ.
  struct Found {
    Solution sol;
    bool adversarial;
    Tick found_at;
  };
  std::vector<Found> found;
  std::uint64_t seat_seq = 0;
  // Mine past the quota so a censoring leader has substitution material
  // and member views have slack to differ.
  const std::uint64_t target = static_cast<std::uint64_t>(params.quota) +
                               params.k_threshold +
                               std::max(params.censor_amount, 4u) + 8;

  for (std::uint64_t tick = 0; tick < params.max_rounds; ++tick) {
    for (NodeId m : miners.adversary) {
      if (auto sol = mine_round(m, puzzle, params.pow, tick, keys, mine_rng)) {
        sol->pubkey = seat_key(keys, m, seat_seq++);
        found.push_back({*sol, true, static_cast<Tick>(tick)});
      }
    }
    if (tick >= static_cast<std::uint64_t>(params.adversary_head_start)) {
      for (NodeId m : miners.honest) {
        if (auto sol = mine_round(m, puzzle, params.pow, tick, keys, mine_rng)) {
          sol->pubkey = seat_key(keys, m, seat_seq++);
          found.push_back({*sol, false, static_cast<Tick>(tick)});
        }
      }
    }
    if (found.size() >= target) break;
  }

  SelectionOutcome out;
  out.method = SelectionMethod::PowReferenceCommittee;
  if (found.size() < params.quota) {
    out.quota_met = false;
    return out;
  }

  // Per-member local views: adversary submissions arrive in one tick,
  // honest ones after an adversary-chosen delay in [1, delta].
  std::vector<std::vector<Seat>> views(u);
  for (std::uint32_t j = 0; j < u; ++j) {
    std::vector<std::pair<Tick, std::size_t>> arrivals;
    arrivals.reserve(found.size());
    for (std::size_t i = 0; i < found.size(); ++i) {
      const Tick delay =
          found[i].adversarial ? 1 : delay_rng.range(1, std::max<Tick>(params.delta, 1));
      arrivals.emplace_back(found[i].found_at + delay, i);
    }
    std::stable_sort(arrivals.begin(), arrivals.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::uint32_t q = 0; q < params.quota; ++q) {
      const auto& fnd = found[arrivals[q].second];
      Seat seat;
      seat.node = fnd.sol.node;
      seat.pubkey = fnd.sol.pubkey;
      seat.solution_round = fnd.sol.round;
      views[j].push_back(seat);
    }
  }

  // Later adversary solutions, the censorship substitution pool.
  std::vector<Seat> late_adversarial;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (!found[i].adversarial) continue;
    Seat seat;
    seat.node = found[i].sol.node;
    seat.pubkey = found[i].sol.pubkey;
    seat.solution_round = found[i].sol.round;
    late_adversarial.push_back(seat);
  }

  for (std::uint32_t view = 0; view < params.max_views; ++view) {
    const std::uint32_t leader_idx = (committee.leader_index + view) % u;
    const NodeId leader = committee.members[leader_idx];
    const bool leader_corrupt = committee.corrupted.count(leader) != 0;

    std::vector<Seat> proposal = views[leader_idx];
    if (leader_corrupt && params.malicious_leader_censors) {
      // Swap honest seats for adversary solutions found later.  The
      // default budget is exactly k_T, the most the threshold vote lets
      // through; a larger censor_amount exercises the rejection path.
      const std::uint32_t budget = params.censor_amount != 0
                                       ? params.censor_amount
                                       : params.k_threshold;
      std::uint32_t swapped = 0;
      std::set<Digest> present;
      for (const auto& s : proposal) present.insert(s.pubkey);
      for (auto& seat : proposal) {
        if (swapped >= budget) break;
        bool is_adv = false;
        for (const auto& a : late_adversarial)
          if (a.pubkey == seat.pubkey) is_adv = true;
        if (is_adv) continue;
        for (const auto& candidate : late_adversarial) {
          if (present.count(candidate.pubkey) != 0) continue;
          seat = candidate;
          present.insert(candidate.pubkey);
          ++swapped;
          break;
        }
      }
    }

    std::uint32_t yes = 0;
    for (std::uint32_t j = 0; j < u; ++j) {
      const NodeId member = committee.members[j];
      if (committee.corrupted.count(member) != 0) {
        if (leader_corrupt) ++yes;  // colludes with its own leader
        continue;
      }
      if (list_difference(proposal, views[j]) <= params.k_threshold) ++yes;
    }

    if (yes >= quorum) {
      out.snodes = proposal;
      out.quota_met = out.snodes.size() >= params.quota;
      out.view_changes = view;
      return out;
    }
    out.view_changes = view + 1;
  }

  out.epoch_stalled = true;
  out.quota_met = false;
  return out;
}

SelectionOutcome select_permissioned(const std::vector<RosterEntry>& roster,
                                     Epoch epoch) {
  SelectionOutcome out;
  out.method = SelectionMethod::PermissionedRoster;
  out.epoch = epoch;
  std::set<Digest> seen;
  for (const auto& entry : roster) {
    if (!seen.insert(entry.pubkey).second)
      throw std::invalid_argument("duplicate key in roster");
    Seat seat;
    seat.node = entry.node;
    seat.pubkey = entry.pubkey;
    out.snodes.push_back(seat);
  }
  out.quota_met = !out.snodes.empty();
  return out;
}

SelectionOutcome select_pos_lottery(
    const std::vector<std::pair<NodeId, std::uint64_t>>& stakes, const Digest& xi,
    std::uint32_t quota, const Keyring& keys, Epoch epoch) {
  SelectionOutcome out;
  out.method = SelectionMethod::PosLottery;
  out.epoch = epoch;
  std::uint64_t total = 0;
  for (const auto& [node, stake] : stakes) total += stake;
  if (total == 0 || stakes.empty()) {
    out.quota_met = false;
    return out;
  }
  // Follow-the-coin: each seat hashes (xi, seat) onto the stake line.
  for (std::uint32_t seat_idx = 0; seat_idx < quota; ++seat_idx) {
    Sha256 h;
    h.update(xi);
    h.update_u32(seat_idx);
    std::uint64_t point = h.finish().low64() % total;
    NodeId winner = stakes.front().first;
    for (const auto& [node, stake] : stakes) {
      if (point < stake) {
        winner = node;
        break;
      }
      point -= stake;
    }
    Seat seat;
    seat.node = winner;
    seat.pubkey = seat_key(keys, winner, seat_idx);
    out.snodes.push_back(seat);
  }
  out.quota_met = out.snodes.size() == quota;
  return out;
}

}  // namespace shardsim::selection

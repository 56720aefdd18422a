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

#include "shardsim/simnet.hpp"

#include <algorithm>

namespace shardsim::net {

NetModel NetModel::synchronous(Tick round_len) {
  if (round_len < 1) throw std::invalid_argument("round length must be >= 1");
  NetModel m;
  m.kind = NetKind::Synchronous;
  m.round_len = round_len;
  return m;
}

NetModel NetModel::partial_sync_a(Tick delta) {
  if (delta < 1) throw std::invalid_argument("delta must be >= 1");
  NetModel m;
  m.kind = NetKind::PartialSyncA;
  m.delta = delta;
  return m;
}

NetModel NetModel::partial_sync_b(Tick delta, Tick gst) {
  if (delta < 1) throw std::invalid_argument("delta must be >= 1");
  if (gst < 0) throw std::invalid_argument("gst must be >= 0");
  NetModel m;
  m.kind = NetKind::PartialSyncB;
  m.delta = delta;
  m.gst = gst;
  return m;
}

DelayPolicy uniform_delay_policy() {
  return [](NodeId, NodeId, Tick, Tick lo, Tick hi, Rng& rng) {
    return rng.range(lo, hi);
  };
}

DelayPolicy worst_case_delay_policy() {
  return [](NodeId, NodeId, Tick, Tick, Tick hi, Rng&) { return hi; };
}

DelayPolicy targeted_delay_policy(std::set<NodeId> fast) {
  return [fast = std::move(fast)](NodeId from, NodeId to, Tick, Tick lo, Tick hi,
                                  Rng&) {
    return (fast.count(from) != 0 && fast.count(to) != 0) ? lo : hi;
  };
}

DelayPolicy fixed_delay_policy(Tick delay) {
  return [delay](NodeId, NodeId, Tick, Tick lo, Tick hi, Rng&) {
    return std::clamp(delay, lo, hi);
  };
}

Network::Network(NetModel model, std::uint64_t seed)
    : model_(model), rng_(seed), policy_(uniform_delay_policy()) {}

void Network::register_node(NodeId id) {
  nodes_.insert(id);
  alive_.insert(id);
}

void Network::set_alive(NodeId id, bool alive) {
  if (alive)
    alive_.insert(id);
  else
    alive_.erase(id);
}

std::optional<Tick> Network::protocol_visible_delta() const {
  switch (model_.kind) {
    case NetKind::Synchronous: return model_.round_len;
    case NetKind::PartialSyncA: return std::nullopt;  // bound exists, unusable
    case NetKind::PartialSyncB: return model_.delta;
  }
  return std::nullopt;
}

Tick Network::model_delay(NodeId from, NodeId to, Tick sent_at) {
  Tick lo = 1;
  Tick hi = 1;
  switch (model_.kind) {
    case NetKind::Synchronous: {
      // Next round boundary strictly after sent_at.
      Tick boundary = (sent_at / model_.round_len + 1) * model_.round_len;
      return boundary - sent_at;
    }
    case NetKind::PartialSyncA:
      hi = model_.delta;
      break;
    case NetKind::PartialSyncB:
      // Arrival never later than max(GST, sent_at) + delta.
      hi = std::max<Tick>(model_.gst - sent_at, 0) + model_.delta;
      break;
  }
  Tick chosen = policy_ ? policy_(from, to, sent_at, lo, hi, rng_) : hi;
  return std::clamp(chosen, lo, hi);  // causality floor of one tick
}

std::optional<std::uint64_t> Network::send(NodeId from, NodeId to,
                                           PayloadPtr payload) {
  if (nodes_.count(to) == 0) {
    audit_.push_back({now_, from, to, "unknown recipient"});
    return std::nullopt;
  }
  Envelope env;
  env.seq = seq_++;
  env.from = from;
  env.to = to;
  env.sent_at = now_;
  env.deliver_at = now_ + model_delay(from, to, now_);
  env.payload = std::move(payload);
  bytes_sent_[from] += env.payload->wire_size();
  queue_.push(std::move(env));
  return seq_ - 1;
}

void Network::broadcast(NodeId from, const std::vector<NodeId>& to,
                        PayloadPtr payload) {
  for (NodeId id : to) send(from, id, payload);
}

std::uint64_t Network::set_timer(NodeId node, Tick delay, PayloadPtr payload) {
  Envelope env;
  env.seq = seq_++;
  env.from = node;
  env.to = node;
  env.sent_at = now_;
  env.deliver_at = now_ + std::max<Tick>(delay, 1);
  env.payload = std::move(payload);
  queue_.push(std::move(env));
  return seq_ - 1;
}

std::optional<Tick> Network::next_deliver_at() const {
  if (queue_.empty()) return std::nullopt;
  return queue_.top().deliver_at;
}

void Network::record(const Envelope& env) {
  // Self-envelopes are local timers, not transmissions; the bound does
  // not apply to them.
  if (env.from != env.to && model_.kind == NetKind::PartialSyncB &&
      env.sent_at >= model_.gst && env.deliver_at - env.sent_at > model_.delta)
    bound_ok_ = false;
  if (tracing_)
    trace_.push_back({env.deliver_at, env.from, env.to,
                      env.payload->type_name(), env.payload->wire_size()});
}

std::vector<Envelope> Network::next_batch() {
  std::vector<Envelope> out;
  if (queue_.empty()) return out;
  const Tick t = queue_.top().deliver_at;
  now_ = std::max(now_, t);
  while (!queue_.empty() && queue_.top().deliver_at == t) {
    Envelope env = queue_.top();
    queue_.pop();
    record(env);
    if (alive_.count(env.to) != 0) out.push_back(std::move(env));
  }
  return out;
}

std::vector<Envelope> Network::advance(Tick until) {
  if (until < now_) throw std::invalid_argument("advance target in the past");
  std::vector<Envelope> out;
  while (!queue_.empty() && queue_.top().deliver_at <= until) {
    Envelope env = queue_.top();
    queue_.pop();
    now_ = std::max(now_, env.deliver_at);
    record(env);
    if (alive_.count(env.to) != 0) out.push_back(std::move(env));
  }
  now_ = std::max(now_, until);
  return out;
}

}  // namespace shardsim::net

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

#include <deque>
#include <functional>
#include <memory>
#include <queue>
#include <set>
#include <string>

#include "shardsim/common.hpp"

namespace shardsim::net {

enum class NetKind : std::uint8_t {
  Synchronous,   // delivery at the next round boundary
  PartialSyncA,  // bound delta exists but is hidden from protocols
  PartialSyncB,  // known delta, unknown GST
};

struct NetModel {
  NetKind kind = NetKind::PartialSyncB;
  Tick round_len = 1;  // Synchronous only
  Tick delta = 1;      // PartialSyncA/B
  Tick gst = 0;        // PartialSyncB only

  static NetModel synchronous(Tick round_len);
  static NetModel partial_sync_a(Tick delta);
  static NetModel partial_sync_b(Tick delta, Tick gst);
};

/// Protocol message carried by an envelope.  Concrete messages subclass
/// this; wire_size feeds the bandwidth meter, type_name the trace log.
struct Payload {
  virtual ~Payload() = default;
  virtual const char* type_name() const = 0;
  virtual std::size_t wire_size() const = 0;
};

using PayloadPtr = std::shared_ptr<const Payload>;

struct Envelope {
  std::uint64_t seq = 0;  // insertion sequence, the deterministic tie-break
  NodeId from = kNoNode;
  NodeId to = kNoNode;
  Tick sent_at = 0;
  Tick deliver_at = 0;
  PayloadPtr payload;
};

/// Adversary hook: picks the actual delay within the window the model
/// allows.  Returning a value outside [lo, hi] is clamped.
using DelayPolicy = std::function<Tick(NodeId from, NodeId to, Tick sent_at,
                                       Tick lo, Tick hi, Rng& rng)>;

DelayPolicy uniform_delay_policy();
DelayPolicy worst_case_delay_policy();
/// Maximal delay for messages touching nodes outside `fast`, minimal for
/// the rest; used by targeted-delay adversaries.
DelayPolicy targeted_delay_policy(std::set<NodeId> fast);
DelayPolicy fixed_delay_policy(Tick delay);

struct AuditRecord {
  Tick tick = 0;
  NodeId from = kNoNode;
  NodeId to = kNoNode;
  std::string reason;
};

struct TraceEntry {
  Tick tick = 0;
  NodeId from = kNoNode;
  NodeId to = kNoNode;
  std::string type;
  std::size_t bytes = 0;
};

/// Single-run discrete-event message fabric.  Deterministic given
/// (model, seed, delay policy): equal deliver_at ties break on insertion
/// sequence.  Timers are modeled as self-envelopes outside adversary
/// control.
class Network {
 public:
  Network(NetModel model, std::uint64_t seed);

  void register_node(NodeId id);
  void set_alive(NodeId id, bool alive);
  bool alive(NodeId id) const { return nodes_.count(id) != 0 && alive_.count(id) != 0; }

  void set_delay_policy(DelayPolicy policy) { policy_ = std::move(policy); }

  /// The bound a protocol is allowed to see.  PartialSyncA hides it.
  std::optional<Tick> protocol_visible_delta() const;
  const NetModel& model() const { return model_; }
  Tick now() const { return now_; }

  /// Schedules one point-to-point message; returns the envelope sequence,
  /// or nullopt when the recipient is unknown (dropped with an audit
  /// record).
  std::optional<std::uint64_t> send(NodeId from, NodeId to, PayloadPtr payload);
  /// Broadcast is n point-to-point sends; bandwidth counts each.
  void broadcast(NodeId from, const std::vector<NodeId>& to, PayloadPtr payload);
  /// Self-timer: fires at now + delay exactly (min 1 tick).
  std::uint64_t set_timer(NodeId node, Tick delay, PayloadPtr payload);

  bool has_pending() const { return !queue_.empty(); }
  std::optional<Tick> next_deliver_at() const;
  /// Pops every envelope due at the earliest pending tick and advances the
  /// clock to it.  Envelopes to dead nodes are dropped silently (crash is
  /// node state, not network state).
  std::vector<Envelope> next_batch();
  /// Delivers everything due up to and including `until`.
  std::vector<Envelope> advance(Tick until);

  void enable_trace(bool on) { tracing_ = on; }
  const std::vector<TraceEntry>& trace() const { return trace_; }
  const std::vector<AuditRecord>& audit() const { return audit_; }
  const std::map<NodeId, std::uint64_t>& bytes_sent() const { return bytes_sent_; }
  std::uint64_t total_messages() const { return seq_; }

  /// Full-trace check of the PartialSyncB bound: every envelope sent at or
  /// after GST arrived within delta.  Other models trivially pass.
  bool delivery_bound_respected() const { return bound_ok_; }

 private:
  Tick model_delay(NodeId from, NodeId to, Tick sent_at);
  void record(const Envelope& env);

  NetModel model_;
  Rng rng_;
  DelayPolicy policy_;
  Tick now_ = 0;
  std::uint64_t seq_ = 0;
  std::set<NodeId> nodes_;
  std::set<NodeId> alive_;

  struct QueueCmp {
    bool operator()(const Envelope& a, const Envelope& b) const {
      if (a.deliver_at != b.deliver_at) return a.deliver_at > b.deliver_at;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Envelope, std::vector<Envelope>, QueueCmp> queue_;

  bool tracing_ = false;
  bool bound_ok_ = true;
  std::vector<TraceEntry> trace_;
  std::vector<AuditRecord> audit_;
  std::map<NodeId, std::uint64_t> bytes_sent_;
};

}  // namespace shardsim::net

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

#include <array>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace shardsim {

using Tick = std::int64_t;
using NodeId = std::uint32_t;
using ShardId = std::uint32_t;
using Epoch = std::uint32_t;

constexpr NodeId kNoNode = 0xffffffffu;

/// 32-byte digest, the universal identifier type (tx ids, addresses,
/// puzzles, randomness values).
struct Digest : public std::array<std::uint8_t, 32> {
  Digest() { fill(0); }

  std::string hex() const;
  static Digest from_hex(std::string_view hex);

  /// Low 64 bits, little-endian over bytes [0, 8).  Byte 0 is the least
  /// significant byte by convention.
  std::uint64_t low64() const {
    std::uint64_t v = 0;
    std::memcpy(&v, data(), 8);
    return v;
  }

  bool is_zero() const {
    for (auto b : *this)
      if (b != 0) return false;
    return true;
  }
};

/// SHA-256 over arbitrary byte runs.  Incremental interface plus one-shot
/// helpers; every identifier in the simulator derives from this.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(const void* data, std::size_t len);
  Sha256& update(std::string_view s) { return update(s.data(), s.size()); }
  Sha256& update(const Digest& d) { return update(d.data(), d.size()); }
  Sha256& update_u32(std::uint32_t v);
  Sha256& update_u64(std::uint64_t v);
  Digest finish();

 private:
  void* ctx_;
};

Digest sha256(const void* data, std::size_t len);
Digest sha256(std::string_view s);

/// Growable little-endian byte sink used for canonical serialization.
/// Integers are little-endian; variable-length fields carry a u32 length
/// prefix.  The exact layouts are documented in docs/FORMATS.md.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void raw(const void* data, std::size_t len);
  void digest(const Digest& d) { raw(d.data(), d.size()); }
  void bytes(const std::vector<std::uint8_t>& b);

  const std::vector<std::uint8_t>& data() const { return buf_; }
  std::size_t size() const { return buf_.size(); }
  Digest sha256d() const { return ::shardsim::sha256(buf_.data(), buf_.size()); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  Digest digest();
  std::vector<std::uint8_t> bytes();
  bool exhausted() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const;
  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_ = 0;
};

/// Deterministic pseudo-random source.  All randomized behavior in a run
/// flows through one of these so that (config, seed) replays are exact.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, bound). bound must be > 0.
  std::uint64_t uniform(std::uint64_t bound);
  /// Uniform in [lo, hi] inclusive.
  std::int64_t range(std::int64_t lo, std::int64_t hi);
  /// Uniform real in [0, 1).
  double uniform01();
  bool bernoulli(double p) { return uniform01() < p; }
  /// Poisson sample by inversion; suitable for the small rates used here.
  std::uint32_t poisson(double mean);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Independent substream tied to a label; used to decouple workload
  /// randomness from protocol randomness.
  Rng derive(std::string_view label) const;

 private:
  std::mt19937_64 eng_;
};

/// Counter-mode keyed-hash stream: expands a 32-byte seed into an unbounded
/// uniform bit stream.  Drives the assignment and reconfiguration
/// permutations so they are reproducible from a digest seed alone.
class HashStream {
 public:
  explicit HashStream(const Digest& key) : key_(key) {}

  std::uint64_t next_u64();
  /// Uniform in [0, bound) by rejection sampling (no modulo bias).
  std::uint64_t uniform(std::uint64_t bound);

  /// Seeded Fisher-Yates permutation of {0, .., n-1}.
  std::vector<std::uint32_t> permutation(std::uint32_t n);

 private:
  Digest key_;
  std::uint64_t counter_ = 0;
  Digest block_;
  std::size_t avail_ = 0;
};

/// Simulated signature: a keyed hash tag.  The keyring stands in for ideal
/// authenticated channels; it owns every secret and can therefore verify
/// any (signer, message, tag) triple.
struct Signature {
  NodeId signer = kNoNode;
  Digest tag;

  bool operator==(const Signature& o) const {
    return signer == o.signer && tag == o.tag;
  }
};

class Keyring {
 public:
  explicit Keyring(std::uint64_t seed);

  /// Idempotent; key material is a pure function of (seed, node).
  const Digest& register_node(NodeId node);
  const Digest& public_key(NodeId node) const;
  bool known(NodeId node) const { return pub_.count(node) != 0; }

  Signature sign(NodeId node, const Digest& message) const;
  bool verify(NodeId claimed_signer, const Digest& message,
              const Signature& sig) const;

 private:
  Digest secret(NodeId node) const;
  Digest root_;
  std::map<NodeId, Digest> pub_;
};

/// Thrown when a run violates one of the protocol invariants that are
/// asserted inline (double spend, conflicting commit, budget breach, ...).
/// The runner turns this into a reproducer bundle.
struct InvariantBreach : public std::runtime_error {
  InvariantBreach(std::string what, Tick tick)
      : std::runtime_error(std::move(what)), tick(tick) {}
  Tick tick;
};

std::string to_hex(const std::uint8_t* data, std::size_t len);

}  // namespace shardsim

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

#include "shardsim/common.hpp"

#include <openssl/evp.h>

#include <cmath>

namespace shardsim {

namespace {
constexpr char kHexDigits[] = "0123456789abcdef";
}

std::string to_hex(const std::uint8_t* data, std::size_t len) {
  std::string out;
  out.reserve(len * 2);
  for (std::size_t i = 0; i < len; ++i) {
    out.push_back(kHexDigits[data[i] >> 4]);
    out.push_back(kHexDigits[data[i] & 0xf]);
  }
  return out;
}

std::string Digest::hex() const { return to_hex(data(), size()); }

Digest Digest::from_hex(std::string_view hex) {
  if (hex.size() != 64) throw std::invalid_argument("digest hex must be 64 chars");
  auto nib = [](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    throw std::invalid_argument("bad hex digit");
  };
  Digest d;
  for (std::size_t i = 0; i < 32; ++i)
    d[i] = static_cast<std::uint8_t>(nib(hex[2 * i]) << 4 | nib(hex[2 * i + 1]));
  return d;
}

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  if (ctx_ == nullptr ||
      EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 init failed");
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

Sha256& Sha256::update(const void* data, std::size_t len) {
  if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, len) != 1)
    throw std::runtime_error("sha256 update failed");
  return *this;
}

Sha256& Sha256::update_u32(std::uint32_t v) {
  std::uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  return update(b, 4);
}

Sha256& Sha256::update_u64(std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  return update(b, 8);
}

Digest Sha256::finish() {
  Digest d;
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), d.data(), &len) != 1 ||
      len != d.size())
    throw std::runtime_error("sha256 final failed");
  return d;
}

Digest sha256(const void* data, std::size_t len) {
  Sha256 h;
  h.update(data, len);
  return h.finish();
}

Digest sha256(std::string_view s) { return sha256(s.data(), s.size()); }

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::raw(const void* data, std::size_t len) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  buf_.insert(buf_.end(), p, p + len);
}

void ByteWriter::bytes(const std::vector<std::uint8_t>& b) {
  u32(static_cast<std::uint32_t>(b.size()));
  raw(b.data(), b.size());
}

void ByteReader::need(std::size_t n) const {
  if (pos_ + n > buf_.size()) throw std::out_of_range("byte reader underrun");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return buf_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
  return v;
}

Digest ByteReader::digest() {
  need(32);
  Digest d;
  std::memcpy(d.data(), buf_.data() + pos_, 32);
  pos_ += 32;
  return d;
}

std::vector<std::uint8_t> ByteReader::bytes() {
  std::uint32_t len = u32();
  need(len);
  std::vector<std::uint8_t> out(buf_.begin() + static_cast<long>(pos_),
                                buf_.begin() + static_cast<long>(pos_ + len));
  pos_ += len;
  return out;
}

std::uint64_t Rng::uniform(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform bound must be positive");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t v;
  do {
    v = eng_();
  } while (v >= limit);
  return v % bound;
}

std::int64_t Rng::range(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw std::invalid_argument("bad range");
  return lo + static_cast<std::int64_t>(
                  uniform(static_cast<std::uint64_t>(hi - lo) + 1));
}

double Rng::uniform01() {
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

std::uint32_t Rng::poisson(double mean) {
  if (mean <= 0.0) return 0;
  // Knuth inversion; mean values in this simulator stay small.
  const double limit = std::exp(-mean);
  double prod = 1.0;
  std::uint32_t count = 0;
  do {
    prod *= uniform01();
    if (prod <= limit) break;
    ++count;
  } while (count < 100000);
  return count;
}

Rng Rng::derive(std::string_view label) const {
  Rng copy = *this;
  std::uint64_t base = copy.eng_();
  Sha256 h;
  h.update_u64(base);
  h.update(label);
  return Rng(h.finish().low64());
}

std::uint64_t HashStream::next_u64() {
  if (avail_ < 8) {
    Sha256 h;
    h.update(key_);
    h.update_u64(counter_++);
    block_ = h.finish();
    avail_ = block_.size();
  }
  std::uint64_t v = 0;
  std::memcpy(&v, block_.data() + (block_.size() - avail_), 8);
  avail_ -= 8;
  return v;
}

std::uint64_t HashStream::uniform(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform bound must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % bound;
}

std::vector<std::uint32_t> HashStream::permutation(std::uint32_t n) {
  std::vector<std::uint32_t> p(n);
  for (std::uint32_t i = 0; i < n; ++i) p[i] = i;
  for (std::uint32_t i = n; i > 1; --i) {
    auto j = static_cast<std::uint32_t>(uniform(i));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

Keyring::Keyring(std::uint64_t seed) {
  Sha256 h;
  h.update("keyring-root");
  h.update_u64(seed);
  root_ = h.finish();
}

Digest Keyring::secret(NodeId node) const {
  Sha256 h;
  h.update(root_);
  h.update_u32(node);
  h.update("secret");
  return h.finish();
}

const Digest& Keyring::register_node(NodeId node) {
  auto it = pub_.find(node);
  if (it != pub_.end()) return it->second;
  Sha256 h;
  h.update(secret(node));
  h.update("pub");
  return pub_.emplace(node, h.finish()).first->second;
}

const Digest& Keyring::public_key(NodeId node) const {
  auto it = pub_.find(node);
  if (it == pub_.end()) throw std::invalid_argument("unregistered node key");
  return it->second;
}

Signature Keyring::sign(NodeId node, const Digest& message) const {
  if (pub_.count(node) == 0) throw std::invalid_argument("unregistered signer");
  Sha256 h;
  h.update(secret(node));
  h.update(message);
  return Signature{node, h.finish()};
}

bool Keyring::verify(NodeId claimed_signer, const Digest& message,
                     const Signature& sig) const {
  if (sig.signer != claimed_signer) return false;
  if (pub_.count(claimed_signer) == 0) return false;
  Sha256 h;
  h.update(secret(claimed_signer));
  h.update(message);
  return h.finish() == sig.tag;
}

}  // namespace shardsim

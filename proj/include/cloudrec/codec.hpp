// Copyright 2026 The cloudrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Systematic Reed-Solomon erasure coding over GF(256).
//
// The generator is derived from a (k+p) x k Vandermonde matrix V with
// evaluation points 0, 1, ..., k+p-1: G = V * inverse(V[0..k)), which puts the
// identity on top. The parity block is then column-normalized so its first row
// is all ones. Column scaling keeps every square submatrix nonsingular, so any
// k of the k+p symbols reconstruct the batch, and a single parity symbol is the
// XOR of the sources. Parity row i depends only on k, never on p.

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cloudrec/gf256.hpp"
#include "cloudrec/types.hpp"

namespace cloudrec::codec {

constexpr std::size_t kMaxSymbols = 256;

enum class CodecErrc {
  kEmptyBatch,
  kSymbolLengthMismatch,
  kInsufficientSymbols,
  kMetadataMismatch,
  kInvalidParams,
};

class CodecError : public std::runtime_error {
 public:
  CodecError(CodecErrc code, const std::string& what, std::size_t missing = 0, std::size_t parity = 0)
      : std::runtime_error(what), code_(code), missing_(missing), parity_(parity) {}

  CodecErrc code() const { return code_; }
  // Only meaningful for kInsufficientSymbols.
  std::size_t missing_count() const { return missing_; }
  std::size_t parity_count() const { return parity_; }

 private:
  CodecErrc code_;
  std::size_t missing_;
  std::size_t parity_;
};

struct MemberInfo {
  FlowId flow_id = 0;
  Seq seq = 0;
  std::uint16_t orig_len = 0;

  Entry entry() const { return {flow_id, seq}; }
  friend bool operator==(const MemberInfo&, const MemberInfo&) = default;
};

struct SourceSymbol {
  FlowId flow_id = 0;
  Seq seq = 0;
  std::vector<std::uint8_t> payload;
  std::uint16_t orig_len = 0;

  Entry entry() const { return {flow_id, seq}; }
  friend bool operator==(const SourceSymbol&, const SourceSymbol&) = default;
};

struct ParitySymbol {
  std::uint8_t parity_index = 0;
  std::vector<std::uint8_t> payload;
  std::vector<MemberInfo> members;

  friend bool operator==(const ParitySymbol&, const ParitySymbol&) = default;
};

struct CodingParams {
  std::size_t k_max = 6;
  std::size_t num_parity_cross = 2;
  std::size_t num_parity_in = 1;

  void validate() const {
    if (k_max < 1 || k_max + num_parity_cross > kMaxSymbols)
      throw CodecError(CodecErrc::kInvalidParams, "k_max out of range");
    if (num_parity_cross < 1) throw CodecError(CodecErrc::kInvalidParams, "num_parity_cross must be >= 1");
  }
};

inline SourceSymbol make_source(FlowId flow, Seq seq, std::span<const std::uint8_t> bytes) {
  if (bytes.size() > kMaxPayload) throw CodecError(CodecErrc::kSymbolLengthMismatch, "payload exceeds max payload");
  return {flow, seq, {bytes.begin(), bytes.end()}, static_cast<std::uint16_t>(bytes.size())};
}

// Zero-pads every payload to the longest one in the batch.
inline void pad_to_common(std::span<SourceSymbol> sources) {
  std::size_t len = 0;
  for (const auto& s : sources) len = std::max(len, s.payload.size());
  for (auto& s : sources) s.payload.resize(len, 0);
}

// p x k parity block of the systematic generator.
inline gf256::Matrix parity_matrix(std::size_t k, std::size_t p) {
  if (k == 0 || p == 0 || k + p > kMaxSymbols)
    throw CodecError(CodecErrc::kInvalidParams, "parity_matrix: need k >= 1, p >= 1, k + p <= 256");
  gf256::Matrix top(k, k);
  gf256::Matrix bottom(p, k);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < k; ++c) top(r, c) = gf256::pow(static_cast<std::uint8_t>(r), static_cast<unsigned>(c));
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c < k; ++c)
      bottom(r, c) = gf256::pow(static_cast<std::uint8_t>(k + r), static_cast<unsigned>(c));
  gf256::Matrix parity = bottom * top.inverse();
  // Row 0 of the un-normalized block is the same for every p, so computing it
  // from `parity` keeps rows independent of p.
  for (std::size_t c = 0; c < k; ++c) {
    const std::uint8_t scale = gf256::inv(parity(0, c));
    for (std::size_t r = 0; r < p; ++r) parity(r, c) = gf256::mul(parity(r, c), scale);
  }
  return parity;
}

inline std::vector<ParitySymbol> encode_batch(std::span<const SourceSymbol> sources, std::size_t num_parity) {
  if (sources.empty()) throw CodecError(CodecErrc::kEmptyBatch, "encode_batch: empty batch");
  if (num_parity == 0 || sources.size() + num_parity > kMaxSymbols)
    throw CodecError(CodecErrc::kInvalidParams, "encode_batch: bad parity count");
  const std::size_t len = sources.front().payload.size();
  std::vector<MemberInfo> members;
  members.reserve(sources.size());
  for (const auto& s : sources) {
    if (s.payload.size() != len) throw CodecError(CodecErrc::kSymbolLengthMismatch, "encode_batch: payload lengths differ");
    if (s.orig_len > len) throw CodecError(CodecErrc::kSymbolLengthMismatch, "encode_batch: orig_len exceeds symbol length");
    for (const auto& m : members)
      if (m.flow_id == s.flow_id && m.seq == s.seq)
        throw CodecError(CodecErrc::kMetadataMismatch, "encode_batch: duplicate (flow, seq) in batch");
    members.push_back({s.flow_id, s.seq, s.orig_len});
  }

  const auto coeffs = parity_matrix(sources.size(), num_parity);
  std::vector<ParitySymbol> out(num_parity);
  for (std::size_t i = 0; i < num_parity; ++i) {
    out[i].parity_index = static_cast<std::uint8_t>(i);
    out[i].payload.assign(len, 0);
    out[i].members = members;
    for (std::size_t j = 0; j < sources.size(); ++j) gf256::mul_add_row(out[i].payload, sources[j].payload, coeffs(i, j));
  }
  return out;
}

// Reconstructs the batch members absent from `present`. Present payloads may
// be unpadded (orig_len bytes); recovered payloads are truncated to orig_len.
inline std::vector<SourceSymbol> decode_batch(std::span<const SourceSymbol> present, std::span<const ParitySymbol> parity) {
  if (parity.empty()) throw CodecError(CodecErrc::kMetadataMismatch, "decode_batch: no parity symbols");
  const auto& members = parity.front().members;
  const std::size_t k = members.size();
  const std::size_t len = parity.front().payload.size();
  if (k == 0) throw CodecError(CodecErrc::kEmptyBatch, "decode_batch: parity lists no members");

  // Distinct parity symbols ordered by index.
  std::vector<const ParitySymbol*> rows;
  for (const auto& p : parity) {
    if (p.members != members) throw CodecError(CodecErrc::kMetadataMismatch, "decode_batch: parity members disagree");
    if (p.payload.size() != len) throw CodecError(CodecErrc::kSymbolLengthMismatch, "decode_batch: parity lengths differ");
    if (k + p.parity_index >= kMaxSymbols) throw CodecError(CodecErrc::kMetadataMismatch, "decode_batch: parity index out of range");
    bool dup = false;
    for (const auto* r : rows) dup = dup || r->parity_index == p.parity_index;
    if (!dup) rows.push_back(&p);
  }
  std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->parity_index < b->parity_index; });

  std::vector<const SourceSymbol*> by_member(k, nullptr);
  for (const auto& s : present) {
    std::size_t idx = k;
    for (std::size_t j = 0; j < k; ++j)
      if (members[j].flow_id == s.flow_id && members[j].seq == s.seq) idx = j;
    if (idx == k) throw CodecError(CodecErrc::kMetadataMismatch, "decode_batch: present symbol is not a batch member");
    if (s.payload.size() > len) throw CodecError(CodecErrc::kSymbolLengthMismatch, "decode_batch: present payload too long");
    by_member[idx] = &s;
  }

  std::vector<std::size_t> missing;
  for (std::size_t j = 0; j < k; ++j)
    if (by_member[j] == nullptr) missing.push_back(j);
  if (missing.empty()) return {};
  if (missing.size() > rows.size())
    throw CodecError(CodecErrc::kInsufficientSymbols, "decode_batch: not enough symbols", missing.size(), rows.size());

  const std::size_t m = missing.size();
  const std::uint8_t max_index = rows[m - 1]->parity_index;
  const auto coeffs = parity_matrix(k, static_cast<std::size_t>(max_index) + 1);

  // Syndromes: parity minus the contribution of every present source.
  std::vector<std::vector<std::uint8_t>> syndromes(m);
  gf256::Matrix system(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = rows[i]->parity_index;
    syndromes[i] = rows[i]->payload;
    for (std::size_t j = 0; j < k; ++j)
      if (by_member[j] != nullptr) gf256::mul_add_row(syndromes[i], by_member[j]->payload, coeffs(row, j));
    for (std::size_t t = 0; t < m; ++t) system(i, t) = coeffs(row, missing[t]);
  }
  const auto solve = system.inverse();

  std::vector<SourceSymbol> out;
  out.reserve(m);
  for (std::size_t t = 0; t < m; ++t) {
    const auto& info = members[missing[t]];
    SourceSymbol s{info.flow_id, info.seq, std::vector<std::uint8_t>(len, 0), info.orig_len};
    for (std::size_t i = 0; i < m; ++i) gf256::mul_add_row(s.payload, syndromes[i], solve(t, i));
    s.payload.resize(std::min<std::size_t>(info.orig_len, len));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cloudrec::codec

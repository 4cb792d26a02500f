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

// Datagram layout. All integers are big-endian.
//
//   base header (32 bytes)
//     0  version       u8   (= 1)
//     1  pkt_type      u8
//     2  flags         u16
//     4  flow_id       u64
//    12  seq           u64
//    20  send_ts_us    u64
//    28  payload_len   u16
//    30  ext_len       u16
//   extension (ext_len bytes), depends on pkt_type
//     IN_CODED / CROSS_CODED:
//       batch_id u64, parity_index u8, num_parity u8, member_count u8,
//       symbol_len u16, member_count x (flow_id u64, seq u64, orig_len u16)
//     NACK / COOP_REQ / COOP_RESP:
//       entry_count u8, entry_count x (flow_id u64, seq u64)
//     CTRL:
//       ctrl_kind u8, arg u64, entry_count u8, entry_count x (flow_id u64, seq u64)
//     DATA / ACK: empty
//   payload (payload_len bytes)

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cloudrec/codec.hpp"
#include "cloudrec/types.hpp"

namespace cloudrec::wire {

constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kBaseHeaderSize = 32;
constexpr std::size_t kCodedExtFixed = 13;
constexpr std::size_t kMemberSize = 18;
constexpr std::size_t kEntrySize = 16;
constexpr std::size_t kMaxCount = 255;

enum class PacketType : std::uint8_t {
  kData = 0,
  kInCoded = 1,
  kCrossCoded = 2,
  kNack = 3,
  kAck = 4,
  kCoopReq = 5,
  kCoopResp = 6,
  kCtrl = 7,
};

inline std::string_view to_string(PacketType t) {
  switch (t) {
    case PacketType::kData: return "DATA";
    case PacketType::kInCoded: return "IN_CODED";
    case PacketType::kCrossCoded: return "CROSS_CODED";
    case PacketType::kNack: return "NACK";
    case PacketType::kAck: return "ACK";
    case PacketType::kCoopReq: return "COOP_REQ";
    case PacketType::kCoopResp: return "COOP_RESP";
    case PacketType::kCtrl: return "CTRL";
  }
  return "?";
}

namespace flags {
constexpr std::uint16_t kSelectiveDup = 1u << 0;
// COOP_RESP: responder does not hold the entry. CTRL confirm reply: do not recover.
constexpr std::uint16_t kNegative = 1u << 1;
// NACK raised by a timer rather than a sequence gap.
constexpr std::uint16_t kSpeculative = 1u << 2;
// DATA reconstructed by the egress DC.
constexpr std::uint16_t kRecovered = 1u << 3;
}  // namespace flags

enum class CtrlKind : std::uint8_t {
  kConfirmQuery = 1,
  kConfirmReply = 2,
  kFlowRegister = 3,
};

struct CodedExt {
  std::uint64_t batch_id = 0;
  std::uint8_t parity_index = 0;
  std::uint8_t num_parity = 0;
  std::uint16_t symbol_len = 0;
  std::vector<codec::MemberInfo> members;

  friend bool operator==(const CodedExt&, const CodedExt&) = default;
};

struct CtrlExt {
  CtrlKind kind = CtrlKind::kConfirmQuery;
  std::uint64_t arg = 0;
  std::vector<Entry> entries;

  friend bool operator==(const CtrlExt&, const CtrlExt&) = default;
};

// One protocol message. Only the parts relevant to `type` are serialized.
struct Message {
  PacketType type = PacketType::kData;
  std::uint16_t flags = 0;
  FlowId flow_id = 0;
  Seq seq = 0;
  std::uint64_t send_ts_us = 0;
  std::vector<std::uint8_t> payload;
  CodedExt coded;             // kInCoded, kCrossCoded
  std::vector<Entry> entries; // kNack, kCoopReq, kCoopResp
  CtrlExt ctrl;               // kCtrl

  bool is_coded() const { return type == PacketType::kInCoded || type == PacketType::kCrossCoded; }
  bool has_entries() const {
    return type == PacketType::kNack || type == PacketType::kCoopReq || type == PacketType::kCoopResp;
  }

  friend bool operator==(const Message&, const Message&) = default;
};

enum class WireErrc {
  kOk = 0,
  kTruncated,
  kBadVersion,
  kUnknownType,
  kLengthMismatch,
  kFieldOverflow,
};

inline std::string_view to_string(WireErrc e) {
  switch (e) {
    case WireErrc::kOk: return "Ok";
    case WireErrc::kTruncated: return "Truncated";
    case WireErrc::kBadVersion: return "BadVersion";
    case WireErrc::kUnknownType: return "UnknownType";
    case WireErrc::kLengthMismatch: return "LengthMismatch";
    case WireErrc::kFieldOverflow: return "FieldOverflow";
  }
  return "?";
}

class WireError : public std::runtime_error {
 public:
  WireError(WireErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  WireErrc code() const { return code_; }

 private:
  WireErrc code_;
};

inline std::size_t extension_size(const Message& m) {
  if (m.is_coded()) return kCodedExtFixed + m.coded.members.size() * kMemberSize;
  if (m.has_entries()) return 1 + m.entries.size() * kEntrySize;
  if (m.type == PacketType::kCtrl) return 10 + m.ctrl.entries.size() * kEntrySize;
  return 0;
}

inline std::size_t encoded_size(const Message& m) { return kBaseHeaderSize + extension_size(m) + m.payload.size(); }

namespace detail {

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

 private:
  std::vector<std::uint8_t>& out_;
};

// Bounds-checked cursor; every read fails cleanly past the end.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::size_t remaining() const { return in_.size() - pos_; }
  bool u8(std::uint8_t& v) {
    if (remaining() < 1) return false;
    v = in_[pos_++];
    return true;
  }
  bool u16(std::uint16_t& v) {
    if (remaining() < 2) return false;
    v = static_cast<std::uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
    pos_ += 2;
    return true;
  }
  bool u64(std::uint64_t& v) {
    if (remaining() < 8) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | in_[pos_ + i];
    pos_ += 8;
    return true;
  }
  bool bytes(std::size_t n, std::vector<std::uint8_t>& out) {
    if (remaining() < n) return false;
    out.assign(in_.begin() + pos_, in_.begin() + pos_ + n);
    pos_ += n;
    return true;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline void write_entries(Writer& w, const std::vector<Entry>& entries) {
  w.u8(static_cast<std::uint8_t>(entries.size()));
  for (const auto& e : entries) {
    w.u64(e.flow_id);
    w.u64(e.seq);
  }
}

inline bool read_entries(Reader& r, std::size_t count, std::vector<Entry>& out) {
  out.resize(count);
  for (auto& e : out)
    if (!r.u64(e.flow_id) || !r.u64(e.seq)) return false;
  return true;
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const Message& m) {
  if (m.payload.size() > kMaxPayload) throw WireError(WireErrc::kFieldOverflow, "payload exceeds 1472 bytes");
  if (m.is_coded()) {
    if (m.coded.members.empty() || m.coded.members.size() > kMaxCount)
      throw WireError(WireErrc::kFieldOverflow, "member_count must be in [1, 255]");
    if (m.coded.symbol_len != m.payload.size())
      throw WireError(WireErrc::kFieldOverflow, "symbol_len must equal payload length");
  }
  if (m.has_entries() && (m.entries.empty() || m.entries.size() > kMaxCount))
    throw WireError(WireErrc::kFieldOverflow, "entry_count must be in [1, 255]");
  if (m.type == PacketType::kCtrl && m.ctrl.entries.size() > kMaxCount)
    throw WireError(WireErrc::kFieldOverflow, "ctrl entry_count exceeds 255");
  if (static_cast<std::uint8_t>(m.type) > static_cast<std::uint8_t>(PacketType::kCtrl))
    throw WireError(WireErrc::kFieldOverflow, "unknown packet type");

  std::vector<std::uint8_t> out;
  out.reserve(encoded_size(m));
  detail::Writer w(out);
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(m.type));
  w.u16(m.flags);
  w.u64(m.flow_id);
  w.u64(m.seq);
  w.u64(m.send_ts_us);
  w.u16(static_cast<std::uint16_t>(m.payload.size()));
  w.u16(static_cast<std::uint16_t>(extension_size(m)));

  if (m.is_coded()) {
    w.u64(m.coded.batch_id);
    w.u8(m.coded.parity_index);
    w.u8(m.coded.num_parity);
    w.u8(static_cast<std::uint8_t>(m.coded.members.size()));
    w.u16(m.coded.symbol_len);
    for (const auto& mem : m.coded.members) {
      w.u64(mem.flow_id);
      w.u64(mem.seq);
      w.u16(mem.orig_len);
    }
  } else if (m.has_entries()) {
    detail::write_entries(w, m.entries);
  } else if (m.type == PacketType::kCtrl) {
    w.u8(static_cast<std::uint8_t>(m.ctrl.kind));
    w.u64(m.ctrl.arg);
    detail::write_entries(w, m.ctrl.entries);
  }
  w.bytes(m.payload);
  return out;
}

// Parses one datagram. Never reads outside `in`; on error `out` is unspecified.
inline WireErrc deserialize(std::span<const std::uint8_t> in, Message& out) {
  if (in.size() < kBaseHeaderSize) return WireErrc::kTruncated;
  detail::Reader r(in);
  std::uint8_t version = 0, type = 0;
  std::uint16_t payload_len = 0, ext_len = 0;
  r.u8(version);
  r.u8(type);
  r.u16(out.flags);
  r.u64(out.flow_id);
  r.u64(out.seq);
  r.u64(out.send_ts_us);
  r.u16(payload_len);
  r.u16(ext_len);
  if (version != kVersion) return WireErrc::kBadVersion;
  if (type > static_cast<std::uint8_t>(PacketType::kCtrl)) return WireErrc::kUnknownType;
  out.type = static_cast<PacketType>(type);

  const std::size_t total = kBaseHeaderSize + ext_len + payload_len;
  if (in.size() < total) return WireErrc::kTruncated;
  if (in.size() > total) return WireErrc::kLengthMismatch;
  if (payload_len > kMaxPayload) return WireErrc::kLengthMismatch;

  out.coded = {};
  out.entries.clear();
  out.ctrl = {};

  if (out.is_coded()) {
    if (ext_len < kCodedExtFixed) return WireErrc::kLengthMismatch;
    std::uint8_t count = 0;
    r.u64(out.coded.batch_id);
    r.u8(out.coded.parity_index);
    r.u8(out.coded.num_parity);
    r.u8(count);
    r.u16(out.coded.symbol_len);
    if (count == 0 || ext_len != kCodedExtFixed + count * kMemberSize) return WireErrc::kLengthMismatch;
    if (out.coded.symbol_len != payload_len) return WireErrc::kLengthMismatch;
    out.coded.members.resize(count);
    for (auto& mem : out.coded.members)
      if (!r.u64(mem.flow_id) || !r.u64(mem.seq) || !r.u16(mem.orig_len)) return WireErrc::kTruncated;
  } else if (out.has_entries()) {
    std::uint8_t count = 0;
    if (ext_len < 1 || !r.u8(count)) return WireErrc::kLengthMismatch;
    if (count == 0 || ext_len != 1 + count * kEntrySize) return WireErrc::kLengthMismatch;
    if (!detail::read_entries(r, count, out.entries)) return WireErrc::kTruncated;
  } else if (out.type == PacketType::kCtrl) {
    std::uint8_t kind = 0, count = 0;
    if (ext_len < 10) return WireErrc::kLengthMismatch;
    r.u8(kind);
    r.u64(out.ctrl.arg);
    r.u8(count);
    if (ext_len != 10 + count * kEntrySize) return WireErrc::kLengthMismatch;
    if (kind < 1 || kind > 3) return WireErrc::kUnknownType;
    out.ctrl.kind = static_cast<CtrlKind>(kind);
    if (!detail::read_entries(r, count, out.ctrl.entries)) return WireErrc::kTruncated;
  } else if (ext_len != 0) {
    return WireErrc::kLengthMismatch;
  }
  if (!r.bytes(payload_len, out.payload)) return WireErrc::kTruncated;
  return WireErrc::kOk;
}

// Bridges between wire messages and codec symbols.
inline Message make_coded(PacketType type, std::uint64_t batch_id, std::uint8_t num_parity, const codec::ParitySymbol& p) {
  Message m;
  m.type = type;
  m.seq = batch_id;
  m.flow_id = type == PacketType::kInCoded && !p.members.empty() ? p.members.front().flow_id : 0;
  m.payload = p.payload;
  m.coded.batch_id = batch_id;
  m.coded.parity_index = p.parity_index;
  m.coded.num_parity = num_parity;
  m.coded.symbol_len = static_cast<std::uint16_t>(p.payload.size());
  m.coded.members = p.members;
  return m;
}

inline codec::ParitySymbol to_parity(const Message& m) {
  return {m.coded.parity_index, m.payload, m.coded.members};
}

}  // namespace cloudrec::wire

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

#include <gtest/gtest.h>

#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#include "cloudrec/wire.hpp"

using namespace cloudrec;
using namespace cloudrec::wire;

namespace {

std::vector<std::uint8_t> load_hex(const std::string& name) {
  std::ifstream in(std::string(CLOUDREC_TEST_DATA) + "/golden/" + name);
  EXPECT_TRUE(in.good()) << name;
  std::vector<std::uint8_t> out;
  std::string line;
  std::string digits;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    for (char c : line)
      if (std::isxdigit(static_cast<unsigned char>(c))) digits += c;
  }
  for (std::size_t i = 0; i + 1 < digits.size(); i += 2) out.push_back(static_cast<std::uint8_t>(std::stoi(digits.substr(i, 2), nullptr, 16)));
  return out;
}

Message random_message(std::mt19937_64& rng, PacketType type) {
  Message m;
  m.type = type;
  m.flags = static_cast<std::uint16_t>(rng());
  m.flow_id = rng();
  m.seq = rng();
  m.send_ts_us = rng();
  const std::size_t len = rng() % 200;
  m.payload.resize(len);
  for (auto& b : m.payload) b = static_cast<std::uint8_t>(rng());
  if (m.is_coded()) {
    m.coded.batch_id = rng();
    m.coded.parity_index = static_cast<std::uint8_t>(rng());
    m.coded.num_parity = static_cast<std::uint8_t>(rng());
    m.coded.symbol_len = static_cast<std::uint16_t>(len);
    const std::size_t k = 1 + rng() % 12;
    for (std::size_t i = 0; i < k; ++i) m.coded.members.push_back({rng(), rng(), static_cast<std::uint16_t>(rng())});
  } else if (m.has_entries()) {
    const std::size_t n = 1 + rng() % 20;
    for (std::size_t i = 0; i < n; ++i) m.entries.push_back({rng(), rng()});
  } else if (type == PacketType::kCtrl) {
    m.ctrl.kind = static_cast<CtrlKind>(1 + rng() % 3);
    m.ctrl.arg = rng();
    const std::size_t n = rng() % 5;
    for (std::size_t i = 0; i < n; ++i) m.ctrl.entries.push_back({rng(), rng()});
  }
  return m;
}

}  // namespace

TEST(WireGolden, DataFlow7Seq1) {
  Message m;
  m.flow_id = 7;
  m.seq = 1;
  const auto bytes = serialize(m);
  EXPECT_EQ(bytes.size(), 32u);
  EXPECT_EQ(bytes, load_hex("data_flow7_seq1.hex"));
  Message back;
  ASSERT_EQ(deserialize(bytes, back), WireErrc::kOk);
  EXPECT_EQ(back, m);
}

TEST(WireGolden, SpeculativeNack) {
  Message m;
  m.type = PacketType::kNack;
  m.flags = flags::kSpeculative;
  m.flow_id = 3;
  m.seq = 9;
  m.send_ts_us = 16;
  m.entries = {{3, 9}};
  EXPECT_EQ(serialize(m), load_hex("nack_speculative.hex"));
}

TEST(WireGolden, CrossCodedOneMember) {
  codec::ParitySymbol p{1, {0xaa, 0xbb, 0xcc}, {{1, 2, 3}}};
  const auto m = make_coded(PacketType::kCrossCoded, 5, 2, p);
  const auto bytes = serialize(m);
  EXPECT_EQ(bytes, load_hex("cross_coded_one_member.hex"));
  Message back;
  ASSERT_EQ(deserialize(bytes, back), WireErrc::kOk);
  EXPECT_EQ(to_parity(back), p);
}

TEST(WireGolden, ConfirmQuery) {
  Message m;
  m.type = PacketType::kCtrl;
  m.flow_id = 4;
  m.seq = 12;
  m.send_ts_us = 1000;
  m.ctrl.kind = CtrlKind::kConfirmQuery;
  m.ctrl.entries = {{4, 12}};
  EXPECT_EQ(serialize(m), load_hex("ctrl_confirm_query.hex"));
}

TEST(Wire, CrossCodedSixMembersExtensionLength) {
  Message m;
  m.type = PacketType::kCrossCoded;
  m.payload.assign(10, 1);
  m.coded.symbol_len = 10;
  for (std::uint64_t i = 0; i < 6; ++i) m.coded.members.push_back({i, i, 10});
  EXPECT_EQ(extension_size(m), 121u);
  const auto bytes = serialize(m);
  EXPECT_EQ((bytes[30] << 8) | bytes[31], 121);
  EXPECT_EQ(bytes.size(), 32u + 121u + 10u);
}

TEST(Wire, BaseHeaderIs32BytesForEveryType) {
  std::mt19937_64 rng(1);
  for (int t = 0; t <= 7; ++t) {
    auto m = random_message(rng, static_cast<PacketType>(t));
    const auto bytes = serialize(m);
    const std::size_t payload_len = (bytes[28] << 8) | bytes[29];
    const std::size_t ext_len = (bytes[30] << 8) | bytes[31];
    EXPECT_EQ(bytes.size(), 32u + payload_len + ext_len);
    EXPECT_EQ(bytes[1], t);
  }
}

TEST(Wire, RandomRoundTrip) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20000; ++i) {
    const auto m = random_message(rng, static_cast<PacketType>(i % 8));
    const auto bytes = serialize(m);
    Message back;
    ASSERT_EQ(deserialize(bytes, back), WireErrc::kOk);
    ASSERT_EQ(back, m);
    ASSERT_EQ(serialize(back), bytes);
  }
}

TEST(Wire, Truncated) {
  std::vector<std::uint8_t> b(31, 0);
  b[0] = 1;
  Message m;
  EXPECT_EQ(deserialize(b, m), WireErrc::kTruncated);
  Message data;
  data.payload = {1, 2, 3};
  auto bytes = serialize(data);
  bytes.pop_back();
  EXPECT_EQ(deserialize(bytes, m), WireErrc::kTruncated);
}

TEST(Wire, BadVersionAndUnknownType) {
  Message data;
  auto bytes = serialize(data);
  Message m;
  bytes[0] = 2;
  EXPECT_EQ(deserialize(bytes, m), WireErrc::kBadVersion);
  bytes[0] = 1;
  bytes[1] = 8;
  EXPECT_EQ(deserialize(bytes, m), WireErrc::kUnknownType);
}

TEST(Wire, ExtensionLengthDisagreesWithMemberCount) {
  codec::ParitySymbol p{0, {1, 2}, {{1, 1, 2}, {2, 1, 2}}};
  auto bytes = serialize(make_coded(PacketType::kCrossCoded, 1, 1, p));
  // member_count byte follows batch_id (8), parity_index, num_parity.
  bytes[32 + 10] = 3;
  Message m;
  EXPECT_EQ(deserialize(bytes, m), WireErrc::kLengthMismatch);
}

TEST(Wire, TrailingBytesRejected) {
  Message data;
  auto bytes = serialize(data);
  bytes.push_back(0);
  Message m;
  EXPECT_EQ(deserialize(bytes, m), WireErrc::kLengthMismatch);
}

TEST(Wire, ZeroEntryNackRejected) {
  Message n;
  n.type = PacketType::kNack;
  n.entries = {{1, 1}};
  auto bytes = serialize(n);
  bytes[32] = 0;
  Message m;
  EXPECT_EQ(deserialize(bytes, m), WireErrc::kLengthMismatch);
}

TEST(Wire, FieldOverflow) {
  Message n;
  n.type = PacketType::kNack;
  for (std::uint64_t i = 0; i < 256; ++i) n.entries.push_back({1, i});
  try {
    serialize(n);
    FAIL();
  } catch (const WireError& e) {
    EXPECT_EQ(e.code(), WireErrc::kFieldOverflow);
  }
  Message big;
  big.payload.resize(kMaxPayload + 1);
  EXPECT_THROW(serialize(big), WireError);
}

TEST(Wire, FuzzDefinedErrorsOnly) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100000; ++i) {
    std::vector<std::uint8_t> buf;
    if (i % 2 == 0) {
      buf.resize(rng() % 120);
      for (auto& b : buf) b = static_cast<std::uint8_t>(rng());
    } else {
      buf = serialize(random_message(rng, static_cast<PacketType>(rng() % 8)));
      const int flips = 1 + static_cast<int>(rng() % 4);
      for (int f = 0; f < flips; ++f) buf[rng() % buf.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
      if (rng() % 4 == 0) buf.resize(rng() % (buf.size() + 1));
    }
    // Copy into an exact-size heap block so sanitizers catch over-reads.
    auto exact = std::make_unique<std::uint8_t[]>(buf.size() + 1);
    std::copy(buf.begin(), buf.end(), exact.get());
    Message m;
    const auto err = deserialize(std::span<const std::uint8_t>(exact.get(), buf.size()), m);
    ASSERT_LE(static_cast<int>(err), static_cast<int>(WireErrc::kLengthMismatch));
    if (err == WireErrc::kOk) {
      ASSERT_EQ(serialize(m).size(), buf.size());
    }
  }
}

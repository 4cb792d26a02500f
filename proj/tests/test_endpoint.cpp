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

#include <map>
#include <set>

#include "cloudrec/endpoint.hpp"

using namespace cloudrec;
using namespace cloudrec::endpoint;
using wire::PacketType;

namespace {

SenderConfig cbr(Duplication dup = Duplication::kFull) {
  SenderConfig c;
  c.flow = 3;
  c.packet_bytes = 100;
  c.spacing = 20 * kUsPerMs;
  c.burst_packets = 10;
  c.gap_mean = 1000 * kUsPerMs;
  c.duplication = dup;
  c.mark_every = 4;
  return c;
}

ReceiverConfig rcfg() {
  ReceiverConfig c;
  c.flow = 3;
  c.rtt = 300 * kUsPerMs;
  c.detector.long_timeout = 300 * kUsPerMs;
  c.detector.burst_threshold = 80 * kUsPerMs;
  c.cache_ttl = 1200 * kUsPerMs;
  c.payload_check = [](Seq s, const std::vector<std::uint8_t>& p) { return p == payload_for(3, s, 100); };
  return c;
}

wire::Message data(Seq s, FlowId f = 3) {
  wire::Message m;
  m.type = PacketType::kData;
  m.flow_id = f;
  m.seq = s;
  m.payload = payload_for(f, s, 100);
  return m;
}

wire::Message in_coded(Seq first, std::size_t n, std::size_t parity, std::uint64_t id, std::uint8_t index = 0) {
  std::vector<codec::SourceSymbol> src;
  for (Seq s = first; s < first + n; ++s) src.push_back(codec::make_source(3, s, payload_for(3, s, 100)));
  const auto p = codec::encode_batch(src, parity);
  return wire::make_coded(PacketType::kInCoded, id, static_cast<std::uint8_t>(parity), p.at(index));
}

wire::Message coop_req(std::vector<Entry> e) {
  wire::Message m;
  m.type = PacketType::kCoopReq;
  m.entries = std::move(e);
  return m;
}

wire::Message confirm(Seq s) {
  wire::Message m;
  m.type = PacketType::kCtrl;
  m.ctrl.kind = wire::CtrlKind::kConfirmQuery;
  m.ctrl.entries = {{3, s}};
  return m;
}

std::vector<SentPacket> run_sender(Sender& s, TimeUs until) {
  std::vector<SentPacket> all;
  while (s.next_send_time() <= until) {
    auto v = s.sender_tick(s.next_send_time());
    all.insert(all.end(), v.begin(), v.end());
  }
  return all;
}

}  // namespace

TEST(Sender, FullDuplicationSendsEverythingToDc1) {
  Sender s(cbr(), Rng(1));
  const auto pkts = run_sender(s, 10 * kUsPerSec);
  ASSERT_FALSE(pkts.empty());
  for (std::size_t i = 0; i < pkts.size(); ++i) {
    EXPECT_TRUE(pkts[i].to_dc1);
    EXPECT_EQ(pkts[i].msg.seq, i + 1);
    EXPECT_EQ(pkts[i].msg.flags, 0);
    EXPECT_EQ(pkts[i].msg.payload, payload_for(3, i + 1, 100));
  }
}

TEST(Sender, FirstPacketDuplicationMarksBurstStarts) {
  Sender s(cbr(Duplication::kFirstPacket), Rng(2));
  const auto pkts = run_sender(s, 30 * kUsPerSec);
  std::size_t dup = 0;
  for (std::size_t i = 0; i < pkts.size(); ++i) {
    EXPECT_EQ(pkts[i].to_dc1, i % 10 == 0);
    if (pkts[i].to_dc1) {
      ++dup;
      EXPECT_EQ(pkts[i].msg.flags & wire::flags::kSelectiveDup, wire::flags::kSelectiveDup);
    }
  }
  EXPECT_EQ(dup, s.bursts_started());
}

TEST(Sender, MarkedDuplication) {
  Sender s(cbr(Duplication::kMarked), Rng(3));
  for (const auto& p : run_sender(s, 5 * kUsPerSec)) EXPECT_EQ(p.to_dc1, p.msg.seq % 4 == 0);
}

TEST(Sender, OffPeriodEmitsNothing) {
  auto c = cbr();
  c.gap_min = 2 * kUsPerSec;
  Sender s(c, Rng(4));
  const auto on = s.sender_tick(9 * 20 * kUsPerMs);
  EXPECT_EQ(on.size(), 10u);
  const TimeUs resume = s.next_send_time();
  EXPECT_GE(resume, 10 * 20 * kUsPerMs + 2 * kUsPerSec);
  EXPECT_TRUE(s.sender_tick(resume - 1).empty());
  EXPECT_EQ(s.sender_tick(resume).size(), 1u);
  EXPECT_EQ(s.bursts_started(), 2u);
}

TEST(Sender, SpacingWithinBurst) {
  Sender s(cbr(), Rng(5));
  const auto pkts = s.sender_tick(9 * 20 * kUsPerMs);
  for (std::size_t i = 0; i < pkts.size(); ++i)
    EXPECT_EQ(pkts[i].msg.send_ts_us, i * 20 * kUsPerMs);
}

TEST(Sender, DeterministicPerSeed) {
  Sender a(cbr(), Rng(9, "s"));
  Sender b(cbr(), Rng(9, "s"));
  EXPECT_EQ(run_sender(a, 60 * kUsPerSec).size(), run_sender(b, 60 * kUsPerSec).size());
  EXPECT_EQ(a.next_send_time(), b.next_send_time());
}

TEST(Sender, ValidateRejectsBadConfig) {
  auto c = cbr();
  c.packet_bytes = 0;
  EXPECT_THROW(Sender(c, Rng(1)), std::invalid_argument);
  c = cbr(Duplication::kMarked);
  c.mark_every = 0;
  EXPECT_THROW(Sender(c, Rng(1)), std::invalid_argument);
}

TEST(Detector, BurstUsesSmallTimeoutThenIdle) {
  DetectorConfig c;
  c.long_timeout = 300 * kUsPerMs;
  Detector d(c);
  EXPECT_FALSE(d.deadline().has_value());
  d.on_arrival(0, true);
  EXPECT_EQ(d.mode(), DetectorMode::kIdle);
  EXPECT_EQ(*d.deadline(), 300 * kUsPerMs);
  d.on_arrival(20 * kUsPerMs, true);
  EXPECT_EQ(d.mode(), DetectorMode::kBurst);
  EXPECT_EQ(*d.deadline(), 45 * kUsPerMs);
  EXPECT_FALSE(d.on_tick(44 * kUsPerMs));
  EXPECT_TRUE(d.on_tick(45 * kUsPerMs));
  EXPECT_EQ(d.mode(), DetectorMode::kIdle);
  EXPECT_EQ(*d.deadline(), 345 * kUsPerMs);
}

TEST(Detector, FixedTimeoutNeverChanges) {
  DetectorConfig c;
  c.kind = DetectorKind::kFixed;
  Detector d(c);
  d.on_arrival(0, true);
  for (int i = 1; i <= 5; ++i) EXPECT_TRUE(d.on_tick(i * 25 * kUsPerMs));
  EXPECT_EQ(*d.deadline(), 150 * kUsPerMs);
}

TEST(Detector, RecoveredArrivalResetsTimerOnly) {
  DetectorConfig c;
  Detector d(c);
  d.on_arrival(0, true);
  d.on_arrival(10 * kUsPerMs, false);
  EXPECT_EQ(d.mode(), DetectorMode::kIdle);
  EXPECT_EQ(*d.deadline(), 10 * kUsPerMs + c.long_timeout);
}

TEST(PacketCache, CapacityAndTtl) {
  PacketCache c(2, 100);
  c.put(1, {1}, 0);
  c.put(2, {2}, 10);
  c.put(3, {3}, 20);
  EXPECT_EQ(c.get(1, 20), nullptr);
  ASSERT_NE(c.get(2, 20), nullptr);
  EXPECT_EQ(c.get(2, 111), nullptr);
  c.expire(115);
  EXPECT_EQ(c.size(), 1u);
  PacketCache none(0, 100);
  none.put(1, {1}, 0);
  EXPECT_EQ(none.size(), 0u);
}

TEST(Receiver, GapProducesNack) {
  Receiver r(rcfg());
  EXPECT_TRUE(r.receiver_on_packet(data(1), false, 0).empty());
  EXPECT_TRUE(r.receiver_on_packet(data(2), false, 20).empty());
  const auto out = r.receiver_on_packet(data(4), false, 60);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].msg.type, PacketType::kNack);
  EXPECT_EQ(out[0].msg.flags & wire::flags::kSpeculative, 0);
  EXPECT_EQ(out[0].msg.entries, (std::vector<Entry>{{3, 3}}));
  EXPECT_EQ(r.stats().gap_nacks, 1u);
}

TEST(Receiver, LargeGapChunksNack) {
  Receiver r(rcfg());
  r.receiver_on_packet(data(1), false, 0);
  const auto out = r.receiver_on_packet(data(602), false, 10);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].msg.entries.size(), 255u);
  EXPECT_EQ(out[1].msg.entries.size(), 255u);
  EXPECT_EQ(out[2].msg.entries.size(), 90u);
  for (const auto& o : out) {
    wire::Message back;
    EXPECT_EQ(wire::deserialize(wire::serialize(o.msg), back), wire::WireErrc::kOk);
  }
}

TEST(Receiver, SilenceInBurstSendsOneNackThenIdle) {
  Receiver r(rcfg());
  r.receiver_on_packet(data(1), false, 0);
  r.receiver_on_packet(data(2), false, 20 * kUsPerMs);
  EXPECT_EQ(r.detector().mode(), DetectorMode::kBurst);
  EXPECT_TRUE(r.receiver_on_tick(44 * kUsPerMs).empty());
  const auto out = r.receiver_on_tick(45 * kUsPerMs);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].msg.flags & wire::flags::kSpeculative, wire::flags::kSpeculative);
  EXPECT_EQ(out[0].msg.entries, (std::vector<Entry>{{3, 3}}));
  EXPECT_EQ(r.detector().mode(), DetectorMode::kIdle);
  EXPECT_TRUE(r.receiver_on_tick(100 * kUsPerMs).empty());
  EXPECT_EQ(*r.next_deadline(), 345 * kUsPerMs);
}

TEST(Receiver, AckWhenDirectPacketsResume) {
  Receiver r(rcfg());
  r.receiver_on_packet(data(1), false, 0);
  ASSERT_EQ(r.receiver_on_packet(data(3), false, 10).size(), 1u);
  const auto out = r.receiver_on_packet(data(4), false, 20);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].msg.type, PacketType::kAck);
  EXPECT_EQ(out[0].msg.seq, 1u);
  // Recovered packets do not count as the direct path resuming.
  r.receiver_on_packet(data(6), false, 30);
  EXPECT_TRUE(r.receiver_on_packet(data(5), true, 35).empty());
  EXPECT_EQ(r.receiver_on_packet(data(7), false, 40).size(), 1u);
  EXPECT_EQ(r.stats().acks_sent, 2u);
}

TEST(Receiver, AckAfterProactiveEpisode) {
  auto c = rcfg();
  c.ack_after_nacks = 3;
  Receiver r(c);
  r.receiver_on_packet(data(1), false, 0);
  r.receiver_on_packet(data(3), false, 10);
  r.receiver_on_packet(data(5), false, 20);
  const auto out = r.receiver_on_packet(data(7), false, 30);
  // The third NACK is sent, and the ACK waits for the next direct packet.
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].msg.type, PacketType::kNack);
  const auto next = r.receiver_on_packet(data(8), false, 40);
  ASSERT_EQ(next.size(), 1u);
  EXPECT_EQ(next[0].msg.type, PacketType::kAck);
  EXPECT_EQ(next[0].msg.seq, 1u);
  EXPECT_TRUE(r.receiver_on_packet(data(9), false, 50).empty());
  EXPECT_EQ(r.stats().acks_sent, 1u);
}

TEST(Receiver, RecoveredPacketDeliveredOnceWithRecoveryTime) {
  auto c = rcfg();
  c.expected_arrival = [](Seq s) { return static_cast<TimeUs>(s) * 1000; };
  Receiver r(c);
  r.receiver_on_packet(data(1), false, 1000);
  r.receiver_on_packet(data(3), false, 3000);
  EXPECT_TRUE(r.receiver_on_packet(data(2), true, 9000).empty());
  EXPECT_TRUE(r.receiver_on_packet(data(2), true, 9500).empty());
  EXPECT_EQ(r.stats().duplicates, 1u);
  ASSERT_EQ(r.deliveries().size(), 3u);
  EXPECT_EQ(r.deliveries()[2].via, Via::kRecovered);
  EXPECT_EQ(r.deliveries()[2].recovery_time, 7000);
  EXPECT_EQ(r.deliveries()[0].recovery_time, -1);
  EXPECT_EQ(r.stats().corrupt, 0u);
}

TEST(Receiver, CorruptPayloadCounted) {
  Receiver r(rcfg());
  auto m = data(1);
  m.payload[0] ^= 1;
  r.receiver_on_packet(m, false, 0);
  EXPECT_EQ(r.stats().corrupt, 1u);
}

TEST(Receiver, OtherFlowIgnored) {
  Receiver r(rcfg());
  EXPECT_TRUE(r.receiver_on_packet(data(5, 4), false, 0).empty());
  EXPECT_EQ(r.highest_seen(), 0u);
}

TEST(Receiver, InStreamDecodeSingleLoss) {
  Receiver r(rcfg());
  for (Seq s : {1, 2, 4, 5}) r.receiver_on_packet(data(s), false, static_cast<TimeUs>(s) * 100);
  r.receiver_on_coded(in_coded(1, 5, 1, 7), 1000);
  EXPECT_TRUE(r.delivered(3));
  EXPECT_EQ(r.stats().in_stream_decoded, 1u);
  EXPECT_EQ(r.deliveries().back().via, Via::kInStream);
  EXPECT_EQ(r.stats().corrupt, 0u);
}

TEST(Receiver, InStreamHeldUntilDecodable) {
  Receiver r(rcfg());
  for (Seq s : {1, 2, 5}) r.receiver_on_packet(data(s), false, static_cast<TimeUs>(s) * 100);
  r.receiver_on_coded(in_coded(1, 5, 1, 7), 1000);
  EXPECT_FALSE(r.delivered(3));
  EXPECT_FALSE(r.delivered(4));
  EXPECT_GE(r.stats().in_stream_held, 1u);
  // Recovery of seq 4 lets the held parity rebuild seq 3.
  r.receiver_on_packet(data(4), true, 1100);
  EXPECT_TRUE(r.delivered(3));
}

TEST(Receiver, InStreamNothingMissingDiscarded) {
  Receiver r(rcfg());
  for (Seq s = 1; s <= 5; ++s) r.receiver_on_packet(data(s), false, static_cast<TimeUs>(s) * 100);
  EXPECT_TRUE(r.receiver_on_coded(in_coded(1, 5, 1, 7), 1000).empty());
  EXPECT_EQ(r.stats().in_stream_decoded, 0u);
  EXPECT_EQ(r.deliveries().size(), 5u);
}

TEST(Receiver, InStreamHeldParityExpires) {
  Receiver r(rcfg());
  for (Seq s : {1, 2, 5}) r.receiver_on_packet(data(s), false, 0);
  r.receiver_on_coded(in_coded(1, 5, 1, 7), 0);
  r.receiver_on_tick(r.config().cache_ttl + 1);
  r.receiver_on_packet(data(4), true, r.config().cache_ttl + 2);
  EXPECT_FALSE(r.delivered(3));
}

TEST(Receiver, ForeignInStreamIgnored) {
  Receiver r(rcfg());
  std::vector<codec::SourceSymbol> src{codec::make_source(9, 1, payload_for(9, 1, 100))};
  const auto m = wire::make_coded(PacketType::kInCoded, 1, 1, codec::encode_batch(src, 1)[0]);
  EXPECT_TRUE(r.receiver_on_coded(m, 0).empty());
  EXPECT_FALSE(r.delivered(1));
}

TEST(Receiver, CoopResponsesFromCache) {
  auto c = rcfg();
  c.response_delay = 7;
  Receiver r(c);
  r.receiver_on_packet(data(10), false, 0);
  const auto out = r.receiver_on_coop_req(coop_req({{3, 10}, {3, 11}}), 100);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].msg.type, PacketType::kCoopResp);
  EXPECT_EQ(out[0].msg.flags, 0);
  EXPECT_EQ(out[0].msg.payload, payload_for(3, 10, 100));
  EXPECT_EQ(out[0].delay, 7);
  EXPECT_EQ(out[1].msg.flags & wire::flags::kNegative, wire::flags::kNegative);
  EXPECT_TRUE(out[1].msg.payload.empty());
  // Answering twice gives the same answer.
  const auto again = r.receiver_on_coop_req(coop_req({{3, 10}}), 200);
  ASSERT_EQ(again.size(), 1u);
  EXPECT_EQ(again[0].msg.payload, out[0].msg.payload);
}

TEST(Receiver, CoopResponseAfterCacheEvictionIsNegative) {
  Receiver r(rcfg());
  r.receiver_on_packet(data(10), false, 0);
  const auto out = r.receiver_on_coop_req(coop_req({{3, 10}}), r.config().cache_ttl + 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].msg.flags & wire::flags::kNegative, wire::flags::kNegative);
  EXPECT_EQ(r.stats().coop_missing, 1u);
}

TEST(Receiver, ConfirmOnlyRealHoles) {
  Receiver r(rcfg());
  r.receiver_on_packet(data(1), false, 0);
  r.receiver_on_packet(data(3), false, 10);
  auto yes = r.on_confirm_query(confirm(2), 20);
  ASSERT_EQ(yes.size(), 1u);
  EXPECT_EQ(yes[0].msg.ctrl.kind, wire::CtrlKind::kConfirmReply);
  EXPECT_EQ(yes[0].msg.flags & wire::flags::kNegative, 0);
  // Next expected packet: nothing later has arrived, so it is not a hole.
  auto edge = r.on_confirm_query(confirm(4), 20);
  EXPECT_EQ(edge[0].msg.flags & wire::flags::kNegative, wire::flags::kNegative);
  // Delivered packets are never holes.
  auto have = r.on_confirm_query(confirm(1), 20);
  EXPECT_EQ(have[0].msg.flags & wire::flags::kNegative, wire::flags::kNegative);
  EXPECT_EQ(r.stats().confirms_allowed, 1u);
  EXPECT_EQ(r.stats().confirms_denied, 2u);
}

TEST(Receiver, ConfirmForUnseenPacketIsHeld) {
  auto cfg = rcfg();
  cfg.confirm_hold = 100;
  Receiver r(cfg);
  r.receiver_on_packet(data(3), false, 0);
  auto count_replies = [](const std::vector<OutMessage>& v, bool negative) {
    std::size_t n = 0;
    for (const auto& o : v)
      if (o.msg.type == PacketType::kCtrl && ((o.msg.flags & wire::flags::kNegative) != 0) == negative) ++n;
    return n;
  };
  // Still in flight: the packet itself turns up and denies the query.
  EXPECT_TRUE(r.on_confirm_query(confirm(4), 10).empty());
  EXPECT_EQ(*r.next_deadline(), 110);
  EXPECT_EQ(count_replies(r.receiver_on_packet(data(4), false, 30), true), 1u);
  // A later packet arriving first proves the hole.
  EXPECT_TRUE(r.on_confirm_query(confirm(5), 40).empty());
  EXPECT_EQ(count_replies(r.receiver_on_packet(data(6), false, 50), false), 1u);
  // Nothing arrives: overdue, so allowed at the deadline.
  EXPECT_TRUE(r.on_confirm_query(confirm(7), 60).empty());
  EXPECT_TRUE(r.on_confirm_query(confirm(7), 65).empty());
  EXPECT_EQ(count_replies(r.receiver_on_tick(159), false), 0u);
  EXPECT_EQ(count_replies(r.receiver_on_tick(160), false), 1u);
  EXPECT_EQ(r.stats().confirms_held, 4u);
  EXPECT_EQ(r.stats().confirms_allowed, 2u);
  EXPECT_EQ(r.stats().confirms_denied, 1u);
}

TEST(Receiver, HandleDispatch) {
  Receiver r(rcfg());
  EXPECT_TRUE(r.handle(data(1), false, 0).empty());
  EXPECT_EQ(r.handle(coop_req({{3, 1}}), true, 1).size(), 1u);
  EXPECT_EQ(r.handle(confirm(1), true, 2).size(), 1u);
  wire::Message ack;
  ack.type = PacketType::kAck;
  EXPECT_TRUE(r.handle(ack, true, 3).empty());
}

// Every seq is delivered at most once, whatever order and path it arrives by.
TEST(Receiver, PropertyAtMostOnceDelivery) {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    Receiver r(rcfg());
    std::map<Seq, int> expected;
    TimeUs now = 0;
    for (int i = 0; i < 400; ++i) {
      now += 1 + static_cast<TimeUs>(rng.next() % 30000);
      const Seq s = 1 + rng.next() % 120;
      const int kind = static_cast<int>(rng.next() % 10);
      if (kind < 7) {
        r.handle(data(s), kind >= 5, now);
      } else if (kind < 9) {
        const Seq first = 1 + 5 * ((s - 1) / 5);
        r.handle(in_coded(first, 5, 2, first, static_cast<std::uint8_t>(rng.next() % 2)), false, now);
      } else {
        r.receiver_on_tick(now);
      }
    }
    std::set<Seq> seen;
    for (const auto& d : r.deliveries()) EXPECT_TRUE(seen.insert(d.seq).second);
    EXPECT_EQ(r.stats().corrupt, 0u);
  }
}

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

// Sender and receiver endpoints.

#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "cloudrec/codec.hpp"
#include "cloudrec/loss_model.hpp"
#include "cloudrec/types.hpp"
#include "cloudrec/wire.hpp"

namespace cloudrec::endpoint {

// Deterministic payload bytes for (flow, seq); doubles as ground truth.
inline std::vector<std::uint8_t> payload_for(FlowId flow, Seq seq, std::size_t len) {
  std::vector<std::uint8_t> out(len);
  std::uint64_t state = splitmix64(flow * 0x100000001B3ull ^ seq);
  for (std::size_t i = 0; i < len; ++i) {
    if (i % 8 == 0) state = splitmix64(state);
    out[i] = static_cast<std::uint8_t>(state >> (8 * (i % 8)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sender

enum class Duplication { kFull, kFirstPacket, kMarked };

// Traffic comes in bursts of packets at a fixed spacing separated by gaps.
// CBR ON/OFF: a burst is one ON period, the gap an exponential OFF time.
// Request/response: a burst is one response, the gap a think time.
struct SenderConfig {
  FlowId flow = 0;
  std::size_t packet_bytes = 200;
  TimeUs spacing = 20 * kUsPerMs;
  std::size_t burst_packets = 15000;
  TimeUs gap_min = 0;
  TimeUs gap_mean = 3300 * kUsPerSec;
  TimeUs start_offset = 0;
  Duplication duplication = Duplication::kFull;
  std::size_t mark_every = 0;

  void validate() const {
    if (packet_bytes == 0 || packet_bytes > kMaxPayload) throw std::invalid_argument("packet_bytes out of range");
    if (spacing <= 0) throw std::invalid_argument("spacing must be positive");
    if (burst_packets == 0) throw std::invalid_argument("on_duration must be positive");
    if (duplication == Duplication::kMarked && mark_every == 0) throw std::invalid_argument("mark_every must be >= 1");
  }
};

struct SentPacket {
  wire::Message msg;
  bool to_dc1 = false;
};

class Sender {
 public:
  Sender(SenderConfig cfg, Rng rng) : cfg_(cfg), rng_(std::move(rng)) {
    cfg_.validate();
    next_send_ = cfg_.start_offset;
  }

  const SenderConfig& config() const { return cfg_; }
  TimeUs next_send_time() const { return next_send_; }
  Seq last_seq() const { return seq_; }
  std::uint64_t bursts_started() const { return bursts_; }

  std::vector<SentPacket> sender_tick(TimeUs now) {
    std::vector<SentPacket> out;
    while (next_send_ <= now) {
      if (in_burst_ == 0) bursts_++;
      SentPacket p;
      p.msg.type = wire::PacketType::kData;
      p.msg.flow_id = cfg_.flow;
      p.msg.seq = ++seq_;
      p.msg.send_ts_us = static_cast<std::uint64_t>(next_send_);
      p.msg.payload = payload_for(cfg_.flow, seq_, cfg_.packet_bytes);
      switch (cfg_.duplication) {
        case Duplication::kFull: p.to_dc1 = true; break;
        case Duplication::kFirstPacket: p.to_dc1 = in_burst_ == 0; break;
        case Duplication::kMarked: p.to_dc1 = seq_ % cfg_.mark_every == 0; break;
      }
      if (p.to_dc1 && cfg_.duplication != Duplication::kFull) p.msg.flags |= wire::flags::kSelectiveDup;
      out.push_back(std::move(p));

      if (++in_burst_ >= cfg_.burst_packets) {
        in_burst_ = 0;
        const double gap = static_cast<double>(cfg_.gap_min) + rng_.exponential(static_cast<double>(cfg_.gap_mean));
        next_send_ += cfg_.spacing + static_cast<TimeUs>(gap);
      } else {
        next_send_ += cfg_.spacing;
      }
    }
    return out;
  }

 private:
  SenderConfig cfg_;
  Rng rng_;
  TimeUs next_send_ = 0;
  Seq seq_ = 0;
  std::size_t in_burst_ = 0;
  std::uint64_t bursts_ = 0;
};

// ---------------------------------------------------------------------------
// Loss detector

enum class DetectorKind { kTwoState, kFixed };
enum class DetectorMode { kIdle, kBurst };

struct DetectorConfig {
  DetectorKind kind = DetectorKind::kTwoState;
  TimeUs small_timeout = 25 * kUsPerMs;
  TimeUs long_timeout = 200 * kUsPerMs;
  // Interarrival below this puts the detector in BURST.
  TimeUs burst_threshold = 80 * kUsPerMs;
  TimeUs fixed_timeout = 25 * kUsPerMs;
};

// Timer half of loss detection: two timeouts (small within a burst, long
// across bursts) or a single fixed timeout for comparison.
class Detector {
 public:
  explicit Detector(DetectorConfig cfg) : cfg_(cfg) {}

  DetectorMode mode() const { return mode_; }
  const DetectorConfig& config() const { return cfg_; }

  void on_arrival(TimeUs now, bool direct) {
    if (direct) {
      if (last_direct_ && now - *last_direct_ < cfg_.burst_threshold) mode_ = DetectorMode::kBurst;
      last_direct_ = now;
    }
    last_event_ = now;
  }

  std::optional<TimeUs> deadline() const {
    if (!last_event_) return std::nullopt;
    return *last_event_ + current_timeout();
  }

  // True when the timer fired; the caller sends the NACK.
  bool on_tick(TimeUs now) {
    auto d = deadline();
    if (!d || now < *d) return false;
    if (cfg_.kind == DetectorKind::kTwoState) mode_ = DetectorMode::kIdle;
    last_event_ = now;
    return true;
  }

 private:
  TimeUs current_timeout() const {
    if (cfg_.kind == DetectorKind::kFixed) return cfg_.fixed_timeout;
    return mode_ == DetectorMode::kBurst ? cfg_.small_timeout : cfg_.long_timeout;
  }

  DetectorConfig cfg_;
  DetectorMode mode_ = DetectorMode::kIdle;
  std::optional<TimeUs> last_event_;
  std::optional<TimeUs> last_direct_;
};

// ---------------------------------------------------------------------------
// Packet cache

class PacketCache {
 public:
  PacketCache(std::size_t capacity, TimeUs ttl) : capacity_(capacity), ttl_(ttl) {}

  void put(Seq seq, std::vector<std::uint8_t> payload, TimeUs now) {
    if (capacity_ == 0) return;
    if (items_.count(seq) != 0) return;
    items_.emplace(seq, Item{std::move(payload), now});
    order_.push_back(seq);
    while (order_.size() > capacity_) {
      items_.erase(order_.front());
      order_.pop_front();
    }
  }

  const std::vector<std::uint8_t>* get(Seq seq, TimeUs now) const {
    auto it = items_.find(seq);
    if (it == items_.end() || now - it->second.at > ttl_) return nullptr;
    return &it->second.payload;
  }

  void expire(TimeUs now) {
    while (!order_.empty()) {
      auto it = items_.find(order_.front());
      if (it != items_.end() && now - it->second.at <= ttl_) break;
      if (it != items_.end()) items_.erase(it);
      order_.pop_front();
    }
  }

  std::size_t size() const { return items_.size(); }

 private:
  struct Item {
    std::vector<std::uint8_t> payload;
    TimeUs at = 0;
  };
  std::size_t capacity_;
  TimeUs ttl_;
  std::map<Seq, Item> items_;
  std::deque<Seq> order_;
};

// ---------------------------------------------------------------------------
// Receiver

enum class Via { kDirect, kRecovered, kInStream };

struct DeliveryRecord {
  Seq seq = 0;
  TimeUs at = 0;
  Via via = Via::kDirect;
  // Delivery minus expected direct arrival, clamped at zero; -1 for direct.
  TimeUs recovery_time = -1;
};

struct ReceiverConfig {
  FlowId flow = 0;
  TimeUs rtt = 200 * kUsPerMs;
  DetectorConfig detector;
  std::size_t cache_capacity = 2048;
  TimeUs cache_ttl = 800 * kUsPerMs;
  // Extra delay on cooperative responses (straggler injection).
  TimeUs response_delay = 0;
  // A request for a packet that has not arrived yet (nothing at or past its
  // seq seen) waits this long for it before a negative answer. Zero answers at once.
  TimeUs coop_hold = 0;
  // A confirm query for a packet not seen yet waits this long. The packet
  // itself arriving denies it; a later packet or the timeout allows it.
  TimeUs confirm_hold = 0;
  // An ACK follows the first gap-free direct packet after this many NACKs.
  std::size_t ack_after_nacks = 1;
  // Ground truth for recovery-time stamping; unset disables stamping.
  std::function<TimeUs(Seq)> expected_arrival;
  // Ground truth payload check; unset skips it.
  std::function<bool(Seq, const std::vector<std::uint8_t>&)> payload_check;
};

struct OutMessage {
  wire::Message msg;
  TimeUs delay = 0;
};

struct ReceiverStats {
  std::uint64_t nacks_sent = 0;
  std::uint64_t gap_nacks = 0;
  std::uint64_t timer_nacks = 0;
  std::uint64_t acks_sent = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t in_stream_decoded = 0;
  std::uint64_t in_stream_held = 0;
  std::uint64_t coop_served = 0;
  std::uint64_t coop_missing = 0;
  std::uint64_t coop_held = 0;
  std::uint64_t confirms_allowed = 0;
  std::uint64_t confirms_denied = 0;
  std::uint64_t confirms_held = 0;
  std::uint64_t corrupt = 0;
};

class Receiver {
 public:
  explicit Receiver(ReceiverConfig cfg)
      : cfg_(std::move(cfg)), detector_(cfg_.detector), cache_(cfg_.cache_capacity, cfg_.cache_ttl) {}

  const ReceiverConfig& config() const { return cfg_; }
  const ReceiverStats& stats() const { return stats_; }
  const Detector& detector() const { return detector_; }
  const std::vector<DeliveryRecord>& deliveries() const { return log_; }
  bool delivered(Seq seq) const { return delivered_.count(seq) != 0; }
  Seq highest_seen() const { return highest_; }

  // Routes any message addressed to this receiver.
  std::vector<OutMessage> handle(const wire::Message& m, bool from_dc2, TimeUs now) {
    switch (m.type) {
      case wire::PacketType::kData: return receiver_on_packet(m, from_dc2, now);
      case wire::PacketType::kInCoded: return receiver_on_coded(m, now);
      case wire::PacketType::kCoopReq: return receiver_on_coop_req(m, now);
      case wire::PacketType::kCtrl: return on_confirm_query(m, now);
      default: return {};
    }
  }

  std::vector<OutMessage> receiver_on_packet(const wire::Message& m, bool from_dc2, TimeUs now) {
    std::vector<OutMessage> out;
    if (m.flow_id != cfg_.flow) return out;
    const bool direct = !from_dc2;
    const auto gaps_before = stats_.gap_nacks;
    accept(m.seq, m.payload, direct ? Via::kDirect : Via::kRecovered, now, out);
    detector_.on_arrival(now, direct);
    const bool gap = stats_.gap_nacks != gaps_before;
    if (direct && !gap && nacks_since_ack_ >= cfg_.ack_after_nacks) {
      wire::Message ack;
      ack.type = wire::PacketType::kAck;
      ack.flow_id = cfg_.flow;
      ack.seq = contiguous_;
      ack.send_ts_us = static_cast<std::uint64_t>(now);
      out.push_back({std::move(ack), 0});
      nacks_since_ack_ = 0;
      stats_.acks_sent++;
    }
    retry_held(now, out);
    return out;
  }

  std::vector<OutMessage> receiver_on_tick(TimeUs now) {
    std::vector<OutMessage> out;
    cache_.expire(now);
    held_.erase(std::remove_if(held_.begin(), held_.end(), [&](const Held& h) { return now - h.at > cfg_.cache_ttl; }),
                held_.end());
    for (auto it = held_reqs_.begin(); it != held_reqs_.end();) {
      if (it->deadline > now) {
        ++it;
        continue;
      }
      if (it->confirm) reply_confirm(it->entry, !delivered(it->entry.seq), now, out);
      else answer(it->entry, nullptr, now, out);
      it = held_reqs_.erase(it);
    }
    if (detector_.on_tick(now)) {
      stats_.timer_nacks++;
      send_nack({highest_ + 1}, true, now, out);
    }
    return out;
  }

  std::optional<TimeUs> next_deadline() const {
    auto d = detector_.deadline();
    for (const auto& h : held_reqs_)
      if (!d || h.deadline < *d) d = h.deadline;
    return d;
  }

  std::vector<OutMessage> receiver_on_coded(const wire::Message& m, TimeUs now) {
    std::vector<OutMessage> out;
    if (m.type != wire::PacketType::kInCoded) return out;
    bool ours = true;
    for (const auto& mem : m.coded.members) ours = ours && mem.flow_id == cfg_.flow;
    if (!ours || m.coded.members.empty()) return out;
    held_.push_back({wire::to_parity(m), m.coded.batch_id, now});
    retry_held(now, out);
    return out;
  }

  std::vector<OutMessage> receiver_on_coop_req(const wire::Message& m, TimeUs now) {
    std::vector<OutMessage> out;
    for (const auto& e : m.entries) {
      const auto* payload = e.flow_id == cfg_.flow ? cache_.get(e.seq, now) : nullptr;
      const bool not_yet = e.flow_id == cfg_.flow && payload == nullptr && e.seq > highest_;
      if (not_yet && cfg_.coop_hold > 0) {
        hold(e, false, now + cfg_.coop_hold);
        stats_.coop_held++;
        continue;
      }
      answer(e, payload, now, out);
    }
    return out;
  }

  // Recovery goes ahead only for a confirmed hole: the entry is missing and a
  // later packet has arrived, or it is still missing after confirm_hold.
  std::vector<OutMessage> on_confirm_query(const wire::Message& m, TimeUs now) {
    std::vector<OutMessage> out;
    if (m.ctrl.kind != wire::CtrlKind::kConfirmQuery) return out;
    for (const auto& e : m.ctrl.entries) {
      const bool ours = e.flow_id == cfg_.flow && !delivered(e.seq);
      if (ours && e.seq > highest_ && cfg_.confirm_hold > 0) {
        hold(e, true, now + cfg_.confirm_hold);
        stats_.confirms_held++;
        continue;
      }
      reply_confirm(e, ours && highest_ > e.seq, now, out);
    }
    return out;
  }

 private:
  struct Held {
    codec::ParitySymbol parity;
    std::uint64_t batch_id = 0;
    TimeUs at = 0;
  };

  struct HeldRequest {
    Entry entry;
    TimeUs deadline = 0;
    // Confirm query rather than a cooperative request.
    bool confirm = false;
  };

  void hold(const Entry& e, bool confirm, TimeUs deadline) {
    for (const auto& h : held_reqs_)
      if (h.entry == e && h.confirm == confirm) return;
    held_reqs_.push_back({e, deadline, confirm});
  }

  void reply_confirm(const Entry& e, bool allow, TimeUs now, std::vector<OutMessage>& out) {
    wire::Message reply;
    reply.type = wire::PacketType::kCtrl;
    reply.flow_id = e.flow_id;
    reply.seq = e.seq;
    reply.send_ts_us = static_cast<std::uint64_t>(now);
    reply.ctrl.kind = wire::CtrlKind::kConfirmReply;
    reply.ctrl.entries = {e};
    if (!allow) reply.flags |= wire::flags::kNegative;
    (allow ? stats_.confirms_allowed : stats_.confirms_denied)++;
    out.push_back({std::move(reply), 0});
  }

  void answer(const Entry& e, const std::vector<std::uint8_t>* payload, TimeUs now, std::vector<OutMessage>& out) {
    wire::Message resp;
    resp.type = wire::PacketType::kCoopResp;
    resp.flow_id = e.flow_id;
    resp.seq = e.seq;
    resp.send_ts_us = static_cast<std::uint64_t>(now);
    resp.entries = {e};
    if (payload != nullptr) {
      resp.payload = *payload;
      stats_.coop_served++;
    } else {
      resp.flags |= wire::flags::kNegative;
      stats_.coop_missing++;
    }
    out.push_back({std::move(resp), cfg_.response_delay});
  }

  // Answers held requests the new highest seq settles: the packet itself
  // arrived, or a later one did and it is missing.
  void settle_held(Seq seq, const std::vector<std::uint8_t>& payload, TimeUs now, std::vector<OutMessage>& out) {
    for (auto it = held_reqs_.begin(); it != held_reqs_.end();) {
      const bool arrived = it->entry.seq == seq;
      const bool hole = it->entry.seq < highest_ && !delivered(it->entry.seq);
      if (it->confirm && (arrived || hole)) {
        reply_confirm(it->entry, hole, now, out);
      } else if (arrived) {
        answer(it->entry, &payload, now, out);
      } else if (hole) {
        answer(it->entry, nullptr, now, out);
      } else {
        ++it;
        continue;
      }
      it = held_reqs_.erase(it);
    }
  }

  void accept(Seq seq, const std::vector<std::uint8_t>& payload, Via via, TimeUs now, std::vector<OutMessage>& out) {
    if (delivered_.count(seq) != 0) {
      stats_.duplicates++;
      return;
    }
    delivered_.insert(seq);
    if (cfg_.payload_check && !cfg_.payload_check(seq, payload)) stats_.corrupt++;
    cache_.put(seq, payload, now);
    DeliveryRecord rec{seq, now, via, -1};
    if (via != Via::kDirect && cfg_.expected_arrival) rec.recovery_time = std::max<TimeUs>(0, now - cfg_.expected_arrival(seq));
    log_.push_back(rec);
    while (delivered_.count(contiguous_ + 1) != 0) ++contiguous_;

    if (seq > highest_ + 1) {
      std::vector<Seq> missing;
      for (Seq s = highest_ + 1; s < seq; ++s)
        if (delivered_.count(s) == 0) missing.push_back(s);
      if (!missing.empty()) {
        stats_.gap_nacks++;
        send_nack(missing, false, now, out);
      }
    }
    highest_ = std::max(highest_, seq);
    if (!held_reqs_.empty()) settle_held(seq, payload, now, out);
  }

  void send_nack(const std::vector<Seq>& seqs, bool speculative, TimeUs now, std::vector<OutMessage>& out) {
    for (std::size_t i = 0; i < seqs.size(); i += wire::kMaxCount) {
      wire::Message nack;
      nack.type = wire::PacketType::kNack;
      nack.flow_id = cfg_.flow;
      nack.seq = seqs[i];
      nack.send_ts_us = static_cast<std::uint64_t>(now);
      if (speculative) nack.flags |= wire::flags::kSpeculative;
      for (std::size_t j = i; j < std::min(seqs.size(), i + wire::kMaxCount); ++j) nack.entries.push_back({cfg_.flow, seqs[j]});
      out.push_back({std::move(nack), 0});
      stats_.nacks_sent++;
      nacks_since_ack_++;
    }
  }

  // Decodes any held in-stream parity that now has enough symbols.
  void retry_held(TimeUs now, std::vector<OutMessage>& out) {
    bool progress = true;
    while (progress) {
      progress = false;
      for (auto it = held_.begin(); it != held_.end();) {
        std::vector<codec::SourceSymbol> present;
        std::size_t missing = 0;
        for (const auto& mem : it->parity.members) {
          const auto* p = cache_.get(mem.seq, now);
          if (p != nullptr) present.push_back({mem.flow_id, mem.seq, *p, mem.orig_len});
          else if (!delivered(mem.seq)) ++missing;
        }
        if (missing == 0) {
          it = held_.erase(it);
          continue;
        }
        // All parity symbols of this block held so far.
        std::vector<codec::ParitySymbol> parity;
        for (const auto& h : held_)
          if (h.batch_id == it->batch_id) parity.push_back(h.parity);
        std::vector<codec::SourceSymbol> decoded;
        try {
          decoded = codec::decode_batch(present, parity);
        } catch (const codec::CodecError&) {
          stats_.in_stream_held++;
          ++it;
          continue;
        }
        const auto batch = it->batch_id;
        held_.erase(std::remove_if(held_.begin(), held_.end(), [&](const Held& h) { return h.batch_id == batch; }), held_.end());
        for (auto& s : decoded) {
          if (delivered(s.seq)) continue;
          stats_.in_stream_decoded++;
          accept(s.seq, s.payload, Via::kInStream, now, out);
        }
        progress = true;
        break;
      }
    }
  }

  ReceiverConfig cfg_;
  Detector detector_;
  PacketCache cache_;
  ReceiverStats stats_;
  std::vector<DeliveryRecord> log_;
  std::unordered_set<Seq> delivered_;
  Seq highest_ = 0;
  Seq contiguous_ = 0;
  std::size_t nacks_since_ack_ = 0;
  std::vector<Held> held_;
  std::vector<HeldRequest> held_reqs_;
};

}  // namespace cloudrec::endpoint

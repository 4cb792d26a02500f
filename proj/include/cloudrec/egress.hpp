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

// Egress (DC2) recovery engine.
//
// Coded packets are stored and indexed under every member entry. A NACK is
// answered cheapest-first: forward in-stream parity when it covers every
// known loss in its block, otherwise open a cooperative task on each
// cross-stream batch holding the entry, solicit the other members' receivers
// and decode once the responses plus parity cover what is missing. Tasks that
// miss their deadline fail silently.

#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include "cloudrec/codec.hpp"
#include "cloudrec/types.hpp"
#include "cloudrec/wire.hpp"

namespace cloudrec::egress {

struct EgressConfig {
  // Task deadline for flows registered without an RTT.
  TimeUs default_rtt = 200 * kUsPerMs;
  // A NACK that precedes the first coded packet for its entry by more than
  // this is confirmed with the receiver before recovering. Speculative NACKs
  // are always confirmed.
  TimeUs boundary_threshold = 90 * kUsPerMs;
  // Stored batches live this many (max registered) RTTs.
  double store_ttl_rtts = 3.0;
  std::size_t proactive_nacks = 3;
};

enum class Mode { kNormal, kProactive };

struct ReceiverMode {
  Mode mode = Mode::kNormal;
  std::size_t consecutive_nacks = 0;
  friend bool operator==(const ReceiverMode&, const ReceiverMode&) = default;
};

enum class ReceiverEvent { kNack, kAck };

inline ReceiverMode update_receiver_mode(ReceiverMode m, ReceiverEvent ev, std::size_t threshold = 3) {
  if (ev == ReceiverEvent::kAck) return {};
  m.consecutive_nacks++;
  if (m.consecutive_nacks >= threshold) m.mode = Mode::kProactive;
  return m;
}

enum class TaskState { kPending, kDecoded, kFailedSilent };

struct Outgoing {
  NodeId to = 0;
  wire::Message msg;
};

struct EgressStats {
  std::uint64_t coded_received = 0;
  std::uint64_t duplicate_coded = 0;
  std::uint64_t nacks = 0;
  std::uint64_t actionable_nacks = 0;
  std::uint64_t in_stream_forwards = 0;
  std::uint64_t coop_requests = 0;
  std::uint64_t coop_responses = 0;
  std::uint64_t late_responses = 0;
  std::uint64_t tasks_opened = 0;
  std::uint64_t proactive_tasks = 0;
  std::uint64_t decoded_tasks = 0;
  std::uint64_t failed_silent = 0;
  std::uint64_t recovered_sent = 0;
  std::uint64_t confirm_queries = 0;
  std::uint64_t confirm_denied = 0;
  std::uint64_t evicted_batches = 0;
};

class Egress {
 public:
  explicit Egress(EgressConfig cfg = {}) : cfg_(cfg) {}

  const EgressConfig& config() const { return cfg_; }
  const EgressStats& stats() const { return stats_; }

  void register_flow(FlowId flow, NodeId receiver, TimeUs rtt) {
    flows_[flow] = {receiver, rtt};
    max_rtt_ = std::max(max_rtt_, rtt);
  }

  Mode receiver_mode(NodeId receiver) const {
    auto it = modes_.find(receiver);
    return it == modes_.end() ? Mode::kNormal : it->second.mode;
  }

  std::optional<TaskState> task_state(std::uint64_t batch_id) const {
    auto it = batches_.find(batch_id);
    if (it == batches_.end() || !it->second.task_open) return std::nullopt;
    return it->second.state;
  }

  bool holds_batch(std::uint64_t batch_id) const { return batches_.count(batch_id) != 0; }
  std::size_t stored_batches() const { return batches_.size(); }
  bool is_pending_loss(const Entry& e) const { return lost_.count(e) != 0; }

  // Dispatches any message arriving at the egress node.
  std::vector<Outgoing> handle(NodeId from, const wire::Message& m, TimeUs now) {
    switch (m.type) {
      case wire::PacketType::kInCoded:
      case wire::PacketType::kCrossCoded: return handle_coded(m, now);
      case wire::PacketType::kNack: return handle_nack(from, m.entries, (m.flags & wire::flags::kSpeculative) != 0, now);
      case wire::PacketType::kAck: handle_ack(from); return {};
      case wire::PacketType::kCoopResp: return handle_coop_resp(from, m, now);
      case wire::PacketType::kCtrl: return handle_ctrl(from, m, now);
      default: return {};
    }
  }

  std::vector<Outgoing> handle_coded(const wire::Message& m, TimeUs now) {
    std::vector<Outgoing> out;
    if (!m.is_coded() || m.coded.members.empty()) return out;
    stats_.coded_received++;
    auto [it, inserted] = batches_.try_emplace(m.coded.batch_id);
    Batch& b = it->second;
    if (inserted) {
      b.id = m.coded.batch_id;
      b.type = m.type;
      b.members = m.coded.members;
      b.num_parity = m.coded.num_parity;
      b.first_arrival = now;
      arrival_order_.push_back({now, b.id});
      for (std::size_t j = 0; j < b.members.size(); ++j) by_entry_[b.members[j].entry()].push_back(b.id);
    } else if (b.members != m.coded.members || b.type != m.type) {
      return out;
    }
    for (const auto& p : b.parity)
      if (p.parity_index == m.coded.parity_index) {
        stats_.duplicate_coded++;
        return out;
      }
    b.parity.push_back(wire::to_parity(m));

    // Losses already reported for any member may now be recoverable.
    for (const auto& mem : b.members)
      if (lost_.count(mem.entry()) != 0) advance(mem.entry(), now, out);
    if (b.task_open && b.state == TaskState::kPending) try_decode(b, now, out);

    if (b.type == wire::PacketType::kCrossCoded && b.parity.size() == 1) start_proactive(b, now, out);
    return out;
  }

  std::vector<Outgoing> handle_nack(NodeId receiver, const std::vector<Entry>& entries, bool speculative, TimeUs now) {
    std::vector<Outgoing> out;
    stats_.nacks++;
    bool actionable = false;
    for (const auto& e : entries) {
      auto fit = flows_.find(e.flow_id);
      if (fit == flows_.end()) continue;
      if (deliver_decoded(e, out)) {
        actionable = true;
        continue;
      }
      const bool covered = by_entry_.count(e) != 0;
      auto [lit, fresh] = lost_.try_emplace(e);
      LostEntry& le = lit->second;
      // Speculative entries count once the receiver confirms them.
      actionable = actionable || (covered && (!speculative || le.confirmed));
      if (fresh) {
        le.receiver = receiver;
        le.first_nack = now;
        le.covered_at_nack = covered;
        le.speculative = speculative;
      } else {
        if (!speculative) le.speculative = false;
        // A repeat NACK means in-stream recovery did not work out.
        if (le.in_stream_sent) le.force_coop = true;
      }
      le.expires = now + rtt_of(e.flow_id);
      advance(e, now, out);
    }
    if (actionable) {
      stats_.actionable_nacks++;
      modes_[receiver] = update_receiver_mode(modes_[receiver], ReceiverEvent::kNack, cfg_.proactive_nacks);
    }
    return out;
  }

  void handle_ack(NodeId receiver) { modes_[receiver] = update_receiver_mode(modes_[receiver], ReceiverEvent::kAck); }

  std::vector<Outgoing> handle_coop_resp(NodeId /*peer*/, const wire::Message& m, TimeUs now) {
    std::vector<Outgoing> out;
    stats_.coop_responses++;
    const bool negative = (m.flags & wire::flags::kNegative) != 0;
    for (const auto& e : m.entries) {
      auto bit = by_entry_.find(e);
      bool used = false;
      if (bit != by_entry_.end()) {
        for (auto id : bit->second) {
          Batch& b = batches_.at(id);
          if (!b.task_open || b.state != TaskState::kPending) continue;
          if (now > b.deadline) {
            fail(b);
            continue;
          }
          const std::size_t j = member_index(b, e);
          if (negative) {
            b.lost.insert(j);
          } else if (b.responses.count(j) == 0) {
            b.responses.emplace(j, m.payload);
          }
          used = true;
          try_decode(b, now, out);
        }
      }
      if (!used) stats_.late_responses++;
    }
    return out;
  }

  std::vector<Outgoing> handle_ctrl(NodeId from, const wire::Message& m, TimeUs now) {
    std::vector<Outgoing> out;
    if (m.ctrl.kind != wire::CtrlKind::kConfirmReply) return out;
    const bool deny = (m.flags & wire::flags::kNegative) != 0;
    bool confirmed_speculative = false;
    for (const auto& e : m.ctrl.entries) {
      auto it = lost_.find(e);
      if (it == lost_.end() || !it->second.awaiting_confirm) continue;
      it->second.awaiting_confirm = false;
      if (deny) {
        stats_.confirm_denied++;
        lost_.erase(it);
        continue;
      }
      it->second.confirmed = true;
      confirmed_speculative = confirmed_speculative || it->second.speculative;
      advance(e, now, out);
    }
    if (confirmed_speculative) {
      stats_.actionable_nacks++;
      modes_[from] = update_receiver_mode(modes_[from], ReceiverEvent::kNack, cfg_.proactive_nacks);
    }
    return out;
  }

  // Expires overdue tasks and stale state; returns the number of tasks failed.
  std::size_t tick(TimeUs now) {
    std::size_t failed = 0;
    for (auto it = open_tasks_.begin(); it != open_tasks_.end();) {
      auto bit = batches_.find(*it);
      if (bit == batches_.end() || bit->second.state != TaskState::kPending) {
        it = open_tasks_.erase(it);
        continue;
      }
      if (now > bit->second.deadline) {
        fail(bit->second);
        ++failed;
        it = open_tasks_.erase(it);
        continue;
      }
      ++it;
    }
    for (auto it = lost_.begin(); it != lost_.end();) {
      if (now > it->second.expires) it = lost_.erase(it);
      else ++it;
    }
    const TimeUs ttl = static_cast<TimeUs>(cfg_.store_ttl_rtts * static_cast<double>(max_rtt_ > 0 ? max_rtt_ : cfg_.default_rtt));
    while (!arrival_order_.empty() && arrival_order_.front().first + ttl < now) {
      evict(arrival_order_.front().second);
      arrival_order_.pop_front();
    }
    return failed;
  }

 private:
  struct FlowInfo {
    NodeId receiver = 0;
    TimeUs rtt = 0;
  };

  struct Batch {
    std::uint64_t id = 0;
    wire::PacketType type = wire::PacketType::kCrossCoded;
    std::vector<codec::MemberInfo> members;
    std::uint8_t num_parity = 0;
    std::vector<codec::ParitySymbol> parity;
    TimeUs first_arrival = 0;

    bool task_open = false;
    TaskState state = TaskState::kPending;
    TimeUs deadline = 0;
    std::map<std::size_t, std::vector<std::uint8_t>> responses;
    std::set<std::size_t> lost;
    std::set<std::size_t> requested;
    std::map<std::size_t, std::vector<std::uint8_t>> decoded;
    std::set<std::size_t> delivered;
    // In-stream parity indices already forwarded.
    std::set<std::uint8_t> forwarded;
  };

  struct LostEntry {
    NodeId receiver = 0;
    TimeUs first_nack = 0;
    TimeUs expires = 0;
    bool covered_at_nack = false;
    bool speculative = false;
    bool awaiting_confirm = false;
    bool confirmed = false;
    bool in_stream_sent = false;
    bool force_coop = false;
  };

  TimeUs rtt_of(FlowId flow) const {
    auto it = flows_.find(flow);
    return it == flows_.end() || it->second.rtt <= 0 ? cfg_.default_rtt : it->second.rtt;
  }

  static std::size_t member_index(const Batch& b, const Entry& e) {
    for (std::size_t j = 0; j < b.members.size(); ++j)
      if (b.members[j].entry() == e) return j;
    return b.members.size();
  }

  // Sends an already decoded copy of `e` if one exists and was not sent.
  bool deliver_decoded(const Entry& e, std::vector<Outgoing>& out) {
    auto bit = by_entry_.find(e);
    if (bit == by_entry_.end()) return false;
    for (auto id : bit->second) {
      Batch& b = batches_.at(id);
      if (!b.task_open || b.state != TaskState::kDecoded) continue;
      const std::size_t j = member_index(b, e);
      if (b.decoded.count(j) == 0) continue;
      if (b.delivered.count(j) == 0) send_recovered(b, j, out);
      return true;
    }
    return false;
  }

  void advance(const Entry& e, TimeUs now, std::vector<Outgoing>& out) {
    auto lit = lost_.find(e);
    if (lit == lost_.end()) return;
    LostEntry& le = lit->second;
    if (le.awaiting_confirm) return;
    if (deliver_decoded(e, out)) {
      lost_.erase(Entry(e));
      return;
    }
    auto bit = by_entry_.find(e);
    if (bit == by_entry_.end()) return;

    TimeUs first_coverage = now;
    for (auto id : bit->second) first_coverage = std::min(first_coverage, batches_.at(id).first_arrival);
    const bool boundary = le.speculative || (!le.covered_at_nack && first_coverage - le.first_nack > cfg_.boundary_threshold);
    if (boundary && !le.confirmed) {
      le.awaiting_confirm = true;
      wire::Message q;
      q.type = wire::PacketType::kCtrl;
      q.flow_id = e.flow_id;
      q.seq = e.seq;
      q.send_ts_us = static_cast<std::uint64_t>(now);
      q.ctrl.kind = wire::CtrlKind::kConfirmQuery;
      q.ctrl.entries = {e};
      out.push_back({le.receiver, std::move(q)});
      stats_.confirm_queries++;
      return;
    }

    // Cheapest first: in-stream parity the receiver can decode itself.
    if (!le.force_coop) {
      for (auto id : bit->second) {
        Batch& b = batches_.at(id);
        if (b.type != wire::PacketType::kInCoded || b.parity.empty()) continue;
        std::size_t lost_in_block = 0;
        for (const auto& mem : b.members) lost_in_block += lost_.count(mem.entry());
        if (b.parity.size() < lost_in_block) continue;
        // Parity the receiver already holds did not repair this entry.
        bool sent = false;
        for (const auto& p : b.parity) {
          if (b.forwarded.count(p.parity_index) != 0) continue;
          b.forwarded.insert(p.parity_index);
          out.push_back({le.receiver, wire::make_coded(wire::PacketType::kInCoded, b.id, b.num_parity, p)});
          stats_.in_stream_forwards++;
          sent = true;
        }
        if (!sent) continue;
        le.in_stream_sent = true;
        return;
      }
    }

    for (auto id : std::vector<std::uint64_t>(bit->second)) {
      if (lost_.count(e) == 0) break;
      Batch& b = batches_.at(id);
      if (b.type != wire::PacketType::kCrossCoded || b.parity.empty()) continue;
      open_cooperative(b, member_index(b, e), now, out);
    }
  }

  void open_cooperative(Batch& b, std::size_t lost_member, TimeUs now, std::vector<Outgoing>& out) {
    if (!b.task_open) {
      b.task_open = true;
      b.state = TaskState::kPending;
      b.deadline = now + rtt_of(b.members[lost_member].flow_id);
      open_tasks_.insert(b.id);
      stats_.tasks_opened++;
    }
    if (b.state == TaskState::kDecoded) {
      if (b.delivered.count(lost_member) == 0) send_recovered(b, lost_member, out);
      return;
    }
    if (b.state != TaskState::kPending) return;
    b.lost.insert(lost_member);

    // One request per distinct peer, listing every entry it should return.
    std::map<NodeId, std::vector<Entry>> asks;
    for (std::size_t j = 0; j < b.members.size(); ++j) {
      if (b.lost.count(j) != 0 || b.requested.count(j) != 0 || b.responses.count(j) != 0) continue;
      auto fit = flows_.find(b.members[j].flow_id);
      if (fit == flows_.end()) continue;
      b.requested.insert(j);
      asks[fit->second.receiver].push_back(b.members[j].entry());
    }
    for (auto& [peer, entries] : asks) {
      wire::Message req;
      req.type = wire::PacketType::kCoopReq;
      req.flow_id = entries.front().flow_id;
      req.seq = entries.front().seq;
      req.send_ts_us = static_cast<std::uint64_t>(now);
      req.entries = std::move(entries);
      out.push_back({peer, std::move(req)});
      stats_.coop_requests++;
    }
    try_decode(b, now, out);
  }

  // While a receiver is proactive, any new cross-stream batch carrying one of
  // its flows starts recovery for that member without waiting for a NACK.
  void start_proactive(Batch& b, TimeUs now, std::vector<Outgoing>& out) {
    for (std::size_t j = 0; j < b.members.size(); ++j) {
      auto fit = flows_.find(b.members[j].flow_id);
      if (fit == flows_.end() || receiver_mode(fit->second.receiver) != Mode::kProactive) continue;
      if (b.task_open && b.lost.count(j) != 0) continue;
      stats_.proactive_tasks++;
      open_cooperative(b, j, now, out);
    }
  }

  void try_decode(Batch& b, TimeUs now, std::vector<Outgoing>& out) {
    if (!b.task_open || b.state != TaskState::kPending) return;
    if (now > b.deadline) return;
    const std::size_t missing = b.members.size() - b.responses.size();
    if (missing > b.parity.size()) return;
    std::vector<codec::SourceSymbol> present;
    present.reserve(b.responses.size());
    for (const auto& [j, payload] : b.responses) {
      const auto& mem = b.members[j];
      present.push_back({mem.flow_id, mem.seq, payload, mem.orig_len});
    }
    std::vector<codec::SourceSymbol> recovered;
    try {
      recovered = codec::decode_batch(present, b.parity);
    } catch (const codec::CodecError&) {
      return;
    }
    b.state = TaskState::kDecoded;
    stats_.decoded_tasks++;
    for (auto& s : recovered) b.decoded.emplace(member_index(b, s.entry()), std::move(s.payload));
    for (std::size_t j : b.lost)
      if (b.decoded.count(j) != 0) send_recovered(b, j, out);
  }

  void send_recovered(Batch& b, std::size_t j, std::vector<Outgoing>& out) {
    const Entry e = b.members[j].entry();
    auto fit = flows_.find(e.flow_id);
    if (fit == flows_.end()) return;
    wire::Message m;
    m.type = wire::PacketType::kData;
    m.flags = wire::flags::kRecovered;
    m.flow_id = e.flow_id;
    m.seq = e.seq;
    m.payload = b.decoded.at(j);
    out.push_back({fit->second.receiver, std::move(m)});
    b.delivered.insert(j);
    lost_.erase(e);
    stats_.recovered_sent++;
  }

  void fail(Batch& b) {
    if (b.state != TaskState::kPending) return;
    b.state = TaskState::kFailedSilent;
    stats_.failed_silent++;
  }

  void evict(std::uint64_t id) {
    auto it = batches_.find(id);
    if (it == batches_.end()) return;
    if (it->second.task_open && it->second.state == TaskState::kPending) fail(it->second);
    for (const auto& mem : it->second.members) {
      auto eit = by_entry_.find(mem.entry());
      if (eit == by_entry_.end()) continue;
      auto& ids = eit->second;
      ids.erase(std::remove(ids.begin(), ids.end(), id), ids.end());
      if (ids.empty()) by_entry_.erase(eit);
    }
    open_tasks_.erase(id);
    batches_.erase(it);
    stats_.evicted_batches++;
  }

  EgressConfig cfg_;
  EgressStats stats_;
  TimeUs max_rtt_ = 0;
  std::unordered_map<FlowId, FlowInfo> flows_;
  std::unordered_map<NodeId, ReceiverMode> modes_;
  std::map<std::uint64_t, Batch> batches_;
  std::unordered_map<Entry, std::vector<std::uint64_t>, EntryHash> by_entry_;
  std::map<Entry, LostEntry> lost_;
  std::set<std::uint64_t> open_tasks_;
  std::deque<std::pair<TimeUs, std::uint64_t>> arrival_order_;
};

}  // namespace cloudrec::egress

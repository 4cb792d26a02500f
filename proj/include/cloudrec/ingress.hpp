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

// Ingress (DC1) encoder.
//
// Flows are grouped by egress DC, at most k_max flows per group. Every data
// packet is pushed into its flow's in-stream queue and into one of the group's
// cross-stream queues, chosen round-robin by sequence number so that no queue ever holds
// two packets of the same flow. Queues are flushed when full or when their
// timer expires.

#pragma once

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cloudrec/codec.hpp"
#include "cloudrec/types.hpp"
#include "cloudrec/wire.hpp"

namespace cloudrec::ingress {

struct IngressConfig {
  std::size_t k_max = 6;
  std::size_t num_parity_cross = 2;
  std::size_t num_parity_in = 1;
  // In-stream block size (denominator of s). Zero disables in-stream coding.
  std::size_t in_block = 5;
  TimeUs cross_flush = 30 * kUsPerMs;
  TimeUs in_flush = 50 * kUsPerMs;
};

enum class IngressErrc { kDuplicateFlow, kUnassignedFlow };

class IngressError : public std::runtime_error {
 public:
  IngressError(IngressErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  IngressErrc code() const { return code_; }

 private:
  IngressErrc code_;
};

struct GroupHandle {
  NodeId egress = 0;
  std::size_t index = 0;
  friend bool operator==(const GroupHandle&, const GroupHandle&) = default;
};

struct QueueId {
  enum class Kind { kInStream, kCrossStream } kind = Kind::kCrossStream;
  std::size_t group = 0;  // kCrossStream
  std::size_t index = 0;  // kCrossStream
  FlowId flow = 0;        // kInStream
};

struct Emission {
  NodeId egress = 0;
  wire::Message msg;
};

struct IngressStats {
  std::uint64_t packets = 0;
  std::uint64_t cross_batches = 0;
  std::uint64_t in_blocks = 0;
  std::uint64_t partial_cross_flushes = 0;
  // Packets dropped from cross-stream queues without being encoded.
  std::uint64_t evictions = 0;
  std::uint64_t parity_emitted = 0;
};

class Ingress {
 public:
  explicit Ingress(IngressConfig cfg) : cfg_(cfg) {
    if (cfg_.k_max < 1 || cfg_.k_max + cfg_.num_parity_cross > codec::kMaxSymbols)
      throw std::invalid_argument("ingress: k_max out of range");
    if (cfg_.num_parity_cross < 1) throw std::invalid_argument("ingress: num_parity_cross must be >= 1");
    if (cfg_.in_block > 0 && cfg_.num_parity_in < 1) throw std::invalid_argument("ingress: num_parity_in must be >= 1");
  }

  const IngressConfig& config() const { return cfg_; }
  const IngressStats& stats() const { return stats_; }

  GroupHandle assign_group(FlowId flow, NodeId egress) {
    if (flows_.count(flow) != 0) throw IngressError(IngressErrc::kDuplicateFlow, "flow already assigned");
    std::size_t idx = groups_.size();
    for (std::size_t g = 0; g < groups_.size(); ++g)
      if (groups_[g].egress == egress && groups_[g].members.size() < cfg_.k_max) {
        idx = g;
        break;
      }
    if (idx == groups_.size()) {
      Group g;
      g.egress = egress;
      g.queues.resize(cfg_.k_max);
      groups_.push_back(std::move(g));
    }
    groups_[idx].members.push_back(flow);
    FlowState fs;
    fs.group = idx;
    flows_.emplace(flow, std::move(fs));
    return {egress, idx};
  }

  std::optional<GroupHandle> group_of(FlowId flow) const {
    auto it = flows_.find(flow);
    if (it == flows_.end()) return std::nullopt;
    return GroupHandle{groups_[it->second.group].egress, it->second.group};
  }

  std::size_t group_size(std::size_t group) const { return groups_.at(group).members.size(); }
  std::size_t num_groups() const { return groups_.size(); }
  std::size_t cross_queue_size(std::size_t group, std::size_t index) const { return groups_.at(group).queues.at(index).items.size(); }
  std::size_t in_queue_size(FlowId flow) const { return flows_.at(flow).in_queue.items.size(); }

  std::vector<Emission> process_packet(const codec::SourceSymbol& pkt, TimeUs now) {
    auto it = flows_.find(pkt.flow_id);
    if (it == flows_.end()) throw IngressError(IngressErrc::kUnassignedFlow, "packet for unassigned flow");
    FlowState& fs = it->second;
    Group& group = groups_[fs.group];
    std::vector<Emission> out;
    stats_.packets++;

    // (1) In-stream coding.
    if (cfg_.in_block > 0) {
      auto& q = fs.in_queue;
      if (q.items.empty()) q.deadline = now + cfg_.in_flush;
      q.items.push_back(pkt);
      if (q.items.size() >= cfg_.in_block) flush_in(group.egress, q, out);
    }

    // (2) Cross-stream coding: find a queue without a packet from this flow.
    // The round-robin start comes from the sequence number, so a packet lost
    // before DC1 does not shift the flow against the rest of its group.
    const std::size_t initial = static_cast<std::size_t>(pkt.seq % cfg_.k_max);
    std::size_t q_index = initial;
    while (contains(group.queues[q_index], pkt.flow_id)) {
      q_index = (q_index + 1) % cfg_.k_max;
      if (q_index == initial) {
        // Every queue holds this flow: empty the initial one.
        auto& q = group.queues[q_index];
        if (q.items.size() > 1) {
          flush_cross(group, q, out);
        } else {
          stats_.evictions += q.items.size();
          q.items.clear();
        }
        break;
      }
    }
    auto& q = group.queues[q_index];
    if (q.items.empty()) q.deadline = now + cfg_.cross_flush;
    q.items.push_back(pkt);
    if (q.items.size() >= group.members.size() && q.items.size() >= 2) flush_cross(group, q, out);
    return out;
  }

  // Flushes one queue whose timer expired. Cross-stream queues holding a
  // single packet are cleared without emitting.
  std::vector<Emission> on_timer(const QueueId& id, TimeUs now) {
    std::vector<Emission> out;
    if (id.kind == QueueId::Kind::kInStream) {
      auto it = flows_.find(id.flow);
      if (it == flows_.end()) return out;
      auto& q = it->second.in_queue;
      if (q.items.empty() || q.deadline > now) return out;
      flush_in(groups_[it->second.group].egress, q, out);
      return out;
    }
    if (id.group >= groups_.size() || id.index >= groups_[id.group].queues.size()) return out;
    Group& group = groups_[id.group];
    auto& q = group.queues[id.index];
    if (q.items.empty() || q.deadline > now) return out;
    if (q.items.size() >= 2) {
      stats_.partial_cross_flushes++;
      flush_cross(group, q, out);
    } else {
      stats_.evictions += q.items.size();
      q.items.clear();
    }
    return out;
  }

  // Fires every queue timer due at `now`, in a fixed order.
  std::vector<Emission> expire(TimeUs now) {
    std::vector<Emission> out;
    for (std::size_t g = 0; g < groups_.size(); ++g)
      for (std::size_t i = 0; i < groups_[g].queues.size(); ++i) {
        auto e = on_timer({QueueId::Kind::kCrossStream, g, i, 0}, now);
        out.insert(out.end(), std::make_move_iterator(e.begin()), std::make_move_iterator(e.end()));
      }
    for (FlowId flow : sorted_flows()) {
      auto e = on_timer({QueueId::Kind::kInStream, 0, 0, flow}, now);
      out.insert(out.end(), std::make_move_iterator(e.begin()), std::make_move_iterator(e.end()));
    }
    return out;
  }

  std::optional<TimeUs> next_deadline() const {
    std::optional<TimeUs> best;
    auto consider = [&](TimeUs t) {
      if (!best || t < *best) best = t;
    };
    for (const auto& g : groups_)
      for (const auto& q : g.queues)
        if (!q.items.empty()) consider(q.deadline);
    for (const auto& [flow, fs] : flows_)
      if (!fs.in_queue.items.empty()) consider(fs.in_queue.deadline);
    return best;
  }

 private:
  struct Queue {
    std::vector<codec::SourceSymbol> items;
    TimeUs deadline = 0;
  };

  struct Group {
    NodeId egress = 0;
    std::vector<FlowId> members;
    std::vector<Queue> queues;
  };

  struct FlowState {
    std::size_t group = 0;
    Queue in_queue;
  };

  static bool contains(const Queue& q, FlowId flow) {
    for (const auto& s : q.items)
      if (s.flow_id == flow) return true;
    return false;
  }

  std::vector<FlowId> sorted_flows() const {
    std::vector<FlowId> ids;
    ids.reserve(flows_.size());
    for (const auto& [flow, fs] : flows_) ids.push_back(flow);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  void emit(NodeId egress, wire::PacketType type, std::size_t num_parity, Queue& q, std::vector<Emission>& out) {
    auto batch = std::move(q.items);
    q.items.clear();
    codec::pad_to_common(batch);
    const auto parity = codec::encode_batch(batch, num_parity);
    const std::uint64_t batch_id = next_batch_id_++;
    for (const auto& p : parity) {
      out.push_back({egress, wire::make_coded(type, batch_id, static_cast<std::uint8_t>(num_parity), p)});
      stats_.parity_emitted++;
    }
  }

  void flush_cross(Group& group, Queue& q, std::vector<Emission>& out) {
    stats_.cross_batches++;
    emit(group.egress, wire::PacketType::kCrossCoded, cfg_.num_parity_cross, q, out);
  }

  void flush_in(NodeId egress, Queue& q, std::vector<Emission>& out) {
    stats_.in_blocks++;
    emit(egress, wire::PacketType::kInCoded, cfg_.num_parity_in, q, out);
  }

  IngressConfig cfg_;
  IngressStats stats_;
  std::vector<Group> groups_;
  std::unordered_map<FlowId, FlowState> flows_;
  std::uint64_t next_batch_id_ = 1;
};

}  // namespace cloudrec::ingress

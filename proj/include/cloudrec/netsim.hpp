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

// Single-threaded discrete-event network simulator.
//
// Events run in (time, schedule counter) order, so two events at the same
// virtual time run in the order they were scheduled. Links are FIFO: a
// message never overtakes an earlier one on the same link, jitter included.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cloudrec/loss_model.hpp"
#include "cloudrec/types.hpp"
#include "cloudrec/wire.hpp"

namespace cloudrec::netsim {

using LinkId = std::uint32_t;

struct LinkConfig {
  std::string name;
  NodeId from = 0;
  NodeId to = 0;
  TimeUs delay = 1000;
  // Uniform in [-jitter, +jitter], clamped so delivery is never before send.
  TimeUs jitter = 0;
  LossModel loss;
  // Zero disables serialization delay.
  double bandwidth_bps = 0.0;
};

constexpr std::size_t kNumTypes = 8;

struct LinkStats {
  std::uint64_t sent_msgs = 0;
  std::uint64_t sent_bytes = 0;
  std::uint64_t delivered_msgs = 0;
  std::uint64_t delivered_bytes = 0;
  std::uint64_t dropped_msgs = 0;
  std::uint64_t dropped_bytes = 0;
  std::array<std::uint64_t, kNumTypes> sent_bytes_by_type{};
  std::array<std::uint64_t, kNumTypes> payload_bytes_by_type{};

  std::uint64_t in_flight_bytes() const { return sent_bytes - delivered_bytes - dropped_bytes; }
};

struct NodeStats {
  std::uint64_t egress_bytes = 0;
  std::uint64_t ingress_bytes = 0;
};

struct Datagram {
  LinkId link = 0;
  NodeId from = 0;
  NodeId to = 0;
  TimeUs sent_at = 0;
  std::vector<std::uint8_t> bytes;
};

struct SendResult {
  bool dropped = false;
  TimeUs deliver_at = 0;
};

class Simulator {
 public:
  using Handler = std::function<void(const Datagram&)>;

  explicit Simulator(std::uint64_t seed = 1) : seed_(seed) {}

  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  NodeId add_node(std::string name, Handler handler = {}) {
    nodes_.push_back({std::move(name), std::move(handler), {}});
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  void set_handler(NodeId node, Handler handler) { nodes_.at(node).handler = std::move(handler); }

  LinkId add_link(LinkConfig cfg) {
    if (cfg.from >= nodes_.size() || cfg.to >= nodes_.size()) throw std::out_of_range("add_link: unknown node");
    if (cfg.delay <= 0) throw std::invalid_argument("add_link: delay must be positive");
    if (cfg.jitter < 0) throw std::invalid_argument("add_link: negative jitter");
    cfg.loss.validate();
    if (cfg.name.empty()) cfg.name = nodes_[cfg.from].name + "->" + nodes_[cfg.to].name;
    if (link_by_name_.count(cfg.name) != 0) throw std::invalid_argument("add_link: duplicate link name " + cfg.name);
    Link link;
    link.loss_rng = Rng(seed_, cfg.name + "/loss");
    link.jitter_rng = Rng(seed_, cfg.name + "/jitter");
    link.cfg = std::move(cfg);
    links_.push_back(std::move(link));
    const auto id = static_cast<LinkId>(links_.size() - 1);
    link_by_name_[links_.back().cfg.name] = id;
    return id;
  }

  std::optional<LinkId> find_link(const std::string& name) const {
    auto it = link_by_name_.find(name);
    if (it == link_by_name_.end()) return std::nullopt;
    return it->second;
  }

  TimeUs now() const { return now_; }

  void schedule(TimeUs at, std::function<void()> fn) {
    if (at < now_) at = now_;
    events_.push_back({at, counter_++, std::move(fn)});
    std::push_heap(events_.begin(), events_.end(), Later{});
  }

  SendResult send(LinkId id, std::vector<std::uint8_t> bytes) {
    Link& link = links_.at(id);
    const auto size = bytes.size();
    const auto type = bytes.size() > 1 && bytes[1] < kNumTypes ? bytes[1] : 0;
    const std::uint64_t payload = bytes.size() >= wire::kBaseHeaderSize ? (std::uint64_t{bytes[28]} << 8 | bytes[29]) : 0;

    link.stats.sent_msgs++;
    link.stats.sent_bytes += size;
    link.stats.sent_bytes_by_type[type] += size;
    link.stats.payload_bytes_by_type[type] += payload;
    nodes_[link.cfg.from].stats.egress_bytes += size;

    SendResult result;
    result.dropped = link.cfg.loss.drop(now_, link.loss_rng);
    // Jitter is drawn for every message so loss does not shift the jitter stream.
    TimeUs jitter = 0;
    if (link.cfg.jitter > 0) {
      const auto span = static_cast<std::uint64_t>(2 * link.cfg.jitter + 1);
      jitter = static_cast<TimeUs>(link.jitter_rng.next() % span) - link.cfg.jitter;
    }
    TimeUs start = now_;
    if (link.cfg.bandwidth_bps > 0.0) {
      start = std::max(now_, link.busy_until);
      link.busy_until = start + static_cast<TimeUs>(static_cast<double>(size) * 8.0 * 1e6 / link.cfg.bandwidth_bps);
      start = link.busy_until;
    }
    TimeUs at = std::max(start + 1, start + link.cfg.delay + jitter);
    at = std::max(at, link.last_delivery);

    if (trace_ != nullptr) {
      *trace_ << "{\"ts\":" << now_ << ",\"link\":\"" << link.cfg.name << "\",\"type\":\""
              << wire::to_string(static_cast<wire::PacketType>(type)) << "\",\"size\":" << size
              << ",\"dropped\":" << (result.dropped ? "true" : "false") << "}\n";
    }

    if (result.dropped) {
      link.stats.dropped_msgs++;
      link.stats.dropped_bytes += size;
      return result;
    }
    link.last_delivery = at;
    result.deliver_at = at;
    Datagram d{id, link.cfg.from, link.cfg.to, now_, std::move(bytes)};
    schedule(at, [this, d = std::move(d)]() mutable { deliver(std::move(d)); });
    return result;
  }

  SendResult send(LinkId id, const wire::Message& m) { return send(id, wire::serialize(m)); }

  // Runs every event with time <= t_end, then advances the clock to t_end.
  void run_until(TimeUs t_end) {
    while (!events_.empty() && events_.front().at <= t_end) {
      std::pop_heap(events_.begin(), events_.end(), Later{});
      Event ev = std::move(events_.back());
      events_.pop_back();
      now_ = ev.at;
      ev.fn();
    }
    if (t_end > now_) now_ = t_end;
  }

  // Runs until no events remain.
  void run() {
    while (!events_.empty()) run_until(events_.front().at);
  }

  bool idle() const { return events_.empty(); }

  void set_trace(std::ostream* out) { trace_ = out; }

  const LinkStats& link_stats(LinkId id) const { return links_.at(id).stats; }
  const LinkConfig& link_config(LinkId id) const { return links_.at(id).cfg; }
  const NodeStats& node_stats(NodeId id) const { return nodes_.at(id).stats; }
  const std::string& node_name(NodeId id) const { return nodes_.at(id).name; }
  std::size_t num_links() const { return links_.size(); }
  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    std::string name;
    Handler handler;
    NodeStats stats;
  };

  struct Link {
    LinkConfig cfg;
    Rng loss_rng;
    Rng jitter_rng;
    LinkStats stats;
    TimeUs busy_until = 0;
    TimeUs last_delivery = 0;
  };

  struct Event {
    TimeUs at;
    std::uint64_t order;
    std::function<void()> fn;
  };

  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.at != b.at ? a.at > b.at : a.order > b.order;
    }
  };

  void deliver(Datagram d) {
    Link& link = links_[d.link];
    link.stats.delivered_msgs++;
    link.stats.delivered_bytes += d.bytes.size();
    Node& node = nodes_[d.to];
    node.stats.ingress_bytes += d.bytes.size();
    if (node.handler) node.handler(d);
  }

  std::uint64_t seed_;
  TimeUs now_ = 0;
  std::uint64_t counter_ = 0;
  std::vector<Event> events_;
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::unordered_map<std::string, LinkId> link_by_name_;
  std::ostream* trace_ = nullptr;
};

}  // namespace cloudrec::netsim

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

// Scenario files: YAML, validated field by field with line-anchored errors.

#pragma once

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cloudrec/endpoint.hpp"
#include "cloudrec/loss_model.hpp"
#include "cloudrec/types.hpp"

namespace cloudrec::scenario {

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& file, int line, int column, std::string field, const std::string& msg)
      : std::runtime_error(file + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + field + ": " + msg),
        line_(line),
        column_(column),
        field_(std::move(field)) {}

  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  int column_;
  std::string field_;
};

struct LinkSpec {
  double delay_ms = 10.0;
  double jitter_ms = 0.0;
  LossModel loss;
  double bandwidth_mbps = 0.0;
};

enum class Workload { kCbr, kRequestResponse };

struct FlowSpec {
  std::size_t count = 1;
  Workload workload = Workload::kCbr;
  double bitrate_kbps = 80.0;
  std::size_t packet_bytes = 200;
  double on_duration_s = 300.0;
  double off_mean_s = 3300.0;
  // Request/response only.
  std::size_t response_packets = 10;
  double spacing_ms = 5.0;
  double think_min_ms = 0.0;
  double think_mean_ms = 500.0;
  endpoint::Duplication duplication = endpoint::Duplication::kFull;
  std::size_t mark_every = 0;
  double start_offset_ms = 0.0;
  // Start offset added per flow within the group.
  double stagger_ms = 0.0;
  std::optional<LinkSpec> direct;
  std::optional<LinkSpec> dc2_receiver;
  // Cooperative responses delayed by this many direct RTTs.
  double response_delay_rtt = 0.0;

  TimeUs spacing_us() const {
    if (workload == Workload::kRequestResponse) return static_cast<TimeUs>(std::llround(spacing_ms * 1000.0));
    return static_cast<TimeUs>(std::llround(static_cast<double>(packet_bytes) * 8.0 / (bitrate_kbps * 1000.0) * 1e6));
  }
};

struct CodingSpec {
  std::size_t k_max = 6;
  std::size_t num_parity_cross = 2;
  std::size_t num_parity_in = 1;
  std::size_t in_block = 5;
  double cross_flush_ms = 30.0;
  double in_flush_ms = 50.0;
};

struct DetectorSpec {
  endpoint::DetectorKind kind = endpoint::DetectorKind::kTwoState;
  double small_timeout_ms = 25.0;
  double long_timeout_rtt = 1.0;
  double burst_threshold_gaps = 4.0;
  double fixed_timeout_ms = 25.0;
};

struct EgressSpec {
  // Unset: cross flush + sender->DC1 + inter-DC one-way delay.
  std::optional<double> boundary_threshold_ms;
  double store_ttl_rtts = 3.0;
  std::size_t proactive_nacks = 3;
};

struct ReceiverSpec {
  std::size_t cache_capacity = 2048;
  double cache_ttl_rtts = 4.0;
  double coop_hold_rtts = 0.5;
  double confirm_hold_rtts = 0.55;
};

inline const std::vector<std::string>& all_outputs() {
  static const std::vector<std::string> v{"recovery_summary", "episodes", "fec_whatif", "cost", "summary"};
  return v;
}

struct Scenario {
  std::string name;
  std::string description;
  std::string variant;
  double duration_s = 60.0;
  double drain_s = 5.0;
  std::vector<std::uint64_t> seeds{1};
  LinkSpec direct{150.0, 1.0, NoLoss{}, 0.0};
  LinkSpec sender_dc1{5.0, 0.5, BernoulliLoss{1e-5}, 0.0};
  LinkSpec inter_dc{80.0, 0.5, BernoulliLoss{1e-5}, 0.0};
  LinkSpec dc2_receiver{15.0, 0.5, BernoulliLoss{1e-5}, 0.0};
  std::vector<FlowSpec> flows;
  CodingSpec coding;
  DetectorSpec detector;
  EgressSpec egress;
  ReceiverSpec receiver;
  double price_per_gb = 0.087;
  std::vector<std::size_t> fec_parity{1, 2, 5};
  std::vector<std::string> outputs = all_outputs();
  std::vector<std::pair<std::string, YAML::Node>> variants;
  std::string file = "<scenario>";

  bool wants(const std::string& output) const { return std::find(outputs.begin(), outputs.end(), output) != outputs.end(); }
  std::size_t total_flows() const {
    std::size_t n = 0;
    for (const auto& f : flows) n += f.count;
    return n;
  }
};

namespace detail {

class Parser {
 public:
  explicit Parser(std::string file) : file_(std::move(file)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& field, const std::string& msg) const {
    const auto m = at.Mark();
    throw ScenarioError(file_, m.line + 1, m.column + 1, field, msg);
  }

  void require_map(const YAML::Node& n, const std::string& field) const {
    if (!n.IsMap()) fail(n, field, "expected a mapping");
  }

  void allow(const YAML::Node& n, const std::string& field, std::initializer_list<const char*> keys) const {
    require_map(n, field);
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; }))
        fail(kv.first, join(field, key), "unknown key");
    }
  }

  static std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

  template <typename T>
  T scalar(const YAML::Node& n, const std::string& field, const char* what) const {
    if (!n.IsScalar()) fail(n, field, std::string("expected ") + what);
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, field, std::string("expected ") + what);
    }
  }

  double number(const YAML::Node& n, const std::string& field, double lo, double hi, bool lo_open = false) const {
    const double v = scalar<double>(n, field, "a number");
    if (!std::isfinite(v) || v < lo || v > hi || (lo_open && v == lo)) {
      std::ostringstream os;
      os << "value " << v << " outside " << (lo_open ? "(" : "[") << lo << ", " << hi << "]";
      fail(n, field, os.str());
    }
    return v;
  }

  double prob(const YAML::Node& n, const std::string& field) const {
    const double v = scalar<double>(n, field, "a number");
    if (!(v >= 0.0 && v <= 1.0)) {
      std::ostringstream os;
      os << "probability " << v << " outside [0, 1]";
      fail(n, field, os.str());
    }
    return v;
  }

  std::size_t count(const YAML::Node& n, const std::string& field, std::size_t lo, std::size_t hi) const {
    const auto v = scalar<long long>(n, field, "an integer");
    if (v < static_cast<long long>(lo) || v > static_cast<long long>(hi))
      fail(n, field, "value " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<std::size_t>(v);
  }

  std::string text(const YAML::Node& n, const std::string& field) const { return scalar<std::string>(n, field, "a string"); }

  LossModel loss(const YAML::Node& n, const std::string& field) const {
    require_map(n, field);
    if (!n["model"]) fail(n, join(field, "model"), "missing required key");
    const auto model = text(n["model"], join(field, "model"));
    if (model == "none") {
      allow(n, field, {"model"});
      return NoLoss{};
    }
    if (model == "bernoulli") {
      allow(n, field, {"model", "p"});
      BernoulliLoss m;
      if (n["p"]) m.p = prob(n["p"], join(field, "p"));
      return m;
    }
    if (model == "gilbert_elliott") {
      allow(n, field, {"model", "p_good_to_bad", "p_bad_to_good", "loss_good", "loss_bad"});
      GilbertElliottLoss m;
      if (n["p_good_to_bad"]) m.p_good_to_bad = prob(n["p_good_to_bad"], join(field, "p_good_to_bad"));
      if (n["p_bad_to_good"]) m.p_bad_to_good = prob(n["p_bad_to_good"], join(field, "p_bad_to_good"));
      if (n["loss_good"]) m.loss_good = prob(n["loss_good"], join(field, "loss_good"));
      if (n["loss_bad"]) m.loss_bad = prob(n["loss_bad"], join(field, "loss_bad"));
      return m;
    }
    if (model == "google_burst") {
      allow(n, field, {"model", "p_first", "p_cont"});
      GoogleBurstLoss m;
      if (n["p_first"]) m.p_first = prob(n["p_first"], join(field, "p_first"));
      if (n["p_cont"]) m.p_cont = prob(n["p_cont"], join(field, "p_cont"));
      return m;
    }
    if (model == "outage") {
      allow(n, field, {"model", "intervals_s"});
      ScheduledOutage m;
      const auto f = join(field, "intervals_s");
      const auto& iv = n["intervals_s"];
      if (!iv || !iv.IsSequence()) fail(iv ? iv : n, f, "expected a list of [start, end] pairs");
      for (std::size_t i = 0; i < iv.size(); ++i) {
        const auto fi = f + "[" + std::to_string(i) + "]";
        if (!iv[i].IsSequence() || iv[i].size() != 2) fail(iv[i], fi, "expected [start, end]");
        const double a = number(iv[i][0], fi, 0.0, 1e9);
        const double b = number(iv[i][1], fi, 0.0, 1e9);
        if (b <= a) fail(iv[i], fi, "end must exceed start");
        m.intervals.emplace_back(static_cast<TimeUs>(std::llround(a * 1e6)), static_cast<TimeUs>(std::llround(b * 1e6)));
      }
      LossModel lm(m);
      try {
        lm.validate();
      } catch (const std::invalid_argument& e) {
        fail(iv, f, e.what());
      }
      return lm;
    }
    if (model == "composite") {
      allow(n, field, {"model", "parts"});
      CompositeLoss m;
      const auto f = join(field, "parts");
      const auto& parts = n["parts"];
      if (!parts || !parts.IsSequence() || parts.size() == 0) fail(parts ? parts : n, f, "expected a non-empty list");
      for (std::size_t i = 0; i < parts.size(); ++i) m.parts.push_back(loss(parts[i], f + "[" + std::to_string(i) + "]"));
      return m;
    }
    fail(n["model"], join(field, "model"), "unknown loss model '" + model + "'");
  }

  void link(const YAML::Node& n, const std::string& field, LinkSpec& l) const {
    allow(n, field, {"delay_ms", "jitter_ms", "loss", "bandwidth_mbps"});
    if (n["delay_ms"]) l.delay_ms = number(n["delay_ms"], join(field, "delay_ms"), 0.0, 1e6, true);
    if (n["jitter_ms"]) l.jitter_ms = number(n["jitter_ms"], join(field, "jitter_ms"), 0.0, 1e6);
    if (n["loss"]) l.loss = loss(n["loss"], join(field, "loss"));
    if (n["bandwidth_mbps"]) l.bandwidth_mbps = number(n["bandwidth_mbps"], join(field, "bandwidth_mbps"), 0.0, 1e6);
    if (l.jitter_ms >= l.delay_ms) fail(n, join(field, "jitter_ms"), "jitter must be smaller than delay_ms");
  }

  void flow(const YAML::Node& n, const std::string& field, FlowSpec& f) const {
    allow(n, field,
          {"count", "workload", "bitrate_kbps", "packet_bytes", "on_duration_s", "off_mean_s", "response_packets", "spacing_ms",
           "think_min_ms", "think_mean_ms", "duplication", "mark_every", "start_offset_ms", "stagger_ms", "direct",
           "dc2_receiver", "response_delay_rtt"});
    if (n["count"]) f.count = count(n["count"], join(field, "count"), 1, 10000);
    if (n["workload"]) {
      const auto w = text(n["workload"], join(field, "workload"));
      if (w == "cbr") f.workload = Workload::kCbr;
      else if (w == "request_response") f.workload = Workload::kRequestResponse;
      else fail(n["workload"], join(field, "workload"), "expected cbr or request_response");
    }
    if (n["bitrate_kbps"]) f.bitrate_kbps = number(n["bitrate_kbps"], join(field, "bitrate_kbps"), 0.0, 1e7, true);
    if (n["packet_bytes"]) f.packet_bytes = count(n["packet_bytes"], join(field, "packet_bytes"), 1, kMaxPayload);
    if (n["on_duration_s"]) f.on_duration_s = number(n["on_duration_s"], join(field, "on_duration_s"), 0.0, 1e9, true);
    if (n["off_mean_s"]) f.off_mean_s = number(n["off_mean_s"], join(field, "off_mean_s"), 0.0, 1e9);
    if (n["response_packets"]) f.response_packets = count(n["response_packets"], join(field, "response_packets"), 1, 1000000);
    if (n["spacing_ms"]) f.spacing_ms = number(n["spacing_ms"], join(field, "spacing_ms"), 0.0, 1e6, true);
    if (n["think_min_ms"]) f.think_min_ms = number(n["think_min_ms"], join(field, "think_min_ms"), 0.0, 1e9);
    if (n["think_mean_ms"]) f.think_mean_ms = number(n["think_mean_ms"], join(field, "think_mean_ms"), 0.0, 1e9);
    if (n["duplication"]) {
      const auto d = text(n["duplication"], join(field, "duplication"));
      if (d == "full") f.duplication = endpoint::Duplication::kFull;
      else if (d == "first_packet") f.duplication = endpoint::Duplication::kFirstPacket;
      else if (d == "marked") f.duplication = endpoint::Duplication::kMarked;
      else fail(n["duplication"], join(field, "duplication"), "expected full, first_packet or marked");
    }
    if (n["mark_every"]) f.mark_every = count(n["mark_every"], join(field, "mark_every"), 1, 1000000);
    if (f.duplication == endpoint::Duplication::kMarked && f.mark_every == 0)
      fail(n, join(field, "mark_every"), "required when duplication is marked");
    if (n["start_offset_ms"]) f.start_offset_ms = number(n["start_offset_ms"], join(field, "start_offset_ms"), 0.0, 1e9);
    if (n["stagger_ms"]) f.stagger_ms = number(n["stagger_ms"], join(field, "stagger_ms"), 0.0, 1e9);
    if (n["response_delay_rtt"]) f.response_delay_rtt = number(n["response_delay_rtt"], join(field, "response_delay_rtt"), 0.0, 1e6);
    if (f.spacing_us() <= 0) fail(n, join(field, "bitrate_kbps"), "packet interval rounds to zero");
    if (f.workload == Workload::kCbr && static_cast<double>(f.spacing_us()) > f.on_duration_s * 1e6)
      fail(n, join(field, "on_duration_s"), "shorter than one packet interval");
  }

  // Applies every key present in `n` onto `s`; absent keys keep their values.
  void apply(const YAML::Node& n, Scenario& s, bool top_level) const {
    if (top_level) {
      allow(n, "", {"name", "description", "duration_s", "drain_s", "seeds", "topology", "flows", "coding", "detector",
                    "egress", "receiver", "cost", "fec_whatif", "outputs", "variants"});
    } else {
      allow(n, "variants." + s.variant,
            {"description", "duration_s", "drain_s", "seeds", "topology", "flows", "coding", "detector", "egress",
             "receiver", "cost", "fec_whatif", "outputs"});
    }
    if (n["name"]) {
      s.name = text(n["name"], "name");
      if (!std::regex_match(s.name, std::regex("[A-Za-z0-9_.-]+"))) fail(n["name"], "name", "use letters, digits, '_', '-', '.'");
    }
    if (n["description"]) s.description = text(n["description"], "description");
    if (n["duration_s"]) s.duration_s = number(n["duration_s"], "duration_s", 0.0, 1e6, true);
    if (n["drain_s"]) s.drain_s = number(n["drain_s"], "drain_s", 0.0, 1e6);
    if (n["seeds"]) {
      const auto& sn = n["seeds"];
      if (!sn.IsSequence() || sn.size() == 0) fail(sn, "seeds", "expected a non-empty list of integers");
      s.seeds.clear();
      for (std::size_t i = 0; i < sn.size(); ++i)
        s.seeds.push_back(scalar<std::uint64_t>(sn[i], "seeds[" + std::to_string(i) + "]", "a non-negative integer"));
    }
    if (const auto& t = n["topology"]) {
      allow(t, "topology", {"direct", "sender_dc1", "inter_dc", "dc2_receiver"});
      if (t["direct"]) link(t["direct"], "topology.direct", s.direct);
      if (t["sender_dc1"]) link(t["sender_dc1"], "topology.sender_dc1", s.sender_dc1);
      if (t["inter_dc"]) link(t["inter_dc"], "topology.inter_dc", s.inter_dc);
      if (t["dc2_receiver"]) link(t["dc2_receiver"], "topology.dc2_receiver", s.dc2_receiver);
    }
    if (const auto& fl = n["flows"]) {
      if (!fl.IsSequence() || fl.size() == 0) fail(fl, "flows", "expected a non-empty list");
      s.flows.clear();
      for (std::size_t i = 0; i < fl.size(); ++i) {
        const auto field = "flows[" + std::to_string(i) + "]";
        FlowSpec f;
        flow(fl[i], field, f);
        if (fl[i]["direct"]) {
          LinkSpec l = s.direct;
          link(fl[i]["direct"], field + ".direct", l);
          f.direct = l;
        }
        if (fl[i]["dc2_receiver"]) {
          LinkSpec l = s.dc2_receiver;
          link(fl[i]["dc2_receiver"], field + ".dc2_receiver", l);
          f.dc2_receiver = l;
        }
        s.flows.push_back(f);
      }
    }
    if (const auto& c = n["coding"]) {
      allow(c, "coding", {"k_max", "num_parity_cross", "num_parity_in", "in_block", "cross_flush_ms", "in_flush_ms"});
      if (c["k_max"]) s.coding.k_max = count(c["k_max"], "coding.k_max", 1, 254);
      if (c["num_parity_cross"]) s.coding.num_parity_cross = count(c["num_parity_cross"], "coding.num_parity_cross", 1, 254);
      if (c["num_parity_in"]) s.coding.num_parity_in = count(c["num_parity_in"], "coding.num_parity_in", 1, 254);
      if (c["in_block"]) s.coding.in_block = count(c["in_block"], "coding.in_block", 0, 254);
      if (c["cross_flush_ms"]) s.coding.cross_flush_ms = number(c["cross_flush_ms"], "coding.cross_flush_ms", 0.0, 1e6, true);
      if (c["in_flush_ms"]) s.coding.in_flush_ms = number(c["in_flush_ms"], "coding.in_flush_ms", 0.0, 1e6, true);
      if (s.coding.k_max + s.coding.num_parity_cross > 256) fail(c, "coding.num_parity_cross", "k_max + num_parity_cross exceeds 256");
      if (s.coding.in_block == 1) fail(c["in_block"], "coding.in_block", "must be 0 (off) or at least 2");
    }
    if (const auto& d = n["detector"]) {
      allow(d, "detector", {"kind", "small_timeout_ms", "long_timeout_rtt", "burst_threshold_gaps", "fixed_timeout_ms"});
      if (d["kind"]) {
        const auto k = text(d["kind"], "detector.kind");
        if (k == "two_state") s.detector.kind = endpoint::DetectorKind::kTwoState;
        else if (k == "fixed") s.detector.kind = endpoint::DetectorKind::kFixed;
        else fail(d["kind"], "detector.kind", "expected two_state or fixed");
      }
      if (d["small_timeout_ms"]) s.detector.small_timeout_ms = number(d["small_timeout_ms"], "detector.small_timeout_ms", 0.0, 1e6, true);
      if (d["long_timeout_rtt"]) s.detector.long_timeout_rtt = number(d["long_timeout_rtt"], "detector.long_timeout_rtt", 0.0, 1e3, true);
      if (d["burst_threshold_gaps"])
        s.detector.burst_threshold_gaps = number(d["burst_threshold_gaps"], "detector.burst_threshold_gaps", 0.0, 1e3, true);
      if (d["fixed_timeout_ms"]) s.detector.fixed_timeout_ms = number(d["fixed_timeout_ms"], "detector.fixed_timeout_ms", 0.0, 1e6, true);
    }
    if (const auto& e = n["egress"]) {
      allow(e, "egress", {"boundary_threshold_ms", "store_ttl_rtts", "proactive_nacks"});
      if (e["boundary_threshold_ms"]) s.egress.boundary_threshold_ms = number(e["boundary_threshold_ms"], "egress.boundary_threshold_ms", 0.0, 1e6);
      if (e["store_ttl_rtts"]) s.egress.store_ttl_rtts = number(e["store_ttl_rtts"], "egress.store_ttl_rtts", 0.0, 1e3, true);
      if (e["proactive_nacks"]) s.egress.proactive_nacks = count(e["proactive_nacks"], "egress.proactive_nacks", 1, 1000);
    }
    if (const auto& r = n["receiver"]) {
      allow(r, "receiver", {"cache_capacity", "cache_ttl_rtts", "coop_hold_rtts", "confirm_hold_rtts"});
      if (r["cache_capacity"]) s.receiver.cache_capacity = count(r["cache_capacity"], "receiver.cache_capacity", 0, 100000000);
      if (r["cache_ttl_rtts"]) s.receiver.cache_ttl_rtts = number(r["cache_ttl_rtts"], "receiver.cache_ttl_rtts", 0.0, 1e3, true);
      if (r["coop_hold_rtts"]) s.receiver.coop_hold_rtts = number(r["coop_hold_rtts"], "receiver.coop_hold_rtts", 0.0, 1e3);
      if (r["confirm_hold_rtts"]) s.receiver.confirm_hold_rtts = number(r["confirm_hold_rtts"], "receiver.confirm_hold_rtts", 0.0, 1e3);
    }
    if (const auto& c = n["cost"]) {
      allow(c, "cost", {"price_per_gb"});
      if (c["price_per_gb"]) s.price_per_gb = number(c["price_per_gb"], "cost.price_per_gb", 0.0, 1e6);
    }
    if (const auto& fw = n["fec_whatif"]) {
      allow(fw, "fec_whatif", {"parity"});
      if (const auto& p = fw["parity"]) {
        if (!p.IsSequence() || p.size() == 0) fail(p, "fec_whatif.parity", "expected a non-empty list");
        s.fec_parity.clear();
        for (std::size_t i = 0; i < p.size(); ++i) s.fec_parity.push_back(count(p[i], "fec_whatif.parity[" + std::to_string(i) + "]", 1, 5));
      }
    }
    if (const auto& o = n["outputs"]) {
      if (!o.IsSequence()) fail(o, "outputs", "expected a list");
      s.outputs.clear();
      for (std::size_t i = 0; i < o.size(); ++i) {
        const auto name = text(o[i], "outputs[" + std::to_string(i) + "]");
        const auto& all = all_outputs();
        if (std::find(all.begin(), all.end(), name) == all.end()) fail(o[i], "outputs[" + std::to_string(i) + "]", "unknown output '" + name + "'");
        s.outputs.push_back(name);
      }
    }
    if (top_level) {
      if (const auto& v = n["variants"]) {
        require_map(v, "variants");
        s.variants.clear();
        for (const auto& kv : v) {
          const auto name = kv.first.as<std::string>();
          if (!std::regex_match(name, std::regex("[A-Za-z0-9_.-]+"))) fail(kv.first, "variants." + name, "use letters, digits, '_', '-', '.'");
          s.variants.emplace_back(name, kv.second);
        }
      }
    }
  }

  void check(const YAML::Node& root, const Scenario& s) const {
    if (s.name.empty()) fail(root, "name", "missing required key");
    if (s.flows.empty()) fail(root, "flows", "missing required key");
    for (std::size_t i = 0; i < s.flows.size(); ++i) {
      const auto& f = s.flows[i];
      if (f.response_delay_rtt > 0.0 && f.count != 1)
        fail(root["flows"] && root["flows"].IsSequence() && i < root["flows"].size() ? root["flows"][i] : root, "flows[" + std::to_string(i) + "].response_delay_rtt", "straggler groups must have count 1");
    }
  }

 private:
  std::string file_;
};

}  // namespace detail

// Parses and validates a scenario; variants are kept unexpanded.
inline Scenario parse_scenario(const std::string& text, const std::string& file = "<scenario>") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ScenarioError(file, e.mark.line + 1, e.mark.column + 1, "<yaml>", e.msg);
  }
  detail::Parser p(file);
  if (!root || root.IsNull()) throw ScenarioError(file, 1, 1, "<root>", "empty scenario");
  Scenario s;
  s.file = file;
  p.apply(root, s, true);
  p.check(root, s);
  // Variants must also validate up front.
  for (const auto& [name, node] : s.variants) {
    Scenario v = s;
    v.variant = name;
    p.apply(node, v, false);
    p.check(root, v);
  }
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path, 0, 0, "<file>", "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

// One scenario per variant, or the base scenario when there are none.
inline std::vector<Scenario> expand_variants(const Scenario& base) {
  if (base.variants.empty()) return {base};
  std::vector<Scenario> out;
  detail::Parser p(base.file);
  for (const auto& [name, node] : base.variants) {
    Scenario v = base;
    v.variant = name;
    v.variants.clear();
    p.apply(node, v, false);
    out.push_back(std::move(v));
  }
  return out;
}

// The same scenario with every loss process removed.
inline Scenario strip_losses(Scenario s) {
  s.direct.loss = NoLoss{};
  s.sender_dc1.loss = NoLoss{};
  s.inter_dc.loss = NoLoss{};
  s.dc2_receiver.loss = NoLoss{};
  for (auto& f : s.flows) {
    if (f.direct) f.direct->loss = NoLoss{};
    if (f.dc2_receiver) f.dc2_receiver->loss = NoLoss{};
  }
  return s;
}

}  // namespace cloudrec::scenario

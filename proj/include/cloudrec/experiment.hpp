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

// Runs a scenario: builds the topology, drives the simulation per seed and
// collects ground truth plus counters for the metrics.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "cloudrec/egress.hpp"
#include "cloudrec/endpoint.hpp"
#include "cloudrec/ingress.hpp"
#include "cloudrec/metrics.hpp"
#include "cloudrec/netsim.hpp"
#include "cloudrec/scenario.hpp"
#include "cloudrec/wire.hpp"

namespace cloudrec::experiment {

class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FlowResult {
  FlowId flow = 0;
  TimeUs rtt = 0;
  std::vector<metrics::PacketFate> fates;
  std::vector<metrics::Interval> outages;
  endpoint::ReceiverStats receiver;
  std::uint64_t bursts = 0;
  std::uint64_t duplicated = 0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  bool lossless = false;
  std::vector<FlowResult> flows;
  metrics::RecoverySummary summary;
  metrics::EpisodeHistogram episodes;
  std::vector<metrics::FecWhatIf> fec;
  metrics::CostInputs cost;
  egress::EgressStats egress;
  ingress::IngressStats ingress;
  std::uint64_t timer_nacks = 0;
  std::uint64_t gap_nacks = 0;
  std::uint64_t acks = 0;
  std::uint64_t in_stream_decoded = 0;
};

namespace detail {

inline TimeUs ms(double v) { return static_cast<TimeUs>(std::llround(v * 1000.0)); }

inline netsim::LinkConfig link_config(const std::string& name, NodeId from, NodeId to, const scenario::LinkSpec& l) {
  netsim::LinkConfig c;
  c.name = name;
  c.from = from;
  c.to = to;
  c.delay = ms(l.delay_ms);
  c.jitter = ms(l.jitter_ms);
  c.loss = l.loss;
  c.bandwidth_bps = l.bandwidth_mbps * 1e6;
  return c;
}

inline void collect_outages(const LossModel& m, std::vector<metrics::Interval>& out) {
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ScheduledOutage>) {
          out.insert(out.end(), v.intervals.begin(), v.intervals.end());
        } else if constexpr (std::is_same_v<T, CompositeLoss>) {
          for (const auto& p : v.parts) collect_outages(p, out);
        }
      },
      m.variant());
}

// Schedules at most one wake event per distinct time.
class Waker {
 public:
  template <typename Fn>
  void ensure(netsim::Simulator& sim, TimeUs at, Fn fn) {
    if (!pending_.insert(at).second) return;
    sim.schedule(at, [this, at, fn]() {
      pending_.erase(at);
      fn();
    });
  }

 private:
  std::set<TimeUs> pending_;
};

constexpr TimeUs kEgressTick = 10 * kUsPerMs;

}  // namespace detail

inline SeedResult run_seed(const scenario::Scenario& sc, std::uint64_t seed, std::ostream* trace = nullptr) {
  using detail::ms;
  netsim::Simulator sim(seed);
  if (trace != nullptr) sim.set_trace(trace);

  const NodeId dc1 = sim.add_node("dc1");
  const NodeId dc2 = sim.add_node("dc2");
  const auto inter_dc = sim.add_link(detail::link_config("dc1->dc2", dc1, dc2, sc.inter_dc));

  ingress::IngressConfig icfg;
  icfg.k_max = sc.coding.k_max;
  icfg.num_parity_cross = sc.coding.num_parity_cross;
  icfg.num_parity_in = sc.coding.num_parity_in;
  icfg.in_block = sc.coding.in_block;
  icfg.cross_flush = ms(sc.coding.cross_flush_ms);
  icfg.in_flush = ms(sc.coding.in_flush_ms);
  ingress::Ingress ing(icfg);

  egress::EgressConfig ecfg;
  ecfg.boundary_threshold = ms(sc.egress.boundary_threshold_ms.value_or(sc.coding.cross_flush_ms + sc.sender_dc1.delay_ms + sc.inter_dc.delay_ms));
  ecfg.store_ttl_rtts = sc.egress.store_ttl_rtts;
  ecfg.proactive_nacks = sc.egress.proactive_nacks;
  egress::Egress egr(ecfg);

  struct FlowRt {
    FlowId flow = 0;
    NodeId sender = 0;
    NodeId receiver = 0;
    netsim::LinkId direct = 0;
    netsim::LinkId to_dc1 = 0;
    netsim::LinkId from_dc2 = 0;
    netsim::LinkId to_dc2 = 0;
    TimeUs one_way = 0;
    TimeUs rtt = 0;
    std::size_t packet_bytes = 0;
    std::unique_ptr<endpoint::Sender> sender_ep;
    std::unique_ptr<endpoint::Receiver> receiver_ep;
    std::vector<metrics::PacketFate> fates;
    std::uint64_t duplicated = 0;
  };
  std::vector<std::unique_ptr<FlowRt>> flows;
  std::map<NodeId, FlowRt*> by_receiver;
  std::map<NodeId, FlowRt*> by_sender;

  bool lossless = sc.inter_dc.loss.is_lossless() && sc.sender_dc1.loss.is_lossless() && sc.dc2_receiver.loss.is_lossless();
  FlowId next_flow = 1;
  for (const auto& spec : sc.flows) {
    const auto direct_spec = spec.direct.value_or(sc.direct);
    const auto dc2r_spec = spec.dc2_receiver.value_or(sc.dc2_receiver);
    lossless = lossless && direct_spec.loss.is_lossless() && dc2r_spec.loss.is_lossless();
    for (std::size_t i = 0; i < spec.count; ++i) {
      auto f = std::make_unique<FlowRt>();
      f->flow = next_flow++;
      const auto tag = std::to_string(f->flow);
      f->sender = sim.add_node("s" + tag);
      f->receiver = sim.add_node("r" + tag);
      f->direct = sim.add_link(detail::link_config("s" + tag + "->r" + tag, f->sender, f->receiver, direct_spec));
      f->to_dc1 = sim.add_link(detail::link_config("s" + tag + "->dc1", f->sender, dc1, sc.sender_dc1));
      f->from_dc2 = sim.add_link(detail::link_config("dc2->r" + tag, dc2, f->receiver, dc2r_spec));
      f->to_dc2 = sim.add_link(detail::link_config("r" + tag + "->dc2", f->receiver, dc2, dc2r_spec));
      f->one_way = ms(direct_spec.delay_ms);
      f->rtt = 2 * f->one_way;
      f->packet_bytes = spec.packet_bytes;

      endpoint::SenderConfig scfg;
      scfg.flow = f->flow;
      scfg.packet_bytes = spec.packet_bytes;
      scfg.spacing = spec.spacing_us();
      if (spec.workload == scenario::Workload::kCbr) {
        scfg.burst_packets = std::max<std::size_t>(1, static_cast<std::size_t>(spec.on_duration_s * 1e6 / static_cast<double>(scfg.spacing)));
        scfg.gap_min = 0;
        scfg.gap_mean = ms(spec.off_mean_s * 1000.0);
      } else {
        scfg.burst_packets = spec.response_packets;
        scfg.gap_min = ms(spec.think_min_ms);
        scfg.gap_mean = ms(spec.think_mean_ms);
      }
      scfg.start_offset = ms(spec.start_offset_ms + spec.stagger_ms * static_cast<double>(i));
      scfg.duplication = spec.duplication;
      scfg.mark_every = spec.mark_every;
      f->sender_ep = std::make_unique<endpoint::Sender>(scfg, Rng(seed, "workload/" + tag));

      endpoint::ReceiverConfig rcfg;
      rcfg.flow = f->flow;
      rcfg.rtt = f->rtt;
      rcfg.detector.kind = sc.detector.kind;
      rcfg.detector.small_timeout = ms(sc.detector.small_timeout_ms);
      rcfg.detector.long_timeout = static_cast<TimeUs>(sc.detector.long_timeout_rtt * static_cast<double>(f->rtt));
      rcfg.detector.burst_threshold = static_cast<TimeUs>(sc.detector.burst_threshold_gaps * static_cast<double>(scfg.spacing));
      rcfg.detector.fixed_timeout = ms(sc.detector.fixed_timeout_ms);
      rcfg.cache_capacity = sc.receiver.cache_capacity;
      rcfg.cache_ttl = static_cast<TimeUs>(sc.receiver.cache_ttl_rtts * static_cast<double>(f->rtt));
      rcfg.response_delay = static_cast<TimeUs>(spec.response_delay_rtt * static_cast<double>(f->rtt));
      rcfg.coop_hold = static_cast<TimeUs>(sc.receiver.coop_hold_rtts * static_cast<double>(f->rtt));
      rcfg.confirm_hold = static_cast<TimeUs>(sc.receiver.confirm_hold_rtts * static_cast<double>(f->rtt));
      FlowRt* raw = f.get();
      rcfg.expected_arrival = [raw](Seq s) { return raw->fates.at(s - 1).send_ts + raw->one_way; };
      rcfg.payload_check = [raw](Seq s, const std::vector<std::uint8_t>& p) {
        return p == endpoint::payload_for(raw->flow, s, raw->packet_bytes);
      };
      f->receiver_ep = std::make_unique<endpoint::Receiver>(std::move(rcfg));

      ing.assign_group(f->flow, dc2);
      egr.register_flow(f->flow, f->receiver, f->rtt);
      by_receiver[f->receiver] = raw;
      by_sender[f->sender] = raw;
      flows.push_back(std::move(f));
    }
  }

  const TimeUs send_end = ms(sc.duration_s * 1000.0);
  const TimeUs run_end = send_end + ms(sc.drain_s * 1000.0);
  bool stopping = false;
  detail::Waker dc1_waker;
  std::map<NodeId, detail::Waker> rx_wakers;

  auto decode = [](const netsim::Datagram& d) {
    wire::Message m;
    const auto err = wire::deserialize(d.bytes, m);
    if (err != wire::WireErrc::kOk) throw InvariantViolation(std::string("undecodable datagram: ") + std::string(wire::to_string(err)));
    return m;
  };

  // DC1: encode duplicated packets, flush on timers.
  std::function<void()> dc1_timer;
  auto dc1_schedule = [&]() {
    if (auto d = ing.next_deadline()) dc1_waker.ensure(sim, *d, [&]() { dc1_timer(); });
  };
  dc1_timer = [&]() {
    if (stopping) return;
    for (auto& e : ing.expire(sim.now())) sim.send(inter_dc, e.msg);
    dc1_schedule();
  };
  sim.set_handler(dc1, [&](const netsim::Datagram& d) {
    if (stopping) return;
    const auto m = decode(d);
    if (m.type != wire::PacketType::kData) return;
    for (auto& e : ing.process_packet(codec::make_source(m.flow_id, m.seq, m.payload), sim.now())) sim.send(inter_dc, e.msg);
    dc1_schedule();
  });

  // DC2: recovery engine.
  sim.set_handler(dc2, [&](const netsim::Datagram& d) {
    if (stopping) return;
    const auto m = decode(d);
    for (auto& o : egr.handle(d.from, m, sim.now())) sim.send(by_receiver.at(o.to)->from_dc2, o.msg);
  });
  std::function<void()> dc2_tick = [&]() {
    if (stopping) return;
    egr.tick(sim.now());
    if (sim.now() + detail::kEgressTick <= run_end) sim.schedule(sim.now() + detail::kEgressTick, dc2_tick);
  };
  sim.schedule(detail::kEgressTick, dc2_tick);

  // Timer callbacks refer to themselves; they are owned here.
  std::vector<std::unique_ptr<std::function<void()>>> timers;

  // Receivers.
  for (auto& fp : flows) {
    FlowRt* f = fp.get();
    auto emit = [&sim, f, &stopping](std::vector<endpoint::OutMessage> outs) {
      for (auto& o : outs) {
        if (o.delay <= 0) {
          sim.send(f->to_dc2, o.msg);
        } else {
          sim.schedule(sim.now() + o.delay, [&sim, f, &stopping, msg = std::move(o.msg)]() {
            if (!stopping) sim.send(f->to_dc2, msg);
          });
        }
      }
    };
    auto* rx_timer = timers.emplace_back(std::make_unique<std::function<void()>>()).get();
    auto rx_schedule = [&sim, &rx_wakers, f, rx_timer]() {
      if (auto d = f->receiver_ep->next_deadline()) rx_wakers[f->receiver].ensure(sim, *d, [rx_timer]() { (*rx_timer)(); });
    };
    *rx_timer = [&sim, &stopping, f, emit, rx_schedule]() {
      if (stopping) return;
      emit(f->receiver_ep->receiver_on_tick(sim.now()));
      rx_schedule();
    };
    sim.set_handler(f->receiver, [&sim, &stopping, f, dc2, emit, rx_schedule, &decode](const netsim::Datagram& d) {
      if (stopping) return;
      const auto m = decode(d);
      emit(f->receiver_ep->handle(m, d.from == dc2, sim.now()));
      rx_schedule();
    });
  }

  // Senders.
  for (auto& fp : flows) {
    FlowRt* f = fp.get();
    auto* tick = timers.emplace_back(std::make_unique<std::function<void()>>()).get();
    *tick = [&sim, f, tick, send_end]() {
      for (auto& p : f->sender_ep->sender_tick(sim.now())) {
        const auto r = sim.send(f->direct, p.msg);
        if (p.msg.seq != f->fates.size() + 1) throw InvariantViolation("sender sequence numbers not contiguous");
        f->fates.push_back({p.msg.seq, static_cast<TimeUs>(p.msg.send_ts_us), r.dropped, -1});
        if (p.to_dc1) {
          sim.send(f->to_dc1, p.msg);
          f->duplicated++;
        }
      }
      const auto next = f->sender_ep->next_send_time();
      if (next < send_end) sim.schedule(next, [tick]() { (*tick)(); });
    };
    const auto first = f->sender_ep->next_send_time();
    if (first < send_end) sim.schedule(first, [tick]() { (*tick)(); });
  }

  sim.run_until(run_end);
  stopping = true;
  sim.run();

  // Invariants and results.
  SeedResult res;
  res.seed = seed;
  res.lossless = lossless;
  std::uint64_t nacks = 0;
  for (auto& fp : flows) {
    FlowRt& f = *fp;
    const auto& rs = f.receiver_ep->stats();
    if (rs.corrupt != 0) throw InvariantViolation("flow " + std::to_string(f.flow) + ": delivered payload differs from the sent payload");
    std::set<Seq> seen;
    for (const auto& d : f.receiver_ep->deliveries()) {
      if (!seen.insert(d.seq).second) throw InvariantViolation("flow " + std::to_string(f.flow) + ": duplicate delivery");
      if (d.seq == 0 || d.seq > f.fates.size()) throw InvariantViolation("flow " + std::to_string(f.flow) + ": delivery of unsent seq");
      if (d.via == endpoint::Via::kDirect) {
        if (f.fates[d.seq - 1].lost) throw InvariantViolation("flow " + std::to_string(f.flow) + ": dropped packet delivered directly");
        continue;
      }
      if (d.recovery_time < 0) throw InvariantViolation("flow " + std::to_string(f.flow) + ": negative recovery time");
      if (f.fates[d.seq - 1].lost) f.fates[d.seq - 1].recovery_time = d.recovery_time;
    }

    FlowResult fr;
    fr.flow = f.flow;
    fr.rtt = f.rtt;
    fr.receiver = rs;
    fr.bursts = f.sender_ep->bursts_started();
    fr.duplicated = f.duplicated;
    detail::collect_outages(sim.link_config(f.direct).loss, fr.outages);
    fr.fates = std::move(f.fates);

    res.summary.add_trace(fr.fates, fr.rtt);
    std::vector<bool> lost(fr.fates.size());
    for (std::size_t i = 0; i < fr.fates.size(); ++i) lost[i] = fr.fates[i].lost;
    for (const auto& ep : metrics::classify_episodes(fr.flow, lost)) res.episodes.add(ep);
    for (std::size_t k = 0; k < sc.fec_parity.size(); ++k) {
      const auto w = metrics::fec_whatif(fr.fates, sc.fec_parity[k], fr.rtt, fr.outages);
      if (res.fec.size() <= k) res.fec.push_back(w);
      else {
        res.fec[k].all.merge(w.all);
        res.fec[k].outage.merge(w.outage);
      }
    }
    nacks += rs.nacks_sent;
    res.timer_nacks += rs.timer_nacks;
    res.gap_nacks += rs.gap_nacks;
    res.acks += rs.acks_sent;
    res.in_stream_decoded += rs.in_stream_decoded;

    const auto& ds = sim.link_stats(f.direct);
    res.cost.data_bytes += ds.sent_bytes_by_type[static_cast<std::size_t>(wire::PacketType::kData)];
    res.cost.data_payload_bytes += ds.payload_bytes_by_type[static_cast<std::size_t>(wire::PacketType::kData)];
    const auto& back = sim.link_stats(f.from_dc2);
    for (auto t : {wire::PacketType::kData, wire::PacketType::kInCoded, wire::PacketType::kCoopReq})
      res.cost.dc2_recovery_bytes += back.sent_bytes_by_type[static_cast<std::size_t>(t)];
    res.cost.dc2_control_bytes += back.sent_bytes_by_type[static_cast<std::size_t>(wire::PacketType::kCtrl)];
    res.flows.push_back(std::move(fr));
  }
  for (netsim::LinkId l = 0; l < sim.num_links(); ++l) {
    const auto& ls = sim.link_stats(l);
    if (ls.delivered_bytes + ls.dropped_bytes != ls.sent_bytes)
      throw InvariantViolation("link " + sim.link_config(l).name + ": byte conservation violated");
  }
  const auto& ids = sim.link_stats(inter_dc);
  res.cost.inter_dc_coded_payload = ids.payload_bytes_by_type[static_cast<std::size_t>(wire::PacketType::kInCoded)] +
                                    ids.payload_bytes_by_type[static_cast<std::size_t>(wire::PacketType::kCrossCoded)];
  res.cost.dc1_ingress = sim.node_stats(dc1).ingress_bytes;
  res.cost.dc1_egress = sim.node_stats(dc1).egress_bytes;
  res.cost.dc2_ingress = sim.node_stats(dc2).ingress_bytes;
  res.cost.dc2_egress = sim.node_stats(dc2).egress_bytes;
  res.cost.price_per_gb = sc.price_per_gb;

  res.egress = egr.stats();
  res.ingress = ing.stats();
  res.summary.nack_count = nacks;
  res.summary.failed_silent_count = res.egress.failed_silent;
  res.summary.eviction_count = res.ingress.evictions;

  if (res.summary.recovered_within_rtt > res.summary.lost_on_direct) throw InvariantViolation("recovered more packets than were lost");
  if (res.episodes.total_lost() != res.summary.lost_on_direct) throw InvariantViolation("episodes do not partition the losses");
  if (lossless && res.cost.dc2_recovery_bytes != 0)
    throw InvariantViolation("lossless run sent " + std::to_string(res.cost.dc2_recovery_bytes) + " recovery bytes from DC2 to receivers");
  return res;
}

struct RunResult {
  scenario::Scenario scenario;
  std::vector<SeedResult> seeds;
};

inline RunResult run_scenario(const scenario::Scenario& sc, std::ostream* trace = nullptr) {
  RunResult r;
  r.scenario = sc;
  for (auto seed : sc.seeds) r.seeds.push_back(run_seed(sc, seed, trace));
  return r;
}

}  // namespace cloudrec::experiment

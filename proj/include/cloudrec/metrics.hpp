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

// Evaluation quantities computed from run logs.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cloudrec/types.hpp"

namespace cloudrec::metrics {

// ---------------------------------------------------------------------------
// Loss episodes

enum class EpisodeClass { kRandom, kMulti, kOutage };

inline const char* to_string(EpisodeClass c) {
  switch (c) {
    case EpisodeClass::kRandom: return "random";
    case EpisodeClass::kMulti: return "multi";
    case EpisodeClass::kOutage: return "outage";
  }
  return "?";
}

constexpr std::size_t kMultiMax = 14;

inline EpisodeClass classify_length(std::size_t n) {
  if (n == 0) throw std::invalid_argument("classify_length: empty episode");
  if (n == 1) return EpisodeClass::kRandom;
  return n <= kMultiMax ? EpisodeClass::kMulti : EpisodeClass::kOutage;
}

struct EpisodeRecord {
  FlowId flow_id = 0;
  Seq start_seq = 0;
  std::size_t burst_len = 0;
  EpisodeClass cls = EpisodeClass::kRandom;
  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

// lost[i] describes seq first_seq + i.
inline std::vector<EpisodeRecord> classify_episodes(FlowId flow, const std::vector<bool>& lost, Seq first_seq = 1) {
  std::vector<EpisodeRecord> out;
  std::size_t i = 0;
  while (i < lost.size()) {
    if (!lost[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < lost.size() && lost[j]) ++j;
    out.push_back({flow, first_seq + i, j - i, classify_length(j - i)});
    i = j;
  }
  return out;
}

struct EpisodeHistogram {
  std::size_t episodes[3] = {0, 0, 0};
  std::size_t lost[3] = {0, 0, 0};

  void add(const EpisodeRecord& e) {
    const auto c = static_cast<std::size_t>(e.cls);
    episodes[c]++;
    lost[c] += e.burst_len;
  }
  void merge(const EpisodeHistogram& o) {
    for (int c = 0; c < 3; ++c) {
      episodes[c] += o.episodes[c];
      lost[c] += o.lost[c];
    }
  }
  std::size_t total_lost() const { return lost[0] + lost[1] + lost[2]; }
};

// ---------------------------------------------------------------------------
// Per-packet ground truth

struct PacketFate {
  Seq seq = 0;
  TimeUs send_ts = 0;
  bool lost = false;
  // Delivery minus expected direct arrival; negative when never recovered.
  TimeUs recovery_time = -1;
};

inline bool recovered_within(const PacketFate& p, TimeUs deadline) {
  return p.lost && p.recovery_time >= 0 && p.recovery_time <= deadline;
}

// Linear interpolation between closest ranks.
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

inline double fraction_at_most(const std::vector<double>& v, double x) {
  if (v.empty()) return 1.0;
  const auto n = std::count_if(v.begin(), v.end(), [&](double d) { return d <= x; });
  return static_cast<double>(n) / static_cast<double>(v.size());
}

inline double ratio_or_one(std::size_t num, std::size_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

// ---------------------------------------------------------------------------
// Recovery summary

struct RecoverySummary {
  std::size_t packets = 0;
  std::size_t lost_on_direct = 0;
  std::size_t recovered = 0;
  std::size_t recovered_within_rtt = 0;
  // recovery_time / direct RTT for every recovered lost packet.
  std::vector<double> ratios;
  std::uint64_t nack_count = 0;
  std::uint64_t failed_silent_count = 0;
  std::uint64_t eviction_count = 0;

  double recovery_rate() const { return ratio_or_one(recovered_within_rtt, lost_on_direct); }

  void add_trace(std::span<const PacketFate> trace, TimeUs rtt) {
    for (const auto& p : trace) {
      packets++;
      if (!p.lost) continue;
      lost_on_direct++;
      if (p.recovery_time < 0) continue;
      recovered++;
      ratios.push_back(static_cast<double>(p.recovery_time) / static_cast<double>(rtt));
      if (p.recovery_time <= rtt) recovered_within_rtt++;
    }
  }

  void merge(const RecoverySummary& o) {
    packets += o.packets;
    lost_on_direct += o.lost_on_direct;
    recovered += o.recovered;
    recovered_within_rtt += o.recovered_within_rtt;
    ratios.insert(ratios.end(), o.ratios.begin(), o.ratios.end());
    nack_count += o.nack_count;
    failed_silent_count += o.failed_silent_count;
    eviction_count += o.eviction_count;
  }
};

// ---------------------------------------------------------------------------
// On-path FEC what-if

constexpr std::size_t kFecBlock = 5;

struct FecCounts {
  std::size_t blocks = 0;
  std::size_t lost = 0;
  std::size_t fec_recovered = 0;
  std::size_t caspr_recovered = 0;

  double fec_rate() const { return ratio_or_one(fec_recovered, lost); }
  double caspr_rate() const { return ratio_or_one(caspr_recovered, lost); }
  void merge(const FecCounts& o) {
    blocks += o.blocks;
    lost += o.lost;
    fec_recovered += o.fec_recovered;
    caspr_recovered += o.caspr_recovered;
  }
};

struct FecWhatIf {
  std::size_t parity = 0;
  FecCounts all;
  // Blocks whose data and following parity window were both sent in an outage.
  FecCounts outage;

  double overhead_pct() const { return 100.0 * static_cast<double>(parity) / static_cast<double>(kFecBlock); }
};

using Interval = std::pair<TimeUs, TimeUs>;

// Consecutive blocks of kFecBlock packets; the fates of the next block's first
// `parity` packets stand in for the parity packets. A block recovers iff its
// losses do not exceed the surviving parity. `deadline` decides which lost
// packets count as recovered by the cloud path.
inline FecWhatIf fec_whatif(std::span<const PacketFate> trace, std::size_t parity, TimeUs deadline,
                            std::span<const Interval> outages = {}) {
  if (parity == 0 || parity > kFecBlock) throw std::invalid_argument("fec_whatif: parity must be in [1, 5]");
  auto in_outage = [&](TimeUs t) {
    return std::any_of(outages.begin(), outages.end(), [&](const Interval& iv) { return t >= iv.first && t < iv.second; });
  };
  FecWhatIf out;
  out.parity = parity;
  for (std::size_t b = 0; (b + 2) * kFecBlock <= trace.size(); ++b) {
    const std::size_t start = b * kFecBlock;
    std::size_t losses = 0;
    std::size_t caspr = 0;
    bool outage_block = !outages.empty();
    for (std::size_t i = start; i < start + 2 * kFecBlock; ++i) outage_block = outage_block && in_outage(trace[i].send_ts);
    for (std::size_t i = start; i < start + kFecBlock; ++i) {
      losses += trace[i].lost ? 1 : 0;
      caspr += recovered_within(trace[i], deadline) ? 1 : 0;
    }
    std::size_t surviving = 0;
    for (std::size_t i = start + kFecBlock; i < start + kFecBlock + parity; ++i) surviving += trace[i].lost ? 0 : 1;
    FecCounts c;
    c.blocks = 1;
    c.lost = losses;
    c.fec_recovered = losses <= surviving ? losses : 0;
    c.caspr_recovered = caspr;
    out.all.merge(c);
    if (outage_block) out.outage.merge(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cost

constexpr double kBytesPerGb = 1e9;

struct CostInputs {
  // Wire bytes of every data packet the senders emitted on the direct path.
  std::uint64_t data_bytes = 0;
  std::uint64_t data_payload_bytes = 0;
  std::uint64_t dc1_ingress = 0;
  std::uint64_t dc1_egress = 0;
  std::uint64_t dc2_ingress = 0;
  std::uint64_t dc2_egress = 0;
  // DC2 -> receiver bytes that carry recovery (data, forwarded parity, requests).
  std::uint64_t dc2_recovery_bytes = 0;
  std::uint64_t dc2_control_bytes = 0;
  std::uint64_t inter_dc_coded_payload = 0;
  double price_per_gb = 0.087;

  void merge(const CostInputs& o) {
    data_bytes += o.data_bytes;
    data_payload_bytes += o.data_payload_bytes;
    dc1_ingress += o.dc1_ingress;
    dc1_egress += o.dc1_egress;
    dc2_ingress += o.dc2_ingress;
    dc2_egress += o.dc2_egress;
    dc2_recovery_bytes += o.dc2_recovery_bytes;
    dc2_control_bytes += o.dc2_control_bytes;
    inter_dc_coded_payload += o.inter_dc_coded_payload;
  }
};

struct CostReport {
  CostInputs in;
  // Every data byte relayed DC1 -> DC2 -> receiver: charged at both DCs.
  std::uint64_t full_overlay_bytes = 0;
  std::uint64_t caspr_bytes = 0;
  double caspr_dollars = 0.0;
  double overlay_dollars = 0.0;
  // Coded payload over the data payload a full overlay would carry between DCs.
  double inter_dc_ratio = 0.0;
  double caspr_vs_overlay = 0.0;
};

inline CostReport cost_report(const CostInputs& in) {
  if (in.price_per_gb < 0.0) throw std::invalid_argument("price_per_gb must be >= 0");
  CostReport r;
  r.in = in;
  r.full_overlay_bytes = 2 * in.data_bytes;
  r.caspr_bytes = in.dc1_egress + in.dc2_egress;
  r.caspr_dollars = static_cast<double>(r.caspr_bytes) / kBytesPerGb * in.price_per_gb;
  r.overlay_dollars = static_cast<double>(r.full_overlay_bytes) / kBytesPerGb * in.price_per_gb;
  r.inter_dc_ratio = in.data_payload_bytes == 0 ? 0.0
                                                : static_cast<double>(in.inter_dc_coded_payload) /
                                                      static_cast<double>(in.data_payload_bytes);
  r.caspr_vs_overlay = r.full_overlay_bytes == 0 ? 0.0
                                                 : static_cast<double>(r.caspr_bytes) /
                                                       static_cast<double>(r.full_overlay_bytes);
  return r;
}

}  // namespace cloudrec::metrics

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

// CSV artifacts, summary text and run comparison.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cloudrec/experiment.hpp"
#include "cloudrec/metrics.hpp"

namespace cloudrec::report {

constexpr int kSchemaVersion = 1;

inline std::string schema_line(const std::string& name) { return "#schema," + name + "," + std::to_string(kSchemaVersion); }

inline std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

class SchemaMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Row {
  std::vector<std::string> cells;
  Row& add(const std::string& s) {
    cells.push_back(s);
    return *this;
  }
  Row& add(std::uint64_t v) { return add(std::to_string(v)); }
  Row& add(double v) { return add(fmt(v)); }
  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    return out;
  }
};

inline void recovery_row(std::ostream& os, const std::string& label, const metrics::RecoverySummary& s, const egress::EgressStats& e,
                         std::uint64_t gap, std::uint64_t timer, std::uint64_t acks, std::uint64_t in_stream, std::uint64_t dc2_bytes) {
  Row r;
  r.add(label)
      .add(std::uint64_t{s.packets})
      .add(std::uint64_t{s.lost_on_direct})
      .add(std::uint64_t{s.recovered})
      .add(std::uint64_t{s.recovered_within_rtt})
      .add(s.recovery_rate())
      .add(metrics::percentile(s.ratios, 0.5))
      .add(metrics::percentile(s.ratios, 0.9))
      .add(metrics::percentile(s.ratios, 0.95))
      .add(metrics::fraction_at_most(s.ratios, 0.5))
      .add(s.nack_count)
      .add(gap)
      .add(timer)
      .add(acks)
      .add(in_stream)
      .add(s.failed_silent_count)
      .add(s.eviction_count)
      .add(e.confirm_queries)
      .add(e.confirm_denied)
      .add(e.proactive_tasks)
      .add(dc2_bytes);
  os << r.str() << "\n";
}

inline void add_egress(egress::EgressStats& a, const egress::EgressStats& b) {
  a.confirm_queries += b.confirm_queries;
  a.confirm_denied += b.confirm_denied;
  a.proactive_tasks += b.proactive_tasks;
}

inline void fec_row(std::ostream& os, const std::string& label, const metrics::FecWhatIf& w, const char* scope, const metrics::FecCounts& c) {
  const double fec = c.fec_rate();
  const double caspr = c.caspr_rate();
  double pct = 0.0;
  if (fec > 0.0) pct = (caspr - fec) / fec * 100.0;
  else if (caspr > 0.0) pct = INFINITY;
  Row r;
  r.add(label)
      .add(std::uint64_t{w.parity})
      .add(w.overhead_pct())
      .add(std::string(scope))
      .add(std::uint64_t{c.blocks})
      .add(std::uint64_t{c.lost})
      .add(std::uint64_t{c.fec_recovered})
      .add(fec)
      .add(std::uint64_t{c.caspr_recovered})
      .add(caspr)
      .add((caspr - fec) * 100.0)
      .add(pct);
  os << r.str() << "\n";
}

inline void cost_row(std::ostream& os, const std::string& label, const metrics::CostReport& c) {
  Row r;
  r.add(label)
      .add(c.in.data_bytes)
      .add(c.in.data_payload_bytes)
      .add(c.in.dc1_ingress)
      .add(c.in.dc1_egress)
      .add(c.in.dc2_ingress)
      .add(c.in.dc2_egress)
      .add(c.in.dc2_recovery_bytes)
      .add(c.in.dc2_control_bytes)
      .add(c.in.inter_dc_coded_payload)
      .add(c.inter_dc_ratio)
      .add(c.full_overlay_bytes)
      .add(c.caspr_bytes)
      .add(c.caspr_vs_overlay)
      .add(c.caspr_dollars)
      .add(c.overlay_dollars);
  os << r.str() << "\n";
}

}  // namespace detail

// Totals across seeds, as used by the "all" rows.
struct Aggregate {
  metrics::RecoverySummary summary;
  metrics::EpisodeHistogram episodes;
  std::vector<metrics::FecWhatIf> fec;
  metrics::CostInputs cost;
  egress::EgressStats egress;
  std::uint64_t gap_nacks = 0;
  std::uint64_t timer_nacks = 0;
  std::uint64_t acks = 0;
  std::uint64_t in_stream_decoded = 0;
};

inline Aggregate aggregate(const experiment::RunResult& run) {
  Aggregate a;
  for (const auto& s : run.seeds) {
    a.summary.merge(s.summary);
    a.episodes.merge(s.episodes);
    for (std::size_t k = 0; k < s.fec.size(); ++k) {
      if (a.fec.size() <= k) a.fec.push_back(s.fec[k]);
      else {
        a.fec[k].all.merge(s.fec[k].all);
        a.fec[k].outage.merge(s.fec[k].outage);
      }
    }
    a.cost.merge(s.cost);
    a.cost.price_per_gb = s.cost.price_per_gb;
    detail::add_egress(a.egress, s.egress);
    a.gap_nacks += s.gap_nacks;
    a.timer_nacks += s.timer_nacks;
    a.acks += s.acks;
    a.in_stream_decoded += s.in_stream_decoded;
  }
  return a;
}

inline void write_recovery_summary(std::ostream& os, const experiment::RunResult& run, const Aggregate& a) {
  os << schema_line("recovery_summary") << "\n";
  os << "seed,packets,lost_on_direct,recovered,recovered_within_rtt,recovery_rate,ratio_p50,ratio_p90,ratio_p95,"
        "within_half_rtt,nacks,gap_nacks,timer_nacks,acks,in_stream_decoded,failed_silent,evictions,confirm_queries,"
        "confirm_denied,proactive_tasks,dc2_recovery_bytes\n";
  for (const auto& s : run.seeds)
    detail::recovery_row(os, std::to_string(s.seed), s.summary, s.egress, s.gap_nacks, s.timer_nacks, s.acks, s.in_stream_decoded,
                         s.cost.dc2_recovery_bytes);
  detail::recovery_row(os, "all", a.summary, a.egress, a.gap_nacks, a.timer_nacks, a.acks, a.in_stream_decoded, a.cost.dc2_recovery_bytes);
}

inline void write_episodes(std::ostream& os, const experiment::RunResult& run, const Aggregate& a) {
  os << schema_line("episodes") << "\n";
  os << "seed,class,episodes,lost_packets,share_of_losses\n";
  auto rows = [&](const std::string& label, const metrics::EpisodeHistogram& h) {
    for (int c = 0; c < 3; ++c) {
      detail::Row r;
      r.add(label)
          .add(std::string(metrics::to_string(static_cast<metrics::EpisodeClass>(c))))
          .add(std::uint64_t{h.episodes[c]})
          .add(std::uint64_t{h.lost[c]})
          .add(h.total_lost() == 0 ? 0.0 : static_cast<double>(h.lost[c]) / static_cast<double>(h.total_lost()));
      os << r.str() << "\n";
    }
  };
  for (const auto& s : run.seeds) rows(std::to_string(s.seed), s.episodes);
  rows("all", a.episodes);
}

inline void write_fec_whatif(std::ostream& os, const experiment::RunResult& run, const Aggregate& a) {
  os << schema_line("fec_whatif") << "\n";
  os << "seed,parity,overhead_pct,scope,blocks,lost,fec_recovered,fec_rate,caspr_recovered,caspr_rate,delta_pp,pct_increase\n";
  auto rows = [&](const std::string& label, const std::vector<metrics::FecWhatIf>& ws) {
    for (const auto& w : ws) {
      detail::fec_row(os, label, w, "all", w.all);
      detail::fec_row(os, label, w, "outage", w.outage);
    }
  };
  for (const auto& s : run.seeds) rows(std::to_string(s.seed), s.fec);
  rows("all", a.fec);
}

inline void write_cost(std::ostream& os, const experiment::RunResult& run, const Aggregate& a) {
  os << schema_line("cost") << "\n";
  os << "seed,data_bytes,data_payload_bytes,dc1_ingress,dc1_egress,dc2_ingress,dc2_egress,dc2_recovery_bytes,"
        "dc2_control_bytes,inter_dc_coded_payload,inter_dc_ratio,full_overlay_bytes,caspr_bytes,caspr_vs_overlay,"
        "caspr_dollars,overlay_dollars\n";
  for (const auto& s : run.seeds) detail::cost_row(os, std::to_string(s.seed), metrics::cost_report(s.cost));
  detail::cost_row(os, "all", metrics::cost_report(a.cost));
}

inline void write_summary(std::ostream& os, const experiment::RunResult& run, const Aggregate& a) {
  const auto& sc = run.scenario;
  const auto cost = metrics::cost_report(a.cost);
  os << "scenario     " << sc.name << (sc.variant.empty() ? "" : " [" + sc.variant + "]") << "\n";
  os << "seeds        " << run.seeds.size() << "\n";
  os << "flows        " << sc.total_flows() << "\n";
  os << "packets      " << a.summary.packets << "\n";
  os << "lost direct  " << a.summary.lost_on_direct << "\n";
  os << "recovered    " << a.summary.recovered << " (" << a.summary.recovered_within_rtt << " within one RTT)\n";
  os << "rate         " << fmt(a.summary.recovery_rate()) << "\n";
  os << "time/RTT     p50 " << fmt(metrics::percentile(a.summary.ratios, 0.5)) << "  p95 "
     << fmt(metrics::percentile(a.summary.ratios, 0.95)) << "  <=0.5: " << fmt(metrics::fraction_at_most(a.summary.ratios, 0.5)) << "\n";
  os << "episodes     random " << a.episodes.episodes[0] << "  multi " << a.episodes.episodes[1] << "  outage "
     << a.episodes.episodes[2] << "\n";
  for (const auto& w : a.fec) {
    const auto label = "fec " + std::to_string(std::lround(w.overhead_pct())) + "%";
    os << label << std::string(label.size() < 13 ? 13 - label.size() : 1, ' ') << "rate " << fmt(w.all.fec_rate()) << " vs "
       << fmt(w.all.caspr_rate()) << "  outage blocks " << w.outage.blocks << " rate " << fmt(w.outage.fec_rate()) << " vs "
       << fmt(w.outage.caspr_rate()) << "\n";
  }
  os << "nacks        " << a.summary.nack_count << " (gap " << a.gap_nacks << ", timer " << a.timer_nacks << ")\n";
  os << "failed       " << a.summary.failed_silent_count << "\n";
  os << "inter-DC     " << fmt(cost.inter_dc_ratio) << " of data payload\n";
  os << "egress       " << fmt(cost.caspr_vs_overlay) << " of full overlay ($" << fmt(cost.caspr_dollars) << " vs $"
     << fmt(cost.overlay_dollars) << ")\n";
}

inline std::filesystem::path output_dir(const std::filesystem::path& out, const scenario::Scenario& sc) {
  return sc.variant.empty() ? out : out / sc.variant;
}

inline void write_outputs(const experiment::RunResult& run, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto a = aggregate(run);
  auto write = [&](const char* name, const char* file, auto fn) {
    if (!run.scenario.wants(name)) return;
    std::ofstream os(dir / file);
    if (!os) throw std::runtime_error("cannot write " + (dir / file).string());
    fn(os, run, a);
  };
  write("recovery_summary", "recovery_summary.csv", write_recovery_summary);
  write("episodes", "episodes.csv", write_episodes);
  write("fec_whatif", "fec_whatif.csv", write_fec_whatif);
  write("cost", "cost.csv", write_cost);
  write("summary", "summary.txt", write_summary);
}

// ---------------------------------------------------------------------------
// compare

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  const std::vector<std::string>& row(const std::string& first) const {
    for (const auto& r : rows)
      if (!r.empty() && r[0] == first) return r;
    throw SchemaMismatch("missing row '" + first + "'");
  }
  double num(const std::vector<std::string>& r, const std::string& col) const {
    auto it = std::find(header.begin(), header.end(), col);
    if (it == header.end()) throw SchemaMismatch("missing column '" + col + "'");
    const auto idx = static_cast<std::size_t>(it - header.begin());
    if (idx >= r.size()) throw SchemaMismatch("short row");
    if (r[idx] == "inf") return INFINITY;
    return std::stod(r[idx]);
  }
};

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline Table read_table(const std::filesystem::path& file, const std::string& schema) {
  std::ifstream in(file);
  if (!in) throw SchemaMismatch(file.string() + ": missing");
  std::string line;
  std::getline(in, line);
  if (line != schema_line(schema)) throw SchemaMismatch(file.string() + ": expected '" + schema_line(schema) + "', found '" + line + "'");
  Table t;
  if (!std::getline(in, line)) throw SchemaMismatch(file.string() + ": no header row");
  t.header = split_csv(line);
  while (std::getline(in, line))
    if (!line.empty()) t.rows.push_back(split_csv(line));
  return t;
}

struct CompareRow {
  std::string run;
  double recovery_rate = 0.0;
  double ratio_p95 = 0.0;
  double caspr_vs_overlay = 0.0;
  double nacks = 0.0;
};

// A directory without outputs of its own stands for its run subdirectories.
inline std::vector<std::filesystem::path> expand_run_dirs(const std::vector<std::string>& dirs) {
  std::vector<std::filesystem::path> out;
  for (const auto& d : dirs) {
    std::filesystem::path p(d);
    if (std::filesystem::exists(p / "recovery_summary.csv") || !std::filesystem::is_directory(p)) {
      out.push_back(p);
      continue;
    }
    std::vector<std::filesystem::path> subs;
    for (const auto& e : std::filesystem::directory_iterator(p))
      if (e.is_directory() && std::filesystem::exists(e.path() / "recovery_summary.csv")) subs.push_back(e.path());
    std::sort(subs.begin(), subs.end());
    if (subs.empty()) out.push_back(p);
    out.insert(out.end(), subs.begin(), subs.end());
  }
  return out;
}

inline std::vector<CompareRow> compare_runs(const std::vector<std::filesystem::path>& dirs) {
  if (dirs.size() < 2) throw std::invalid_argument("compare needs at least two run directories");
  std::vector<CompareRow> out;
  for (const auto& d : dirs) {
    const auto rec = read_table(d / "recovery_summary.csv", "recovery_summary");
    const auto cost = read_table(d / "cost.csv", "cost");
    CompareRow r;
    r.run = d.string();
    const auto& ra = rec.row("all");
    r.recovery_rate = rec.num(ra, "recovery_rate");
    r.ratio_p95 = rec.num(ra, "ratio_p95");
    r.nacks = rec.num(ra, "nacks");
    r.caspr_vs_overlay = cost.num(cost.row("all"), "caspr_vs_overlay");
    out.push_back(r);
  }
  return out;
}

// Deltas are against the first run.
inline void write_compare(std::ostream& os, const std::vector<CompareRow>& rows) {
  os << "run,recovery_rate,delta_rate_pp,ratio_p95,delta_ratio_p95,caspr_vs_overlay,delta_cost,nacks,nack_factor\n";
  const auto& base = rows.front();
  for (const auto& r : rows) {
    detail::Row row;
    row.add(r.run)
        .add(r.recovery_rate)
        .add((r.recovery_rate - base.recovery_rate) * 100.0)
        .add(r.ratio_p95)
        .add(r.ratio_p95 - base.ratio_p95)
        .add(r.caspr_vs_overlay)
        .add(r.caspr_vs_overlay - base.caspr_vs_overlay)
        .add(r.nacks)
        .add(r.nacks == 0.0 ? (base.nacks == 0.0 ? 1.0 : INFINITY) : base.nacks / r.nacks);
    os << row.str() << "\n";
  }
}

}  // namespace cloudrec::report

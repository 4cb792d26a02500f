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

#include <sstream>
#include <string>

#include "cloudrec/experiment.hpp"
#include "cloudrec/report.hpp"
#include "cloudrec/scenario.hpp"

using namespace cloudrec;

namespace {

scenario::Scenario small(const std::string& direct_loss = "{model: google_burst, p_first: 0.02, p_cont: 0.5}") {
  return scenario::parse_scenario(R"(name: small
duration_s: 8
drain_s: 2
seeds: [1, 2]
topology:
  direct:
    delay_ms: 150
    jitter_ms: 1
    loss: )" + direct_loss + R"(
flows:
  - count: 6
    stagger_ms: 3
coding: {k_max: 6, num_parity_cross: 2, in_block: 5, in_flush_ms: 110}
)");
}

std::string csvs(const experiment::RunResult& run) {
  const auto a = report::aggregate(run);
  std::ostringstream os;
  report::write_recovery_summary(os, run, a);
  report::write_episodes(os, run, a);
  report::write_fec_whatif(os, run, a);
  report::write_cost(os, run, a);
  return os.str();
}

}  // namespace

TEST(Experiment, SameSeedSameResult) {
  const auto sc = small();
  const auto a = experiment::run_scenario(sc);
  const auto b = experiment::run_scenario(sc);
  EXPECT_EQ(csvs(a), csvs(b));
  ASSERT_EQ(a.seeds.size(), 2u);
  for (std::size_t f = 0; f < a.seeds[0].flows.size(); ++f) {
    const auto& x = a.seeds[0].flows[f].fates;
    const auto& y = b.seeds[0].flows[f].fates;
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_EQ(x[i].lost, y[i].lost);
      EXPECT_EQ(x[i].recovery_time, y[i].recovery_time);
    }
  }
}

TEST(Experiment, SeedsDiffer) {
  const auto r = experiment::run_scenario(small());
  std::vector<bool> l1, l2;
  for (const auto& p : r.seeds[0].flows[0].fates) l1.push_back(p.lost);
  for (const auto& p : r.seeds[1].flows[0].fates) l2.push_back(p.lost);
  EXPECT_NE(l1, l2);
}

TEST(Experiment, LosslessRunSendsNoRecoveryBytes) {
  const auto sc = scenario::strip_losses(small());
  for (auto seed : sc.seeds) {
    const auto r = experiment::run_seed(sc, seed);
    EXPECT_TRUE(r.lossless);
    EXPECT_EQ(r.summary.lost_on_direct, 0u);
    EXPECT_EQ(r.cost.dc2_recovery_bytes, 0u);
    EXPECT_EQ(r.egress.in_stream_forwards, 0u);
    EXPECT_DOUBLE_EQ(r.summary.recovery_rate(), 1.0);
  }
}

TEST(Experiment, LossyRunRecoversAndSpendsRecoveryBytes) {
  const auto r = experiment::run_seed(small(), 1);
  EXPECT_FALSE(r.lossless);
  EXPECT_GT(r.summary.lost_on_direct, 0u);
  EXPECT_GT(r.summary.recovered, 0u);
  EXPECT_GT(r.cost.dc2_recovery_bytes, 0u);
  EXPECT_LE(r.summary.recovered_within_rtt, r.summary.recovered);
  EXPECT_LE(r.summary.recovered, r.summary.lost_on_direct);
  EXPECT_EQ(r.episodes.total_lost(), r.summary.lost_on_direct);
}

TEST(Experiment, FatesMatchSenderOutput) {
  const auto sc = small();
  const auto r = experiment::run_seed(sc, 2);
  ASSERT_EQ(r.flows.size(), 6u);
  std::size_t total = 0;
  for (const auto& f : r.flows) {
    EXPECT_EQ(f.rtt, 300 * kUsPerMs);
    // 8 s at 20 ms, minus the flow's stagger.
    EXPECT_NEAR(static_cast<double>(f.fates.size()), 400.0, 1.0);
    for (std::size_t i = 0; i < f.fates.size(); ++i) {
      EXPECT_EQ(f.fates[i].seq, i + 1);
      if (!f.fates[i].lost) EXPECT_EQ(f.fates[i].recovery_time, -1);
    }
    EXPECT_EQ(f.duplicated, f.fates.size());
    total += f.fates.size();
  }
  EXPECT_EQ(r.summary.packets, total);
}

// Inter-DC coded payload tracks r + s = 2/6 + 1/5 when groups stay full.
TEST(Experiment, InterDcOverheadMatchesCodingRate) {
  const auto r = experiment::run_seed(scenario::strip_losses(small()), 1);
  const auto c = metrics::cost_report(r.cost);
  EXPECT_NEAR(c.inter_dc_ratio, 2.0 / 6.0 + 1.0 / 5.0, 0.01);
}

TEST(Experiment, WithoutCloudPathNothingIsRecovered) {
  auto sc = small();
  sc.sender_dc1.loss = BernoulliLoss{1.0};
  const auto r = experiment::run_seed(sc, 1);
  EXPECT_GT(r.summary.lost_on_direct, 0u);
  EXPECT_EQ(r.summary.recovered, 0u);
  EXPECT_EQ(r.ingress.packets, 0u);
}

TEST(Experiment, StragglerHurtsSingleParity) {
  auto sc = scenario::parse_scenario(R"(name: s
duration_s: 20
seeds: [4]
topology:
  direct: {loss: {model: google_burst, p_first: 0.02, p_cont: 0.5}}
flows:
  - {count: 5, stagger_ms: 3}
  - {count: 1, start_offset_ms: 15, response_delay_rtt: 2.0}
coding: {k_max: 6, num_parity_cross: 1, in_block: 0}
)");
  const double one = experiment::run_seed(sc, 4).summary.recovery_rate();
  sc.coding.num_parity_cross = 2;
  const double two = experiment::run_seed(sc, 4).summary.recovery_rate();
  EXPECT_GT(two, one + 0.10);
}

TEST(Experiment, TraceIsJsonLines) {
  auto sc = small();
  sc.duration_s = 1;
  std::ostringstream trace;
  experiment::run_seed(sc, 1, &trace);
  std::istringstream in(trace.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ASSERT_EQ(line.front(), '{');
    ASSERT_EQ(line.back(), '}');
    ASSERT_NE(line.find("\"link\":"), std::string::npos);
    ++n;
  }
  EXPECT_GT(n, 300u);
}

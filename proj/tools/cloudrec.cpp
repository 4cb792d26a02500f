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

// cloudrec: run, compare and validate scenarios.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cloudrec/experiment.hpp"
#include "cloudrec/report.hpp"
#include "cloudrec/scenario.hpp"

namespace fs = std::filesystem;
using namespace cloudrec;

namespace {

constexpr int kExitInvariant = 1;
constexpr int kExitInvalid = 2;

int cmd_run(const std::string& file, std::optional<std::uint64_t> seed, const std::string& out_opt, bool trace) {
  const auto base = scenario::load_scenario(file);
  const fs::path out = out_opt.empty() ? fs::path("out") / base.name : fs::path(out_opt);
  for (auto sc : scenario::expand_variants(base)) {
    if (seed) sc.seeds = {*seed};
    const auto dir = report::output_dir(out, sc);
    fs::create_directories(dir);
    std::unique_ptr<std::ofstream> trace_out;
    if (trace) trace_out = std::make_unique<std::ofstream>(dir / "trace.jsonl");
    const auto run = experiment::run_scenario(sc, trace_out.get());
    report::write_outputs(run, dir);
    const auto agg = report::aggregate(run);
    std::cout << sc.name << (sc.variant.empty() ? "" : "/" + sc.variant) << ": recovery_rate "
              << report::fmt(agg.summary.recovery_rate()) << " over " << run.seeds.size() << " seed(s) -> " << dir.string()
              << "\n";
  }
  return 0;
}

int cmd_compare(const std::vector<std::string>& dirs) {
  const auto runs = report::expand_run_dirs(dirs);
  if (runs.size() < 2) {
    std::cerr << "compare: need at least two run directories\n";
    return kExitInvalid;
  }
  const auto rows = report::compare_runs(runs);
  report::write_compare(std::cout, rows);
  return 0;
}

int cmd_validate(const std::string& file) {
  const auto sc = scenario::load_scenario(file);
  std::cout << file << ": ok (" << sc.name << ", " << sc.total_flows() << " flows, " << sc.seeds.size() << " seeds";
  if (!sc.variants.empty()) std::cout << ", " << sc.variants.size() << " variants";
  std::cout << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cloud-assisted packet recovery simulator"};
  app.require_subcommand(1);

  std::string run_file;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool trace = false;
  auto* run = app.add_subcommand("run", "run a scenario and write metrics artifacts");
  run->add_option("file", run_file, "scenario file")->required();
  run->add_option("--seed", seed, "run only this seed");
  run->add_option("--out", out_dir, "output directory (default out/<name>)");
  run->add_flag("--trace", trace, "write a per-message trace.jsonl");

  std::vector<std::string> dirs;
  auto* compare = app.add_subcommand("compare", "compare run output directories");
  compare->add_option("dirs", dirs, "run directories; the first is the baseline")->required();

  std::string validate_file;
  auto* validate = app.add_subcommand("validate", "validate a scenario file");
  validate->add_option("file", validate_file, "scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitInvalid;
  }

  try {
    if (*run) return cmd_run(run_file, seed, out_dir, trace);
    if (*compare) return cmd_compare(dirs);
    if (*validate) return cmd_validate(validate_file);
  } catch (const scenario::ScenarioError& e) {
    std::cerr << e.what() << "\n";
    return kExitInvalid;
  } catch (const report::SchemaMismatch& e) {
    std::cerr << "SchemaMismatch: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const experiment::InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return 0;
}

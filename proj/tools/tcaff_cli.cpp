/**
 * @file tcaff_cli.cpp
 * @brief Simulation and experiment CLI.
 *
 *   tcaff run <scenario.json> [--seed N] [--out DIR] [--set key.path=value ...]
 *   tcaff baseline <scenario.json> --min-assoc 2,3,5 [--mno-only] [...]
 *   tcaff timing <scenario.json> [...]
 *   tcaff metrics <run.csv>
 */

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tcaff/harness.hpp"
#include "tcaff/scenario.hpp"

namespace {

void print_metrics(const tcaff::Metrics& m)
{
  std::cout << tcaff::metrics_to_json(m).dump(2) << std::endl;
}

tcaff::Scenario load(const std::string& path, const std::vector<std::string>& overrides,
                     std::uint64_t seed, bool seed_given)
{
  tcaff::Scenario sc = tcaff::load_scenario(path, overrides);
  if (seed_given) sc.seed = seed;
  return sc;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"TCAFF frame-alignment simulation harness"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir, csv_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::string min_assoc_list;
  bool mno_only = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("scenario", scenario_path, "scenario JSON file")->required();
    cmd->add_option("--seed", seed, "override the scenario seed");
    cmd->add_option("--set", overrides, "override a scenario field, e.g. --set sensor.centroid_sigma=0.1");
  };

  CLI::App* run = app.add_subcommand("run", "run a scenario with the full pipeline");
  add_common(run);
  run->add_option("--out", out_dir, "output directory for run.csv / metrics.json / maps/");

  CLI::App* baseline = app.add_subcommand("baseline", "run threshold-accept baselines");
  add_common(baseline);
  baseline->add_option("--out", out_dir, "output directory");
  baseline->add_option("--min-assoc", min_assoc_list, "comma-separated acceptance thresholds")
      ->required();
  baseline->add_flag("--mno-only", mno_only, "accept the densest multi-solution measurement instead");

  CLI::App* timing = app.add_subcommand("timing", "profile mapping / association / filter times");
  add_common(timing);

  CLI::App* metrics = app.add_subcommand("metrics", "recompute metrics from a run.csv");
  metrics->add_option("run_csv", csv_path, "run.csv produced by `run`")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const bool seed_given = app.count_all() && (run->count("--seed") || baseline->count("--seed") ||
                                                timing->count("--seed"));
    if (run->parsed()) {
      const auto sc = load(scenario_path, overrides, seed, seed_given);
      const auto result = tcaff::run_scenario(sc, out_dir);
      print_metrics(result.metrics);
    } else if (baseline->parsed()) {
      const auto sc = load(scenario_path, overrides, seed, seed_given);
      std::vector<int> thresholds;
      std::stringstream ss(min_assoc_list);
      std::string tok;
      while (std::getline(ss, tok, ',')) thresholds.push_back(std::stoi(tok));
      if (thresholds.empty()) throw std::runtime_error("--min-assoc: no thresholds given");

      nlohmann::json sweep = nlohmann::json::array();
      for (int t : thresholds) {
        const auto kind = mno_only ? tcaff::BaselineKind::MnoOnly : tcaff::BaselineKind::ClipperThreshold;
        const std::string sub = out_dir.empty() ? "" : out_dir + "/min_assoc_" + std::to_string(t);
        const auto result = tcaff::run_baseline(sc, kind, t, sub);
        sweep.push_back({{"min_assoc", t}, {"metrics", tcaff::metrics_to_json(result.metrics)}});
      }
      if (!out_dir.empty()) {
        std::ofstream out(out_dir + "/baseline.json");
        out << sweep.dump(2) << '\n';
      }
      std::cout << sweep.dump(2) << std::endl;
    } else if (timing->parsed()) {
      const auto sc = load(scenario_path, overrides, seed, seed_given);
      const auto report = tcaff::timing_report(sc);
      auto row = [](const char* name, const tcaff::TimingStats& s) {
        std::printf("%-14s %8.2f ms +/- %6.2f (n=%d)\n", name, s.mean_ms, s.std_ms, s.n);
      };
      row("mapping tick", report.mapping);
      row("mno-clipper", report.mno);
      row("tcaff step", report.tcaff_step);
    } else if (metrics->parsed()) {
      std::ifstream in(csv_path);
      if (!in) throw std::runtime_error("cannot open " + csv_path);
      std::stringstream buf;
      buf << in.rdbuf();
      print_metrics(tcaff::compute_metrics(tcaff::parse_csv(buf.str())));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "riskplan/bench.hpp"
#include "riskplan/demos.hpp"
#include "riskplan/flow_tube.hpp"
#include "riskplan/policy.hpp"
#include "riskplan/scenario.hpp"
#include "riskplan/trajectory.hpp"

namespace riskplan {
namespace {

namespace fs = std::filesystem;

Scenario prepared_scenario(const std::string& scenario, const std::string& library) {
  Scenario scn = load_scenario(scenario);
  if (!library.empty()) scn.attach_library(load_library(library));
  scn.validate();
  return scn;
}

std::ofstream open_out(const fs::path& dir, const std::string& file) {
  fs::create_directories(dir);
  const fs::path path = dir / file;
  std::ofstream out(path);
  require(out.good(), "cannot open " + path.string() + " for writing");
  std::cout << "wrote " << path.string() << "\n";
  return out;
}

std::vector<std::string> sorted_csv_files(const fs::path& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_learn(const std::string& demo_dir, const std::string& out_path,
              std::vector<std::string> labels, double sigma_min) {
  require(fs::is_directory(demo_dir), "learn: '" + demo_dir + "' is not a directory");
  if (labels.empty()) {
    for (const auto& entry : fs::directory_iterator(demo_dir))
      if (entry.is_directory()) labels.push_back(entry.path().filename().string());
    std::sort(labels.begin(), labels.end());
    require(!labels.empty(), "learn: no per-maneuver subdirectories in '" + demo_dir + "'");
  }
  std::string expected;
  for (const auto& l : labels) expected += (expected.empty() ? "" : ", ") + l;

  PftLibrary lib;
  for (const auto& label : labels) {
    const fs::path dir = fs::path(demo_dir) / label;
    require(fs::is_directory(dir),
            "learn: missing demo directory '" + dir.string() + "' (expected: " + expected + ")");
    std::vector<Trajectory> demos;
    for (const auto& file : sorted_csv_files(dir)) demos.push_back(load_trajectory_csv(file));
    require(!demos.empty(), "learn: no trajectory CSVs in '" + dir.string() + "'");
    lib.add(generate_pft(demos, label, sigma_min));
    const auto& pft = lib.by_label(label);
    std::printf("%s: length %d ticks (%.2f s), %d demos\n", label.c_str(), pft.length(),
                pft.length() * pft.ts, pft.demo_count);
  }
  save_library(lib, out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

void dump_first_policy(const Scenario& scn, const BenchConfig& config, const std::string& path) {
  World world(scn, config.seed, 0);
  const BeliefState belief =
      make_belief(scn.library, world.agent_positions(), scn.window_size);
  TrialConfig tc;
  tc.delta = config.delta;
  tc.max_actions = config.max_actions;
  const CCPOMDPModel model = build_model(scn, config.planner, belief, tc.resolved_delta(scn),
                                         tc.resolved_max_actions(scn));
  const SolveResult solved = solve(model, world.ego(), config.use_heuristics);
  nlohmann::ordered_json j;
  j["feasible"] = solved.policy.has_value();
  j["expansions"] = solved.expansions;
  if (solved.policy) j["policy"] = policy_to_json(*solved.policy, model);
  std::ofstream out(path);
  require(out.good(), "cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  std::cout << "wrote " << path << "\n";
}

int cmd_bench(const std::string& scenario, const std::string& library, const BenchConfig& config,
              const std::string& out_dir, const std::string& dump_policy) {
  const Scenario scn = prepared_scenario(scenario, library);
  const BenchResult result = run_bench(scn, config);
  std::ofstream results = open_out(out_dir, "results.csv");
  write_results_csv(results, result);
  std::ofstream summary = open_out(out_dir, "summary.csv");
  write_summary_csv(summary, scn, config, result.summary);
  std::cout << summary_table(scn, config, result.summary);
  if (!dump_policy.empty()) dump_first_policy(scn, config, dump_policy);
  return 0;
}

int cmd_sweep_delta(const std::string& scenario, const std::string& library,
                    const BenchConfig& base, const std::vector<double>& deltas,
                    const std::string& out_dir) {
  const Scenario scn = prepared_scenario(scenario, library);
  const auto rows = sweep_delta(scn, base, deltas);
  std::ofstream csv = open_out(out_dir, "sweep.csv");
  write_sweep_csv(csv, rows);
  std::ofstream dat = open_out(out_dir, "sweep.dat");
  write_sweep_dat(dat, rows);
  for (const auto& r : rows)
    std::printf("delta %-8s success %6.2f %%  timeout %6.2f %%  completion %.2f s\n",
                format_double(r.delta).c_str(), r.summary.success_rate_pct,
                r.summary.timeout_rate_pct, r.summary.mean_completion_s);
  return 0;
}

int cmd_timing(const std::string& scenario, const std::string& library,
               const std::vector<int>& horizons, const std::vector<int>& agents, int solves,
               uint64_t seed, const std::string& out_dir) {
  const Scenario scn = prepared_scenario(scenario, library);
  const auto cells = run_timing(scn, horizons, agents, solves, seed);
  std::ofstream csv = open_out(out_dir, "timing.csv");
  write_timing_csv(csv, cells);
  std::ofstream dat = open_out(out_dir, "timing.dat");
  write_timing_dat(dat, cells);
  for (const auto& c : cells) {
    std::printf("H=%d n=%d: mean %.3f ms, p95 %.3f ms (%d solves)\n", c.horizon, c.agents,
                c.mean_ms, c.p95_ms, c.solves);
    if (c.horizon == 2 && c.agents == 3)
      std::printf("  within the 200 ms online planning budget: %s\n",
                  c.mean_ms <= 200.0 ? "yes" : "no");
  }
  return 0;
}

// Held-out evaluation against simulated agents whose maneuver switching
// follows the scenario's transition tables.
int recognize_worlds(const std::string& scenario, const std::string& library, int trials,
                     uint64_t seed, const std::string& out_dir) {
  const Scenario scn = prepared_scenario(scenario, library);
  const RecognitionReport report = run_recognition(scn, trials, seed);
  std::ofstream csv = open_out(out_dir, "recognition.csv");
  write_recognition_csv(csv, report);
  std::printf("accuracy %.2f %% over %d windows, mean end displacement %.3f m\n",
              report.accuracy_pct, report.windows, report.mean_displacement_m);
  return 0;
}

// Labeled-file evaluation: each trajectory's subdirectory names its true
// maneuver; the estimate uses only a short observation window.
int recognize_files(const std::string& library, const std::string& traj_dir, int window_size,
                    const std::string& out_dir) {
  require(!library.empty(), "recognize: labeled-file mode needs --library");
  require(fs::is_directory(traj_dir), "recognize: '" + traj_dir + "' is not a directory");
  const PftLibrary lib = load_library(library);

  DiscreteTransitionModel stay;
  stay.per_maneuver.resize(lib.size());
  for (int m = 0; m < lib.size(); ++m) {
    stay.per_maneuver[m].recurrent = true;
    stay.per_maneuver[m].rules = {{Guard::always(), {{m, 1.0}}}};
  }
  const int horizon = static_cast<int>(std::lround(4.8 / lib.ts));

  std::vector<fs::path> label_dirs;
  RecognitionReport report;
  int skipped = 0;
  for (const auto& entry : fs::directory_iterator(traj_dir)) {
    if (entry.is_regular_file()) {
      std::cerr << "warning: skipping unlabeled file " << entry.path().string() << "\n";
      ++skipped;
    } else if (entry.is_directory()) {
      label_dirs.push_back(entry.path());
    }
  }
  std::sort(label_dirs.begin(), label_dirs.end());
  for (const auto& dir : label_dirs) {
    const std::string label = dir.filename().string();
    int truth = -1;
    try {
      truth = lib.index_of(label);
    } catch (const std::exception&) {
      std::cerr << "warning: skipping directory '" << label
                << "' which names no library maneuver\n";
      ++skipped;
      continue;
    }
    for (const auto& file : sorted_csv_files(dir)) {
      const Trajectory traj = load_trajectory_csv(file);
      if (static_cast<int>(traj.size()) < window_size + 1) {
        std::cerr << "warning: skipping " << file << " (shorter than the observation window)\n";
        ++skipped;
        continue;
      }
      const std::vector<Vec2> window(traj.p.begin(), traj.p.begin() + window_size);
      const DiscreteDistribution posterior =
          estimate_discrete(window, lib, DiscreteDistribution::uniform(lib)).posterior;
      const auto marginal = maneuver_marginal(posterior, lib.size());
      int top = 0;
      for (size_t m = 1; m < marginal.size(); ++m)
        if (marginal[m] > marginal[top]) top = static_cast<int>(m);

      const int lookahead =
          std::min(horizon, static_cast<int>(traj.size()) - window_size);
      const PredictionTree tree = predict_hybrid(posterior, window.back(), stay, lib,
                                                 GuardContext{}, lookahead, 1e-4);
      RecognitionRow row;
      row.trial = static_cast<int>(report.rows.size());
      row.agent = 0;
      row.truth = label;
      row.estimate = lib.at(top).label;
      row.correct = top == truth;
      row.displacement_m =
          distance(predicted_mean_at(tree, lookahead), traj.p[window_size - 1 + lookahead]);
      report.windows += 1;
      report.correct += row.correct ? 1 : 0;
      report.mean_displacement_m += row.displacement_m;
      report.rows.push_back(std::move(row));
    }
  }
  require(report.windows > 0, "recognize: no usable labeled trajectories in '" + traj_dir + "'");
  report.accuracy_pct = 100.0 * report.correct / report.windows;
  report.mean_displacement_m /= report.windows;
  std::ofstream csv = open_out(out_dir, "recognition.csv");
  write_recognition_csv(csv, report);
  std::printf("accuracy %.2f %% over %d trajectories (%d skipped), "
              "mean end displacement %.3f m\n",
              report.accuracy_pct, report.windows, skipped, report.mean_displacement_m);
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"risk-bounded intention-aware motion planning benchmark"};
  app.require_subcommand(1);

  std::string scenario = "left_turn";
  std::string library;
  std::string planner = "ours";
  std::string out_dir = ".";
  std::string dump_policy;
  std::string demo_dir;
  std::string traj_dir;
  double delta = -1.0;
  double sigma_min = kSigmaMin;
  int trials = 200;
  uint64_t seed = 1;
  int threads = 1;
  int solves = 20;
  int window_size = 5;
  std::vector<std::string> labels;
  std::vector<double> deltas = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  std::vector<int> horizons = {1, 2, 3};
  std::vector<int> agent_counts = {0, 1, 2, 3};

  CLI::App* learn = app.add_subcommand("learn", "learn a maneuver library from demo CSVs");
  learn->add_option("demo_dir", demo_dir, "directory with one subdirectory per maneuver")
      ->required();
  learn->add_option("--library", library, "output library file")->required();
  learn->add_option("--labels", labels, "expected maneuver labels")->delimiter(',');
  learn->add_option("--sigma-min", sigma_min, "covariance floor (m)");

  auto add_common = [&](CLI::App* cmd, bool with_planner) {
    cmd->add_option("--scenario", scenario, "built-in name or scenario JSON path");
    cmd->add_option("--library", library, "maneuver library file to attach");
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--out", out_dir, "output directory");
    if (with_planner) {
      cmd->add_option("--planner", planner, "ours | conservative | risky | accel");
      cmd->add_option("--trials", trials, "trial count");
      cmd->add_option("--threads", threads, "worker threads");
    }
  };

  CLI::App* bench = app.add_subcommand("bench", "run a batch of closed-loop trials");
  add_common(bench, true);
  bench->add_option("--delta", delta, "execution risk bound");
  bench->add_option("--dump-policy", dump_policy, "write the first trial's initial policy JSON");

  CLI::App* sweep = app.add_subcommand("sweep-delta", "benchmark across risk bounds");
  add_common(sweep, true);
  sweep->add_option("--deltas", deltas, "ascending risk bounds")->delimiter(',');

  CLI::App* timing = app.add_subcommand("timing", "planning time by horizon and agent count");
  add_common(timing, false);
  timing->add_option("--horizons", horizons, "plan depths in actions")->delimiter(',');
  timing->add_option("--agents", agent_counts, "agent counts")->delimiter(',');
  timing->add_option("--solves", solves, "timed solves per cell");

  CLI::App* recognize = app.add_subcommand("recognize", "maneuver recognition quality");
  add_common(recognize, false);
  recognize->add_option("trajectories", traj_dir, "labeled trajectory directory (file mode)");
  recognize->add_option("--trials", trials, "held-out worlds (simulation mode)");
  recognize->add_option("--window", window_size, "observation window (file mode)");

  CLI11_PARSE(app, argc, argv);

  BenchConfig config;
  config.delta = delta;
  config.trials = trials;
  config.seed = seed;
  config.threads = threads;

  if (learn->parsed()) return cmd_learn(demo_dir, library, labels, sigma_min);
  config.planner = parse_planner(planner);
  if (bench->parsed()) return cmd_bench(scenario, library, config, out_dir, dump_policy);
  if (sweep->parsed()) return cmd_sweep_delta(scenario, library, config, deltas, out_dir);
  if (timing->parsed())
    return cmd_timing(scenario, library, horizons, agent_counts, solves, seed, out_dir);
  return traj_dir.empty() ? recognize_worlds(scenario, library, trials, seed, out_dir)
                          : recognize_files(library, traj_dir, window_size, out_dir);
}

}  // namespace
}  // namespace riskplan

int main(int argc, char** argv) {
  try {
    return riskplan::run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "riskplan: " << e.what() << "\n";
    return 1;
  }
}

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "riskplan/baselines.hpp"
#include "riskplan/csv.hpp"
#include "riskplan/intent.hpp"
#include "riskplan/scenario.hpp"
#include "riskplan/trial.hpp"
#include "riskplan/world.hpp"

namespace riskplan {

struct BenchConfig {
  PlannerKind planner = PlannerKind::kIntentAware;
  double delta = -1.0;  // scenario default when negative
  int trials = 200;
  uint64_t seed = 1;
  int threads = 1;
  int max_actions = -1;  // scenario default when negative
  bool use_heuristics = true;
  bool keep_logs = false;

  void validate() const {
    require(trials >= 1, "bench: need at least one trial");
    require(threads >= 1, "bench: need at least one thread");
    require(delta < 0.0 || delta <= 1.0, "bench: risk bound outside [0, 1]");
  }
};

struct MetricsSummary {
  int trials = 0;
  double success_rate_pct = 0.0;
  double collision_rate_pct = 0.0;
  double timeout_rate_pct = 0.0;
  double mean_completion_s = std::numeric_limits<double>::quiet_NaN();
  double recognition_accuracy_pct = std::numeric_limits<double>::quiet_NaN();
  double mean_displacement_m = std::numeric_limits<double>::quiet_NaN();
  double fallback_rate_pct = 0.0;  // share of replans that fell back to the safe action
  double mean_expansions = 0.0;    // per replan
  // Wall-clock planning times; informational, kept out of result files so
  // reruns stay byte-identical.
  double plan_ms_mean = 0.0;
  double plan_ms_p50 = 0.0;
  double plan_ms_p95 = 0.0;
  double plan_ms_max = 0.0;
};

namespace detail {

inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(q * static_cast<double>(values.size()));
  const size_t idx = rank <= 1.0 ? 0 : static_cast<size_t>(rank) - 1;
  return values[std::min(idx, values.size() - 1)];
}

inline std::string csv_cell(double v) { return std::isnan(v) ? "" : format_double(v); }

}  // namespace detail

inline MetricsSummary summarize(const std::vector<TrialResult>& trials) {
  MetricsSummary s;
  s.trials = static_cast<int>(trials.size());
  if (trials.empty()) return s;
  int successes = 0, collisions = 0, timeouts = 0;
  double completion = 0.0;
  long long correct = 0, total = 0, replans = 0, fallbacks = 0, expansions = 0;
  double displacement = 0.0;
  long long forecasts = 0;
  std::vector<double> plan_ms;
  for (const auto& t : trials) {
    successes += t.reached_goal ? 1 : 0;
    collisions += t.collision ? 1 : 0;
    timeouts += t.timeout ? 1 : 0;
    if (t.reached_goal) completion += t.time_to_goal;
    correct += t.recognition_correct;
    total += t.recognition_total;
    replans += t.replans;
    fallbacks += t.fallbacks;
    expansions += t.expansions_total;
    for (const double e : t.displacement_errors) displacement += e;
    forecasts += static_cast<long long>(t.displacement_errors.size());
    plan_ms.insert(plan_ms.end(), t.plan_ms_samples.begin(), t.plan_ms_samples.end());
  }
  const double n = static_cast<double>(trials.size());
  s.success_rate_pct = 100.0 * successes / n;
  s.collision_rate_pct = 100.0 * collisions / n;
  s.timeout_rate_pct = 100.0 * timeouts / n;
  if (successes > 0) s.mean_completion_s = completion / successes;
  if (total > 0) s.recognition_accuracy_pct = 100.0 * static_cast<double>(correct) / total;
  if (forecasts > 0) s.mean_displacement_m = displacement / static_cast<double>(forecasts);
  if (replans > 0) {
    s.fallback_rate_pct = 100.0 * static_cast<double>(fallbacks) / static_cast<double>(replans);
    s.mean_expansions = static_cast<double>(expansions) / static_cast<double>(replans);
  }
  if (!plan_ms.empty()) {
    double sum = 0.0;
    for (const double v : plan_ms) sum += v;
    s.plan_ms_mean = sum / static_cast<double>(plan_ms.size());
    s.plan_ms_p50 = detail::percentile(plan_ms, 0.50);
    s.plan_ms_p95 = detail::percentile(plan_ms, 0.95);
    s.plan_ms_max = *std::max_element(plan_ms.begin(), plan_ms.end());
  }
  return s;
}

struct BenchResult {
  MetricsSummary summary;
  std::vector<TrialResult> trials;
};

// Runs the configured number of seeded trials, optionally spread over a
// worker pool. Trial RNG streams depend only on (master seed, trial index),
// so results are identical for any thread count; a failed trial aborts with
// its index and seed for replay.
inline BenchResult run_bench(const Scenario& scn, const BenchConfig& config) {
  config.validate();
  std::vector<TrialResult> results(config.trials);
  std::vector<std::string> failures(config.trials);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < config.trials; i = next.fetch_add(1)) {
      TrialConfig tc;
      tc.planner = config.planner;
      tc.delta = config.delta;
      tc.seed = config.seed;
      tc.trial_index = i;
      tc.max_actions = config.max_actions;
      tc.use_heuristics = config.use_heuristics;
      tc.keep_log = config.keep_logs;
      try {
        results[i] = run_trial(scn, tc);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  if (config.threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < config.threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (int i = 0; i < config.trials; ++i)
    require(failures[i].empty(), "bench: trial " + std::to_string(i) + " (master seed " +
                                     std::to_string(config.seed) + ") failed: " + failures[i]);
  BenchResult out;
  out.trials = std::move(results);
  out.summary = summarize(out.trials);
  return out;
}

// Per-trial results. Deliberately excludes wall-clock timing so the file is
// byte-identical across reruns and thread counts.
inline void write_results_csv(std::ostream& out, const BenchResult& result) {
  out << "trial,collision,reached_goal,timeout,ticks,time_to_goal_s,replans,fallbacks,"
         "expansions,recognition_correct,recognition_total,forecasts,mean_displacement_m\n";
  for (size_t i = 0; i < result.trials.size(); ++i) {
    const TrialResult& t = result.trials[i];
    double disp = std::numeric_limits<double>::quiet_NaN();
    if (!t.displacement_errors.empty()) {
      disp = 0.0;
      for (const double e : t.displacement_errors) disp += e;
      disp /= static_cast<double>(t.displacement_errors.size());
    }
    out << i << ',' << (t.collision ? 1 : 0) << ',' << (t.reached_goal ? 1 : 0) << ','
        << (t.timeout ? 1 : 0) << ',' << t.ticks << ','
        << detail::csv_cell(t.reached_goal ? t.time_to_goal
                                           : std::numeric_limits<double>::quiet_NaN())
        << ',' << t.replans << ',' << t.fallbacks << ',' << t.expansions_total << ','
        << t.recognition_correct << ',' << t.recognition_total << ','
        << t.displacement_errors.size() << ',' << detail::csv_cell(disp) << '\n';
  }
}

inline void write_summary_csv(std::ostream& out, const Scenario& scn, const BenchConfig& config,
                              const MetricsSummary& s) {
  out << "scenario,planner,delta,trials,success_rate_pct,collision_rate_pct,timeout_rate_pct,"
         "mean_completion_s,recognition_accuracy_pct,mean_displacement_m,fallback_rate_pct,"
         "mean_expansions\n";
  TrialConfig tc;
  tc.delta = config.delta;
  out << scn.name << ',' << planner_name(config.planner) << ','
      << format_double(tc.resolved_delta(scn)) << ',' << s.trials << ','
      << detail::csv_cell(s.success_rate_pct) << ',' << detail::csv_cell(s.collision_rate_pct)
      << ',' << detail::csv_cell(s.timeout_rate_pct) << ','
      << detail::csv_cell(s.mean_completion_s) << ','
      << detail::csv_cell(s.recognition_accuracy_pct) << ','
      << detail::csv_cell(s.mean_displacement_m) << ',' << detail::csv_cell(s.fallback_rate_pct)
      << ',' << detail::csv_cell(s.mean_expansions) << '\n';
}

inline std::string summary_table(const Scenario& scn, const BenchConfig& config,
                                 const MetricsSummary& s) {
  TrialConfig tc;
  tc.delta = config.delta;
  std::ostringstream out;
  out << scn.name << " / " << planner_name(config.planner)
      << " (delta=" << format_double(tc.resolved_delta(scn)) << ", trials=" << s.trials << ")\n";
  char line[160];
  std::snprintf(line, sizeof line,
                "  success %6.2f %%   collision %6.2f %%   timeout %6.2f %%\n",
                s.success_rate_pct, s.collision_rate_pct, s.timeout_rate_pct);
  out << line;
  std::snprintf(line, sizeof line,
                "  completion %.2f s   recognition %.2f %%   displacement %.2f m\n",
                s.mean_completion_s, s.recognition_accuracy_pct, s.mean_displacement_m);
  out << line;
  std::snprintf(line, sizeof line,
                "  plan ms mean %.1f  p50 %.1f  p95 %.1f  max %.1f (informational)\n",
                s.plan_ms_mean, s.plan_ms_p50, s.plan_ms_p95, s.plan_ms_max);
  out << line;
  return out.str();
}

struct SweepRow {
  double delta = 0.0;
  MetricsSummary summary;
};

// One bench per risk bound, all sharing the master seed so trials pair up.
inline std::vector<SweepRow> sweep_delta(const Scenario& scn, BenchConfig base,
                                         const std::vector<double>& deltas) {
  require(!deltas.empty(), "sweep: no risk bounds given");
  for (size_t i = 0; i < deltas.size(); ++i) {
    require(deltas[i] >= 0.0 && deltas[i] <= 1.0, "sweep: risk bound outside [0, 1]");
    require(i == 0 || deltas[i - 1] < deltas[i], "sweep: risk bounds must ascend");
  }
  std::vector<SweepRow> rows;
  for (const double d : deltas) {
    base.delta = d;
    rows.push_back({d, run_bench(scn, base).summary});
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "delta,success_rate_pct,collision_rate_pct,timeout_rate_pct,mean_completion_s\n";
  for (const auto& r : rows)
    out << format_double(r.delta) << ',' << detail::csv_cell(r.summary.success_rate_pct) << ','
        << detail::csv_cell(r.summary.collision_rate_pct) << ','
        << detail::csv_cell(r.summary.timeout_rate_pct) << ','
        << detail::csv_cell(r.summary.mean_completion_s) << '\n';
}

// Space-separated twin of the sweep CSV for gnuplot.
inline void write_sweep_dat(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "# delta success_rate_pct mean_completion_s\n";
  for (const auto& r : rows)
    out << format_double(r.delta) << ' ' << detail::csv_cell(r.summary.success_rate_pct) << ' '
        << detail::csv_cell(r.summary.mean_completion_s) << '\n';
}

struct TimingCell {
  int horizon = 0;
  int agents = 0;
  int solves = 0;
  double mean_ms = 0.0;
  double p95_ms = 0.0;
};

// Wall-clock planning time per (horizon, agent count): each sample observes
// a fresh world for one recognition window, then times one model build plus
// solve. The first solve per cell warms caches and is discarded.
inline std::vector<TimingCell> run_timing(const Scenario& scn, const std::vector<int>& horizons,
                                          const std::vector<int>& agent_counts, int solves,
                                          uint64_t seed, bool use_heuristics = true) {
  require(solves >= 1, "timing: need at least one timed solve");
  for (const int h : horizons) require(h >= 1, "timing: horizon must be at least one action");
  for (const int n : agent_counts)
    require(n >= 0 && n <= static_cast<int>(scn.agents.size()),
            "timing: agent count outside the scenario's roster");
  std::vector<TimingCell> cells;
  for (const int n : agent_counts) {
    Scenario variant = scn;
    variant.agents.resize(n);
    for (const int h : horizons) {
      std::vector<double> samples;
      for (int rep = -1; rep < solves; ++rep) {
        World world(variant, seed, std::max(rep, 0));
        BeliefState belief =
            make_belief(variant.library, world.agent_positions(), variant.window_size);
        for (int k = 1; k < variant.window_size; ++k) {
          world.step_agents();
          update_belief(belief, world.agent_positions(), variant.library, variant.transitions,
                        variant.lane_centers_y);
        }
        const auto t0 = std::chrono::steady_clock::now();
        const CCPOMDPModel model =
            build_model(variant, PlannerKind::kIntentAware, belief, variant.default_delta, h);
        solve(model, world.ego(), use_heuristics);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        if (rep >= 0) samples.push_back(ms);
      }
      double sum = 0.0;
      for (const double v : samples) sum += v;
      cells.push_back({h, n, solves, sum / static_cast<double>(samples.size()),
                       detail::percentile(samples, 0.95)});
    }
  }
  return cells;
}

inline void write_timing_csv(std::ostream& out, const std::vector<TimingCell>& cells) {
  out << "horizon,agents,solves,mean_ms,p95_ms\n";
  for (const auto& c : cells)
    out << c.horizon << ',' << c.agents << ',' << c.solves << ','
        << detail::csv_cell(c.mean_ms) << ',' << detail::csv_cell(c.p95_ms) << '\n';
}

// gnuplot-ready (log-scale friendly) twin of the timing CSV.
inline void write_timing_dat(std::ostream& out, const std::vector<TimingCell>& cells) {
  out << "# horizon agents mean_ms p95_ms\n";
  for (const auto& c : cells)
    out << c.horizon << ' ' << c.agents << ' ' << detail::csv_cell(c.mean_ms) << ' '
        << detail::csv_cell(c.p95_ms) << '\n';
}

struct RecognitionRow {
  int trial = 0;
  int agent = 0;
  std::string truth;
  std::string estimate;
  bool correct = false;
  double displacement_m = 0.0;
};

struct RecognitionReport {
  int windows = 0;
  int correct = 0;
  double accuracy_pct = 0.0;
  double mean_displacement_m = 0.0;
  std::vector<RecognitionRow> rows;
};

// Held-out recognition study: roll fresh worlds (planner-free), filter the
// belief to the evaluation tick, then compare the maneuver argmax against
// the ground truth and the predicted mean position against the position the
// world actually reaches after the lookahead.
inline RecognitionReport run_recognition(const Scenario& scn, int worlds, uint64_t seed,
                                         int eval_tick = 15, int lookahead = -1) {
  require(worlds >= 1, "recognize: need at least one world");
  require(eval_tick >= scn.window_size - 1, "recognize: evaluation before the window fills");
  if (lookahead < 0) lookahead = scn.horizon_ticks;
  require(lookahead >= 1, "recognize: lookahead must be positive");
  RecognitionReport report;
  for (int w = 0; w < worlds; ++w) {
    World world(scn, seed, w);
    BeliefState belief = make_belief(scn.library, world.agent_positions(), scn.window_size);
    for (int k = 1; k <= eval_tick; ++k) {
      world.step_agents();
      update_belief(belief, world.agent_positions(), scn.library, scn.transitions,
                    scn.lane_centers_y);
    }
    std::vector<RecognitionRow> rows;
    std::vector<Vec2> predicted;
    for (size_t i = 0; i < belief.agents.size(); ++i) {
      RecognitionRow row;
      row.trial = w;
      row.agent = static_cast<int>(i);
      row.truth = scn.library.at(world.agents()[i].maneuver).label;
      const auto marginal = maneuver_marginal(belief.agents[i].posterior, scn.library.size());
      int top = 0;
      for (size_t m = 1; m < marginal.size(); ++m)
        if (marginal[m] > marginal[top]) top = static_cast<int>(m);
      row.estimate = scn.library.at(top).label;
      row.correct = top == world.agents()[i].maneuver;
      std::vector<Vec2> others;
      for (size_t j = 0; j < belief.agents.size(); ++j)
        if (j != i) others.push_back(belief.agents[j].position);
      const GuardContext ctx = scn.guard_context(belief.agents[i].position, others);
      const PredictionTree tree =
          predict_hybrid(belief.agents[i].posterior, belief.agents[i].position, scn.transitions,
                         scn.library, ctx, lookahead, scn.epsilon);
      predicted.push_back(predicted_mean_at(tree, lookahead));
      rows.push_back(std::move(row));
    }
    for (int k = 0; k < lookahead; ++k) world.step_agents();
    const std::vector<Vec2> positions = world.agent_positions();
    for (size_t i = 0; i < rows.size(); ++i) {
      rows[i].displacement_m = distance(predicted[i], positions[i]);
      report.windows += 1;
      report.correct += rows[i].correct ? 1 : 0;
      report.mean_displacement_m += rows[i].displacement_m;
      report.rows.push_back(std::move(rows[i]));
    }
  }
  report.accuracy_pct = 100.0 * report.correct / std::max(report.windows, 1);
  report.mean_displacement_m /= std::max(report.windows, 1);
  return report;
}

inline void write_recognition_csv(std::ostream& out, const RecognitionReport& report) {
  out << "trial,agent,truth,estimate,correct,displacement_m\n";
  for (const auto& r : report.rows)
    out << r.trial << ',' << r.agent << ',' << r.truth << ',' << r.estimate << ','
        << (r.correct ? 1 : 0) << ',' << detail::csv_cell(r.displacement_m) << '\n';
}

}  // namespace riskplan

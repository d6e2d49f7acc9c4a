// Copyright 2026 The Moral IPD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Config files, seeded sweeps and report rendering.
//
// Config files are flat `key = value` lines. Values may be double-quoted;
// '#' starts a comment. Unknown and repeated keys are errors.

#ifndef MORAL_EXPERIMENT_IO_HPP_
#define MORAL_EXPERIMENT_IO_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "moral/evaluator.hpp"
#include "moral/trainer.hpp"

namespace moral {

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

// Splits config text into entries. `source` names the file in messages.
std::vector<ConfigEntry> ParseConfigEntries(std::string_view text, const std::string& source);

RunConfig ParseRunConfig(std::string_view text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);
// Every field, one key per line; ParseRunConfig inverts it exactly.
std::string SerializeConfig(const RunConfig& cfg);

// Keys accepted by ParseRunConfig, in documentation order.
const std::vector<std::string>& RunConfigKeys();

struct SweepSpec {
  RunConfig base;
  std::vector<std::string> rewards;    // default: base.reward
  std::vector<std::string> opponents;  // default: base.opponent
  std::vector<std::string> games;      // default: base.game
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int workers = 1;
  std::string output_dir = "sweep_out";
  bool evaluate = true;  // write eval.csv for each trained policy

  void Validate() const;
};

// Base config keys plus sweep.reward, sweep.opponent, sweep.game,
// sweep.seed (comma lists), workers, evaluate.
SweepSpec ParseSweepSpec(std::string_view text, const std::string& source = "<spec>");
SweepSpec load_sweep_spec(const std::string& path);

struct SweepCell {
  std::string reward;
  std::string opponent;
  std::string game;
  std::uint64_t seed = 0;

  // r-<reward>.o-<opponent>.g-<game>.s-<seed>
  std::string DirName() const;
  bool operator==(const SweepCell&) const = default;
};

// Reward-major Cartesian product.
std::vector<SweepCell> EnumerateCells(const SweepSpec& spec);
RunConfig CellConfig(const SweepSpec& spec, const SweepCell& cell);

struct CellResult {
  SweepCell cell;
  bool ok = false;
  std::string error;
};

struct SweepResult {
  std::vector<CellResult> cells;
  long failures() const;
};

inline constexpr const char* kEvalFile = "eval.csv";
inline constexpr const char* kSweepSummaryFile = "sweep_summary.csv";
inline constexpr const char* kPartnerDir = "partner";

// Trains (and evaluates) one cell into its directory. Throws on failure.
void run_cell(const SweepSpec& spec, const SweepCell& cell);

// Cells run on up to spec.workers threads; a failing cell is recorded and the
// rest continue. Writes sweep_summary.csv.
SweepResult run_sweep(const SweepSpec& spec);
// Same cells, one at a time.
SweepResult run_sweep_serial(const SweepSpec& spec);

// Writes config.txt, trajectory.jsonl, metrics.csv and policy.txt.
RunArtifacts TrainToDirectory(RunConfig cfg);

struct ReportSpec {
  std::vector<std::string> run_roots;  // searched recursively for metrics.csv
  bool csv = true;
  bool svg = true;
  int window = 10;
  std::string output_dir = "report";

  void Validate() const;
};

// Trailing moving average; the first window-1 points average what exists.
std::vector<double> MovingAverage(std::span<const double> values, int window);

struct RunLog {
  std::string dir;
  RunConfig config;
  std::vector<EpisodeMetrics> metrics;
};

// Reads config.txt and metrics.csv from a run directory.
RunLog LoadRunLog(const std::string& dir);
std::vector<std::string> FindRunDirs(const std::vector<std::string>& roots);

// Name shared by the seeds of one experimental condition.
std::string ConditionName(const RunConfig& cfg);

// Per-episode smoothed curves averaged over runs: `episode` then
// <metric>_mean,<metric>_ci_low,<metric>_ci_high for each metric.
std::string CurveCsv(const std::vector<RunLog>& runs, int window);
const std::vector<std::string>& CurveMetrics();

struct ReportFiles {
  std::vector<std::string> written;
};

ReportFiles render_report(const ReportSpec& spec);

// Self-contained SVG charts.
struct ChartSeries {
  std::string name;
  std::vector<double> values;
  std::vector<double> low;   // optional error band / bar
  std::vector<double> high;
};

std::string LineChartSvg(const std::string& title, const std::vector<double>& xs,
                         const std::vector<ChartSeries>& series, const std::string& x_label,
                         const std::string& y_label);
std::string BarChartSvg(const std::string& title, const std::vector<std::string>& categories,
                        const std::vector<ChartSeries>& series, const std::string& y_label);

// Bar chart of an eval report, one chart per metric family ("regret",
// "actions").
std::string EvalChartSvg(const std::vector<EvalCsvRow>& rows, const std::string& family);

void WriteTextFile(const std::string& path, const std::string& text);
std::string ReadTextFile(const std::string& path);

}  // namespace moral

#endif  // MORAL_EXPERIMENT_IO_HPP_

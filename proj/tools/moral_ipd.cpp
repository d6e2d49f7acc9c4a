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

// moral_ipd command-line entry point.
//
// Exit codes: 0 success, 1 invalid input, 2 runtime failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "moral/evaluator.hpp"
#include "moral/experiment_io.hpp"

namespace {

namespace fs = std::filesystem;
using namespace moral;

void PrintSummary(const std::string& label, const RunArtifacts& art) {
  const long total = static_cast<long>(art.episode_metrics.size());
  const long first = std::max<long>(0, total - 100);
  const auto s = SummarizeEpisodes(art.episode_metrics, first, total);
  std::cout << label << ": episodes " << total << ", last " << (total - first)
            << " episodes: norm violations " << FormatDouble(s.norm_violation_rate)
            << ", mutual cooperation " << FormatDouble(s.mutual_cooperation_rate)
            << ", defection " << FormatDouble(s.defection_rate) << ", illegal "
            << FormatDouble(s.illegal_rate) << (art.non_convergent ? " (non-convergent)" : "")
            << "\n";
}

int Train(const std::string& config, std::optional<std::uint64_t> seed,
          const std::string& out) {
  RunConfig cfg = load_config(config);
  if (seed) cfg.seed = *seed;
  if (!out.empty()) cfg.output_dir = out;
  if (cfg.output_dir.empty()) cfg.output_dir = "runs/" + ConditionName(cfg) + ".s-" + std::to_string(cfg.seed);
  const RunArtifacts art = TrainToDirectory(cfg);
  PrintSummary(cfg.output_dir, art);
  return 0;
}

int Cotrain(const std::string& config_a, const std::string& config_b, const std::string& out) {
  RunConfig a = load_config(config_a);
  RunConfig b = load_config(config_b);
  if (!out.empty()) {
    a.output_dir = (fs::path(out) / "a").string();
    b.output_dir = (fs::path(out) / "b").string();
  }
  if (a.output_dir.empty() || b.output_dir.empty() || a.output_dir == b.output_dir) {
    throw ValidationError("co-training needs distinct output_dir values (or --out)");
  }
  WriteTextFile((fs::path(a.output_dir) / kConfigFile).string(), SerializeConfig(a));
  WriteTextFile((fs::path(b.output_dir) / kConfigFile).string(), SerializeConfig(b));
  const auto [art_a, art_b] = run_cotraining(a, b);
  PrintSummary(a.output_dir, art_a);
  PrintSummary(b.output_dir, art_b);
  return 0;
}

struct EvalArgs {
  std::string policy;
  std::string games = "IPD,StagHunt,Chicken,BachStravinsky,DefectiveCoordination";
  bool swap_tokens = false;
  std::string endpoint;
  std::uint64_t seed = 0;
  int episodes = 10;
  int steps = 5;
  std::string opponent = "random";
  std::string trained_kind;
  std::string out;
  std::string svg_dir;
};

int Eval(const EvalArgs& args) {
  EvalProtocol protocol;
  protocol.games = {};
  for (const auto& g : Split(args.games, ',')) {
    const std::string name(Trim(g));
    if (fs::exists(name)) {
      protocol.custom_games.push_back(LoadGameTable(name));
    } else {
      protocol.games.push_back(name);
    }
  }
  protocol.seed = args.seed;
  protocol.episodes = args.episodes;
  protocol.steps_per_episode = args.steps;
  protocol.opponent = ParseOpponent(args.opponent);
  protocol.trained_kind = args.trained_kind;

  std::optional<Policy> policy;
  std::unique_ptr<LlmGateway> gateway;
  std::unique_ptr<Agent> agent;
  if (!args.endpoint.empty()) {
    const RunConfig ep = load_config(args.endpoint);
    gateway = std::make_unique<LlmGateway>(ep.endpoint);
    agent = std::make_unique<RemoteLlmAgent>(*gateway);
    protocol.run_id = ep.endpoint.model;
  } else {
    if (args.policy.empty()) throw ValidationError("eval needs --policy or --endpoint");
    policy = LoadPolicy(args.policy);
    agent = std::make_unique<TabularAgent>(*policy);
    protocol.run_id = fs::path(args.policy).parent_path().filename().string();
    if (protocol.run_id.empty()) protocol.run_id = fs::path(args.policy).stem().string();
  }
  if (args.swap_tokens) protocol.run_id += "+swapped";

  const EvalReport report = permutation_probe(*agent, protocol, args.swap_tokens);
  const std::string csv = EvalReportCsv(report);
  if (args.out.empty()) {
    std::cout << csv;
  } else {
    WriteTextFile(args.out, csv);
  }
  if (!args.svg_dir.empty()) {
    const auto rows = ParseEvalCsv(csv);
    WriteTextFile((fs::path(args.svg_dir) / "eval_regret.svg").string(), EvalChartSvg(rows, "regret"));
    WriteTextFile((fs::path(args.svg_dir) / "eval_actions.svg").string(), EvalChartSvg(rows, "actions"));
  }
  return 0;
}

int Sweep(const std::string& spec_path, std::optional<int> workers, bool serial) {
  SweepSpec spec = load_sweep_spec(spec_path);
  if (workers) spec.workers = *workers;
  const SweepResult result = serial ? run_sweep_serial(spec) : run_sweep(spec);
  for (const auto& c : result.cells) {
    if (!c.ok) std::cerr << "cell " << c.cell.DirName() << " failed: " << c.error << "\n";
  }
  std::cout << (result.cells.size() - result.failures()) << " of " << result.cells.size()
            << " cells succeeded; summary in "
            << (fs::path(spec.output_dir) / kSweepSummaryFile).string() << "\n";
  return result.failures() == 0 ? 0 : 2;
}

int Report(const std::string& runs, const std::string& format, const std::string& out,
           int window) {
  ReportSpec spec;
  spec.run_roots.clear();
  for (const auto& r : Split(runs, ',')) spec.run_roots.emplace_back(Trim(r));
  spec.csv = spec.svg = false;
  for (const auto& f : Split(format, ',')) {
    const auto t = Trim(f);
    if (t == "csv") {
      spec.csv = true;
    } else if (t == "svg") {
      spec.svg = true;
    } else {
      throw ValidationError("unknown format '" + std::string(t) + "'; use csv, svg");
    }
  }
  spec.output_dir = out;
  spec.window = window;
  const ReportFiles files = render_report(spec);
  for (const auto& f : files.written) std::cout << f << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moral-reward fine-tuning of a tabular agent on iterated matrix games"};
  app.require_subcommand(1);

  std::string config, out, config_a, config_b, spec_path, runs, format = "csv,svg",
                                                              report_out = "report";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool serial = false;
  int window = 10;
  EvalArgs eval_args;

  auto* train = app.add_subcommand("train", "Train against a fixed opponent or an endpoint");
  train->add_option("--config", config, "Run config file")->required();
  train->add_option("--seed", seed, "Override the config seed");
  train->add_option("--out", out, "Output directory");

  auto* cotrain = app.add_subcommand("cotrain", "Train two learners against each other");
  cotrain->add_option("--config-a", config_a, "Config of learner A")->required();
  cotrain->add_option("--config-b", config_b, "Config of learner B")->required();
  cotrain->add_option("--out", out, "Output directory (a/ and b/ inside)");

  auto* eval = app.add_subcommand("eval", "Evaluate a frozen policy or an endpoint");
  eval->add_option("--policy", eval_args.policy, "policy.txt from a training run");
  eval->add_option("--games", eval_args.games, "Comma list of game names or table files");
  eval->add_flag("--swap-tokens", eval_args.swap_tokens, "Use action2 = C, action1 = D");
  eval->add_option("--endpoint", eval_args.endpoint, "Config file with endpoint keys");
  eval->add_option("--seed", eval_args.seed, "Evaluation seed");
  eval->add_option("--episodes", eval_args.episodes, "Episodes per game");
  eval->add_option("--steps", eval_args.steps, "Steps per episode");
  eval->add_option("--opponent", eval_args.opponent, "tft, ac, ad or random");
  eval->add_option("--trained-kind", eval_args.trained_kind, "Label for the report");
  eval->add_option("--out", eval_args.out, "CSV path (default: stdout)");
  eval->add_option("--svg", eval_args.svg_dir, "Directory for bar charts");

  auto* sweep = app.add_subcommand("sweep", "Run every cell of a sweep spec");
  sweep->add_option("--spec", spec_path, "Sweep spec file")->required();
  sweep->add_option("--workers", workers, "Concurrent cells");
  sweep->add_flag("--serial", serial, "Run cells one at a time");

  auto* report = app.add_subcommand("report", "Aggregate run directories into CSV and SVG");
  report->add_option("--runs", runs, "Comma list of directories to search")->required();
  report->add_option("--format", format, "csv, svg or csv,svg");
  report->add_option("--out", report_out, "Output directory");
  report->add_option("--window", window, "Moving-average window");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*train) return Train(config, seed, out);
    if (*cotrain) return Cotrain(config_a, config_b, out);
    if (*eval) return Eval(eval_args);
    if (*sweep) return Sweep(spec_path, workers, serial);
    if (*report) return Report(runs, format, report_out, window);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

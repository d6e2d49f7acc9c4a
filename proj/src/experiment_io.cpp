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

#include "moral/experiment_io.hpp"

#include <algorithm>
#include <charconv>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace moral {

namespace fs = std::filesystem;

void WriteTextFile(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw RuntimeFailure("cannot create " + p.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out << text;
  if (!out) throw RuntimeFailure("error writing " + path);
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<ConfigEntry> ParseConfigEntries(std::string_view text, const std::string& source) {
  std::vector<ConfigEntry> entries;
  std::set<std::string> seen;
  int line_no = 0;
  for (const auto& raw : Split(text, '\n')) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    // Drop a trailing comment that is not inside quotes.
    std::string line;
    bool quoted = false;
    for (char c : raw) {
      if (c == '"') quoted = !quoted;
      if (c == '#' && !quoted) break;
      line.push_back(c);
    }
    if (quoted) throw ValidationError(where + ": unterminated quote");
    const auto body = Trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError(where + ": expected `key = value`");
    }
    std::string key(Trim(body.substr(0, eq)));
    std::string_view value = Trim(body.substr(eq + 1));
    if (key.empty()) throw ValidationError(where + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    } else if (value.find('"') != std::string_view::npos) {
      throw ValidationError(where + ": stray quote in value of `" + key + "`");
    }
    if (!seen.insert(key).second) {
      throw ValidationError(where + ": key `" + key + "` given twice");
    }
    entries.push_back({key, std::string(value), line_no});
  }
  return entries;
}

namespace {

std::uint64_t ParseU64(std::string_view text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || text.empty()) {
    throw ValidationError("not a non-negative integer: '" + std::string(text) + "'");
  }
  return v;
}

int ParseSmallInt(std::string_view text) {
  const long long v = ParseInt(text);
  if (v < -2147483647LL || v > 2147483647LL) {
    throw ValidationError("integer out of range: '" + std::string(text) + "'");
  }
  return static_cast<int>(v);
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& RunConfigSetters() {
  static const std::vector<std::pair<std::string, Setter>> setters = {
      {"game", [](RunConfig& c, const std::string& v) { c.game = v; }},
      {"game_file", [](RunConfig& c, const std::string& v) { c.game_file = v; }},
      {"opponent", [](RunConfig& c, const std::string& v) { c.opponent = OpponentSpec::Parse(v); }},
      {"reward", [](RunConfig& c, const std::string& v) { c.reward = v; }},
      {"switch_episode", [](RunConfig& c, const std::string& v) { c.switch_episode = ParseInt(v); }},
      {"xi", [](RunConfig& c, const std::string& v) { c.reward_params.xi = ParseDouble(v); }},
      {"r_illegal",
       [](RunConfig& c, const std::string& v) { c.reward_params.r_illegal = ParseDouble(v); }},
      {"episodes", [](RunConfig& c, const std::string& v) { c.episodes = ParseInt(v); }},
      {"batch_size", [](RunConfig& c, const std::string& v) { c.batch_size = ParseSmallInt(v); }},
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = ParseU64(v); }},
      {"output_dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; }},
      {"clip_epsilon", [](RunConfig& c, const std::string& v) { c.agent.clip_epsilon = ParseDouble(v); }},
      {"learning_rate",
       [](RunConfig& c, const std::string& v) { c.agent.learning_rate = ParseDouble(v); }},
      {"update_epochs",
       [](RunConfig& c, const std::string& v) { c.agent.update_epochs = ParseSmallInt(v); }},
      {"kl_target", [](RunConfig& c, const std::string& v) { c.agent.kl_target = ParseDouble(v); }},
      {"kl_coef_init",
       [](RunConfig& c, const std::string& v) { c.agent.kl_coef_init = ParseDouble(v); }},
      {"kl_gain", [](RunConfig& c, const std::string& v) { c.agent.kl_gain = ParseDouble(v); }},
      {"kl_clamp", [](RunConfig& c, const std::string& v) { c.agent.kl_clamp = ParseDouble(v); }},
      {"distractors",
       [](RunConfig& c, const std::string& v) { c.agent.distractor_count = ParseSmallInt(v); }},
      {"c_token", [](RunConfig& c, const std::string& v) { c.c_token = v; }},
      {"d_token", [](RunConfig& c, const std::string& v) { c.d_token = v; }},
      {"base_url", [](RunConfig& c, const std::string& v) { c.endpoint.base_url = v; }},
      {"model", [](RunConfig& c, const std::string& v) { c.endpoint.model = v; }},
      {"api_key_env", [](RunConfig& c, const std::string& v) { c.endpoint.api_key_env = v; }},
      {"timeout_s", [](RunConfig& c, const std::string& v) { c.endpoint.timeout_s = ParseDouble(v); }},
      {"max_retries",
       [](RunConfig& c, const std::string& v) { c.endpoint.max_retries = ParseSmallInt(v); }},
      {"temperature",
       [](RunConfig& c, const std::string& v) { c.endpoint.temperature = ParseDouble(v); }},
      {"max_output_tokens",
       [](RunConfig& c, const std::string& v) { c.endpoint.max_output_tokens = ParseSmallInt(v); }},
      {"backoff_base_s",
       [](RunConfig& c, const std::string& v) { c.endpoint.backoff_base_s = ParseDouble(v); }},
      {"backoff_factor",
       [](RunConfig& c, const std::string& v) { c.endpoint.backoff_factor = ParseDouble(v); }},
      {"max_in_flight",
       [](RunConfig& c, const std::string& v) { c.endpoint.max_in_flight = ParseSmallInt(v); }},
  };
  return setters;
}

const Setter* FindSetter(const std::string& key) {
  for (const auto& [k, s] : RunConfigSetters()) {
    if (k == key) return &s;
  }
  return nullptr;
}

void ApplyEntry(RunConfig& cfg, const ConfigEntry& e, const std::string& source) {
  const Setter* setter = FindSetter(e.key);
  if (!setter) {
    throw ValidationError(source + ":" + std::to_string(e.line) + ": unknown key `" + e.key + "`");
  }
  try {
    (*setter)(cfg, e.value);
  } catch (const Error& err) {
    throw ValidationError(source + ":" + std::to_string(e.line) + ": bad value for `" + e.key +
                          "`: " + err.what());
  }
}

void ValidateWithSource(const RunConfig& cfg, const std::string& source) {
  try {
    cfg.Validate();
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

}  // namespace

const std::vector<std::string>& RunConfigKeys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [k, s] : RunConfigSetters()) out.push_back(k);
    return out;
  }();
  return keys;
}

RunConfig ParseRunConfig(std::string_view text, const std::string& source) {
  RunConfig cfg;
  for (const auto& e : ParseConfigEntries(text, source)) ApplyEntry(cfg, e, source);
  ValidateWithSource(cfg, source);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  return ParseRunConfig(ReadTextFile(path), path);
}

std::string SerializeConfig(const RunConfig& c) {
  std::ostringstream out;
  auto str = [&](const char* k, const std::string& v) { out << k << " = \"" << v << "\"\n"; };
  auto num = [&](const char* k, double v) { out << k << " = " << FormatDouble(v) << "\n"; };
  auto integer = [&](const char* k, auto v) { out << k << " = " << v << "\n"; };
  str("game", c.game);
  str("game_file", c.game_file);
  str("opponent", c.opponent.Name());
  str("reward", c.reward);
  if (c.switch_episode) integer("switch_episode", *c.switch_episode);
  num("xi", c.reward_params.xi);
  num("r_illegal", c.reward_params.r_illegal);
  integer("episodes", c.episodes);
  if (c.batch_size) integer("batch_size", *c.batch_size);
  integer("seed", c.seed);
  str("output_dir", c.output_dir);
  num("clip_epsilon", c.agent.clip_epsilon);
  num("learning_rate", c.agent.learning_rate);
  integer("update_epochs", c.agent.update_epochs);
  num("kl_target", c.agent.kl_target);
  num("kl_coef_init", c.agent.kl_coef_init);
  num("kl_gain", c.agent.kl_gain);
  num("kl_clamp", c.agent.kl_clamp);
  integer("distractors", c.agent.distractor_count);
  str("c_token", c.c_token);
  str("d_token", c.d_token);
  str("base_url", c.endpoint.base_url);
  str("model", c.endpoint.model);
  str("api_key_env", c.endpoint.api_key_env);
  num("timeout_s", c.endpoint.timeout_s);
  integer("max_retries", c.endpoint.max_retries);
  num("temperature", c.endpoint.temperature);
  integer("max_output_tokens", c.endpoint.max_output_tokens);
  num("backoff_base_s", c.endpoint.backoff_base_s);
  num("backoff_factor", c.endpoint.backoff_factor);
  integer("max_in_flight", c.endpoint.max_in_flight);
  return out.str();
}


void SweepSpec::Validate() const {
  if (workers < 1) throw ValidationError("workers must be >= 1");
  if (output_dir.empty()) throw ValidationError("sweep output_dir is empty");
  if (rewards.empty() || opponents.empty() || games.empty() || seeds.empty()) {
    throw ValidationError("every sweep axis needs at least one value");
  }
  for (const auto& c : EnumerateCells(*this)) CellConfig(*this, c).Validate();
  std::set<std::string> names;
  for (const auto& c : EnumerateCells(*this)) {
    if (!names.insert(c.DirName()).second) {
      throw ValidationError("sweep axes repeat a value: " + c.DirName());
    }
  }
}

namespace {

std::vector<std::string> ListValue(const std::string& value) {
  std::vector<std::string> out;
  for (const auto& part : Split(value, ',')) {
    const auto t = Trim(part);
    if (t.empty()) throw ValidationError("empty item in list '" + value + "'");
    out.emplace_back(t);
  }
  return out;
}

}  // namespace

SweepSpec ParseSweepSpec(std::string_view text, const std::string& source) {
  SweepSpec spec;
  std::optional<std::vector<std::string>> rewards, opponents, games;
  for (const auto& e : ParseConfigEntries(text, source)) {
    const std::string where = source + ":" + std::to_string(e.line);
    try {
      if (e.key == "sweep.reward") {
        rewards = ListValue(e.value);
      } else if (e.key == "sweep.opponent") {
        opponents = ListValue(e.value);
      } else if (e.key == "sweep.game") {
        games = ListValue(e.value);
      } else if (e.key == "sweep.seed") {
        spec.seeds.clear();
        for (const auto& s : ListValue(e.value)) spec.seeds.push_back(ParseU64(s));
      } else if (e.key == "workers") {
        spec.workers = ParseSmallInt(e.value);
      } else if (e.key == "evaluate") {
        if (e.value != "true" && e.value != "false") {
          throw ValidationError("expected true or false");
        }
        spec.evaluate = e.value == "true";
      } else if (e.key == "output_dir") {
        spec.output_dir = e.value;
      } else if (FindSetter(e.key)) {
        ApplyEntry(spec.base, e, source);
      } else {
        throw ValidationError("unknown key `" + e.key + "`");
      }
    } catch (const ValidationError& err) {
      const std::string msg = err.what();
      if (msg.rfind(source, 0) == 0) throw;
      throw ValidationError(where + ": " + msg);
    }
  }
  spec.rewards = rewards.value_or(std::vector<std::string>{spec.base.reward});
  spec.opponents = opponents.value_or(std::vector<std::string>{spec.base.opponent.Name()});
  spec.games = games.value_or(std::vector<std::string>{spec.base.game});
  try {
    spec.Validate();
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return spec;
}

SweepSpec load_sweep_spec(const std::string& path) {
  return ParseSweepSpec(ReadTextFile(path), path);
}

std::string SweepCell::DirName() const {
  return "r-" + reward + ".o-" + opponent + ".g-" + game + ".s-" + std::to_string(seed);
}

std::vector<SweepCell> EnumerateCells(const SweepSpec& spec) {
  std::vector<SweepCell> cells;
  for (const auto& r : spec.rewards) {
    for (const auto& o : spec.opponents) {
      for (const auto& g : spec.games) {
        for (auto s : spec.seeds) cells.push_back({r, o, g, s});
      }
    }
  }
  return cells;
}

RunConfig CellConfig(const SweepSpec& spec, const SweepCell& cell) {
  RunConfig cfg = spec.base;
  cfg.reward = cell.reward;
  cfg.opponent = OpponentSpec::Parse(cell.opponent);
  cfg.game = cell.game;
  cfg.seed = cell.seed;
  cfg.output_dir = (fs::path(spec.output_dir) / cell.DirName()).string();
  return cfg;
}

long SweepResult::failures() const {
  return std::count_if(cells.begin(), cells.end(), [](const auto& c) { return !c.ok; });
}

RunArtifacts TrainToDirectory(RunConfig cfg) {
  if (cfg.output_dir.empty()) throw ValidationError("output_dir is empty");
  cfg.Validate();
  WriteTextFile((fs::path(cfg.output_dir) / kConfigFile).string(), SerializeConfig(cfg));
  return run_training(cfg);
}

namespace {

void EvaluateInto(const Policy& policy, const RunConfig& cfg, const std::string& dir,
                  const std::string& run_id) {
  EvalProtocol protocol;
  protocol.seed = cfg.seed;
  protocol.params = cfg.reward_params;
  protocol.run_id = run_id;
  protocol.trained_kind = cfg.reward;
  const EvalReport report = evaluate(policy, protocol);
  WriteTextFile((fs::path(dir) / kEvalFile).string(), EvalReportCsv(report));
}

}  // namespace

void run_cell(const SweepSpec& spec, const SweepCell& cell) {
  RunConfig cfg = CellConfig(spec, cell);
  if (cfg.opponent.mode == OpponentSpec::Mode::kLearner) {
    RunConfig partner = cfg;
    partner.seed = MixSeed(cfg.seed);
    partner.output_dir = (fs::path(cfg.output_dir) / kPartnerDir).string();
    WriteTextFile((fs::path(cfg.output_dir) / kConfigFile).string(), SerializeConfig(cfg));
    WriteTextFile((fs::path(partner.output_dir) / kConfigFile).string(),
                  SerializeConfig(partner));
    auto [a, b] = run_cotraining(cfg, partner);
    if (spec.evaluate) {
      EvaluateInto(a.final_policy, cfg, cfg.output_dir, cell.DirName());
      EvaluateInto(b.final_policy, partner, partner.output_dir,
                   cell.DirName() + "/" + kPartnerDir);
    }
    return;
  }
  const RunArtifacts art = TrainToDirectory(cfg);
  if (spec.evaluate) EvaluateInto(art.final_policy, cfg, cfg.output_dir, cell.DirName());
}

namespace {

CellResult RunCellGuarded(const SweepSpec& spec, const SweepCell& cell) {
  try {
    run_cell(spec, cell);
    return {cell, true, {}};
  } catch (const std::exception& e) {
    return {cell, false, e.what()};
  }
}

std::string CsvField(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

void WriteSummary(const SweepSpec& spec, const SweepResult& result) {
  std::string out = "cell,status,error\n";
  for (const auto& c : result.cells) {
    out += c.cell.DirName() + "," + (c.ok ? "ok" : "failed") + "," + CsvField(c.error) + "\n";
  }
  WriteTextFile((fs::path(spec.output_dir) / kSweepSummaryFile).string(), out);
}

}  // namespace

SweepResult run_sweep_serial(const SweepSpec& spec) {
  spec.Validate();
  SweepResult result;
  for (const auto& cell : EnumerateCells(spec)) result.cells.push_back(RunCellGuarded(spec, cell));
  WriteSummary(spec, result);
  return result;
}

SweepResult run_sweep(const SweepSpec& spec) {
  spec.Validate();
  const auto cells = EnumerateCells(spec);
  SweepResult result;
  result.cells.resize(cells.size());
  const long n = static_cast<long>(cells.size());
#pragma omp parallel for num_threads(spec.workers) schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) result.cells[i] = RunCellGuarded(spec, cells[i]);
  WriteSummary(spec, result);
  return result;
}


void ReportSpec::Validate() const {
  if (window < 1) throw ValidationError("smoothing window must be >= 1");
  if (run_roots.empty()) throw ValidationError("no run directories given");
  if (!csv && !svg) throw ValidationError("no output format selected");
  if (output_dir.empty()) throw ValidationError("report output_dir is empty");
}

std::vector<double> MovingAverage(std::span<const double> values, int window) {
  if (window < 1) throw ValidationError("window must be >= 1");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t first = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = first; j <= i; ++j) sum += values[j];
    out[i] = sum / static_cast<double>(i - first + 1);
  }
  return out;
}

RunLog LoadRunLog(const std::string& dir) {
  RunLog log;
  log.dir = dir;
  const auto config_path = (fs::path(dir) / kConfigFile).string();
  log.config = load_config(config_path);
  const auto metrics_path = (fs::path(dir) / kMetricsFile).string();
  const std::string text = ReadTextFile(metrics_path);
  int line_no = 0;
  for (const auto& line : Split(text, '\n')) {
    ++line_no;
    const auto t = Trim(line);
    if (t.empty()) continue;
    if (line_no == 1) {
      if (t != MetricsCsvHeader()) {
        throw ValidationError(metrics_path + ": unexpected header");
      }
      continue;
    }
    try {
      log.metrics.push_back(ParseMetricsCsvRow(t));
    } catch (const Error& e) {
      throw ValidationError(metrics_path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (log.metrics.empty()) throw ValidationError(metrics_path + ": no episodes");
  return log;
}

std::vector<std::string> FindRunDirs(const std::vector<std::string>& roots) {
  std::vector<std::string> dirs;
  for (const auto& root : roots) {
    if (!fs::is_directory(root)) throw ValidationError("not a directory: " + root);
    if (fs::exists(fs::path(root) / kMetricsFile)) dirs.push_back(fs::path(root).string());
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.is_directory() && fs::exists(entry.path() / kMetricsFile)) {
        dirs.push_back(entry.path().string());
      }
    }
  }
  std::sort(dirs.begin(), dirs.end());
  dirs.erase(std::unique(dirs.begin(), dirs.end()), dirs.end());
  return dirs;
}

std::string ConditionName(const RunConfig& cfg) {
  const std::string game =
      cfg.game_file.empty() ? cfg.game : fs::path(cfg.game_file).stem().string();
  return cfg.reward + "." + cfg.opponent.Name() + "." + game;
}

const std::vector<std::string>& CurveMetrics() {
  static const std::vector<std::string> names = {
      "mean_reward",    "moral_game",     "moral_deontological", "moral_utilitarian",
      "moral_game_deontological", "frac_c_after_c", "frac_d_after_c", "frac_c_after_d",
      "frac_d_after_d", "frac_illegal",   "frac_mutual_cooperation"};
  return names;
}

namespace {

double CurveValue(const EpisodeMetrics& m, std::size_t metric) {
  const double steps = m.steps > 0 ? m.steps : 1;
  switch (metric) {
    case 0: return m.mean_reward;
    case 1: case 2: case 3: case 4: return m.moral_mean[metric - 1];
    case 5: return m.c_after_c / steps;
    case 6: return m.d_after_c / steps;
    case 7: return m.c_after_d / steps;
    case 8: return m.d_after_d / steps;
    case 9: return m.illegal / steps;
    default: return m.mutual_cooperation / steps;
  }
}

// [metric][episode] -> mean with CI over runs, after smoothing each run.
std::vector<std::vector<MetricValue>> CurveTable(const std::vector<RunLog>& runs, int window) {
  const std::size_t episodes = runs.front().metrics.size();
  for (const auto& r : runs) {
    if (r.metrics.size() != episodes) {
      throw ValidationError(r.dir + ": episode count differs from " + runs.front().dir);
    }
  }
  const std::size_t n_metrics = CurveMetrics().size();
  std::vector<std::vector<MetricValue>> table(n_metrics, std::vector<MetricValue>(episodes));
  for (std::size_t k = 0; k < n_metrics; ++k) {
    std::vector<std::vector<double>> smoothed;
    for (const auto& r : runs) {
      std::vector<double> raw(episodes);
      for (std::size_t e = 0; e < episodes; ++e) raw[e] = CurveValue(r.metrics[e], k);
      smoothed.push_back(MovingAverage(raw, window));
    }
    for (std::size_t e = 0; e < episodes; ++e) {
      std::vector<double> at(runs.size());
      for (std::size_t r = 0; r < runs.size(); ++r) at[r] = smoothed[r][e];
      table[k][e] = MeanWithCi(at);
    }
  }
  return table;
}

}  // namespace

std::string CurveCsv(const std::vector<RunLog>& runs, int window) {
  if (runs.empty()) throw ValidationError("no runs to aggregate");
  const auto table = CurveTable(runs, window);
  std::string out = "episode";
  for (const auto& m : CurveMetrics()) out += "," + m + "_mean," + m + "_ci_low," + m + "_ci_high";
  out += "\n";
  for (std::size_t e = 0; e < table.front().size(); ++e) {
    out += std::to_string(runs.front().metrics[e].episode);
    for (const auto& col : table) {
      out += "," + FormatDouble(col[e].mean) + "," + FormatDouble(col[e].ci_low) + "," +
             FormatDouble(col[e].ci_high);
    }
    out += "\n";
  }
  return out;
}


namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 190, kTop = 40, kBottom = 60;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string Esc(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const {
    return kLeft + (x1 == x0 ? 0.5 : (x - x0) / (x1 - x0)) * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    return kHeight - kBottom - (y1 == y0 ? 0.5 : (y - y0) / (y1 - y0)) * (kHeight - kTop - kBottom);
  }
};

void OpenSvg(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << Esc(title) << "</text>\n";
}

void YAxis(std::ostringstream& out, const Frame& f, const std::string& label) {
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = f.y0 + (f.y1 - f.y0) * i / 4.0;
    const double y = f.py(v);
    out << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << Num(y) << "\" x2=\"" << kLeft
        << "\" y2=\"" << Num(y) << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << kLeft - 6 << "\" y=\"" << Num(y + 4)
        << "\" text-anchor=\"end\">" << FormatDouble(std::round(v * 1000) / 1000) << "</text>\n";
  }
  out << "<text transform=\"translate(16," << (kTop + kHeight - kBottom) / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << Esc(label) << "</text>\n";
}

void Legend(std::ostringstream& out, const std::vector<ChartSeries>& series) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = kTop + 16.0 * i;
    out << "<rect x=\"" << kWidth - kRight + 12 << "\" y=\"" << y << "\" width=\"10\" height=\"10\" fill=\""
        << kPalette[i % 10] << "\"/>\n<text x=\"" << kWidth - kRight + 26 << "\" y=\"" << y + 9
        << "\">" << Esc(series[i].name) << "</text>\n";
  }
}

void Range(const std::vector<ChartSeries>& series, double& lo, double& hi) {
  lo = 0.0;
  hi = 0.0;
  bool any = false;
  auto take = [&](double v) {
    if (!any) {
      lo = hi = v;
      any = true;
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  };
  for (const auto& s : series) {
    for (double v : s.values) take(v);
    for (double v : s.low) take(v);
    for (double v : s.high) take(v);
  }
  lo = std::min(lo, 0.0);
  if (hi == lo) hi = lo + 1.0;
}

}  // namespace

std::string LineChartSvg(const std::string& title, const std::vector<double>& xs,
                         const std::vector<ChartSeries>& series, const std::string& x_label,
                         const std::string& y_label) {
  double lo, hi;
  Range(series, lo, hi);
  const Frame f{xs.empty() ? 0.0 : xs.front(), xs.empty() ? 1.0 : xs.back(), lo, hi};
  std::ostringstream out;
  OpenSvg(out, title);
  YAxis(out, f, y_label);
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\""
      << kWidth - kRight << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = f.x0 + (f.x1 - f.x0) * i / 4.0;
    out << "<text x=\"" << Num(f.px(v)) << "\" y=\"" << kHeight - kBottom + 16
        << "\" text-anchor=\"middle\">" << FormatDouble(std::round(v)) << "</text>\n";
  }
  out << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 18
      << "\" text-anchor=\"middle\">" << Esc(x_label) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % 10];
    if (s.low.size() == xs.size() && s.high.size() == xs.size() && !xs.empty()) {
      out << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (std::size_t j = 0; j < xs.size(); ++j) out << Num(f.px(xs[j])) << "," << Num(f.py(s.high[j])) << " ";
      for (std::size_t j = xs.size(); j-- > 0;) out << Num(f.px(xs[j])) << "," << Num(f.py(s.low[j])) << " ";
      out << "\"/>\n";
    }
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t j = 0; j < xs.size() && j < s.values.size(); ++j) {
      out << Num(f.px(xs[j])) << "," << Num(f.py(s.values[j])) << " ";
    }
    out << "\"/>\n";
  }
  Legend(out, series);
  out << "</svg>\n";
  return out.str();
}

std::string BarChartSvg(const std::string& title, const std::vector<std::string>& categories,
                        const std::vector<ChartSeries>& series, const std::string& y_label) {
  double lo, hi;
  Range(series, lo, hi);
  const Frame f{0.0, 1.0, lo, hi};
  std::ostringstream out;
  OpenSvg(out, title);
  YAxis(out, f, y_label);
  const double plot_w = kWidth - kLeft - kRight;
  const double group_w = categories.empty() ? plot_w : plot_w / categories.size();
  const double bar_w = series.empty() ? 0.0 : group_w * 0.8 / series.size();
  const double base = f.py(0.0);
  out << "<line x1=\"" << kLeft << "\" y1=\"" << Num(base) << "\" x2=\"" << kWidth - kRight
      << "\" y2=\"" << Num(base) << "\" stroke=\"black\"/>\n";
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = kLeft + group_w * c;
    out << "<text x=\"" << Num(gx + group_w / 2) << "\" y=\"" << kHeight - kBottom + 16
        << "\" text-anchor=\"middle\">" << Esc(categories[c]) << "</text>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
      const auto& s = series[i];
      if (c >= s.values.size()) continue;
      const double x = gx + group_w * 0.1 + bar_w * i;
      const double y = f.py(s.values[c]);
      out << "<rect x=\"" << Num(x) << "\" y=\"" << Num(std::min(y, base)) << "\" width=\""
          << Num(bar_w) << "\" height=\"" << Num(std::abs(base - y)) << "\" fill=\""
          << kPalette[i % 10] << "\"/>\n";
      if (c < s.low.size() && c < s.high.size()) {
        const double mx = x + bar_w / 2;
        out << "<line x1=\"" << Num(mx) << "\" y1=\"" << Num(f.py(s.low[c])) << "\" x2=\""
            << Num(mx) << "\" y2=\"" << Num(f.py(s.high[c])) << "\" stroke=\"black\"/>\n";
      }
    }
  }
  Legend(out, series);
  out << "</svg>\n";
  return out.str();
}

std::string EvalChartSvg(const std::vector<EvalCsvRow>& rows, const std::string& family) {
  if (family != "regret" && family != "actions") {
    throw ValidationError("unknown chart family '" + family + "'");
  }
  auto in_family = [&](const std::string& metric) {
    if (family == "regret") return metric.rfind("regret_", 0) == 0;
    return metric == "p_c_after_c" || metric == "p_d_after_c" || metric == "p_c_after_d" ||
           metric == "p_d_after_d";
  };
  std::vector<std::string> games, series_names;
  std::map<std::pair<std::string, std::string>, MetricValue> cells;
  for (const auto& r : rows) {
    if (!in_family(r.metric)) continue;
    const std::string name = r.trained_kind + " " + r.metric;
    if (std::find(games.begin(), games.end(), r.game) == games.end()) games.push_back(r.game);
    if (std::find(series_names.begin(), series_names.end(), name) == series_names.end()) {
      series_names.push_back(name);
    }
    cells[{name, r.game}] = r.value;
  }
  std::vector<ChartSeries> series;
  for (const auto& name : series_names) {
    ChartSeries s{name, {}, {}, {}};
    for (const auto& g : games) {
      const auto it = cells.find({name, g});
      const MetricValue v = it == cells.end() ? MetricValue{} : it->second;
      s.values.push_back(v.mean);
      s.low.push_back(v.ci_low);
      s.high.push_back(v.ci_high);
    }
    series.push_back(std::move(s));
  }
  return BarChartSvg(family == "regret" ? "Normalized moral regret" : "Conditional action frequencies",
                     games, series, family == "regret" ? "regret" : "frequency");
}

ReportFiles render_report(const ReportSpec& spec) {
  spec.Validate();
  const auto dirs = FindRunDirs(spec.run_roots);
  if (dirs.empty()) throw ValidationError("no run directories with " + std::string(kMetricsFile));
  std::map<std::string, std::vector<RunLog>> groups;
  std::vector<EvalCsvRow> eval_rows;
  for (const auto& d : dirs) {
    RunLog log = LoadRunLog(d);
    groups[ConditionName(log.config)].push_back(std::move(log));
    const auto eval_path = (fs::path(d) / kEvalFile).string();
    if (fs::exists(eval_path)) {
      try {
        auto rows = ParseEvalCsv(ReadTextFile(eval_path));
        eval_rows.insert(eval_rows.end(), rows.begin(), rows.end());
      } catch (const ValidationError& e) {
        throw ValidationError(eval_path + ": " + e.what());
      }
    }
  }

  ReportFiles files;
  auto emit = [&](const std::string& name, const std::string& text) {
    const auto path = (fs::path(spec.output_dir) / name).string();
    WriteTextFile(path, text);
    files.written.push_back(path);
  };

  for (const auto& [condition, runs] : groups) {
    if (spec.csv) emit("curve_" + condition + ".csv", CurveCsv(runs, spec.window));
    if (!spec.svg) continue;
    const auto table = CurveTable(runs, spec.window);
    std::vector<double> xs;
    for (const auto& m : runs.front().metrics) xs.push_back(static_cast<double>(m.episode));
    auto series_for = [&](std::size_t first, std::size_t last) {
      std::vector<ChartSeries> out;
      for (std::size_t k = first; k < last; ++k) {
        ChartSeries s{CurveMetrics()[k], {}, {}, {}};
        for (const auto& v : table[k]) {
          s.values.push_back(v.mean);
          s.low.push_back(v.ci_low);
          s.high.push_back(v.ci_high);
        }
        out.push_back(std::move(s));
      }
      return out;
    };
    const std::string n_runs = std::to_string(runs.size());
    emit("moral_" + condition + ".svg",
         LineChartSvg("Moral rewards, " + condition + " (" + n_runs + " runs)", xs,
                      series_for(1, 5), "episode", "mean reward per step"));
    emit("actions_" + condition + ".svg",
         LineChartSvg("Action types, " + condition + " (" + n_runs + " runs)", xs,
                      series_for(5, 11), "episode", "fraction of steps"));
  }

  if (!eval_rows.empty()) {
    const auto pooled = CombineRuns(eval_rows);
    if (spec.csv) {
      std::string out = EvalCsvHeader() + "\n";
      for (const auto& r : pooled) {
        out += Join({r.run_id, r.game, r.trained_kind, r.metric, FormatDouble(r.value.mean),
                     FormatDouble(r.value.ci_low), FormatDouble(r.value.ci_high)},
                    ",") +
               "\n";
      }
      emit("regret_table.csv", out);
    }
    if (spec.svg) {
      emit("eval_regret.svg", EvalChartSvg(pooled, "regret"));
      emit("eval_actions.svg", EvalChartSvg(pooled, "actions"));
    }
  }
  return files;
}

}  // namespace moral

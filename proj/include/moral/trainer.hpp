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

// Episode loop. Each episode plays N simultaneous steps from a random state
// and ends with one PPO update.

#ifndef MORAL_TRAINER_HPP_
#define MORAL_TRAINER_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "moral/game_env.hpp"
#include "moral/llm_gateway.hpp"
#include "moral/moral_rewards.hpp"
#include "moral/opponents.hpp"
#include "moral/policy.hpp"

namespace moral {

struct OpponentSpec {
  enum class Mode { kFixed, kLearner, kLlm };
  Mode mode = Mode::kFixed;
  OpponentStrategy strategy = OpponentStrategy::kTitForTat;

  // "tft" | "ac" | "ad" | "random" | "learner" | "llm"
  static OpponentSpec Parse(std::string_view name);
  std::string Name() const;
  bool operator==(const OpponentSpec&) const = default;
};

struct RunConfig {
  std::string game = "IPD";
  std::string game_file;  // optional custom table; overrides `game`
  OpponentSpec opponent;
  std::string reward = "game";
  std::optional<long> switch_episode;  // default: episodes / 2
  RewardParams reward_params;
  long episodes = 1000;
  std::optional<int> batch_size;  // default: 3 vs a learner, else 5
  std::uint64_t seed = 0;
  PPOConfig agent;
  std::string c_token = "action1";
  std::string d_token = "action2";
  std::string output_dir;  // empty: keep everything in memory
  EndpointConfig endpoint;  // used when opponent is "llm"

  long ResolvedSwitchEpisode() const { return switch_episode.value_or(episodes / 2); }
  int ResolvedBatchSize() const {
    return batch_size.value_or(opponent.mode == OpponentSpec::Mode::kLearner ? 3 : 5);
  }
  RewardSchedule Schedule() const;
  GameSpec ResolveGame() const;
  TokenVocabulary Vocabulary() const;
  void Validate() const;

  bool operator==(const RunConfig&) const = default;
};

struct EpisodeMetrics {
  long episode = 0;
  RewardKind reward_kind = RewardKind::kGame;
  int steps = 0;
  double mean_reward = 0.0;  // raw reward under the active kind
  std::array<double, 4> moral_mean{};  // indexed like kAllRewardKinds
  // Counts of (opponent's previous action, own action) over the episode.
  int c_after_c = 0;
  int d_after_c = 0;
  int c_after_d = 0;
  int d_after_d = 0;
  int illegal = 0;
  int mutual_cooperation = 0;  // both simultaneous actions C
  double kl_observed = 0.0;
  double kl_coef = 0.0;
  double mean_ratio = 1.0;
};

struct RunArtifacts {
  std::vector<EpisodeMetrics> episode_metrics;
  Policy final_policy;
  std::string trajectory_log_path;  // empty when run in memory
  std::vector<std::string> trajectory;  // one JSON object per step
  bool non_convergent = false;  // illegal rate > 0.99 over the last 100 episodes
};

inline constexpr const char* kTrajectoryFile = "trajectory.jsonl";
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kPolicyFile = "policy.txt";
inline constexpr const char* kConfigFile = "config.txt";

// Fixed header of metrics.csv.
const std::string& MetricsCsvHeader();
std::string MetricsCsvRow(std::uint64_t seed, const EpisodeMetrics& m);
// Inverse of MetricsCsvRow; the seed column is checked and dropped.
EpisodeMetrics ParseMetricsCsvRow(std::string_view line);

// Reward context for one player after a step. When the other player emitted
// an illegal token no game outcome occurred, so payoff terms count as zero.
RewardContext TrainingRewardContext(const StepOutcome& outcome, const GameState& state,
                                    bool for_self);

// Trains against a fixed strategy or an LLM endpoint.
RunArtifacts run_training(const RunConfig& cfg);

// Two learners trained against each other; both configs name "learner".
std::pair<RunArtifacts, RunArtifacts> run_cotraining(const RunConfig& cfg_a,
                                                     const RunConfig& cfg_b);

// Final-window summaries used by reports and acceptance checks.
struct WindowSummary {
  int steps = 0;
  double norm_violation_rate = 0.0;  // D after C / steps after C
  double mutual_cooperation_rate = 0.0;
  double defection_rate = 0.0;
  double illegal_rate = 0.0;
};
WindowSummary SummarizeEpisodes(const std::vector<EpisodeMetrics>& metrics,
                                long first_episode, long end_episode);

}  // namespace moral

#endif  // MORAL_TRAINER_HPP_

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

// Frozen-agent evaluation: a fixed protocol against a scripted opponent on
// several games, scored by normalized moral regret and action statistics.

#ifndef MORAL_EVALUATOR_HPP_
#define MORAL_EVALUATOR_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "moral/game_env.hpp"
#include "moral/llm_gateway.hpp"
#include "moral/moral_rewards.hpp"
#include "moral/opponents.hpp"
#include "moral/policy.hpp"

namespace moral {

// Which token means Cooperate and which means Defect at test time.
struct TokenMapping {
  std::string c_token = "action3";
  std::string d_token = "action4";

  const std::string& Token(Action a) const {
    return a == Action::kCooperate ? c_token : d_token;
  }
  // Trimmed exact match; anything else is Illegal.
  TokenChoice Classify(std::string_view text) const;
  void Validate() const;
  bool operator==(const TokenMapping&) const = default;
};

enum class RegretNormalization {
  kGame,   // divide by the game-level reward range
  kState,  // divide by the range over the agent's two actions in that context
};

struct EvalProtocol {
  int episodes = 10;
  int steps_per_episode = 5;
  OpponentStrategy opponent = OpponentStrategy::kRandom;
  std::vector<std::string> games = BuiltinGameNames();
  std::vector<GameSpec> custom_games;  // evaluated after `games`
  TokenMapping token_mapping;
  TokenMapping swapped_mapping{"action2", "action1"};
  std::uint64_t seed = 0;
  RewardParams params;
  // Flip every random environment draw (initial states and Random opponent
  // moves) C<->D.
  bool mirror_environment = false;
  RegretNormalization normalization = RegretNormalization::kGame;
  std::string run_id;
  std::string trained_kind;

  void Validate() const;
  std::vector<GameSpec> ResolveGames() const;
};

struct AgentQuery {
  const GameSpec* game = nullptr;
  GameState state;  // semantic actions
  const TokenMapping* mapping = nullptr;
  // The opponent's move on this step. Only the best-response oracle reads it.
  Action opp_now = Action::kCooperate;
  std::uint64_t step_seed = 0;
};

struct AgentReply {
  std::string text;
  bool transport_error = false;
};

// Agents must be safe to call from several threads at once.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentReply Act(const AgentQuery& query, Rng& rng) const = 0;
};

// A frozen tabular policy. Test-time tokens that coincide with one of the
// policy's legal tokens take that token's slot; other test-time tokens take
// the slot of their declared role.
class TabularAgent : public Agent {
 public:
  explicit TabularAgent(const Policy& policy) : policy_(policy) {}
  AgentReply Act(const AgentQuery& query, Rng& rng) const override;

 private:
  const Policy& policy_;
};

// Always plays one action, emitted through the active mapping.
class ConstantAgent : public Agent {
 public:
  explicit ConstantAgent(Action action) : action_(action) {}
  AgentReply Act(const AgentQuery& query, Rng& rng) const override;

 private:
  Action action_;
};

// Emits the same literal text on every step.
class LiteralTokenAgent : public Agent {
 public:
  explicit LiteralTokenAgent(std::string text) : text_(std::move(text)) {}
  AgentReply Act(const AgentQuery& query, Rng& rng) const override;

 private:
  std::string text_;
};

// Plays opp_prev (copy) or its flip (anti-copy).
class CopyAgent : public Agent {
 public:
  explicit CopyAgent(bool anti) : anti_(anti) {}
  AgentReply Act(const AgentQuery& query, Rng& rng) const override;

 private:
  bool anti_;
};

// Oracle that sees the opponent's simultaneous move and picks the action
// with the highest reward of `kind`, Cooperate on ties.
class BestResponseAgent : public Agent {
 public:
  BestResponseAgent(RewardKind kind, RewardParams params) : kind_(kind), params_(params) {}
  AgentReply Act(const AgentQuery& query, Rng& rng) const override;

 private:
  RewardKind kind_;
  RewardParams params_;
};

// Prompts a remote endpoint. Failed requests come back as transport errors.
class RemoteLlmAgent : public Agent {
 public:
  explicit RemoteLlmAgent(LlmGateway& gateway) : gateway_(gateway) {}
  AgentReply Act(const AgentQuery& query, Rng& rng) const override;

 private:
  LlmGateway& gateway_;
};

struct EvalStep {
  long episode = 0;
  int step = 0;
  GameState state;
  Action opp_now = Action::kCooperate;
  TokenChoice self_choice = TokenChoice::Legal(Action::kCooperate);
  std::string emitted;
  bool transport_error = false;
};

// Normalized regret for one step; illegal steps score 1.0. Under kState a
// context where both actions score the same has regret 0.
double moral_regret(const EvalStep& step, RewardKind kind, const RewardParams& params,
                    const GameSpec& game,
                    RegretNormalization norm = RegretNormalization::kGame);

struct ConditionRow {
  long count = 0;
  long cooperate = 0;
  long defect = 0;
  long illegal = 0;

  bool present() const { return count > 0; }
  std::optional<double> p_cooperate() const;
  std::optional<double> p_defect() const;
  std::optional<double> p_illegal() const;
  bool operator==(const ConditionRow&) const = default;
};

// Rows indexed by the opponent's previous action.
struct ActionBreakdown {
  std::array<ConditionRow, 2> by_opp_prev{};
  const ConditionRow& after(Action a) const { return by_opp_prev[static_cast<int>(a)]; }
  bool operator==(const ActionBreakdown&) const = default;
};

ActionBreakdown action_breakdown(std::span<const EvalStep> steps);

// Fraction of legal steps whose action equals opp_prev; absent without
// legal steps.
std::optional<double> reciprocity_rate(std::span<const EvalStep> steps);

struct MetricValue {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool operator==(const MetricValue&) const = default;
};

// mean +- 1.96 * sample stddev / sqrt(n); zero width for n == 1.
MetricValue MeanWithCi(std::span<const double> values);

struct GameReport {
  std::string game;
  std::array<MetricValue, 4> regret{};  // indexed like kAllRewardKinds
  ActionBreakdown breakdown;
  double illegal_rate = 0.0;
  std::optional<double> reciprocity;
  long transport_errors = 0;
  long step_count = 0;

  const MetricValue& Regret(RewardKind kind) const {
    return regret[static_cast<int>(kind)];
  }
  bool operator==(const GameReport&) const = default;
};

struct EvalReport {
  std::string run_id;
  std::string trained_kind;
  std::vector<GameReport> games;

  long TotalSteps() const;
  bool operator==(const EvalReport&) const = default;
};

// One step log per evaluated game, in protocol order.
using EvalStepLog = std::vector<std::vector<EvalStep>>;

// Games run concurrently; the result does not depend on the thread count.
EvalReport evaluate(const Agent& agent, const EvalProtocol& protocol,
                    EvalStepLog* log = nullptr);
// Single-threaded reference for the same computation.
EvalReport evaluate_serial(const Agent& agent, const EvalProtocol& protocol,
                           EvalStepLog* log = nullptr);
EvalReport evaluate(const Policy& policy, const EvalProtocol& protocol,
                    EvalStepLog* log = nullptr);

// Evaluates under the protocol's swapped mapping when `swapped`, otherwise
// under its regular mapping.
EvalReport permutation_probe(const Agent& agent, const EvalProtocol& protocol,
                             bool swapped);

// The table a tabular agent needs to behave identically when the meaning of
// its two legal tokens is exchanged: states flipped, C and D logits swapped.
Policy SwapActionRoles(const Policy& policy);

// run_id,game,trained_kind,metric,value,ci_low,ci_high. Absent metrics are
// left out.
std::string EvalCsvHeader();
std::string EvalReportCsv(const EvalReport& report, bool with_header = true);

struct EvalCsvRow {
  std::string run_id;
  std::string game;
  std::string trained_kind;
  std::string metric;
  MetricValue value;
};
std::vector<EvalCsvRow> ParseEvalCsv(std::string_view text);

// Pools several runs into one row set: per (game, trained_kind, metric), the
// mean of run-level means with a CI over runs.
std::vector<EvalCsvRow> CombineRuns(const std::vector<EvalCsvRow>& rows);

}  // namespace moral

#endif  // MORAL_EVALUATOR_HPP_

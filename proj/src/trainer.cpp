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

#include "moral/trainer.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>

#include "json.hpp"

namespace moral {

using ojson = nlohmann::ordered_json;

OpponentSpec OpponentSpec::Parse(std::string_view name) {
  if (name == "learner") return {Mode::kLearner, OpponentStrategy::kTitForTat};
  if (name == "llm") return {Mode::kLlm, OpponentStrategy::kTitForTat};
  try {
    return {Mode::kFixed, ParseOpponent(name)};
  } catch (const ValidationError&) {
    throw ValidationError("unknown opponent '" + std::string(name) +
                          "'; valid: tft, ac, ad, random, learner, llm");
  }
}

std::string OpponentSpec::Name() const {
  switch (mode) {
    case Mode::kLearner:
      return "learner";
    case Mode::kLlm:
      return "llm";
    case Mode::kFixed:
      break;
  }
  return OpponentName(strategy);
}

RewardSchedule RunConfig::Schedule() const {
  return RewardSchedule::FromName(reward, ResolvedSwitchEpisode(), reward_params);
}

GameSpec RunConfig::ResolveGame() const {
  if (!game_file.empty()) return LoadGameTable(game_file);
  return builtin_game(game);
}

TokenVocabulary RunConfig::Vocabulary() const {
  return TokenVocabulary::WithDistractors(c_token, d_token, agent.distractor_count);
}

void RunConfig::Validate() const {
  if (episodes < 1) throw ValidationError("episodes must be >= 1");
  if (batch_size && *batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (switch_episode && (*switch_episode < 1 || *switch_episode >= episodes)) {
    throw ValidationError("switch_episode must be in [1, episodes)");
  }
  reward_params.Validate();
  agent.Validate();
  (void)Schedule();
  (void)Vocabulary();
  if (game_file.empty()) (void)builtin_game(game);
  if (opponent.mode == OpponentSpec::Mode::kLlm) endpoint.Validate();
}

const std::string& MetricsCsvHeader() {
  static const std::string header =
      "seed,episode,reward_kind,steps,mean_reward,moral_game,moral_deontological,"
      "moral_utilitarian,moral_game_deontological,c_after_c,d_after_c,c_after_d,"
      "d_after_d,illegal,mutual_cooperation,kl_observed,kl_coef,mean_ratio";
  return header;
}

std::string MetricsCsvRow(std::uint64_t seed, const EpisodeMetrics& m) {
  std::vector<std::string> f = {std::to_string(seed), std::to_string(m.episode), RewardKindName(m.reward_kind),
                                std::to_string(m.steps), FormatDouble(m.mean_reward)};
  for (double v : m.moral_mean) f.push_back(FormatDouble(v));
  for (int v : {m.c_after_c, m.d_after_c, m.c_after_d, m.d_after_d, m.illegal,
                m.mutual_cooperation}) {
    f.push_back(std::to_string(v));
  }
  f.push_back(FormatDouble(m.kl_observed));
  f.push_back(FormatDouble(m.kl_coef));
  f.push_back(FormatDouble(m.mean_ratio));
  return Join(f, ",");
}

EpisodeMetrics ParseMetricsCsvRow(std::string_view line) {
  auto f = Split(Trim(line), ',');
  if (f.size() != 18) throw ValidationError("metrics row: expected 18 fields");
  EpisodeMetrics m;
  (void)ParseInt(f[0]);
  m.episode = ParseInt(f[1]);
  m.reward_kind = ParseRewardKind(f[2]);
  m.steps = static_cast<int>(ParseInt(f[3]));
  m.mean_reward = ParseDouble(f[4]);
  for (int k = 0; k < 4; ++k) m.moral_mean[k] = ParseDouble(f[5 + k]);
  m.c_after_c = static_cast<int>(ParseInt(f[9]));
  m.d_after_c = static_cast<int>(ParseInt(f[10]));
  m.c_after_d = static_cast<int>(ParseInt(f[11]));
  m.d_after_d = static_cast<int>(ParseInt(f[12]));
  m.illegal = static_cast<int>(ParseInt(f[13]));
  m.mutual_cooperation = static_cast<int>(ParseInt(f[14]));
  m.kl_observed = ParseDouble(f[15]);
  m.kl_coef = ParseDouble(f[16]);
  m.mean_ratio = ParseDouble(f[17]);
  return m;
}

RewardContext TrainingRewardContext(const StepOutcome& outcome, const GameState& state,
                                    bool for_self) {
  const TokenChoice& own = for_self ? outcome.self_choice : outcome.opp_choice;
  const bool other_legal = for_self ? outcome.opp_legal : outcome.self_legal;
  RewardContext ctx{own, state.opp_prev, std::nullopt, std::nullopt};
  if (!own.legal()) return ctx;
  if (!other_legal) {
    ctx.self_payoff = 0.0;
    ctx.opp_payoff = 0.0;
    return ctx;
  }
  const int mine = for_self ? *outcome.self_payoff : *outcome.opp_payoff;
  const int theirs = for_self ? *outcome.opp_payoff : *outcome.self_payoff;
  ctx.self_payoff = mine;
  ctx.opp_payoff = theirs;
  return ctx;
}

namespace {

// The game as seen by the column player.
GameSpec Transposed(const GameSpec& game) {
  std::array<PayoffPair, 4> t{};
  for (Action a : kAllActions) {
    for (Action b : kAllActions) {
      const auto& p = game.payoff(b, a);
      t[static_cast<int>(a) * 2 + static_cast<int>(b)] = {p.opp_points, p.self_points};
    }
  }
  return GameSpec(game.name(), t);
}

// One PPO learner plus everything it logs.
class Learner {
 public:
  Learner(const RunConfig& cfg, const GameSpec& game)
      : cfg_(cfg),
        schedule_(cfg.Schedule()),
        vocab_(cfg.Vocabulary()),
        policy_([&] {
          Rng init_rng(DeriveSeed(cfg.seed, 0));
          return init_policy(vocab_, cfg.agent, init_rng);
        }()),
        kl_(KLController::FromConfig(cfg.agent)),
        rng_(DeriveSeed(cfg.seed, 2)),
        game_(game) {}

  const TokenVocabulary& vocab() const { return vocab_; }
  const Policy& policy() const { return policy_; }
  RewardKind kind() const { return kind_; }

  void BeginEpisode(long episode) {
    episode_ = episode;
    kind_ = schedule_kind(schedule_, episode);
    batch_.clear();
    rewards_.clear();
    metrics_ = EpisodeMetrics{};
    metrics_.episode = episode;
    metrics_.reward_kind = kind_;
  }

  SampledToken Act(const GameState& state) { return sample_action(policy_, state, rng_); }

  // Scores the step for this learner and appends the log row.
  void Record(int step_index, const GameState& own_state, const GameState& other_state,
              const SampledToken& sampled, const StepOutcome& out, bool for_self,
              const std::optional<std::string>& other_token) {
    const RewardContext ctx = TrainingRewardContext(out, own_state, for_self);
    const double reward = moral_reward(kind_, schedule_.params(), ctx);
    batch_.push_back({own_state, sampled.column, sampled.logprob, reward});
    rewards_.push_back(reward);

    for (std::size_t k = 0; k < kAllRewardKinds.size(); ++k) {
      metrics_.moral_mean[k] += moral_reward(kAllRewardKinds[k], schedule_.params(), ctx);
    }
    const TokenChoice& own = for_self ? out.self_choice : out.opp_choice;
    const TokenChoice& other = for_self ? out.opp_choice : out.self_choice;
    const auto& next_own = for_self ? out.next_self_state : out.next_opp_state;
    const auto& next_other = for_self ? out.next_opp_state : out.next_self_state;
    const auto& own_payoff = for_self ? out.self_payoff : out.opp_payoff;
    const auto& other_payoff = for_self ? out.opp_payoff : out.self_payoff;

    if (!own.legal()) {
      ++metrics_.illegal;
    } else {
      const bool after_c = own_state.opp_prev == Action::kCooperate;
      const bool played_c = own.action() == Action::kCooperate;
      if (after_c) {
        (played_c ? metrics_.c_after_c : metrics_.d_after_c)++;
      } else {
        (played_c ? metrics_.c_after_d : metrics_.d_after_d)++;
      }
      if (played_c && other.legal() && other.action() == Action::kCooperate) {
        ++metrics_.mutual_cooperation;
      }
    }

    ojson row;
    row["seed"] = cfg_.seed;
    row["episode"] = episode_;
    row["step"] = step_index;
    row["reward_kind"] = RewardKindName(kind_);
    row["self_state"] = StateString(own_state);
    row["opp_state"] = StateString(other_state);
    row["self_token"] = policy_.columns()[sampled.column];
    row["self_legal"] = own.legal();
    row["self_action"] =
        own.legal() ? ojson(std::string(1, ActionLetter(own.action()))) : ojson(nullptr);
    row["opp_legal"] = other.legal();
    row["opp_action"] = other.legal() ? ojson(std::string(1, ActionLetter(other.action())))
                                      : ojson(nullptr);
    row["opp_token"] = other_token ? ojson(*other_token) : ojson(nullptr);
    row["self_payoff"] = own_payoff ? ojson(*own_payoff) : ojson(nullptr);
    row["opp_payoff"] = other_payoff ? ojson(*other_payoff) : ojson(nullptr);
    row["reward_raw"] = reward;
    row["logprob"] = sampled.logprob;
    row["next_self_state"] = StateString(next_own);
    row["next_opp_state"] = StateString(next_other);
    trajectory_.push_back(row.dump());
  }

  void EndEpisode() {
    const auto advantages = normalize_rewards(normalizer_, rewards_);
    const UpdateStats stats = ppo_update(policy_, batch_, advantages, cfg_.agent, kl_);
    const double n = static_cast<double>(rewards_.size());
    metrics_.steps = static_cast<int>(rewards_.size());
    double total = 0.0;
    for (double r : rewards_) total += r;
    metrics_.mean_reward = total / n;
    for (double& v : metrics_.moral_mean) v /= n;
    metrics_.kl_observed = stats.kl_observed;
    metrics_.kl_coef = stats.coef_after;
    metrics_.mean_ratio = stats.mean_ratio;
    metrics_all_.push_back(metrics_);
  }

  RunArtifacts Finish() {
    RunArtifacts art{std::move(metrics_all_), policy_, {}, std::move(trajectory_), false};
    const long tail = std::min<long>(100, static_cast<long>(art.episode_metrics.size()));
    const long total = static_cast<long>(art.episode_metrics.size());
    const auto summary = SummarizeEpisodes(art.episode_metrics, total - tail, total);
    art.non_convergent = summary.illegal_rate > 0.99;
    if (!cfg_.output_dir.empty()) WriteOutputs(art);
    return art;
  }

 private:
  void WriteOutputs(RunArtifacts& art) const {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg_.output_dir, ec);
    if (ec) throw RuntimeFailure("cannot create " + cfg_.output_dir + ": " + ec.message());
    const fs::path dir(cfg_.output_dir);
    art.trajectory_log_path = (dir / kTrajectoryFile).string();
    {
      std::ofstream out(art.trajectory_log_path, std::ios::binary);
      if (!out) throw RuntimeFailure("cannot write " + art.trajectory_log_path);
      for (const auto& line : art.trajectory) out << line << '\n';
      if (!out) throw RuntimeFailure("error writing " + art.trajectory_log_path);
    }
    {
      const auto path = (dir / kMetricsFile).string();
      std::ofstream out(path, std::ios::binary);
      if (!out) throw RuntimeFailure("cannot write " + path);
      out << MetricsCsvHeader() << '\n';
      for (const auto& m : art.episode_metrics) out << MetricsCsvRow(cfg_.seed, m) << '\n';
      if (!out) throw RuntimeFailure("error writing " + path);
    }
    SavePolicy(art.final_policy, (dir / kPolicyFile).string());
  }

  const RunConfig& cfg_;
  RewardSchedule schedule_;
  TokenVocabulary vocab_;
  Policy policy_;
  KLController kl_;
  RewardNormalizer normalizer_;
  Rng rng_;
  GameSpec game_;

  long episode_ = 0;
  RewardKind kind_ = RewardKind::kGame;
  std::vector<ExperienceRecord> batch_;
  std::vector<double> rewards_;
  EpisodeMetrics metrics_;
  std::vector<EpisodeMetrics> metrics_all_;
  std::vector<std::string> trajectory_;
};

}  // namespace

RunArtifacts run_training(const RunConfig& cfg) {
  cfg.Validate();
  if (cfg.opponent.mode == OpponentSpec::Mode::kLearner) {
    throw ValidationError("opponent 'learner' needs run_cotraining (cotrain command)");
  }
  const GameSpec game = cfg.ResolveGame();
  const GameSpec opp_view = Transposed(game);
  const int n = cfg.ResolvedBatchSize();
  Learner learner(cfg, game);
  Rng env_rng(DeriveSeed(cfg.seed, 1));
  Rng opp_rng(DeriveSeed(cfg.seed, 3));

  std::unique_ptr<LlmGateway> gateway;
  TokenVocabulary llm_vocab{cfg.c_token, cfg.d_token, {}};
  if (cfg.opponent.mode == OpponentSpec::Mode::kLlm) {
    gateway = std::make_unique<LlmGateway>(cfg.endpoint);
  }

  for (long ep = 0; ep < cfg.episodes; ++ep) {
    learner.BeginEpisode(ep);
    GameState self_state = random_initial_state(env_rng);
    GameState opp_state = self_state.Mirrored();
    for (int t = 0; t < n; ++t) {
      const SampledToken mine = learner.Act(self_state);
      TokenChoice theirs = TokenChoice::Legal(Action::kCooperate);
      std::optional<std::string> their_token;
      if (gateway) {
        const std::uint64_t prompt_seed =
            DeriveSeed(cfg.seed, 1000 + static_cast<std::uint64_t>(ep) * n + t);
        const PromptSpec spec{opp_view, opp_state, llm_vocab, prompt_seed,
                              (prompt_seed & 2U) ? PayoffRowOrder::kDefectFirst
                                                 : PayoffRowOrder::kCooperateFirst};
        const std::string reply = gateway->Complete(build_prompt(spec));
        theirs = parse_action(reply, llm_vocab);
        their_token = reply;
      } else {
        theirs = TokenChoice::Legal(opponent_action(cfg.opponent.strategy, opp_state, opp_rng));
      }
      const StepOutcome out = step(game, self_state, opp_state, mine.choice, theirs);
      learner.Record(t, self_state, opp_state, mine, out, true, their_token);
      self_state = out.next_self_state;
      opp_state = out.next_opp_state;
    }
    learner.EndEpisode();
  }
  return learner.Finish();
}

std::pair<RunArtifacts, RunArtifacts> run_cotraining(const RunConfig& cfg_a,
                                                     const RunConfig& cfg_b) {
  cfg_a.Validate();
  cfg_b.Validate();
  if (cfg_a.opponent.mode != OpponentSpec::Mode::kLearner ||
      cfg_b.opponent.mode != OpponentSpec::Mode::kLearner) {
    throw ValidationError("co-training needs opponent = \"learner\" in both configs");
  }
  if (cfg_a.episodes != cfg_b.episodes ||
      cfg_a.ResolvedBatchSize() != cfg_b.ResolvedBatchSize()) {
    throw ValidationError("co-training configs must agree on episodes and batch_size");
  }
  const GameSpec game = cfg_a.ResolveGame();
  if (!(cfg_b.ResolveGame() == game)) {
    throw ValidationError("co-training configs must use the same game");
  }
  const int n = cfg_a.ResolvedBatchSize();
  Learner a(cfg_a, game);
  Learner b(cfg_b, game);
  Rng env_rng(DeriveSeed(cfg_a.seed ^ MixSeed(cfg_b.seed), 1));

  for (long ep = 0; ep < cfg_a.episodes; ++ep) {
    a.BeginEpisode(ep);
    b.BeginEpisode(ep);
    GameState a_state = random_initial_state(env_rng);
    GameState b_state = a_state.Mirrored();
    for (int t = 0; t < n; ++t) {
      const SampledToken a_tok = a.Act(a_state);
      const SampledToken b_tok = b.Act(b_state);
      const StepOutcome out = step(game, a_state, b_state, a_tok.choice, b_tok.choice);
      a.Record(t, a_state, b_state, a_tok, out, true,
               b.policy().columns()[b_tok.column]);
      b.Record(t, b_state, a_state, b_tok, out, false,
               a.policy().columns()[a_tok.column]);
      a_state = out.next_self_state;
      b_state = out.next_opp_state;
    }
    a.EndEpisode();
    b.EndEpisode();
  }
  return {a.Finish(), b.Finish()};
}

WindowSummary SummarizeEpisodes(const std::vector<EpisodeMetrics>& metrics,
                                long first_episode, long end_episode) {
  WindowSummary s;
  long after_c = 0, violations = 0, mutual = 0, defect = 0, illegal = 0, steps = 0;
  for (const auto& m : metrics) {
    if (m.episode < first_episode || m.episode >= end_episode) continue;
    after_c += m.c_after_c + m.d_after_c;
    violations += m.d_after_c;
    mutual += m.mutual_cooperation;
    defect += m.d_after_c + m.d_after_d;
    illegal += m.illegal;
    steps += m.steps;
  }
  s.steps = static_cast<int>(steps);
  if (after_c > 0) s.norm_violation_rate = static_cast<double>(violations) / after_c;
  if (steps > 0) {
    s.mutual_cooperation_rate = static_cast<double>(mutual) / steps;
    s.defection_rate = static_cast<double>(defect) / steps;
    s.illegal_rate = static_cast<double>(illegal) / steps;
  }
  return s;
}

}  // namespace moral

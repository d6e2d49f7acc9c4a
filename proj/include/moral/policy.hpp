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

// Tabular softmax token policy and its clipped-surrogate PPO learner.
//
// The policy holds one logit vector per game state over a token vocabulary
// (two legal tokens plus distractors) and a frozen copy of the initial
// logits used as the KL reference. Every reduction over the token axis goes
// through OrderFreeSum, so relabeling tokens permutes results bit-exactly.

#ifndef MORAL_POLICY_HPP_
#define MORAL_POLICY_HPP_

#include <array>
#include <span>
#include <string>
#include <vector>

#include "moral/game_env.hpp"

namespace moral {

struct PPOConfig {
  double clip_epsilon = 0.2;
  double learning_rate = 0.05;
  int update_epochs = 4;
  double kl_target = 1.5;  // nats, mean per-state KL over the batch
  double kl_coef_init = 0.2;
  double kl_gain = 0.1;
  double kl_clamp = 0.5;
  int distractor_count = 3;

  void Validate() const;
  bool operator==(const PPOConfig&) const = default;
};

struct KLController {
  double coef = 0.2;
  double target = 1.5;
  double gain = 0.1;
  double clamp = 0.5;

  static KLController FromConfig(const PPOConfig& cfg) {
    return {cfg.kl_coef_init, cfg.kl_target, cfg.kl_gain, cfg.kl_clamp};
  }
};

// coef <- coef * (1 + gain * clamp(observed / target - 1, -clamp, +clamp)).
double adaptive_kl_update(KLController& kl, double observed);

struct RewardNormalizer {
  double running_mean = 0.0;
  double running_var = 0.0;  // population variance of everything seen
  long count = 0;
  double epsilon = 1e-8;
};

// Folds the batch into the running statistics, then whitens each reward.
std::vector<double> normalize_rewards(RewardNormalizer& norm,
                                      std::span<const double> rewards);

class Policy {
 public:
  // Zero logits: uniform over the vocabulary in every state.
  explicit Policy(TokenVocabulary vocab);
  // Explicit table; `columns` is a permutation of vocab.Tokens() giving the
  // order of the logit vectors.
  Policy(TokenVocabulary vocab, std::vector<std::string> columns,
         std::array<std::vector<double>, kNumStates> logits,
         std::array<std::vector<double>, kNumStates> reference);

  const TokenVocabulary& vocabulary() const { return vocab_; }
  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t num_tokens() const { return columns_.size(); }

  std::span<const double> logits(const GameState& s) const { return logits_[s.index()]; }
  std::span<double> mutable_logits(const GameState& s) { return logits_[s.index()]; }
  std::span<const double> reference_logits(const GameState& s) const {
    return reference_[s.index()];
  }

  std::vector<double> Probabilities(const GameState& s) const;
  std::vector<double> ReferenceProbabilities(const GameState& s) const;

  int ColumnOf(const std::string& token) const;
  int LegalColumn(Action a) const { return ColumnOf(vocab_.LegalToken(a)); }
  TokenChoice ChoiceFor(int column) const;
  // Position of a column's token in vocabulary().Tokens(); used to break
  // sampling ties by role instead of by table layout.
  int RoleRank(int column) const { return role_rank_[column]; }

  // Same policy with columns reordered: new column i is old column perm[i].
  Policy PermuteColumns(std::span<const int> perm) const;
  // Same policy with logits moved between states: new table at state s is
  // the old table at state_map(s), for both logits and reference.
  Policy RekeyStates(std::span<const int> state_map) const;

  bool operator==(const Policy&) const = default;

 private:
  TokenVocabulary vocab_;
  std::vector<std::string> columns_;
  std::vector<int> role_rank_;
  std::array<std::vector<double>, kNumStates> logits_;
  std::array<std::vector<double>, kNumStates> reference_;
};

Policy init_policy(const TokenVocabulary& vocab, const PPOConfig& cfg, Rng& rng);

// Numerically stable softmax and log-softmax, order independent.
std::vector<double> Softmax(std::span<const double> logits);
std::vector<double> LogSoftmax(std::span<const double> logits);

// Inverse-CDF draw visiting entries by descending probability; exact ties go
// to the lower `tie_rank`. The outcome depends only on the multiset of
// (probability, rank) pairs, never on storage order.
int SampleIndex(std::span<const double> probs, std::span<const int> tie_rank, double u);

struct SampledToken {
  TokenChoice choice;
  int column = 0;
  double logprob = 0.0;
};

SampledToken sample_action(const Policy& policy, const GameState& state, Rng& rng);

struct ExperienceRecord {
  GameState state;
  int token_index = 0;  // policy column
  double logprob_old = 0.0;
  double reward_raw = 0.0;
};

struct UpdateStats {
  double kl_observed = 0.0;
  double mean_ratio = 1.0;
  double coef_after = 0.0;
};

// Mean over records of KL(policy(.|s_i) || reference(.|s_i)).
double BatchKl(const Policy& policy, std::span<const ExperienceRecord> batch);

// mean_i min(r_i A_i, clip(r_i, 1-eps, 1+eps) A_i) - kl_coef * BatchKl.
double PpoObjective(const Policy& policy, std::span<const ExperienceRecord> batch,
                    std::span<const double> advantages, double clip_epsilon,
                    double kl_coef);

// Analytic gradient of PpoObjective with respect to every logit, flattened
// state-major (state index * num_tokens + column).
std::vector<double> PpoObjectiveGradient(const Policy& policy,
                                         std::span<const ExperienceRecord> batch,
                                         std::span<const double> advantages,
                                         double clip_epsilon, double kl_coef);

// update_epochs ascent steps on PpoObjective, then one adaptive KL update.
// The step is lr / (1 + lr * kl.coef) so a large KL weight cannot overshoot.
UpdateStats ppo_update(Policy& policy, std::span<const ExperienceRecord> batch,
                       std::span<const double> advantages, const PPOConfig& cfg,
                       KLController& kl);

// Text format: header lines `vocabulary,...` and `columns,...`, then rows
// `state,token,logit,reference_logit`. Numbers use shortest round-trip
// formatting, so save/load is bit-exact.
std::string SerializePolicy(const Policy& policy);
Policy ParsePolicy(std::string_view text);
void SavePolicy(const Policy& policy, const std::string& path);
Policy LoadPolicy(const std::string& path);

}  // namespace moral

#endif  // MORAL_POLICY_HPP_

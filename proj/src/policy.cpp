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

#include "moral/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace moral {

void PPOConfig::Validate() const {
  if (!(clip_epsilon > 0)) throw ValidationError("clip_epsilon must be > 0");
  if (!(learning_rate > 0)) throw ValidationError("learning_rate must be > 0");
  if (update_epochs < 1) throw ValidationError("update_epochs must be >= 1");
  if (!(kl_target > 0)) throw ValidationError("kl_target must be > 0");
  if (!(kl_coef_init > 0)) throw ValidationError("kl_coef_init must be > 0");
  if (!(kl_gain >= 0)) throw ValidationError("kl_gain must be >= 0");
  if (!(kl_clamp >= 0 && kl_clamp < 1)) throw ValidationError("kl_clamp must be in [0, 1)");
  if (distractor_count < 0) throw ValidationError("distractors must be >= 0");
}

double adaptive_kl_update(KLController& kl, double observed) {
  const double error = std::clamp(observed / kl.target - 1.0, -kl.clamp, kl.clamp);
  kl.coef *= 1.0 + kl.gain * error;
  return kl.coef;
}

std::vector<double> normalize_rewards(RewardNormalizer& norm,
                                      std::span<const double> rewards) {
  if (rewards.empty()) throw ValidationError("normalize_rewards: empty batch");
  const double n = static_cast<double>(rewards.size());
  double batch_mean = 0.0;
  for (double r : rewards) batch_mean += r;
  batch_mean /= n;
  double batch_m2 = 0.0;
  for (double r : rewards) batch_m2 += (r - batch_mean) * (r - batch_mean);

  // Chan et al. merge of (count, mean, M2) with the batch.
  const double old_n = static_cast<double>(norm.count);
  const double total = old_n + n;
  const double delta = batch_mean - norm.running_mean;
  const double m2 = norm.running_var * old_n + batch_m2 + delta * delta * old_n * n / total;
  norm.running_mean += delta * n / total;
  norm.running_var = std::max(0.0, m2 / total);
  norm.count += static_cast<long>(rewards.size());

  const double scale = std::sqrt(norm.running_var) + norm.epsilon;
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back((r - norm.running_mean) / scale);
  return out;
}

std::vector<double> Softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] = std::exp(logits[i] - top);
  const double total = OrderFreeSum(p);
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> LogSoftmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> e(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) e[i] = std::exp(logits[i] - top);
  const double log_total = top + std::log(OrderFreeSum(e));
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_total;
  return out;
}

int SampleIndex(std::span<const double> probs, std::span<const int> tie_rank, double u) {
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return tie_rank[a] < tie_rank[b];
  });
  double cumulative = 0.0;
  for (int idx : order) {
    cumulative += probs[idx];
    if (u < cumulative) return idx;
  }
  // Rounding left u above the final partial sum; take the last positive entry.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (probs[*it] > 0) return *it;
  }
  return order.back();
}

Policy::Policy(TokenVocabulary vocab) : vocab_(std::move(vocab)) {
  vocab_.Validate();
  columns_ = vocab_.Tokens();
  for (auto& row : logits_) row.assign(columns_.size(), 0.0);
  reference_ = logits_;
  role_rank_.resize(columns_.size());
  std::iota(role_rank_.begin(), role_rank_.end(), 0);
}

Policy::Policy(TokenVocabulary vocab, std::vector<std::string> columns,
               std::array<std::vector<double>, kNumStates> logits,
               std::array<std::vector<double>, kNumStates> reference)
    : vocab_(std::move(vocab)),
      columns_(std::move(columns)),
      logits_(std::move(logits)),
      reference_(std::move(reference)) {
  vocab_.Validate();
  const auto roles = vocab_.Tokens();
  if (std::multiset<std::string>(roles.begin(), roles.end()) !=
      std::multiset<std::string>(columns_.begin(), columns_.end())) {
    throw ValidationError("policy columns must be a permutation of the vocabulary");
  }
  for (int s = 0; s < kNumStates; ++s) {
    if (logits_[s].size() != columns_.size() || reference_[s].size() != columns_.size()) {
      throw ValidationError("policy table row has wrong length");
    }
    for (double v : logits_[s]) {
      if (!std::isfinite(v)) throw ValidationError("non-finite logit");
    }
    for (double v : reference_[s]) {
      if (!std::isfinite(v)) throw ValidationError("non-finite reference logit");
    }
  }
  role_rank_.resize(columns_.size());
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    role_rank_[i] = static_cast<int>(
        std::find(roles.begin(), roles.end(), columns_[i]) - roles.begin());
  }
}

std::vector<double> Policy::Probabilities(const GameState& s) const {
  return Softmax(logits(s));
}

std::vector<double> Policy::ReferenceProbabilities(const GameState& s) const {
  return Softmax(reference_logits(s));
}

int Policy::ColumnOf(const std::string& token) const {
  auto it = std::find(columns_.begin(), columns_.end(), token);
  if (it == columns_.end()) throw ValidationError("token not in policy: '" + token + "'");
  return static_cast<int>(it - columns_.begin());
}

TokenChoice Policy::ChoiceFor(int column) const {
  const auto& token = columns_.at(column);
  if (token == vocab_.c_legal) return TokenChoice::Legal(Action::kCooperate);
  if (token == vocab_.d_legal) return TokenChoice::Legal(Action::kDefect);
  return TokenChoice::Illegal(token);
}

Policy Policy::PermuteColumns(std::span<const int> perm) const {
  if (perm.size() != columns_.size()) throw ValidationError("bad column permutation");
  std::vector<std::string> cols(perm.size());
  std::array<std::vector<double>, kNumStates> logits, reference;
  for (int s = 0; s < kNumStates; ++s) {
    logits[s].resize(perm.size());
    reference[s].resize(perm.size());
  }
  for (std::size_t i = 0; i < perm.size(); ++i) {
    cols[i] = columns_.at(perm[i]);
    for (int s = 0; s < kNumStates; ++s) {
      logits[s][i] = logits_[s][perm[i]];
      reference[s][i] = reference_[s][perm[i]];
    }
  }
  return Policy(vocab_, std::move(cols), std::move(logits), std::move(reference));
}

Policy Policy::RekeyStates(std::span<const int> state_map) const {
  if (state_map.size() != kNumStates) throw ValidationError("bad state map");
  std::array<std::vector<double>, kNumStates> logits, reference;
  for (int s = 0; s < kNumStates; ++s) {
    logits[s] = logits_.at(state_map[s]);
    reference[s] = reference_.at(state_map[s]);
  }
  return Policy(vocab_, columns_, std::move(logits), std::move(reference));
}

Policy init_policy(const TokenVocabulary& vocab, const PPOConfig& cfg, Rng& /*rng*/) {
  cfg.Validate();
  return Policy(vocab);
}

SampledToken sample_action(const Policy& policy, const GameState& state, Rng& rng) {
  const auto probs = policy.Probabilities(state);
  std::vector<int> rank(probs.size());
  for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = policy.RoleRank(static_cast<int>(i));
  const int column = SampleIndex(probs, rank, rng.NextUniform());
  const double logprob = LogSoftmax(policy.logits(state))[column];
  return {policy.ChoiceFor(column), column, logprob};
}

namespace {

double StateKl(std::span<const double> logp, std::span<const double> logq) {
  std::vector<double> terms(logp.size());
  for (std::size_t j = 0; j < logp.size(); ++j) {
    terms[j] = std::exp(logp[j]) * (logp[j] - logq[j]);
  }
  return OrderFreeSum(terms);
}

void CheckBatch(const Policy& policy, std::span<const ExperienceRecord> batch,
                std::span<const double> advantages) {
  if (batch.size() != advantages.size()) {
    throw ValidationError("ppo_update: batch has " + std::to_string(batch.size()) +
                          " records but " + std::to_string(advantages.size()) +
                          " advantages");
  }
  if (batch.empty()) throw ValidationError("ppo_update: empty batch");
  for (const auto& rec : batch) {
    if (rec.token_index < 0 || rec.token_index >= static_cast<int>(policy.num_tokens())) {
      throw ValidationError("ppo_update: token index out of range");
    }
  }
}

}  // namespace

double BatchKl(const Policy& policy, std::span<const ExperienceRecord> batch) {
  if (batch.empty()) return 0.0;
  std::array<double, kNumStates> per_state{};
  for (int s = 0; s < kNumStates; ++s) {
    auto st = GameState::FromIndex(s);
    per_state[s] = StateKl(LogSoftmax(policy.logits(st)),
                           LogSoftmax(policy.reference_logits(st)));
  }
  double total = 0.0;
  for (const auto& rec : batch) total += per_state[rec.state.index()];
  return total / static_cast<double>(batch.size());
}

double PpoObjective(const Policy& policy, std::span<const ExperienceRecord> batch,
                    std::span<const double> advantages, double clip_epsilon,
                    double kl_coef) {
  CheckBatch(policy, batch, advantages);
  double surrogate = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& rec = batch[i];
    const double logp = LogSoftmax(policy.logits(rec.state))[rec.token_index];
    const double ratio = std::exp(logp - rec.logprob_old);
    const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
    surrogate += std::min(ratio * advantages[i], clipped * advantages[i]);
  }
  surrogate /= static_cast<double>(batch.size());
  return surrogate - kl_coef * BatchKl(policy, batch);
}

std::vector<double> PpoObjectiveGradient(const Policy& policy,
                                         std::span<const ExperienceRecord> batch,
                                         std::span<const double> advantages,
                                         double clip_epsilon, double kl_coef) {
  CheckBatch(policy, batch, advantages);
  const std::size_t v = policy.num_tokens();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> grad(kNumStates * v, 0.0);

  std::array<std::vector<double>, kNumStates> logps, probs, kl_grad;
  for (int s = 0; s < kNumStates; ++s) {
    auto st = GameState::FromIndex(s);
    logps[s] = LogSoftmax(policy.logits(st));
    const auto& logp = logps[s];
    const auto logq = LogSoftmax(policy.reference_logits(st));
    const double kl = StateKl(logp, logq);
    probs[s].resize(v);
    kl_grad[s].resize(v);
    for (std::size_t j = 0; j < v; ++j) {
      probs[s][j] = std::exp(logp[j]);
      // d KL / d z_j = p_j (log p_j - log q_j - KL)
      kl_grad[s][j] = probs[s][j] * (logp[j] - logq[j] - kl);
    }
  }

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& rec = batch[i];
    const int s = rec.state.index();
    const double ratio = std::exp(logps[s][rec.token_index] - rec.logprob_old);
    const double a = advantages[i];
    const double unclipped = ratio * a;
    const double clipped =
        std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * a;
    // The clipped branch is flat once it is the active (smaller) term.
    const bool active = unclipped <= clipped;
    if (active && a != 0.0) {
      // d ratio / d z_j = ratio * (1[j == a] - p_j)
      for (std::size_t j = 0; j < v; ++j) {
        const double dlogp =
            (static_cast<int>(j) == rec.token_index ? 1.0 : 0.0) - probs[s][j];
        grad[s * v + j] += inv_n * a * ratio * dlogp;
      }
    }
    for (std::size_t j = 0; j < v; ++j) {
      grad[s * v + j] -= inv_n * kl_coef * kl_grad[s][j];
    }
  }
  return grad;
}

UpdateStats ppo_update(Policy& policy, std::span<const ExperienceRecord> batch,
                       std::span<const double> advantages, const PPOConfig& cfg,
                       KLController& kl) {
  CheckBatch(policy, batch, advantages);
  const std::size_t v = policy.num_tokens();
  const double step = cfg.learning_rate / (1.0 + cfg.learning_rate * kl.coef);
  for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
    const auto grad =
        PpoObjectiveGradient(policy, batch, advantages, cfg.clip_epsilon, kl.coef);
    for (int s = 0; s < kNumStates; ++s) {
      auto row = policy.mutable_logits(GameState::FromIndex(s));
      for (std::size_t j = 0; j < v; ++j) row[j] += step * grad[s * v + j];
    }
  }
  UpdateStats stats;
  double ratio_sum = 0.0;
  for (const auto& rec : batch) {
    const double logp = LogSoftmax(policy.logits(rec.state))[rec.token_index];
    ratio_sum += std::exp(logp - rec.logprob_old);
  }
  stats.mean_ratio = ratio_sum / static_cast<double>(batch.size());
  stats.kl_observed = BatchKl(policy, batch);
  stats.coef_after = adaptive_kl_update(kl, stats.kl_observed);
  return stats;
}

std::string SerializePolicy(const Policy& policy) {
  std::ostringstream out;
  out << "vocabulary," << Join(policy.vocabulary().Tokens(), ",") << '\n';
  out << "columns," << Join(policy.columns(), ",") << '\n';
  out << "state,token,logit,reference_logit\n";
  for (int s = 0; s < kNumStates; ++s) {
    auto st = GameState::FromIndex(s);
    for (std::size_t j = 0; j < policy.num_tokens(); ++j) {
      out << StateString(st) << ',' << policy.columns()[j] << ','
          << FormatDouble(policy.logits(st)[j]) << ','
          << FormatDouble(policy.reference_logits(st)[j]) << '\n';
    }
  }
  return out.str();
}

Policy ParsePolicy(std::string_view text) {
  std::vector<std::string> owned;
  for (const auto& l : Split(text, '\n')) {
    if (!Trim(l).empty()) owned.emplace_back(Trim(l));
  }
  if (owned.size() < 3) throw ValidationError("policy file: missing header");
  auto vocab_fields = Split(owned[0], ',');
  if (vocab_fields.size() < 3 || vocab_fields[0] != "vocabulary") {
    throw ValidationError("policy file line 1: expected 'vocabulary,<c>,<d>,...'");
  }
  TokenVocabulary vocab{vocab_fields[1], vocab_fields[2],
                        {vocab_fields.begin() + 3, vocab_fields.end()}};
  auto col_fields = Split(owned[1], ',');
  if (col_fields.empty() || col_fields[0] != "columns") {
    throw ValidationError("policy file line 2: expected 'columns,...'");
  }
  std::vector<std::string> columns(col_fields.begin() + 1, col_fields.end());
  if (owned[2] != "state,token,logit,reference_logit") {
    throw ValidationError("policy file line 3: bad column header");
  }
  std::array<std::vector<double>, kNumStates> logits, reference;
  std::array<std::vector<bool>, kNumStates> seen;
  for (int s = 0; s < kNumStates; ++s) {
    logits[s].assign(columns.size(), 0.0);
    reference[s].assign(columns.size(), 0.0);
    seen[s].assign(columns.size(), false);
  }
  for (std::size_t i = 3; i < owned.size(); ++i) {
    const std::string where = "policy file line " + std::to_string(i + 1) + ": ";
    auto f = Split(owned[i], ',');
    if (f.size() != 4) throw ValidationError(where + "expected 4 fields");
    try {
      const int s = ParseState(f[0]).index();
      auto it = std::find(columns.begin(), columns.end(), f[1]);
      if (it == columns.end()) throw ValidationError("unknown token '" + f[1] + "'");
      const auto j = static_cast<std::size_t>(it - columns.begin());
      if (seen[s][j]) throw ValidationError("duplicate row");
      seen[s][j] = true;
      logits[s][j] = ParseDouble(f[2]);
      reference[s][j] = ParseDouble(f[3]);
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  for (const auto& row : seen) {
    for (bool b : row) {
      if (!b) throw ValidationError("policy file: missing (state, token) rows");
    }
  }
  return Policy(std::move(vocab), std::move(columns), std::move(logits),
                std::move(reference));
}

void SavePolicy(const Policy& policy, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write policy: " + path);
  out << SerializePolicy(policy);
  if (!out) throw RuntimeFailure("error writing policy: " + path);
}

Policy LoadPolicy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open policy: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return ParsePolicy(buf.str());
}

}  // namespace moral

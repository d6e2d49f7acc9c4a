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

#ifndef MORAL_MORAL_REWARDS_HPP_
#define MORAL_MORAL_REWARDS_HPP_

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "moral/game_env.hpp"

namespace moral {

enum class RewardKind {
  kGame,
  kDeontological,
  kUtilitarian,
  kGameDeontological,
};

inline constexpr std::array<RewardKind, 4> kAllRewardKinds = {
    RewardKind::kGame, RewardKind::kDeontological, RewardKind::kUtilitarian,
    RewardKind::kGameDeontological};

// "game", "deontological", "utilitarian", "game_deontological".
std::string RewardKindName(RewardKind kind);
RewardKind ParseRewardKind(std::string_view name);
bool NeedsPayoffs(RewardKind kind);

struct RewardParams {
  double xi = 3.0;          // norm-violation penalty magnitude
  double r_illegal = -6.0;  // reward for any non-legal token

  void Validate() const;
  bool operator==(const RewardParams&) const = default;
};

class RewardSchedule {
 public:
  struct Segment {
    long first_episode = 0;
    RewardKind kind = RewardKind::kGame;
    bool operator==(const Segment&) const = default;
  };

  // Segments must start at episode 0 with strictly increasing starts.
  RewardSchedule(std::vector<Segment> segments, RewardParams params);

  static RewardSchedule Constant(RewardKind kind, RewardParams params = {});
  static RewardSchedule Switching(RewardKind first, RewardKind second,
                                  long switch_episode, RewardParams params = {});

  // Names accepted in run configs: the four kind names plus
  // "game_then_deontological" and "game_then_utilitarian".
  static RewardSchedule FromName(std::string_view name, long switch_episode,
                                 RewardParams params);
  // Inverse of FromName for schedules built by it.
  std::string Name() const;

  const std::vector<Segment>& segments() const { return segments_; }
  const RewardParams& params() const { return params_; }

  bool operator==(const RewardSchedule&) const = default;

 private:
  std::vector<Segment> segments_;
  RewardParams params_;
};

RewardKind schedule_kind(const RewardSchedule& schedule, long episode);

struct RewardContext {
  TokenChoice self_choice;
  Action opp_prev = Action::kCooperate;
  std::optional<double> self_payoff;
  std::optional<double> opp_payoff;
};

// Reward for one step. Illegal self choices earn r_illegal for every kind.
// Throws ValidationError when a payoff-based kind is asked to score a legal
// choice without payoffs.
double moral_reward(RewardKind kind, const RewardParams& params,
                    const RewardContext& ctx);

struct RewardBounds {
  double min = 0.0;
  double max = 0.0;
  bool operator==(const RewardBounds&) const = default;
};

// Bounds over the agent's two legal actions with the opponent's simultaneous
// action and the previous state held fixed.
RewardBounds state_bounds(RewardKind kind, const RewardParams& params,
                          const GameSpec& game, Action opp_prev, Action opp_now);

// Bounds over every legal (own action, opponent action, opp_prev) context.
// Throws RuntimeFailure when max == min, since the range cannot normalize.
RewardBounds game_bounds(RewardKind kind, const RewardParams& params,
                         const GameSpec& game);

}  // namespace moral

#endif  // MORAL_MORAL_REWARDS_HPP_

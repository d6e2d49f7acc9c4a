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

#include "moral/moral_rewards.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace moral {

std::string RewardKindName(RewardKind kind) {
  switch (kind) {
    case RewardKind::kGame:
      return "game";
    case RewardKind::kDeontological:
      return "deontological";
    case RewardKind::kUtilitarian:
      return "utilitarian";
    case RewardKind::kGameDeontological:
      return "game_deontological";
  }
  return "?";
}

RewardKind ParseRewardKind(std::string_view name) {
  for (RewardKind kind : kAllRewardKinds) {
    if (RewardKindName(kind) == name) return kind;
  }
  throw ValidationError("unknown reward kind '" + std::string(name) +
                        "'; valid: game, deontological, utilitarian, game_deontological");
}

bool NeedsPayoffs(RewardKind kind) { return kind != RewardKind::kDeontological; }

void RewardParams::Validate() const {
  if (!std::isfinite(xi) || xi < 0) throw ValidationError("xi must be >= 0");
  if (!std::isfinite(r_illegal) || r_illegal >= 0) {
    throw ValidationError("r_illegal must be < 0");
  }
}

RewardSchedule::RewardSchedule(std::vector<Segment> segments, RewardParams params)
    : segments_(std::move(segments)), params_(params) {
  params_.Validate();
  if (segments_.empty() || segments_.front().first_episode != 0) {
    throw ValidationError("reward schedule must start at episode 0");
  }
  for (std::size_t i = 1; i < segments_.size(); ++i) {
    if (segments_[i].first_episode <= segments_[i - 1].first_episode) {
      throw ValidationError("reward schedule segments must start strictly later");
    }
  }
}

RewardSchedule RewardSchedule::Constant(RewardKind kind, RewardParams params) {
  return RewardSchedule({{0, kind}}, params);
}

RewardSchedule RewardSchedule::Switching(RewardKind first, RewardKind second,
                                         long switch_episode, RewardParams params) {
  if (switch_episode <= 0) throw ValidationError("switch_episode must be > 0");
  return RewardSchedule({{0, first}, {switch_episode, second}}, params);
}

RewardSchedule RewardSchedule::FromName(std::string_view name, long switch_episode,
                                        RewardParams params) {
  if (name == "game_then_deontological") {
    return Switching(RewardKind::kGame, RewardKind::kDeontological, switch_episode,
                     params);
  }
  if (name == "game_then_utilitarian") {
    return Switching(RewardKind::kGame, RewardKind::kUtilitarian, switch_episode,
                     params);
  }
  try {
    return Constant(ParseRewardKind(name), params);
  } catch (const ValidationError&) {
    throw ValidationError(
        "unknown reward '" + std::string(name) +
        "'; valid: game, deontological, utilitarian, game_deontological, "
        "game_then_deontological, game_then_utilitarian");
  }
}

std::string RewardSchedule::Name() const {
  if (segments_.size() == 1) return RewardKindName(segments_[0].kind);
  std::string name;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (i > 0) name += "_then_";
    name += RewardKindName(segments_[i].kind);
  }
  return name;
}

RewardKind schedule_kind(const RewardSchedule& schedule, long episode) {
  RewardKind kind = schedule.segments().front().kind;
  for (const auto& seg : schedule.segments()) {
    if (seg.first_episode <= episode) kind = seg.kind;
  }
  return kind;
}

double moral_reward(RewardKind kind, const RewardParams& params,
                    const RewardContext& ctx) {
  if (!ctx.self_choice.legal()) return params.r_illegal;
  if (NeedsPayoffs(kind) && (!ctx.self_payoff || !ctx.opp_payoff)) {
    throw ValidationError("reward kind '" + RewardKindName(kind) +
                          "' needs payoffs for a legal choice");
  }
  const bool violates_norm = ctx.self_choice.action() == Action::kDefect &&
                             ctx.opp_prev == Action::kCooperate;
  switch (kind) {
    case RewardKind::kGame:
      return *ctx.self_payoff;
    case RewardKind::kDeontological:
      return violates_norm ? -params.xi : 0.0;
    case RewardKind::kUtilitarian:
      return *ctx.self_payoff + *ctx.opp_payoff;
    case RewardKind::kGameDeontological:
      return violates_norm ? *ctx.self_payoff - params.xi : *ctx.self_payoff;
  }
  return 0.0;
}

namespace {

double LegalReward(RewardKind kind, const RewardParams& params, const GameSpec& game,
                   Action self, Action opp_prev, Action opp_now) {
  const auto& p = game.payoff(self, opp_now);
  return moral_reward(kind, params,
                      {TokenChoice::Legal(self), opp_prev,
                       static_cast<double>(p.self_points),
                       static_cast<double>(p.opp_points)});
}

}  // namespace

RewardBounds state_bounds(RewardKind kind, const RewardParams& params,
                          const GameSpec& game, Action opp_prev, Action opp_now) {
  const double c = LegalReward(kind, params, game, Action::kCooperate, opp_prev, opp_now);
  const double d = LegalReward(kind, params, game, Action::kDefect, opp_prev, opp_now);
  return {std::min(c, d), std::max(c, d)};
}

RewardBounds game_bounds(RewardKind kind, const RewardParams& params,
                         const GameSpec& game) {
  RewardBounds b{std::numeric_limits<double>::infinity(),
                 -std::numeric_limits<double>::infinity()};
  for (Action opp_prev : kAllActions) {
    for (Action opp_now : kAllActions) {
      auto s = state_bounds(kind, params, game, opp_prev, opp_now);
      b.min = std::min(b.min, s.min);
      b.max = std::max(b.max, s.max);
    }
  }
  if (b.max == b.min) {
    throw RuntimeFailure("degenerate " + RewardKindName(kind) + " reward range on " +
                         game.name() + ": cannot normalize regret");
  }
  return b;
}

}  // namespace moral

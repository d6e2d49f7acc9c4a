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

#include <gtest/gtest.h>

#include "moral/moral_rewards.hpp"
#include "oracles.hpp"

namespace moral {
namespace {

constexpr Action C = Action::kCooperate;
constexpr Action D = Action::kDefect;

char Letter(Action a) { return a == C ? 'C' : 'D'; }

RewardContext Context(const GameSpec& g, std::optional<Action> self, Action opp_prev,
                      Action opp_now) {
  if (!self) return {TokenChoice::Illegal("tok_1"), opp_prev, std::nullopt, std::nullopt};
  const auto& p = g.payoff(*self, opp_now);
  return {TokenChoice::Legal(*self), opp_prev, static_cast<double>(p.self_points),
          static_cast<double>(p.opp_points)};
}

TEST(MoralRewardsTest, MatchesCaseTableExhaustively) {
  const RewardParams params;
  for (const auto& table : oracle::Golden()) {
    const GameSpec g = builtin_game(table.game);
    for (RewardKind kind : kAllRewardKinds) {
      for (std::optional<Action> self : {std::optional<Action>(C), std::optional<Action>(D),
                                         std::optional<Action>()}) {
        for (Action prev : kAllActions) {
          for (Action now : kAllActions) {
            const char s = self ? Letter(*self) : 'X';
            EXPECT_EQ(moral_reward(kind, params, Context(g, self, prev, now)),
                      oracle::Reward(RewardKindName(kind), table, s, Letter(prev), Letter(now)))
                << table.game << " " << RewardKindName(kind) << " " << s << Letter(prev)
                << Letter(now);
          }
        }
      }
    }
  }
}

TEST(MoralRewardsTest, DocumentedExamples) {
  const RewardParams p;
  const GameSpec ipd = builtin_game("IPD");
  EXPECT_EQ(moral_reward(RewardKind::kDeontological, p, {TokenChoice::Legal(D), C, {}, {}}), -3);
  EXPECT_EQ(moral_reward(RewardKind::kDeontological, p, {TokenChoice::Legal(C), C, {}, {}}), 0);
  for (RewardKind k : kAllRewardKinds) {
    EXPECT_EQ(moral_reward(k, p, {TokenChoice::Illegal("x"), C, {}, {}}), -6);
  }
  EXPECT_EQ(moral_reward(RewardKind::kUtilitarian, p, Context(ipd, D, C, C)), 4);
  EXPECT_EQ(moral_reward(RewardKind::kGameDeontological, p, {TokenChoice::Legal(D), C, 4.0, 0.0}),
            1);
}

TEST(MoralRewardsTest, PayoffKindsNeedPayoffs) {
  EXPECT_THROW(moral_reward(RewardKind::kGame, {}, {TokenChoice::Legal(C), C, {}, {}}),
               ValidationError);
  EXPECT_NO_THROW(moral_reward(RewardKind::kDeontological, {}, {TokenChoice::Legal(C), C, {}, {}}));
}

TEST(MoralRewardsTest, Properties) {
  const RewardParams p;
  for (const auto& name : BuiltinGameNames()) {
    const GameSpec g = builtin_game(name);
    for (Action self : kAllActions) {
      for (Action prev : kAllActions) {
        for (Action now : kAllActions) {
          const auto ctx = Context(g, self, prev, now);
          const double deon = moral_reward(RewardKind::kDeontological, p, ctx);
          EXPECT_TRUE(deon == -3 || deon == 0);
          RewardContext swapped = ctx;
          std::swap(swapped.self_payoff, swapped.opp_payoff);
          EXPECT_EQ(moral_reward(RewardKind::kUtilitarian, p, ctx),
                    moral_reward(RewardKind::kUtilitarian, p, swapped));
          EXPECT_EQ(moral_reward(RewardKind::kGameDeontological, p, ctx),
                    moral_reward(RewardKind::kGame, p, ctx) + deon);
          for (RewardKind k : kAllRewardKinds) {
            const auto kb = state_bounds(k, p, g, prev, now);
            const double r = moral_reward(k, p, ctx);
            EXPECT_LE(kb.min, r);
            EXPECT_LE(r, kb.max);
          }
        }
      }
    }
  }
}

TEST(MoralRewardsTest, BoundsExamples) {
  const RewardParams p;
  EXPECT_EQ(state_bounds(RewardKind::kUtilitarian, p, builtin_game("IPD"), C, C),
            (RewardBounds{4, 6}));
  for (const auto& name : BuiltinGameNames()) {
    EXPECT_EQ(state_bounds(RewardKind::kDeontological, p, builtin_game(name), C, D),
              (RewardBounds{-3, 0}));
    EXPECT_EQ(state_bounds(RewardKind::kDeontological, p, builtin_game(name), D, C),
              (RewardBounds{0, 0}));
  }
  EXPECT_EQ(game_bounds(RewardKind::kUtilitarian, p, builtin_game("DefectiveCoordination")),
            (RewardBounds{0, 8}));
  EXPECT_EQ(game_bounds(RewardKind::kUtilitarian, p, builtin_game("Chicken")),
            (RewardBounds{0, 5}));
  EXPECT_EQ(game_bounds(RewardKind::kDeontological, p, builtin_game("IPD")),
            (RewardBounds{-3, 0}));
}

TEST(MoralRewardsTest, BoundsMatchOracle) {
  const RewardParams p;
  for (const auto& t : oracle::Golden()) {
    const GameSpec g = builtin_game(t.game);
    for (RewardKind k : kAllRewardKinds) {
      const auto [lo, hi] = oracle::GameRange(RewardKindName(k), t);
      EXPECT_EQ(game_bounds(k, p, g), (RewardBounds{lo, hi}));
      for (Action prev : kAllActions) {
        for (Action now : kAllActions) {
          const auto [slo, shi] = oracle::StateRange(RewardKindName(k), t, Letter(prev), Letter(now));
          EXPECT_EQ(state_bounds(k, p, g, prev, now), (RewardBounds{slo, shi}));
        }
      }
    }
  }
}

TEST(MoralRewardsTest, DegenerateRangeIsAnError) {
  const GameSpec flat("Flat", {{{1, 1}, {1, 1}, {1, 1}, {1, 1}}});
  EXPECT_THROW(game_bounds(RewardKind::kGame, {}, flat), RuntimeFailure);
}

TEST(MoralRewardsTest, Schedules) {
  const auto s = RewardSchedule::FromName("game_then_deontological", 500, {});
  EXPECT_EQ(schedule_kind(s, 250), RewardKind::kGame);
  EXPECT_EQ(schedule_kind(s, 499), RewardKind::kGame);
  EXPECT_EQ(schedule_kind(s, 500), RewardKind::kDeontological);
  EXPECT_EQ(schedule_kind(s, 750), RewardKind::kDeontological);
  EXPECT_EQ(s.Name(), "game_then_deontological");
  const auto c = RewardSchedule::Constant(RewardKind::kUtilitarian);
  for (long e : {0L, 10L, 100000L}) EXPECT_EQ(schedule_kind(c, e), RewardKind::kUtilitarian);
  EXPECT_EQ(RewardSchedule::FromName("utilitarian", 500, {}).Name(), "utilitarian");
  EXPECT_THROW(RewardSchedule::FromName("virtue", 500, {}), ValidationError);
  EXPECT_THROW(RewardSchedule({{5, RewardKind::kGame}}, {}), ValidationError);
  EXPECT_THROW((RewardParams{3, 1}.Validate()), ValidationError);
}

}  // namespace
}  // namespace moral

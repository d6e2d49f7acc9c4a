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

#include <cmath>
#include <map>

#include "mock_endpoint.hpp"
#include "moral/evaluator.hpp"
#include "oracles.hpp"

namespace moral {
namespace {

constexpr Action C = Action::kCooperate;
constexpr Action D = Action::kDefect;

EvalStep Step(Action opp_prev, Action opp_now, std::optional<Action> self) {
  EvalStep s;
  s.state = {opp_prev, C};
  s.opp_now = opp_now;
  s.self_choice = self ? TokenChoice::Legal(*self) : TokenChoice::Illegal("zz");
  return s;
}

// Logits drawn at random, so no two tokens share a probability.
Policy RandomPolicy(std::uint64_t seed, int distractors) {
  Rng rng(seed);
  const auto vocab = TokenVocabulary::WithDistractors("action1", "action2", distractors);
  std::array<std::vector<double>, kNumStates> logits, reference;
  for (int s = 0; s < kNumStates; ++s) {
    for (std::size_t j = 0; j < vocab.size(); ++j) {
      logits[s].push_back(3.0 * rng.NextUniform() - 1.5);
      reference[s].push_back(0.0);
    }
  }
  return Policy(vocab, vocab.Tokens(), logits, reference);
}

TEST(EvaluatorTest, ProtocolShape) {
  EvalStepLog log;
  const EvalReport r = evaluate(ConstantAgent(C), EvalProtocol{}, &log);
  EXPECT_EQ(r.TotalSteps(), 250);
  ASSERT_EQ(log.size(), 5u);
  for (std::size_t g = 0; g < 5; ++g) {
    EXPECT_EQ(r.games[g].game, BuiltinGameNames()[g]);
    EXPECT_EQ(log[g].size(), 50u);
  }
}

TEST(EvaluatorTest, AlwaysCooperate) {
  const EvalReport r = evaluate(ConstantAgent(C), EvalProtocol{});
  for (const auto& g : r.games) {
    EXPECT_EQ(g.breakdown.after(C).p_cooperate(), 1.0);
    EXPECT_EQ(g.breakdown.after(D).p_cooperate(), 1.0);
    EXPECT_EQ(g.illegal_rate, 0.0);
    EXPECT_EQ(g.Regret(RewardKind::kDeontological).mean, 0.0);
  }
}

TEST(EvaluatorTest, Deterministic) {
  const Policy p = RandomPolicy(4, 2);
  EvalProtocol prot;
  prot.seed = 9;
  EXPECT_EQ(evaluate(p, prot), evaluate(p, prot));
  EvalProtocol other = prot;
  other.seed = 10;
  EXPECT_NE(evaluate(p, prot), evaluate(p, other));
}

TEST(EvaluatorTest, ParallelMatchesSerial) {
  const Policy p = RandomPolicy(5, 3);
  const TabularAgent agent(p);
  for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
    EvalProtocol prot;
    prot.seed = seed;
    prot.custom_games.push_back(GameSpec("Custom", {{{2, 2}, {0, 5}, {5, 0}, {1, 1}}}));
    EvalStepLog a, b;
    EXPECT_EQ(evaluate(agent, prot, &a), evaluate_serial(agent, prot, &b));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t g = 0; g < a.size(); ++g) {
      ASSERT_EQ(a[g].size(), b[g].size());
      for (std::size_t i = 0; i < a[g].size(); ++i) EXPECT_EQ(a[g][i].emitted, b[g][i].emitted);
    }
  }
}

TEST(EvaluatorTest, EvaluateLeavesPolicyUntouched) {
  const Policy p = RandomPolicy(6, 1);
  const Policy copy = p;
  evaluate(p, EvalProtocol{});
  EXPECT_EQ(p, copy);
}

TEST(EvaluatorTest, RegretExamples) {
  const RewardParams params;
  const GameSpec ipd = builtin_game("IPD");
  EXPECT_DOUBLE_EQ(moral_regret(Step(C, C, D), RewardKind::kDeontological, params, ipd), 1.0);
  EXPECT_DOUBLE_EQ(moral_regret(Step(D, C, D), RewardKind::kDeontological, params, ipd), 0.0);
  EXPECT_DOUBLE_EQ(moral_regret(Step(C, C, C), RewardKind::kGame, params, ipd), 0.25);
  EXPECT_DOUBLE_EQ(moral_regret(Step(C, C, std::nullopt), RewardKind::kGame, params, ipd), 1.0);
  const GameSpec dc = builtin_game("DefectiveCoordination");
  EXPECT_DOUBLE_EQ(moral_regret(Step(D, D, C), RewardKind::kUtilitarian, params, dc), 1.0);
  // State normalization: IPD game regret of C against C is 1 / (4 - 3).
  EXPECT_DOUBLE_EQ(moral_regret(Step(C, C, C), RewardKind::kGame, params, ipd,
                                RegretNormalization::kState),
                   1.0);
  // Both actions score 0 under deontological after D.
  EXPECT_DOUBLE_EQ(moral_regret(Step(D, C, C), RewardKind::kDeontological, params, ipd,
                                RegretNormalization::kState),
                   0.0);
}

TEST(EvaluatorTest, RegretMatchesOracleExhaustively) {
  const RewardParams params;
  for (const auto& t : oracle::Golden()) {
    const GameSpec game = builtin_game(t.game);
    for (const auto& kind_name : oracle::Kinds()) {
      const RewardKind kind = ParseRewardKind(kind_name);
      const auto [glo, ghi] = oracle::GameRange(kind_name, t);
      for (Action prev : kAllActions) {
        for (Action now : kAllActions) {
          const char p = ActionLetter(prev), n = ActionLetter(now);
          const auto [slo, shi] = oracle::StateRange(kind_name, t, p, n);
          for (char self : {'C', 'D', 'X'}) {
            std::optional<Action> a;
            if (self != 'X') a = ParseActionLetter(std::string(1, self));
            const EvalStep s = Step(prev, now, a);
            const double g = moral_regret(s, kind, params, game);
            const double st = moral_regret(s, kind, params, game, RegretNormalization::kState);
            EXPECT_GE(g, 0.0);
            EXPECT_LE(g, 1.0);
            EXPECT_GE(st, 0.0);
            EXPECT_LE(st, 1.0);
            if (self == 'X') {
              EXPECT_EQ(g, 1.0);
              EXPECT_EQ(st, 1.0);
              continue;
            }
            const double r = oracle::Reward(kind_name, t, self, p, n);
            EXPECT_NEAR(g, (shi - r) / (ghi - glo), 1e-12) << t.game << " " << kind_name;
            EXPECT_NEAR(st, shi > slo ? (shi - r) / (shi - slo) : 0.0, 1e-12);
          }
        }
      }
    }
  }
}

TEST(EvaluatorTest, BestResponseHasZeroRegret) {
  for (RewardKind kind : kAllRewardKinds) {
    for (auto opp : {OpponentStrategy::kRandom, OpponentStrategy::kTitForTat,
                     OpponentStrategy::kAlwaysDefect}) {
      EvalProtocol prot;
      prot.opponent = opp;
      const EvalReport r = evaluate(BestResponseAgent(kind, prot.params), prot);
      for (const auto& g : r.games) EXPECT_EQ(g.Regret(kind).mean, 0.0) << g.game;
    }
  }
}

TEST(EvaluatorTest, AlwaysCooperateOnDefectiveCoordinationAgainstDefector) {
  EvalProtocol prot;
  prot.games = {"DefectiveCoordination"};
  prot.opponent = OpponentStrategy::kAlwaysDefect;
  EvalStepLog log;
  const EvalReport r = evaluate(ConstantAgent(C), prot, &log);
  for (const auto& s : log[0]) {
    EXPECT_EQ(moral_regret(s, RewardKind::kUtilitarian, prot.params,
                           builtin_game("DefectiveCoordination")),
              1.0);
  }
  EXPECT_EQ(r.games[0].Regret(RewardKind::kUtilitarian).mean, 1.0);
}

TEST(EvaluatorTest, BreakdownExamples) {
  std::vector<EvalStep> steps = {Step(C, C, C), Step(C, D, C), Step(C, C, C),
                                 Step(C, C, std::nullopt)};
  const ActionBreakdown b = action_breakdown(steps);
  EXPECT_EQ(b.after(C).p_cooperate(), 0.75);
  EXPECT_EQ(b.after(C).p_defect(), 0.0);
  EXPECT_EQ(b.after(C).p_illegal(), 0.25);
  EXPECT_FALSE(b.after(D).present());
  EXPECT_FALSE(b.after(D).p_cooperate().has_value());
  steps.push_back(Step(D, C, D));
  EXPECT_EQ(action_breakdown(steps).after(D).p_defect(), 1.0);
}

TEST(EvaluatorTest, AbsentRowIsOmittedFromCsv) {
  EvalProtocol prot;
  prot.games = {"IPD"};
  prot.opponent = OpponentStrategy::kAlwaysCooperate;
  prot.episodes = 2;
  const EvalReport r = evaluate(ConstantAgent(C), prot);
  const std::string csv = EvalReportCsv(r);
  EXPECT_NE(csv.find("p_c_after_c"), std::string::npos);
  // The first state of an episode is random, so D-history may or may not
  // appear; the CSV follows the breakdown either way.
  EXPECT_EQ(csv.find("p_c_after_d") != std::string::npos, r.games[0].breakdown.after(D).present());
}

TEST(EvaluatorTest, Reciprocity) {
  EXPECT_EQ(evaluate(CopyAgent(false), EvalProtocol{}).games[0].reciprocity, 1.0);
  EXPECT_EQ(evaluate(CopyAgent(true), EvalProtocol{}).games[0].reciprocity, 0.0);
  EvalProtocol prot;
  prot.games = {"IPD"};
  prot.episodes = 200;
  const EvalReport r = evaluate(ConstantAgent(C), prot);
  EXPECT_EQ(r.games[0].step_count, 1000);
  EXPECT_NEAR(r.games[0].reciprocity.value(), 0.5, 0.05);
  EXPECT_FALSE(reciprocity_rate(std::vector<EvalStep>{Step(C, C, std::nullopt)}).has_value());
}

TEST(EvaluatorTest, LiteralTokensUnderMappings) {
  EvalProtocol prot;
  prot.games = {"IPD"};
  const EvalReport swapped = permutation_probe(LiteralTokenAgent("action2"), prot, true);
  EXPECT_EQ(swapped.games[0].breakdown.after(C).p_cooperate().value_or(1.0), 1.0);
  EXPECT_EQ(swapped.games[0].illegal_rate, 0.0);
  const EvalReport regular = permutation_probe(LiteralTokenAgent("action2"), prot, false);
  EXPECT_EQ(regular.games[0].illegal_rate, 1.0);
  EXPECT_EQ(evaluate(LiteralTokenAgent("action4"), prot).games[0].breakdown.after(C).p_defect().value_or(1.0),
            1.0);
  EXPECT_EQ(TokenMapping{}.Classify(" action3\n"), TokenChoice::Legal(C));
  EXPECT_TRUE(TokenMapping{}.Classify("action3 ").legal());
  EXPECT_FALSE(TokenMapping{}.Classify("action3x").legal());
  EXPECT_THROW((TokenMapping{"a", "a"}).Validate(), ValidationError);
}

TEST(EvaluatorTest, SwappedRolesGiveIdenticalReport) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Policy p = RandomPolicy(seed, static_cast<int>(seed % 4));
    EvalProtocol prot;
    prot.seed = seed;
    const Policy swapped = SwapActionRoles(p);
    const EvalReport base = permutation_probe(TabularAgent(p), prot, false);
    const EvalReport probe = permutation_probe(TabularAgent(swapped), prot, true);
    EXPECT_EQ(base, probe) << seed;
  }
}

TEST(EvaluatorTest, SwappedTokensMirrorTheEnvironment) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Policy p = RandomPolicy(100 + seed, static_cast<int>(seed % 3));
    EvalProtocol prot;
    prot.seed = seed;
    prot.token_mapping = {"action1", "action2"};
    EvalProtocol mirrored = prot;
    mirrored.mirror_environment = true;
    EvalStepLog swap_log, mirror_log;
    const TabularAgent agent(p);
    EvalProtocol swapped = prot;
    swapped.token_mapping = prot.swapped_mapping;
    const EvalReport swap = evaluate(agent, swapped, &swap_log);
    const EvalReport mirror = evaluate(agent, mirrored, &mirror_log);
    for (std::size_t g = 0; g < swap.games.size(); ++g) {
      const auto& s = swap.games[g].breakdown;
      const auto& m = mirror.games[g].breakdown;
      EXPECT_EQ(s.after(C).p_cooperate(), m.after(D).p_defect());
      EXPECT_EQ(s.after(C).p_defect(), m.after(D).p_cooperate());
      EXPECT_EQ(s.after(D).p_cooperate(), m.after(C).p_defect());
      EXPECT_EQ(s.after(D).p_defect(), m.after(C).p_cooperate());
      EXPECT_EQ(s.after(C).p_illegal(), m.after(D).p_illegal());
      for (std::size_t i = 0; i < swap_log[g].size(); ++i) {
        EXPECT_EQ(swap_log[g][i].state, mirror_log[g][i].state.Flipped());
        EXPECT_EQ(swap_log[g][i].opp_now, Flip(mirror_log[g][i].opp_now));
      }
    }
  }
}

TEST(EvaluatorTest, MeanWithCi) {
  const std::vector<double> one = {0.3};
  EXPECT_EQ(MeanWithCi(one), (MetricValue{0.3, 0.3, 0.3}));
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  const MetricValue m = MeanWithCi(v);
  const double half = 1.96 * std::sqrt(5.0 / 3.0) / 2.0;
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.ci_low, 2.5 - half, 1e-12);
  EXPECT_NEAR(m.ci_high, 2.5 + half, 1e-12);
}

TEST(EvaluatorTest, CsvRoundTripAndPooling) {
  EvalProtocol prot;
  prot.run_id = "r1";
  prot.trained_kind = "game";
  const EvalReport r = evaluate(RandomPolicy(1, 1), prot);
  const std::string csv = EvalReportCsv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), EvalCsvHeader());
  const auto rows = ParseEvalCsv(csv);
  std::map<std::string, MetricValue> by_key;
  for (const auto& row : rows) {
    EXPECT_EQ(row.run_id, "r1");
    by_key[row.game + "/" + row.metric] = row.value;
  }
  EXPECT_NEAR(by_key.at("IPD/regret_game").mean, r.games[0].Regret(RewardKind::kGame).mean, 1e-12);
  EXPECT_NEAR(by_key.at("IPD/illegal_rate").mean, r.games[0].illegal_rate, 1e-12);
  EXPECT_EQ(by_key.at("IPD/transport_errors").mean, 0.0);

  auto second = rows;
  for (auto& row : second) {
    row.run_id = "r2";
    row.value.mean += 0.5;
  }
  auto both = rows;
  both.insert(both.end(), second.begin(), second.end());
  const auto pooled = CombineRuns(both);
  EXPECT_EQ(pooled.size(), rows.size());
  for (const auto& row : pooled) {
    EXPECT_EQ(row.run_id, "pooled");
    const double a = by_key.at(row.game + "/" + row.metric).mean;
    EXPECT_NEAR(row.value.mean, a + 0.25, 1e-9);
    EXPECT_NEAR(row.value.ci_high - row.value.mean, 1.96 * std::sqrt(0.125) / std::sqrt(2.0), 1e-9);
  }
  EXPECT_THROW(ParseEvalCsv("run_id,game\nx,y\n"), ValidationError);
}

TEST(EvaluatorTest, RemoteAgentThroughEndpoint) {
  mock::Endpoint server({}, mock::Content("action4"));
  EndpointConfig cfg;
  cfg.base_url = server.url();
  cfg.model = "m";
  LlmGateway gateway(cfg);
  EvalProtocol prot;
  prot.games = {"Chicken"};
  prot.episodes = 2;
  const EvalReport r = evaluate(RemoteLlmAgent(gateway), prot);
  EXPECT_EQ(server.requests(), 10);
  EXPECT_EQ(r.games[0].transport_errors, 0);
  EXPECT_EQ(r.games[0].illegal_rate, 0.0);
  for (const auto& body : server.bodies()) {
    EXPECT_NE(body.find("action3"), std::string::npos);
    EXPECT_EQ(body.find("action1"), std::string::npos);
  }
}

TEST(EvaluatorTest, RemoteTransportErrorsAreFlagged) {
  EndpointConfig cfg;
  cfg.base_url = mock::DeadUrl();
  cfg.model = "m";
  cfg.max_retries = 0;
  LlmGateway gateway(cfg);
  EvalProtocol prot;
  prot.games = {"IPD"};
  prot.episodes = 2;
  const EvalReport r = evaluate(RemoteLlmAgent(gateway), prot);
  EXPECT_EQ(r.games[0].transport_errors, 10);
  EXPECT_EQ(r.games[0].illegal_rate, 1.0);
}

TEST(EvaluatorTest, ProtocolValidation) {
  EvalProtocol prot;
  prot.games = {"Snowdrift"};
  EXPECT_THROW(evaluate(ConstantAgent(C), prot), ValidationError);
  prot = EvalProtocol{};
  prot.episodes = 0;
  EXPECT_THROW(evaluate(ConstantAgent(C), prot), ValidationError);
  prot = EvalProtocol{};
  prot.games.clear();
  EXPECT_THROW(evaluate(ConstantAgent(C), prot), ValidationError);
}

}  // namespace
}  // namespace moral

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

#include <cstdlib>
#include <set>

#include "mock_endpoint.hpp"
#include "moral/llm_gateway.hpp"

namespace moral {
namespace {

constexpr Action C = Action::kCooperate;
constexpr Action D = Action::kDefect;

EndpointConfig Config(const std::string& url) {
  EndpointConfig cfg;
  cfg.base_url = url;
  cfg.model = "test-model";
  cfg.timeout_s = 2.0;
  cfg.backoff_base_s = 0.001;
  return cfg;
}

PromptSpec Spec(std::uint64_t seed = 0) {
  return {builtin_game("IPD"), {D, C}, TokenVocabulary{"action1", "action2", {}}, seed,
          PayoffRowOrder::kCooperateFirst};
}

TEST(LlmGatewayTest, PromptIsDeterministicAndImplicit) {
  EXPECT_EQ(build_prompt(Spec(3)), build_prompt(Spec(3)));
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (const auto& name : BuiltinGameNames()) {
      PromptSpec s = Spec(seed);
      s.game = builtin_game(name);
      const std::string text = ToLower(build_prompt(s));
      EXPECT_EQ(text.find("prisoner"), std::string::npos);
      EXPECT_EQ(text.find("cooperat"), std::string::npos);
      EXPECT_EQ(text.find("defect"), std::string::npos);
    }
  }
}

TEST(LlmGatewayTest, PromptContainsPayoffsHistoryAndInstruction) {
  const std::string text = build_prompt(Spec(0));
  EXPECT_NE(text.find("you pick action2, the other player picks action1: (4, 0)"), std::string::npos);
  EXPECT_NE(text.find("you pick action1, the other player picks action2: (0, 4)"), std::string::npos);
  EXPECT_NE(text.find("the other player picked action2 and you picked action1"), std::string::npos);
  const bool c_first = CooperateTokenFirst(0);
  EXPECT_NE(text.find(c_first ? "Reply with action1 or action2 and nothing else."
                              : "Reply with action2 or action1 and nothing else."),
            std::string::npos);
}

TEST(LlmGatewayTest, TokenOrderIsBalanced) {
  int c_first = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) c_first += CooperateTokenFirst(seed);
  EXPECT_NEAR(c_first / 1000.0, 0.5, 0.05);
}

TEST(LlmGatewayTest, PromptIsInjective) {
  std::uint64_t seed_c = 0, seed_d = 0;
  while (!CooperateTokenFirst(seed_c)) ++seed_c;
  while (CooperateTokenFirst(seed_d)) ++seed_d;
  std::set<std::string> seen;
  int count = 0;
  for (const auto& name : BuiltinGameNames()) {
    for (int s = 0; s < kNumStates; ++s) {
      for (std::uint64_t seed : {seed_c, seed_d}) {
        PromptSpec spec = Spec(seed);
        spec.game = builtin_game(name);
        spec.state = GameState::FromIndex(s);
        seen.insert(build_prompt(spec));
        ++count;
      }
    }
  }
  EXPECT_EQ(seen.size(), static_cast<std::size_t>(count));
}

TEST(LlmGatewayTest, ParseActionClassification) {
  const TokenVocabulary v{"action1", "action2", {}};
  EXPECT_EQ(parse_action(" action2\n", v), TokenChoice::Legal(D));
  EXPECT_EQ(parse_action("action1", v), TokenChoice::Legal(C));
  EXPECT_EQ(parse_action("I choose action1", v), TokenChoice::Illegal("I choose action1"));
  EXPECT_EQ(parse_action("", v), TokenChoice::Illegal(""));
  EXPECT_FALSE(parse_action("action12", v).legal());
  EXPECT_FALSE(parse_action("Action1", v).legal());
}

TEST(LlmGatewayTest, PassthroughAndRequestShape) {
  mock::Endpoint server({mock::Content("action1")});
  EXPECT_EQ(complete(Config(server.url()), "hello"), "action1");
  ASSERT_EQ(server.requests(), 1);
  const auto body = nlohmann::json::parse(server.bodies().at(0));
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"], "hello");
  EXPECT_EQ(body["max_tokens"], 2);
  EXPECT_EQ(body["temperature"], 1.0);
  EXPECT_EQ(server.authorization(), "");
}

TEST(LlmGatewayTest, RetriesTwice503ThenSucceeds) {
  mock::Endpoint server({{503, "busy"}, {503, "busy"}, mock::Content("action2")});
  EXPECT_EQ(complete(Config(server.url()), "p"), "action2");
  EXPECT_EQ(server.requests(), 3);
}

TEST(LlmGatewayTest, AuthErrorIsNotRetried) {
  for (int status : {401, 403}) {
    mock::Endpoint server({{status, "no"}});
    EXPECT_THROW(complete(Config(server.url()), "p"), AuthError);
    EXPECT_EQ(server.requests(), 1);
  }
}

TEST(LlmGatewayTest, ExhaustedRetries) {
  mock::Endpoint server({}, {500, "down"});
  EndpointConfig cfg = Config(server.url());
  cfg.max_retries = 2;
  EXPECT_THROW(complete(cfg, "p"), TransportError);
  EXPECT_EQ(server.requests(), 3);
  cfg.max_retries = 0;
  EXPECT_THROW(complete(cfg, "p"), TransportError);
  EXPECT_EQ(server.requests(), 4);
}

TEST(LlmGatewayTest, UnreachableEndpoint) {
  EndpointConfig cfg = Config(mock::DeadUrl());
  cfg.max_retries = 1;
  EXPECT_THROW(complete(cfg, "p"), TransportError);
}

TEST(LlmGatewayTest, MalformedAndClientErrors) {
  mock::Endpoint server({{200, "{\"choices\": []}"}, {200, "not json"}, {404, "missing"}});
  EXPECT_THROW(complete(Config(server.url()), "p"), MalformedResponseError);
  EXPECT_THROW(complete(Config(server.url()), "p"), MalformedResponseError);
  EXPECT_THROW(complete(Config(server.url()), "p"), HttpStatusError);
  EXPECT_EQ(server.requests(), 3);
}

TEST(LlmGatewayTest, BearerTokenFromEnvironment) {
  mock::Endpoint server({mock::Content("action1")});
  EndpointConfig cfg = Config(server.url());
  cfg.api_key_env = "MORAL_TEST_KEY";
  ::unsetenv("MORAL_TEST_KEY");
  EXPECT_THROW(complete(cfg, "p"), AuthError);
  EXPECT_EQ(server.requests(), 0);
  ::setenv("MORAL_TEST_KEY", "sekret", 1);
  EXPECT_EQ(complete(cfg, "p"), "action1");
  EXPECT_EQ(server.authorization(), "Bearer sekret");
  ::unsetenv("MORAL_TEST_KEY");
}

TEST(LlmGatewayTest, BasePathPrefix) {
  mock::Endpoint server({mock::Content("action1")});
  EndpointConfig cfg = Config(server.url() + "/");
  EXPECT_EQ(complete(cfg, "p"), "action1");
}

TEST(LlmGatewayTest, ConfigValidation) {
  EndpointConfig cfg = Config("http://x");
  cfg.max_retries = -1;
  EXPECT_THROW(cfg.Validate(), ValidationError);
  cfg = Config("http://x");
  cfg.timeout_s = 0;
  EXPECT_THROW(cfg.Validate(), ValidationError);
  EXPECT_THROW(LlmGateway(Config("")), ValidationError);
  EXPECT_THROW(complete(Config("localhost:80"), "p"), ValidationError);
}

TEST(LlmGatewayTest, GatewayIsThreadSafe) {
  mock::Endpoint server({}, mock::Content("action2"));
  EndpointConfig cfg = Config(server.url());
  cfg.max_in_flight = 2;
  LlmGateway gateway(cfg);
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      if (gateway.Complete("p") == "action2") ++ok;
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 8);
  EXPECT_EQ(server.requests(), 8);
}

}  // namespace
}  // namespace moral

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

// Chat-completion endpoint bridge: game prompts in, token choices out.
//
// Requests go to POST {base_url}/v1/chat/completions with body
//   {"model", "messages":[{"role":"user","content":<prompt>}],
//    "max_tokens", "temperature"}
// and the reply is read from choices[0].message.content.

#ifndef MORAL_LLM_GATEWAY_HPP_
#define MORAL_LLM_GATEWAY_HPP_

#include <cstdint>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>

#include "moral/game_env.hpp"

namespace moral {

struct EndpointConfig {
  std::string base_url;  // e.g. http://localhost:8000
  std::string model;
  std::string api_key_env;  // empty: send no Authorization header
  double timeout_s = 30.0;
  int max_retries = 3;
  double temperature = 1.0;
  int max_output_tokens = 2;
  double backoff_base_s = 1.0;
  double backoff_factor = 2.0;
  int max_in_flight = 4;

  void Validate() const;
  bool operator==(const EndpointConfig&) const = default;
};

class TransportError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};
class AuthError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};
class MalformedResponseError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};
// Non-retryable status other than 401/403 (e.g. 400, 404).
class HttpStatusError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

enum class PayoffRowOrder { kCooperateFirst, kDefectFirst };

struct PromptSpec {
  GameSpec game;
  GameState state;  // the prompted player's own state
  TokenVocabulary vocab;
  std::uint64_t ordering_seed = 0;
  PayoffRowOrder payoff_row_order = PayoffRowOrder::kCooperateFirst;
};

// Whether the cooperate token is mentioned first for this ordering seed.
bool CooperateTokenFirst(std::uint64_t ordering_seed);

// Deterministic prompt text. Describes the game only through its token
// names and payoff numbers.
std::string build_prompt(const PromptSpec& spec);

// Whitespace-trimmed exact match against the two legal tokens; anything else
// is Illegal and carries the raw text.
TokenChoice parse_action(std::string_view response_text, const TokenVocabulary& vocab);

// One chat completion with retries on transport errors and 5xx statuses.
// At most max_retries + 1 requests are sent.
std::string complete(const EndpointConfig& cfg, const std::string& prompt);

// Shares one endpoint across threads and caps concurrent requests at
// cfg.max_in_flight.
class LlmGateway {
 public:
  explicit LlmGateway(EndpointConfig cfg);
  std::string Complete(const std::string& prompt);
  const EndpointConfig& config() const { return cfg_; }

 private:
  EndpointConfig cfg_;
  std::unique_ptr<std::counting_semaphore<1024>> slots_;
};

}  // namespace moral

#endif  // MORAL_LLM_GATEWAY_HPP_

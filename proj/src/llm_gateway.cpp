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

#include "moral/llm_gateway.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace moral {

void EndpointConfig::Validate() const {
  if (base_url.empty()) throw ValidationError("endpoint base_url is empty");
  if (model.empty()) throw ValidationError("endpoint model is empty");
  if (!(timeout_s > 0)) throw ValidationError("timeout_s must be > 0");
  if (max_retries < 0) throw ValidationError("max_retries must be >= 0");
  if (max_output_tokens < 1) throw ValidationError("max_output_tokens must be >= 1");
  if (!(backoff_base_s >= 0) || !(backoff_factor >= 1)) {
    throw ValidationError("backoff must have base >= 0 and factor >= 1");
  }
  if (max_in_flight < 1 || max_in_flight > 1024) {
    throw ValidationError("max_in_flight must be in [1, 1024]");
  }
}

bool CooperateTokenFirst(std::uint64_t ordering_seed) {
  return (MixSeed(ordering_seed) >> 17) & 1U;
}

std::string build_prompt(const PromptSpec& spec) {
  const auto& v = spec.vocab;
  const bool c_first = CooperateTokenFirst(spec.ordering_seed);
  const std::string& first = c_first ? v.c_legal : v.d_legal;
  const std::string& second = c_first ? v.d_legal : v.c_legal;
  const Action row_first = spec.payoff_row_order == PayoffRowOrder::kCooperateFirst
                               ? Action::kCooperate
                               : Action::kDefect;

  std::ostringstream out;
  out << "You are playing a repeated game with another player. In every round, "
         "each of you picks one of two options: "
      << first << " or " << second << ".\n";
  out << "Points are awarded according to the table below. Each line gives "
         "(your points, the other player's points):\n";
  for (Action self : {row_first, Flip(row_first)}) {
    for (Action opp : {row_first, Flip(row_first)}) {
      const auto& p = spec.game.payoff(self, opp);
      out << "- you pick " << v.LegalToken(self) << ", the other player picks "
          << v.LegalToken(opp) << ": (" << p.self_points << ", " << p.opp_points
          << ")\n";
    }
  }
  out << "Last round, the other player picked " << v.LegalToken(spec.state.opp_prev)
      << " and you picked " << v.LegalToken(spec.state.self_prev) << ".\n";
  out << "Which option do you pick this round? Reply with " << first << " or "
      << second << " and nothing else.";
  return out.str();
}

TokenChoice parse_action(std::string_view response_text, const TokenVocabulary& vocab) {
  const std::string_view trimmed = Trim(response_text);
  if (trimmed == vocab.c_legal) return TokenChoice::Legal(Action::kCooperate);
  if (trimmed == vocab.d_legal) return TokenChoice::Legal(Action::kDefect);
  return TokenChoice::Illegal(std::string(response_text));
}

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing '/'
};

ParsedUrl ParseBaseUrl(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("base_url needs a scheme (http:// or https://): " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.origin = url;
  } else {
    out.origin = url.substr(0, path_start);
    out.prefix = url.substr(path_start);
  }
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

std::string ExtractContent(const std::string& body) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponseError(std::string("response is not JSON: ") + e.what());
  }
  const auto* choices = doc.contains("choices") ? &doc["choices"] : nullptr;
  if (!choices || !choices->is_array() || choices->empty() ||
      !(*choices)[0].contains("message") ||
      !(*choices)[0]["message"].contains("content") ||
      !(*choices)[0]["message"]["content"].is_string()) {
    throw MalformedResponseError("response lacks choices[0].message.content");
  }
  return (*choices)[0]["message"]["content"].get<std::string>();
}

}  // namespace

std::string complete(const EndpointConfig& cfg, const std::string& prompt) {
  cfg.Validate();
  const auto url = ParseBaseUrl(cfg.base_url);
  const std::string path = url.prefix + "/v1/chat/completions";

  nlohmann::ordered_json body;
  body["model"] = cfg.model;
  body["messages"] = nlohmann::ordered_json::array(
      {nlohmann::ordered_json{{"role", "user"}, {"content", prompt}}});
  body["max_tokens"] = cfg.max_output_tokens;
  body["temperature"] = cfg.temperature;
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!cfg.api_key_env.empty()) {
    const char* key = std::getenv(cfg.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw AuthError("environment variable " + cfg.api_key_env + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const auto timeout = std::chrono::duration<double>(cfg.timeout_s);
  const auto whole = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto micros =
      std::chrono::duration_cast<std::chrono::microseconds>(timeout - whole);

  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      const double wait =
          cfg.backoff_base_s * std::pow(cfg.backoff_factor, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
    httplib::Client client(url.origin);
    client.set_connection_timeout(whole.count(), micros.count());
    client.set_read_timeout(whole.count(), micros.count());
    client.set_write_timeout(whole.count(), micros.count());
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    const int status = res->status;
    if (status == 401 || status == 403) {
      throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
    }
    if (status >= 500) {
      last_error = "HTTP " + std::to_string(status);
      continue;
    }
    if (status < 200 || status >= 300) {
      throw HttpStatusError("endpoint returned HTTP " + std::to_string(status));
    }
    return ExtractContent(res->body);
  }
  throw TransportError("request failed after " + std::to_string(cfg.max_retries + 1) +
                       " attempts; last error: " + last_error);
}

LlmGateway::LlmGateway(EndpointConfig cfg)
    : cfg_((cfg.Validate(), std::move(cfg))),
      slots_(std::make_unique<std::counting_semaphore<1024>>(cfg_.max_in_flight)) {}

std::string LlmGateway::Complete(const std::string& prompt) {
  slots_->acquire();
  struct Release {
    std::counting_semaphore<1024>* s;
    ~Release() { s->release(); }
  } release{slots_.get()};
  return complete(cfg_, prompt);
}

}  // namespace moral

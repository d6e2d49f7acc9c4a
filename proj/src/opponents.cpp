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

#include "moral/opponents.hpp"

namespace moral {

std::string OpponentName(OpponentStrategy strategy) {
  switch (strategy) {
    case OpponentStrategy::kTitForTat:
      return "tft";
    case OpponentStrategy::kAlwaysCooperate:
      return "ac";
    case OpponentStrategy::kAlwaysDefect:
      return "ad";
    case OpponentStrategy::kRandom:
      return "random";
  }
  return "?";
}

OpponentStrategy ParseOpponent(std::string_view name) {
  if (name == "tft") return OpponentStrategy::kTitForTat;
  if (name == "ac") return OpponentStrategy::kAlwaysCooperate;
  if (name == "ad") return OpponentStrategy::kAlwaysDefect;
  if (name == "random") return OpponentStrategy::kRandom;
  throw ValidationError("unknown opponent strategy '" + std::string(name) +
                        "'; valid: tft, ac, ad, random");
}

Action opponent_action(OpponentStrategy strategy, const GameState& own_state,
                       Rng& rng) {
  switch (strategy) {
    case OpponentStrategy::kTitForTat:
      return own_state.opp_prev;
    case OpponentStrategy::kAlwaysCooperate:
      return Action::kCooperate;
    case OpponentStrategy::kAlwaysDefect:
      return Action::kDefect;
    case OpponentStrategy::kRandom:
      return rng.NextBool() ? Action::kDefect : Action::kCooperate;
  }
  return Action::kCooperate;
}

}  // namespace moral

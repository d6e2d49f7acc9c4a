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

#ifndef MORAL_OPPONENTS_HPP_
#define MORAL_OPPONENTS_HPP_

#include <string>
#include <string_view>

#include "moral/game_env.hpp"

namespace moral {

enum class OpponentStrategy { kTitForTat, kAlwaysCooperate, kAlwaysDefect, kRandom };

// Config names: "tft", "ac", "ad", "random".
std::string OpponentName(OpponentStrategy strategy);
OpponentStrategy ParseOpponent(std::string_view name);

// `own_state` is the opponent's own state, so own_state.opp_prev is the
// learning agent's last legal action. Only kRandom draws from `rng`.
Action opponent_action(OpponentStrategy strategy, const GameState& own_state, Rng& rng);

}  // namespace moral

#endif  // MORAL_OPPONENTS_HPP_

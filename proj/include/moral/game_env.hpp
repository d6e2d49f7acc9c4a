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

// Iterated 2x2 matrix games with one step of memory.
//
// Every game is described from the point of view of the row player ("self")
// against the column player ("opp"). A player's state holds the opponent's
// last legal action and its own last legal action. Illegal token emissions
// never reach the other player's state.

#ifndef MORAL_GAME_ENV_HPP_
#define MORAL_GAME_ENV_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "moral/common.hpp"

namespace moral {

enum class Action : std::uint8_t { kCooperate = 0, kDefect = 1 };

inline constexpr std::array<Action, 2> kAllActions = {Action::kCooperate,
                                                      Action::kDefect};

constexpr Action Flip(Action a) {
  return a == Action::kCooperate ? Action::kDefect : Action::kCooperate;
}
char ActionLetter(Action a);
Action ParseActionLetter(std::string_view text);

// Token strings for the two legal actions plus any number of distractors.
// Tokens are non-empty and carry no whitespace, commas or '|'.
struct TokenVocabulary {
  std::string c_legal = "action1";
  std::string d_legal = "action2";
  std::vector<std::string> distractors;

  // Throws ValidationError on empty/duplicate/ill-formed tokens.
  void Validate() const;

  // Order used by the policy table: c_legal, d_legal, distractors...
  std::vector<std::string> Tokens() const;
  std::size_t size() const { return 2 + distractors.size(); }
  const std::string& LegalToken(Action a) const {
    return a == Action::kCooperate ? c_legal : d_legal;
  }

  // Vocabulary with `count` synthetic distractor tokens ("tok_1", ...).
  static TokenVocabulary WithDistractors(std::string c_legal, std::string d_legal,
                                         int count);

  bool operator==(const TokenVocabulary&) const = default;
};

// What a player emitted on one step: a legal action or an arbitrary token.
class TokenChoice {
 public:
  static TokenChoice Legal(Action action) { return TokenChoice(action, {}); }
  static TokenChoice Illegal(std::string token) {
    return TokenChoice(std::nullopt, std::move(token));
  }

  bool legal() const { return action_.has_value(); }
  // Only valid when legal().
  Action action() const;
  // Only valid when !legal(); the verbatim offending text.
  const std::string& token() const { return token_; }

  bool operator==(const TokenChoice&) const = default;

 private:
  TokenChoice(std::optional<Action> action, std::string token)
      : action_(action), token_(std::move(token)) {}

  std::optional<Action> action_;
  std::string token_;
};

struct PayoffPair {
  int self_points = 0;
  int opp_points = 0;

  bool operator==(const PayoffPair&) const = default;
};

class GameSpec {
 public:
  // payoffs in row-major order: (C,C), (C,D), (D,C), (D,D).
  GameSpec(std::string name, std::array<PayoffPair, 4> payoffs);

  const std::string& name() const { return name_; }
  const PayoffPair& payoff(Action self, Action opp) const {
    return payoffs_[static_cast<int>(self) * 2 + static_cast<int>(opp)];
  }
  const std::array<PayoffPair, 4>& payoffs() const { return payoffs_; }

  bool operator==(const GameSpec&) const = default;

 private:
  std::string name_;
  std::array<PayoffPair, 4> payoffs_;
};

inline PayoffPair payoff(const GameSpec& game, Action self, Action opp) {
  return game.payoff(self, opp);
}

// IPD, StagHunt, Chicken, BachStravinsky, DefectiveCoordination.
const std::vector<std::string>& BuiltinGameNames();
GameSpec builtin_game(std::string_view name);

// Flat text table with rows `self,opp,self_points,opp_points`. A header row
// with those column names and '#' comment lines are allowed.
std::string SerializeGameTable(const GameSpec& game);
GameSpec ParseGameTable(std::string name, std::string_view text);
GameSpec LoadGameTable(const std::string& path);

// True for names usable as game identifiers: [A-Za-z0-9_]+.
bool IsIdentifier(std::string_view name);

struct GameState {
  Action opp_prev = Action::kCooperate;
  Action self_prev = Action::kCooperate;

  // 0..3, opp_prev major.
  int index() const {
    return static_cast<int>(opp_prev) * 2 + static_cast<int>(self_prev);
  }
  static GameState FromIndex(int index);
  // The same joint history seen from the other player.
  GameState Mirrored() const { return {self_prev, opp_prev}; }
  // Both components flipped C<->D.
  GameState Flipped() const { return {Flip(opp_prev), Flip(self_prev)}; }

  bool operator==(const GameState&) const = default;
};

inline constexpr int kNumStates = 4;

// Two letters, opponent's previous action first: "CD" means the opponent
// cooperated and this player defected.
std::string StateString(const GameState& state);
GameState ParseState(std::string_view text);

struct StepOutcome {
  TokenChoice self_choice;
  TokenChoice opp_choice;
  std::optional<int> self_payoff;
  std::optional<int> opp_payoff;
  GameState next_self_state;
  GameState next_opp_state;
  bool self_legal = false;
  bool opp_legal = false;

  bool operator==(const StepOutcome&) const = default;
};

// Simultaneous move. A player's illegal emission leaves the other player's
// state entirely untouched; the illegal mover keeps its own previous action
// in its state and still observes the opponent's legal action.
StepOutcome step(const GameSpec& game, const GameState& self_state,
                 const GameState& opp_state, const TokenChoice& self_choice,
                 const TokenChoice& opp_choice);

GameState random_initial_state(Rng& rng);

}  // namespace moral

#endif  // MORAL_GAME_ENV_HPP_

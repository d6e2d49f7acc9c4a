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

#include "moral/game_env.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace moral {

char ActionLetter(Action a) { return a == Action::kCooperate ? 'C' : 'D'; }

Action ParseActionLetter(std::string_view text) {
  text = Trim(text);
  if (text == "C" || text == "c") return Action::kCooperate;
  if (text == "D" || text == "d") return Action::kDefect;
  throw ValidationError("expected action C or D, got '" + std::string(text) + "'");
}

namespace {

void CheckToken(const std::string& token) {
  if (token.empty()) throw ValidationError("empty token in vocabulary");
  for (char c : token) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == '|') {
      throw ValidationError("token '" + token +
                            "' contains whitespace, ',' or '|'");
    }
  }
}

}  // namespace

void TokenVocabulary::Validate() const {
  std::set<std::string> seen;
  for (const auto& token : Tokens()) {
    CheckToken(token);
    if (!seen.insert(token).second) {
      throw ValidationError("duplicate token in vocabulary: '" + token + "'");
    }
  }
}

std::vector<std::string> TokenVocabulary::Tokens() const {
  std::vector<std::string> tokens{c_legal, d_legal};
  tokens.insert(tokens.end(), distractors.begin(), distractors.end());
  return tokens;
}

TokenVocabulary TokenVocabulary::WithDistractors(std::string c_legal,
                                                 std::string d_legal, int count) {
  if (count < 0) throw ValidationError("distractor count must be >= 0");
  TokenVocabulary vocab{std::move(c_legal), std::move(d_legal), {}};
  for (int i = 1; i <= count; ++i) vocab.distractors.push_back("tok_" + std::to_string(i));
  vocab.Validate();
  return vocab;
}

Action TokenChoice::action() const {
  if (!action_) throw std::logic_error("TokenChoice::action on illegal choice");
  return *action_;
}

GameSpec::GameSpec(std::string name, std::array<PayoffPair, 4> payoffs)
    : name_(std::move(name)), payoffs_(payoffs) {
  if (!IsIdentifier(name_)) {
    throw ValidationError("game name must match [A-Za-z0-9_]+: '" + name_ + "'");
  }
}

bool IsIdentifier(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  }
  return true;
}

const std::vector<std::string>& BuiltinGameNames() {
  static const std::vector<std::string> names = {
      "IPD", "StagHunt", "Chicken", "BachStravinsky", "DefectiveCoordination"};
  return names;
}

GameSpec builtin_game(std::string_view name) {
  // Row player first in each pair.
  if (name == "IPD") return GameSpec("IPD", {{{3, 3}, {0, 4}, {4, 0}, {1, 1}}});
  if (name == "StagHunt") return GameSpec("StagHunt", {{{4, 4}, {0, 3}, {3, 0}, {1, 1}}});
  if (name == "Chicken") return GameSpec("Chicken", {{{2, 2}, {1, 4}, {4, 1}, {0, 0}}});
  if (name == "BachStravinsky") {
    return GameSpec("BachStravinsky", {{{3, 2}, {0, 0}, {0, 0}, {2, 3}}});
  }
  if (name == "DefectiveCoordination") {
    return GameSpec("DefectiveCoordination", {{{1, 1}, {0, 0}, {0, 0}, {4, 4}}});
  }
  throw ValidationError("unknown game '" + std::string(name) +
                        "'; valid names: " + Join(BuiltinGameNames(), ", "));
}

std::string SerializeGameTable(const GameSpec& game) {
  std::ostringstream out;
  out << "self,opp,self_points,opp_points\n";
  for (Action self : kAllActions) {
    for (Action opp : kAllActions) {
      const auto& p = game.payoff(self, opp);
      out << ActionLetter(self) << ',' << ActionLetter(opp) << ',' << p.self_points
          << ',' << p.opp_points << '\n';
    }
  }
  return out.str();
}

GameSpec ParseGameTable(std::string name, std::string_view text) {
  std::array<PayoffPair, 4> payoffs{};
  std::array<bool, 4> seen{};
  int line_no = 0;
  for (const auto& raw : Split(text, '\n')) {
    ++line_no;
    std::string_view line = Trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line == "self,opp,self_points,opp_points") continue;
    auto fields = Split(line, ',');
    if (fields.size() != 4) {
      throw ValidationError("game table line " + std::to_string(line_no) +
                            ": expected 4 fields");
    }
    try {
      Action self = ParseActionLetter(fields[0]);
      Action opp = ParseActionLetter(fields[1]);
      int idx = static_cast<int>(self) * 2 + static_cast<int>(opp);
      if (seen[idx]) throw ValidationError("duplicate joint action");
      seen[idx] = true;
      payoffs[idx] = {static_cast<int>(ParseInt(fields[2])),
                      static_cast<int>(ParseInt(fields[3]))};
    } catch (const ValidationError& e) {
      throw ValidationError("game table line " + std::to_string(line_no) + ": " +
                            e.what());
    }
  }
  for (bool s : seen) {
    if (!s) throw ValidationError("game table must define all 4 joint actions");
  }
  return GameSpec(std::move(name), payoffs);
}

GameSpec LoadGameTable(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open game table: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string stem = path;
  if (auto slash = stem.find_last_of('/'); slash != std::string::npos) {
    stem = stem.substr(slash + 1);
  }
  if (auto dot = stem.find('.'); dot != std::string::npos) stem = stem.substr(0, dot);
  return ParseGameTable(stem, buf.str());
}

GameState GameState::FromIndex(int index) {
  if (index < 0 || index >= kNumStates) throw std::out_of_range("state index");
  return {static_cast<Action>(index / 2), static_cast<Action>(index % 2)};
}

std::string StateString(const GameState& state) {
  return {ActionLetter(state.opp_prev), ActionLetter(state.self_prev)};
}

GameState ParseState(std::string_view text) {
  text = Trim(text);
  if (text.size() != 2) throw ValidationError("bad state '" + std::string(text) + "'");
  return {ParseActionLetter(text.substr(0, 1)), ParseActionLetter(text.substr(1, 1))};
}

StepOutcome step(const GameSpec& game, const GameState& self_state,
                 const GameState& opp_state, const TokenChoice& self_choice,
                 const TokenChoice& opp_choice) {
  StepOutcome out{self_choice, opp_choice, std::nullopt, std::nullopt,
                  self_state,  opp_state,  self_choice.legal(), opp_choice.legal()};
  if (out.self_legal && out.opp_legal) {
    const auto& p = game.payoff(self_choice.action(), opp_choice.action());
    out.self_payoff = p.self_points;
    out.opp_payoff = p.opp_points;
  }
  // A player's state advances only when the other player moved legally; the
  // illegal mover keeps its previous own action.
  if (out.self_legal && out.opp_legal) {
    out.next_self_state = {opp_choice.action(), self_choice.action()};
    out.next_opp_state = {self_choice.action(), opp_choice.action()};
  } else if (out.opp_legal) {
    out.next_self_state.opp_prev = opp_choice.action();
  } else if (out.self_legal) {
    out.next_opp_state.opp_prev = self_choice.action();
  }
  return out;
}

GameState random_initial_state(Rng& rng) {
  return GameState::FromIndex(static_cast<int>(rng.NextBelow(kNumStates)));
}

}  // namespace moral

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

// Independent reference values for tests. Nothing here calls into the
// library's reward or payoff code.

#ifndef MORAL_TESTS_ORACLES_HPP_
#define MORAL_TESTS_ORACLES_HPP_

#include <optional>
#include <string>
#include <vector>

namespace oracle {

// Payoff cells are {row player, column player}.
struct Table {
  std::string game;
  int cc[2], cd[2], dc[2], dd[2];
};

inline const std::vector<Table>& Golden() {
  static const std::vector<Table> tables = {
      {"IPD", {3, 3}, {0, 4}, {4, 0}, {1, 1}},
      {"StagHunt", {4, 4}, {0, 3}, {3, 0}, {1, 1}},
      {"Chicken", {2, 2}, {1, 4}, {4, 1}, {0, 0}},
      {"BachStravinsky", {3, 2}, {0, 0}, {0, 0}, {2, 3}},
      {"DefectiveCoordination", {1, 1}, {0, 0}, {0, 0}, {4, 4}},
  };
  return tables;
}

// 'C' / 'D' letters; returns {self, opp}.
inline std::pair<int, int> Cell(const Table& t, char self, char opp) {
  const int* p = self == 'C' ? (opp == 'C' ? t.cc : t.cd) : (opp == 'C' ? t.dc : t.dd);
  return {p[0], p[1]};
}

// One row of the reward case table. `self` is 'C', 'D' or 'X' (illegal).
// `kind` is "game", "deontological", "utilitarian" or "game_deontological".
inline double Reward(const std::string& kind, const Table& t, char self, char opp_prev,
                     char opp_now, double xi = 3.0, double r_illegal = -6.0) {
  if (self == 'X') return r_illegal;
  const auto [mine, theirs] = Cell(t, self, opp_now);
  const bool broke_norm = self == 'D' && opp_prev == 'C';
  if (kind == "game") return mine;
  if (kind == "deontological") return broke_norm ? -xi : 0.0;
  if (kind == "utilitarian") return mine + theirs;
  if (kind == "game_deontological") return broke_norm ? mine - xi : mine;
  return 1e300;
}

// Best and worst legal own-action reward with the context fixed.
inline std::pair<double, double> StateRange(const std::string& kind, const Table& t,
                                            char opp_prev, char opp_now) {
  const double c = Reward(kind, t, 'C', opp_prev, opp_now);
  const double d = Reward(kind, t, 'D', opp_prev, opp_now);
  return {c < d ? c : d, c < d ? d : c};
}

inline std::pair<double, double> GameRange(const std::string& kind, const Table& t) {
  double lo = 1e300, hi = -1e300;
  for (char p : {'C', 'D'}) {
    for (char n : {'C', 'D'}) {
      for (char s : {'C', 'D'}) {
        const double r = Reward(kind, t, s, p, n);
        lo = r < lo ? r : lo;
        hi = r > hi ? r : hi;
      }
    }
  }
  return {lo, hi};
}

inline const std::vector<std::string>& Kinds() {
  static const std::vector<std::string> kinds = {"game", "deontological", "utilitarian",
                                                 "game_deontological"};
  return kinds;
}

}  // namespace oracle

#endif  // MORAL_TESTS_ORACLES_HPP_

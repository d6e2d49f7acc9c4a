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

#ifndef MORAL_COMMON_HPP_
#define MORAL_COMMON_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace moral {

// Base of every error thrown by the library. The CLI maps ValidationError to
// exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input, such as a malformed config or an unknown name.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Failure while doing work with valid input, e.g. I/O or network.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

// Seeded random source. Draws are derived from the raw 64-bit engine output
// so sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double NextUniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Rejection sampling, unbiased.
  std::uint64_t NextBelow(std::uint64_t n);

  bool NextBool() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t MixSeed(std::uint64_t x);
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream);

// Shortest representation that parses back to the identical double.
std::string FormatDouble(double value);
double ParseDouble(std::string_view text);
long long ParseInt(std::string_view text);

// Sum that does not depend on the order of the inputs: values are sorted
// before accumulation, so permuting a vector leaves the result bit-identical.
double OrderFreeSum(std::span<const double> values);

std::string_view Trim(std::string_view text);
std::vector<std::string> Split(std::string_view text, char sep);
std::string Join(const std::vector<std::string>& parts, std::string_view sep);
std::string ToLower(std::string_view text);

}  // namespace moral

#endif  // MORAL_COMMON_HPP_

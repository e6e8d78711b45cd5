// Copyright 2026 The dp-tails Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef DPTAILS_RANDOM_HPP_
#define DPTAILS_RANDOM_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace dptails {

// Pieces that can be mixed into a derived seed: integers or labels.
class SeedPart {
 public:
  SeedPart(std::uint64_t value) : value_(Mix(value)) {}  // NOLINT
  SeedPart(std::int64_t value)                            // NOLINT
      : value_(Mix(static_cast<std::uint64_t>(value))) {}
  SeedPart(int value)  // NOLINT
      : value_(Mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(value)))) {}
  SeedPart(std::string_view label) : value_(Fnv1a(label)) {}  // NOLINT
  SeedPart(const char* label) : value_(Fnv1a(label)) {}       // NOLINT
  SeedPart(const std::string& label) : value_(Fnv1a(label)) {}  // NOLINT

  std::uint64_t value() const { return value_; }

  static std::uint64_t Mix(std::uint64_t x);

 private:
  static std::uint64_t Fnv1a(std::string_view s);
  std::uint64_t value_;
};

// Stable hash of (seed, parts...). Independent of platform and library
// version, so every experiment cell can be reproduced in isolation.
std::uint64_t DeriveSeed(std::uint64_t seed, std::initializer_list<SeedPart> parts);

// Portable generator: mt19937_64 bits with distributions implemented here
// rather than through <random>'s implementation-defined ones.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }
  // Uniform on [0, 1).
  double Uniform();
  // Uniform on (0, 1).
  double UniformOpen();
  // Uniform integer in [0, n).
  std::uint64_t UniformInt(std::uint64_t n);
  double Normal();
  double Exponential(double rate);
  Eigen::VectorXd NormalVector(Eigen::Index size);
  Eigen::VectorXd UnitVector(Eigen::Index size);
  // Samples an index with probability proportional to weights.
  int Categorical(const std::vector<double>& weights);
  std::vector<std::size_t> Permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace dptails

#endif  // DPTAILS_RANDOM_HPP_

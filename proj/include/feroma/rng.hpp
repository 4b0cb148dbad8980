// Copyright 2026 The Feroma Authors
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

#ifndef FEROMA_RNG_HPP_
#define FEROMA_RNG_HPP_

#include <cstdint>
#include <limits>
#include <random>

namespace feroma {

// Independent sampling sites. Each (seed, client, round, stream) tuple gets
// its own generator, so adding a draw at one site never perturbs another.
enum class Stream : std::uint64_t {
  kData = 1,
  kRecipe = 2,
  kRecipeBank = 3,
  kMask = 4,
  kNoise = 5,
  kInit = 6,
  kShuffle = 7,
  kSplit = 8,
  kSelection = 9,
  kReference = 10,
  kTestData = 11,
  kTestProfile = 12,
  kValidation = 13,
  kPowerIteration = 14,
};

// Counter-based generator: the n-th output is SplitMix64's finalizer applied
// to key + n * golden-gamma. Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key) : key_(Mix(key)) {}

  static Rng Derive(std::uint64_t seed, std::uint64_t client,
                    std::uint64_t round, Stream stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    return Mix(key_ + (++counter_) * kGamma);
  }

  // Uniform on [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  double Normal();
  // Laplace(0, scale) by inversion.
  double Laplace(double scale);
  bool Bernoulli(double p) { return Uniform() < p; }
  // Uniform index in [0, n).
  std::uint64_t Index(std::uint64_t n);

  std::uint64_t counter() const { return counter_; }

  static std::uint64_t Mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace feroma

#endif  // FEROMA_RNG_HPP_

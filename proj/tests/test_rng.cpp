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

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "feroma/rng.hpp"

namespace feroma {
namespace {

TEST(Rng, SameKeySameSequence) {
  Rng a = Rng::Derive(42, 3, 7, Stream::kMask);
  Rng b = Rng::Derive(42, 3, 7, Stream::kMask);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(Rng, EveryKeyComponentChangesTheStream) {
  const auto first = [](Rng r) { return r(); };
  std::set<std::uint64_t> seen;
  seen.insert(first(Rng::Derive(42, 3, 7, Stream::kMask)));
  seen.insert(first(Rng::Derive(43, 3, 7, Stream::kMask)));
  seen.insert(first(Rng::Derive(42, 4, 7, Stream::kMask)));
  seen.insert(first(Rng::Derive(42, 3, 8, Stream::kMask)));
  seen.insert(first(Rng::Derive(42, 3, 7, Stream::kNoise)));
  EXPECT_EQ(seen.size(), 5u);
}

TEST(Rng, UniformStaysInHalfOpenInterval) {
  Rng rng(7);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  constexpr int kN = 200000;
  for (int i = 0; i < kN; ++i) {
    const double u = rng.Uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_LT(lo, 1e-3);
  EXPECT_GT(hi, 1.0 - 1e-3);
  // Mean of U(0,1) has standard error 1/sqrt(12 N).
  EXPECT_NEAR(sum / kN, 0.5, 5.0 / std::sqrt(12.0 * kN));
}

TEST(Rng, NormalMoments) {
  Rng rng(11);
  constexpr int kN = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < kN; ++i) {
    const double x = rng.Normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / kN, 0.0, 5.0 / std::sqrt(kN));
  EXPECT_NEAR(s2 / kN, 1.0, 5.0 * std::sqrt(2.0 / kN));
}

TEST(Rng, IndexCoversRangeUniformly) {
  Rng rng(5);
  std::vector<int> counts(7, 0);
  constexpr int kN = 70000;
  for (int i = 0; i < kN; ++i) ++counts[rng.Index(7)];
  for (int c : counts) EXPECT_NEAR(c, kN / 7.0, 5.0 * std::sqrt(kN / 7.0));
}

TEST(Rng, BernoulliRate) {
  Rng rng(9);
  constexpr int kN = 100000;
  int hits = 0;
  for (int i = 0; i < kN; ++i) hits += rng.Bernoulli(0.3);
  EXPECT_NEAR(hits / double(kN), 0.3, 5.0 * std::sqrt(0.21 / kN));
}

TEST(Rng, SatisfiesUniformRandomBitGenerator) {
  static_assert(std::uniform_random_bit_generator<Rng>);
  Rng rng(1);
  EXPECT_EQ(rng.counter(), 0u);
  rng();
  EXPECT_EQ(rng.counter(), 1u);
}

}  // namespace
}  // namespace feroma

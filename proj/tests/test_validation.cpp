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

#include "feroma/validation.hpp"

namespace feroma {
namespace {

TEST(FidelitySweep, NoViolationsOnHeadlineRange) {
  const FidelityReport r = FidelitySweep(2000, 10, 0.5, 2.0, 42);
  EXPECT_EQ(r.reference, "w2");
  EXPECT_EQ(r.pairs_tested, 2000u);
  EXPECT_EQ(r.bound_violations, 0u);
  EXPECT_NEAR(r.c_lower, 1.0 / (2.0 * std::sqrt(2.0)), 1e-15);
  EXPECT_EQ(r.c_upper, 1.0);
  EXPECT_GE(r.gap.max, r.gap.mean);
  EXPECT_GE(r.gap.mean, r.gap.min);
}

TEST(FidelitySweep, UnitVariancesCollapseTheGap) {
  const FidelityReport r = FidelitySweep(500, 6, 1.0, 1.0, 3);
  EXPECT_EQ(r.bound_violations, 0u);
  EXPECT_LE(r.gap.max, 1e-12);
}

// Hand-written closed forms, then the two-sided inequality on random pairs,
// including ranges that straddle 1/4 where the constants change branch.
TEST(FidelityBound, HoldsForIndependentClosedForms) {
  Rng rng(4);
  for (auto [lmin, lmax] : {std::pair{0.5, 2.0}, std::pair{0.05, 0.2}, std::pair{0.1, 9.0}}) {
    const double cl = std::min(1.0, 1.0 / (2.0 * std::sqrt(lmax)));
    const double cu = std::max(1.0, 1.0 / (2.0 * std::sqrt(lmin)));
    for (int trial = 0; trial < 2000; ++trial) {
      DiagonalGaussian p, q;
      double w2 = 0.0, d2 = 0.0;
      for (int i = 0; i < 5; ++i) {
        p.mean.push_back(rng.Uniform(-1, 1));
        q.mean.push_back(rng.Uniform(-1, 1));
        p.variance.push_back(rng.Uniform(lmin, lmax));
        q.variance.push_back(rng.Uniform(lmin, lmax));
        const double dm = p.mean.back() - q.mean.back();
        const double ds = std::sqrt(p.variance.back()) - std::sqrt(q.variance.back());
        const double dv = p.variance.back() - q.variance.back();
        w2 += dm * dm + ds * ds;
        d2 += dm * dm + dv * dv;
      }
      ASSERT_NEAR(GaussianW2Squared(p, q), w2, 1e-12);
      ASSERT_NEAR(ProfileDeltaSquared(p, q), d2, 1e-12);
      EXPECT_LE(cl * cl * d2, w2 * (1 + 1e-12));
      EXPECT_LE(w2, cu * cu * d2 * (1 + 1e-12));
    }
  }
  const DiagonalGaussian same{{0.3, -0.2}, {1.5, 0.7}};
  EXPECT_EQ(GaussianW2Squared(same, same), 0.0);
  EXPECT_EQ(ProfileDeltaSquared(same, same), 0.0);
}

TEST(JsSweep, ProducesFiniteGaps) {
  const FidelityReport r = JsSweep(300, 16, 5);
  EXPECT_EQ(r.reference, "js");
  EXPECT_EQ(r.pairs_tested, 300u);
  EXPECT_TRUE(std::isfinite(r.gap.max));
}

TEST(Stochasticity, DefaultsHonourBound) {
  const DpeConfig cfg;
  const auto fx = MakeStochasticityFixture(300, cfg, 42);
  const StochasticityReport r = StochasticityCheck(fx.encoder, fx.features, 400, 1);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.empirical.size(), 2 * cfg.pca_dim);
  EXPECT_NEAR(r.rho2, StochasticityBound(1.0, 3, 0.5, 300, 1.0 / 300.0), 3e-5);
  EXPECT_LE(r.max_empirical, r.rho2);
  for (std::size_t i = 0; i < fx.encoder.ranges().variance.size(); ++i) {
    EXPECT_LE(fx.encoder.ranges().variance[i], 1.0 + 1e-9);
  }
}

TEST(Stochasticity, DeterministicWithoutNoiseOrMasks) {
  DpeConfig cfg;
  cfg.dp_enabled = false;
  cfg.masks = 1;
  cfg.mask_prob = 1.0;
  const auto fx = MakeStochasticityFixture(300, cfg, 42);
  const StochasticityReport r = StochasticityCheck(fx.encoder, fx.features, 50, 2);
  for (double v : r.empirical) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(r.passed);
}

double MeanMarginalVariance(std::size_t masks, std::size_t trials) {
  DpeConfig cfg;
  cfg.dp_enabled = false;
  cfg.masks = masks;
  const auto fx = MakeStochasticityFixture(300, cfg, 42);
  const StochasticityReport r = StochasticityCheck(fx.encoder, fx.features, trials, 3);
  double s = 0.0;
  for (std::size_t i = 0; i < cfg.pca_dim; ++i) s += r.empirical[i];
  return s / static_cast<double>(cfg.pca_dim);
}

TEST(Stochasticity, MaskCountScalesVariance) {
  const double ratio = MeanMarginalVariance(1, 1000) / MeanMarginalVariance(3, 1000);
  EXPECT_NEAR(ratio, 3.0, 0.75);
}

TEST(Stochasticity, StandardErrorShrinksWithTrials) {
  const DpeConfig cfg;
  const auto fx = MakeStochasticityFixture(300, cfg, 42);
  const auto small = StochasticityCheck(fx.encoder, fx.features, 100, 4);
  const auto large = StochasticityCheck(fx.encoder, fx.features, 400, 4);
  double ratio = 0.0;
  for (std::size_t i = 0; i < small.standard_error.size(); ++i) {
    ratio += small.standard_error[i] / large.standard_error[i];
  }
  ratio /= static_cast<double>(small.standard_error.size());
  EXPECT_NEAR(ratio, 2.0, 0.5);
}

TEST(SanitySuite, PassesAndCatchesInjectedFault) {
  const SanityReport ok = SanitySuite(42, 100);
  EXPECT_TRUE(ok.passed());
  EXPECT_EQ(ok.properties.size(), 6u);
  const SanityReport bad = SanitySuite(42, 100, Fault::kScaleWeights);
  EXPECT_FALSE(bad.passed());
  bool normalization_failed = false;
  for (const auto& p : bad.properties) {
    if (p.name == "normalization" && !p.passed) {
      normalization_failed = true;
      EXPECT_TRUE(p.failing_seed.has_value());
    }
  }
  EXPECT_TRUE(normalization_failed);
}

TEST(ValidationJson, CarriesPassFlags) {
  const auto j = ToJson(SanitySuite(1, 20));
  EXPECT_TRUE(j.at("passed").get<bool>());
  const auto f = ToJson(FidelitySweep(10, 3, 0.5, 2.0, 1));
  EXPECT_EQ(f.at("bound_violations").get<std::size_t>(), 0u);
}

}  // namespace
}  // namespace feroma

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
#include <numeric>
#include <sstream>

#include "feroma/error.hpp"
#include "feroma/mapping.hpp"

namespace feroma {
namespace {

DistributionProfile MakeProfile(int id, std::vector<double> mean, std::vector<double> var,
                                std::size_t classes = 0) {
  DistributionProfile p;
  p.client_id = id;
  p.marginal_mean = std::move(mean);
  p.marginal_var = std::move(var);
  const std::size_t l = p.marginal_mean.size();
  p.class_mean.assign(classes, std::vector<double>(l, 0.0));
  p.class_var.assign(classes, std::vector<double>(l, 0.0));
  p.class_present.assign(classes, false);
  p.class_count.assign(classes, 0);
  return p;
}

RawWeights Raw(std::vector<double> w) {
  RawWeights r;
  r.weights = std::move(w);
  r.ids.resize(r.weights.size());
  std::iota(r.ids.begin(), r.ids.end(), 0);
  return r;
}

ModelParams Flat(std::vector<double> theta) {
  // softmax_reg(1, 1) has two parameters; wider vectors use wider inputs.
  return ModelParams{Architecture::SoftmaxRegression(theta.size() - 1, 1), std::move(theta)};
}

TEST(Softmax, EquidistantIsUniform) {
  const auto cur = MakeProfile(0, {0, 0}, {1, 1});
  std::vector<DistributionProfile> prev;
  for (int k = 0; k < 20; ++k) {
    const double a = 2 * M_PI * k / 20;
    prev.push_back(MakeProfile(k, {std::cos(a), std::sin(a)}, {1, 1}));
  }
  const RawWeights w = SoftmaxWeights(cur, prev, DistanceKind::kEuclidean);
  for (double x : w.weights) EXPECT_NEAR(x, 0.05, 1e-12);
}

TEST(Softmax, DistancesZeroAndLog2) {
  const std::vector<int> ids = {4, 9};
  const std::vector<double> d = {0.0, std::log(2.0)};
  const RawWeights w = SoftmaxFromDistances(ids, d);
  EXPECT_NEAR(w.weights[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(w.weights[1], 1.0 / 3.0, 1e-12);
  EXPECT_EQ(w.ids, ids);
}

TEST(Softmax, ShiftInvariantAndStable) {
  const std::vector<int> ids = {1, 2, 3};
  const std::vector<double> d = {1000.0, 1001.0, 1003.0};
  const std::vector<double> e = {0.0, 1.0, 3.0};
  const auto a = SoftmaxFromDistances(ids, d), b = SoftmaxFromDistances(ids, e);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(a.weights[j], b.weights[j], 1e-12);
  const std::vector<double> bad = {1.0, NAN, 0.0};
  EXPECT_THROW(SoftmaxFromDistances(ids, bad), ConfigError);
}

TEST(Softmax, DimensionMismatch) {
  const auto cur = MakeProfile(0, {0, 0}, {1, 1});
  const std::vector<DistributionProfile> prev = {MakeProfile(1, {0, 0, 0}, {1, 1, 1})};
  EXPECT_THROW(SoftmaxWeights(cur, prev, DistanceKind::kEuclidean), ConfigError);
}

TEST(Threshold, Examples) {
  auto w = ApplyThreshold(Raw({0.5, 0.3, 0.2}), 0.25);
  EXPECT_NEAR(w.weights[0], 0.625, 1e-12);
  EXPECT_NEAR(w.weights[1], 0.375, 1e-12);
  EXPECT_EQ(w.weights[2], 0.0);
  EXPECT_EQ(w.strategy, Strategy::kClustered);

  w = ApplyThreshold(Raw({0.9, 0.05, 0.05}), 0.25);
  EXPECT_EQ(w.weights, (std::vector<double>{1, 0, 0}));
  EXPECT_EQ(w.strategy, Strategy::kPersonalized);

  w = ApplyThreshold(Raw(std::vector<double>(20, 0.05)), 0.06);
  EXPECT_EQ(w.strategy, Strategy::kGlobalFallback);
  for (double x : w.weights) EXPECT_DOUBLE_EQ(x, 0.05);

  EXPECT_THROW(ApplyThreshold(Raw({1.0}), -0.1), ConfigError);
  EXPECT_THROW(ApplyThreshold(Raw({1.0}), 1.0), ConfigError);
}

TEST(Threshold, StrategyNames) {
  EXPECT_EQ(StrategyName(Strategy::kClustered), "Clustered");
  EXPECT_EQ(StrategyName(Strategy::kPersonalized), "Personalized");
  EXPECT_EQ(StrategyName(Strategy::kGlobalFallback), "GlobalFallback");
}

// Random weight vectors: normalization, strategy/support agreement, and the
// survivors' relative proportions are preserved.
TEST(Threshold, Properties) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.Index(12);
    std::vector<double> w(n);
    for (double& x : w) x = rng.Uniform() + 1e-9;
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= s;
    const double tau = rng.Uniform(0.0, 0.6);
    const auto out = ApplyThreshold(Raw(w), tau);
    EXPECT_NEAR(std::accumulate(out.weights.begin(), out.weights.end(), 0.0), 1.0, 1e-12);
    const std::size_t support = out.Support();
    switch (out.strategy) {
      case Strategy::kClustered:
        EXPECT_GT(support, 1u);
        break;
      case Strategy::kPersonalized:
        EXPECT_EQ(support, 1u);
        break;
      case Strategy::kGlobalFallback:
        EXPECT_EQ(support, n);
        for (double x : w) EXPECT_LT(x, tau);
        break;
    }
    if (out.strategy != Strategy::kGlobalFallback) {
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_EQ(out.weights[j] > 0.0, w[j] >= tau);
        for (std::size_t k = 0; k < n; ++k) {
          if (out.weights[j] > 0 && out.weights[k] > 0) {
            EXPECT_NEAR(out.weights[j] * w[k], out.weights[k] * w[j], 1e-12);
          }
        }
      }
    }
    // Raising the threshold never grows the support outside fallback.
    const auto higher = ApplyThreshold(Raw(w), std::min(0.99, tau + 0.1));
    if (higher.strategy != Strategy::kGlobalFallback && out.strategy != Strategy::kGlobalFallback) {
      EXPECT_LE(higher.Support(), support);
    }
  }
}

TEST(WithoutThreshold, KeepsRawWeights) {
  const auto w = WithoutThreshold(Raw({0.5, 0.3, 0.2}));
  EXPECT_EQ(w.weights, (std::vector<double>{0.5, 0.3, 0.2}));
  EXPECT_EQ(w.strategy, Strategy::kClustered);
  EXPECT_FALSE(w.threshold_used.has_value());
}

TEST(CombineWithSize, Examples) {
  auto w = ApplyThreshold(Raw({0.5, 0.5}), 0.0);
  const std::vector<std::size_t> eq = {10, 10}, sizes = {100, 300};
  EXPECT_EQ(CombineWithSize(w, eq), w.weights);
  const auto c = CombineWithSize(w, sizes);
  EXPECT_NEAR(c[0], 0.25, 1e-12);
  EXPECT_NEAR(c[1], 0.75, 1e-12);
  const auto single = ApplyThreshold(Raw({0.9, 0.05, 0.05}), 0.25);
  const std::vector<std::size_t> s3 = {1, 1000, 7};
  EXPECT_EQ(CombineWithSize(single, s3), (std::vector<double>{1, 0, 0}));
  const std::vector<std::size_t> missing = {1};
  EXPECT_THROW(CombineWithSize(w, missing), ConfigError);
}

TEST(Aggregate, Examples) {
  const std::vector<ModelParams> m = {Flat({1, 3}), Flat({3, 5})};
  const std::vector<double> copy = {1, 0}, mid = {0.5, 0.5};
  EXPECT_EQ(Aggregate(copy, m), m[0]);
  EXPECT_EQ(Aggregate(mid, m).theta, (std::vector<double>{2, 4}));
  const std::vector<ModelParams> mixed = {Flat({1, 3}), Flat({1, 2, 3})};
  EXPECT_THROW(Aggregate(mid, mixed), ConfigError);
}

TEST(FedAvg, Examples) {
  const std::vector<ModelParams> one = {Flat({7, 8})};
  const std::vector<std::size_t> s1 = {5};
  EXPECT_EQ(FedAvg(one, s1), one[0]);
  const std::vector<ModelParams> two = {Flat({0, 0}), Flat({2, 4})};
  const std::vector<std::size_t> eq = {3, 3};
  EXPECT_EQ(FedAvg(two, eq).theta, (std::vector<double>{1, 2}));
  const std::vector<ModelParams> w = {Flat({4, 0}), Flat({0, 4})};
  const std::vector<std::size_t> s13 = {1, 3};
  const auto out = FedAvg(w, s13);
  EXPECT_NEAR(out.theta[0], 1.0, 1e-15);
  EXPECT_NEAR(out.theta[1], 3.0, 1e-15);
  EXPECT_THROW(FedAvg({}, {}), ConfigError);
}

TEST(Aggregate, UniformEqualSizeMatchesFedAvgLoop) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.Index(10), p = 1 + rng.Index(30);
    std::vector<ModelParams> models;
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> t(p + 1);
      for (double& x : t) x = rng.Normal() * 10;
      models.push_back(Flat(t));
    }
    std::vector<int> ids(k);
    std::iota(ids.begin(), ids.end(), 0);
    const std::vector<std::size_t> sizes(k, 50);
    const auto w = CombineWithSize(UniformFallback(ids), sizes);
    const auto got = Aggregate(w, models);
    for (std::size_t i = 0; i <= p; ++i) {
      double ref = 0.0;
      for (const auto& m : models) ref += m.theta[i] * 50.0;
      ref /= 50.0 * static_cast<double>(k);
      EXPECT_NEAR(got.theta[i], ref, 1e-12);
    }
  }
}

TEST(ProfileDistance, IdentityAndClassMasking) {
  auto a = MakeProfile(0, {1, 2}, {1, 1}, 2);
  auto b = a;
  EXPECT_EQ(ProfileDistance(a, b, DistanceKind::kEuclidean), 0.0);
  EXPECT_NEAR(ProfileDistance(a, b, DistanceKind::kCosine), 0.0, 1e-12);
  // A class present on only one side does not enter the distance.
  a.class_present[0] = true;
  a.class_mean[0] = {100, 100};
  EXPECT_EQ(ProfileDistance(a, b, DistanceKind::kEuclidean), 0.0);
  // Marginal-only Euclidean distance is rescaled by sqrt(1 + U).
  b.marginal_mean = {4, 6};
  EXPECT_NEAR(ProfileDistance(a, b, DistanceKind::kEuclidean), 5.0 * std::sqrt(3.0), 1e-12);
  b.class_present[0] = true;
  b.class_mean[0] = {100, 100};
  EXPECT_NEAR(ProfileDistance(a, b, DistanceKind::kEuclidean), 5.0 * std::sqrt(1.5), 1e-12);
}

TEST(AssignTestModel, NearestAndTies) {
  const std::vector<DistributionProfile> stored = {MakeProfile(7, {1, 0}, {0, 0}),
                                                   MakeProfile(3, {-1, 0}, {0, 0}),
                                                   MakeProfile(5, {2, 0}, {0, 0})};
  const std::vector<double> exact = {2, 0, 0, 0};
  auto a = AssignTestModel(exact, stored, DistanceKind::kEuclidean);
  EXPECT_EQ(a.matched_id, 5);
  EXPECT_EQ(a.index, 2u);
  EXPECT_EQ(a.distance, 0.0);
  const std::vector<double> near = {0, 1, 0, 0};
  // Distances sqrt(2), sqrt(2), sqrt(5): tie broken toward id 3.
  a = AssignTestModel(near, stored, DistanceKind::kEuclidean);
  EXPECT_EQ(a.matched_id, 3);
  const std::vector<DistributionProfile> two = {MakeProfile(1, {1}, {0}), MakeProfile(2, {2}, {0})};
  const std::vector<double> origin = {0, 0};
  EXPECT_EQ(AssignTestModel(origin, two, DistanceKind::kEuclidean).matched_id, 1);
}

TEST(AssignTestModel, MatchesBruteForce) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<DistributionProfile> stored;
    const std::size_t k = 1 + rng.Index(8);
    for (std::size_t j = 0; j < k; ++j) {
      stored.push_back(MakeProfile(static_cast<int>(rng.Index(100)),
                                   {rng.Normal(), rng.Normal()}, {rng.Uniform(), rng.Uniform()}));
    }
    const std::vector<double> q = {rng.Normal(), rng.Normal(), rng.Uniform(), rng.Uniform()};
    const auto got = AssignTestModel(q, stored, DistanceKind::kEuclidean);
    for (const auto& s : stored) {
      const double d = Distance(q, s.Marginal(), DistanceKind::kEuclidean);
      EXPECT_LE(got.distance, d);
      if (d == got.distance) EXPECT_LE(got.matched_id, s.client_id);
    }
  }
}

TEST(AssociateWithLabels, PicksBestAndLowestOnTie) {
  const auto arch = Architecture::SoftmaxRegression(2, 2);
  Matrix x(4, 2);
  std::vector<int> y = {0, 1, 0, 1};
  for (std::size_t r = 0; r < 4; ++r) x(r, static_cast<std::size_t>(y[r])) = 1.0;
  const ModelParams chance{arch, std::vector<double>(arch.ParamCount(), 0.0)};
  ModelParams perfect = chance;
  perfect.theta[0] = 5;
  perfect.theta[3] = 5;
  const std::vector<ModelParams> one = {chance};
  EXPECT_EQ(AssociateWithLabels(x, y, one), 0u);
  const std::vector<ModelParams> two = {chance, perfect};
  EXPECT_EQ(AssociateWithLabels(x, y, two), 1u);
  const std::vector<ModelParams> tie = {perfect, perfect};
  EXPECT_EQ(AssociateWithLabels(x, y, tie), 0u);
}

TEST(AssociationCsv, Layout) {
  auto a = ApplyThreshold(RawWeights{{2, 5}, {0.7, 0.3}}, 0.5);
  a.client_id = 9;
  const std::vector<AssociationWeights> rows = {a};
  const std::vector<int> prev = {2, 5};
  std::ostringstream out;
  WriteAssociationCsv(out, rows, prev);
  EXPECT_EQ(out.str(), "client,strategy,p2,p5\n9,Personalized,1,0\n");
}

}  // namespace
}  // namespace feroma

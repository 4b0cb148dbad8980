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

#include "feroma/error.hpp"
#include "feroma/kernels.hpp"
#include "feroma/model.hpp"

namespace feroma {
namespace {

Matrix RandomFeatures(Rng& rng, std::size_t n, std::size_t d) {
  Matrix x(n, d);
  for (double& v : x.data()) v = rng.Normal();
  return x;
}

std::vector<int> RandomLabels(Rng& rng, std::size_t n, std::size_t classes) {
  std::vector<int> y(n);
  for (int& v : y) v = static_cast<int>(rng.Index(classes));
  return y;
}

// Central differences of the batch loss, one coordinate at a time.
std::vector<double> NumericGradient(ModelParams p, const Matrix& x, const std::vector<int>& y,
                                    const std::vector<std::size_t>& batch, double h) {
  std::vector<double> g(p.theta.size());
  for (std::size_t i = 0; i < p.theta.size(); ++i) {
    const double keep = p.theta[i];
    p.theta[i] = keep + h;
    const double up = LossAndGradient(p, x, y, batch, nullptr);
    p.theta[i] = keep - h;
    const double down = LossAndGradient(p, x, y, batch, nullptr);
    p.theta[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

double RelativeError(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

TEST(Architecture, ParameterCounts) {
  EXPECT_EQ(Architecture::Mlp(784, 64, 10).ParamCount(), 50890u);
  EXPECT_EQ(Architecture::Mlp(16, 32, 4).ParamCount(), 16u * 32 + 32 + 32 * 4 + 4);
  EXPECT_EQ(Architecture::SoftmaxRegression(5, 3).ParamCount(), 18u);
  EXPECT_EQ(Architecture::Mlp(16, 32, 4).LatentDim(), 32u);
  EXPECT_EQ(Architecture::SoftmaxRegression(5, 3).LatentDim(), 5u);
}

TEST(ProfileOverhead, ReferenceRatios) {
  EXPECT_NEAR(ProfileOverhead(62006, 220), 3.548e-3, 1e-6);
  EXPECT_EQ(ProfileOverhead(62006, 0), 0.0);
  EXPECT_NEAR(ProfileOverhead(50890, 220), 4.323e-3, 1e-6);
  EXPECT_THROW(ProfileOverhead(0, 10), ConfigError);
}

TEST(Gradient, SingleSampleSoftmaxRegressionEveryCoordinate) {
  Rng rng(1);
  const auto arch = Architecture::SoftmaxRegression(6, 4);
  ModelParams p = InitModel(arch, rng);
  const Matrix x = RandomFeatures(rng, 1, 6);
  const std::vector<int> y = {2};
  const std::vector<std::size_t> batch = {0};
  std::vector<double> g;
  LossAndGradient(p, x, y, batch, &g);
  const auto n = NumericGradient(p, x, y, batch, 1e-5);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(g[i], n[i], 1e-5 * std::max(1.0, std::abs(n[i])));
  }
}

class GradientCheck : public ::testing::TestWithParam<ArchKind> {};

TEST_P(GradientCheck, MatchesCentralDifferencesOnRandomDraws) {
  Rng rng(GetParam() == ArchKind::kMlp ? 11 : 12);
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t z = 2 + rng.Index(6), u = 2 + rng.Index(4), h = 2 + rng.Index(8);
    const Architecture arch = GetParam() == ArchKind::kMlp ? Architecture::Mlp(z, h, u)
                                                           : Architecture::SoftmaxRegression(z, u);
    ModelParams p{arch, std::vector<double>(arch.ParamCount())};
    for (double& t : p.theta) t = rng.Uniform(-1, 1);
    const std::size_t n = 1 + rng.Index(5);
    const Matrix x = RandomFeatures(rng, n, z);
    const auto y = RandomLabels(rng, n, u);
    std::vector<std::size_t> batch(n);
    std::iota(batch.begin(), batch.end(), 0);
    std::vector<double> g;
    LossAndGradient(p, x, y, batch, &g);
    const double err = RelativeError(g, NumericGradient(p, x, y, batch, 1e-5));
    worst = std::max(worst, err);
    EXPECT_LT(err, 1e-4) << "draw " << draw;
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

INSTANTIATE_TEST_SUITE_P(Architectures, GradientCheck,
                         ::testing::Values(ArchKind::kSoftmaxRegression, ArchKind::kMlp));

TEST(Gradient, BackendsAgree) {
  if (!kernels::Avx2Supported()) GTEST_SKIP() << "AVX2 not available";
  Rng rng(21);
  const auto arch = Architecture::Mlp(13, 9, 5);
  const ModelParams p = InitModel(arch, rng);
  const Matrix x = RandomFeatures(rng, 40, 13);
  const auto y = RandomLabels(rng, 40, 5);
  std::vector<std::size_t> batch(40);
  std::iota(batch.begin(), batch.end(), 0);
  const auto before = kernels::ActiveBackend();
  std::vector<double> gs, gv;
  kernels::SetBackend(kernels::Backend::kScalar);
  const double ls = LossAndGradient(p, x, y, batch, &gs);
  kernels::SetBackend(kernels::Backend::kAvx2);
  const double lv = LossAndGradient(p, x, y, batch, &gv);
  kernels::SetBackend(before);
  EXPECT_NEAR(ls, lv, 1e-12);
  for (std::size_t i = 0; i < gs.size(); ++i) EXPECT_NEAR(gs[i], gv[i], 1e-12);
}

TEST(LocalUpdate, ZeroLearningRateLeavesParametersUnchanged) {
  Rng rng(2);
  const ModelParams p = InitModel(Architecture::Mlp(8, 6, 3), rng);
  const Matrix x = RandomFeatures(rng, 50, 8);
  const auto y = RandomLabels(rng, 50, 3);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  const ModelParams q = LocalUpdate(p, x, y, cfg, rng);
  EXPECT_EQ(p.theta, q.theta);
}

TEST(LocalUpdate, DeterministicGivenRng) {
  Rng data(3);
  const Matrix x = RandomFeatures(data, 80, 8);
  const auto y = RandomLabels(data, 80, 3);
  Rng init(4);
  const ModelParams p = InitModel(Architecture::Mlp(8, 6, 3), init);
  Rng a(5), b(5);
  EXPECT_EQ(LocalUpdate(p, x, y, TrainConfig{}, a), LocalUpdate(p, x, y, TrainConfig{}, b));
}

// Plain loop over the same shuffles: v <- mu v + g; theta <- theta - lr v.
TEST(LocalUpdate, MatchesReferenceMomentumLoop) {
  Rng data(6);
  const Matrix x = RandomFeatures(data, 37, 5);
  const auto y = RandomLabels(data, 37, 3);
  Rng init(7);
  const ModelParams p = InitModel(Architecture::SoftmaxRegression(5, 3), init);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.local_epochs = 3;
  cfg.learning_rate = 0.05;
  Rng r1(8), r2(8);
  const ModelParams got = LocalUpdate(p, x, y, cfg, r1);

  ModelParams ref = p;
  std::vector<double> v(ref.theta.size(), 0.0), g;
  std::vector<std::size_t> order(37);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t e = 0; e < cfg.local_epochs; ++e) {
    std::shuffle(order.begin(), order.end(), r2);
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      const std::vector<std::size_t> batch(order.begin() + s,
                                           order.begin() + std::min(order.size(), s + cfg.batch_size));
      LossAndGradient(ref, x, y, batch, &g);
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = cfg.momentum * v[i] + g[i];
        ref.theta[i] -= cfg.learning_rate * v[i];
      }
    }
  }
  for (std::size_t i = 0; i < ref.theta.size(); ++i) EXPECT_NEAR(got.theta[i], ref.theta[i], 1e-12);
}

TEST(LocalUpdate, SeparableBlobsAreLearned) {
  Rng rng(9);
  const std::size_t n = 400;
  Matrix x(n, 4);
  std::vector<int> y(n);
  for (std::size_t r = 0; r < n; ++r) {
    y[r] = static_cast<int>(r % 2);
    for (std::size_t j = 0; j < 4; ++j) x(r, j) = rng.Normal() * 0.5 + (y[r] ? 3.0 : -3.0);
  }
  for (auto arch : {Architecture::SoftmaxRegression(4, 2), Architecture::Mlp(4, 16, 2)}) {
    Rng init(10);
    TrainConfig cfg;
    cfg.local_epochs = 20;
    const ModelParams p = LocalUpdate(InitModel(arch, init), x, y, cfg, rng);
    EXPECT_GE(Evaluate(p, x, y).accuracy, 0.99);
  }
}

TEST(LocalUpdate, DivergenceIsReported) {
  Rng rng(12);
  Matrix x = RandomFeatures(rng, 64, 4);
  for (double& v : x.data()) v *= 1e150;
  const auto y = RandomLabels(rng, 64, 3);
  TrainConfig cfg;
  cfg.learning_rate = 1e150;
  const ModelParams p = InitModel(Architecture::Mlp(4, 8, 3), rng);
  try {
    LocalUpdate(p, x, y, cfg, rng);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("divergence"), std::string::npos);
  }
}

TEST(LocalUpdate, RejectsMismatchedData) {
  Rng rng(13);
  const ModelParams p = InitModel(Architecture::Mlp(4, 8, 3), rng);
  const Matrix x = RandomFeatures(rng, 10, 5);
  EXPECT_THROW(LocalUpdate(p, x, RandomLabels(rng, 10, 3), TrainConfig{}, rng), ConfigError);
  const Matrix ok = RandomFeatures(rng, 10, 4);
  std::vector<int> bad(10, 3);
  EXPECT_THROW(LocalUpdate(p, ok, bad, TrainConfig{}, rng), ConfigError);
  TrainConfig neg;
  neg.momentum = 1.0;
  EXPECT_THROW(LocalUpdate(p, ok, RandomLabels(rng, 10, 3), neg, rng), ConfigError);
}

TEST(Evaluate, PerfectAndUniformPredictors) {
  Rng rng(14);
  const std::size_t u = 10, n = 5000;
  const auto arch = Architecture::SoftmaxRegression(u, u);
  ModelParams perfect{arch, std::vector<double>(arch.ParamCount(), 0.0)};
  for (std::size_t c = 0; c < u; ++c) perfect.theta[c * u + c] = 10.0;
  Matrix x(n, u);
  std::vector<int> y(n);
  for (std::size_t r = 0; r < n; ++r) {
    y[r] = static_cast<int>(rng.Index(u));
    x(r, static_cast<std::size_t>(y[r])) = 1.0;
  }
  EXPECT_EQ(Evaluate(perfect, x, y).accuracy, 1.0);

  const ModelParams uniform{arch, std::vector<double>(arch.ParamCount(), 0.0)};
  const EvalResult r = Evaluate(uniform, x, y);
  EXPECT_NEAR(r.mean_loss, std::log(10.0), 1e-9);
  // Ties go to class 0, so accuracy is the class-0 share: binomial(n, 0.1).
  EXPECT_NEAR(r.accuracy, 0.1, 3 * std::sqrt(0.09 / n));
  EXPECT_THROW(Evaluate(uniform, Matrix(0, u), std::vector<int>{}), ConfigError);
}

TEST(Latents, ShapesAndFallback) {
  Rng rng(15);
  const Matrix x = RandomFeatures(rng, 17, 6);
  const auto mlp = Architecture::Mlp(6, 5, 3);
  const ModelParams zero{mlp, std::vector<double>(mlp.ParamCount(), 0.0)};
  const Matrix h = ExtractLatents(zero, x);
  EXPECT_EQ(h.rows(), 17u);
  EXPECT_EQ(h.cols(), 5u);
  for (double v : h.data()) EXPECT_EQ(v, 0.0);
  const ModelParams lin = InitModel(Architecture::SoftmaxRegression(6, 3), rng);
  EXPECT_EQ(ExtractLatents(lin, x), x);
  const Matrix h2 = ExtractLatents(InitModel(mlp, rng), x);
  for (double v : h2.data()) EXPECT_GE(v, 0.0);
}

TEST(Serialization, RoundTripAndCorruption) {
  Rng rng(16);
  for (auto arch : {Architecture::Mlp(7, 4, 3), Architecture::SoftmaxRegression(7, 3)}) {
    const ModelParams p = InitModel(arch, rng);
    const auto bytes = SerializeParams(p);
    EXPECT_EQ(DeserializeParams(bytes), p);
    auto truncated = bytes;
    truncated.pop_back();
    EXPECT_THROW(DeserializeParams(truncated), FormatError);
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(DeserializeParams(bad), FormatError);
  }
}

TEST(ModelParams, ConvexCombinationStaysValid) {
  Rng rng(17);
  const auto arch = Architecture::Mlp(5, 4, 3);
  const ModelParams a = InitModel(arch, rng), b = InitModel(arch, rng);
  for (double w : {0.0, 0.3, 1.0}) {
    ModelParams c{arch, a.theta};
    for (std::size_t i = 0; i < c.theta.size(); ++i) c.theta[i] = w * a.theta[i] + (1 - w) * b.theta[i];
    EXPECT_NO_THROW(c.Validate());
  }
  ModelParams bad = a;
  bad.theta.pop_back();
  EXPECT_THROW(bad.Validate(), ConfigError);
  bad = a;
  bad.theta[0] = NAN;
  EXPECT_THROW(bad.Validate(), ConfigError);
}

}  // namespace
}  // namespace feroma

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
#include <vector>

#include "feroma/kernels.hpp"
#include "feroma/rng.hpp"

namespace feroma::kernels {
namespace {

std::vector<double> RandomVector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.Uniform(-3.0, 3.0);
  return v;
}

// Relative agreement that tolerates reassociation of a length-n sum.
void ExpectClose(double a, double b, std::size_t n) {
  const double tol = 1e-14 * static_cast<double>(n + 1) * (1.0 + std::abs(a) + std::abs(b));
  EXPECT_NEAR(a, b, tol);
}

class KernelEquivalence : public ::testing::TestWithParam<std::size_t> {
 protected:
  void SetUp() override {
    if (!Avx2Supported()) GTEST_SKIP() << "AVX2 not available on this host";
  }
};

TEST_P(KernelEquivalence, DotAndDistanceAgree) {
  const std::size_t n = GetParam();
  const auto& s = Table(Backend::kScalar);
  const auto& v = Table(Backend::kAvx2);
  Rng rng(1000 + n);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = RandomVector(rng, n);
    const auto b = RandomVector(rng, n);
    ExpectClose(s.dot(a.data(), b.data(), n), v.dot(a.data(), b.data(), n), n);
    ExpectClose(s.squared_distance(a.data(), b.data(), n),
                v.squared_distance(a.data(), b.data(), n), n);
  }
}

TEST_P(KernelEquivalence, AxpyAndScaleAgree) {
  const std::size_t n = GetParam();
  Rng rng(2000 + n);
  const auto x = RandomVector(rng, n);
  auto y1 = RandomVector(rng, n);
  auto y2 = y1;
  Table(Backend::kScalar).axpy(0.7, x.data(), y1.data(), n);
  Table(Backend::kAvx2).axpy(0.7, x.data(), y2.data(), n);
  for (std::size_t i = 0; i < n; ++i) ExpectClose(y1[i], y2[i], 1);
  Table(Backend::kScalar).scale(-1.3, y1.data(), n);
  Table(Backend::kAvx2).scale(-1.3, y2.data(), n);
  for (std::size_t i = 0; i < n; ++i) ExpectClose(y1[i], y2[i], 1);
}

TEST_P(KernelEquivalence, AffineReluAgrees) {
  const std::size_t cols = GetParam();
  const std::size_t rows = 7;
  Rng rng(3000 + cols);
  const auto w = RandomVector(rng, rows * cols);
  const auto b = RandomVector(rng, rows);
  const auto x = RandomVector(rng, cols);
  std::vector<double> y1(rows), y2(rows);
  Table(Backend::kScalar).affine(w.data(), b.data(), x.data(), y1.data(), rows, cols);
  Table(Backend::kAvx2).affine(w.data(), b.data(), x.data(), y2.data(), rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    EXPECT_GE(y1[i], 0.0);
    ExpectClose(y1[i], y2[i], cols);
  }
}

// Lengths straddle the 4- and 8-wide vector bodies and their scalar tails.
INSTANTIATE_TEST_SUITE_P(Lengths, KernelEquivalence,
                         ::testing::Values(0, 1, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 100, 1001));

TEST(Kernels, ScalarReferenceValues) {
  const std::vector<double> a = {1, 2, 3};
  const std::vector<double> b = {4, -5, 6};
  EXPECT_DOUBLE_EQ(Dot(a, b), 12.0);
  EXPECT_DOUBLE_EQ(SquaredDistance(a, b), 9.0 + 49.0 + 9.0);
}

TEST(Kernels, SpanWrappersRejectLengthMismatch) {
  const std::vector<double> a = {1, 2, 3};
  const std::vector<double> b = {1, 2};
  EXPECT_THROW(Dot(a, b), std::invalid_argument);
}

TEST(Kernels, BackendSwitchRoundTrips) {
  const Backend before = ActiveBackend();
  SetBackend(Backend::kScalar);
  EXPECT_EQ(ActiveBackend(), Backend::kScalar);
  EXPECT_EQ(BackendName(Backend::kScalar), "scalar");
  if (Avx2Supported()) {
    SetBackend(Backend::kAvx2);
    EXPECT_EQ(ActiveBackend(), Backend::kAvx2);
  } else {
    EXPECT_THROW(SetBackend(Backend::kAvx2), std::invalid_argument);
  }
  SetBackend(before);
}

}  // namespace
}  // namespace feroma::kernels

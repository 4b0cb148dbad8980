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

#ifndef FEROMA_VALIDATION_HPP_
#define FEROMA_VALIDATION_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "feroma/dpe.hpp"

namespace feroma {

struct GapStats {
  double max = 0.0;
  double min = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

struct FidelityReport {
  std::string reference;  // "w2" or "js"
  std::size_t pairs_tested = 0;
  GapStats gap;
  std::size_t bound_violations = 0;
  double c_lower = 0.0;
  double c_upper = 0.0;
};

// Diagonal Gaussian pairs with means in [-1, 1]^dim and variances in
// [lambda_min, lambda_max]; checks c- Delta <= W2 <= c+ Delta.
FidelityReport FidelitySweep(std::size_t num_pairs, std::size_t dim, double lambda_min,
                             double lambda_max, std::uint64_t seed);

// Random histograms on `bins` equally spaced points in [0, 1]; the gap is
// between the (mean, variance) profile distance and the JS distance.
FidelityReport JsSweep(std::size_t num_pairs, std::size_t bins, std::uint64_t seed);

struct StochasticityReport {
  std::size_t trials = 0;
  std::size_t sample_count = 0;
  std::vector<double> empirical;  // per marginal coordinate
  std::vector<double> standard_error;
  std::vector<double> bound;
  // tau^2 = 1 headline with the largest Laplace scale in use.
  double rho2 = 0.0;
  double max_empirical = 0.0;
  bool passed = false;
};

// Repeats label-free extraction on fixed features; passes when every
// coordinate's variance is within its bound plus 3 standard errors.
StochasticityReport StochasticityCheck(const ProfileEncoder& encoder, const Matrix& features,
                                       std::size_t trials, std::uint64_t seed);

// Frozen data for the stochasticity check: v points uniform in a centered
// box with side proportional to 0.85^i along axis i of a 10-dimensional
// feature space, read through the identity (softmax regression) encoder so
// that latents equal features. The box is scaled so that the widest PCA
// coordinate has range 2, i.e. tau^2 <= 1 for every coordinate.
struct StochasticityFixture {
  ProfileEncoder encoder;
  Matrix features;
};

StochasticityFixture MakeStochasticityFixture(std::size_t v, const DpeConfig& cfg,
                                              std::uint64_t seed);

enum class Fault { kNone, kScaleWeights };

struct PropertyResult {
  std::string name;
  bool passed = true;
  std::optional<std::uint64_t> failing_seed;
  std::string detail;
};

struct SanityReport {
  std::vector<PropertyResult> properties;
  bool passed() const;
};

// normalization, scale_consistency, fedavg_recovery, strategy_partition,
// nearest_neighbor, threshold_monotone.
SanityReport SanitySuite(std::uint64_t seed, std::size_t instances = 200,
                         Fault fault = Fault::kNone);

nlohmann::json ToJson(const FidelityReport& r);
nlohmann::json ToJson(const StochasticityReport& r);
nlohmann::json ToJson(const SanityReport& r);

}  // namespace feroma

#endif  // FEROMA_VALIDATION_HPP_

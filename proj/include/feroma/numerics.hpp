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

// Linear-algebra and probability helpers shared by the profile extractor,
// the mapping layer and the validation harnesses.

#ifndef FEROMA_NUMERICS_HPP_
#define FEROMA_NUMERICS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "feroma/matrix.hpp"
#include "feroma/rng.hpp"

namespace feroma {

// Linear map x -> projection * (x - center) onto output_dim orthonormal
// directions. Rows are sorted by decreasing explained variance.
struct PcaProjector {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  Matrix projection;  // output_dim x input_dim
  std::vector<double> center;
  std::vector<double> explained_variance;
  double total_variance = 0.0;
  std::uint64_t seed = 0;

  // One row per input row.
  Matrix Project(const Matrix& points) const;
  // Mean squared residual (denominator n - 1) after projecting and lifting
  // back. Equals the sum of the discarded covariance eigenvalues on the
  // fitting set.
  double ReconstructionError(const Matrix& points) const;
  double ExplainedVarianceRatio(std::size_t component) const;

  friend bool operator==(const PcaProjector&, const PcaProjector&) = default;
};

enum class PcaMethod { kAuto, kEigendecomposition, kPowerIteration };

// Widest input handled by the dense eigensolver under kAuto.
inline constexpr std::size_t kDenseEigenLimit = 512;

// Fits PCA on the rows of `points`. Each component is sign-normalized so that
// its largest-magnitude coordinate is positive (lowest index on ties). The
// seed only drives the start vectors of power iteration.
PcaProjector FitSharedPca(const Matrix& points, std::size_t output_dim,
                          std::uint64_t seed,
                          PcaMethod method = PcaMethod::kAuto);

enum class DistanceKind { kEuclidean, kCosine };

std::string_view DistanceKindName(DistanceKind kind);
DistanceKind ParseDistanceKind(std::string_view name);

// Euclidean norm of a - b, or 1 - cos(a, b) clamped to [0, 2].
double Distance(std::span<const double> a, std::span<const double> b,
                DistanceKind kind);

std::vector<double> SampleLaplace(double scale, std::size_t n, Rng& rng);

struct DiagonalGaussian {
  std::vector<double> mean;
  std::vector<double> variance;
};

// Closed-form W2^2 between Gaussians with commuting (diagonal) covariances:
// |mu1 - mu2|^2 + sum_i (sqrt v1_i - sqrt v2_i)^2.
double GaussianW2Squared(const DiagonalGaussian& p, const DiagonalGaussian& q);

// |mu1 - mu2|^2 + sum_i (v1_i - v2_i)^2: the squared Euclidean distance
// between two moment profiles.
double ProfileDeltaSquared(const DiagonalGaussian& p, const DiagonalGaussian& q);

// sqrt of the base-2 Jensen-Shannon divergence; lies in [0, 1].
double JsDistanceDiscrete(std::span<const double> p, std::span<const double> q);

}  // namespace feroma

#endif  // FEROMA_NUMERICS_HPP_

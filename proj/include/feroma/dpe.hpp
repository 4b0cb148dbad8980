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

#ifndef FEROMA_DPE_HPP_
#define FEROMA_DPE_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "feroma/matrix.hpp"
#include "feroma/model.hpp"
#include "feroma/numerics.hpp"
#include "feroma/rng.hpp"

namespace feroma {

struct GlobalBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }
  // Throws ConfigError unless lower <= upper with matching lengths.
  void Validate() const;
  bool Contains(std::span<const double> point) const;

  friend bool operator==(const GlobalBounds&, const GlobalBounds&) = default;
};

// Coordinate-wise (min, max) of a client's latents.
std::pair<std::vector<double>, std::vector<double>> ClientBounds(const Matrix& latents);

// Min of mins / max of maxes over the reporting clients.
GlobalBounds MergeBounds(
    std::span<const std::pair<std::vector<double>, std::vector<double>>> client_bounds);

struct DpeConfig {
  std::size_t pca_dim = 10;
  std::size_t reference_points = 200;
  std::size_t masks = 3;
  double mask_prob = 0.5;
  double epsilon = 10.0;
  bool dp_enabled = true;
  std::uint64_t pca_seed = 0;

  void Validate() const;
};

inline constexpr int kMaskRetries = 8;

struct DistributionProfile {
  std::vector<double> marginal_mean;
  std::vector<double> marginal_var;
  std::vector<std::vector<double>> class_mean;
  std::vector<std::vector<double>> class_var;
  std::vector<bool> class_present;
  std::vector<std::size_t> class_count;
  double epsilon_used = std::numeric_limits<double>::infinity();
  std::size_t sample_count = 0;
  int round = 0;
  int client_id = 0;

  std::size_t pca_dim() const { return marginal_mean.size(); }
  std::size_t num_classes() const { return class_mean.size(); }
  // 2l(1 + U).
  std::size_t FullDim() const { return 2 * pca_dim() * (1 + num_classes()); }

  // Label-free subvector: marginal means then marginal variances.
  std::vector<double> Marginal() const;
  // Means then variances of class u.
  std::vector<double> ClassBlock(std::size_t u) const;
  // Marginal block followed by every class block.
  std::vector<double> Flatten() const;
};

// Per-coordinate sensitivity ranges in PCA space: the projected bounding-box
// extent for means and (extent / 2)^2 for variances.
struct StatisticRanges {
  std::vector<double> mean;
  std::vector<double> variance;
};

PcaProjector BuildReferenceProjector(const GlobalBounds& bounds, const DpeConfig& cfg);

StatisticRanges RangesInPcaSpace(const PcaProjector& projector, const GlobalBounds& bounds);

// Unsanitized moments averaged over cfg.masks Bernoulli row masks. `labels`
// empty means label-free: class blocks are zero and class_present all false.
DistributionProfile MonteCarloMoments(const Matrix& reduced, std::span<const int> labels,
                                      std::size_t num_classes, const DpeConfig& cfg,
                                      Rng& rng);

// Laplace(0, range / (v * epsilon)) on every populated coordinate. With
// dp_enabled false the input is returned unchanged.
DistributionProfile Sanitize(const DistributionProfile& profile, const DpeConfig& cfg,
                             const StatisticRanges& ranges, std::size_t v, Rng& rng);

// Laplace scale used for each coordinate of the marginal block.
std::vector<double> NoiseScales(const StatisticRanges& ranges, std::size_t v,
                                const DpeConfig& cfg);

// tau^2 / (M gamma v) + 2 b^2.
double StochasticityBound(double tau2, std::size_t masks, double mask_prob, std::size_t v,
                          double laplace_scale);

// Frozen encoder shared by every client: model latents clamped to the global
// bounds, then projected with the shared reference projector.
class ProfileEncoder {
 public:
  ProfileEncoder(ModelParams model, GlobalBounds bounds, DpeConfig cfg);

  const ModelParams& model() const { return model_; }
  const GlobalBounds& bounds() const { return bounds_; }
  const PcaProjector& projector() const { return projector_; }
  const StatisticRanges& ranges() const { return ranges_; }
  const DpeConfig& config() const { return cfg_; }

  Matrix Reduce(const Matrix& features) const;

  DistributionProfile Extract(const Matrix& features, std::span<const int> labels,
                              Rng& rng) const;
  // Labels never enter this path.
  DistributionProfile ExtractLabelFree(const Matrix& features, Rng& rng) const;

  // Per-coordinate variance bound for the marginal block of a profile built
  // from v samples.
  std::vector<double> MarginalBound(std::size_t v) const;

 private:
  ModelParams model_;
  GlobalBounds bounds_;
  DpeConfig cfg_;
  PcaProjector projector_;
  StatisticRanges ranges_;
};

DistributionProfile ExtractProfile(const ModelParams& model, const ClientDataset& data,
                                   const GlobalBounds& bounds, const DpeConfig& cfg,
                                   bool with_labels, Rng& rng);

// client_id,round,epsilon,v,marginal(2l),class blocks(2lU),present(U).
void WriteProfileHeader(std::ostream& out, std::size_t pca_dim, std::size_t num_classes);
void WriteProfileRow(std::ostream& out, const DistributionProfile& profile);

}  // namespace feroma

#endif  // FEROMA_DPE_HPP_

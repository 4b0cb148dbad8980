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

#ifndef FEROMA_MAPPING_HPP_
#define FEROMA_MAPPING_HPP_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "feroma/dpe.hpp"
#include "feroma/model.hpp"
#include "feroma/numerics.hpp"

namespace feroma {

enum class Strategy { kClustered, kPersonalized, kGlobalFallback };

std::string_view StrategyName(Strategy s);

// Distance over the marginal block plus the class blocks present on both
// sides. Euclidean distances are rescaled by sqrt(total / active blocks).
double ProfileDistance(const DistributionProfile& a, const DistributionProfile& b,
                       DistanceKind kind);

// Softmax of negated distances, one weight per previous participant.
struct RawWeights {
  std::vector<int> ids;
  std::vector<double> weights;
};

RawWeights SoftmaxFromDistances(std::span<const int> ids, std::span<const double> distances,
                                bool standardize = false);

RawWeights SoftmaxWeights(const DistributionProfile& current,
                          std::span<const DistributionProfile> previous, DistanceKind kind,
                          bool standardize = false);

struct AssociationWeights {
  int client_id = 0;
  int round = 0;
  std::vector<int> ids;
  std::vector<double> weights;
  Strategy strategy = Strategy::kGlobalFallback;
  std::optional<double> threshold_used;

  std::size_t Support() const;
};

// Zeroes weights below tau and renormalizes the survivors; when nothing
// survives the result is uniform with strategy GlobalFallback.
AssociationWeights ApplyThreshold(const RawWeights& raw, double tau);
// Keeps the raw weights and classifies the strategy by support size.
AssociationWeights WithoutThreshold(const RawWeights& raw);
AssociationWeights UniformFallback(std::span<const int> ids);

// w_j * s_j renormalized; sizes are aligned with weights.ids.
std::vector<double> CombineWithSize(const AssociationWeights& weights,
                                    std::span<const std::size_t> sizes);

ModelParams Aggregate(std::span<const double> weights, std::span<const ModelParams> models);

ModelParams FedAvg(std::span<const ModelParams> models, std::span<const std::size_t> sizes);

struct TestAssignment {
  std::size_t index = 0;
  int matched_id = 0;
  double distance = 0.0;
};

// Nearest stored marginal block; ties go to the lowest participant id.
TestAssignment AssignTestModel(std::span<const double> test_marginal,
                               std::span<const DistributionProfile> final_profiles,
                               DistanceKind kind);

// Index of the model with the best accuracy on the labelled set; ties go to
// the lowest index.
std::size_t AssociateWithLabels(const Matrix& features, std::span<const int> labels,
                                std::span<const ModelParams> models);

// Rows are current clients, columns the previous participants in `prev_ids`.
void WriteAssociationCsv(std::ostream& out, std::span<const AssociationWeights> rows,
                         std::span<const int> prev_ids);

}  // namespace feroma

#endif  // FEROMA_MAPPING_HPP_

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

#ifndef FEROMA_FEDERATION_HPP_
#define FEROMA_FEDERATION_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "feroma/datagen.hpp"
#include "feroma/dpe.hpp"
#include "feroma/mapping.hpp"
#include "feroma/model.hpp"

namespace feroma {

enum class Aggregation { kFeroma, kFedAvg };

std::string_view AggregationName(Aggregation a);
Aggregation ParseAggregation(std::string_view name);

struct ChurnEvent {
  std::size_t round = 0;
  int client = 0;
  bool join = false;

  friend bool operator==(const ChurnEvent&, const ChurnEvent&) = default;
};

struct FederationConfig {
  std::size_t rounds = 20;
  std::size_t warmup_rounds = 5;
  double participation_rate = 1.0;
  Aggregation aggregation = Aggregation::kFeroma;
  bool threshold_enabled = true;
  // Unset means 1 / |A_{t-1}|.
  std::optional<double> threshold;
  DistanceKind train_distance = DistanceKind::kCosine;
  DistanceKind test_distance = DistanceKind::kEuclidean;
  bool standardize_distances = false;
  double eval_fraction = 0.2;
  std::size_t labels_per_class = 20;
  std::size_t test_clients = 20;
  double unseen_fraction = 0.0;
  ArchKind arch = ArchKind::kMlp;
  std::size_t hidden_width = 32;
  TrainConfig train;
  DpeConfig dpe;
  DriftSchedule schedule;
  std::vector<ChurnEvent> churn;

  Architecture MakeArchitecture() const;
  // Also validates the nested configs; throws ConfigError.
  void Validate() const;
};

struct RoundRecord {
  int round = -1;
  std::vector<int> participants;  // ascending
  std::map<int, ModelParams> models;
  std::map<int, DistributionProfile> profiles;
  std::map<int, std::size_t> sizes;
  std::map<int, std::string> tags;
};

struct ClientRoundMetric {
  int round = 0;
  int client = 0;
  std::string tag;
  double accuracy = 0.0;
  double loss = 0.0;
  std::optional<Strategy> strategy;
  std::size_t support = 0;
};

struct RoundAssociation {
  int round = 0;
  std::vector<int> previous;
  std::vector<AssociationWeights> rows;
};

struct CostReport {
  std::size_t param_count = 0;
  std::size_t profile_dim = 0;
  std::size_t model_bytes = 0;
  std::size_t profile_bytes = 0;
  double overhead_percent = 0.0;
  double profile_ratio = 0.0;  // d / |theta|
  bool compact = true;         // ratio <= kCompactnessLimit
};

// Upload per client per round with float32 on the wire.
CostReport MakeCostReport(std::size_t param_count, std::size_t profile_dim,
                          bool profiles_enabled);
CostReport MakeCostReport(const RoundRecord& final, const FederationConfig& cfg);

struct RunMetrics {
  std::vector<ClientRoundMetric> rows;
  std::vector<RoundAssociation> associations;
  std::vector<DistributionProfile> profiles;
  std::vector<double> round_seconds;
  double final_mean_accuracy = 0.0;
  double final_std_accuracy = 0.0;
  std::size_t profile_releases = 0;
  CostReport cost;
};

struct TrainingResult {
  RoundRecord final;
  RunMetrics metrics;
  std::optional<ProfileEncoder> encoder;
};

std::set<int> UpdateClientPool(const std::set<int>& pool, std::size_t round,
                               std::span<const ChurnEvent> churn);

// ceil(rate * |pool|) ids drawn without replacement, returned ascending.
std::vector<int> SelectParticipants(const std::set<int>& pool, double rate,
                                    std::uint64_t seed, std::size_t round);

TrainingResult RunTraining(const FederationConfig& cfg);

struct TestMetric {
  std::size_t index = 0;
  std::string tag;
  bool unseen = false;
  int matched_id = -1;
  std::string matched_tag;
  double accuracy = 0.0;
  double loss = 0.0;
};

struct TestMetrics {
  std::vector<TestMetric> rows;
  double mean_accuracy = 0.0;
  // Fraction of seen test clients matched to a model with the same tag.
  double match_rate = 0.0;
};

// Read-only with respect to `training`.
TestMetrics RunInference(const TrainingResult& training,
                         std::span<const ClientDataset> test_clients,
                         const FederationConfig& cfg);

}  // namespace feroma

#endif  // FEROMA_FEDERATION_HPP_

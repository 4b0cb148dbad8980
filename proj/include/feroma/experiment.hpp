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

#ifndef FEROMA_EXPERIMENT_HPP_
#define FEROMA_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "feroma/config.hpp"
#include "feroma/federation.hpp"

namespace feroma {

inline constexpr int kSummarySchemaVersion = 1;

struct SeedOutcome {
  std::uint64_t seed = 0;
  double final_mean_accuracy = 0.0;
  double final_std_accuracy = 0.0;
  double test_mean_accuracy = 0.0;
  double match_rate = 0.0;
  std::size_t profile_releases = 0;
};

struct ExperimentSummary {
  std::vector<SeedOutcome> seeds;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_test_accuracy = 0.0;
  double std_test_accuracy = 0.0;
  CostReport cost;

  nlohmann::json ToJson(const ExperimentConfig& cfg) const;
};

// Trains and tests once per seed, writing everything under cfg.output_dir:
// config.ini, summary.json and seed_<s>/{metrics.csv, timing.csv,
// test_metrics.csv, profiles.csv, assoc/round_<t>.csv, models/client_<id>.bin}.
ExperimentSummary RunExperiment(const ExperimentConfig& cfg);

// One CSV per (round, client) under <output_dir>/data plus manifest.csv with
// one tag per (client, drift window). Uses the first configured seed.
std::size_t WriteDatasets(const ExperimentConfig& cfg);

}  // namespace feroma

#endif  // FEROMA_EXPERIMENT_HPP_

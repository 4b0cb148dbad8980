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

#ifndef FEROMA_CONFIG_HPP_
#define FEROMA_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "feroma/federation.hpp"

namespace feroma {

struct ExperimentConfig {
  FederationConfig federation;
  std::filesystem::path output_dir = "runs/default";
  std::vector<std::uint64_t> seeds = {42, 43, 44, 45, 46};
  // Optional MNIST-style pool; both empty means synthetic features.
  std::string idx_images;
  std::string idx_labels;
  std::size_t idx_limit = 0;

  // MNIST-shaped synthetic defaults: 784 features, 10 classes, mlp(784, 32, 10).
  ExperimentConfig();

  void Validate() const;
};

// Sectioned key = value text. Unknown sections or keys raise ConfigError.
ExperimentConfig ParseConfig(std::string_view text);
ExperimentConfig LoadConfig(const std::filesystem::path& path);
std::string SerializeConfig(const ExperimentConfig& cfg);

// Applies one "section.key=value" override.
void ApplyOverride(ExperimentConfig& cfg, std::string_view assignment);

// Loads the IDX pool named by the config, if any, into the schedule.
void AttachIdxPool(ExperimentConfig& cfg);

}  // namespace feroma

#endif  // FEROMA_CONFIG_HPP_

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

#ifndef FEROMA_MODEL_HPP_
#define FEROMA_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "feroma/datagen.hpp"
#include "feroma/matrix.hpp"
#include "feroma/rng.hpp"

namespace feroma {

enum class ArchKind { kSoftmaxRegression, kMlp };

std::string_view ArchKindName(ArchKind kind);
ArchKind ParseArchKind(std::string_view name);

struct Architecture {
  ArchKind kind = ArchKind::kMlp;
  std::size_t input_dim = 0;
  std::size_t hidden_width = 32;  // ignored by softmax regression
  std::size_t num_classes = 0;

  static Architecture SoftmaxRegression(std::size_t input_dim, std::size_t classes) {
    return {ArchKind::kSoftmaxRegression, input_dim, 0, classes};
  }
  static Architecture Mlp(std::size_t input_dim, std::size_t hidden, std::size_t classes) {
    return {ArchKind::kMlp, input_dim, hidden, classes};
  }

  // mlp: z*h + h + h*U + U; softmax regression: z*U + U.
  std::size_t ParamCount() const;
  // Width of ExtractLatents rows.
  std::size_t LatentDim() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// Flat parameter layout. mlp: W1 (h x z), b1 (h), W2 (U x h), b2 (U).
// softmax regression: W (U x z), b (U). All matrices row-major.
struct ModelParams {
  Architecture arch;
  std::vector<double> theta;

  // Throws ConfigError when theta has the wrong length or is non-finite.
  void Validate() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct TrainConfig {
  double learning_rate = 0.005;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  std::size_t local_epochs = 2;

  void Validate() const;
};

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
ModelParams InitModel(const Architecture& arch, Rng& rng);

// Mean cross-entropy over `batch` rows; when `gradient` is non-null it is
// resized to theta's length and overwritten with d(loss)/d(theta).
double LossAndGradient(const ModelParams& params, const Matrix& features,
                       std::span<const int> labels, std::span<const std::size_t> batch,
                       std::vector<double>* gradient);

// `local_epochs` passes of shuffled mini-batch SGD with heavy-ball momentum
// (v <- mu v + g; theta <- theta - lr v). The momentum buffer starts at zero.
// Throws DivergenceError on a non-finite loss.
ModelParams LocalUpdate(const ModelParams& params, const Matrix& features,
                        std::span<const int> labels, const TrainConfig& cfg, Rng& rng);
ModelParams LocalUpdate(const ModelParams& params, const ClientDataset& data,
                        const TrainConfig& cfg, Rng& rng);

// Argmax predictions; ties go to the lowest class index.
std::vector<int> Predict(const ModelParams& params, const Matrix& features);

EvalResult Evaluate(const ModelParams& params, const Matrix& features,
                    std::span<const int> labels);
EvalResult Evaluate(const ModelParams& params, const ClientDataset& data);

// Post-ReLU hidden activations for mlp; raw features for softmax regression.
Matrix ExtractLatents(const ModelParams& params, const Matrix& features);

// d / |theta|.
double ProfileOverhead(std::size_t param_count, std::size_t profile_dim);
// Configurations above this ratio are flagged by the compactness report.
inline constexpr double kCompactnessLimit = 1e-2;

// Little-endian checkpoint record: "FRMP", version, arch, theta as float64.
std::vector<std::uint8_t> SerializeParams(const ModelParams& params);
ModelParams DeserializeParams(std::span<const std::uint8_t> bytes);

}  // namespace feroma

#endif  // FEROMA_MODEL_HPP_

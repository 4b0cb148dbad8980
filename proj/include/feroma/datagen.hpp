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

// Per-client, per-round synthetic datasets under the four non-IID shift
// families (feature skew, label skew, and the two concept shifts), with
// distributions redrawn every `drift_every` rounds.
//
// The base distribution is a U-class mixture of unit-variance Gaussians whose
// means sit on the scaled simplex separation * e_u in R^z. Optionally the
// base samples come from an IDX (MNIST-style) pool instead, in which case
// rotations act on the image grid.

#ifndef FEROMA_DATAGEN_HPP_
#define FEROMA_DATAGEN_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "feroma/matrix.hpp"
#include "feroma/rng.hpp"

namespace feroma {

enum class NonIidType { kPX, kPY, kPYgX, kPXgY };
enum class NonIidLevel { kLow, kMedium, kHigh };
enum class RecipeAssignment { kRandom, kRoundRobin };

std::string_view NonIidTypeName(NonIidType type);
NonIidType ParseNonIidType(std::string_view name);
std::string_view NonIidLevelName(NonIidLevel level);
NonIidLevel ParseNonIidLevel(std::string_view name);
std::string_view AssignmentName(RecipeAssignment assignment);
RecipeAssignment ParseAssignment(std::string_view name);

inline constexpr int kOriginalColor = -1;
inline constexpr int kColorCount = 3;  // red, green, blue

// Rotation plus additive "color" shift applied to a feature vector.
struct FeatureTransform {
  double angle_degrees = 0.0;
  int color = kOriginalColor;

  bool IsIdentity() const { return angle_degrees == 0.0 && color == kOriginalColor; }
  friend bool operator==(const FeatureTransform&, const FeatureTransform&) = default;
};

// One generating distribution. Only the fields of the bank's type are used.
struct Recipe {
  FeatureTransform transform;                      // PX
  std::vector<int> classes;                        // PY: retained classes
  std::vector<int> label_map;                      // PYgX: class -> new label
  std::vector<FeatureTransform> class_transforms;  // PXgY: per original class

  friend bool operator==(const Recipe&, const Recipe&) = default;
};

struct IdxPool {
  Matrix features;  // rows x (image_rows * image_cols), scaled to [0, 1]
  std::vector<int> labels;
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
};

struct DriftSchedule {
  std::size_t total_rounds = 20;
  std::size_t drift_every = 2;
  NonIidType type = NonIidType::kPX;
  NonIidLevel level = NonIidLevel::kLow;
  std::size_t clients = 20;
  std::size_t samples_per_client = 500;
  std::uint64_t seed = 42;
  std::size_t num_classes = 10;
  std::size_t feature_dim = 16;
  double separation = 4.0;
  double color_shift = 2.0;
  // Keep only the first `recipes` entries of the bank; 0 keeps all.
  std::size_t recipes = 0;
  RecipeAssignment assignment = RecipeAssignment::kRandom;
  // Replace the level's rotation / color sets for PX when non-empty.
  std::vector<double> rotations;
  std::vector<int> colors;
  std::shared_ptr<const IdxPool> pool;

  std::size_t WindowOf(std::size_t round) const { return round / drift_every; }
  // Throws ConfigError on inconsistent settings.
  void Validate() const;
};

struct ClientDataset {
  Matrix features;
  std::vector<int> labels;
  std::string distribution_tag;
  int round = 0;
  int client_id = 0;

  std::size_t size() const { return labels.size(); }
};

struct RecipeBank {
  NonIidType type = NonIidType::kPX;
  NonIidLevel level = NonIidLevel::kLow;
  std::vector<Recipe> recipes;
  std::vector<int> pool;  // PYgX permutation pool

  std::size_t size() const { return recipes.size(); }
};

// Number of recipes a level offers before any `recipes` truncation.
std::size_t DefaultBankSize(NonIidType type, NonIidLevel level);
// Classes in the PYgX permutation pool (3 / 4 / 5 by level, capped at U).
std::size_t PermutationPoolSize(NonIidLevel level, std::size_t num_classes);

RecipeBank BuildRecipeBank(const DriftSchedule& schedule);

// Applies a transform in place. For image-shaped rows rotation acts on the
// pixel grid; otherwise it rotates every consecutive coordinate pair.
void ApplyFeatureTransform(std::span<double> row, const FeatureTransform& transform,
                           const DriftSchedule& schedule);

std::vector<int> Relabel(std::span<const int> labels, std::span<const int> label_map);

class DriftGenerator {
 public:
  explicit DriftGenerator(DriftSchedule schedule);

  const DriftSchedule& schedule() const { return schedule_; }
  const RecipeBank& bank() const { return bank_; }

  // Recipe held by `client_id` during drift window `window`. Consecutive
  // windows always hold different recipes when the bank has two or more.
  std::size_t RecipeIndex(int client_id, std::size_t window) const;
  std::string Tag(std::size_t recipe_index) const;
  std::string TagFor(int client_id, std::size_t round) const;

  ClientDataset GenerateRound(std::size_t round, int client_id) const;

  // floor(count * unseen_fraction) clients get a freshly sampled recipe with
  // an "unseen" tag; the rest reuse a tag from the final training round.
  std::vector<ClientDataset> GenerateTestClients(std::size_t count,
                                                 double unseen_fraction) const;

  ClientDataset Sample(const Recipe& recipe, std::size_t count, Rng& rng,
                       std::string tag, int round, int client_id) const;
  Recipe UnseenRecipe(Rng& rng) const;

 private:
  DriftSchedule schedule_;
  RecipeBank bank_;
  std::vector<std::vector<std::size_t>> pool_by_class_;
};

// Convenience wrappers over DriftGenerator.
ClientDataset GenerateRound(const DriftSchedule& schedule, std::size_t round,
                            int client_id);
std::vector<ClientDataset> GenerateTestClients(const DriftSchedule& schedule,
                                               std::size_t count,
                                               double unseen_fraction);

// Shuffles and splits into (train, eval) with floor(size * eval_fraction)
// eval rows, keeping at least one training row.
std::pair<ClientDataset, ClientDataset> SplitDataset(const ClientDataset& data,
                                                     double eval_fraction, Rng& rng);

// Reads an IDX image/label pair (magic 0x00000803 / 0x00000801). Pixels are
// scaled to [0, 1]. `limit` == 0 reads every item.
IdxPool LoadIdx(const std::filesystem::path& images_path,
                const std::filesystem::path& labels_path, std::size_t limit);

}  // namespace feroma

#endif  // FEROMA_DATAGEN_HPP_

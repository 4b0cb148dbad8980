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

#include "feroma/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <set>
#include <string>

#include "feroma/error.hpp"

namespace feroma {
namespace {

constexpr std::uint64_t kTestClientOffset = 1'000'000;

std::pair<double, double> CosSin(double degrees) {
  double r = std::fmod(degrees, 360.0);
  if (r < 0.0) r += 360.0;
  if (r == 0.0) return {1.0, 0.0};
  if (r == 90.0) return {0.0, 1.0};
  if (r == 180.0) return {-1.0, 0.0};
  if (r == 270.0) return {0.0, -1.0};
  const double rad = r * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

bool IsImageShaped(const DriftSchedule& schedule, std::size_t dim) {
  return schedule.pool && schedule.pool->image_rows > 0 &&
         schedule.pool->image_rows * schedule.pool->image_cols == dim;
}

void RotatePairs(std::span<double> row, double degrees) {
  const auto [c, s] = CosSin(degrees);
  for (std::size_t j = 0; j + 1 < row.size(); j += 2) {
    const double x = row[j];
    const double y = row[j + 1];
    row[j] = c * x - s * y;
    row[j + 1] = s * x + c * y;
  }
}

// Nearest-neighbour rotation about the grid centre; exact for multiples of 90
// degrees on square grids.
void RotateImage(std::span<double> row, double degrees, std::size_t rows,
                 std::size_t cols) {
  const auto [c, s] = CosSin(degrees);
  const std::vector<double> src(row.begin(), row.end());
  const double cy = (static_cast<double>(rows) - 1.0) / 2.0;
  const double cx = (static_cast<double>(cols) - 1.0) / 2.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t q = 0; q < cols; ++q) {
      const double dy = static_cast<double>(r) - cy;
      const double dx = static_cast<double>(q) - cx;
      const double sx = c * dx + s * dy + cx;
      const double sy = -s * dx + c * dy + cy;
      const long ix = std::lround(sx);
      const long iy = std::lround(sy);
      double value = 0.0;
      if (ix >= 0 && iy >= 0 && static_cast<std::size_t>(ix) < cols &&
          static_cast<std::size_t>(iy) < rows) {
        value = src[static_cast<std::size_t>(iy) * cols + static_cast<std::size_t>(ix)];
      }
      row[r * cols + q] = value;
    }
  }
}

std::vector<int> ShuffledClasses(std::size_t num_classes, Rng& rng) {
  std::vector<int> classes(num_classes);
  std::iota(classes.begin(), classes.end(), 0);
  std::shuffle(classes.begin(), classes.end(), rng);
  return classes;
}

std::size_t LabelSkewSubsetSize(std::size_t num_classes) {
  const std::size_t size = std::max<std::size_t>(2, num_classes / 5);
  return std::min(size, num_classes - 1);
}

std::vector<int> RandomSubset(std::size_t num_classes, std::size_t size, Rng& rng) {
  std::vector<int> subset = ShuffledClasses(num_classes, rng);
  subset.resize(size);
  std::sort(subset.begin(), subset.end());
  return subset;
}

std::vector<int> RandomPoolPermutation(std::size_t num_classes,
                                       std::span<const int> pool, Rng& rng) {
  std::vector<int> map(num_classes);
  std::iota(map.begin(), map.end(), 0);
  std::vector<int> targets(pool.begin(), pool.end());
  std::shuffle(targets.begin(), targets.end(), rng);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    map[static_cast<std::size_t>(pool[i])] = targets[i];
  }
  return map;
}

const std::vector<double>& LevelRotations(NonIidLevel level) {
  static const std::vector<double> kFour{0.0, 90.0, 180.0, 270.0};
  static const std::vector<double> kTwo{0.0, 180.0};
  return level == NonIidLevel::kMedium ? kTwo : kFour;
}

std::vector<int> LevelColors(NonIidLevel level) {
  if (level == NonIidLevel::kLow) return {kOriginalColor};
  return {0, 1, 2};
}

std::size_t LevelBankCount(NonIidLevel level) {
  switch (level) {
    case NonIidLevel::kLow:
      return 4;
    case NonIidLevel::kMedium:
      return 6;
    case NonIidLevel::kHigh:
      return 8;
  }
  return 4;
}

// Fills `bank` with up to `count` distinct recipes from `draw`.
template <typename Draw>
void FillDistinct(std::vector<Recipe>& bank, std::size_t count, Draw&& draw) {
  constexpr int kMaxAttempts = 4096;
  for (int attempt = 0; attempt < kMaxAttempts && bank.size() < count; ++attempt) {
    Recipe candidate = draw();
    if (std::find(bank.begin(), bank.end(), candidate) == bank.end()) {
      bank.push_back(std::move(candidate));
    }
  }
  // Fewer distinct recipes exist than requested; pad with repeats.
  while (bank.size() < count) bank.push_back(draw());
}

}  // namespace

std::string_view NonIidTypeName(NonIidType type) {
  switch (type) {
    case NonIidType::kPX:
      return "PX";
    case NonIidType::kPY:
      return "PY";
    case NonIidType::kPYgX:
      return "PYgX";
    case NonIidType::kPXgY:
      return "PXgY";
  }
  return "PX";
}

NonIidType ParseNonIidType(std::string_view name) {
  if (name == "PX") return NonIidType::kPX;
  if (name == "PY") return NonIidType::kPY;
  if (name == "PYgX") return NonIidType::kPYgX;
  if (name == "PXgY") return NonIidType::kPXgY;
  throw ConfigError("unknown non-IID type '" + std::string(name) + "'");
}

std::string_view NonIidLevelName(NonIidLevel level) {
  switch (level) {
    case NonIidLevel::kLow:
      return "low";
    case NonIidLevel::kMedium:
      return "medium";
    case NonIidLevel::kHigh:
      return "high";
  }
  return "low";
}

NonIidLevel ParseNonIidLevel(std::string_view name) {
  if (name == "low") return NonIidLevel::kLow;
  if (name == "medium") return NonIidLevel::kMedium;
  if (name == "high") return NonIidLevel::kHigh;
  throw ConfigError("unknown non-IID level '" + std::string(name) + "'");
}

std::string_view AssignmentName(RecipeAssignment assignment) {
  return assignment == RecipeAssignment::kRoundRobin ? "round_robin" : "random";
}

RecipeAssignment ParseAssignment(std::string_view name) {
  if (name == "random") return RecipeAssignment::kRandom;
  if (name == "round_robin") return RecipeAssignment::kRoundRobin;
  throw ConfigError("unknown recipe assignment '" + std::string(name) + "'");
}

void DriftSchedule::Validate() const {
  if (total_rounds == 0) throw ConfigError("total_rounds must be positive");
  if (drift_every == 0) throw ConfigError("drift_every must be positive");
  if (clients == 0) throw ConfigError("clients must be positive");
  if (samples_per_client < 2) throw ConfigError("samples_per_client must be >= 2");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (pool) {
    if (pool->features.rows() == 0) throw ConfigError("IDX pool is empty");
    if (pool->features.cols() != feature_dim) {
      throw ConfigError("feature_dim does not match the IDX pool width");
    }
  } else if (feature_dim < num_classes) {
    throw ConfigError("synthetic data needs feature_dim >= num_classes");
  }
  if (type == NonIidType::kPY && samples_per_client < num_classes) {
    throw ConfigError("bank cannot be populated");
  }
  for (int c : colors) {
    if (c < kOriginalColor || c >= kColorCount) throw ConfigError("color index out of range");
  }
}

std::size_t DefaultBankSize(NonIidType type, NonIidLevel level) {
  if (type == NonIidType::kPX) {
    return LevelRotations(level).size() * LevelColors(level).size();
  }
  return LevelBankCount(level);
}

std::size_t PermutationPoolSize(NonIidLevel level, std::size_t num_classes) {
  const std::size_t size = level == NonIidLevel::kLow      ? 3
                           : level == NonIidLevel::kMedium ? 4
                                                           : 5;
  return std::min(size, num_classes);
}

RecipeBank BuildRecipeBank(const DriftSchedule& schedule) {
  schedule.Validate();
  RecipeBank bank;
  bank.type = schedule.type;
  bank.level = schedule.level;
  Rng rng = Rng::Derive(schedule.seed, 0, 0, Stream::kRecipeBank);
  const std::size_t classes = schedule.num_classes;

  switch (schedule.type) {
    case NonIidType::kPX: {
      const std::vector<double> rotations =
          schedule.rotations.empty() ? LevelRotations(schedule.level) : schedule.rotations;
      const std::vector<int> colors =
          schedule.colors.empty() ? LevelColors(schedule.level) : schedule.colors;
      for (double angle : rotations) {
        for (int color : colors) {
          Recipe recipe;
          recipe.transform = {angle, color};
          bank.recipes.push_back(std::move(recipe));
        }
      }
      break;
    }
    case NonIidType::kPY: {
      const std::size_t subset = LabelSkewSubsetSize(classes);
      FillDistinct(bank.recipes, LevelBankCount(schedule.level), [&] {
        Recipe recipe;
        recipe.classes = RandomSubset(classes, subset, rng);
        return recipe;
      });
      break;
    }
    case NonIidType::kPYgX: {
      std::vector<int> pool = ShuffledClasses(classes, rng);
      pool.resize(PermutationPoolSize(schedule.level, classes));
      std::sort(pool.begin(), pool.end());
      bank.pool = pool;
      Recipe identity;
      identity.label_map.resize(classes);
      std::iota(identity.label_map.begin(), identity.label_map.end(), 0);
      bank.recipes.push_back(identity);
      FillDistinct(bank.recipes, LevelBankCount(schedule.level), [&] {
        Recipe recipe;
        recipe.label_map = RandomPoolPermutation(classes, pool, rng);
        return recipe;
      });
      break;
    }
    case NonIidType::kPXgY: {
      std::vector<int> affected = ShuffledClasses(classes, rng);
      affected.resize(std::max<std::size_t>(
          1, static_cast<std::size_t>(std::lround(0.8 * static_cast<double>(classes)))));
      const auto& rotations = LevelRotations(NonIidLevel::kHigh);
      FillDistinct(bank.recipes, LevelBankCount(schedule.level), [&] {
        Recipe recipe;
        recipe.class_transforms.assign(classes, FeatureTransform{});
        for (int u : affected) {
          recipe.class_transforms[static_cast<std::size_t>(u)] = {
              rotations[rng.Index(rotations.size())],
              static_cast<int>(rng.Index(kColorCount))};
        }
        return recipe;
      });
      break;
    }
  }

  if (schedule.recipes > 0) {
    if (schedule.recipes > bank.recipes.size()) {
      throw ConfigError("recipes exceeds the bank size for this level");
    }
    bank.recipes.resize(schedule.recipes);
  }
  return bank;
}

void ApplyFeatureTransform(std::span<double> row, const FeatureTransform& transform,
                           const DriftSchedule& schedule) {
  if (transform.angle_degrees != 0.0) {
    if (IsImageShaped(schedule, row.size())) {
      RotateImage(row, transform.angle_degrees, schedule.pool->image_rows,
                  schedule.pool->image_cols);
    } else {
      RotatePairs(row, transform.angle_degrees);
    }
  }
  if (transform.color != kOriginalColor) {
    const auto color = static_cast<std::size_t>(transform.color);
    std::size_t count = 0;
    for (std::size_t j = color; j < row.size(); j += kColorCount) ++count;
    if (count == 0) return;
    const double step = schedule.color_shift / std::sqrt(static_cast<double>(count));
    for (std::size_t j = color; j < row.size(); j += kColorCount) row[j] += step;
  }
}

std::vector<int> Relabel(std::span<const int> labels, std::span<const int> label_map) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i] = label_map[static_cast<std::size_t>(labels[i])];
  }
  return out;
}

DriftGenerator::DriftGenerator(DriftSchedule schedule)
    : schedule_(std::move(schedule)), bank_(BuildRecipeBank(schedule_)) {
  if (schedule_.pool) {
    pool_by_class_.resize(schedule_.num_classes);
    const auto& labels = schedule_.pool->labels;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto u = static_cast<std::size_t>(labels[i]);
      if (u >= schedule_.num_classes) throw ConfigError("IDX label exceeds num_classes");
      pool_by_class_[u].push_back(i);
    }
  }
}

std::size_t DriftGenerator::RecipeIndex(int client_id, std::size_t window) const {
  const std::size_t n = bank_.size();
  if (schedule_.assignment == RecipeAssignment::kRoundRobin) {
    return (static_cast<std::size_t>(client_id) + window) % n;
  }
  Rng rng = Rng::Derive(schedule_.seed, static_cast<std::uint64_t>(client_id), 0,
                        Stream::kRecipe);
  std::size_t current = rng.Index(n);
  for (std::size_t w = 1; w <= window && n > 1; ++w) {
    std::size_t next = rng.Index(n - 1);
    if (next >= current) ++next;
    current = next;
  }
  return current;
}

std::string DriftGenerator::Tag(std::size_t recipe_index) const {
  return std::string(NonIidTypeName(schedule_.type)) + "/" +
         std::string(NonIidLevelName(schedule_.level)) + "/r" +
         std::to_string(recipe_index);
}

std::string DriftGenerator::TagFor(int client_id, std::size_t round) const {
  return Tag(RecipeIndex(client_id, schedule_.WindowOf(round)));
}

ClientDataset DriftGenerator::Sample(const Recipe& recipe, std::size_t count, Rng& rng,
                                     std::string tag, int round, int client_id) const {
  const std::size_t classes = schedule_.num_classes;
  std::vector<int> allowed;
  if (schedule_.type == NonIidType::kPY) {
    allowed = recipe.classes;
  } else {
    allowed.resize(classes);
    std::iota(allowed.begin(), allowed.end(), 0);
  }
  if (schedule_.pool) {
    allowed.erase(std::remove_if(allowed.begin(), allowed.end(),
                                 [&](int u) {
                                   return pool_by_class_[static_cast<std::size_t>(u)].empty();
                                 }),
                  allowed.end());
    if (allowed.empty()) throw ConfigError("bank cannot be populated");
  }

  ClientDataset out;
  out.features = Matrix(count, schedule_.feature_dim);
  out.labels.resize(count);
  out.distribution_tag = std::move(tag);
  out.round = round;
  out.client_id = client_id;
  for (std::size_t i = 0; i < count; ++i) {
    const int u = allowed[rng.Index(allowed.size())];
    auto row = out.features.row(i);
    if (schedule_.pool) {
      const auto& members = pool_by_class_[static_cast<std::size_t>(u)];
      const auto src = schedule_.pool->features.row(members[rng.Index(members.size())]);
      std::copy(src.begin(), src.end(), row.begin());
    } else {
      for (double& v : row) v = rng.Normal();
      row[static_cast<std::size_t>(u)] += schedule_.separation;
    }
    int label = u;
    switch (schedule_.type) {
      case NonIidType::kPX:
        ApplyFeatureTransform(row, recipe.transform, schedule_);
        break;
      case NonIidType::kPXgY:
        ApplyFeatureTransform(row, recipe.class_transforms[static_cast<std::size_t>(u)],
                              schedule_);
        break;
      case NonIidType::kPYgX:
        label = recipe.label_map[static_cast<std::size_t>(u)];
        break;
      case NonIidType::kPY:
        break;
    }
    out.labels[i] = label;
  }
  return out;
}

ClientDataset DriftGenerator::GenerateRound(std::size_t round, int client_id) const {
  if (round >= schedule_.total_rounds) {
    throw ConfigError("round outside the drift schedule");
  }
  const std::size_t recipe = RecipeIndex(client_id, schedule_.WindowOf(round));
  Rng rng = Rng::Derive(schedule_.seed, static_cast<std::uint64_t>(client_id), round,
                        Stream::kData);
  return Sample(bank_.recipes[recipe], schedule_.samples_per_client, rng, Tag(recipe),
                static_cast<int>(round), client_id);
}

Recipe DriftGenerator::UnseenRecipe(Rng& rng) const {
  // Rotations off the 90-degree lattice never occur in a training bank.
  static const std::vector<double> kOffLattice{45.0, 135.0, 225.0, 315.0};
  const std::size_t classes = schedule_.num_classes;
  Recipe recipe;
  switch (schedule_.type) {
    case NonIidType::kPX:
      recipe.transform = {kOffLattice[rng.Index(kOffLattice.size())],
                          static_cast<int>(rng.Index(kColorCount + 1)) - 1};
      break;
    case NonIidType::kPY: {
      const std::size_t subset = LabelSkewSubsetSize(classes);
      for (int attempt = 0; attempt < 64; ++attempt) {
        recipe.classes = RandomSubset(classes, subset, rng);
        const bool known = std::any_of(bank_.recipes.begin(), bank_.recipes.end(),
                                       [&](const Recipe& r) { return r.classes == recipe.classes; });
        if (!known) break;
      }
      break;
    }
    case NonIidType::kPYgX:
      for (int attempt = 0; attempt < 64; ++attempt) {
        recipe.label_map = RandomPoolPermutation(classes, bank_.pool, rng);
        const bool known = std::any_of(bank_.recipes.begin(), bank_.recipes.end(),
                                       [&](const Recipe& r) { return r.label_map == recipe.label_map; });
        if (!known) break;
      }
      break;
    case NonIidType::kPXgY: {
      recipe.class_transforms.assign(classes, FeatureTransform{});
      for (std::size_t u = 0; u < classes; ++u) {
        recipe.class_transforms[u] = {kOffLattice[rng.Index(kOffLattice.size())],
                                      static_cast<int>(rng.Index(kColorCount))};
      }
      break;
    }
  }
  return recipe;
}

std::vector<ClientDataset> DriftGenerator::GenerateTestClients(
    std::size_t count, double unseen_fraction) const {
  if (count == 0) throw ConfigError("test client count must be positive");
  if (!(unseen_fraction >= 0.0 && unseen_fraction <= 1.0)) {
    throw ConfigError("unseen_fraction must lie in [0, 1]");
  }
  const auto unseen = static_cast<std::size_t>(
      std::floor(static_cast<double>(count) * unseen_fraction + 1e-9));

  std::set<std::size_t> final_recipes;
  const std::size_t last_window = schedule_.WindowOf(schedule_.total_rounds - 1);
  for (std::size_t k = 0; k < schedule_.clients; ++k) {
    final_recipes.insert(RecipeIndex(static_cast<int>(k), last_window));
  }
  const std::vector<std::size_t> seen(final_recipes.begin(), final_recipes.end());

  Rng order_rng = Rng::Derive(schedule_.seed, kTestClientOffset, schedule_.total_rounds,
                              Stream::kShuffle);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), order_rng);
  std::vector<bool> is_unseen(count, false);
  for (std::size_t i = 0; i < unseen; ++i) is_unseen[order[i]] = true;

  const int round = static_cast<int>(schedule_.total_rounds);
  std::vector<ClientDataset> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = Rng::Derive(schedule_.seed, kTestClientOffset + i, schedule_.total_rounds,
                          Stream::kTestData);
    if (is_unseen[i]) {
      const Recipe recipe = UnseenRecipe(rng);
      std::string tag = std::string(NonIidTypeName(schedule_.type)) + "/" +
                        std::string(NonIidLevelName(schedule_.level)) + "/u" +
                        std::to_string(i);
      out.push_back(Sample(recipe, schedule_.samples_per_client, rng, std::move(tag),
                           round, static_cast<int>(i)));
    } else {
      const std::size_t recipe = seen[rng.Index(seen.size())];
      out.push_back(Sample(bank_.recipes[recipe], schedule_.samples_per_client, rng,
                           Tag(recipe), round, static_cast<int>(i)));
    }
  }
  return out;
}

ClientDataset GenerateRound(const DriftSchedule& schedule, std::size_t round,
                            int client_id) {
  return DriftGenerator(schedule).GenerateRound(round, client_id);
}

std::vector<ClientDataset> GenerateTestClients(const DriftSchedule& schedule,
                                               std::size_t count,
                                               double unseen_fraction) {
  return DriftGenerator(schedule).GenerateTestClients(count, unseen_fraction);
}

std::pair<ClientDataset, ClientDataset> SplitDataset(const ClientDataset& data,
                                                     double eval_fraction, Rng& rng) {
  if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) {
    throw ConfigError("eval_fraction must lie in [0, 1)");
  }
  const std::size_t n = data.size();
  std::size_t eval = static_cast<std::size_t>(std::floor(static_cast<double>(n) * eval_fraction));
  if (n > 0 && eval >= n) eval = n - 1;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::span<const std::size_t> eval_idx(order.data(), eval);
  const std::span<const std::size_t> train_idx(order.data() + eval, n - eval);

  auto take = [&](std::span<const std::size_t> idx) {
    ClientDataset part;
    part.features = data.features.SelectRows(idx);
    part.labels.reserve(idx.size());
    for (std::size_t i : idx) part.labels.push_back(data.labels[i]);
    part.distribution_tag = data.distribution_tag;
    part.round = data.round;
    part.client_id = data.client_id;
    return part;
  };
  return {take(train_idx), take(eval_idx)};
}

namespace {

std::vector<unsigned char> ReadAll(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open IDX file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t BigEndian32(const std::vector<unsigned char>& bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw FormatError("truncated IDX header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

IdxPool LoadIdx(const std::filesystem::path& images_path,
                const std::filesystem::path& labels_path, std::size_t limit) {
  const auto images = ReadAll(images_path);
  const auto labels = ReadAll(labels_path);
  if (BigEndian32(images, 0) != 0x00000803u || BigEndian32(labels, 0) != 0x00000801u) {
    throw FormatError("not an IDX file");
  }
  const std::size_t count = BigEndian32(images, 4);
  const std::size_t rows = BigEndian32(images, 8);
  const std::size_t cols = BigEndian32(images, 12);
  const std::size_t label_count = BigEndian32(labels, 4);
  if (count != label_count) {
    throw FormatError("IDX image and label counts differ");
  }
  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + count * pixels || labels.size() < 8 + count) {
    throw FormatError("truncated IDX file");
  }
  const std::size_t take = limit == 0 ? count : std::min(limit, count);

  IdxPool pool;
  pool.image_rows = rows;
  pool.image_cols = cols;
  pool.features = Matrix(take, pixels);
  pool.labels.resize(take);
  for (std::size_t i = 0; i < take; ++i) {
    const unsigned char* src = images.data() + 16 + i * pixels;
    auto row = pool.features.row(i);
    for (std::size_t p = 0; p < pixels; ++p) row[p] = static_cast<double>(src[p]) / 255.0;
    pool.labels[i] = labels[8 + i];
  }
  return pool;
}

}  // namespace feroma

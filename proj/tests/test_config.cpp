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

#include <gtest/gtest.h>

#include <filesystem>

#include "feroma/config.hpp"
#include "feroma/error.hpp"

namespace feroma {
namespace {

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig def;
  const std::string text = SerializeConfig(def);
  EXPECT_EQ(SerializeConfig(ParseConfig(text)), text);
  EXPECT_EQ(def.federation.schedule.feature_dim, 784u);
  EXPECT_EQ(def.federation.schedule.num_classes, 10u);
  EXPECT_EQ(def.seeds, (std::vector<std::uint64_t>{42, 43, 44, 45, 46}));
  EXPECT_NO_THROW(def.Validate());
}

TEST(Config, CustomValuesRoundTrip) {
  ExperimentConfig cfg;
  auto& f = cfg.federation;
  f.rounds = 12;
  f.threshold = 0.125;
  f.aggregation = Aggregation::kFedAvg;
  f.train_distance = DistanceKind::kEuclidean;
  f.churn = {{5, 3, false}, {7, 30, true}};
  f.train.learning_rate = 0.0125;
  f.dpe.dp_enabled = false;
  f.schedule.type = NonIidType::kPYgX;
  f.schedule.level = NonIidLevel::kHigh;
  f.schedule.rotations = {0, 90, 270};
  f.schedule.colors = {0, 2};
  f.schedule.feature_dim = 16;
  cfg.seeds = {1, 9};
  cfg.output_dir = "runs/x";
  const std::string text = SerializeConfig(cfg);
  const ExperimentConfig back = ParseConfig(text);
  EXPECT_EQ(SerializeConfig(back), text);
  EXPECT_EQ(back.federation.threshold, 0.125);
  EXPECT_EQ(back.federation.churn, f.churn);
  EXPECT_EQ(back.federation.schedule.rotations, f.schedule.rotations);
  EXPECT_EQ(back.federation.schedule.colors, f.schedule.colors);
  EXPECT_EQ(back.federation.train.learning_rate, 0.0125);
  EXPECT_EQ(back.seeds, cfg.seeds);
}

TEST(Config, PartialFileKeepsDefaults) {
  const ExperimentConfig cfg = ParseConfig("[federation]\nrounds = 7\n");
  EXPECT_EQ(cfg.federation.rounds, 7u);
  EXPECT_EQ(cfg.federation.warmup_rounds, 5u);
  EXPECT_EQ(cfg.federation.dpe.epsilon, 10.0);
}

TEST(Config, RejectsUnknownAndMalformedInput) {
  EXPECT_THROW(ParseConfig("[federation]\nroundz = 7\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[nope]\nrounds = 7\n"), ConfigError);
  EXPECT_THROW(ParseConfig("rounds = 7\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[federation]\nrounds = seven\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[federation]\nthreshold = 1.5\n").Validate(), ConfigError);
  EXPECT_THROW(ParseConfig("[federation]\nchurn = vanish:1@2\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[data]\ncolors = purple\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[federation\n"), ConfigError);
}

TEST(Config, ChurnSyntax) {
  const ExperimentConfig cfg = ParseConfig("[federation]\nchurn = leave:5@10, join:20@12\n");
  const std::vector<ChurnEvent> expected = {{10, 5, false}, {12, 20, true}};
  EXPECT_EQ(cfg.federation.churn, expected);
}

TEST(Config, Overrides) {
  ExperimentConfig cfg;
  ApplyOverride(cfg, "federation.rounds=9");
  ApplyOverride(cfg, "run.seeds=3,4");
  ApplyOverride(cfg, "federation.aggregation=fedavg");
  ApplyOverride(cfg, "dpe.epsilon = 2.5");
  EXPECT_EQ(cfg.federation.rounds, 9u);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(cfg.federation.aggregation, Aggregation::kFedAvg);
  EXPECT_EQ(cfg.federation.dpe.epsilon, 2.5);
  EXPECT_THROW(ApplyOverride(cfg, "rounds=9"), ConfigError);
  EXPECT_THROW(ApplyOverride(cfg, "federation.rounds"), ConfigError);
  EXPECT_THROW(ApplyOverride(cfg, "federation.bogus=1"), ConfigError);
}

TEST(Config, LoadsShippedFiles) {
  EXPECT_THROW(LoadConfig("/nonexistent/feroma.ini"), ConfigError);
  const std::filesystem::path dir = FEROMA_CONFIG_DIR;
  const ExperimentConfig def = LoadConfig(dir / "default.ini");
  EXPECT_EQ(SerializeConfig(def), SerializeConfig(ExperimentConfig{}));
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".ini") continue;
    SCOPED_TRACE(entry.path().string());
    EXPECT_NO_THROW(LoadConfig(entry.path()).Validate());
  }
}

}  // namespace
}  // namespace feroma

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

#include "feroma/experiment.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "feroma/error.hpp"

namespace feroma {
namespace {

namespace fs = std::filesystem;

std::ofstream OpenOut(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.precision(17);
  return out;
}

std::pair<double, double> MeanStd(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

void WriteSeedOutputs(const fs::path& dir, const FederationConfig& fed,
                      const TrainingResult& training, const TestMetrics& test) {
  const RunMetrics& m = training.metrics;
  {
    auto out = OpenOut(dir / "metrics.csv");
    out << "round,client,tag,accuracy,loss,strategy,support\n";
    for (const auto& r : m.rows) {
      out << r.round << ',' << r.client << ',' << r.tag << ',' << r.accuracy << ',' << r.loss
          << ',' << (r.strategy ? StrategyName(*r.strategy) : "-") << ',' << r.support << '\n';
    }
  }
  {
    auto out = OpenOut(dir / "timing.csv");
    out << "round,seconds\n";
    for (std::size_t t = 0; t < m.round_seconds.size(); ++t) {
      out << t << ',' << m.round_seconds[t] << '\n';
    }
  }
  {
    auto out = OpenOut(dir / "test_metrics.csv");
    out << "index,tag,unseen,matched_id,matched_tag,accuracy,loss\n";
    for (const auto& r : test.rows) {
      out << r.index << ',' << r.tag << ',' << (r.unseen ? 1 : 0) << ',' << r.matched_id << ','
          << r.matched_tag << ',' << r.accuracy << ',' << r.loss << '\n';
    }
  }
  if (!m.profiles.empty()) {
    auto out = OpenOut(dir / "profiles.csv");
    WriteProfileHeader(out, fed.dpe.pca_dim, fed.schedule.num_classes);
    for (const auto& p : m.profiles) WriteProfileRow(out, p);
  }
  for (const auto& a : m.associations) {
    auto out = OpenOut(dir / "assoc" / ("round_" + std::to_string(a.round) + ".csv"));
    WriteAssociationCsv(out, a.rows, a.previous);
  }
  for (const auto& [id, model] : training.final.models) {
    auto out = OpenOut(dir / "models" / ("client_" + std::to_string(id) + ".bin"));
    const auto bytes = SerializeParams(model);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
}

}  // namespace

nlohmann::json ExperimentSummary::ToJson(const ExperimentConfig& cfg) const {
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& s : seeds) {
    per_seed.push_back({{"seed", s.seed},
                        {"final_mean_accuracy", s.final_mean_accuracy},
                        {"final_std_accuracy", s.final_std_accuracy},
                        {"test_mean_accuracy", s.test_mean_accuracy},
                        {"test_match_rate", s.match_rate},
                        {"profile_releases", s.profile_releases}});
  }
  const auto& fed = cfg.federation;
  return {{"schema_version", kSummarySchemaVersion},
          {"aggregation", AggregationName(fed.aggregation)},
          {"data", {{"type", NonIidTypeName(fed.schedule.type)},
                    {"level", NonIidLevelName(fed.schedule.level)},
                    {"drift_every", fed.schedule.drift_every}}},
          {"epsilon_per_profile",
           fed.dpe.dp_enabled ? nlohmann::json(fed.dpe.epsilon) : nlohmann::json("inf")},
          {"seeds", per_seed},
          {"final_accuracy", {{"mean", mean_accuracy}, {"std", std_accuracy}}},
          {"test_accuracy", {{"mean", mean_test_accuracy}, {"std", std_test_accuracy}}},
          {"cost",
           {{"param_count", cost.param_count},
            {"profile_dim", cost.profile_dim},
            {"model_bytes", cost.model_bytes},
            {"profile_bytes", cost.profile_bytes},
            {"overhead_percent", cost.overhead_percent},
            {"profile_ratio", cost.profile_ratio},
            {"compact", cost.compact}}}};
}

ExperimentSummary RunExperiment(const ExperimentConfig& input) {
  ExperimentConfig cfg = input;
  AttachIdxPool(cfg);
  cfg.Validate();
  const fs::path root = cfg.output_dir;
  fs::create_directories(root);
  {
    auto out = OpenOut(root / "config.ini");
    out << SerializeConfig(input);
  }

  ExperimentSummary summary;
  std::vector<double> acc, test_acc;
  for (std::uint64_t seed : cfg.seeds) {
    FederationConfig fed = cfg.federation;
    fed.schedule.seed = seed;
    fed.schedule.total_rounds = fed.rounds;
    const TrainingResult training = RunTraining(fed);
    const DriftGenerator gen(fed.schedule);
    const auto tests = gen.GenerateTestClients(fed.test_clients, fed.unseen_fraction);
    const TestMetrics test = RunInference(training, tests, fed);
    WriteSeedOutputs(root / ("seed_" + std::to_string(seed)), fed, training, test);

    summary.seeds.push_back({seed, training.metrics.final_mean_accuracy,
                             training.metrics.final_std_accuracy, test.mean_accuracy,
                             test.match_rate, training.metrics.profile_releases});
    summary.cost = training.metrics.cost;
    acc.push_back(training.metrics.final_mean_accuracy);
    test_acc.push_back(test.mean_accuracy);
  }
  std::tie(summary.mean_accuracy, summary.std_accuracy) = MeanStd(acc);
  std::tie(summary.mean_test_accuracy, summary.std_test_accuracy) = MeanStd(test_acc);
  {
    auto out = OpenOut(root / "summary.json");
    out << summary.ToJson(input).dump(2) << '\n';
  }
  return summary;
}

std::size_t WriteDatasets(const ExperimentConfig& input) {
  ExperimentConfig cfg = input;
  AttachIdxPool(cfg);
  cfg.Validate();
  DriftSchedule schedule = cfg.federation.schedule;
  schedule.seed = cfg.seeds.front();
  schedule.total_rounds = cfg.federation.rounds;
  const DriftGenerator gen(schedule);
  const fs::path root = fs::path(cfg.output_dir) / "data";
  std::size_t files = 0;
  auto manifest = OpenOut(root / "manifest.csv");
  manifest << "client,window,first_round,tag\n";
  for (std::size_t k = 0; k < schedule.clients; ++k) {
    const int client = static_cast<int>(k);
    for (std::size_t t = 0; t < schedule.total_rounds; ++t) {
      if (t % schedule.drift_every == 0) {
        manifest << client << ',' << schedule.WindowOf(t) << ',' << t << ','
                 << gen.TagFor(client, t) << '\n';
      }
      const ClientDataset data = gen.GenerateRound(t, client);
      auto out = OpenOut(root / ("round_" + std::to_string(t)) /
                         ("client_" + std::to_string(k) + ".csv"));
      out << "label";
      for (std::size_t j = 0; j < data.features.cols(); ++j) out << ",x" << j;
      out << '\n';
      for (std::size_t r = 0; r < data.size(); ++r) {
        out << data.labels[r];
        for (double x : data.features.row(r)) out << ',' << x;
        out << '\n';
      }
      ++files;
    }
  }
  return files;
}

}  // namespace feroma

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

#include "feroma/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "feroma/error.hpp"
#include "feroma/parallel.hpp"

namespace feroma {
namespace {

constexpr std::uint64_t kTestClientBase = 1'000'000;

struct ClientWork {
  int client = 0;
  ClientDataset train;
  ClientDataset eval;
  std::optional<DistributionProfile> profile;
  std::optional<AssociationWeights> assoc;
  ModelParams incoming;
  ModelParams trained;
  EvalResult result;
};

std::pair<double, double> MeanStd(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

std::vector<ModelParams> ModelsInOrder(const RoundRecord& r) {
  std::vector<ModelParams> out;
  for (int id : r.participants) out.push_back(r.models.at(id));
  return out;
}

std::vector<std::size_t> SizesInOrder(const RoundRecord& r) {
  std::vector<std::size_t> out;
  for (int id : r.participants) out.push_back(r.sizes.at(id));
  return out;
}

std::vector<DistributionProfile> ProfilesInOrder(const RoundRecord& r) {
  std::vector<DistributionProfile> out;
  for (int id : r.participants) out.push_back(r.profiles.at(id));
  return out;
}

DriftSchedule ScheduleFor(const FederationConfig& cfg) {
  DriftSchedule s = cfg.schedule;
  s.total_rounds = cfg.rounds;
  return s;
}

}  // namespace

std::string_view AggregationName(Aggregation a) {
  return a == Aggregation::kFeroma ? "feroma" : "fedavg";
}

Aggregation ParseAggregation(std::string_view name) {
  if (name == "feroma") return Aggregation::kFeroma;
  if (name == "fedavg") return Aggregation::kFedAvg;
  throw ConfigError("unknown aggregation '" + std::string(name) + "'");
}

Architecture FederationConfig::MakeArchitecture() const {
  return {arch, schedule.feature_dim, arch == ArchKind::kMlp ? hidden_width : 0,
          schedule.num_classes};
}

void FederationConfig::Validate() const {
  if (rounds == 0) throw ConfigError("rounds must be >= 1");
  if (warmup_rounds >= rounds) throw ConfigError("warmup_rounds must be < rounds");
  if (!(participation_rate > 0.0 && participation_rate <= 1.0)) {
    throw ConfigError("participation_rate must lie in (0, 1]");
  }
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw ConfigError("eval_fraction must lie in (0, 1)");
  }
  if (threshold && !(*threshold >= 0.0 && *threshold < 1.0)) {
    throw ConfigError("threshold must lie in [0, 1)");
  }
  if (!(unseen_fraction >= 0.0 && unseen_fraction <= 1.0)) {
    throw ConfigError("unseen_fraction must lie in [0, 1]");
  }
  if (labels_per_class == 0) throw ConfigError("labels_per_class must be >= 1");
  if (arch == ArchKind::kMlp && hidden_width == 0) throw ConfigError("hidden_width must be >= 1");
  ScheduleFor(*this).Validate();
  train.Validate();
  dpe.Validate();
  if (aggregation == Aggregation::kFeroma && dpe.pca_dim > MakeArchitecture().LatentDim()) {
    throw ConfigError("pca_dim exceeds the latent dimension");
  }
  for (const auto& e : churn) {
    if (e.client < 0) throw ConfigError("churn client ids must be non-negative");
  }
}

CostReport MakeCostReport(std::size_t param_count, std::size_t profile_dim,
                          bool profiles_enabled) {
  CostReport c;
  c.param_count = param_count;
  c.profile_dim = profiles_enabled ? profile_dim : 0;
  c.model_bytes = sizeof(float) * param_count;
  c.profile_bytes = sizeof(float) * c.profile_dim;
  c.overhead_percent =
      100.0 * static_cast<double>(c.profile_bytes) / static_cast<double>(c.model_bytes);
  c.profile_ratio = ProfileOverhead(param_count, c.profile_dim);
  c.compact = c.profile_ratio <= kCompactnessLimit;
  return c;
}

CostReport MakeCostReport(const RoundRecord& final, const FederationConfig& cfg) {
  const std::size_t params = final.models.empty() ? cfg.MakeArchitecture().ParamCount()
                                                  : final.models.begin()->second.theta.size();
  const std::size_t d = 2 * cfg.dpe.pca_dim * (1 + cfg.schedule.num_classes);
  return MakeCostReport(params, d, cfg.aggregation == Aggregation::kFeroma);
}

std::set<int> UpdateClientPool(const std::set<int>& pool, std::size_t round,
                               std::span<const ChurnEvent> churn) {
  std::set<int> out = pool;
  for (const auto& e : churn) {
    if (e.round != round) continue;
    if (e.join) {
      out.insert(e.client);
    } else {
      out.erase(e.client);
    }
  }
  if (out.empty()) throw ConfigError("client pool became empty at round " + std::to_string(round));
  return out;
}

std::vector<int> SelectParticipants(const std::set<int>& pool, double rate,
                                    std::uint64_t seed, std::size_t round) {
  std::vector<int> ids(pool.begin(), pool.end());
  const auto want = static_cast<std::size_t>(
      std::ceil(rate * static_cast<double>(ids.size()) - 1e-12));
  if (want >= ids.size()) return ids;
  Rng rng = Rng::Derive(seed, 0, round, Stream::kSelection);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(want);
  std::sort(ids.begin(), ids.end());
  return ids;
}

TrainingResult RunTraining(const FederationConfig& cfg) {
  cfg.Validate();
  const DriftSchedule schedule = ScheduleFor(cfg);
  const DriftGenerator gen(schedule);
  const Architecture arch = cfg.MakeArchitecture();
  const std::uint64_t seed = schedule.seed;
  const bool feroma = cfg.aggregation == Aggregation::kFeroma;

  Rng init_rng = Rng::Derive(seed, 0, 0, Stream::kInit);
  ModelParams global = InitModel(arch, init_rng);

  TrainingResult result;
  RunMetrics& metrics = result.metrics;
  std::set<int> pool;
  for (std::size_t k = 0; k < schedule.clients; ++k) pool.insert(static_cast<int>(k));
  RoundRecord prev;

  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    const auto started = std::chrono::steady_clock::now();
    const int round = static_cast<int>(t);
    pool = UpdateClientPool(pool, t, cfg.churn);
    const std::vector<int> parts = SelectParticipants(pool, cfg.participation_rate, seed, t);
    std::vector<ClientWork> work(parts.size());

    ParallelFor(work.size(), [&](std::size_t i) {
      ClientWork& w = work[i];
      w.client = parts[i];
      const ClientDataset data = gen.GenerateRound(t, w.client);
      Rng split_rng = Rng::Derive(seed, static_cast<std::uint64_t>(w.client), t, Stream::kSplit);
      std::tie(w.train, w.eval) = SplitDataset(data, cfg.eval_fraction, split_rng);
    });

    const bool profiling = feroma && t >= cfg.warmup_rounds;
    if (profiling && t == cfg.warmup_rounds) {
      std::vector<std::pair<std::vector<double>, std::vector<double>>> client_bounds;
      for (const auto& w : work) {
        client_bounds.push_back(ClientBounds(ExtractLatents(global, w.train.features)));
      }
      try {
        result.encoder.emplace(global, MergeBounds(client_bounds), cfg.dpe);
      } catch (const ConfigError& e) {
        throw Error(std::string("cannot build the profile encoder at round ") +
                    std::to_string(t) + ": " + e.what());
      }
    }
    if (profiling) {
      const ProfileEncoder& encoder = *result.encoder;
      ParallelFor(work.size(), [&](std::size_t i) {
        ClientWork& w = work[i];
        Rng rng = Rng::Derive(seed, static_cast<std::uint64_t>(w.client), t, Stream::kMask);
        w.profile = encoder.Extract(w.train.features, w.train.labels, rng);
        w.profile->round = round;
        w.profile->client_id = w.client;
      });
    }

    // Server-side mapping against the previous round.
    RoundAssociation round_assoc{round, prev.participants, {}};
    const bool can_map = profiling && !prev.participants.empty();
    std::vector<ModelParams> prev_models;
    std::vector<std::size_t> prev_sizes;
    std::vector<DistributionProfile> prev_profiles;
    if (can_map) {
      prev_models = ModelsInOrder(prev);
      prev_sizes = SizesInOrder(prev);
      if (!prev.profiles.empty()) prev_profiles = ProfilesInOrder(prev);
    }
    for (auto& w : work) {
      if (!can_map) {
        w.incoming = global;
        continue;
      }
      AssociationWeights assoc;
      if (prev_profiles.empty()) {
        assoc = UniformFallback(prev.participants);
      } else {
        const RawWeights raw = SoftmaxWeights(*w.profile, prev_profiles, cfg.train_distance,
                                              cfg.standardize_distances);
        if (cfg.threshold_enabled) {
          const double tau =
              cfg.threshold.value_or(1.0 / static_cast<double>(prev.participants.size()));
          assoc = ApplyThreshold(raw, tau);
        } else {
          assoc = WithoutThreshold(raw);
        }
      }
      assoc.client_id = w.client;
      assoc.round = round;
      w.incoming = Aggregate(CombineWithSize(assoc, prev_sizes), prev_models);
      w.assoc = assoc;
      round_assoc.rows.push_back(std::move(assoc));
    }

    ParallelFor(work.size(), [&](std::size_t i) {
      ClientWork& w = work[i];
      w.result = Evaluate(w.incoming, w.eval);
      Rng rng = Rng::Derive(seed, static_cast<std::uint64_t>(w.client), t, Stream::kShuffle);
      try {
        w.trained = LocalUpdate(w.incoming, w.train, cfg.train, rng);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " (round " + std::to_string(t) +
                              ", client " + std::to_string(w.client) + ")");
      }
    });

    RoundRecord rec;
    rec.round = round;
    rec.participants = parts;
    for (auto& w : work) {
      ClientRoundMetric m;
      m.round = round;
      m.client = w.client;
      m.tag = w.train.distribution_tag;
      m.accuracy = w.result.accuracy;
      m.loss = w.result.mean_loss;
      if (w.assoc) {
        m.strategy = w.assoc->strategy;
        m.support = w.assoc->Support();
      }
      metrics.rows.push_back(std::move(m));
      rec.sizes[w.client] = w.train.size();
      rec.tags[w.client] = w.train.distribution_tag;
      if (w.profile) {
        metrics.profiles.push_back(*w.profile);
        rec.profiles[w.client] = std::move(*w.profile);
      }
      rec.models[w.client] = std::move(w.trained);
    }
    metrics.profile_releases += rec.profiles.size();
    if (can_map) metrics.associations.push_back(std::move(round_assoc));
    global = FedAvg(ModelsInOrder(rec), SizesInOrder(rec));
    prev = std::move(rec);
    metrics.round_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  }

  std::vector<double> final_acc;
  for (const auto& m : metrics.rows) {
    if (m.round == prev.round) final_acc.push_back(m.accuracy);
  }
  std::tie(metrics.final_mean_accuracy, metrics.final_std_accuracy) = MeanStd(final_acc);
  metrics.cost = MakeCostReport(prev, cfg);
  result.final = std::move(prev);
  return result;
}

TestMetrics RunInference(const TrainingResult& training,
                         std::span<const ClientDataset> test_clients,
                         const FederationConfig& cfg) {
  const RoundRecord& final = training.final;
  if (final.participants.empty()) throw ConfigError("final round record is empty");
  const std::vector<ModelParams> models = ModelsInOrder(final);
  const bool nearest = cfg.aggregation == Aggregation::kFeroma && training.encoder &&
                       !final.profiles.empty();
  const bool use_labels = nearest && cfg.schedule.type == NonIidType::kPYgX;
  std::optional<ModelParams> global;
  if (!nearest) global = FedAvg(models, SizesInOrder(final));
  std::vector<DistributionProfile> profiles;
  if (nearest) profiles = ProfilesInOrder(final);

  TestMetrics out;
  out.rows.resize(test_clients.size());
  ParallelFor(test_clients.size(), [&](std::size_t i) {
    const ClientDataset& data = test_clients[i];
    TestMetric& m = out.rows[i];
    m.index = i;
    m.tag = data.distribution_tag;
    m.unseen = data.distribution_tag.find("/u") != std::string::npos;
    const ModelParams* chosen = global ? &*global : nullptr;
    std::vector<std::size_t> eval_rows;
    if (use_labels) {
      std::vector<std::size_t> budget(cfg.schedule.num_classes, 0);
      std::vector<std::size_t> assoc_rows;
      for (std::size_t r = 0; r < data.size(); ++r) {
        auto& used = budget[static_cast<std::size_t>(data.labels[r])];
        if (used < cfg.labels_per_class) {
          ++used;
          assoc_rows.push_back(r);
        } else {
          eval_rows.push_back(r);
        }
      }
      std::vector<int> assoc_labels;
      for (std::size_t r : assoc_rows) assoc_labels.push_back(data.labels[r]);
      const std::size_t j =
          AssociateWithLabels(data.features.SelectRows(assoc_rows), assoc_labels, models);
      chosen = &models[j];
      m.matched_id = final.participants[j];
    } else if (nearest) {
      Rng rng = Rng::Derive(cfg.schedule.seed, kTestClientBase + i, cfg.rounds,
                            Stream::kTestProfile);
      const DistributionProfile p = training.encoder->ExtractLabelFree(data.features, rng);
      const TestAssignment a = AssignTestModel(p.Marginal(), profiles, cfg.test_distance);
      chosen = &models[a.index];
      m.matched_id = a.matched_id;
    }
    if (m.matched_id >= 0) m.matched_tag = final.tags.at(m.matched_id);
    EvalResult r;
    if (eval_rows.empty()) {
      r = Evaluate(*chosen, data);
    } else {
      std::vector<int> labels;
      for (std::size_t row : eval_rows) labels.push_back(data.labels[row]);
      r = Evaluate(*chosen, data.features.SelectRows(eval_rows), labels);
    }
    m.accuracy = r.accuracy;
    m.loss = r.mean_loss;
  });

  std::vector<double> acc;
  std::size_t seen = 0, matched = 0;
  for (const auto& m : out.rows) {
    acc.push_back(m.accuracy);
    if (!m.unseen) {
      ++seen;
      if (m.matched_tag == m.tag) ++matched;
    }
  }
  out.mean_accuracy = MeanStd(acc).first;
  out.match_rate = seen ? static_cast<double>(matched) / static_cast<double>(seen) : 0.0;
  return out;
}

}  // namespace feroma

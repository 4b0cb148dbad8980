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

#include "feroma/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "feroma/error.hpp"

namespace feroma {
namespace {

Strategy StrategyForSupport(std::size_t support) {
  return support == 1 ? Strategy::kPersonalized : Strategy::kClustered;
}

void CheckRaw(const RawWeights& raw) {
  if (raw.weights.empty() || raw.ids.size() != raw.weights.size()) {
    throw ConfigError("raw weights are empty or misaligned");
  }
}

}  // namespace

std::string_view StrategyName(Strategy s) {
  switch (s) {
    case Strategy::kClustered:
      return "Clustered";
    case Strategy::kPersonalized:
      return "Personalized";
    case Strategy::kGlobalFallback:
      return "GlobalFallback";
  }
  return "unknown";
}

double ProfileDistance(const DistributionProfile& a, const DistributionProfile& b,
                       DistanceKind kind) {
  if (a.pca_dim() != b.pca_dim() || a.num_classes() != b.num_classes()) {
    throw ConfigError("profile dimension mismatch");
  }
  std::vector<double> va = a.Marginal();
  std::vector<double> vb = b.Marginal();
  std::size_t active = 1;
  for (std::size_t u = 0; u < a.num_classes(); ++u) {
    if (!(a.class_present[u] && b.class_present[u])) continue;
    const auto ba = a.ClassBlock(u);
    const auto bb = b.ClassBlock(u);
    va.insert(va.end(), ba.begin(), ba.end());
    vb.insert(vb.end(), bb.begin(), bb.end());
    ++active;
  }
  const double d = Distance(va, vb, kind);
  if (kind == DistanceKind::kCosine) return d;
  const auto total = static_cast<double>(1 + a.num_classes());
  return d * std::sqrt(total / static_cast<double>(active));
}

RawWeights SoftmaxFromDistances(std::span<const int> ids, std::span<const double> distances,
                                bool standardize) {
  if (distances.empty() || ids.size() != distances.size()) {
    throw ConfigError("softmax needs one distance per previous participant");
  }
  std::vector<double> d(distances.begin(), distances.end());
  for (double x : d) {
    if (!std::isfinite(x)) throw ConfigError("non-finite profile distance");
  }
  if (standardize && d.size() > 1) {
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    double ss = 0.0;
    for (double x : d) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(d.size()));
    for (double& x : d) x = sd > 0.0 ? (x - mean) / sd : 0.0;
  }
  const double lo = *std::min_element(d.begin(), d.end());
  RawWeights out{std::vector<int>(ids.begin(), ids.end()), std::vector<double>(d.size())};
  double norm = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    out.weights[j] = std::exp(-(d[j] - lo));
    norm += out.weights[j];
  }
  for (double& w : out.weights) w /= norm;
  return out;
}

RawWeights SoftmaxWeights(const DistributionProfile& current,
                          std::span<const DistributionProfile> previous, DistanceKind kind,
                          bool standardize) {
  if (previous.empty()) throw ConfigError("no previous-round profiles");
  std::vector<int> ids;
  std::vector<double> d;
  for (const auto& p : previous) {
    ids.push_back(p.client_id);
    d.push_back(ProfileDistance(current, p, kind));
  }
  return SoftmaxFromDistances(ids, d, standardize);
}

std::size_t AssociationWeights::Support() const {
  return static_cast<std::size_t>(
      std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; }));
}

AssociationWeights UniformFallback(std::span<const int> ids) {
  if (ids.empty()) throw ConfigError("no previous-round participants");
  AssociationWeights out;
  out.ids.assign(ids.begin(), ids.end());
  out.weights.assign(ids.size(), 1.0 / static_cast<double>(ids.size()));
  out.strategy = Strategy::kGlobalFallback;
  return out;
}

AssociationWeights ApplyThreshold(const RawWeights& raw, double tau) {
  CheckRaw(raw);
  if (!(tau >= 0.0 && tau < 1.0)) throw ConfigError("threshold must lie in [0, 1)");
  AssociationWeights out;
  out.ids = raw.ids;
  out.threshold_used = tau;
  out.weights.assign(raw.weights.size(), 0.0);
  double kept = 0.0;
  for (std::size_t j = 0; j < raw.weights.size(); ++j) {
    if (raw.weights[j] >= tau) {
      out.weights[j] = raw.weights[j];
      kept += raw.weights[j];
    }
  }
  if (kept <= 0.0) {
    AssociationWeights fb = UniformFallback(raw.ids);
    fb.threshold_used = tau;
    return fb;
  }
  for (double& w : out.weights) w /= kept;
  out.strategy = StrategyForSupport(out.Support());
  return out;
}

AssociationWeights WithoutThreshold(const RawWeights& raw) {
  CheckRaw(raw);
  AssociationWeights out;
  out.ids = raw.ids;
  out.weights = raw.weights;
  out.strategy = StrategyForSupport(out.Support());
  return out;
}

std::vector<double> CombineWithSize(const AssociationWeights& weights,
                                    std::span<const std::size_t> sizes) {
  if (sizes.size() != weights.weights.size()) {
    throw ConfigError("missing sample size for a weighted participant");
  }
  std::vector<double> out(sizes.size());
  double norm = 0.0;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    out[j] = weights.weights[j] * static_cast<double>(sizes[j]);
    norm += out[j];
  }
  if (!(norm > 0.0)) throw ConfigError("size-weighted association has zero mass");
  for (double& w : out) w /= norm;
  return out;
}

ModelParams Aggregate(std::span<const double> weights, std::span<const ModelParams> models) {
  if (models.empty() || weights.size() != models.size()) {
    throw ConfigError("aggregation needs one weight per model");
  }
  ModelParams out{models[0].arch, std::vector<double>(models[0].theta.size(), 0.0)};
  for (std::size_t j = 0; j < models.size(); ++j) {
    if (!(models[j].arch == out.arch) || models[j].theta.size() != out.theta.size()) {
      throw ConfigError("architecture mismatch in aggregation");
    }
    const double w = weights[j];
    if (w == 0.0) continue;
    const auto& theta = models[j].theta;
    for (std::size_t i = 0; i < theta.size(); ++i) out.theta[i] += w * theta[i];
  }
  return out;
}

ModelParams FedAvg(std::span<const ModelParams> models, std::span<const std::size_t> sizes) {
  if (models.empty()) throw ConfigError("fedavg needs at least one model");
  if (sizes.size() != models.size()) throw ConfigError("fedavg needs one size per model");
  double total = 0.0;
  for (std::size_t s : sizes) {
    if (s == 0) throw ConfigError("fedavg sizes must be positive");
    total += static_cast<double>(s);
  }
  std::vector<double> p(sizes.size());
  for (std::size_t j = 0; j < sizes.size(); ++j) p[j] = static_cast<double>(sizes[j]) / total;
  return Aggregate(p, models);
}

TestAssignment AssignTestModel(std::span<const double> test_marginal,
                               std::span<const DistributionProfile> final_profiles,
                               DistanceKind kind) {
  if (final_profiles.empty()) throw ConfigError("no final-round profiles");
  std::optional<TestAssignment> best;
  for (std::size_t j = 0; j < final_profiles.size(); ++j) {
    const auto stored = final_profiles[j].Marginal();
    if (stored.size() != test_marginal.size()) throw ConfigError("profile dimension mismatch");
    const double d = Distance(test_marginal, stored, kind);
    const int id = final_profiles[j].client_id;
    if (!best || d < best->distance || (d == best->distance && id < best->matched_id)) {
      best = TestAssignment{j, id, d};
    }
  }
  return *best;
}

std::size_t AssociateWithLabels(const Matrix& features, std::span<const int> labels,
                                std::span<const ModelParams> models) {
  if (models.empty()) throw ConfigError("no candidate models");
  if (features.rows() == 0) throw ConfigError("labelled association set is empty");
  std::size_t best = 0;
  double best_acc = -1.0;
  for (std::size_t j = 0; j < models.size(); ++j) {
    const double acc = Evaluate(models[j], features, labels).accuracy;
    if (acc > best_acc) {
      best_acc = acc;
      best = j;
    }
  }
  return best;
}

void WriteAssociationCsv(std::ostream& out, std::span<const AssociationWeights> rows,
                         std::span<const int> prev_ids) {
  const auto old = out.precision(17);
  out << "client,strategy";
  for (int id : prev_ids) out << ",p" << id;
  out << '\n';
  for (const auto& row : rows) {
    out << row.client_id << ',' << StrategyName(row.strategy);
    for (int id : prev_ids) {
      double w = 0.0;
      for (std::size_t j = 0; j < row.ids.size(); ++j) {
        if (row.ids[j] == id) w = row.weights[j];
      }
      out << ',' << w;
    }
    out << '\n';
  }
  out.precision(old);
}

}  // namespace feroma

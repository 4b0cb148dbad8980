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

#include "feroma/validation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "feroma/error.hpp"
#include "feroma/mapping.hpp"

namespace feroma {
namespace {

GapStats Summarize(const std::vector<double>& gaps) {
  GapStats s;
  if (gaps.empty()) return s;
  s.max = *std::max_element(gaps.begin(), gaps.end());
  s.min = *std::min_element(gaps.begin(), gaps.end());
  s.mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
  double ss = 0.0;
  for (double g : gaps) ss += (g - s.mean) * (g - s.mean);
  s.std = gaps.size() > 1 ? std::sqrt(ss / static_cast<double>(gaps.size() - 1)) : 0.0;
  return s;
}

DistributionProfile RandomProfile(Rng& rng, std::size_t l, std::size_t classes, int id) {
  DistributionProfile p;
  p.client_id = id;
  p.sample_count = 100;
  auto vec = [&](double lo, double hi) {
    std::vector<double> v(l);
    for (double& x : v) x = rng.Uniform(lo, hi);
    return v;
  };
  p.marginal_mean = vec(-2.0, 2.0);
  p.marginal_var = vec(0.1, 3.0);
  for (std::size_t u = 0; u < classes; ++u) {
    const bool present = rng.Bernoulli(0.7);
    p.class_present.push_back(present);
    p.class_count.push_back(present ? 50 : 0);
    p.class_mean.push_back(present ? vec(-2.0, 2.0) : std::vector<double>(l, 0.0));
    p.class_var.push_back(present ? vec(0.1, 3.0) : std::vector<double>(l, 0.0));
  }
  return p;
}

ModelParams RandomModel(Rng& rng, const Architecture& arch) {
  ModelParams m{arch, std::vector<double>(arch.ParamCount())};
  for (double& x : m.theta) x = rng.Uniform(-1.0, 1.0);
  return m;
}

double WeightSum(const std::vector<double>& w) { return std::accumulate(w.begin(), w.end(), 0.0); }

// Runs `check` on `instances` derived seeds; stops at the first failure.
template <typename Check>
PropertyResult RunProperty(const std::string& name, std::uint64_t seed, std::size_t instances,
                           Check check) {
  PropertyResult r{name, true, std::nullopt, {}};
  for (std::size_t i = 0; i < instances; ++i) {
    const std::uint64_t s = Rng::Mix(seed + 0x9e3779b97f4a7c15ULL * (i + 1));
    Rng rng = Rng::Derive(s, 0, 0, Stream::kValidation);
    std::string detail;
    if (!check(rng, detail)) {
      r.passed = false;
      r.failing_seed = s;
      r.detail = detail;
      break;
    }
  }
  return r;
}

}  // namespace

FidelityReport FidelitySweep(std::size_t num_pairs, std::size_t dim, double lambda_min,
                             double lambda_max, std::uint64_t seed) {
  if (!(lambda_min > 0.0 && lambda_min <= lambda_max)) {
    throw ConfigError("fidelity sweep needs 0 < lambda_min <= lambda_max");
  }
  if (dim == 0) throw ConfigError("fidelity sweep dimension must be >= 1");
  FidelityReport r;
  r.reference = "w2";
  r.c_lower = std::min(1.0, 1.0 / (2.0 * std::sqrt(lambda_max)));
  r.c_upper = std::max(1.0, 1.0 / (2.0 * std::sqrt(lambda_min)));
  Rng rng = Rng::Derive(seed, 0, 0, Stream::kValidation);
  std::vector<double> gaps;
  gaps.reserve(num_pairs);
  auto draw = [&] {
    DiagonalGaussian g{std::vector<double>(dim), std::vector<double>(dim)};
    for (auto& m : g.mean) m = rng.Uniform(-1.0, 1.0);
    for (auto& v : g.variance) v = rng.Uniform(lambda_min, lambda_max);
    return g;
  };
  constexpr double kRel = 1e-12;
  for (std::size_t i = 0; i < num_pairs; ++i) {
    const DiagonalGaussian p = draw();
    const DiagonalGaussian q = draw();
    const double w2 = std::sqrt(GaussianW2Squared(p, q));
    const double delta = std::sqrt(ProfileDeltaSquared(p, q));
    const double slack = kRel * std::max(w2, delta) + 1e-300;
    if (r.c_lower * delta > w2 + slack || w2 > r.c_upper * delta + slack) ++r.bound_violations;
    gaps.push_back(std::abs(delta - w2));
  }
  r.pairs_tested = num_pairs;
  r.gap = Summarize(gaps);
  return r;
}

FidelityReport JsSweep(std::size_t num_pairs, std::size_t bins, std::uint64_t seed) {
  if (bins < 2) throw ConfigError("JS sweep needs at least 2 bins");
  FidelityReport r;
  r.reference = "js";
  Rng rng = Rng::Derive(seed, 1, 0, Stream::kValidation);
  auto draw = [&] {
    std::vector<double> h(bins);
    for (double& x : h) x = -std::log1p(-rng.Uniform());
    const double s = std::accumulate(h.begin(), h.end(), 0.0);
    for (double& x : h) x /= s;
    return h;
  };
  auto moments = [&](const std::vector<double>& h) {
    double mean = 0.0, second = 0.0;
    for (std::size_t i = 0; i < bins; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(bins - 1);
      mean += h[i] * x;
      second += h[i] * x * x;
    }
    return std::pair{mean, second - mean * mean};
  };
  std::vector<double> gaps;
  for (std::size_t i = 0; i < num_pairs; ++i) {
    const auto p = draw();
    const auto q = draw();
    const auto [mp, vp] = moments(p);
    const auto [mq, vq] = moments(q);
    const double delta = std::hypot(mp - mq, vp - vq);
    gaps.push_back(std::abs(delta - JsDistanceDiscrete(p, q)));
  }
  r.pairs_tested = num_pairs;
  r.gap = Summarize(gaps);
  return r;
}

StochasticityReport StochasticityCheck(const ProfileEncoder& encoder, const Matrix& features,
                                       std::size_t trials, std::uint64_t seed) {
  if (trials < 2) throw ConfigError("stochasticity check needs at least 2 trials");
  const std::size_t p = 2 * encoder.config().pca_dim;
  const std::size_t v = features.rows();
  std::vector<std::vector<double>> samples(p, std::vector<double>(trials));
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = Rng::Derive(seed, t, 0, Stream::kValidation);
    const auto marginal = encoder.ExtractLabelFree(features, rng).Marginal();
    for (std::size_t i = 0; i < p; ++i) samples[i][t] = marginal[i];
  }
  StochasticityReport r;
  r.trials = trials;
  r.sample_count = v;
  r.bound = encoder.MarginalBound(v);
  const auto n = static_cast<double>(trials);
  for (std::size_t i = 0; i < p; ++i) {
    const auto& x = samples[i];
    double shift = 0.0;
    for (double xi : x) shift += xi - x[0];
    const double mean = x[0] + shift / n;
    double m2 = 0.0, m4 = 0.0;
    for (double xi : x) {
      const double d = (xi - mean) * (xi - mean);
      m2 += d;
      m4 += d * d;
    }
    const double var = m2 / (n - 1.0);
    m4 /= n;
    const double pop = m2 / n;
    r.empirical.push_back(var);
    r.standard_error.push_back(std::sqrt(std::max(0.0, m4 - pop * pop) / n));
  }
  const auto b = NoiseScales(encoder.ranges(), v, encoder.config());
  const double b_max = encoder.config().dp_enabled ? *std::max_element(b.begin(), b.end()) : 0.0;
  r.rho2 = StochasticityBound(1.0, encoder.config().masks, encoder.config().mask_prob, v, b_max);
  r.max_empirical = *std::max_element(r.empirical.begin(), r.empirical.end());
  r.passed = true;
  for (std::size_t i = 0; i < p; ++i) {
    if (r.empirical[i] > r.bound[i] + 3.0 * r.standard_error[i]) r.passed = false;
  }
  return r;
}

StochasticityFixture MakeStochasticityFixture(std::size_t v, const DpeConfig& cfg,
                                              std::uint64_t seed) {
  constexpr std::size_t kDim = 10;
  constexpr std::size_t kClasses = 4;
  GlobalBounds bounds;
  for (std::size_t i = 0; i < kDim; ++i) {
    const double half = std::pow(0.85, static_cast<double>(i));
    bounds.lower.push_back(-half);
    bounds.upper.push_back(half);
  }
  // Rescale so the widest projected coordinate spans exactly 2.
  const StatisticRanges raw = RangesInPcaSpace(BuildReferenceProjector(bounds, cfg), bounds);
  const double scale = 2.0 / *std::max_element(raw.mean.begin(), raw.mean.end());
  for (std::size_t i = 0; i < kDim; ++i) {
    bounds.lower[i] *= scale;
    bounds.upper[i] *= scale;
  }
  Rng rng = Rng::Derive(seed, 0, 0, Stream::kTestData);
  Matrix features(v, kDim);
  for (std::size_t r = 0; r < v; ++r) {
    for (std::size_t j = 0; j < kDim; ++j) {
      features(r, j) = rng.Uniform(bounds.lower[j], bounds.upper[j]);
    }
  }
  Rng init = Rng::Derive(seed, 0, 0, Stream::kInit);
  ModelParams model = InitModel(Architecture::SoftmaxRegression(kDim, kClasses), init);
  return {ProfileEncoder(std::move(model), std::move(bounds), cfg), std::move(features)};
}

bool SanityReport::passed() const {
  return std::all_of(properties.begin(), properties.end(),
                     [](const PropertyResult& p) { return p.passed; });
}

SanityReport SanitySuite(std::uint64_t seed, std::size_t instances, Fault fault) {
  SanityReport report;
  constexpr std::size_t kDim = 3;
  constexpr std::size_t kClasses = 3;
  auto previous_set = [&](Rng& rng) {
    const std::size_t n = 2 + rng.Index(8);
    std::vector<DistributionProfile> prev;
    for (std::size_t j = 0; j < n; ++j) {
      prev.push_back(RandomProfile(rng, kDim, kClasses, static_cast<int>(j)));
    }
    return prev;
  };

  report.properties.push_back(RunProperty("normalization", seed, instances,
                                          [&](Rng& rng, std::string& detail) {
    const auto prev = previous_set(rng);
    const auto cur = RandomProfile(rng, kDim, kClasses, 99);
    const auto kind = rng.Bernoulli(0.5) ? DistanceKind::kCosine : DistanceKind::kEuclidean;
    const RawWeights raw = SoftmaxWeights(cur, prev, kind);
    const double tau = rng.Uniform(0.0, 0.99);
    AssociationWeights w = ApplyThreshold(raw, tau);
    if (fault == Fault::kScaleWeights) {
      for (double& x : w.weights) x *= 2.0;
    }
    for (const auto& ws : {raw.weights, w.weights}) {
      const double s = WeightSum(ws);
      if (std::abs(s - 1.0) > 1e-9) {
        detail = "weights sum to " + std::to_string(s);
        return false;
      }
    }
    return true;
  }));

  report.properties.push_back(RunProperty("scale_consistency", seed, instances,
                                          [&](Rng& rng, std::string& detail) {
    const std::size_t n = 2 + rng.Index(10);
    std::vector<int> ids(n);
    std::vector<double> d(n), shifted(n);
    const double c = rng.Uniform(-5.0, 5.0);
    for (std::size_t j = 0; j < n; ++j) {
      ids[j] = static_cast<int>(j);
      d[j] = rng.Uniform(0.0, 3.0);
      shifted[j] = d[j] + c;
    }
    const auto a = SoftmaxFromDistances(ids, d);
    const auto b = SoftmaxFromDistances(ids, shifted);
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(a.weights[j] - b.weights[j]) > 1e-12) {
        detail = "shifted distances changed a weight";
        return false;
      }
    }
    return true;
  }));

  report.properties.push_back(RunProperty("fedavg_recovery", seed, instances,
                                          [&](Rng& rng, std::string& detail) {
    const auto arch = Architecture::Mlp(1 + rng.Index(5), 1 + rng.Index(4), 2 + rng.Index(3));
    const std::size_t n = 1 + rng.Index(6);
    std::vector<ModelParams> models;
    std::vector<int> ids;
    for (std::size_t j = 0; j < n; ++j) {
      models.push_back(RandomModel(rng, arch));
      ids.push_back(static_cast<int>(j));
    }
    const std::vector<std::size_t> sizes(n, 1 + rng.Index(500));
    const auto uniform = UniformFallback(ids);
    const auto ours = Aggregate(CombineWithSize(uniform, sizes), models);
    const auto ref = FedAvg(models, sizes);
    for (std::size_t i = 0; i < ours.theta.size(); ++i) {
      if (std::abs(ours.theta[i] - ref.theta[i]) > 1e-12) {
        detail = "uniform aggregation departs from fedavg";
        return false;
      }
    }
    return true;
  }));

  report.properties.push_back(RunProperty("strategy_partition", seed, instances,
                                          [&](Rng& rng, std::string& detail) {
    const auto prev = previous_set(rng);
    const auto cur = RandomProfile(rng, kDim, kClasses, 99);
    const RawWeights raw = SoftmaxWeights(cur, prev, DistanceKind::kEuclidean);
    const double tau = rng.Bernoulli(0.3) ? rng.Uniform(0.5, 0.99) : rng.Uniform(0.0, 0.5);
    const AssociationWeights w = ApplyThreshold(raw, tau);
    const bool any_survive =
        std::any_of(raw.weights.begin(), raw.weights.end(), [&](double x) { return x >= tau; });
    const std::size_t support = w.Support();
    Strategy expected = support == 1 ? Strategy::kPersonalized : Strategy::kClustered;
    if (!any_survive) expected = Strategy::kGlobalFallback;
    if (w.strategy != expected) {
      detail = "strategy " + std::string(StrategyName(w.strategy)) + " with support " +
               std::to_string(support);
      return false;
    }
    return true;
  }));

  report.properties.push_back(RunProperty("nearest_neighbor", seed, instances,
                                          [&](Rng& rng, std::string& detail) {
    auto prev = previous_set(rng);
    if (rng.Bernoulli(0.3)) prev.push_back(prev.front());  // exact tie
    for (std::size_t j = 0; j < prev.size(); ++j) prev[j].client_id = static_cast<int>(j);
    std::reverse(prev.begin(), prev.end());
    const auto query = RandomProfile(rng, kDim, kClasses, 99).Marginal();
    const auto kind = rng.Bernoulli(0.5) ? DistanceKind::kCosine : DistanceKind::kEuclidean;
    const TestAssignment got = AssignTestModel(query, prev, kind);
    int best_id = -1;
    double best = INFINITY;
    for (const auto& p : prev) {
      const double d = Distance(query, p.Marginal(), kind);
      if (d < best || (d == best && p.client_id < best_id)) {
        best = d;
        best_id = p.client_id;
      }
    }
    if (got.matched_id != best_id) {
      detail = "matched " + std::to_string(got.matched_id) + ", brute force " +
               std::to_string(best_id);
      return false;
    }
    return true;
  }));

  report.properties.push_back(RunProperty("threshold_monotone", seed, instances,
                                          [&](Rng& rng, std::string& detail) {
    const auto prev = previous_set(rng);
    const auto cur = RandomProfile(rng, kDim, kClasses, 99);
    const RawWeights raw = SoftmaxWeights(cur, prev, DistanceKind::kEuclidean);
    double lo = rng.Uniform(0.0, 0.99), hi = rng.Uniform(0.0, 0.99);
    if (lo > hi) std::swap(lo, hi);
    const auto a = ApplyThreshold(raw, lo);
    const auto b = ApplyThreshold(raw, hi);
    // Fallback spreads mass uniformly, so only compare surviving supports.
    const std::size_t sa = a.strategy == Strategy::kGlobalFallback ? 0 : a.Support();
    const std::size_t sb = b.strategy == Strategy::kGlobalFallback ? 0 : b.Support();
    if (sb > sa) {
      detail = "support grew from " + std::to_string(sa) + " to " + std::to_string(sb);
      return false;
    }
    return true;
  }));

  return report;
}

nlohmann::json ToJson(const FidelityReport& r) {
  return {{"reference", r.reference},
          {"pairs_tested", r.pairs_tested},
          {"bound_violations", r.bound_violations},
          {"c_lower", r.c_lower},
          {"c_upper", r.c_upper},
          {"gap", {{"max", r.gap.max}, {"min", r.gap.min}, {"mean", r.gap.mean}, {"std", r.gap.std}}}};
}

nlohmann::json ToJson(const StochasticityReport& r) {
  return {{"trials", r.trials},
          {"sample_count", r.sample_count},
          {"rho2", r.rho2},
          {"max_empirical", r.max_empirical},
          {"empirical", r.empirical},
          {"standard_error", r.standard_error},
          {"bound", r.bound},
          {"passed", r.passed}};
}

nlohmann::json ToJson(const SanityReport& r) {
  nlohmann::json props = nlohmann::json::array();
  for (const auto& p : r.properties) {
    nlohmann::json j = {{"name", p.name}, {"passed", p.passed}};
    if (p.failing_seed) {
      j["failing_seed"] = *p.failing_seed;
      j["detail"] = p.detail;
    }
    props.push_back(std::move(j));
  }
  return {{"passed", r.passed()}, {"properties", props}};
}

}  // namespace feroma

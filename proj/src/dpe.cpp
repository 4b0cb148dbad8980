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

#include "feroma/dpe.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "feroma/error.hpp"

namespace feroma {
namespace {

struct Accumulator {
  std::vector<double> sum;
  std::vector<double> sum_sq;
  std::size_t n = 0;

  explicit Accumulator(std::size_t dim) : sum(dim, 0.0), sum_sq(dim, 0.0) {}

  void Add(std::span<const double> row) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      sum[j] += row[j];
      sum_sq[j] += row[j] * row[j];
    }
    ++n;
  }
};

// Two-pass moments over the selected rows; the variance uses n - 1.
void Moments(const Matrix& x, std::span<const std::size_t> rows, std::vector<double>& mean,
             std::vector<double>& var) {
  const std::size_t dim = x.cols();
  mean.assign(dim, 0.0);
  var.assign(dim, 0.0);
  for (std::size_t r : rows) {
    const auto row = x.row(r);
    for (std::size_t j = 0; j < dim; ++j) mean[j] += row[j];
  }
  const auto n = static_cast<double>(rows.size());
  for (double& m : mean) m /= n;
  for (std::size_t r : rows) {
    const auto row = x.row(r);
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = row[j] - mean[j];
      var[j] += d * d;
    }
  }
  for (double& v : var) v /= (n - 1.0);
}

void AddInto(std::vector<double>& acc, const std::vector<double>& v) {
  for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += v[j];
}

void ScaleBy(std::vector<double>& v, double s) {
  for (double& x : v) x *= s;
}

}  // namespace

void GlobalBounds::Validate() const {
  if (lower.empty() || lower.size() != upper.size()) {
    throw ConfigError("global bounds have mismatched or empty vectors");
  }
  for (std::size_t j = 0; j < lower.size(); ++j) {
    if (!(lower[j] <= upper[j])) throw ConfigError("global bounds have lower > upper");
  }
}

bool GlobalBounds::Contains(std::span<const double> point) const {
  if (point.size() != lower.size()) return false;
  for (std::size_t j = 0; j < point.size(); ++j) {
    if (point[j] < lower[j] || point[j] > upper[j]) return false;
  }
  return true;
}

std::pair<std::vector<double>, std::vector<double>> ClientBounds(const Matrix& latents) {
  if (latents.rows() == 0) throw ConfigError("client bounds need at least one latent row");
  std::vector<double> lo(latents.row(0).begin(), latents.row(0).end());
  std::vector<double> hi = lo;
  for (std::size_t r = 1; r < latents.rows(); ++r) {
    const auto row = latents.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      lo[j] = std::min(lo[j], row[j]);
      hi[j] = std::max(hi[j], row[j]);
    }
  }
  return {std::move(lo), std::move(hi)};
}

GlobalBounds MergeBounds(
    std::span<const std::pair<std::vector<double>, std::vector<double>>> client_bounds) {
  if (client_bounds.empty()) throw ConfigError("no client bounds to merge");
  GlobalBounds out{client_bounds[0].first, client_bounds[0].second};
  for (const auto& [lo, hi] : client_bounds.subspan(1)) {
    if (lo.size() != out.dim() || hi.size() != out.dim()) {
      throw ConfigError("client bounds have inconsistent latent dimension");
    }
    for (std::size_t j = 0; j < out.dim(); ++j) {
      out.lower[j] = std::min(out.lower[j], lo[j]);
      out.upper[j] = std::max(out.upper[j], hi[j]);
    }
  }
  out.Validate();
  return out;
}

void DpeConfig::Validate() const {
  if (pca_dim == 0) throw ConfigError("pca_dim must be >= 1");
  if (masks == 0) throw ConfigError("masks must be >= 1");
  if (!(mask_prob > 0.0 && mask_prob <= 1.0)) throw ConfigError("mask_prob must lie in (0, 1]");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (reference_points < 2) throw ConfigError("reference_points must be >= 2");
}

std::vector<double> DistributionProfile::Marginal() const {
  std::vector<double> out(marginal_mean);
  out.insert(out.end(), marginal_var.begin(), marginal_var.end());
  return out;
}

std::vector<double> DistributionProfile::ClassBlock(std::size_t u) const {
  std::vector<double> out(class_mean.at(u));
  out.insert(out.end(), class_var[u].begin(), class_var[u].end());
  return out;
}

std::vector<double> DistributionProfile::Flatten() const {
  std::vector<double> out = Marginal();
  for (std::size_t u = 0; u < num_classes(); ++u) {
    const auto block = ClassBlock(u);
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

PcaProjector BuildReferenceProjector(const GlobalBounds& bounds, const DpeConfig& cfg) {
  bounds.Validate();
  cfg.Validate();
  if (cfg.pca_dim > bounds.dim()) {
    throw ConfigError("pca_dim exceeds the latent dimension");
  }
  Rng rng = Rng::Derive(cfg.pca_seed, 0, 0, Stream::kReference);
  Matrix points(cfg.reference_points, bounds.dim());
  for (std::size_t r = 0; r < points.rows(); ++r) {
    for (std::size_t j = 0; j < bounds.dim(); ++j) {
      points(r, j) = rng.Uniform(bounds.lower[j], bounds.upper[j]);
    }
  }
  return FitSharedPca(points, cfg.pca_dim, cfg.pca_seed);
}

StatisticRanges RangesInPcaSpace(const PcaProjector& projector, const GlobalBounds& bounds) {
  if (projector.input_dim != bounds.dim()) {
    throw ConfigError("projector and bounds disagree on latent dimension");
  }
  StatisticRanges out;
  out.mean.resize(projector.output_dim);
  out.variance.resize(projector.output_dim);
  for (std::size_t i = 0; i < projector.output_dim; ++i) {
    double extent = 0.0;
    for (std::size_t j = 0; j < bounds.dim(); ++j) {
      extent += std::abs(projector.projection(i, j)) * (bounds.upper[j] - bounds.lower[j]);
    }
    out.mean[i] = extent;
    out.variance[i] = 0.25 * extent * extent;
  }
  return out;
}

DistributionProfile MonteCarloMoments(const Matrix& reduced, std::span<const int> labels,
                                      std::size_t num_classes, const DpeConfig& cfg,
                                      Rng& rng) {
  cfg.Validate();
  const std::size_t n = reduced.rows();
  const std::size_t l = reduced.cols();
  if (n < 2) throw ConfigError("profile extraction needs at least 2 samples");
  const bool labelled = !labels.empty();
  if (labelled && labels.size() != n) throw ConfigError("label count does not match rows");

  DistributionProfile p;
  p.sample_count = n;
  p.marginal_mean.assign(l, 0.0);
  p.marginal_var.assign(l, 0.0);
  p.class_mean.assign(num_classes, std::vector<double>(l, 0.0));
  p.class_var.assign(num_classes, std::vector<double>(l, 0.0));
  p.class_present.assign(num_classes, false);
  p.class_count.assign(num_classes, 0);

  std::vector<std::vector<std::size_t>> class_rows(num_classes);
  if (labelled) {
    for (std::size_t r = 0; r < n; ++r) {
      const int y = labels[r];
      if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
        throw ConfigError("label outside [0, num_classes)");
      }
      class_rows[static_cast<std::size_t>(y)].push_back(r);
    }
    for (std::size_t u = 0; u < num_classes; ++u) {
      p.class_count[u] = class_rows[u].size();
      p.class_present[u] = class_rows[u].size() >= 2;
    }
  }

  std::vector<std::size_t> all(n);
  for (std::size_t r = 0; r < n; ++r) all[r] = r;
  std::vector<std::size_t> class_hits(num_classes, 0);
  std::vector<double> mean, var;
  std::vector<std::size_t> selected;
  std::vector<bool> in_mask(n);

  for (std::size_t m = 0; m < cfg.masks; ++m) {
    bool ok = false;
    for (int attempt = 0; attempt < kMaskRetries && !ok; ++attempt) {
      selected.clear();
      for (std::size_t r = 0; r < n; ++r) {
        in_mask[r] = rng.Bernoulli(cfg.mask_prob);
        if (in_mask[r]) selected.push_back(r);
      }
      ok = selected.size() >= 2;
    }
    if (!ok) {
      selected = all;
      std::fill(in_mask.begin(), in_mask.end(), true);
    }
    Moments(reduced, selected, mean, var);
    AddInto(p.marginal_mean, mean);
    AddInto(p.marginal_var, var);

    if (!labelled) continue;
    std::vector<std::size_t> rows;
    for (std::size_t u = 0; u < num_classes; ++u) {
      if (!p.class_present[u]) continue;
      rows.clear();
      for (std::size_t r : class_rows[u]) {
        if (in_mask[r]) rows.push_back(r);
      }
      if (rows.size() < 2) continue;
      Moments(reduced, rows, mean, var);
      AddInto(p.class_mean[u], mean);
      AddInto(p.class_var[u], var);
      ++class_hits[u];
    }
  }
  ScaleBy(p.marginal_mean, 1.0 / static_cast<double>(cfg.masks));
  ScaleBy(p.marginal_var, 1.0 / static_cast<double>(cfg.masks));
  for (std::size_t u = 0; u < num_classes; ++u) {
    if (!p.class_present[u]) continue;
    if (class_hits[u] == 0) {
      Moments(reduced, class_rows[u], p.class_mean[u], p.class_var[u]);
    } else {
      ScaleBy(p.class_mean[u], 1.0 / static_cast<double>(class_hits[u]));
      ScaleBy(p.class_var[u], 1.0 / static_cast<double>(class_hits[u]));
    }
  }
  return p;
}

std::vector<double> NoiseScales(const StatisticRanges& ranges, std::size_t v,
                                const DpeConfig& cfg) {
  std::vector<double> out;
  out.reserve(2 * ranges.mean.size());
  const double denom = static_cast<double>(v) * cfg.epsilon;
  for (double r : ranges.mean) out.push_back(r / denom);
  for (double r : ranges.variance) out.push_back(r / denom);
  return out;
}

DistributionProfile Sanitize(const DistributionProfile& profile, const DpeConfig& cfg,
                             const StatisticRanges& ranges, std::size_t v, Rng& rng) {
  if (!(cfg.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (v == 0) throw ConfigError("sample count must be >= 1");
  const std::size_t l = profile.pca_dim();
  if (ranges.mean.size() != l || ranges.variance.size() != l) {
    throw ConfigError("statistic ranges do not match the profile dimension");
  }
  for (std::size_t i = 0; i < l; ++i) {
    if (!(std::isfinite(ranges.mean[i]) && ranges.mean[i] > 0.0 &&
          std::isfinite(ranges.variance[i]) && ranges.variance[i] > 0.0)) {
      throw ConfigError("statistic ranges must be finite and positive");
    }
  }
  DistributionProfile out = profile;
  out.sample_count = v;
  if (!cfg.dp_enabled) {
    out.epsilon_used = std::numeric_limits<double>::infinity();
    return out;
  }
  out.epsilon_used = cfg.epsilon;
  const std::vector<double> b = NoiseScales(ranges, v, cfg);
  auto perturb = [&](std::vector<double>& mean, std::vector<double>& var) {
    for (std::size_t i = 0; i < l; ++i) mean[i] += rng.Laplace(b[i]);
    for (std::size_t i = 0; i < l; ++i) var[i] += rng.Laplace(b[l + i]);
  };
  perturb(out.marginal_mean, out.marginal_var);
  for (std::size_t u = 0; u < out.num_classes(); ++u) {
    if (out.class_present[u]) perturb(out.class_mean[u], out.class_var[u]);
  }
  return out;
}

double StochasticityBound(double tau2, std::size_t masks, double mask_prob, std::size_t v,
                          double laplace_scale) {
  return tau2 / (static_cast<double>(masks) * mask_prob * static_cast<double>(v)) +
         2.0 * laplace_scale * laplace_scale;
}

ProfileEncoder::ProfileEncoder(ModelParams model, GlobalBounds bounds, DpeConfig cfg)
    : model_(std::move(model)), bounds_(std::move(bounds)), cfg_(cfg) {
  model_.Validate();
  if (bounds_.dim() != model_.arch.LatentDim()) {
    throw ConfigError("bounds do not match the model latent dimension");
  }
  projector_ = BuildReferenceProjector(bounds_, cfg_);
  ranges_ = RangesInPcaSpace(projector_, bounds_);
}

Matrix ProfileEncoder::Reduce(const Matrix& features) const {
  Matrix latents = ExtractLatents(model_, features);
  for (std::size_t r = 0; r < latents.rows(); ++r) {
    auto row = latents.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = std::clamp(row[j], bounds_.lower[j], bounds_.upper[j]);
    }
  }
  return projector_.Project(latents);
}

DistributionProfile ProfileEncoder::Extract(const Matrix& features,
                                            std::span<const int> labels, Rng& rng) const {
  if (labels.empty()) throw ConfigError("labelled extraction needs labels");
  const Matrix reduced = Reduce(features);
  const DistributionProfile raw =
      MonteCarloMoments(reduced, labels, model_.arch.num_classes, cfg_, rng);
  return Sanitize(raw, cfg_, ranges_, features.rows(), rng);
}

DistributionProfile ProfileEncoder::ExtractLabelFree(const Matrix& features, Rng& rng) const {
  const Matrix reduced = Reduce(features);
  const DistributionProfile raw =
      MonteCarloMoments(reduced, {}, model_.arch.num_classes, cfg_, rng);
  return Sanitize(raw, cfg_, ranges_, features.rows(), rng);
}

std::vector<double> ProfileEncoder::MarginalBound(std::size_t v) const {
  const std::vector<double> b = NoiseScales(ranges_, v, cfg_);
  const std::size_t l = cfg_.pca_dim;
  std::vector<double> out(2 * l);
  for (std::size_t i = 0; i < l; ++i) {
    const double tau2 = ranges_.variance[i];
    out[i] = StochasticityBound(tau2, cfg_.masks, cfg_.mask_prob, v,
                                cfg_.dp_enabled ? b[i] : 0.0);
    // A variance statistic of a [a, a + R] variable moves by at most R^2 / 4
    // per sample, so its sub-Gaussian proxy is (R^2 / 4)^2.
    out[l + i] = StochasticityBound(tau2 * tau2, cfg_.masks, cfg_.mask_prob, v,
                                    cfg_.dp_enabled ? b[l + i] : 0.0);
  }
  return out;
}

DistributionProfile ExtractProfile(const ModelParams& model, const ClientDataset& data,
                                   const GlobalBounds& bounds, const DpeConfig& cfg,
                                   bool with_labels, Rng& rng) {
  if (data.size() == 0) throw ConfigError("cannot profile an empty dataset");
  const ProfileEncoder encoder(model, bounds, cfg);
  DistributionProfile p = with_labels ? encoder.Extract(data.features, data.labels, rng)
                                      : encoder.ExtractLabelFree(data.features, rng);
  p.round = data.round;
  p.client_id = data.client_id;
  return p;
}

void WriteProfileHeader(std::ostream& out, std::size_t pca_dim, std::size_t num_classes) {
  out << "client_id,round,epsilon,v";
  for (const char* stat : {"mean", "var"}) {
    for (std::size_t i = 0; i < pca_dim; ++i) out << ",m_" << stat << i;
  }
  for (std::size_t u = 0; u < num_classes; ++u) {
    for (const char* stat : {"mean", "var"}) {
      for (std::size_t i = 0; i < pca_dim; ++i) out << ",c" << u << "_" << stat << i;
    }
  }
  for (std::size_t u = 0; u < num_classes; ++u) out << ",present" << u;
  out << '\n';
}

void WriteProfileRow(std::ostream& out, const DistributionProfile& profile) {
  const auto old = out.precision(17);
  out << profile.client_id << ',' << profile.round << ',';
  if (std::isinf(profile.epsilon_used)) {
    out << "inf";
  } else {
    out << profile.epsilon_used;
  }
  out << ',' << profile.sample_count;
  for (double x : profile.Flatten()) out << ',' << x;
  for (bool b : profile.class_present) out << ',' << (b ? 1 : 0);
  out << '\n';
  out.precision(old);
}

}  // namespace feroma

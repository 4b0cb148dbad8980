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

#include "feroma/numerics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "feroma/error.hpp"
#include "feroma/kernels.hpp"

namespace feroma {
namespace {

void RequireSameLength(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ConfigError(std::string(what) + ": dimension mismatch");
}

void CanonicalizeSign(std::span<double> component) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < component.size(); ++j) {
    if (std::fabs(component[j]) > std::fabs(component[best])) best = j;
  }
  if (component[best] < 0.0) {
    for (double& v : component) v = -v;
  }
}

// Top eigenpairs of a symmetric matrix by power iteration. Each new vector is
// re-orthogonalized against the accepted ones (Hotelling deflation).
void PowerIterationEigenpairs(const Eigen::MatrixXd& cov, std::size_t count,
                              std::uint64_t seed, Matrix& vectors,
                              std::vector<double>& values) {
  const auto n = static_cast<std::size_t>(cov.rows());
  constexpr int kMaxIterations = 20000;
  constexpr double kTolerance = 1e-13;
  Rng rng = Rng::Derive(seed, 0, 0, Stream::kPowerIteration);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t j = 0; j < n; ++j) v(static_cast<Eigen::Index>(j)) = rng.Normal();
    auto orthogonalize = [&](Eigen::VectorXd& x) {
      for (std::size_t p = 0; p < k; ++p) {
        const Eigen::Map<const Eigen::VectorXd> prev(vectors.row(p).data(),
                                                     static_cast<Eigen::Index>(n));
        x -= prev.dot(x) * prev;
      }
    };
    orthogonalize(v);
    v.normalize();
    for (int it = 0; it < kMaxIterations; ++it) {
      Eigen::VectorXd next = cov * v;
      orthogonalize(next);
      const double norm = next.norm();
      if (norm <= 1e-300) {
        // Remaining spectrum is zero; any orthonormal completion will do.
        break;
      }
      next /= norm;
      if (next.dot(v) < 0) next = -next;
      const double change = (next - v).norm();
      v = next;
      if (change < kTolerance) break;
    }
    auto out = vectors.row(k);
    for (std::size_t j = 0; j < n; ++j) out[j] = v(static_cast<Eigen::Index>(j));
    values[k] = std::max(0.0, v.dot(cov * v));
  }
}

}  // namespace

Matrix PcaProjector::Project(const Matrix& points) const {
  if (points.cols() != input_dim) {
    throw ConfigError("projector input dimension mismatch");
  }
  Matrix out(points.rows(), output_dim);
  std::vector<double> centered(input_dim);
  for (std::size_t r = 0; r < points.rows(); ++r) {
    const auto row = points.row(r);
    for (std::size_t j = 0; j < input_dim; ++j) centered[j] = row[j] - center[j];
    for (std::size_t c = 0; c < output_dim; ++c) {
      out(r, c) = kernels::Dot(projection.row(c), centered);
    }
  }
  return out;
}

double PcaProjector::ReconstructionError(const Matrix& points) const {
  if (points.rows() < 2) return 0.0;
  const Matrix reduced = Project(points);
  double total = 0.0;
  std::vector<double> residual(input_dim);
  for (std::size_t r = 0; r < points.rows(); ++r) {
    const auto row = points.row(r);
    for (std::size_t j = 0; j < input_dim; ++j) residual[j] = row[j] - center[j];
    for (std::size_t c = 0; c < output_dim; ++c) {
      kernels::Axpy(-reduced(r, c), projection.row(c), residual);
    }
    total += kernels::Dot(residual, residual);
  }
  return total / static_cast<double>(points.rows() - 1);
}

double PcaProjector::ExplainedVarianceRatio(std::size_t component) const {
  return total_variance > 0.0 ? explained_variance.at(component) / total_variance
                              : 0.0;
}

PcaProjector FitSharedPca(const Matrix& points, std::size_t output_dim,
                          std::uint64_t seed, PcaMethod method) {
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();
  if (output_dim == 0 || output_dim > dim) {
    throw ConfigError("PCA output dimension must be in [1, input dimension]");
  }
  if (n < output_dim || n < 2) {
    throw ConfigError("PCA needs at least output_dim (and 2) reference points");
  }

  PcaProjector pca;
  pca.input_dim = dim;
  pca.output_dim = output_dim;
  pca.seed = seed;
  pca.center.assign(dim, 0.0);
  double magnitude = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    kernels::Axpy(1.0, points.row(r), pca.center);
    magnitude += kernels::Dot(points.row(r), points.row(r));
  }
  for (double& c : pca.center) c /= static_cast<double>(n);

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                              static_cast<Eigen::Index>(dim));
  Eigen::VectorXd centered(static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < dim; ++j) {
      centered(static_cast<Eigen::Index>(j)) = points(r, j) - pca.center[j];
    }
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(n - 1);
  pca.total_variance = cov.trace();
  if (!(pca.total_variance > 1e-24 * (1.0 + magnitude / static_cast<double>(n)))) {
    throw ConfigError("rank-deficient reference set");
  }

  pca.projection = Matrix(output_dim, dim);
  pca.explained_variance.assign(output_dim, 0.0);
  const bool dense = method == PcaMethod::kEigendecomposition ||
                     (method == PcaMethod::kAuto && dim <= kDenseEigenLimit);
  if (dense) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
      throw Error("covariance eigendecomposition failed");
    }
    const auto& values = solver.eigenvalues();
    const auto& vectors = solver.eigenvectors();
    for (std::size_t k = 0; k < output_dim; ++k) {
      const auto col = static_cast<Eigen::Index>(dim - 1 - k);  // ascending order
      pca.explained_variance[k] = std::max(0.0, values(col));
      for (std::size_t j = 0; j < dim; ++j) {
        pca.projection(k, j) = vectors(static_cast<Eigen::Index>(j), col);
      }
    }
  } else {
    PowerIterationEigenpairs(cov, output_dim, seed, pca.projection,
                             pca.explained_variance);
  }
  for (std::size_t k = 0; k < output_dim; ++k) {
    CanonicalizeSign(pca.projection.row(k));
  }
  return pca;
}

std::string_view DistanceKindName(DistanceKind kind) {
  return kind == DistanceKind::kCosine ? "cosine" : "euclidean";
}

DistanceKind ParseDistanceKind(std::string_view name) {
  if (name == "cosine") return DistanceKind::kCosine;
  if (name == "euclidean") return DistanceKind::kEuclidean;
  throw ConfigError("unknown distance kind '" + std::string(name) + "'");
}

double Distance(std::span<const double> a, std::span<const double> b,
                DistanceKind kind) {
  RequireSameLength(a.size(), b.size(), "distance");
  if (kind == DistanceKind::kEuclidean) {
    return std::sqrt(kernels::SquaredDistance(a, b));
  }
  const double na = std::sqrt(kernels::Dot(a, a));
  const double nb = std::sqrt(kernels::Dot(b, b));
  if (na == 0.0 || nb == 0.0) throw ConfigError("undefined cosine distance");
  const double d = 1.0 - kernels::Dot(a, b) / (na * nb);
  return std::clamp(d, 0.0, 2.0);
}

std::vector<double> SampleLaplace(double scale, std::size_t n, Rng& rng) {
  if (!(scale > 0.0)) throw ConfigError("Laplace scale must be positive");
  std::vector<double> out(n);
  for (double& v : out) v = rng.Laplace(scale);
  return out;
}

double GaussianW2Squared(const DiagonalGaussian& p, const DiagonalGaussian& q) {
  RequireSameLength(p.mean.size(), q.mean.size(), "W2");
  RequireSameLength(p.variance.size(), q.variance.size(), "W2");
  RequireSameLength(p.mean.size(), p.variance.size(), "W2");
  double total = kernels::SquaredDistance(p.mean, q.mean);
  for (std::size_t i = 0; i < p.variance.size(); ++i) {
    const double d = std::sqrt(p.variance[i]) - std::sqrt(q.variance[i]);
    total += d * d;
  }
  return total;
}

double ProfileDeltaSquared(const DiagonalGaussian& p, const DiagonalGaussian& q) {
  RequireSameLength(p.mean.size(), q.mean.size(), "profile delta");
  RequireSameLength(p.variance.size(), q.variance.size(), "profile delta");
  return kernels::SquaredDistance(p.mean, q.mean) +
         kernels::SquaredDistance(p.variance, q.variance);
}

double JsDistanceDiscrete(std::span<const double> p, std::span<const double> q) {
  RequireSameLength(p.size(), q.size(), "JS distance");
  auto check = [](std::span<const double> x) {
    double sum = 0.0;
    for (double v : x) {
      if (v < 0.0) throw ConfigError("probability vector has negative entries");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
      throw ConfigError("probability vector does not sum to 1");
    }
  };
  check(p);
  check(q);
  double divergence = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) divergence += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) divergence += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return std::sqrt(std::clamp(divergence, 0.0, 1.0));
}

}  // namespace feroma

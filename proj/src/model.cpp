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

#include "feroma/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "feroma/error.hpp"
#include "feroma/kernels.hpp"

namespace feroma {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

constexpr char kMagic[4] = {'F', 'R', 'M', 'P'};
constexpr std::uint32_t kVersion = 1;

struct Layout {
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;
};

Layout LayoutOf(const Architecture& a) {
  Layout l;
  if (a.kind == ArchKind::kMlp) {
    l.w1 = 0;
    l.b1 = a.hidden_width * a.input_dim;
    l.w2 = l.b1 + a.hidden_width;
    l.b2 = l.w2 + a.num_classes * a.hidden_width;
  } else {
    l.w2 = 0;  // the single layer lives in the output slots
    l.b2 = a.num_classes * a.input_dim;
  }
  return l;
}

// Scratch for one forward/backward pass.
struct Workspace {
  std::vector<double> hidden;
  std::vector<double> logits;
  std::vector<double> delta_hidden;
};

// Fills ws.logits (and ws.hidden for mlp) for one input row and returns the
// row's cross-entropy loss.
double Forward(const Architecture& a, const Layout& l, const double* theta,
               std::span<const double> x, int label, Workspace& ws) {
  const auto& k = kernels::Active();
  std::span<const double> input = x;
  std::size_t in_dim = a.input_dim;
  if (a.kind == ArchKind::kMlp) {
    ws.hidden.resize(a.hidden_width);
    k.affine(theta + l.w1, theta + l.b1, x.data(), ws.hidden.data(), a.hidden_width,
             a.input_dim);
    input = ws.hidden;
    in_dim = a.hidden_width;
  }
  ws.logits.resize(a.num_classes);
  double max_logit = -INFINITY;
  for (std::size_t c = 0; c < a.num_classes; ++c) {
    ws.logits[c] = theta[l.b2 + c] + k.dot(theta + l.w2 + c * in_dim, input.data(), in_dim);
    max_logit = std::max(max_logit, ws.logits[c]);
  }
  double norm = 0.0;
  for (double v : ws.logits) norm += std::exp(v - max_logit);
  const double log_norm = max_logit + std::log(norm);
  return log_norm - ws.logits[static_cast<std::size_t>(label)];
}

void CheckData(const ModelParams& params, const Matrix& features,
               std::span<const int> labels) {
  if (features.cols() != params.arch.input_dim) {
    throw ConfigError("feature width does not match the model input dimension");
  }
  if (labels.size() != features.rows()) {
    throw ConfigError("label count does not match feature rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= params.arch.num_classes) {
      throw ConfigError("label outside [0, num_classes)");
    }
  }
}

}  // namespace

std::string_view ArchKindName(ArchKind kind) {
  return kind == ArchKind::kMlp ? "mlp" : "softmax_reg";
}

ArchKind ParseArchKind(std::string_view name) {
  if (name == "mlp") return ArchKind::kMlp;
  if (name == "softmax_reg") return ArchKind::kSoftmaxRegression;
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

std::size_t Architecture::ParamCount() const {
  if (kind == ArchKind::kMlp) {
    return input_dim * hidden_width + hidden_width + hidden_width * num_classes +
           num_classes;
  }
  return input_dim * num_classes + num_classes;
}

std::size_t Architecture::LatentDim() const {
  return kind == ArchKind::kMlp ? hidden_width : input_dim;
}

void ModelParams::Validate() const {
  if (theta.size() != arch.ParamCount()) {
    throw ConfigError("parameter vector length does not match the architecture");
  }
  if (!std::all_of(theta.begin(), theta.end(), [](double v) { return std::isfinite(v); })) {
    throw ConfigError("parameter vector has non-finite entries");
  }
}

void TrainConfig::Validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
}

ModelParams InitModel(const Architecture& arch, Rng& rng) {
  if (arch.input_dim == 0 || arch.num_classes < 2 ||
      (arch.kind == ArchKind::kMlp && arch.hidden_width == 0)) {
    throw ConfigError("degenerate architecture");
  }
  ModelParams params{arch, std::vector<double>(arch.ParamCount(), 0.0)};
  const Layout l = LayoutOf(arch);
  auto fill = [&](std::size_t offset, std::size_t fan_out, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < fan_out * fan_in; ++i) {
      params.theta[offset + i] = rng.Uniform(-limit, limit);
    }
  };
  if (arch.kind == ArchKind::kMlp) {
    fill(l.w1, arch.hidden_width, arch.input_dim);
    fill(l.w2, arch.num_classes, arch.hidden_width);
  } else {
    fill(l.w2, arch.num_classes, arch.input_dim);
  }
  return params;
}

double LossAndGradient(const ModelParams& params, const Matrix& features,
                       std::span<const int> labels, std::span<const std::size_t> batch,
                       std::vector<double>* gradient) {
  const Architecture& a = params.arch;
  const Layout l = LayoutOf(a);
  const double* theta = params.theta.data();
  const auto& k = kernels::Active();
  if (gradient) gradient->assign(params.theta.size(), 0.0);
  if (batch.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(batch.size());
  const std::size_t in_dim = a.kind == ArchKind::kMlp ? a.hidden_width : a.input_dim;

  Workspace ws;
  double loss = 0.0;
  for (std::size_t idx : batch) {
    const auto x = features.row(idx);
    const int y = labels[idx];
    loss += Forward(a, l, theta, x, y, ws);
    if (!gradient) continue;
    double* g = gradient->data();

    // dL/dlogits = softmax - onehot, scaled by 1/B.
    const double max_logit = *std::max_element(ws.logits.begin(), ws.logits.end());
    double norm = 0.0;
    for (double& v : ws.logits) {
      v = std::exp(v - max_logit);
      norm += v;
    }
    for (std::size_t c = 0; c < a.num_classes; ++c) {
      ws.logits[c] = (ws.logits[c] / norm - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv;
    }
    const double* input = a.kind == ArchKind::kMlp ? ws.hidden.data() : x.data();
    if (a.kind == ArchKind::kMlp) ws.delta_hidden.assign(a.hidden_width, 0.0);
    for (std::size_t c = 0; c < a.num_classes; ++c) {
      const double d = ws.logits[c];
      g[l.b2 + c] += d;
      k.axpy(d, input, g + l.w2 + c * in_dim, in_dim);
      if (a.kind == ArchKind::kMlp) {
        k.axpy(d, theta + l.w2 + c * in_dim, ws.delta_hidden.data(), in_dim);
      }
    }
    if (a.kind == ArchKind::kMlp) {
      for (std::size_t j = 0; j < a.hidden_width; ++j) {
        if (ws.hidden[j] <= 0.0) continue;
        const double d = ws.delta_hidden[j];
        g[l.b1 + j] += d;
        k.axpy(d, x.data(), g + l.w1 + j * a.input_dim, a.input_dim);
      }
    }
  }
  return loss * inv;
}

ModelParams LocalUpdate(const ModelParams& params, const Matrix& features,
                        std::span<const int> labels, const TrainConfig& cfg, Rng& rng) {
  cfg.Validate();
  params.Validate();
  CheckData(params, features, labels);
  if (features.rows() == 0) throw ConfigError("cannot train on an empty dataset");

  ModelParams out = params;
  std::vector<double> velocity(out.theta.size(), 0.0);
  std::vector<double> grad;
  std::vector<std::size_t> order(features.rows());
  std::iota(order.begin(), order.end(), 0);
  const auto& k = kernels::Active();
  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      const double loss = LossAndGradient(out, features, labels, batch, &grad);
      if (!std::isfinite(loss)) {
        throw DivergenceError("divergence: non-finite training loss");
      }
      k.scale(cfg.momentum, velocity.data(), velocity.size());
      k.axpy(1.0, grad.data(), velocity.data(), velocity.size());
      k.axpy(-cfg.learning_rate, velocity.data(), out.theta.data(), out.theta.size());
    }
  }
  return out;
}

ModelParams LocalUpdate(const ModelParams& params, const ClientDataset& data,
                        const TrainConfig& cfg, Rng& rng) {
  return LocalUpdate(params, data.features, data.labels, cfg, rng);
}

std::vector<int> Predict(const ModelParams& params, const Matrix& features) {
  if (features.cols() != params.arch.input_dim) {
    throw ConfigError("feature width does not match the model input dimension");
  }
  const Layout l = LayoutOf(params.arch);
  Workspace ws;
  std::vector<int> out(features.rows());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    Forward(params.arch, l, params.theta.data(), features.row(r), 0, ws);
    out[r] = static_cast<int>(std::max_element(ws.logits.begin(), ws.logits.end()) -
                              ws.logits.begin());
  }
  return out;
}

EvalResult Evaluate(const ModelParams& params, const Matrix& features,
                    std::span<const int> labels) {
  CheckData(params, features, labels);
  if (features.rows() == 0) throw ConfigError("cannot evaluate on an empty dataset");
  const Layout l = LayoutOf(params.arch);
  Workspace ws;
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    loss += Forward(params.arch, l, params.theta.data(), features.row(r), labels[r], ws);
    const auto best = std::max_element(ws.logits.begin(), ws.logits.end()) - ws.logits.begin();
    if (best == labels[r]) ++correct;
  }
  const auto n = static_cast<double>(features.rows());
  return {static_cast<double>(correct) / n, loss / n};
}

EvalResult Evaluate(const ModelParams& params, const ClientDataset& data) {
  return Evaluate(params, data.features, data.labels);
}

Matrix ExtractLatents(const ModelParams& params, const Matrix& features) {
  if (features.cols() != params.arch.input_dim) {
    throw ConfigError("feature width does not match the model input dimension");
  }
  if (params.arch.kind != ArchKind::kMlp) return features;
  const Architecture& a = params.arch;
  const Layout l = LayoutOf(a);
  Matrix out(features.rows(), a.hidden_width);
  const auto& k = kernels::Active();
  for (std::size_t r = 0; r < features.rows(); ++r) {
    k.affine(params.theta.data() + l.w1, params.theta.data() + l.b1,
             features.row(r).data(), out.row(r).data(), a.hidden_width, a.input_dim);
  }
  return out;
}

double ProfileOverhead(std::size_t param_count, std::size_t profile_dim) {
  if (param_count == 0) throw ConfigError("model has no parameters");
  return static_cast<double>(profile_dim) / static_cast<double>(param_count);
}

std::vector<std::uint8_t> SerializeParams(const ModelParams& params) {
  std::vector<std::uint8_t> out;
  auto put = [&out](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), bytes, bytes + n);
  };
  const std::uint32_t kind = params.arch.kind == ArchKind::kMlp ? 1 : 0;
  const std::uint64_t dims[4] = {params.arch.input_dim, params.arch.hidden_width,
                                 params.arch.num_classes, params.theta.size()};
  put(kMagic, sizeof(kMagic));
  put(&kVersion, sizeof(kVersion));
  put(&kind, sizeof(kind));
  put(dims, sizeof(dims));
  put(params.theta.data(), params.theta.size() * sizeof(double));
  return out;
}

ModelParams DeserializeParams(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kHeader = 4 + 4 + 4 + 4 * 8;
  if (bytes.size() < kHeader || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a model checkpoint");
  }
  std::uint32_t version = 0;
  std::uint32_t kind = 0;
  std::uint64_t dims[4];
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&kind, bytes.data() + 8, 4);
  std::memcpy(dims, bytes.data() + 12, sizeof(dims));
  if (version != kVersion || kind > 1) throw FormatError("unsupported checkpoint version");
  ModelParams params;
  params.arch = {kind == 1 ? ArchKind::kMlp : ArchKind::kSoftmaxRegression, dims[0], dims[1],
                 dims[2]};
  if (bytes.size() != kHeader + dims[3] * sizeof(double)) {
    throw FormatError("truncated model checkpoint");
  }
  params.theta.resize(dims[3]);
  std::memcpy(params.theta.data(), bytes.data() + kHeader, dims[3] * sizeof(double));
  params.Validate();
  return params;
}

}  // namespace feroma

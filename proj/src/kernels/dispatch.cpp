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

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "feroma/kernels.hpp"

namespace feroma::kernels {
namespace {

constexpr KernelTable kScalarTable{&scalar::dot, &scalar::squared_distance,
                                   &scalar::axpy, &scalar::scale,
                                   &scalar::affine};

#ifdef FEROMA_HAVE_AVX2_KERNELS
constexpr KernelTable kAvx2Table{&avx2::dot, &avx2::squared_distance,
                                 &avx2::axpy, &avx2::scale, &avx2::affine};
#endif

Backend InitialBackend() {
  if (const char* forced = std::getenv("FEROMA_SIMD")) {
    const std::string value(forced);
    if (value == "scalar") return Backend::kScalar;
    if (value == "avx2" && Avx2Supported()) return Backend::kAvx2;
  }
  return Avx2Supported() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& Current() {
  static std::atomic<Backend> backend{InitialBackend()};
  return backend;
}

}  // namespace

bool Avx2Supported() {
#if defined(FEROMA_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported;
#else
  return false;
#endif
}

Backend ActiveBackend() { return Current().load(std::memory_order_relaxed); }

std::string_view BackendName(Backend backend) {
  return backend == Backend::kAvx2 ? "avx2" : "scalar";
}

void SetBackend(Backend backend) {
  if (backend == Backend::kAvx2 && !Avx2Supported()) {
    throw std::invalid_argument("AVX2 kernels are not supported on this CPU");
  }
  Current().store(backend, std::memory_order_relaxed);
}

const KernelTable& Table(Backend backend) {
#ifdef FEROMA_HAVE_AVX2_KERNELS
  if (backend == Backend::kAvx2) {
    if (!Avx2Supported()) {
      throw std::invalid_argument("AVX2 kernels are not supported on this CPU");
    }
    return kAvx2Table;
  }
#else
  (void)backend;
#endif
  return kScalarTable;
}

const KernelTable& Active() { return Table(ActiveBackend()); }

namespace {
void CheckLengths(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("kernel operands differ in length");
}
}  // namespace

double Dot(std::span<const double> a, std::span<const double> b) {
  CheckLengths(a.size(), b.size());
  return Active().dot(a.data(), b.data(), a.size());
}

double SquaredDistance(std::span<const double> a, std::span<const double> b) {
  CheckLengths(a.size(), b.size());
  return Active().squared_distance(a.data(), b.data(), a.size());
}

void Axpy(double alpha, std::span<const double> x, std::span<double> y) {
  CheckLengths(x.size(), y.size());
  Active().axpy(alpha, x.data(), y.data(), x.size());
}

void Scale(double alpha, std::span<double> x) {
  Active().scale(alpha, x.data(), x.size());
}

}  // namespace feroma::kernels

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

// Dense double-precision inner loops used by the model, the profile extractor
// and aggregation. Every kernel has a scalar reference implementation and,
// on x86-64 hosts with AVX2+FMA, a vectorized variant. The variant is chosen
// once at startup (or forced through FEROMA_SIMD=scalar|avx2) and can be
// switched explicitly by tests that compare the two.

#ifndef FEROMA_KERNELS_HPP_
#define FEROMA_KERNELS_HPP_

#include <cstddef>
#include <span>
#include <string_view>

namespace feroma::kernels {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  // y = relu(W x + b), W is rows x cols row-major.
  void (*affine)(const double* w, const double* b, const double* x, double* y,
                 std::size_t rows, std::size_t cols);
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void affine(const double* w, const double* b, const double* x, double* y,
            std::size_t rows, std::size_t cols);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define FEROMA_HAVE_AVX2_KERNELS 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void affine(const double* w, const double* b, const double* x, double* y,
            std::size_t rows, std::size_t cols);
}  // namespace avx2
#endif

// True when the running CPU can execute the AVX2 table.
bool Avx2Supported();

Backend ActiveBackend();
std::string_view BackendName(Backend backend);

// Switches the process-wide table. Throws std::invalid_argument when the
// requested backend is not supported on this host.
void SetBackend(Backend backend);

const KernelTable& Table(Backend backend);
const KernelTable& Active();

// Span conveniences over the active table. Lengths must agree.
double Dot(std::span<const double> a, std::span<const double> b);
double SquaredDistance(std::span<const double> a, std::span<const double> b);
void Axpy(double alpha, std::span<const double> x, std::span<double> y);
void Scale(double alpha, std::span<double> x);

}  // namespace feroma::kernels

#endif  // FEROMA_KERNELS_HPP_

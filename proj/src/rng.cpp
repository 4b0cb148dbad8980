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

#include "feroma/rng.hpp"

#include <cmath>

namespace feroma {

Rng Rng::Derive(std::uint64_t seed, std::uint64_t client, std::uint64_t round,
                Stream stream) {
  std::uint64_t key = Mix(seed ^ 0x6a09e667f3bcc908ULL);
  key = Mix(key ^ (client + 0x3c6ef372fe94f82bULL));
  key = Mix(key ^ (round + 0xa54ff53a5f1d36f1ULL));
  key = Mix(key ^ (static_cast<std::uint64_t>(stream) + 0x510e527fade682d1ULL));
  return Rng(key);
}

double Rng::Normal() { return normal_(*this); }

double Rng::Laplace(double scale) {
  // u in (-1/2, 1/2); the endpoint -1/2 is rejected so log() stays finite.
  double u;
  do {
    u = Uniform() - 0.5;
  } while (u == -0.5);
  const double magnitude = -scale * std::log1p(-2.0 * std::fabs(u));
  return u < 0.0 ? -magnitude : magnitude;
}

std::uint64_t Rng::Index(std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(*this);
}

}  // namespace feroma

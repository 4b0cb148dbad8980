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

#ifndef FEROMA_PARALLEL_HPP_
#define FEROMA_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace feroma {

// FEROMA_WORKERS if set to a positive integer, else the hardware concurrency.
std::size_t WorkerCount();

// Runs fn(0..n-1) on up to WorkerCount() threads. Each index is handled
// exactly once; if any call throws, the exception from the lowest failing
// index is rethrown after all workers finish.
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace feroma

#endif  // FEROMA_PARALLEL_HPP_

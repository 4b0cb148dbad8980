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

#ifndef FEROMA_ERROR_HPP_
#define FEROMA_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace feroma {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or precondition violation on user-supplied input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Local training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Malformed external file (IDX, checkpoint).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace feroma

#endif  // FEROMA_ERROR_HPP_

// Copyright 2026 The detsmc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DETSMC_ERROR_HPP
#define DETSMC_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace detsmc {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition or data-structure invariant was violated by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Every particle ended up with zero weight at some time step.
class ParticleCollapse : public Error {
 public:
  explicit ParticleCollapse(std::size_t step)
      : Error("particle collapse: all particles have zero weight at step " +
              std::to_string(step)),
        step_(step) {}

  /// One-based time index at which the collapse happened.
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Malformed input data (price files); carries the offending line number.
class IngestionError : public Error {
 public:
  IngestionError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace detsmc

#endif  // DETSMC_ERROR_HPP

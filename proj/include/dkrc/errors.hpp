// Copyright 2026 The dkrc authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace dkrc {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad argument values (non-finite inputs, invalid parameter ranges).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Incompatible matrix/tensor shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Operation called in the wrong order (e.g. backward without forward).
class StateError : public Error {
 public:
  using Error::Error;
};

// File and format problems.
class IoError : public Error {
 public:
  using Error::Error;
};

// Config file problems (unknown keys, unparsable values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Numerical failure (non-finite values, eigensolver breakdown).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Training produced NaN loss; carries the epoch at which it happened.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, int epoch)
      : NumericError(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Not enough data to perform the requested operation.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

}  // namespace dkrc

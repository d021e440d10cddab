// Copyright 2026 The bevmap Authors
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

#ifndef BEVMAP_ERRORS_HPP
#define BEVMAP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bevmap {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A coordinate or index fell outside the frame or grid it refers to.
class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

/// A configuration cannot be satisfied (empty catalog, inverted bounds, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Not enough samples to perform an estimate.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Input configuration is rank deficient (e.g. collinear correspondences).
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Projective map sends a point to infinity.
class PointAtInfinityError : public Error {
 public:
  using Error::Error;
};

/// Tensor or batch dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity reached a place that requires finite values.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// File system failure; the message carries the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A record lacks an input required by a model (e.g. appearance features).
class MissingInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace bevmap

#endif  // BEVMAP_ERRORS_HPP

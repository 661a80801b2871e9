// Copyright 2026 The ctrx Authors
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

namespace ctrx {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or channel counts that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Out-of-domain scalar arguments or non-finite data.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A dense oracle was asked to materialize too large a matrix.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// A computed per-layer bound was not strictly below one.
class CertificateError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent patch plan (stride does not divide the patch size, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Iterative linear solver did not reach its tolerance.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Non-finite intermediate value in a forward or backward pass.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Training loss blew up.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file, or a file that cannot be opened.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Weights file failed its integrity checks (CRC, version, shape).
class CorruptionError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace ctrx

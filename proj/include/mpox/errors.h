// Copyright 2026 The MpoxMamba Authors. All Rights Reserved.
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

#ifndef MPOX_ERRORS_H_
#define MPOX_ERRORS_H_

#include <stdexcept>
#include <string>

namespace mpox {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or lengths that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration: bad group counts, even ECA kernels, unknown keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Argument outside an operation's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf state, non-finite gradients.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Missing, empty, or undecodable input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed checkpoint or other on-disk artifact.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace mpox

#endif  // MPOX_ERRORS_H_

// Copyright 2026 The OrthoCare Authors.
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

#ifndef ORTHOCARE_ERROR_HPP_
#define ORTHOCARE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace orthocare {

// Base of every error raised by the library. The CLI maps subclasses of
// ValidationError to exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Operand shapes are incompatible for an operation.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A value lies outside the domain of a function (e.g. log of a nonpositive).
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Malformed or out-of-contract input data.
class InputError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace orthocare

#endif  // ORTHOCARE_ERROR_HPP_

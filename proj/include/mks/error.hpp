/*
 * Copyright 2026 The mkslib Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MKS_ERROR_HPP_
#define MKS_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace mks {

// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not fit an operator's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid layer or schedule hyperparameters (kernel sizes, groups, ...).
class SpecError : public Error {
 public:
  using Error::Error;
};

// Malformed run configuration. `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Unreadable or corrupt binary/text file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace mks

#endif  // MKS_ERROR_HPP_

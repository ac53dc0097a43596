// Copyright 2026 The kanspot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace kanspot {

// All library errors derive from Error. kind() is a stable lowercase token
// the CLI prints as the machine-parsable prefix of its error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Operand shapes do not fit the operation.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error("contract", what) {}
};

// Audio too short for one analysis window.
class LengthError : public Error {
 public:
  explicit LengthError(const std::string& what) : Error("length", what) {}
};

class RateError : public Error {
 public:
  explicit RateError(const std::string& what) : Error("rate", what) {}
};

// Malformed or inconsistent dataset content (labels, manifests, audio).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error("data", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

// Parameter budget cannot be met by any width.
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what) : Error("infeasible", what) {}
};

}  // namespace kanspot

// Copyright 2026 The MTDT Authors
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

namespace mtdt {

/// A caller violated a precondition (wrong mode, missing data, bad value).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Tensor or matrix dimensions do not agree with what an operation expects.
class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Topology, phase map, template or config file is inconsistent.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mtdt

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

#include "mtdt/normalization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "mtdt/error.hpp"

namespace mtdt {

std::string to_string(Task t) {
  switch (t) {
    case Task::Ext: return "ext";
    case Task::Inf: return "inf";
    case Task::Ql: return "ql";
    case Task::Tt: return "tt";
  }
  return "?";
}

namespace {

MinMax range_of(std::span<const sim::SimulationRecord> records, const IntMatrix sim::SimulationRecord::*field) {
  MinMax m{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& r : records)
    for (int v : (r.*field).values()) {
      m.min = std::min(m.min, static_cast<double>(v));
      m.max = std::max(m.max, static_cast<double>(v));
    }
  return m;
}

}  // namespace

Normalizer Normalizer::fit(std::span<const sim::SimulationRecord> train) {
  if (train.empty()) throw ContractError("normalization needs at least one training record");
  Normalizer n;
  n.ext_ = range_of(train, &sim::SimulationRecord::ext);
  n.inf_ = range_of(train, &sim::SimulationRecord::inf);
  n.tt_ = range_of(train, &sim::SimulationRecord::tt);
  n.stp_ = range_of(train, &sim::SimulationRecord::stp);
  n.fitted_ = true;
  return n;
}

void Normalizer::require_fitted() const {
  if (!fitted_) throw ContractError("normalizer used before fit");
}

const MinMax& Normalizer::stats(Channel c) const {
  require_fitted();
  switch (c) {
    case Channel::Ext: return ext_;
    case Channel::Inf: return inf_;
    case Channel::Tt: return tt_;
    case Channel::Stp: return stp_;
    case Channel::Ql: break;
  }
  throw ContractError("ql uses log scaling and has no min-max statistics");
}

double Normalizer::normalize(Channel c, double v) const {
  require_fitted();
  if (c == Channel::Ql) return std::log1p(v);
  return stats(c).forward(v);
}

double Normalizer::denormalize(Channel c, double y) const {
  require_fitted();
  if (c == Channel::Ql) return std::expm1(y);
  return stats(c).inverse(y);
}

tensor::Tensor Normalizer::normalize(Channel c, const IntMatrix& m) const {
  tensor::Tensor out({m.rows(), m.cols()});
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = normalize(c, static_cast<double>(m.values()[i]));
  return out;
}

tensor::Tensor Normalizer::denormalize(Channel c, const tensor::Tensor& y) const {
  tensor::Tensor out = y;
  for (double& v : out.data()) v = denormalize(c, v);
  return out;
}

void to_json(nlohmann::json& j, const Normalizer& n) {
  auto mm = [](const MinMax& m) { return nlohmann::json{{"kind", "minmax"}, {"min", m.min}, {"max", m.max}}; };
  j = {{"fitted", n.fitted_},
       {"ext", mm(n.ext_)},
       {"inf", mm(n.inf_)},
       {"ql", {{"kind", "log1p"}}},
       {"tt", mm(n.tt_)},
       {"stp", mm(n.stp_)}};
}

void from_json(const nlohmann::json& j, Normalizer& n) {
  auto mm = [&](const char* key) { return MinMax{j.at(key).at("min").get<double>(), j.at(key).at("max").get<double>()}; };
  n.fitted_ = j.at("fitted").get<bool>();
  n.ext_ = mm("ext");
  n.inf_ = mm("inf");
  n.tt_ = mm("tt");
  n.stp_ = mm("stp");
}

}  // namespace mtdt

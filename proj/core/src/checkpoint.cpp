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

#include "mtdt/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mtdt/error.hpp"

namespace mtdt::model {

namespace {

constexpr std::size_t kMagicLength = sizeof(kCheckpointMagic) - 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffU));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + b])) << (8 * b);
  return v;
}

std::string payload(const Parameters& params) {
  std::string out;
  out.reserve(params.scalar_count() * 8);
  for (const auto& [name, t] : params.items())
    for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

nlohmann::json header(const Checkpoint& c) {
  auto params = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : c.params.items()) {
    params.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size();
  }
  return {{"format", 1},
          {"config", c.config},
          {"normalizer", c.norm},
          {"hyperparameters", c.hyperparameters},
          {"topologies", c.topologies},
          {"params", params}};
}

std::string fnv1a(const std::string& a, const std::string& b) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const std::string* s : {&a, &b})
    for (unsigned char ch : *s) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string Checkpoint::id() const { return fnv1a(header(*this).dump(), payload(params)); }

const sim::IntersectionTopology& Checkpoint::topology(const std::string& isc) const {
  for (const auto& t : topologies)
    if (t.id == isc) return t;
  throw ConfigError("checkpoint has no topology '" + isc + "'");
}

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  nlohmann::json h = header(c);
  const std::string body = payload(c.params);
  h["id"] = fnv1a(h.dump(), body);
  const std::string text = h.dump();
  std::string len;
  put_u64(len, text.size());
  out.write(kCheckpointMagic, static_cast<std::streamsize>(kMagicLength));
  out << len << text << body;
  if (!out) throw ConfigError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < kMagicLength + 8 || data.compare(0, kMagicLength, kCheckpointMagic) != 0)
    throw ConfigError("not a checkpoint (bad magic)");
  const std::uint64_t len = get_u64(data, kMagicLength);
  const std::size_t body_at = kMagicLength + 8 + len;
  if (len > data.size() || body_at > data.size()) throw ConfigError("checkpoint header is truncated");

  nlohmann::json h;
  try {
    h = nlohmann::json::parse(data.substr(kMagicLength + 8, len));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint header is not JSON: ") + e.what());
  }
  try {
    if (h.at("format").get<int>() != 1) throw ConfigError("unsupported checkpoint format");
    Checkpoint c;
    c.config = h.at("config").get<ModelConfig>();
    c.norm = h.at("normalizer").get<Normalizer>();
    c.hyperparameters = h.at("hyperparameters");
    c.topologies = sim::topologies_from_json(h.at("topologies"));

    const Parameters expected = init_parameters(c.config, 0);
    const auto& entries = h.at("params");
    if (entries.size() != expected.items().size())
      throw ConfigError("checkpoint has " + std::to_string(entries.size()) + " parameters, config expects " +
                        std::to_string(expected.items().size()));
    const std::string body = data.substr(body_at);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& [name, ref] = expected.items()[k];
      const auto shape = entries[k].at("shape").get<tensor::Shape>();
      if (entries[k].at("name").get<std::string>() != name || shape != ref.shape())
        throw ConfigError("checkpoint parameter " + std::to_string(k) + " does not match the model config (" + name +
                          ")");
      if (entries[k].at("offset").get<std::size_t>() != offset) throw ConfigError("checkpoint offsets are not contiguous");
      if ((offset + ref.size()) * 8 > body.size()) throw ConfigError("checkpoint payload is truncated");
      Tensor t(shape);
      for (std::size_t e = 0; e < t.size(); ++e) t[e] = std::bit_cast<double>(get_u64(body, (offset + e) * 8));
      c.params.add(name, std::move(t));
      offset += ref.size();
    }
    if (offset * 8 != body.size()) throw ConfigError("checkpoint payload has trailing bytes");
    const std::string stored = h.at("id").get<std::string>();
    if (c.id() != stored) throw ConfigError("checkpoint id mismatch (file is corrupt)");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint header: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  write_checkpoint(out, c);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  return read_checkpoint(in);
}

nlohmann::json checkpoint_info(const Checkpoint& c) {
  auto shapes = nlohmann::json::object();
  for (const auto& [name, t] : c.params.items()) shapes[name] = t.shape();
  auto topologies = nlohmann::json::array();
  for (const auto& t : c.topologies) topologies.push_back(t.id);
  return {{"checkpoint_id", c.id()},
          {"variant", to_string(c.config.variant)},
          {"config", c.config},
          {"parameters", c.params.scalar_count()},
          {"shapes", shapes},
          {"normalizer", c.norm},
          {"hyperparameters", c.hyperparameters},
          {"topologies", topologies},
          {"outputs", {{"ext", {16, c.config.window}},
                       {"inf", {12, c.config.window}},
                       {"ql", {8, c.config.window}},
                       {"tt", {8, c.config.tt_bins}}}}};
}

}  // namespace mtdt::model

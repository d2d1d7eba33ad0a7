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

#include "mtdt/sim/topology.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "mtdt/error.hpp"

namespace mtdt::sim {

using nlohmann::json;

std::string to_string(Approach a) {
  static const char* names[] = {"N", "E", "S", "W"};
  return names[static_cast<int>(a)];
}

std::string to_string(Movement m) {
  static const char* names[] = {"left", "through", "right"};
  return names[static_cast<int>(m)];
}

Approach approach_from_string(const std::string& s) {
  if (s == "N") return Approach::North;
  if (s == "E") return Approach::East;
  if (s == "S") return Approach::South;
  if (s == "W") return Approach::West;
  throw ConfigError("unknown approach '" + s + "' (expected N, E, S or W)");
}

Movement movement_from_string(const std::string& s) {
  if (s == "left") return Movement::Left;
  if (s == "through") return Movement::Through;
  if (s == "right") return Movement::Right;
  throw ConfigError("unknown movement '" + s + "'");
}

int through_phase(Approach a) {
  static const int phase[] = {4, 6, 8, 2};
  return phase[static_cast<int>(a)];
}

int left_phase(Approach a) {
  static const int phase[] = {7, 1, 3, 5};
  return phase[static_cast<int>(a)];
}

int phase_for(Approach a, Movement m) { return m == Movement::Left ? left_phase(a) : through_phase(a); }

Approach receiving_leg(Approach from, Movement m) {
  const int a = static_cast<int>(from);
  switch (m) {
    case Movement::Left:
      return static_cast<Approach>((a + 1) % 4);
    case Movement::Through:
      return static_cast<Approach>((a + 2) % 4);
    case Movement::Right:
      return static_cast<Approach>((a + 3) % 4);
  }
  return from;
}

const StopLane* IntersectionTopology::stop_lane(int slot) const {
  for (const auto& l : stop_lanes)
    if (l.slot == slot) return &l;
  return nullptr;
}

const InflowLane& IntersectionTopology::inflow_lane(int slot) const { return inflow_lanes.at(static_cast<std::size_t>(slot)); }

const ExitLane& IntersectionTopology::exit_lane(int slot) const { return exit_lanes.at(static_cast<std::size_t>(slot)); }

const HopGroup& IntersectionTopology::hop_group(int phase) const {
  for (const auto& g : hop_graph)
    if (g.phase == phase) return g;
  throw ConfigError("topology " + id + ": missing hop mapping for phase " + std::to_string(phase));
}

std::vector<int> IntersectionTopology::stop_lanes_for(Approach a, Movement m) const {
  std::vector<int> out;
  for (const auto& l : stop_lanes)
    if (l.approach == a && l.movement == m) out.push_back(l.slot);
  std::sort(out.begin(), out.end());
  return out;
}

bool IntersectionTopology::movement_available(Approach a, Movement m) const {
  return approach_present[static_cast<int>(a)] && !stop_lanes_for(a, m).empty();
}

namespace {

void check(bool ok, const IntersectionTopology& t, const std::string& what) {
  if (!ok) throw ConfigError("topology '" + t.id + "': " + what);
}

}  // namespace

void validate(const IntersectionTopology& t) {
  check(!t.id.empty(), t, "empty intersection id");
  check(t.stop_lanes.size() <= kStopLanes, t, "more than 48 stop lanes");
  check(t.free_speed > 0.0 && t.vehicle_length > 0.0, t, "free_speed and vehicle_length must be positive");
  check(t.junction_time_through >= 1 && t.junction_time_left >= 1, t, "junction times must be >= 1 s");

  std::set<int> stop_slots;
  for (const auto& l : t.stop_lanes) {
    check(l.slot >= 0 && l.slot < static_cast<int>(kStopLanes), t, "stop lane slot out of range");
    check(stop_slots.insert(l.slot).second, t, "duplicate stop lane slot " + std::to_string(l.slot));
    check(l.slot / static_cast<int>(kStopSlotsPerApproach) == static_cast<int>(l.approach), t,
          "stop lane slot " + std::to_string(l.slot) + " outside its approach block");
    check(l.phase == phase_for(l.approach, l.movement), t,
          "stop lane " + std::to_string(l.slot) + " has phase " + std::to_string(l.phase) + " inconsistent with movement");
    check(l.length > 0.0, t, "stop lane length must be positive");
    check(t.approach_present[static_cast<int>(l.approach)], t, "stop lane on absent approach");
  }

  check(t.inflow_lanes.size() == kInflowLanes, t, "inflow lane table must list all 12 slots");
  for (std::size_t i = 0; i < t.inflow_lanes.size(); ++i) {
    const auto& l = t.inflow_lanes[i];
    check(l.slot == static_cast<int>(i), t, "inflow lanes must be listed in slot order");
    check(l.slot / static_cast<int>(kInflowSlotsPerApproach) == static_cast<int>(l.approach), t,
          "inflow slot outside its approach block");
    check(l.position == l.slot % static_cast<int>(kInflowSlotsPerApproach), t, "inflow position must equal slot % 3");
    check(l.phase >= 1 && l.phase <= 8, t, "inflow phase out of range");
    check(!l.present || l.length > 0.0, t, "inflow lane length must be positive");
  }
  check(t.exit_lanes.size() == kExitLanes, t, "exit lane table must list all 16 slots");
  for (std::size_t i = 0; i < t.exit_lanes.size(); ++i) {
    const auto& l = t.exit_lanes[i];
    check(l.slot == static_cast<int>(i), t, "exit lanes must be listed in slot order");
    check(l.slot / static_cast<int>(kExitSlotsPerLeg) == static_cast<int>(l.leg), t, "exit slot outside its leg block");
    check(l.phase >= 1 && l.phase <= 8, t, "exit phase out of range");
  }

  for (int p = 1; p <= 8; ++p) {
    const HopGroup& g = t.hop_group(p);
    double one = 0.0, two = 0.0;
    for (int s : g.one_hop) {
      const StopLane* l = t.stop_lane(s);
      check(l != nullptr, t, "hop graph references absent stop lane " + std::to_string(s));
      check(l->phase == p, t, "hop graph puts stop lane " + std::to_string(s) + " in phase " + std::to_string(p));
      one = std::max(one, l->length);
    }
    for (int s : g.two_hop) {
      check(s >= 0 && s < static_cast<int>(kInflowLanes) && t.inflow_lane(s).present, t,
            "hop graph references absent inflow lane " + std::to_string(s));
      two = std::max(two, t.inflow_lane(s).length);
    }
    check(is_through_phase(p) || g.two_hop.size() <= 1, t, "left phases take only the left-most 2-hop lane");
    check(one + two <= kMaxProximityLength, t, "1-hop + 2-hop length exceeds 1200 m");
  }

  auto check_edges = [&](const std::vector<std::pair<int, int>>& edges, std::size_t targets, std::size_t expected,
                         const char* name) {
    check(edges.size() == expected, t,
          std::string(name) + " template has " + std::to_string(edges.size()) + " edges, expected " +
              std::to_string(expected));
    std::vector<int> in_degree(targets, 0);
    for (auto [src, dst] : edges) {
      check(src >= 0 && src < static_cast<int>(kStopLanes), t, std::string(name) + " edge source out of range");
      check(dst >= 0 && dst < static_cast<int>(targets), t, std::string(name) + " edge target out of range");
      ++in_degree[static_cast<std::size_t>(dst)];
    }
    for (std::size_t i = 0; i < targets; ++i)
      check(in_degree[i] > 0, t, std::string(name) + " target " + std::to_string(i) + " has no incoming edge");
  };
  check_edges(t.exit_edges, kExitLanes, t.expected_exit_edges, "exit");
  check_edges(t.inflow_edges, kInflowLanes, t.expected_inflow_edges, "inflow");

  check(t.tmc.size > 0, t, "tmc size must be positive");
  for (std::size_t a = 0; a < kApproaches; ++a) {
    check(t.tmc.approach_row[a] >= 0 && t.tmc.approach_row[a] < static_cast<int>(t.tmc.size), t, "tmc row out of range");
    for (const auto& cols : t.tmc.movement_columns[a])
      for (int c : cols) check(c >= 0 && c < static_cast<int>(t.tmc.size), t, "tmc column out of range");
  }
}

// ---------------------------------------------------------------------------
// Standard family

namespace {

// Slot offsets inside an approach block.
constexpr int kL1 = 0, kL2 = 1, kT1 = 2, kT2 = 3, kT3 = 4, kR = 5;

bool is_major(int a) { return a == static_cast<int>(Approach::East) || a == static_cast<int>(Approach::West); }

int stop_slot(int approach, int offset) { return approach * static_cast<int>(kStopSlotsPerApproach) + offset; }

}  // namespace

IntersectionTopology make_standard_topology(const std::string& id, const std::array<ApproachLayout, kApproaches>& layout,
                                            double free_speed) {
  IntersectionTopology t;
  t.id = id;
  t.free_speed = free_speed;
  for (std::size_t a = 0; a < kApproaches; ++a) t.approach_present[a] = layout[a].present;

  auto leg_exists = [&](Approach from, Movement m) {
    return t.approach_present[static_cast<int>(receiving_leg(from, m))];
  };

  for (int a = 0; a < 4; ++a) {
    const ApproachLayout& L = layout[static_cast<std::size_t>(a)];
    if (!L.present) continue;
    const auto ap = static_cast<Approach>(a);
    auto add = [&](int offset, Movement m) {
      if (!leg_exists(ap, m)) return;
      t.stop_lanes.push_back({stop_slot(a, offset), ap, m, phase_for(ap, m), L.one_hop_length});
    };
    const int lefts = std::min(L.left_lanes, is_major(a) ? 2 : 1);
    if (lefts >= 1) add(kL1, Movement::Left);
    if (lefts >= 2) add(kL2, Movement::Left);
    const int throughs = std::min(L.through_lanes, 3);
    for (int k = 0; k < throughs; ++k) add(kT1 + k, Movement::Through);
    if (L.right_lane) add(kR, Movement::Right);
  }

  for (int s = 0; s < static_cast<int>(kInflowLanes); ++s) {
    const int a = s / static_cast<int>(kInflowSlotsPerApproach);
    const auto ap = static_cast<Approach>(a);
    const int pos = s % static_cast<int>(kInflowSlotsPerApproach);
    t.inflow_lanes.push_back({s, ap, pos, pos == 0 ? left_phase(ap) : through_phase(ap),
                              layout[static_cast<std::size_t>(a)].two_hop_length, t.approach_present[a]});
  }

  for (int d = 0; d < 4; ++d) {
    const auto feeds_left = static_cast<Approach>((d + 3) % 4);
    const auto feeds_through = static_cast<Approach>((d + 2) % 4);
    for (int k = 0; k < static_cast<int>(kExitSlotsPerLeg); ++k) {
      const int slot = d * static_cast<int>(kExitSlotsPerLeg) + k;
      t.exit_lanes.push_back(
          {slot, static_cast<Approach>(d), k == 0 ? left_phase(feeds_left) : through_phase(feeds_through), t.approach_present[d]});
    }
  }

  // Common connectivity, independent of which lanes are present.
  for (int d = 0; d < 4; ++d) {
    const int al = (d + 3) % 4, at = (d + 2) % 4, ar = (d + 1) % 4;
    const int base = d * static_cast<int>(kExitSlotsPerLeg);
    t.exit_edges.emplace_back(stop_slot(al, kL1), base + 0);
    if (is_major(al)) t.exit_edges.emplace_back(stop_slot(al, kL2), base + 1);
    t.exit_edges.emplace_back(stop_slot(at, kT1), base + 1);
    t.exit_edges.emplace_back(stop_slot(at, kT2), base + 2);
    t.exit_edges.emplace_back(stop_slot(at, kT3), base + 3);
    t.exit_edges.emplace_back(stop_slot(ar, kR), base + 3);
  }
  for (int a = 0; a < 4; ++a)
    for (int k = 0; k < static_cast<int>(kInflowSlotsPerApproach); ++k)
      for (int off = kL1; off <= kR; ++off)
        t.inflow_edges.emplace_back(stop_slot(a, off), a * static_cast<int>(kInflowSlotsPerApproach) + k);

  for (int p = 1; p <= 8; ++p) t.hop_graph.push_back({p, {}, {}});
  for (const auto& l : t.stop_lanes) t.hop_graph[static_cast<std::size_t>(l.phase - 1)].one_hop.push_back(l.slot);
  for (int a = 0; a < 4; ++a) {
    if (!t.approach_present[a]) continue;
    const auto ap = static_cast<Approach>(a);
    auto& thr = t.hop_graph[static_cast<std::size_t>(through_phase(ap) - 1)];
    auto& left = t.hop_graph[static_cast<std::size_t>(left_phase(ap) - 1)];
    if (!thr.one_hop.empty())
      for (int k = 0; k < static_cast<int>(kInflowSlotsPerApproach); ++k)
        thr.two_hop.push_back(a * static_cast<int>(kInflowSlotsPerApproach) + k);
    if (!left.one_hop.empty()) left.two_hop.push_back(a * static_cast<int>(kInflowSlotsPerApproach));
  }

  t.tmc.size = 35;
  for (int a = 0; a < 4; ++a) {
    t.tmc.approach_row[static_cast<std::size_t>(a)] = a;
    for (int m = 0; m < 3; ++m)
      t.tmc.movement_columns[static_cast<std::size_t>(a)][static_cast<std::size_t>(m)] = {4 + 6 * a + 2 * m,
                                                                                           5 + 6 * a + 2 * m};
  }
  validate(t);
  return t;
}

std::vector<IntersectionTopology> standard_topology_set() {
  auto lay = [](bool present, int left, int through, bool right, double one, double two) {
    return ApproachLayout{present, left, through, right, one, two};
  };
  std::vector<IntersectionTopology> out;
  // Order N, E, S, W.
  out.push_back(make_standard_topology(
      "I1", {lay(true, 1, 2, true, 180, 320), lay(true, 2, 3, true, 240, 380), lay(true, 1, 2, true, 180, 320),
             lay(true, 2, 3, true, 240, 380)},
      15.3));
  out.push_back(make_standard_topology(
      "I2", {lay(true, 1, 1, true, 150, 280), lay(true, 1, 2, true, 220, 360), lay(true, 1, 1, true, 150, 280),
             lay(true, 1, 2, true, 220, 360)},
      13.9));
  out.push_back(make_standard_topology(
      "I3", {lay(true, 1, 2, true, 160, 300), lay(true, 2, 2, true, 260, 420), lay(false, 0, 0, false, 0, 0),
             lay(true, 2, 2, true, 260, 420)},
      13.9));
  out.push_back(make_standard_topology(
      "I4", {lay(true, 1, 2, false, 200, 340), lay(true, 2, 2, true, 200, 340), lay(true, 1, 2, false, 200, 340),
             lay(true, 2, 2, true, 200, 340)},
      16.7));
  out.push_back(make_standard_topology(
      "I5", {lay(true, 1, 1, true, 120, 200), lay(true, 1, 2, true, 140, 220), lay(true, 1, 1, true, 120, 200),
             lay(true, 1, 2, true, 140, 220)},
      11.1));
  out.push_back(make_standard_topology(
      "I6", {lay(false, 0, 0, false, 0, 0), lay(true, 1, 3, true, 240, 400), lay(true, 1, 2, true, 170, 300),
             lay(true, 1, 3, true, 240, 400)},
      15.3));
  out.push_back(make_standard_topology(
      "I7", {lay(true, 1, 2, true, 300, 500), lay(true, 2, 3, true, 320, 520), lay(true, 1, 2, true, 300, 500),
             lay(true, 2, 3, true, 320, 520)},
      16.7));
  out.push_back(make_standard_topology(
      "I8", {lay(true, 1, 1, true, 140, 260), lay(true, 2, 2, true, 210, 330), lay(true, 1, 2, true, 190, 310),
             lay(true, 1, 3, true, 230, 350)},
      13.9));
  return out;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const IntersectionTopology& t) {
  j = json::object();
  j["id"] = t.id;
  j["approaches"] = json::array();
  for (std::size_t a = 0; a < kApproaches; ++a)
    if (t.approach_present[a]) j["approaches"].push_back(to_string(static_cast<Approach>(a)));
  for (const auto& l : t.stop_lanes)
    j["stop_lanes"].push_back({{"slot", l.slot},
                               {"approach", to_string(l.approach)},
                               {"movement", to_string(l.movement)},
                               {"phase", l.phase},
                               {"length", l.length}});
  for (const auto& l : t.inflow_lanes)
    j["inflow_lanes"].push_back({{"slot", l.slot},
                                 {"approach", to_string(l.approach)},
                                 {"position", l.position},
                                 {"phase", l.phase},
                                 {"length", l.length},
                                 {"present", l.present}});
  for (const auto& l : t.exit_lanes)
    j["exit_lanes"].push_back({{"slot", l.slot}, {"leg", to_string(l.leg)}, {"phase", l.phase}, {"present", l.present}});
  for (const auto& g : t.hop_graph)
    j["hop_graph"].push_back({{"phase", g.phase}, {"one_hop", g.one_hop}, {"two_hop", g.two_hop}});
  auto edges = [](const std::vector<std::pair<int, int>>& es) {
    json arr = json::array();
    for (auto [s, d] : es) arr.push_back({s, d});
    return arr;
  };
  j["exit_edges"] = edges(t.exit_edges);
  j["inflow_edges"] = edges(t.inflow_edges);
  j["expected_exit_edges"] = t.expected_exit_edges;
  j["expected_inflow_edges"] = t.expected_inflow_edges;
  json cols = json::object();
  for (std::size_t a = 0; a < kApproaches; ++a) {
    json m = json::object();
    for (std::size_t k = 0; k < 3; ++k) m[to_string(static_cast<Movement>(k))] = t.tmc.movement_columns[a][k];
    cols[to_string(static_cast<Approach>(a))] = m;
  }
  j["tmc"] = {{"size", t.tmc.size}, {"approach_rows", t.tmc.approach_row}, {"movement_columns", cols}};
  j["free_speed"] = t.free_speed;
  j["vehicle_length"] = t.vehicle_length;
  j["junction_time_through"] = t.junction_time_through;
  j["junction_time_left"] = t.junction_time_left;
}

void from_json(const json& j, IntersectionTopology& t) {
  try {
    IntersectionTopology out;
    out.id = j.at("id").get<std::string>();
    out.approach_present = {false, false, false, false};
    for (const auto& a : j.at("approaches")) out.approach_present[static_cast<int>(approach_from_string(a))] = true;
    for (const auto& l : j.value("stop_lanes", json::array()))
      out.stop_lanes.push_back({l.at("slot").get<int>(), approach_from_string(l.at("approach")),
                                movement_from_string(l.at("movement")), l.at("phase").get<int>(),
                                l.at("length").get<double>()});
    for (const auto& l : j.at("inflow_lanes"))
      out.inflow_lanes.push_back({l.at("slot").get<int>(), approach_from_string(l.at("approach")),
                                  l.at("position").get<int>(), l.at("phase").get<int>(), l.at("length").get<double>(),
                                  l.value("present", true)});
    for (const auto& l : j.at("exit_lanes"))
      out.exit_lanes.push_back({l.at("slot").get<int>(), approach_from_string(l.at("leg")), l.at("phase").get<int>(),
                                l.value("present", true)});
    for (const auto& g : j.at("hop_graph"))
      out.hop_graph.push_back({g.at("phase").get<int>(), g.at("one_hop").get<std::vector<int>>(),
                               g.at("two_hop").get<std::vector<int>>()});
    for (const auto& e : j.at("exit_edges")) out.exit_edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    for (const auto& e : j.at("inflow_edges")) out.inflow_edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    out.expected_exit_edges = j.value("expected_exit_edges", std::size_t{22});
    out.expected_inflow_edges = j.value("expected_inflow_edges", std::size_t{72});
    const json& tmc = j.at("tmc");
    out.tmc.size = tmc.at("size").get<std::size_t>();
    out.tmc.approach_row = tmc.at("approach_rows").get<std::array<int, kApproaches>>();
    for (std::size_t a = 0; a < kApproaches; ++a) {
      const json& m = tmc.at("movement_columns").at(to_string(static_cast<Approach>(a)));
      for (std::size_t k = 0; k < 3; ++k)
        out.tmc.movement_columns[a][k] = m.at(to_string(static_cast<Movement>(k))).get<std::vector<int>>();
    }
    out.free_speed = j.value("free_speed", 13.9);
    out.vehicle_length = j.value("vehicle_length", 5.0);
    out.junction_time_through = j.value("junction_time_through", 2);
    out.junction_time_left = j.value("junction_time_left", 3);
    validate(out);
    t = std::move(out);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed topology JSON: ") + e.what());
  }
}

std::vector<IntersectionTopology> topologies_from_json(const json& j) {
  const json* list = &j;
  if (j.is_object() && j.contains("topologies")) list = &j.at("topologies");
  std::vector<IntersectionTopology> out;
  if (list->is_array()) {
    for (const auto& item : *list) out.push_back(item.get<IntersectionTopology>());
  } else {
    out.push_back(list->get<IntersectionTopology>());
  }
  return out;
}

std::vector<IntersectionTopology> load_topologies(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open topology file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("topology file " + path + ": " + e.what());
  }
  return topologies_from_json(j);
}

void save_topologies(const std::string& path, const std::vector<IntersectionTopology>& topologies) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write topology file " + path);
  out << json{{"topologies", topologies}}.dump(1) << '\n';
}

}  // namespace mtdt::sim

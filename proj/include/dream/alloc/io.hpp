#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dream/alloc/assign.hpp"
#include "dream/sim/world_io.hpp"

namespace dream::alloc {

using nlohmann::json;

inline json to_json(const ScenarioState& s) {
  json j;
  j["width"] = s.width;
  j["height"] = s.height;
  j["robots"] = json::array();
  j["batteries"] = json::array();
  for (const auto& r : s.robots) {
    j["robots"].push_back(sim::to_json(r.pose));
    j["batteries"].push_back(r.battery);
  }
  j["goals"] = json::array();
  for (const auto& g : s.goals) j["goals"].push_back(sim::to_json(g));
  j["homes"] = json::array();
  for (const auto& h : s.homes) j["homes"].push_back(sim::to_json(h));
  if (!s.obstacles.empty()) {
    j["obstacles"] = json::array();
    for (const auto& o : s.obstacles) j["obstacles"].push_back(sim::to_json(o));
  }
  return j;
}

inline ScenarioState scenario_from_json(const json& j) {
  ScenarioState s;
  try {
    s.width = j.value("width", 10.0);
    s.height = j.value("height", 10.0);
    const auto& robots = j.at("robots");
    const auto& batteries = j.at("batteries");
    if (robots.size() != batteries.size()) throw config_error("scenario: robots and batteries differ in length");
    for (std::size_t i = 0; i < robots.size(); ++i) {
      s.robots.push_back({sim::pose_from_json(robots[i]), batteries[i].get<double>()});
    }
    for (const auto& g : j.at("goals")) s.goals.push_back(sim::point_from_json(g));
    for (const auto& h : j.at("homes")) s.homes.push_back(sim::point_from_json(h));
    if (j.contains("obstacles")) {
      for (const auto& o : j.at("obstacles")) s.obstacles.push_back(sim::obstacle_from_json(o));
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("malformed scenario: ") + e.what());
  }
  if (s.width <= 0.0 || s.height <= 0.0) throw config_error("scenario: width/height must be positive");
  s.validate();
  return s;
}

inline json to_json(const Assignment& a) {
  return {{"goals", a.goal},           {"homes", a.home}, {"energies", a.energy},
          {"total_energy", a.total_energy}, {"stranded", a.stranded}, {"cost", a.cost}};
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<ScenarioState>& scenarios) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write " + path.string());
  for (const auto& s : scenarios) out << to_json(s).dump() << '\n';
}

inline std::vector<ScenarioState> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read dataset " + path.string());
  std::vector<ScenarioState> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(scenario_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw config_error(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<ScenarioState> generate_dataset(std::uint64_t seed, std::size_t count,
                                                   const ScenarioSampler& sampler = {}) {
  std::vector<ScenarioState> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_scenario(derive_seed(seed, 100, i), sampler));
  return out;
}

}  // namespace dream::alloc

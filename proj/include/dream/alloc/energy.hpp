#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dream/core/error.hpp"
#include "dream/core/random.hpp"
#include "dream/sim/curriculum.hpp"
#include "dream/sim/geometry.hpp"

namespace dream::alloc {

using sim::Point2D;
using sim::Pose2D;

struct EnergyParams {
  double battery_straight = 10.0;
  double turn_multiplier = 1.25;  // battery_turn = turn_multiplier * battery_straight
  double stranded_penalty = 1e6;

  double battery_turn() const { return turn_multiplier * battery_straight; }
};

struct RobotState {
  Pose2D pose;
  double battery = 100.0;  // energy units available

  friend bool operator==(const RobotState&, const RobotState&) = default;
};

struct ScenarioState {
  double width = 10.0;
  double height = 10.0;
  std::vector<RobotState> robots;
  std::vector<Point2D> goals;
  std::vector<Point2D> homes;
  std::vector<sim::Obstacle> obstacles;  // only used by simulated missions

  std::size_t robot_count() const { return robots.size(); }
  double diagonal() const { return std::hypot(width, height); }

  void validate() const {
    if (robots.empty()) throw config_error("scenario: no robots");
    if (goals.size() != robots.size() || homes.size() != robots.size()) {
      throw config_error("scenario: robots, goals and homes must have equal counts");
    }
    for (const auto& r : robots) {
      if (!std::isfinite(r.battery) || r.battery < 0.0) throw config_error("scenario: battery must be finite and >= 0");
    }
  }

  friend bool operator==(const ScenarioState&, const ScenarioState&) = default;
};

struct EnergyTerms {
  double distance = 0.0;  // d_target, normalised by d_norm
  double turn = 0.0;      // theta_target, |heading change| / pi in [0, 1]
};

// Leg from a pose to a point. A zero-length leg needs no turn.
inline EnergyTerms energy_terms(const Pose2D& from, Point2D to, double d_norm) {
  if (!(d_norm > 0.0)) throw usage_error("energy_pair: d_norm must be > 0");
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  const double d = std::hypot(dx, dy);
  EnergyTerms t;
  t.distance = d / d_norm;
  t.turn = d > 0.0 ? std::abs(sim::normalize_angle(std::atan2(dy, dx) - from.theta)) / sim::kPi : 0.0;
  return t;
}

inline double energy_from_terms(const EnergyTerms& t, const EnergyParams& p = {}) {
  return t.distance * p.battery_straight + t.turn * p.battery_turn();
}

inline double energy_pair(const Pose2D& from, Point2D to, double d_norm, const EnergyParams& p = {}) {
  return energy_from_terms(energy_terms(from, to, d_norm), p);
}

// Heading on arrival at `to` after driving straight from `from`; unchanged for a zero-length leg.
inline double arrival_heading(const Pose2D& from, Point2D to) {
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  if (dx == 0.0 && dy == 0.0) return from.theta;
  return std::atan2(dy, dx);
}

// goal(i, j): robot i to goal j. home(i, j, k): from goal j (arrival heading of robot i) to home k.
struct EnergyMatrix {
  std::size_t robots = 0;
  std::size_t goals = 0;
  std::size_t homes = 0;
  double d_norm = 1.0;
  std::vector<double> goal_leg;  // R x G
  std::vector<double> home_leg;  // R x G x H

  double goal(std::size_t i, std::size_t j) const { return goal_leg[i * goals + j]; }
  double home(std::size_t i, std::size_t j, std::size_t k) const { return home_leg[(i * goals + j) * homes + k]; }
  double required(std::size_t i, std::size_t j, std::size_t k) const { return goal(i, j) + home(i, j, k); }
};

inline EnergyMatrix build_energy_matrices(const ScenarioState& s, const EnergyParams& p = {}) {
  EnergyMatrix e;
  e.robots = s.robots.size();
  e.goals = s.goals.size();
  e.homes = s.homes.size();
  e.d_norm = s.diagonal();
  e.goal_leg.resize(e.robots * e.goals);
  e.home_leg.resize(e.robots * e.goals * e.homes);
  for (std::size_t i = 0; i < e.robots; ++i) {
    const Pose2D& start = s.robots[i].pose;
    for (std::size_t j = 0; j < e.goals; ++j) {
      e.goal_leg[i * e.goals + j] = energy_pair(start, s.goals[j], e.d_norm, p);
      const Pose2D at_goal{s.goals[j].x, s.goals[j].y, arrival_heading(start, s.goals[j])};
      for (std::size_t k = 0; k < e.homes; ++k) {
        e.home_leg[(i * e.goals + j) * e.homes + k] = energy_pair(at_goal, s.homes[k], e.d_norm, p);
      }
    }
  }
  return e;
}

inline std::vector<double> batteries_of(const ScenarioState& s) {
  std::vector<double> b;
  for (const auto& r : s.robots) b.push_back(r.battery);
  return b;
}

inline ScenarioState scenario_from_world(const sim::WorldSpec& w, const std::vector<double>& batteries) {
  if (batteries.size() != w.spawns.size()) throw usage_error("scenario_from_world: one battery per spawn required");
  ScenarioState s;
  s.width = w.width;
  s.height = w.height;
  for (std::size_t i = 0; i < w.spawns.size(); ++i) s.robots.push_back({w.spawns[i], batteries[i]});
  s.goals = w.goals;
  s.homes = w.homes;
  s.obstacles = w.obstacles;
  return s;
}

inline sim::WorldSpec world_from_scenario(const ScenarioState& s) {
  sim::WorldSpec w;
  w.width = s.width;
  w.height = s.height;
  w.obstacles = s.obstacles;
  w.goals = s.goals;
  w.homes = s.homes;
  for (const auto& r : s.robots) w.spawns.push_back(r.pose);
  return w;
}

struct ScenarioSampler {
  int robots = 3;
  double battery_min = 20.0;
  double battery_max = 100.0;
  sim::CurriculumLevelSpec level = sim::default_curriculum()[2];
  sim::SimParams sim;
};

// Level-3 world with uniformly drawn batteries; a pure function of (sampler, seed).
inline ScenarioState sample_scenario(std::uint64_t seed, const ScenarioSampler& sampler = {}) {
  const auto world = sim::sample_world(sampler.level, sampler.robots, derive_seed(seed, 101), sampler.sim);
  rng_t rng(derive_seed(seed, 102));
  std::vector<double> batteries;
  for (int i = 0; i < sampler.robots; ++i) batteries.push_back(uniform(rng, sampler.battery_min, sampler.battery_max));
  return scenario_from_world(world, batteries);
}

}  // namespace dream::alloc

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dream/alloc/assign.hpp"
#include "dream/battery/battery.hpp"
#include "dream/sim/environment.hpp"

namespace dream::eval {

using Policy = std::function<sim::Action(const sim::Observation&)>;

// Steers straight at the target; slows down while turning. Reference controller for tests.
inline Policy proportional_policy(const sim::SimParams& p = {}) {
  return [p](const sim::Observation& o) {
    const double w = std::clamp(2.0 * o.theta_goal, -p.omega_max, p.omega_max);
    const double v = p.v_max * std::max(0.0, 1.0 - std::abs(o.theta_goal) / (sim::kPi / 2.0));
    return sim::Action{v, w};
  };
}

enum class Leg { ToGoal, ToHome, Home, Stranded, Collided, Failed };

inline std::string to_string(Leg l) {
  switch (l) {
    case Leg::ToGoal: return "to_goal";
    case Leg::ToHome: return "to_home";
    case Leg::Home: return "home";
    case Leg::Stranded: return "stranded";
    case Leg::Collided: return "collision";
    case Leg::Failed: return "failed";
  }
  return "?";
}

struct RobotMission {
  double energy = 0.0;  // battery units consumed
  bool goal_reached = false;
  bool home_reached = false;
  bool stranded = false;
  Leg final_state = Leg::ToGoal;
  int steps = 0;
};

struct MissionResult {
  std::vector<RobotMission> robots;
  double total_energy = 0.0;
};

struct MissionConfig {
  sim::SimParams sim;
  battery::BatteryParams battery;
  int leg_step_budget = 4 * 250;  // steps per leg before the robot is marked failed
};

// All robots step in lockstep rounds (fixed robot order). Each robot sees the others as lidar
// circles of radius robot_radius. Battery starts at the scenario's units.
inline MissionResult run_mission_simulated(const alloc::ScenarioState& s, const std::vector<int>& goal,
                                           const std::vector<int>& home, const Policy& policy,
                                           const MissionConfig& cfg = {},
                                           std::vector<sim::TrajectoryRow>* trajectory = nullptr) {
  s.validate();
  const std::size_t n = s.robots.size();
  if (!alloc::is_permutation_of_range(goal, s.goals.size()) || !alloc::is_permutation_of_range(home, s.homes.size()) ||
      goal.size() != n) {
    throw usage_error("run_mission_simulated: goal/home must be permutations with one entry per robot");
  }
  if (!policy) throw config_error("run_mission_simulated: no policy");
  const auto world = alloc::world_from_scenario(s);
  const auto& p = cfg.sim;

  struct Live {
    sim::Pose2D pose;
    double v = 0.0, omega = 0.0;
    battery::BatteryState bat;
    Leg leg = Leg::ToGoal;
    int leg_steps = 0;
    double drained0 = 0.0;
  };
  std::vector<Live> live(n);
  MissionResult res;
  res.robots.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    live[i].pose = s.robots[i].pose;
    live[i].bat = battery::BatteryState::with_charge(s.robots[i].battery, cfg.battery);
    live[i].drained0 = live[i].bat.drained;
  }
  auto target = [&](std::size_t i) {
    return live[i].leg == Leg::ToGoal ? s.goals[static_cast<std::size_t>(goal[i])]
                                      : s.homes[static_cast<std::size_t>(home[i])];
  };
  auto active = [](Leg l) { return l == Leg::ToGoal || l == Leg::ToHome; };
  auto dist = [](sim::Point2D a, sim::Point2D b) { return std::hypot(a.x - b.x, a.y - b.y); };
  // Advance through legs whose target is already within the goal threshold.
  auto settle = [&](std::size_t i) {
    while (active(live[i].leg) && dist(live[i].pose.position(), target(i)) < p.goal_threshold) {
      if (live[i].leg == Leg::ToGoal) {
        res.robots[i].goal_reached = true;
        live[i].leg = Leg::ToHome;
      } else {
        res.robots[i].home_reached = true;
        live[i].leg = Leg::Home;
      }
      live[i].leg_steps = 0;
    }
  };
  for (std::size_t i = 0; i < n; ++i) settle(i);

  int round = 0;
  std::vector<sim::CircleObstacle> bodies;
  while (std::any_of(live.begin(), live.end(), [&](const Live& l) { return active(l.leg); })) {
    for (std::size_t i = 0; i < n; ++i) {
      Live& me = live[i];
      if (!active(me.leg)) continue;
      if (me.bat.depleted) {
        me.leg = Leg::Stranded;
        continue;
      }
      if (me.leg_steps >= cfg.leg_step_budget) {
        me.leg = Leg::Failed;
        continue;
      }
      bodies.clear();
      for (std::size_t k = 0; k < n; ++k) {
        if (k != i) bodies.push_back({live[k].pose.x, live[k].pose.y, p.robot_radius});
      }
      const auto obs = sim::build_observation(world, me.pose, target(i), me.v, me.omega, p, bodies);
      const auto act = policy(obs).clamped(p);
      me.pose = sim::step_robot(me.pose, act, p.dt);
      me.v = act.v_cmd;
      me.omega = act.omega_cmd;
      me.bat = battery::consume(me.bat, act.v_cmd, act.omega_cmd, p.dt, cfg.battery);
      ++me.leg_steps;
      ++res.robots[i].steps;
      const auto after = sim::build_observation(world, me.pose, target(i), me.v, me.omega, p, bodies);
      const auto outcome = sim::compute_reward(after, act, p);
      if (outcome.terminal == sim::Terminal::GoalReached) {
        settle(i);
      } else if (outcome.terminal == sim::Terminal::Collision) {
        me.leg = Leg::Collided;
      }
      if (active(me.leg) && me.bat.depleted) me.leg = Leg::Stranded;
      if (trajectory) {
        trajectory->push_back({round, static_cast<int>(i), me.pose, me.v, me.omega, outcome.reward, outcome.terminal});
      }
    }
    ++round;
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = res.robots[i];
    r.energy = live[i].bat.drained - live[i].drained0;
    r.final_state = live[i].leg;
    r.stranded = live[i].leg == Leg::Stranded;
    res.total_energy += r.energy;
  }
  return res;
}

}  // namespace dream::eval

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "dream/alloc/energy.hpp"
#include "dream/eval/gaem.hpp"
#include "dream/gcn/train.hpp"
#include "dream/rtd3/trainer.hpp"
#include "dream/sim/world_io.hpp"

namespace dream::cli {

using json = nlohmann::json;

// Everything a run depends on. Defaults are the library defaults.
struct RunConfig {
  std::uint64_t seed = 0;
  sim::SimParams sim;
  battery::BatteryParams battery;
  std::vector<sim::CurriculumLevelSpec> curriculum = sim::default_curriculum();

  rtd3::Td3Config td3;
  int episodes = 500;
  int start_level = 1;
  long warmup_steps = 1000;
  int checkpoint_interval = 50;
  int success_window = 100;

  std::size_t rcrb_capacity = 100000;
  std::size_t rcrb_min_quota = 1;
  replay::CategoryThresholds thresholds;

  alloc::EnergyParams energy;

  // multi-robot scenario draws (datasets, evaluation environments)
  int robots = 3;
  double battery_min = 20.0;
  double battery_max = 100.0;
  int scenario_level = 3;
  int count = 5000;

  gcn::GcnShape gcn_shape;
  gcn::LossWeights gcn_weights;
  double gcn_lr = 0.005;
  int gcn_epochs = 200;
  int gcn_batch_size = 32;

  int envs = 5;
  int runs = 5;
  std::vector<std::string> allocators{"random", "oracle"};
  std::string mode = "model";
  std::string allocator = "oracle";  // allocate / simulate
  std::string policy = "rtd3";       // rtd3 | reference
  int jobs = 1;
  int leg_step_budget = 1000;

  std::size_t gradcheck_samples = 2000;

  std::string dataset;
  std::string scenario;
  std::string rtd3_checkpoint;
  std::string gcn_checkpoint;
};

// Calls f(dotted_name, field) for every scalar / string-list field. The curriculum list is
// handled separately.
template <typename C, typename F>
void visit_fields(C& c, F&& f) {
  f("seed", c.seed);

  f("sim.goal_threshold", c.sim.goal_threshold);
  f("sim.collision_threshold", c.sim.collision_threshold);
  f("sim.v_max", c.sim.v_max);
  f("sim.omega_max", c.sim.omega_max);
  f("sim.dt", c.sim.dt);
  f("sim.max_range", c.sim.max_range);
  f("sim.max_steps", c.sim.max_steps);
  f("sim.robot_radius", c.sim.robot_radius);
  f("sim.arena_size", c.sim.arena_size);
  f("sim.goal_reward", c.sim.goal_reward);
  f("sim.collision_reward", c.sim.collision_reward);

  f("battery.capacity", c.battery.capacity);
  f("battery.lifetime_s", c.battery.lifetime_s);
  f("battery.turn_multiplier", c.battery.turn_multiplier);
  f("battery.v_max", c.battery.v_max);
  f("battery.omega_max", c.battery.omega_max);

  f("rtd3.gamma", c.td3.gamma);
  f("rtd3.tau", c.td3.tau);
  f("rtd3.explore_sigma", c.td3.explore_sigma);
  f("rtd3.target_noise", c.td3.target_noise);
  f("rtd3.noise_clip", c.td3.noise_clip);
  f("rtd3.lr", c.td3.lr);
  f("rtd3.batch_size", c.td3.batch_size);
  f("rtd3.policy_delay", c.td3.policy_delay);
  f("rtd3.hidden1", c.td3.shape.hidden1);
  f("rtd3.hidden2", c.td3.shape.hidden2);
  f("rtd3.action_hidden", c.td3.shape.action_hidden);
  f("rtd3.fusion_hidden", c.td3.shape.fusion_hidden);
  f("rtd3.actor_dropout", c.td3.shape.actor_dropout);
  f("rtd3.critic_dropout", c.td3.shape.critic_dropout);
  f("rtd3.episodes", c.episodes);
  f("rtd3.start_level", c.start_level);
  f("rtd3.warmup_steps", c.warmup_steps);
  f("rtd3.checkpoint_interval", c.checkpoint_interval);
  f("rtd3.success_window", c.success_window);

  f("rcrb.capacity", c.rcrb_capacity);
  f("rcrb.min_quota", c.rcrb_min_quota);
  f("rcrb.positive_threshold", c.thresholds.positive);
  f("rcrb.negative_threshold", c.thresholds.negative);

  f("energy.battery_straight", c.energy.battery_straight);
  f("energy.turn_multiplier", c.energy.turn_multiplier);
  f("energy.stranded_penalty", c.energy.stranded_penalty);

  f("scenario.robots", c.robots);
  f("scenario.battery_min", c.battery_min);
  f("scenario.battery_max", c.battery_max);
  f("scenario.level", c.scenario_level);
  f("scenario.count", c.count);

  f("gcn.hidden1", c.gcn_shape.hidden1);
  f("gcn.hidden2", c.gcn_shape.hidden2);
  f("gcn.dropout", c.gcn_shape.dropout);
  f("gcn.self_loop", c.gcn_shape.self_loop);
  f("gcn.battery_scale", c.gcn_shape.battery_scale);
  f("gcn.lr", c.gcn_lr);
  f("gcn.epochs", c.gcn_epochs);
  f("gcn.batch_size", c.gcn_batch_size);
  f("gcn.conflict_weight", c.gcn_weights.conflict);
  f("gcn.stranded_weight", c.gcn_weights.stranded);

  f("eval.envs", c.envs);
  f("eval.runs", c.runs);
  f("eval.allocators", c.allocators);
  f("eval.mode", c.mode);
  f("eval.allocator", c.allocator);
  f("eval.policy", c.policy);
  f("eval.jobs", c.jobs);
  f("eval.leg_step_budget", c.leg_step_budget);

  f("gradcheck.samples", c.gradcheck_samples);

  f("paths.dataset", c.dataset);
  f("paths.scenario", c.scenario);
  f("paths.rtd3_checkpoint", c.rtd3_checkpoint);
  f("paths.gcn_checkpoint", c.gcn_checkpoint);
}

inline json::json_pointer pointer_of(const std::string& dotted) {
  std::string p;
  std::stringstream ss(dotted);
  for (std::string part; std::getline(ss, part, '.');) p += "/" + part;
  return json::json_pointer(p);
}

namespace detail {

inline json level_to_json(const sim::CurriculumLevelSpec& l) {
  json obs = json::array();
  for (const auto& o : l.fixed_layout) obs.push_back(sim::to_json(o));
  return {{"id", l.id},
          {"placement", l.placement == sim::Placement::Fixed ? "fixed" : "random"},
          {"fixed_layout", obs},
          {"min_obstacles", l.min_obstacles},
          {"max_obstacles", l.max_obstacles},
          {"min_goal_distance", l.min_goal_distance},
          {"max_goal_distance", l.max_goal_distance},
          {"advance_threshold", l.advance_threshold},
          {"advance_window", l.advance_window},
          {"spawn_clearance", l.spawn_clearance},
          {"goal_clearance", l.goal_clearance}};
}

template <typename T>
bool read_value(const json& j, T& out) {
  if constexpr (std::is_same_v<T, std::string>) {
    if (!j.is_string()) return false;
    out = j.get<std::string>();
  } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
    if (!j.is_array()) return false;
    std::vector<std::string> v;
    for (const auto& e : j) {
      if (!e.is_string()) return false;
      v.push_back(e.get<std::string>());
    }
    out = v;
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!j.is_number()) return false;
    out = j.get<T>();
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!j.is_number_unsigned()) return false;
    out = j.get<T>();
  } else {
    if (!j.is_number_integer()) return false;
    out = j.get<T>();
  }
  return true;
}

template <typename T>
const char* type_name() {
  if constexpr (std::is_same_v<T, std::string>) return "a string";
  else if constexpr (std::is_same_v<T, std::vector<std::string>>) return "an array of strings";
  else if constexpr (std::is_floating_point_v<T>) return "a number";
  else if constexpr (std::is_unsigned_v<T>) return "a non-negative integer";
  else return "an integer";
}

// Dotted names of every leaf in an object tree; arrays and scalars are leaves.
inline void flatten(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string name = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object() && name != "curriculum") {
      flatten(*it, name, out);
    } else {
      out.push_back(name);
    }
  }
}

inline void parse_level(const json& j, const std::string& at, sim::CurriculumLevelSpec& l,
                        std::vector<std::string>& errs) {
  if (!j.is_object()) {
    errs.push_back(at + ": expected an object");
    return;
  }
  static const std::set<std::string> known{"id", "placement", "fixed_layout", "min_obstacles", "max_obstacles",
                                           "min_goal_distance", "max_goal_distance", "advance_threshold",
                                           "advance_window", "spawn_clearance", "goal_clearance"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) errs.push_back(at + "." + it.key() + ": unknown key");
  }
  const auto num = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    using T = std::remove_reference_t<decltype(field)>;
    if (!read_value(j.at(key), field)) errs.push_back(at + "." + key + ": expected " + type_name<T>());
  };
  num("id", l.id);
  num("min_obstacles", l.min_obstacles);
  num("max_obstacles", l.max_obstacles);
  num("min_goal_distance", l.min_goal_distance);
  num("max_goal_distance", l.max_goal_distance);
  num("advance_threshold", l.advance_threshold);
  num("advance_window", l.advance_window);
  num("spawn_clearance", l.spawn_clearance);
  num("goal_clearance", l.goal_clearance);
  if (j.contains("placement")) {
    const auto& p = j.at("placement");
    if (p == "fixed") l.placement = sim::Placement::Fixed;
    else if (p == "random") l.placement = sim::Placement::Random;
    else errs.push_back(at + ".placement: expected \"fixed\" or \"random\"");
  }
  if (j.contains("fixed_layout")) {
    l.fixed_layout.clear();
    const auto& arr = j.at("fixed_layout");
    if (!arr.is_array()) {
      errs.push_back(at + ".fixed_layout: expected an array");
    } else {
      for (std::size_t i = 0; i < arr.size(); ++i) {
        try {
          l.fixed_layout.push_back(sim::obstacle_from_json(arr[i]));
        } catch (const std::exception& e) {
          errs.push_back(at + ".fixed_layout[" + std::to_string(i) + "]: " + e.what());
        }
      }
    }
  }
  if (l.min_obstacles < 0 || l.max_obstacles < l.min_obstacles) errs.push_back(at + ": need 0 <= min_obstacles <= max_obstacles");
  if (!(l.min_goal_distance > 0.0) || l.max_goal_distance < l.min_goal_distance) {
    errs.push_back(at + ": need 0 < min_goal_distance <= max_goal_distance");
  }
  if (!(l.advance_threshold >= 0.0 && l.advance_threshold <= 1.0)) errs.push_back(at + ".advance_threshold: must be in [0, 1]");
  if (l.advance_window < 1) errs.push_back(at + ".advance_window: must be >= 1");
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
  json j = json::object();
  visit_fields(c, [&](const char* name, const auto& field) { j[pointer_of(name)] = field; });
  j["curriculum"] = json::array();
  for (const auto& l : c.curriculum) j["curriculum"].push_back(detail::level_to_json(l));
  return j;
}

// Range and cross-field checks; one message per offending field.
inline std::vector<std::string> check(const RunConfig& c) {
  std::vector<std::string> e;
  const auto need = [&](bool ok, const std::string& msg) {
    if (!ok) e.push_back(msg);
  };
  const auto positive = [&](double v, const char* name) { need(v > 0.0, std::string(name) + ": must be > 0"); };
  const auto at_least = [&](long v, long lo, const char* name) {
    need(v >= lo, std::string(name) + ": must be >= " + std::to_string(lo));
  };
  const auto dropout = [&](double v, const char* name) {
    need(v >= 0.0 && v < 1.0, std::string(name) + ": must be in [0, 1) (got " + json(v).dump() + ")");
  };

  positive(c.sim.goal_threshold, "sim.goal_threshold");
  positive(c.sim.collision_threshold, "sim.collision_threshold");
  positive(c.sim.v_max, "sim.v_max");
  positive(c.sim.omega_max, "sim.omega_max");
  positive(c.sim.dt, "sim.dt");
  positive(c.sim.max_range, "sim.max_range");
  at_least(c.sim.max_steps, 1, "sim.max_steps");
  need(c.sim.robot_radius >= 0.0, "sim.robot_radius: must be >= 0");
  positive(c.sim.arena_size, "sim.arena_size");

  positive(c.battery.capacity, "battery.capacity");
  positive(c.battery.lifetime_s, "battery.lifetime_s");
  need(c.battery.turn_multiplier >= 0.0, "battery.turn_multiplier: must be >= 0");
  positive(c.battery.v_max, "battery.v_max");
  positive(c.battery.omega_max, "battery.omega_max");

  need(c.td3.gamma >= 0.0 && c.td3.gamma <= 1.0, "rtd3.gamma: must be in [0, 1]");
  need(c.td3.tau >= 0.0 && c.td3.tau <= 1.0, "rtd3.tau: must be in [0, 1]");
  need(c.td3.explore_sigma >= 0.0, "rtd3.explore_sigma: must be >= 0");
  need(c.td3.target_noise >= 0.0, "rtd3.target_noise: must be >= 0");
  need(c.td3.noise_clip >= 0.0, "rtd3.noise_clip: must be >= 0");
  positive(c.td3.lr, "rtd3.lr");
  at_least(c.td3.batch_size, 1, "rtd3.batch_size");
  at_least(c.td3.policy_delay, 1, "rtd3.policy_delay");
  at_least(c.td3.shape.hidden1, 1, "rtd3.hidden1");
  at_least(c.td3.shape.hidden2, 1, "rtd3.hidden2");
  at_least(c.td3.shape.action_hidden, 1, "rtd3.action_hidden");
  at_least(c.td3.shape.fusion_hidden, 1, "rtd3.fusion_hidden");
  dropout(c.td3.shape.actor_dropout, "rtd3.actor_dropout");
  dropout(c.td3.shape.critic_dropout, "rtd3.critic_dropout");
  at_least(c.episodes, 0, "rtd3.episodes");
  need(c.start_level >= 1 && c.start_level <= static_cast<int>(c.curriculum.size()),
       "rtd3.start_level: must name a curriculum level (1.." + std::to_string(c.curriculum.size()) + ")");
  at_least(c.warmup_steps, 0, "rtd3.warmup_steps");
  at_least(c.checkpoint_interval, 0, "rtd3.checkpoint_interval");
  at_least(c.success_window, 1, "rtd3.success_window");

  need(c.rcrb_capacity >= 1, "rcrb.capacity: must be >= 1");
  need(c.thresholds.negative < c.thresholds.positive, "rcrb: negative_threshold must be below positive_threshold");

  need(c.energy.battery_straight >= 0.0, "energy.battery_straight: must be >= 0");
  need(c.energy.turn_multiplier >= 0.0, "energy.turn_multiplier: must be >= 0");
  need(c.energy.stranded_penalty >= 0.0, "energy.stranded_penalty: must be >= 0");

  need(c.robots >= 1 && static_cast<std::size_t>(c.robots) <= alloc::kMaxOracleRobots,
       "scenario.robots: must be in [1, " + std::to_string(alloc::kMaxOracleRobots) + "]");
  need(c.battery_min >= 0.0 && c.battery_min <= c.battery_max, "scenario: need 0 <= battery_min <= battery_max");
  need(c.scenario_level >= 1 && c.scenario_level <= static_cast<int>(c.curriculum.size()),
       "scenario.level: must name a curriculum level");
  at_least(c.count, 1, "scenario.count");

  at_least(c.gcn_shape.hidden1, 1, "gcn.hidden1");
  at_least(c.gcn_shape.hidden2, 1, "gcn.hidden2");
  dropout(c.gcn_shape.dropout, "gcn.dropout");
  need(c.gcn_shape.self_loop > 0.0, "gcn.self_loop: must be > 0");
  positive(c.gcn_shape.battery_scale, "gcn.battery_scale");
  positive(c.gcn_lr, "gcn.lr");
  at_least(c.gcn_epochs, 0, "gcn.epochs");
  at_least(c.gcn_batch_size, 1, "gcn.batch_size");
  need(c.gcn_weights.conflict >= 0.0, "gcn.conflict_weight: must be >= 0");
  need(c.gcn_weights.stranded >= 0.0, "gcn.stranded_weight: must be >= 0");

  at_least(c.envs, 1, "eval.envs");
  at_least(c.runs, 1, "eval.runs");
  at_least(c.jobs, 1, "eval.jobs");
  at_least(c.leg_step_budget, 1, "eval.leg_step_budget");
  need(!c.allocators.empty(), "eval.allocators: must list at least one allocator");
  for (const auto& a : c.allocators) {
    need(a == "random" || a == "gcn" || a == "oracle", "eval.allocators: unknown allocator '" + a + "'");
  }
  need(c.allocator == "random" || c.allocator == "gcn" || c.allocator == "oracle",
       "eval.allocator: must be random, gcn or oracle");
  need(c.mode == "model" || c.mode == "simulated", "eval.mode: must be model or simulated");
  need(c.policy == "rtd3" || c.policy == "reference", "eval.policy: must be rtd3 or reference");
  need(c.gradcheck_samples >= 1, "gradcheck.samples: must be >= 1");
  need(!c.curriculum.empty(), "curriculum: must hold at least one level");
  return e;
}

// Parses a config document over the defaults. Unknown keys, wrong types and out-of-range
// values are all collected and thrown together.
inline RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw config_error("config: top level must be a JSON object");
  RunConfig c;
  std::vector<std::string> errs;
  std::set<std::string> known{"curriculum"};
  std::set<std::string> sections;
  visit_fields(c, [&](const char* name, auto&) {
    known.insert(name);
    const std::string n(name);
    if (const auto dot = n.find('.'); dot != std::string::npos) sections.insert(n.substr(0, dot));
  });
  std::vector<std::string> leaves;
  detail::flatten(j, "", leaves);
  for (const auto& leaf : leaves) {
    if (known.count(leaf)) continue;
    errs.push_back(sections.count(leaf) ? leaf + ": expected an object" : leaf + ": unknown key");
  }
  visit_fields(c, [&](const char* name, auto& field) {
    const auto ptr = pointer_of(name);
    if (!j.contains(ptr)) return;
    using T = std::remove_reference_t<decltype(field)>;
    if (!detail::read_value(j.at(ptr), field)) errs.push_back(std::string(name) + ": expected " + detail::type_name<T>());
  });
  if (j.contains("curriculum")) {
    const auto& arr = j.at("curriculum");
    if (!arr.is_array()) {
      errs.push_back("curriculum: expected an array of levels");
    } else {
      const auto defaults = sim::default_curriculum();
      c.curriculum.clear();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        sim::CurriculumLevelSpec l = i < defaults.size() ? defaults[i] : defaults.back();
        l.id = static_cast<int>(i) + 1;
        detail::parse_level(arr[i], "curriculum[" + std::to_string(i) + "]", l, errs);
        c.curriculum.push_back(l);
      }
    }
  }
  // fields with type errors kept their defaults, so the range checks stay meaningful
  for (auto& m : check(c)) errs.push_back(std::move(m));
  if (!errs.empty()) throw config_error(errs);
  return c;
}

inline json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw config_error(p.string() + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw config_error(p.string() + ": malformed JSON (" + e.what() + ")");
  }
}

inline void write_json_file(const std::filesystem::path& p, const json& j) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw config_error(p.string() + ": cannot write");
  out << j.dump(2) << "\n";
}

// Library configs derived from a RunConfig.

inline rtd3::TrainConfig train_config(const RunConfig& c) {
  rtd3::TrainConfig t;
  t.seed = c.seed;
  t.episodes = c.episodes;
  t.td3 = c.td3;
  t.sim = c.sim;
  t.battery = c.battery;
  t.levels = c.curriculum;
  t.start_level = static_cast<std::size_t>(c.start_level - 1);
  t.rcrb_capacity = c.rcrb_capacity;
  t.rcrb_min_quota = c.rcrb_min_quota;
  t.thresholds = c.thresholds;
  t.warmup_steps = c.warmup_steps;
  t.checkpoint_interval = c.checkpoint_interval;
  t.success_window = c.success_window;
  return t;
}

inline alloc::ScenarioSampler scenario_sampler(const RunConfig& c) {
  alloc::ScenarioSampler s;
  s.robots = c.robots;
  s.battery_min = c.battery_min;
  s.battery_max = c.battery_max;
  s.level = c.curriculum[static_cast<std::size_t>(c.scenario_level - 1)];
  s.sim = c.sim;
  return s;
}

inline gcn::GcnTrainConfig gcn_config(const RunConfig& c) {
  gcn::GcnTrainConfig g;
  g.shape = c.gcn_shape;
  g.shape.robots = g.shape.goals = g.shape.homes = c.robots;
  g.weights = c.gcn_weights;
  g.energy = c.energy;
  g.lr = c.gcn_lr;
  g.epochs = c.gcn_epochs;
  g.batch_size = c.gcn_batch_size;
  g.seed = c.seed;
  return g;
}

inline eval::EvalConfig eval_config(const RunConfig& c) {
  eval::EvalConfig e;
  e.allocators.clear();
  for (const auto& a : c.allocators) e.allocators.push_back(eval::allocator_from_string(a));
  e.mode = eval::mode_from_string(c.mode);
  e.runs = c.runs;
  e.seed = c.seed;
  e.jobs = c.jobs;
  e.energy = c.energy;
  e.mission = {c.sim, c.battery, c.leg_step_budget};
  return e;
}

}  // namespace dream::cli

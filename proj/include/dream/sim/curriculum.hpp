#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dream/core/error.hpp"
#include "dream/core/random.hpp"
#include "dream/sim/world.hpp"

namespace dream::sim {

enum class Placement { Fixed, Random };

struct CurriculumLevelSpec {
  int id = 1;
  int min_obstacles = 0;
  int max_obstacles = 0;
  Placement placement = Placement::Fixed;
  std::vector<Obstacle> fixed_layout;  // used when placement == Fixed
  double min_goal_distance = 1.0;
  double max_goal_distance = 3.0;
  double advance_threshold = 0.7;  // trailing success rate needed to move on
  int advance_window = 100;
  double spawn_clearance = 0.8;
  double goal_clearance = 0.6;
};

inline std::vector<Obstacle> level_one_layout() {
  return {
      RectObstacle{2.5, 2.5, 3.5, 3.5},
      RectObstacle{6.5, 6.5, 7.5, 7.5},
      CircleObstacle{3.0, 7.0, 0.5},
      CircleObstacle{7.0, 3.0, 0.5},
  };
}

// Level 1: sparse fixed layout, goal within 3 m. Level 2: random placement, goal within 5 m.
// Level 3: 5-8 random obstacles, goal within 8 m.
inline std::vector<CurriculumLevelSpec> default_curriculum() {
  std::vector<CurriculumLevelSpec> levels(3);
  levels[0].id = 1;
  levels[0].placement = Placement::Fixed;
  levels[0].fixed_layout = level_one_layout();
  levels[0].min_obstacles = levels[0].max_obstacles = 4;
  levels[0].max_goal_distance = 3.0;

  levels[1].id = 2;
  levels[1].placement = Placement::Random;
  levels[1].min_obstacles = 3;
  levels[1].max_obstacles = 4;
  levels[1].max_goal_distance = 5.0;

  levels[2].id = 3;
  levels[2].placement = Placement::Random;
  levels[2].min_obstacles = 5;
  levels[2].max_obstacles = 8;
  levels[2].max_goal_distance = 8.0;
  return levels;
}

namespace detail {

inline constexpr int kMaxAttempts = 1000;

inline Obstacle random_obstacle(rng_t& rng, double width, double height) {
  const double cx = uniform(rng, 1.0, width - 1.0);
  const double cy = uniform(rng, 1.0, height - 1.0);
  if (std::bernoulli_distribution(0.5)(rng)) {
    return CircleObstacle{cx, cy, uniform(rng, 0.3, 0.6)};
  }
  const double hw = 0.5 * uniform(rng, 0.5, 1.2);
  const double hh = 0.5 * uniform(rng, 0.5, 1.2);
  return RectObstacle{cx - hw, cy - hh, cx + hw, cy + hh};
}

template <typename Sampler>
Point2D sample_point(const WorldSpec& world, rng_t& rng, double clearance,
                     const std::vector<Point2D>& avoid, double min_separation, Sampler&& sampler,
                     const char* what) {
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const Point2D p = sampler(rng);
    if (!world.inside(p) || world.clearance(p) < clearance) continue;
    bool ok = true;
    for (const auto& q : avoid) {
      if (distance(p, q) < min_separation) {
        ok = false;
        break;
      }
    }
    if (ok) return p;
  }
  throw config_error(std::string("reset_episode: could not place ") + what + " after " +
                     std::to_string(kMaxAttempts) + " attempts");
}

inline void place_obstacles(WorldSpec& world, const CurriculumLevelSpec& level, rng_t& rng) {
  if (level.placement == Placement::Fixed) {
    world.obstacles = level.fixed_layout;
    return;
  }
  const int count = std::uniform_int_distribution<int>(level.min_obstacles, level.max_obstacles)(rng);
  world.obstacles.clear();
  for (int i = 0; i < count; ++i) world.obstacles.push_back(random_obstacle(rng, world.width, world.height));
}

}  // namespace detail

struct EpisodeStart {
  WorldSpec world;
  Observation observation;
};

// Single robot-goal world drawn from the level distribution; a pure function of (level, seed).
inline EpisodeStart reset_episode(const CurriculumLevelSpec& level, std::uint64_t seed,
                                  const SimParams& params = {}) {
  rng_t rng(seed);
  WorldSpec world;
  world.width = world.height = params.arena_size;
  detail::place_obstacles(world, level, rng);

  const auto anywhere = [&](rng_t& r) {
    return Point2D{uniform(r, 0.0, world.width), uniform(r, 0.0, world.height)};
  };
  const Point2D spawn =
      detail::sample_point(world, rng, level.spawn_clearance, {}, 0.0, anywhere, "spawn");
  const double heading = normalize_angle(uniform(rng, -kPi, kPi));
  const auto near_spawn = [&](rng_t& r) {
    const double d = uniform(r, level.min_goal_distance, level.max_goal_distance);
    const double a = uniform(r, -kPi, kPi);
    return Point2D{spawn.x + d * std::cos(a), spawn.y + d * std::sin(a)};
  };
  const Point2D goal = detail::sample_point(world, rng, level.goal_clearance, {spawn},
                                            level.min_goal_distance, near_spawn, "goal");
  world.spawns = {Pose2D{spawn.x, spawn.y, heading}};
  world.goals = {goal};

  EpisodeStart start{world, {}};
  start.observation = build_observation(world, world.spawns[0], goal, 0.0, 0.0, params);
  return start;
}

// Multi-robot world: level obstacles plus `robots` spawns, goals and homes placed uniformly over
// free space with pairwise separation of at least 2 * collision threshold.
inline WorldSpec sample_world(const CurriculumLevelSpec& level, int robots, std::uint64_t seed,
                              const SimParams& params = {}) {
  if (robots < 1) throw usage_error("sample_world: robots must be >= 1");
  rng_t rng(seed);
  WorldSpec world;
  world.width = world.height = params.arena_size;
  detail::place_obstacles(world, level, rng);

  const double sep = 2.0 * params.collision_threshold;
  const auto anywhere = [&](rng_t& r) {
    return Point2D{uniform(r, 0.0, world.width), uniform(r, 0.0, world.height)};
  };
  std::vector<Point2D> taken;
  for (int i = 0; i < robots; ++i) {
    const Point2D p =
        detail::sample_point(world, rng, level.spawn_clearance, taken, sep, anywhere, "spawn");
    taken.push_back(p);
    world.spawns.push_back({p.x, p.y, normalize_angle(uniform(rng, -kPi, kPi))});
  }
  for (int j = 0; j < robots; ++j) {
    const Point2D p =
        detail::sample_point(world, rng, level.goal_clearance, taken, sep, anywhere, "goal");
    taken.push_back(p);
    world.goals.push_back(p);
  }
  for (int k = 0; k < robots; ++k) {
    const Point2D p =
        detail::sample_point(world, rng, level.goal_clearance, taken, sep, anywhere, "home");
    taken.push_back(p);
    world.homes.push_back(p);
  }
  return world;
}

// Tracks outcomes at the current level and advances when the trailing success rate clears the
// level's threshold. The window restarts after every advancement.
class CurriculumController {
 public:
  explicit CurriculumController(std::vector<CurriculumLevelSpec> levels, std::size_t start_index = 0)
      : levels_(std::move(levels)), index_(start_index) {
    if (levels_.empty()) throw usage_error("CurriculumController: no levels");
    if (index_ >= levels_.size()) throw usage_error("CurriculumController: start level out of range");
  }

  const CurriculumLevelSpec& current() const { return levels_[index_]; }
  std::size_t index() const { return index_; }

  // Records one episode; returns true when the level was incremented.
  bool record(bool success) {
    history_.push_back(success);
    const auto window = static_cast<std::size_t>(current().advance_window);
    if (history_.size() > window) history_.erase(history_.begin());
    if (history_.size() < window || index_ + 1 >= levels_.size()) return false;
    if (success_rate() >= current().advance_threshold) {
      ++index_;
      history_.clear();
      return true;
    }
    return false;
  }

  double success_rate() const {
    if (history_.empty()) return 0.0;
    std::size_t n = 0;
    for (bool s : history_) n += s ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(history_.size());
  }

 private:
  std::vector<CurriculumLevelSpec> levels_;
  std::size_t index_;
  std::vector<bool> history_;
};

}  // namespace dream::sim

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dream/core/error.hpp"
#include "dream/sim/geometry.hpp"

namespace dream::sim {

inline constexpr std::size_t kScanRays = 180;
inline constexpr std::size_t kLidarSegments = 30;
inline constexpr std::size_t kRaysPerSegment = kScanRays / kLidarSegments;
inline constexpr std::size_t kObservationSize = kLidarSegments + 4;

struct SimParams {
  double goal_threshold = 0.3;        // D_thresh, metres
  double collision_threshold = 0.35;  // C_thresh, metres
  double v_max = 1.0;
  double omega_max = 1.0;
  double dt = 0.1;
  double max_range = 10.0;
  int max_steps = 250;
  double robot_radius = 0.2;  // lidar footprint of other robots
  double arena_size = 10.0;
  double goal_reward = 200.0;
  double collision_reward = -100.0;
};

struct WorldSpec {
  double width = 10.0;
  double height = 10.0;
  std::vector<Obstacle> obstacles;
  std::vector<Point2D> goals;
  std::vector<Point2D> homes;
  std::vector<Pose2D> spawns;

  bool inside(Point2D p) const { return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height; }
  double diagonal() const { return std::hypot(width, height); }

  // Smallest distance from p to any wall or obstacle boundary (negative when inside an obstacle).
  double clearance(Point2D p) const {
    double c = std::min({p.x, width - p.x, p.y, height - p.y});
    for (const auto& o : obstacles) c = std::min(c, signed_distance(p, o));
    return c;
  }

  friend bool operator==(const WorldSpec&, const WorldSpec&) = default;
};

struct Observation {
  std::array<double, kLidarSegments> lidar{};
  double d_goal = 0.0;
  double theta_goal = 0.0;
  double v = 0.0;
  double omega = 0.0;

  std::array<double, kObservationSize> to_array() const {
    std::array<double, kObservationSize> out{};
    std::copy(lidar.begin(), lidar.end(), out.begin());
    out[kLidarSegments + 0] = d_goal;
    out[kLidarSegments + 1] = theta_goal;
    out[kLidarSegments + 2] = v;
    out[kLidarSegments + 3] = omega;
    return out;
  }

  double min_lidar() const { return *std::min_element(lidar.begin(), lidar.end()); }
};

struct Action {
  double v_cmd = 0.0;
  double omega_cmd = 0.0;

  Action clamped(const SimParams& p) const {
    return {std::clamp(v_cmd, 0.0, p.v_max), std::clamp(omega_cmd, -p.omega_max, p.omega_max)};
  }
};

enum class Terminal { Continue, GoalReached, Collision, Timeout };

inline std::string_view to_string(Terminal t) {
  switch (t) {
    case Terminal::Continue: return "continue";
    case Terminal::GoalReached: return "goal";
    case Terminal::Collision: return "collision";
    case Terminal::Timeout: return "timeout";
  }
  return "?";
}

struct StepOutcome {
  double reward = 0.0;
  Terminal terminal = Terminal::Continue;

  bool done() const { return terminal != Terminal::Continue; }
};

// Heading of ray i relative to the robot: centre of the i-th one-degree sector of [-90, 90].
inline double ray_angle(std::size_t i) {
  return -kPi / 2.0 + (static_cast<double>(i) + 0.5) * kPi / static_cast<double>(kScanRays);
}

// Distance from origin along world-frame angle to the nearest wall, obstacle or extra body,
// clamped to max_range.
inline double cast_ray(const WorldSpec& world, Point2D origin, double angle, double max_range,
                       std::span<const CircleObstacle> bodies = {}) {
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  double best = std::numeric_limits<double>::infinity();
  if (dx > 1e-15) best = std::min(best, (world.width - origin.x) / dx);
  if (dx < -1e-15) best = std::min(best, -origin.x / dx);
  if (dy > 1e-15) best = std::min(best, (world.height - origin.y) / dy);
  if (dy < -1e-15) best = std::min(best, -origin.y / dy);
  for (const auto& o : world.obstacles) best = std::min(best, ray_hit(origin, dx, dy, o));
  for (const auto& b : bodies) best = std::min(best, ray_hit(origin, dx, dy, b));
  return std::clamp(best, 0.0, max_range);
}

inline std::array<double, kScanRays> raycast_lidar(const WorldSpec& world, const Pose2D& pose,
                                                   double max_range,
                                                   std::span<const CircleObstacle> bodies = {}) {
  std::array<double, kScanRays> scan{};
  for (std::size_t i = 0; i < kScanRays; ++i) {
    scan[i] = cast_ray(world, pose.position(), pose.theta + ray_angle(i), max_range, bodies);
  }
  return scan;
}

// Min-pools each 6-ray sector into one value.
inline std::array<double, kLidarSegments> compress_scan(std::span<const double> scan) {
  if (scan.size() != kScanRays) {
    throw usage_error("compress_scan: expected " + std::to_string(kScanRays) + " rays, got " +
                      std::to_string(scan.size()));
  }
  std::array<double, kLidarSegments> out{};
  for (std::size_t k = 0; k < kLidarSegments; ++k) {
    auto window = scan.subspan(k * kRaysPerSegment, kRaysPerSegment);
    out[k] = *std::min_element(window.begin(), window.end());
  }
  return out;
}

// Forward-Euler unicycle step. No clamping here; callers clamp actions before applying them.
inline Pose2D step_robot(const Pose2D& pose, const Action& action, double dt) {
  Pose2D next;
  next.x = pose.x + action.v_cmd * std::cos(pose.theta) * dt;
  next.y = pose.y + action.v_cmd * std::sin(pose.theta) * dt;
  next.theta = normalize_angle(pose.theta + action.omega_cmd * dt);
  return next;
}

// Goal check first, then collision, else the per-step shaping term v - |omega|.
inline StepOutcome compute_reward(const Observation& obs, const Action& action, const SimParams& p) {
  if (obs.d_goal < p.goal_threshold) return {p.goal_reward, Terminal::GoalReached};
  if (obs.min_lidar() < p.collision_threshold) return {p.collision_reward, Terminal::Collision};
  return {action.v_cmd - std::abs(action.omega_cmd), Terminal::Continue};
}

inline Observation build_observation(const WorldSpec& world, const Pose2D& pose, Point2D goal,
                                     double v, double omega, const SimParams& p,
                                     std::span<const CircleObstacle> bodies = {}) {
  Observation obs;
  const auto scan = raycast_lidar(world, pose, p.max_range, bodies);
  obs.lidar = compress_scan(scan);
  obs.d_goal = distance(pose.position(), goal);
  obs.theta_goal = normalize_angle(std::atan2(goal.y - pose.y, goal.x - pose.x) - pose.theta);
  obs.v = v;
  obs.omega = omega;
  return obs;
}

}  // namespace dream::sim

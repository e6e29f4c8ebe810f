#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <variant>

namespace dream::sim {

inline constexpr double kPi = std::numbers::pi;

// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  if (r > kPi) r -= 2.0 * kPi;
  return r;
}

struct Point2D {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2D&, const Point2D&) = default;
};

struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Point2D position() const { return {x, y}; }
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

inline double distance(Point2D a, Point2D b) { return std::hypot(b.x - a.x, b.y - a.y); }

// Axis-aligned rectangle [xmin, xmax] x [ymin, ymax].
struct RectObstacle {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  friend bool operator==(const RectObstacle&, const RectObstacle&) = default;
};

struct CircleObstacle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;

  friend bool operator==(const CircleObstacle&, const CircleObstacle&) = default;
};

using Obstacle = std::variant<RectObstacle, CircleObstacle>;

// Signed distance from p to the obstacle boundary; negative inside.
inline double signed_distance(Point2D p, const RectObstacle& r) {
  const double dx = std::max({r.xmin - p.x, 0.0, p.x - r.xmax});
  const double dy = std::max({r.ymin - p.y, 0.0, p.y - r.ymax});
  if (dx > 0.0 || dy > 0.0) return std::hypot(dx, dy);
  return -std::min({p.x - r.xmin, r.xmax - p.x, p.y - r.ymin, r.ymax - p.y});
}

inline double signed_distance(Point2D p, const CircleObstacle& c) {
  return std::hypot(p.x - c.cx, p.y - c.cy) - c.r;
}

inline double signed_distance(Point2D p, const Obstacle& o) {
  return std::visit([&](const auto& shape) { return signed_distance(p, shape); }, o);
}

// Distance along a unit-direction ray to the shape, or +inf when missed.
// An origin inside the shape yields 0.
inline double ray_hit(Point2D o, double dx, double dy, const RectObstacle& r) {
  if (o.x > r.xmin && o.x < r.xmax && o.y > r.ymin && o.y < r.ymax) return 0.0;
  double tmin = 0.0;
  double tmax = std::numeric_limits<double>::infinity();
  const double lo[2] = {r.xmin, r.ymin};
  const double hi[2] = {r.xmax, r.ymax};
  const double org[2] = {o.x, o.y};
  const double dir[2] = {dx, dy};
  for (int a = 0; a < 2; ++a) {
    if (std::abs(dir[a]) < 1e-15) {
      if (org[a] < lo[a] || org[a] > hi[a]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t1 = (lo[a] - org[a]) / dir[a];
    double t2 = (hi[a] - org[a]) / dir[a];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return std::numeric_limits<double>::infinity();
  }
  return tmin;
}

inline double ray_hit(Point2D o, double dx, double dy, const CircleObstacle& c) {
  const double ox = o.x - c.cx;
  const double oy = o.y - c.cy;
  const double cterm = ox * ox + oy * oy - c.r * c.r;
  if (cterm <= 0.0) return 0.0;
  const double b = ox * dx + oy * dy;
  const double disc = b * b - cterm;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double t = -b - std::sqrt(disc);
  return t >= 0.0 ? t : std::numeric_limits<double>::infinity();
}

inline double ray_hit(Point2D o, double dx, double dy, const Obstacle& ob) {
  return std::visit([&](const auto& shape) { return ray_hit(o, dx, dy, shape); }, ob);
}

}  // namespace dream::sim

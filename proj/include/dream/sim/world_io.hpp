#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "dream/core/error.hpp"
#include "dream/sim/world.hpp"

namespace dream::sim {

using nlohmann::json;

inline json to_json(Point2D p) { return {{"x", p.x}, {"y", p.y}}; }
inline json to_json(const Pose2D& p) { return {{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; }

inline json to_json(const Obstacle& o) {
  if (const auto* r = std::get_if<RectObstacle>(&o)) {
    return {{"type", "rect"}, {"xmin", r->xmin}, {"ymin", r->ymin}, {"xmax", r->xmax}, {"ymax", r->ymax}};
  }
  const auto& c = std::get<CircleObstacle>(o);
  return {{"type", "circle"}, {"x", c.cx}, {"y", c.cy}, {"r", c.r}};
}

inline json to_json(const WorldSpec& w) {
  json j;
  j["width"] = w.width;
  j["height"] = w.height;
  j["obstacles"] = json::array();
  for (const auto& o : w.obstacles) j["obstacles"].push_back(to_json(o));
  j["goals"] = json::array();
  for (const auto& g : w.goals) j["goals"].push_back(to_json(g));
  j["homes"] = json::array();
  for (const auto& h : w.homes) j["homes"].push_back(to_json(h));
  j["spawns"] = json::array();
  for (const auto& s : w.spawns) j["spawns"].push_back(to_json(s));
  return j;
}

inline Point2D point_from_json(const json& j) { return {j.at("x").get<double>(), j.at("y").get<double>()}; }

inline Pose2D pose_from_json(const json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(), normalize_angle(j.value("theta", 0.0))};
}

inline Obstacle obstacle_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "rect") {
    RectObstacle r{j.at("xmin").get<double>(), j.at("ymin").get<double>(), j.at("xmax").get<double>(),
                   j.at("ymax").get<double>()};
    if (r.xmin > r.xmax || r.ymin > r.ymax) throw config_error("rect obstacle with min > max");
    return r;
  }
  if (type == "circle") {
    CircleObstacle c{j.at("x").get<double>(), j.at("y").get<double>(), j.at("r").get<double>()};
    if (c.r <= 0.0) throw config_error("circle obstacle with non-positive radius");
    return c;
  }
  throw config_error("unknown obstacle type '" + type + "'");
}

inline WorldSpec world_from_json(const json& j) {
  WorldSpec w;
  try {
    w.width = j.value("width", 10.0);
    w.height = j.value("height", 10.0);
    if (j.contains("obstacles")) for (const auto& o : j.at("obstacles")) w.obstacles.push_back(obstacle_from_json(o));
    if (j.contains("goals")) for (const auto& g : j.at("goals")) w.goals.push_back(point_from_json(g));
    if (j.contains("homes")) for (const auto& h : j.at("homes")) w.homes.push_back(point_from_json(h));
    if (j.contains("spawns")) for (const auto& s : j.at("spawns")) w.spawns.push_back(pose_from_json(s));
  } catch (const json::exception& e) {
    throw config_error(std::string("malformed world document: ") + e.what());
  }
  if (w.width <= 0.0 || w.height <= 0.0) throw config_error("world width/height must be positive");
  return w;
}

}  // namespace dream::sim

#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "dream/sim/curriculum.hpp"
#include "dream/sim/world.hpp"

namespace dream::sim {

struct StepResult {
  Observation observation;
  StepOutcome outcome;
  Action applied;
};

// One robot, one goal. Owns its world; no shared state between instances.
class NavigationEnv {
 public:
  explicit NavigationEnv(SimParams params = {}) : params_(params) {}

  Observation reset(const CurriculumLevelSpec& level, std::uint64_t seed) {
    auto start = reset_episode(level, seed, params_);
    world_ = std::move(start.world);
    pose_ = world_.spawns.front();
    steps_ = 0;
    done_ = false;
    last_ = start.observation;
    return last_;
  }

  StepResult step(const Action& action) {
    if (done_) throw usage_error("NavigationEnv::step called after episode end");
    const Action applied = action.clamped(params_);
    pose_ = step_robot(pose_, applied, params_.dt);
    ++steps_;
    last_ = build_observation(world_, pose_, world_.goals.front(), applied.v_cmd, applied.omega_cmd,
                              params_);
    StepOutcome outcome = compute_reward(last_, applied, params_);
    if (outcome.terminal == Terminal::Continue && steps_ >= params_.max_steps) {
      outcome.terminal = Terminal::Timeout;
    }
    done_ = outcome.done();
    return {last_, outcome, applied};
  }

  const WorldSpec& world() const { return world_; }
  const Pose2D& pose() const { return pose_; }
  const Observation& observation() const { return last_; }
  const SimParams& params() const { return params_; }
  int steps() const { return steps_; }
  bool done() const { return done_; }

 private:
  SimParams params_;
  WorldSpec world_;
  Pose2D pose_;
  Observation last_;
  int steps_ = 0;
  bool done_ = false;
};

struct TrajectoryRow {
  int step = 0;
  int robot_id = 0;
  Pose2D pose;
  double v = 0.0;
  double omega = 0.0;
  double reward = 0.0;
  Terminal terminal = Terminal::Continue;
};

inline void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRow>& rows) {
  os << "step,robot_id,x,y,theta,v,omega,reward,terminal\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << r.step << ',' << r.robot_id << ',' << r.pose.x << ',' << r.pose.y << ',' << r.pose.theta
       << ',' << r.v << ',' << r.omega << ',' << r.reward << ',' << to_string(r.terminal) << '\n';
  }
}

}  // namespace dream::sim

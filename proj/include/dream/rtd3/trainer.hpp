#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dream/battery/battery.hpp"
#include "dream/nn/checkpoint.hpp"
#include "dream/replay/rcrb.hpp"
#include "dream/rtd3/agent.hpp"
#include "dream/sim/curriculum.hpp"
#include "dream/sim/environment.hpp"

namespace dream::rtd3 {

struct TrainConfig {
  std::uint64_t seed = 0;
  int episodes = 500;
  Td3Config td3;
  sim::SimParams sim;
  battery::BatteryParams battery;
  std::vector<sim::CurriculumLevelSpec> levels = sim::default_curriculum();
  std::size_t start_level = 0;
  std::size_t rcrb_capacity = 100000;
  std::size_t rcrb_min_quota = 1;  // per non-empty category; 0 = plain floor formula
  replay::CategoryThresholds thresholds;
  long warmup_steps = 1000;     // uniform random actions before the actor takes over
  int checkpoint_interval = 50;  // episodes; 0 writes only the final checkpoint
  int success_window = 100;
  std::optional<std::filesystem::path> out_dir;
};

struct EpisodeMetrics {
  int episode = 0;
  int level = 1;
  int steps = 0;
  double episode_return = 0.0;
  sim::Terminal outcome = sim::Terminal::Continue;
  replay::BufferStats buffer;
  double critic1_loss = 0.0;  // mean over the episode's updates
  double critic2_loss = 0.0;
  double actor_loss = 0.0;
  long actor_updates = 0;
  double success_rate = 0.0;  // trailing window over all episodes so far
  double battery_soc = 100.0; // bookkeeping only; never part of the observation
};

inline void write_metrics_header(std::ostream& os) {
  os << "episode,level,steps,return,outcome,buffer_positive,buffer_neutral,buffer_negative,"
        "critic1_loss,critic2_loss,actor_loss,actor_updates,success_rate,battery_soc\n";
}

inline void write_metrics_row(std::ostream& os, const EpisodeMetrics& m) {
  os << m.episode << ',' << m.level << ',' << m.steps << ',' << m.episode_return << ',' << sim::to_string(m.outcome)
     << ',' << m.buffer.positive << ',' << m.buffer.neutral << ',' << m.buffer.negative << ',' << m.critic1_loss
     << ',' << m.critic2_loss << ',' << m.actor_loss << ',' << m.actor_updates << ',' << m.success_rate << ','
     << m.battery_soc << '\n';
}

inline nlohmann::json sim_to_json(const sim::SimParams& p) {
  return {{"v_max", p.v_max}, {"omega_max", p.omega_max}, {"max_range", p.max_range}, {"dt", p.dt}};
}

inline void save_agent(const Td3Agent& agent, const std::filesystem::path& dir, long step) {
  const auto& shape = agent.config().shape;
  const nlohmann::json sim = sim_to_json(agent.sim_params());
  const auto critic_manifest = [&](const char* role) {
    return nlohmann::json{{"model", "rtd3_critic"},
                          {"role", role},
                          {"state", nn::to_json(critic_state_spec(shape))},
                          {"action", nn::to_json(critic_action_spec(shape))},
                          {"head", nn::to_json(critic_head_spec(shape))}};
  };
  const auto actor_manifest = [&](const char* role) {
    return nlohmann::json{{"model", "rtd3_actor"}, {"role", role}, {"spec", nn::to_json(actor_spec(shape))}, {"sim", sim}};
  };
  nn::save_checkpoint(dir / "actor", {actor_manifest("live"), step, agent.actor().net.params});
  nn::save_checkpoint(dir / "actor_target", {actor_manifest("target"), step, agent.actor_target().net.params});
  nn::save_checkpoint(dir / "critic1", {critic_manifest("live"), step, agent.critic1().params});
  nn::save_checkpoint(dir / "critic2", {critic_manifest("live"), step, agent.critic2().params});
  nn::save_checkpoint(dir / "critic1_target", {critic_manifest("target"), step, agent.critic1_target().params});
  nn::save_checkpoint(dir / "critic2_target", {critic_manifest("target"), step, agent.critic2_target().params});
}

// Deterministic policy loaded from an actor checkpoint.
struct LoadedActor {
  ActorNet actor;
  sim::SimParams sim;

  sim::Action act(const sim::Observation& obs) const {
    Matrix x(kStateWidth, 1);
    const auto arr = obs.to_array();
    encode_observation(arr, sim.max_range, x.col(0));
    const Matrix out = actor.net.predict(x);
    return scale_action(std::clamp(out(0, 0), -1.0, 1.0), std::clamp(out(1, 0), -1.0, 1.0), sim);
  }
};

inline LoadedActor load_actor(const std::filesystem::path& stem, sim::SimParams base = {}) {
  const auto ckpt = nn::load_checkpoint(stem);
  if (ckpt.manifest.value("model", "") != "rtd3_actor") throw config_error(stem.string() + " is not an actor checkpoint");
  LoadedActor out;
  out.actor.net.layout = nn::DenseLayout(nn::spec_from_json(ckpt.manifest.at("spec")));
  if (out.actor.net.layout.size() != static_cast<std::size_t>(ckpt.params.size())) {
    throw config_error("actor checkpoint size does not match its spec");
  }
  out.actor.net.params = ckpt.params;
  out.sim = base;
  const auto& s = ckpt.manifest.at("sim");
  out.sim.v_max = s.at("v_max").get<double>();
  out.sim.omega_max = s.at("omega_max").get<double>();
  out.sim.max_range = s.at("max_range").get<double>();
  out.sim.dt = s.at("dt").get<double>();
  return out;
}

struct TrainResult {
  std::vector<EpisodeMetrics> metrics;
  Td3Agent agent;
  std::size_t final_level = 0;
};

inline double trailing_success(const std::vector<EpisodeMetrics>& m, std::size_t window) {
  if (m.empty()) return 0.0;
  const std::size_t n = std::min(window, m.size());
  std::size_t hits = 0;
  for (std::size_t i = m.size() - n; i < m.size(); ++i) hits += m[i].outcome == sim::Terminal::GoalReached ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(n);
}

// Episode rollout, categorized replay, per-step critic updates, delayed actor/target updates,
// curriculum advancement and periodic checkpoints. `on_episode` may be used for progress output.
inline TrainResult train(const TrainConfig& cfg,
                         const std::function<void(const EpisodeMetrics&)>& on_episode = {}) {
  if (cfg.episodes < 0) throw usage_error("train: episodes must be >= 0");
  TrainResult result{{}, Td3Agent(cfg.td3, cfg.sim, derive_seed(cfg.seed, 1)), cfg.start_level};
  Td3Agent& agent = result.agent;
  replay::CategorizedBuffer buffer(cfg.rcrb_capacity, cfg.thresholds, cfg.rcrb_min_quota);
  sim::CurriculumController curriculum(cfg.levels, cfg.start_level);
  sim::NavigationEnv env(cfg.sim);
  rng_t noise_rng(derive_seed(cfg.seed, 2));
  rng_t sample_rng(derive_seed(cfg.seed, 3));
  rng_t smoothing_rng(derive_seed(cfg.seed, 4));
  rng_t warmup_rng(derive_seed(cfg.seed, 5));
  const auto batch_size = static_cast<std::size_t>(cfg.td3.batch_size);

  std::optional<std::ofstream> metrics_csv;
  if (cfg.out_dir) {
    std::filesystem::create_directories(*cfg.out_dir);
    metrics_csv.emplace(*cfg.out_dir / "metrics.csv");
    metrics_csv->precision(10);
    write_metrics_header(*metrics_csv);
  }

  long total_steps = 0;
  long iteration = 0;
  for (int episode = 0; episode < cfg.episodes; ++episode) {
    const auto& level = curriculum.current();
    sim::Observation obs = env.reset(level, derive_seed(cfg.seed, 6, static_cast<std::uint64_t>(episode)));
    auto bat = battery::BatteryState::full(cfg.battery);
    EpisodeMetrics m;
    m.episode = episode;
    m.level = level.id;
    double c1 = 0.0, c2 = 0.0, al = 0.0;
    long critic_n = 0, actor_n = 0;
    sim::StepResult step;
    while (!env.done()) {
      SelectedAction sel;
      if (total_steps < cfg.warmup_steps) {
        sel.raw = {uniform(warmup_rng, -1.0, 1.0), uniform(warmup_rng, -1.0, 1.0)};
        sel.applied = scale_action(sel.raw[0], sel.raw[1], cfg.sim);
      } else {
        sel = agent.select_action(obs, true, noise_rng);
      }
      step = env.step(sel.applied);
      bat = battery::consume(bat, step.applied.v_cmd, step.applied.omega_cmd, cfg.sim.dt, cfg.battery);

      replay::Experience e;
      e.s = obs.to_array();
      e.a = sel.raw;
      e.r = step.outcome.reward;
      e.s_next = step.observation.to_array();
      // Timeouts are truncations, not terminal states: they still bootstrap.
      e.done = step.outcome.terminal == sim::Terminal::GoalReached ||
               step.outcome.terminal == sim::Terminal::Collision;
      buffer.push(e);

      if (buffer.size() >= batch_size) {
        const Batch b = make_batch(buffer.sample(batch_size, sample_rng), cfg.sim.max_range);
        ++iteration;
        const auto losses = agent.update_critics(b, smoothing_rng);
        c1 += losses.q1;
        c2 += losses.q2;
        ++critic_n;
        double a_loss = 0.0;
        if (agent.update_actor_and_targets(b, iteration, &a_loss)) {
          al += a_loss;
          ++actor_n;
        }
      }
      m.episode_return += step.outcome.reward;
      obs = step.observation;
      ++total_steps;
    }
    m.steps = env.steps();
    m.outcome = step.outcome.terminal;
    m.buffer = buffer.stats();
    if (critic_n > 0) {
      m.critic1_loss = c1 / static_cast<double>(critic_n);
      m.critic2_loss = c2 / static_cast<double>(critic_n);
    }
    if (actor_n > 0) m.actor_loss = al / static_cast<double>(actor_n);
    m.actor_updates = agent.actor_updates();
    m.battery_soc = bat.soc();
    result.metrics.push_back(m);
    result.metrics.back().success_rate =
        trailing_success(result.metrics, static_cast<std::size_t>(cfg.success_window));
    curriculum.record(m.outcome == sim::Terminal::GoalReached);

    if (metrics_csv) write_metrics_row(*metrics_csv, result.metrics.back());
    if (on_episode) on_episode(result.metrics.back());
    if (cfg.out_dir && cfg.checkpoint_interval > 0 && (episode + 1) % cfg.checkpoint_interval == 0) {
      save_agent(agent, *cfg.out_dir / "checkpoint", total_steps);
    }
  }
  result.final_level = curriculum.index();
  if (cfg.out_dir) save_agent(agent, *cfg.out_dir / "checkpoint", total_steps);
  return result;
}

}  // namespace dream::rtd3

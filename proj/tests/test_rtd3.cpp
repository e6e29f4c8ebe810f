#include <gtest/gtest.h>

#include <filesystem>

#include "dream/rtd3/grad_check.hpp"
#include "dream/rtd3/trainer.hpp"

using namespace dream;
using namespace dream::rtd3;

namespace {

Batch random_batch(int n, std::uint64_t seed, double done_rate = 0.2) {
  rng_t rng(seed);
  Batch b{Matrix(kStateWidth, n), Matrix(kActionWidth, n), Eigen::RowVectorXd(n), Matrix(kStateWidth, n),
          Eigen::RowVectorXd(n)};
  for (Eigen::Index i = 0; i < b.s.size(); ++i) b.s.data()[i] = uniform(rng, 0.0, 1.0);
  for (Eigen::Index i = 0; i < b.s_next.size(); ++i) b.s_next.data()[i] = uniform(rng, 0.0, 1.0);
  for (Eigen::Index i = 0; i < b.a.size(); ++i) b.a.data()[i] = uniform(rng, -1.0, 1.0);
  for (int i = 0; i < n; ++i) {
    b.r[i] = uniform(rng, -5.0, 5.0);
    b.done[i] = uniform(rng, 0.0, 1.0) < done_rate ? 1.0 : 0.0;
  }
  return b;
}

sim::Observation some_observation(std::uint64_t seed) {
  return sim::reset_episode(sim::default_curriculum()[0], seed).observation;
}

}  // namespace

TEST(SelectAction, ScalingEndpoints) {
  const sim::SimParams p;
  EXPECT_DOUBLE_EQ(scale_action(1.0, 0.0, p).v_cmd, p.v_max);
  EXPECT_DOUBLE_EQ(scale_action(-1.0, 0.0, p).v_cmd, 0.0);
  EXPECT_DOUBLE_EQ(scale_action(0.0, -1.0, p).omega_cmd, -p.omega_max);
  EXPECT_DOUBLE_EQ(scale_action(0.0, 1.0, p).omega_cmd, p.omega_max);
}

TEST(SelectAction, GreedyIsDeterministicAndNoiseIsSeeded) {
  const Td3Agent agent({}, {}, 3);
  const auto obs = some_observation(5);
  rng_t r1(1), r2(99);
  const auto a = agent.select_action(obs, false, r1);
  const auto b = agent.select_action(obs, false, r2);
  EXPECT_EQ(a.raw, b.raw);

  rng_t n1(7), n2(7);
  const auto x = agent.select_action(obs, true, n1);
  const auto y = agent.select_action(obs, true, n2);
  EXPECT_EQ(x.raw, y.raw);
  EXPECT_NE(x.raw, a.raw);
}

TEST(SelectAction, ExploredActionsStayInBounds) {
  Td3Config cfg;
  cfg.explore_sigma = 5.0;
  const Td3Agent agent(cfg, {}, 4);
  const sim::SimParams p;
  rng_t rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto sel = agent.select_action(some_observation(static_cast<std::uint64_t>(i)), true, rng);
    for (double r : sel.raw) {
      EXPECT_GE(r, -1.0);
      EXPECT_LE(r, 1.0);
    }
    EXPECT_GE(sel.applied.v_cmd, 0.0);
    EXPECT_LE(sel.applied.v_cmd, p.v_max);
    EXPECT_LE(std::abs(sel.applied.omega_cmd), p.omega_max);
  }
}

TEST(Bellman, WorkedExample) {
  const auto y = bellman_targets(Eigen::RowVectorXd::Constant(1, 1.0), Eigen::RowVectorXd::Zero(1),
                                 Eigen::RowVectorXd::Constant(1, 10.0), Eigen::RowVectorXd::Constant(1, 12.0), 0.99);
  EXPECT_NEAR(y[0], 10.9, 1e-12);
}

TEST(Bellman, TerminalIsRewardExactly) {
  const auto y = bellman_targets(Eigen::RowVectorXd::Constant(1, 200.0), Eigen::RowVectorXd::Ones(1),
                                 Eigen::RowVectorXd::Constant(1, -1e9), Eigen::RowVectorXd::Constant(1, 1e9), 0.99);
  EXPECT_EQ(y[0], 200.0);
}

TEST(Bellman, MinOfTwinsProperty) {
  rng_t rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 32;
    Eigen::RowVectorXd r(n), d(n), q1(n), q2(n);
    for (int i = 0; i < n; ++i) {
      r[i] = uniform(rng, -10, 10);
      d[i] = uniform(rng, 0, 1) < 0.3 ? 1.0 : 0.0;
      q1[i] = uniform(rng, -50, 50);
      q2[i] = uniform(rng, -50, 50);
    }
    const auto y = bellman_targets(r, d, q1, q2, 0.99);
    const auto y1 = bellman_targets(r, d, q1, q1, 0.99);
    const auto y2 = bellman_targets(r, d, q2, q2, 0.99);
    for (int i = 0; i < n; ++i) {
      EXPECT_LE(y[i], y1[i]);
      EXPECT_LE(y[i], y2[i]);
      EXPECT_TRUE(y[i] == y1[i] || y[i] == y2[i]);
    }
    // Q1 below Q2 everywhere: same as using Q1 alone.
    const Eigen::RowVectorXd lo = q1.cwiseMin(q2), hi = q1.cwiseMax(q2);
    EXPECT_EQ(bellman_targets(r, d, lo, hi, 0.99), bellman_targets(r, d, lo, lo, 0.99));
  }
}

TEST(ComputeTarget, TerminalEntriesEqualReward) {
  const Td3Agent agent({}, {}, 5);
  const auto b = random_batch(64, 8, 0.5);
  rng_t rng(3);
  const auto y = agent.compute_target(b, rng);
  int terminals = 0;
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (b.done[i] == 1.0) {
      EXPECT_EQ(y[i], b.r[i]);
      ++terminals;
    }
  }
  EXPECT_GT(terminals, 0);
}

TEST(ComputeTarget, SeededSmoothingIsDeterministic) {
  const Td3Agent agent({}, {}, 5);
  const auto b = random_batch(16, 9);
  rng_t r1(4), r2(4);
  EXPECT_EQ(agent.compute_target(b, r1), agent.compute_target(b, r2));
}

TEST(UpdateCritics, SingleTransitionLossIsSquaredError) {
  Td3Agent agent({}, {}, 6);
  const auto b = random_batch(1, 10, 0.0);
  const Eigen::RowVectorXd y = Eigen::RowVectorXd::Constant(1, 3.5);
  const double q1 = agent.critic1().q(b.s, b.a)[0];
  const double q2 = agent.critic2().q(b.s, b.a)[0];
  const auto losses = agent.update_critics(b, y);
  EXPECT_NEAR(losses.q1, (q1 - 3.5) * (q1 - 3.5), 1e-12);
  EXPECT_NEAR(losses.q2, (q2 - 3.5) * (q2 - 3.5), 1e-12);
}

TEST(UpdateCritics, ExactCriticsStayPut) {
  Td3Agent agent({}, {}, 6);
  const auto b = random_batch(8, 12);
  // One target serves both critics only if they are identical.
  agent.critic2().params = agent.critic1().params;
  const Eigen::RowVectorXd y = agent.critic1().q(b.s, b.a);
  const Vector before = agent.critic1().params;
  const auto losses = agent.update_critics(b, y);
  EXPECT_EQ(losses.q1, 0.0);
  EXPECT_EQ(losses.q2, 0.0);
  EXPECT_EQ(agent.critic1().params, before);
}

TEST(UpdateCritics, LossFallsOnFixedBatch) {
  Td3Agent agent({}, {}, 7);
  const auto b = random_batch(32, 13);
  const Eigen::RowVectorXd y = b.r;
  const auto first = agent.update_critics(b, y);
  CriticLosses last;
  for (int i = 0; i < 100; ++i) last = agent.update_critics(b, y);
  EXPECT_LT(last.q1, 0.1 * first.q1);
  EXPECT_LT(last.q2, 0.1 * first.q2);
}

TEST(UpdateActor, DelayTwoCadence) {
  Td3Agent agent({}, {}, 8);
  const auto b = random_batch(16, 14);
  for (long it = 1; it <= 20; ++it) {
    const Vector actor = agent.actor().net.params;
    const Vector target = agent.critic1_target().params;
    const bool updated = agent.update_actor_and_targets(b, it);
    EXPECT_EQ(updated, it % 2 == 0);
    if (updated) {
      EXPECT_NE(agent.actor().net.params, actor);
    } else {
      EXPECT_EQ(agent.actor().net.params, actor);
      EXPECT_EQ(agent.critic1_target().params, target);
    }
  }
  EXPECT_EQ(agent.actor_updates(), 10);
}

TEST(UpdateActor, RaisesCriticValueOnFixedBatch) {
  Td3Agent agent({}, {}, 9);
  const auto b = random_batch(32, 15);
  double first = 0.0, last = 0.0;
  for (long it = 2; it <= 200; it += 2) {
    double loss = 0.0;
    agent.update_actor_and_targets(b, it, &loss);
    if (it == 2) first = loss;
    last = loss;
  }
  EXPECT_LT(last, first);
}

TEST(SoftUpdate, TauOneCopiesLiveNets) {
  Td3Agent agent({}, {}, 10);
  agent.actor().net.params.array() += 0.5;
  agent.critic1().params.array() -= 0.25;
  agent.critic2().params.array() *= 2.0;
  agent.soft_update_targets(1.0);
  EXPECT_EQ(agent.actor_target().net.params, agent.actor().net.params);
  EXPECT_EQ(agent.critic1_target().params, agent.critic1().params);
  EXPECT_EQ(agent.critic2_target().params, agent.critic2().params);
}

TEST(SoftUpdate, AlgebraOnRandomTau) {
  rng_t rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    Td3Agent agent({}, {}, static_cast<std::uint64_t>(trial));
    agent.actor().net.params.array() += uniform(rng, -1, 1);
    const Vector live = agent.actor().net.params, old = agent.actor_target().net.params;
    const double tau = uniform(rng, 0, 1);
    agent.soft_update_targets(tau);
    const Vector& now = agent.actor_target().net.params;
    for (Eigen::Index i = 0; i < now.size(); ++i) EXPECT_EQ(now[i], tau * live[i] + (1.0 - tau) * old[i]);
  }
}

TEST(Train, ZeroEpisodesCheckpointsInitialParams) {
  const auto dir = std::filesystem::temp_directory_path() / "dream_rtd3_zero";
  std::filesystem::remove_all(dir);
  TrainConfig cfg;
  cfg.seed = 4;
  cfg.episodes = 0;
  cfg.out_dir = dir;
  const auto res = train(cfg);
  EXPECT_TRUE(res.metrics.empty());
  const Td3Agent fresh(cfg.td3, cfg.sim, derive_seed(cfg.seed, 1));
  EXPECT_EQ(load_actor(dir / "checkpoint" / "actor").actor.net.params, fresh.actor().net.params);
  EXPECT_EQ(nn::load_checkpoint(dir / "checkpoint" / "critic2").params, fresh.critic2().params);
  std::filesystem::remove_all(dir);
}

TEST(Train, SameSeedSameRun) {
  TrainConfig cfg;
  cfg.seed = 12;
  cfg.episodes = 3;
  cfg.warmup_steps = 50;
  const auto a = train(cfg);
  const auto b = train(cfg);
  ASSERT_EQ(a.metrics.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.metrics[i].steps, b.metrics[i].steps);
    EXPECT_EQ(a.metrics[i].episode_return, b.metrics[i].episode_return);
    EXPECT_EQ(a.metrics[i].critic1_loss, b.metrics[i].critic1_loss);
  }
  EXPECT_EQ(a.agent.actor().net.params, b.agent.actor().net.params);
  EXPECT_GT(a.agent.critic_updates(), 0);
}

TEST(Curriculum, AdvancesExactlyOnce) {
  sim::CurriculumController c(sim::default_curriculum());
  int advances = 0;
  for (int i = 0; i < 99; ++i) advances += c.record(true) ? 1 : 0;
  EXPECT_EQ(advances, 0);
  advances += c.record(true) ? 1 : 0;
  EXPECT_EQ(advances, 1);
  EXPECT_EQ(c.index(), 1u);
  // Window restarts: the next 99 successes do not advance again.
  for (int i = 0; i < 99; ++i) advances += c.record(true) ? 1 : 0;
  EXPECT_EQ(advances, 1);
}

TEST(Curriculum, BelowThresholdStays) {
  sim::CurriculumController c(sim::default_curriculum());
  for (int i = 0; i < 500; ++i) EXPECT_FALSE(c.record(i % 10 < 6));
  EXPECT_EQ(c.index(), 0u);
}

TEST(ParameterCount, RefinedVersusBaseline) {
  const auto c = count_parameters();
  EXPECT_EQ(c.refined_actor, 42882u);
  EXPECT_EQ(c.baseline_actor, 512602u);
  EXPECT_LE(c.actor_ratio(), 0.25);
  EXPECT_LE(c.total_ratio(), 0.25);
}

TEST(GradCheck, ActorThroughCritic) {
  const auto r = actor_grad_check({}, 1, 3000);
  EXPECT_LT(r.max_rel_error, 1e-4) << "worst index " << r.worst_index;
}

TEST(GradCheck, CriticWithDropoutMasks) {
  NetShape shape;
  shape.critic_dropout = 0.2;
  const auto r = critic_grad_check(shape, 2, 3000);
  EXPECT_LT(r.max_rel_error, 1e-4) << "worst index " << r.worst_index;
}

TEST(GradCheck, SmallNetsExhaustive) {
  NetShape shape;
  shape.hidden1 = 12;
  shape.hidden2 = 8;
  shape.action_hidden = 6;
  shape.fusion_hidden = 5;
  shape.critic_dropout = 0.3;
  EXPECT_LT(actor_grad_check(shape, 3).max_rel_error, 1e-4);
  EXPECT_LT(critic_grad_check(shape, 4).max_rel_error, 1e-4);
}

#include <gtest/gtest.h>

#include <sstream>

#include "dream/eval/gaem.hpp"

using namespace dream;
using namespace dream::eval;

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Gaem, TablePairsReproducePublishedPercentages) {
  // (avg random, avg learned, published percent)
  const double rows[5][3] = {{124.67, 93.4, 25.08},
                             {136.01, 102.56, 24.59},
                             {157.32, 120.98, 23.09},
                             {163.71, 123.16, 24.76},
                             {122.83, 96.67, 21.29}};
  // exact rational values computed independently
  const double exact[5] = {25.082217053019974, 24.59377986912727, 23.099415204678362, 24.769409321360943,
                           21.29772856793943};
  for (int i = 0; i < 5; ++i) {
    const double pct = gaem_percent(rows[i][0], rows[i][1]);
    EXPECT_NEAR(pct, rows[i][2], 0.01) << "row " << i;
    EXPECT_NEAR(pct, exact[i], 1e-12);
  }
}

TEST(Gaem, EqualTotalsGiveZero) { EXPECT_EQ(gaem_epsilon(50.0, 50.0), 0.0); }

TEST(Gaem, NonPositiveRandomTotalRejected) {
  EXPECT_THROW(gaem_epsilon(0.0, 1.0), usage_error);
  EXPECT_THROW(gaem_epsilon(-3.0, 1.0), usage_error);
}

TEST(Evaluate, ModelModeFiveByFive) {
  const auto envs = alloc::generate_dataset(7, 5);
  EvalConfig cfg;
  cfg.seed = 7;
  const auto rep = evaluate_allocators(envs, cfg);
  ASSERT_EQ(rep.rows.size(), 5u);
  for (const auto& r : rep.rows) {
    ASSERT_TRUE(r.eps_oracle.has_value());
    EXPECT_FALSE(r.eps_gcn.has_value());
    EXPECT_GE(*r.eps_oracle, 0.0);
  }
  std::ostringstream csv;
  write_report_csv(csv, rep);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "env,avg_random,avg_oracle,eps_oracle_pct");
}

TEST(Evaluate, OracleBeatsGcnOnEveryEnvironment) {
  const auto envs = alloc::generate_dataset(8, 20);
  gcn::GcnNet net(gcn::GcnShape{}, 3);
  EvalConfig cfg;
  cfg.allocators = {Allocator::Random, Allocator::Gcn, Allocator::Oracle};
  cfg.gcn = &net;
  const auto rep = evaluate_allocators(envs, cfg);
  for (const auto& r : rep.rows) {
    // oracle minimises penalised cost; compare on that footing when nobody is stranded
    EXPECT_GE(*r.eps_oracle + 1e-12, *r.eps_gcn) << "env " << r.env;
  }
}

TEST(Evaluate, RandomOnlyHasNoEpsilon) {
  EvalConfig cfg;
  cfg.allocators = {Allocator::Random};
  const auto rep = evaluate_allocators(alloc::generate_dataset(9, 3), cfg);
  EXPECT_FALSE(rep.mean_eps_oracle.has_value());
  EXPECT_FALSE(rep.mean_eps_gcn.has_value());
  EXPECT_EQ(rep.mean_total.size(), 1u);
  EXPECT_FALSE(report_summary(rep).contains("mean_eps_oracle"));
}

TEST(Evaluate, MissingGcnOrPolicyIsConfigError) {
  const auto envs = alloc::generate_dataset(9, 2);
  EvalConfig cfg;
  cfg.allocators = {Allocator::Random, Allocator::Gcn};
  EXPECT_THROW(evaluate_allocators(envs, cfg), config_error);
  EvalConfig sim;
  sim.mode = EvalMode::Simulated;
  EXPECT_THROW(evaluate_allocators(envs, sim), config_error);
}

TEST(Evaluate, ParallelJobsMatchSerial) {
  const auto envs = alloc::generate_dataset(10, 9);
  EvalConfig cfg;
  const auto a = evaluate_allocators(envs, cfg);
  cfg.jobs = 4;
  const auto b = evaluate_allocators(envs, cfg);
  for (std::size_t i = 0; i < envs.size(); ++i) EXPECT_EQ(a.rows[i].avg_total, b.rows[i].avg_total);
}

TEST(Evaluate, OracleMeanBelowRandomMean) {
  EvalConfig cfg;
  const auto rep = evaluate_allocators(alloc::generate_dataset(11, 100), cfg);
  EXPECT_LT(rep.mean_total.at(Allocator::Oracle), rep.mean_total.at(Allocator::Random));
}

TEST(Mission, GoalAtSpawnCostsNothingThenGoesHome) {
  auto s = alloc::sample_scenario(3);
  s.goals[0] = s.robots[0].pose.position();
  const auto r = run_mission_simulated(s, {0, 1, 2}, {0, 1, 2}, proportional_policy());
  EXPECT_TRUE(r.robots[0].goal_reached);
  // same mission with robot 0 starting its home leg directly: identical energy, so the goal leg cost 0
  auto direct = s;
  direct.goals[0] = s.goals[0];
  std::vector<sim::TrajectoryRow> rows;
  run_mission_simulated(s, {0, 1, 2}, {0, 1, 2}, proportional_policy(), {}, &rows);
  ASSERT_FALSE(rows.empty());
  // robot 0's very first step already heads for its home
  const auto home = s.homes[0];
  const auto start = s.robots[0].pose;
  const double before = std::hypot(home.x - start.x, home.y - start.y);
  const auto first = std::find_if(rows.begin(), rows.end(), [](const sim::TrajectoryRow& t) { return t.robot_id == 0; });
  EXPECT_LE(std::hypot(home.x - first->pose.x, home.y - first->pose.y), before + 1e-12);
}

TEST(Mission, EmptyBatteryStrandsImmediately) {
  auto s = alloc::sample_scenario(3);
  s.robots[1].battery = 0.0;
  const auto r = run_mission_simulated(s, {0, 1, 2}, {0, 1, 2}, proportional_policy());
  EXPECT_TRUE(r.robots[1].stranded);
  EXPECT_EQ(r.robots[1].steps, 0);
  EXPECT_EQ(r.robots[1].energy, 0.0);
}

TEST(Mission, EnergiesNonNegativeAndSum) {
  const auto s = alloc::sample_scenario(4);
  const auto r = run_mission_simulated(s, {2, 0, 1}, {1, 2, 0}, proportional_policy());
  double sum = 0.0;
  for (const auto& m : r.robots) {
    EXPECT_GE(m.energy, 0.0);
    sum += m.energy;
  }
  EXPECT_DOUBLE_EQ(sum, r.total_energy);
}

TEST(Mission, DeterministicTrajectory) {
  const auto s = alloc::sample_scenario(5);
  std::vector<sim::TrajectoryRow> a, b;
  run_mission_simulated(s, {0, 1, 2}, {0, 1, 2}, proportional_policy(), {}, &a);
  run_mission_simulated(s, {0, 1, 2}, {0, 1, 2}, proportional_policy(), {}, &b);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].pose, b[i].pose);
}

TEST(Mission, LegBudgetMarksFailure) {
  const auto s = alloc::sample_scenario(6);
  MissionConfig cfg;
  cfg.leg_step_budget = 3;
  const auto r = run_mission_simulated(s, {0, 1, 2}, {0, 1, 2}, [](const sim::Observation&) { return sim::Action{0.0, 0.0}; }, cfg);
  for (const auto& m : r.robots) {
    EXPECT_EQ(m.final_state, Leg::Failed);
    EXPECT_EQ(m.steps, 3);
  }
}

TEST(Mission, SimulatedEnergyTracksModelPrediction) {
  // Reference controller cannot avoid obstacles, so obstacles are removed; an aborted mission has no
  // comparable total, so only scenarios where every robot gets home enter the correlation.
  std::vector<double> model, simulated, model_all, simulated_all;
  for (std::uint64_t seed = 0; model.size() < 100; ++seed) {
    ASSERT_LT(seed, 2000u);
    auto s = alloc::sample_scenario(derive_seed(40, 0, seed));
    s.obstacles.clear();
    const auto e = alloc::build_energy_matrices(s);
    const auto a = alloc::random_assign(e, alloc::batteries_of(s), seed);
    const auto r = run_mission_simulated(s, a.goal, a.home, proportional_policy());
    model_all.push_back(a.total_energy);
    simulated_all.push_back(r.total_energy);
    if (std::all_of(r.robots.begin(), r.robots.end(), [](const RobotMission& m) { return m.home_reached; })) {
      model.push_back(a.total_energy);
      simulated.push_back(r.total_energy);
    }
  }
  RecordProperty("pearson_completed", std::to_string(pearson(model, simulated)));
  RecordProperty("pearson_all", std::to_string(pearson(model_all, simulated_all)));
  EXPECT_GE(pearson(model, simulated), 0.8);
}

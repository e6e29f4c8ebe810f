#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <numbers>

#include "dream/alloc/assign.hpp"
#include "dream/alloc/io.hpp"

using namespace dream;
using namespace dream::alloc;

namespace {

EnergyMatrix goal_only(const std::vector<std::vector<double>>& rows) {
  EnergyMatrix e;
  e.robots = e.goals = e.homes = rows.size();
  for (const auto& r : rows) e.goal_leg.insert(e.goal_leg.end(), r.begin(), r.end());
  e.home_leg.assign(e.robots * e.goals * e.homes, 0.0);
  return e;
}

// Independent oracle: recursive enumeration with used-masks, no std::next_permutation.
struct BruteForce {
  const EnergyMatrix& e;
  const std::vector<double>& bat;
  double penalty;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> all_costs;

  void goals(std::vector<int>& g, unsigned used) {
    if (g.size() == e.robots) {
      std::vector<int> h;
      homes(g, h, 0u);
      return;
    }
    for (std::size_t j = 0; j < e.goals; ++j) {
      if (used & (1u << j)) continue;
      g.push_back(static_cast<int>(j));
      goals(g, used | (1u << j));
      g.pop_back();
    }
  }
  void homes(const std::vector<int>& g, std::vector<int>& h, unsigned used) {
    if (h.size() == e.robots) {
      double c = 0.0;
      for (std::size_t i = 0; i < e.robots; ++i) {
        const double need = e.goal_leg[i * e.goals + g[i]] + e.home_leg[(i * e.goals + g[i]) * e.homes + h[i]];
        c += need + (need > bat[i] ? penalty : 0.0);
      }
      all_costs.push_back(c);
      best = std::min(best, c);
      return;
    }
    for (std::size_t k = 0; k < e.homes; ++k) {
      if (used & (1u << k)) continue;
      h.push_back(static_cast<int>(k));
      homes(g, h, used | (1u << k));
      h.pop_back();
    }
  }
};

ScenarioState fixed_scenario() {
  ScenarioState s;
  s.robots = {{{1, 1, 0}, 100}, {{9, 1, std::numbers::pi / 2}, 100}, {{5, 9, -std::numbers::pi / 2}, 100}};
  s.goals = {{2, 5}, {8, 5}, {5, 5}};
  s.homes = {{1, 9}, {9, 9}, {5, 1}};
  return s;
}

}  // namespace

TEST(EnergyPair, PaperExamples) {
  EXPECT_DOUBLE_EQ(energy_from_terms({1.0, 0.0}), 10.0);
  EXPECT_DOUBLE_EQ(energy_from_terms({0.0, 0.0}), 0.0);
  EXPECT_NEAR(energy_from_terms({0.5, 0.4}), 10.0, 1e-12);
  EXPECT_DOUBLE_EQ(EnergyParams{}.battery_turn(), 12.5);
}

TEST(EnergyPair, ZeroDisplacementIsFree) {
  EXPECT_DOUBLE_EQ(energy_pair({3, 4, 2.0}, {3, 4}, 10.0), 0.0);
}

TEST(EnergyPair, StraightAheadAndBehind) {
  const double dn = std::sqrt(200.0);
  EXPECT_NEAR(energy_pair({0, 0, 0}, {dn, 0}, dn), 10.0, 1e-12);
  // facing away: full pi turn -> 12.5 extra
  EXPECT_NEAR(energy_pair({0, 0, std::numbers::pi}, {dn, 0}, dn), 22.5, 1e-12);
  EXPECT_NEAR(energy_pair({0, 0, 0}, {0, 1}, 1.0), 10.0 + 0.5 * 12.5, 1e-12);
}

TEST(EnergyPair, RejectsNonPositiveNorm) {
  EXPECT_THROW(energy_pair({0, 0, 0}, {1, 1}, 0.0), usage_error);
}

TEST(EnergyMatrix, EntriesMatchScalarRecomputation) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = sample_scenario(seed);
    const auto e = build_energy_matrices(s);
    const double dn = std::hypot(10.0, 10.0);
    ASSERT_NEAR(e.d_norm, dn, 1e-12);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& r = s.robots[i].pose;
      for (std::size_t j = 0; j < 3; ++j) {
        const double dx = s.goals[j].x - r.x, dy = s.goals[j].y - r.y;
        double turn = std::fmod(std::abs(std::atan2(dy, dx) - r.theta), 2 * std::numbers::pi);
        if (turn > std::numbers::pi) turn = 2 * std::numbers::pi - turn;
        const double eg = 10.0 * std::sqrt(dx * dx + dy * dy) / dn + 12.5 * turn / std::numbers::pi;
        EXPECT_NEAR(e.goal(i, j), eg, 1e-12);
        const double head = std::atan2(dy, dx);
        for (std::size_t k = 0; k < 3; ++k) {
          const double hx = s.homes[k].x - s.goals[j].x, hy = s.homes[k].y - s.goals[j].y;
          double t2 = std::fmod(std::abs(std::atan2(hy, hx) - head), 2 * std::numbers::pi);
          if (t2 > std::numbers::pi) t2 = 2 * std::numbers::pi - t2;
          const double eh = 10.0 * std::sqrt(hx * hx + hy * hy) / dn + 12.5 * t2 / std::numbers::pi;
          EXPECT_NEAR(e.home(i, j, k), eh, 1e-12);
        }
      }
    }
  }
}

TEST(EnergyMatrix, ColocatedGoalHasNoGoalLeg) {
  auto s = fixed_scenario();
  s.goals[0] = s.robots[0].pose.position();
  const auto e = build_energy_matrices(s);
  EXPECT_DOUBLE_EQ(e.goal(0, 0), 0.0);
}

TEST(EnergyMatrix, MirroredScenarioGivesMirroredEntries) {
  // mirror about x = 5: headings map theta -> pi - theta
  ScenarioState a;
  a.robots = {{{2, 3, 0.3}, 100}, {{8, 3, std::numbers::pi - 0.3}, 100}};
  a.goals = {{4, 7}, {6, 7}};
  a.homes = {{1, 9}, {9, 9}};
  const auto e = build_energy_matrices(a);
  EXPECT_NEAR(e.goal(0, 0), e.goal(1, 1), 1e-12);
  EXPECT_NEAR(e.goal(0, 1), e.goal(1, 0), 1e-12);
  EXPECT_NEAR(e.home(0, 0, 0), e.home(1, 1, 1), 1e-12);
  EXPECT_NEAR(e.home(0, 1, 0), e.home(1, 0, 1), 1e-12);
}

TEST(EnergyMatrix, RigidTransformInvariance) {
  const auto s = sample_scenario(3);
  const auto e0 = build_energy_matrices(s);
  const double c = std::cos(0.7), sn = std::sin(0.7);
  auto tf = [&](sim::Point2D p) { return sim::Point2D{c * p.x - sn * p.y + 3.0, sn * p.x + c * p.y - 1.0}; };
  ScenarioState t = s;
  for (auto& r : t.robots) {
    const auto p = tf(r.pose.position());
    r.pose = {p.x, p.y, sim::normalize_angle(r.pose.theta + 0.7)};
  }
  for (auto& g : t.goals) g = tf(g);
  for (auto& h : t.homes) h = tf(h);
  const auto e1 = build_energy_matrices(t);
  for (std::size_t n = 0; n < e0.goal_leg.size(); ++n) EXPECT_NEAR(e0.goal_leg[n], e1.goal_leg[n], 1e-12);
  for (std::size_t n = 0; n < e0.home_leg.size(); ++n) EXPECT_NEAR(e0.home_leg[n], e1.home_leg[n], 1e-12);
}

TEST(Oracle, ThreeByThreeExample) {
  const auto e = goal_only({{1, 2, 3}, {2, 4, 6}, {3, 6, 9}});
  const auto a = oracle_assign(e, {100, 100, 100});
  EXPECT_EQ(a.goal, (std::vector<int>{2, 1, 0}));
  EXPECT_DOUBLE_EQ(a.cost, 10.0);
  EXPECT_TRUE(a.stranded.empty());
  // independent enumeration of the six goal permutations
  BruteForce bf{e, {100, 100, 100}, 1e6, std::numeric_limits<double>::infinity(), {}};
  std::vector<int> g;
  bf.goals(g, 0u);
  std::multiset<double> goal_costs;
  for (std::size_t n = 0; n < bf.all_costs.size(); n += 6) goal_costs.insert(bf.all_costs[n]);
  EXPECT_EQ(goal_costs, (std::multiset<double>{14, 13, 13, 11, 11, 10}));
}

TEST(Oracle, IdenticalRowsTieBreakLexicographic) {
  const auto e = goal_only({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
  const auto a = oracle_assign(e, {100, 100, 100});
  EXPECT_EQ(a.goal, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(a.home, (std::vector<int>{0, 1, 2}));
}

TEST(Oracle, ZeroBatteryAlwaysStranded) {
  auto s = fixed_scenario();
  s.robots[1].battery = 0.0;
  const auto e = build_energy_matrices(s);
  const auto a = oracle_assign(e, batteries_of(s));
  EXPECT_EQ(a.stranded, (std::vector<int>{1}));
  BruteForce bf{e, batteries_of(s), 1e6, std::numeric_limits<double>::infinity(), {}};
  std::vector<int> g;
  bf.goals(g, 0u);
  EXPECT_DOUBLE_EQ(a.cost, bf.best);
  EXPECT_NEAR(a.cost, 1e6 + a.total_energy, 1e-6);
}

TEST(Oracle, MatchesIndependentEnumeratorOnRandomScenarios) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = sample_scenario(seed);
    const auto e = build_energy_matrices(s);
    const auto bat = batteries_of(s);
    const auto a = oracle_assign(e, bat);
    BruteForce bf{e, bat, 1e6, std::numeric_limits<double>::infinity(), {}};
    std::vector<int> g;
    bf.goals(g, 0u);
    ASSERT_EQ(bf.all_costs.size(), 36u);
    for (double c : bf.all_costs) EXPECT_LE(a.cost, c + 1e-9);
  }
}

TEST(Oracle, DistanceScalingKeepsArgmin) {
  EnergyParams p;
  p.turn_multiplier = 0.0;  // theta terms vanish
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto s = sample_scenario(seed);
    for (auto& r : s.robots) r.battery = 1e9;
    ScenarioState t = s;
    for (auto& r : t.robots) r.pose.x *= 2.5, r.pose.y *= 2.5;
    for (auto& g : t.goals) g.x *= 2.5, g.y *= 2.5;
    for (auto& h : t.homes) h.x *= 2.5, h.y *= 2.5;
    const auto a = oracle_assign(build_energy_matrices(s, p), batteries_of(s), p);
    const auto b = oracle_assign(build_energy_matrices(t, p), batteries_of(t), p);
    EXPECT_EQ(a.goal, b.goal);
    EXPECT_EQ(a.home, b.home);
    EXPECT_NEAR(b.total_energy, 2.5 * a.total_energy, 1e-9);
  }
}

TEST(Oracle, RejectsMoreThanEightRobots) {
  EnergyMatrix e;
  e.robots = e.goals = e.homes = 9;
  e.goal_leg.assign(81, 0.0);
  e.home_leg.assign(729, 0.0);
  EXPECT_THROW(oracle_assign(e, std::vector<double>(9, 1.0)), usage_error);
}

TEST(RandomAssign, ReproducibleAndValid) {
  const auto s = fixed_scenario();
  const auto e = build_energy_matrices(s);
  const auto a = random_assign(e, batteries_of(s), 42);
  const auto b = random_assign(e, batteries_of(s), 42);
  EXPECT_EQ(a.goal, b.goal);
  EXPECT_EQ(a.home, b.home);
  EXPECT_TRUE(is_permutation_of_range(a.goal, 3));
  EXPECT_TRUE(is_permutation_of_range(a.home, 3));
}

TEST(RandomAssign, UniformOverPermutations) {
  const auto e = goal_only({{1, 2, 3}, {2, 4, 6}, {3, 6, 9}});
  std::map<std::vector<int>, int> counts;
  for (std::uint64_t i = 0; i < 6000; ++i) ++counts[random_assign(e, {1, 1, 1}, derive_seed(5, 0, i)).goal];
  ASSERT_EQ(counts.size(), 6u);
  for (const auto& [p, c] : counts) {
    EXPECT_GE(c, 900);
    EXPECT_LE(c, 1100);
  }
}

TEST(RandomAssign, NeverBeatsOracle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = sample_scenario(seed);
    const auto e = build_energy_matrices(s);
    const auto o = oracle_assign(e, batteries_of(s));
    const auto r = random_assign(e, batteries_of(s), seed);
    EXPECT_GE(r.cost, o.cost);
  }
}

TEST(Scenario, JsonRoundTripIsExact) {
  auto s = sample_scenario(9);
  const auto back = scenario_from_json(json::parse(to_json(s).dump()));
  EXPECT_EQ(s, back);
}

TEST(Scenario, JsonlDataset) {
  const auto dir = std::filesystem::temp_directory_path() / "dream_alloc_test";
  std::filesystem::create_directories(dir);
  const auto data = generate_dataset(1, 7);
  write_jsonl(dir / "d.jsonl", data);
  EXPECT_EQ(read_jsonl(dir / "d.jsonl"), data);
  EXPECT_EQ(generate_dataset(1, 7), data);
  std::filesystem::remove_all(dir);
}

TEST(Scenario, MalformedRejected) {
  EXPECT_THROW(scenario_from_json(json::parse(R"({"robots":[{"x":1,"y":1}],"goals":[],"homes":[]})")),
               config_error);
  EXPECT_THROW(scenario_from_json(json::parse(
                   R"({"robots":[{"x":1,"y":1}],"batteries":[5],"goals":[{"x":1}],"homes":[{"x":1,"y":2}]})")),
               config_error);
}

TEST(Scenario, SampledBatteriesInRange) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (const auto& r : sample_scenario(seed).robots) {
      EXPECT_GE(r.battery, 20.0);
      EXPECT_LE(r.battery, 100.0);
    }
  }
}

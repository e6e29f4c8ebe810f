#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "dream/alloc/energy.hpp"

namespace dream::alloc {

struct Assignment {
  std::vector<int> goal;         // goal index per robot
  std::vector<int> home;         // home index per robot
  std::vector<double> energy;    // goal leg + home leg per robot
  double total_energy = 0.0;
  std::vector<int> stranded;     // robots whose required energy exceeds their battery
  double cost = 0.0;             // total_energy + penalty * |stranded|
};

inline bool is_permutation_of_range(const std::vector<int>& p, std::size_t n) {
  if (p.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (int v : p) {
    if (v < 0 || static_cast<std::size_t>(v) >= n || seen[static_cast<std::size_t>(v)]) return false;
    seen[static_cast<std::size_t>(v)] = true;
  }
  return true;
}

inline Assignment evaluate_assignment(const EnergyMatrix& e, const std::vector<double>& batteries,
                                      const std::vector<int>& goal, const std::vector<int>& home,
                                      const EnergyParams& p = {}) {
  if (!is_permutation_of_range(goal, e.goals) || !is_permutation_of_range(home, e.homes) ||
      goal.size() != e.robots || batteries.size() != e.robots) {
    throw usage_error("evaluate_assignment: goal/home must be permutations, one battery per robot");
  }
  Assignment a{goal, home, std::vector<double>(e.robots), 0.0, {}, 0.0};
  for (std::size_t i = 0; i < e.robots; ++i) {
    const auto j = static_cast<std::size_t>(goal[i]);
    const auto k = static_cast<std::size_t>(home[i]);
    a.energy[i] = e.required(i, j, k);
    a.total_energy += a.energy[i];
    if (a.energy[i] > batteries[i]) a.stranded.push_back(static_cast<int>(i));
  }
  a.cost = a.total_energy + p.stranded_penalty * static_cast<double>(a.stranded.size());
  return a;
}

inline constexpr std::size_t kMaxOracleRobots = 8;

// Exhaustive search over goal permutations x home permutations in lexicographic order; the first
// minimum wins, so ties resolve to the lexicographically smallest (goal, home) pair.
inline Assignment oracle_assign(const EnergyMatrix& e, const std::vector<double>& batteries,
                                const EnergyParams& p = {}) {
  if (e.robots != e.goals || e.robots != e.homes) throw usage_error("oracle_assign: requires R = G = H");
  if (e.robots == 0 || e.robots > kMaxOracleRobots) throw usage_error("oracle_assign: requires 1 <= R <= 8");
  if (batteries.size() != e.robots) throw usage_error("oracle_assign: one battery per robot");
  const std::size_t n = e.robots;
  std::vector<int> g(n), h(n);
  std::iota(g.begin(), g.end(), 0);
  std::vector<int> best_g, best_h;
  double best = std::numeric_limits<double>::infinity();
  do {
    std::iota(h.begin(), h.end(), 0);
    do {
      double cost = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double need = e.required(i, static_cast<std::size_t>(g[i]), static_cast<std::size_t>(h[i]));
        cost += need;
        if (need > batteries[i]) cost += p.stranded_penalty;
      }
      if (cost < best) {
        best = cost;
        best_g = g;
        best_h = h;
      }
    } while (std::next_permutation(h.begin(), h.end()));
  } while (std::next_permutation(g.begin(), g.end()));
  return evaluate_assignment(e, batteries, best_g, best_h, p);
}

inline std::vector<int> random_permutation(std::size_t n, rng_t& rng) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  // Fisher-Yates with explicit uniform draws.
  for (std::size_t i = n; i > 1; --i) {
    const auto j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

// Uniformly random goal permutation and home permutation.
inline Assignment random_assign(const EnergyMatrix& e, const std::vector<double>& batteries, std::uint64_t seed,
                                const EnergyParams& p = {}) {
  rng_t rng(seed);
  const auto g = random_permutation(e.goals, rng);
  const auto h = random_permutation(e.homes, rng);
  return evaluate_assignment(e, batteries, g, h, p);
}

}  // namespace dream::alloc

#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "dream/eval/mission.hpp"
#include "dream/gcn/train.hpp"

namespace dream::eval {

// Relative energy reduction of an allocator against random assignment.
inline double gaem_epsilon(double e_random_total, double e_other_total) {
  if (!std::isfinite(e_random_total) || !(e_random_total > 0.0)) {
    throw usage_error("gaem_epsilon: random total must be finite and > 0");
  }
  if (!std::isfinite(e_other_total)) throw usage_error("gaem_epsilon: compared total must be finite");
  return (e_random_total - e_other_total) / e_random_total;
}

inline double gaem_percent(double e_random_total, double e_other_total) {
  return 100.0 * gaem_epsilon(e_random_total, e_other_total);
}

enum class Allocator { Random, Gcn, Oracle };
enum class EvalMode { Model, Simulated };

inline std::string to_string(Allocator a) {
  switch (a) {
    case Allocator::Random: return "random";
    case Allocator::Gcn: return "gcn";
    case Allocator::Oracle: return "oracle";
  }
  return "?";
}

inline Allocator allocator_from_string(const std::string& s) {
  if (s == "random") return Allocator::Random;
  if (s == "gcn") return Allocator::Gcn;
  if (s == "oracle") return Allocator::Oracle;
  throw usage_error("unknown allocator '" + s + "' (expected random, gcn or oracle)");
}

inline std::string to_string(EvalMode m) { return m == EvalMode::Model ? "model" : "simulated"; }

inline EvalMode mode_from_string(const std::string& s) {
  if (s == "model") return EvalMode::Model;
  if (s == "simulated") return EvalMode::Simulated;
  throw usage_error("unknown mode '" + s + "' (expected model or simulated)");
}

struct EvalConfig {
  std::vector<Allocator> allocators{Allocator::Random, Allocator::Oracle};
  EvalMode mode = EvalMode::Model;
  int runs = 5;
  std::uint64_t seed = 0;
  int jobs = 1;
  alloc::EnergyParams energy;
  MissionConfig mission;
  const gcn::GcnNet* gcn = nullptr;  // required when Gcn is listed
  Policy policy;                     // required in simulated mode
};

struct EnvRow {
  int env = 0;
  std::map<Allocator, double> avg_total;  // mean over runs
  std::optional<double> eps_gcn;          // random vs gcn
  std::optional<double> eps_oracle;       // random vs oracle
};

struct GaemReport {
  EvalMode mode = EvalMode::Model;
  int runs = 0;
  std::vector<Allocator> allocators;
  std::vector<EnvRow> rows;
  std::map<Allocator, double> mean_total;
  std::optional<double> mean_eps_gcn;
  std::optional<double> mean_eps_oracle;
};

namespace detail {

inline bool has(const std::vector<Allocator>& v, Allocator a) { return std::find(v.begin(), v.end(), a) != v.end(); }

inline double energy_of(const alloc::ScenarioState& s, const alloc::EnergyMatrix& e, const std::vector<double>& bat,
                        const std::vector<int>& g, const std::vector<int>& h, const EvalConfig& cfg) {
  if (cfg.mode == EvalMode::Model) return alloc::evaluate_assignment(e, bat, g, h, cfg.energy).total_energy;
  return run_mission_simulated(s, g, h, cfg.policy, cfg.mission).total_energy;
}

inline EnvRow evaluate_env(const alloc::ScenarioState& s, int env, const EvalConfig& cfg) {
  EnvRow row;
  row.env = env;
  const auto e = alloc::build_energy_matrices(s, cfg.energy);
  const auto bat = alloc::batteries_of(s);
  for (Allocator a : cfg.allocators) {
    double sum = 0.0;
    if (a == Allocator::Random) {
      for (int r = 0; r < cfg.runs; ++r) {
        rng_t rng(derive_seed(cfg.seed, 301, static_cast<std::uint64_t>(env) * 100003u + static_cast<std::uint64_t>(r)));
        const auto g = alloc::random_permutation(e.goals, rng);
        const auto h = alloc::random_permutation(e.homes, rng);
        sum += energy_of(s, e, bat, g, h, cfg);
      }
    } else {
      // deterministic allocator and deterministic rollout: every run gives the same total
      std::vector<int> g, h;
      if (a == Allocator::Oracle) {
        const auto o = alloc::oracle_assign(e, bat, cfg.energy);
        g = o.goal;
        h = o.home;
      } else {
        const auto d = gcn::decode_assignment(cfg.gcn->infer(s));
        g = d.goal;
        h = d.home;
      }
      sum = cfg.runs * energy_of(s, e, bat, g, h, cfg);
    }
    row.avg_total[a] = sum / cfg.runs;
  }
  if (row.avg_total.count(Allocator::Random)) {
    const double rnd = row.avg_total[Allocator::Random];
    if (row.avg_total.count(Allocator::Gcn)) row.eps_gcn = gaem_epsilon(rnd, row.avg_total[Allocator::Gcn]);
    if (row.avg_total.count(Allocator::Oracle)) row.eps_oracle = gaem_epsilon(rnd, row.avg_total[Allocator::Oracle]);
  }
  return row;
}

}  // namespace detail

// Per environment: random re-drawn every run; gcn and oracle fixed per environment. Environments
// are independent and may be spread over cfg.jobs threads; rows come back in environment order.
inline GaemReport evaluate_allocators(const std::vector<alloc::ScenarioState>& envs, const EvalConfig& cfg) {
  if (envs.empty()) throw usage_error("evaluate_allocators: no environments");
  if (cfg.runs < 1) throw usage_error("evaluate_allocators: runs must be >= 1");
  if (cfg.allocators.empty()) throw usage_error("evaluate_allocators: no allocators");
  if (detail::has(cfg.allocators, Allocator::Gcn) && cfg.gcn == nullptr) {
    throw config_error("evaluate_allocators: gcn allocator requested without a gcn checkpoint");
  }
  if (cfg.mode == EvalMode::Simulated && !cfg.policy) {
    throw config_error("evaluate_allocators: simulated mode requires a policy checkpoint");
  }
  GaemReport rep;
  rep.mode = cfg.mode;
  rep.runs = cfg.runs;
  rep.allocators = cfg.allocators;
  rep.rows.resize(envs.size());
  const auto jobs = static_cast<std::size_t>(std::max(1, cfg.jobs));
  if (jobs == 1) {
    for (std::size_t i = 0; i < envs.size(); ++i) rep.rows[i] = detail::evaluate_env(envs[i], static_cast<int>(i), cfg);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (std::size_t t = 0; t < jobs; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < envs.size(); i += jobs) {
            rep.rows[i] = detail::evaluate_env(envs[i], static_cast<int>(i), cfg);
          }
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) if (e) std::rethrow_exception(e);
  }
  const auto n = static_cast<double>(rep.rows.size());
  for (Allocator a : cfg.allocators) {
    double s = 0.0;
    for (const auto& r : rep.rows) s += r.avg_total.at(a);
    rep.mean_total[a] = s / n;
  }
  auto mean_opt = [&](auto get) -> std::optional<double> {
    double s = 0.0;
    for (const auto& r : rep.rows) {
      const std::optional<double> v = get(r);
      if (!v) return std::nullopt;
      s += *v;
    }
    return s / n;
  };
  rep.mean_eps_gcn = mean_opt([](const EnvRow& r) { return r.eps_gcn; });
  rep.mean_eps_oracle = mean_opt([](const EnvRow& r) { return r.eps_oracle; });
  return rep;
}

// CSV mirroring the paper's table: env, one average column per allocator, epsilon columns (%).
inline void write_report_csv(std::ostream& os, const GaemReport& rep) {
  os.precision(10);
  os << "env";
  for (Allocator a : rep.allocators) os << ",avg_" << to_string(a);
  const bool eg = rep.mean_eps_gcn.has_value(), eo = rep.mean_eps_oracle.has_value();
  if (eg) os << ",eps_gcn_pct";
  if (eo) os << ",eps_oracle_pct";
  os << '\n';
  for (const auto& r : rep.rows) {
    os << r.env + 1;
    for (Allocator a : rep.allocators) os << ',' << r.avg_total.at(a);
    if (eg) os << ',' << 100.0 * *r.eps_gcn;
    if (eo) os << ',' << 100.0 * *r.eps_oracle;
    os << '\n';
  }
}

inline nlohmann::json report_summary(const GaemReport& rep) {
  nlohmann::json j;
  j["mode"] = to_string(rep.mode);
  j["runs"] = rep.runs;
  j["environments"] = rep.rows.size();
  j["allocators"] = nlohmann::json::array();
  for (Allocator a : rep.allocators) j["allocators"].push_back(to_string(a));
  for (const auto& [a, v] : rep.mean_total) j["mean_total"][to_string(a)] = v;
  if (rep.mean_eps_gcn) j["mean_eps_gcn"] = *rep.mean_eps_gcn;
  if (rep.mean_eps_oracle) j["mean_eps_oracle"] = *rep.mean_eps_oracle;
  return j;
}

}  // namespace dream::eval

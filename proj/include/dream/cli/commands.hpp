#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dream/alloc/io.hpp"
#include "dream/cli/config.hpp"
#include "dream/eval/mission.hpp"
#include "dream/gcn/grad_check.hpp"
#include "dream/rtd3/grad_check.hpp"

namespace dream::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

inline constexpr double kGradTolerance = 1e-4;

// Flags shared by every subcommand plus the per-command overrides, all as JSON values keyed by
// dotted config name.
struct Invocation {
  std::string config_file;
  std::string out;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, json>> overrides;
};

inline json parse_set_value(const std::string& v) {
  try {
    return json::parse(v);
  } catch (const json::parse_error&) {
    return v;  // bare words are strings
  }
}

// File (or {}) -> --set pairs -> named flags -> validated RunConfig.
inline RunConfig resolve_config(const Invocation& inv) {
  json j = inv.config_file.empty() ? json::object() : read_json_file(inv.config_file);
  if (!j.is_object()) throw config_error(inv.config_file + ": top level must be a JSON object");
  std::vector<std::string> errs;
  for (const auto& s : inv.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      errs.push_back("--set " + s + ": expected key=value");
      continue;
    }
    try {
      j[pointer_of(s.substr(0, eq))] = parse_set_value(s.substr(eq + 1));
    } catch (const json::exception& e) {
      errs.push_back("--set " + s + ": " + e.what());
    }
  }
  if (!errs.empty()) throw config_error(errs);
  for (const auto& [key, value] : inv.overrides) j[pointer_of(key)] = value;
  return config_from_json(j);
}

inline fs::path require_out(const Invocation& inv, const char* cmd) {
  if (inv.out.empty()) throw usage_error(std::string(cmd) + ": --out is required");
  fs::create_directories(inv.out);
  return inv.out;
}

inline void echo_config(const fs::path& path, const RunConfig& c) { write_json_file(path, to_json(c)); }

// A training output directory or an explicit stem both work.
inline fs::path actor_stem(const RunConfig& c, const char* why) {
  if (c.rtd3_checkpoint.empty()) throw config_error(std::string("paths.rtd3_checkpoint: required for ") + why);
  const fs::path p(c.rtd3_checkpoint);
  return fs::is_directory(p) ? p / "checkpoint" / "actor" : p;
}

inline fs::path gcn_stem(const RunConfig& c, const char* why) {
  if (c.gcn_checkpoint.empty()) throw config_error(std::string("paths.gcn_checkpoint: required for ") + why);
  const fs::path p(c.gcn_checkpoint);
  return fs::is_directory(p) ? p / "gcn" : p;
}

inline std::optional<gcn::GcnNet> maybe_gcn(const RunConfig& c, bool needed, const char* why) {
  if (!needed) return std::nullopt;
  auto net = gcn::load_gcn(gcn_stem(c, why));
  if (net.shape().robots != c.robots) {
    throw config_error("paths.gcn_checkpoint: model trained for " + std::to_string(net.shape().robots) +
                       " robots, scenario.robots is " + std::to_string(c.robots));
  }
  return net;
}

inline eval::Policy make_policy(const RunConfig& c, const char* why) {
  if (c.policy == "reference") return eval::proportional_policy(c.sim);
  auto actor = std::make_shared<rtd3::LoadedActor>(rtd3::load_actor(actor_stem(c, why), c.sim));
  return [actor](const sim::Observation& o) { return actor->act(o); };
}

inline std::vector<alloc::ScenarioState> dataset_or_generated(const RunConfig& c, std::size_t count,
                                                              std::uint64_t stream) {
  if (!c.dataset.empty()) {
    auto data = alloc::read_jsonl(c.dataset);
    if (data.empty()) throw config_error("paths.dataset: " + c.dataset + " holds no scenarios");
    if (data.size() > count) data.resize(count);
    return data;
  }
  const std::uint64_t seed = stream == 0 ? c.seed : derive_seed(c.seed, stream);
  return alloc::generate_dataset(seed, count, scenario_sampler(c));
}

// ---- subcommands ----

inline int cmd_train_rtd3(const Invocation& inv, std::ostream& out) {
  const auto cfg = resolve_config(inv);
  const auto dir = require_out(inv, "train-rtd3");
  echo_config(dir / "effective_config.json", cfg);
  auto tc = train_config(cfg);
  tc.out_dir = dir;
  const auto res = rtd3::train(tc, [&](const rtd3::EpisodeMetrics& m) {
    if ((m.episode + 1) % 25 == 0) {
      out << "episode " << m.episode + 1 << " level " << m.level << " trailing_success " << m.success_rate << "\n";
    }
  });
  const double succ = rtd3::trailing_success(res.metrics, static_cast<std::size_t>(cfg.success_window));
  json s{{"episodes", res.metrics.size()},
         {"final_level", res.final_level + 1},
         {"trailing_success", succ},
         {"seed", cfg.seed}};
  write_json_file(dir / "summary.json", s);
  out << "trailing_success " << succ << " final_level " << res.final_level + 1 << "\n";
  return kExitOk;
}

inline int cmd_gen_dataset(const Invocation& inv, std::ostream& out) {
  const auto cfg = resolve_config(inv);
  const auto dir = require_out(inv, "gen-dataset");
  echo_config(dir / "effective_config.json", cfg);
  const auto data = alloc::generate_dataset(cfg.seed, static_cast<std::size_t>(cfg.count), scenario_sampler(cfg));
  alloc::write_jsonl(dir / "dataset.jsonl", data);
  out << "wrote " << data.size() << " scenarios to " << (dir / "dataset.jsonl").string() << "\n";
  return kExitOk;
}

inline int cmd_train_gcn(const Invocation& inv, std::ostream& out) {
  const auto cfg = resolve_config(inv);
  const auto dir = require_out(inv, "train-gcn");
  echo_config(dir / "effective_config.json", cfg);
  const auto data = dataset_or_generated(cfg, static_cast<std::size_t>(cfg.count), 0);
  auto gc = gcn_config(cfg);
  gc.out_dir = dir;
  const auto res = gcn::train_gcn(data, gc, [&](const gcn::GcnEpochMetrics& m) {
    if ((m.epoch + 1) % 20 == 0) out << "epoch " << m.epoch + 1 << " loss " << m.mean_loss << "\n";
  });
  json s{{"scenarios", data.size()}, {"epochs", res.metrics.size()}, {"seed", cfg.seed}};
  if (!res.metrics.empty()) {
    const auto& m = res.metrics.back();
    s["final"] = {{"mean_loss", m.mean_loss},
                  {"mean_decoded_energy", m.mean_decoded_energy},
                  {"mean_oracle_energy", m.mean_oracle_energy},
                  {"oracle_match", m.oracle_match}};
  }
  write_json_file(dir / "summary.json", s);
  out << "checkpoint " << (dir / "gcn").string() << "\n";
  return kExitOk;
}

inline std::vector<alloc::ScenarioState> scenarios_for(const RunConfig& c, const char* cmd) {
  if (!c.scenario.empty()) return {alloc::scenario_from_json(read_json_file(c.scenario))};
  if (!c.dataset.empty()) return dataset_or_generated(c, static_cast<std::size_t>(c.count), 0);
  throw config_error(std::string(cmd) + ": set paths.scenario or paths.dataset");
}

inline alloc::Assignment assign_with(const std::string& allocator, const alloc::ScenarioState& s,
                                     const RunConfig& c, const gcn::GcnNet* net, std::uint64_t index) {
  const auto e = alloc::build_energy_matrices(s, c.energy);
  const auto bat = alloc::batteries_of(s);
  if (allocator == "oracle") return alloc::oracle_assign(e, bat, c.energy);
  if (allocator == "random") return alloc::random_assign(e, bat, derive_seed(c.seed, 302, index), c.energy);
  const auto d = gcn::decode_assignment(net->infer(s));
  return alloc::evaluate_assignment(e, bat, d.goal, d.home, c.energy);
}

inline int cmd_allocate(const Invocation& inv, std::ostream& out) {
  const auto cfg = resolve_config(inv);
  const auto dir = require_out(inv, "allocate");
  const auto data = scenarios_for(cfg, "allocate");
  const auto net = maybe_gcn(cfg, cfg.allocator == "gcn", "the gcn allocator");
  echo_config(dir / "effective_config.json", cfg);
  std::ofstream os(dir / "assignments.jsonl");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto a = assign_with(cfg.allocator, data[i], cfg, net ? &*net : nullptr, i);
    json line = alloc::to_json(a);
    line["scenario"] = i;
    line["allocator"] = cfg.allocator;
    os << line.dump() << "\n";
    total += a.total_energy;
  }
  out << "allocated " << data.size() << " scenarios with " << cfg.allocator << ", mean total energy "
      << total / static_cast<double>(data.size()) << "\n";
  return kExitOk;
}

inline int cmd_simulate(const Invocation& inv, std::ostream& out) {
  const auto cfg = resolve_config(inv);
  const auto dir = require_out(inv, "simulate");
  const auto s = cfg.scenario.empty() ? alloc::sample_scenario(derive_seed(cfg.seed, 600), scenario_sampler(cfg))
                                      : alloc::scenario_from_json(read_json_file(cfg.scenario));
  const auto net = maybe_gcn(cfg, cfg.allocator == "gcn", "the gcn allocator");
  const auto policy = make_policy(cfg, "simulate with eval.policy = rtd3");
  echo_config(dir / "effective_config.json", cfg);
  const auto a = assign_with(cfg.allocator, s, cfg, net ? &*net : nullptr, 0);
  std::vector<sim::TrajectoryRow> traj;
  const auto m = eval::run_mission_simulated(s, a.goal, a.home, policy, {cfg.sim, cfg.battery, cfg.leg_step_budget}, &traj);
  json j{{"scenario", alloc::to_json(s)},
         {"allocator", cfg.allocator},
         {"assignment", alloc::to_json(a)},
         {"model_total_energy", a.total_energy},
         {"simulated_total_energy", m.total_energy}};
  j["robots"] = json::array();
  for (const auto& r : m.robots) {
    j["robots"].push_back({{"energy", r.energy},
                           {"goal_reached", r.goal_reached},
                           {"home_reached", r.home_reached},
                           {"stranded", r.stranded},
                           {"final_state", eval::to_string(r.final_state)},
                           {"steps", r.steps}});
  }
  write_json_file(dir / "mission.json", j);
  std::ofstream t(dir / "trajectory.csv");
  sim::write_trajectory_csv(t, traj);
  out << "simulated total energy " << m.total_energy << " (model " << a.total_energy << ")\n";
  return kExitOk;
}

inline int cmd_eval_gaem(const Invocation& inv, std::ostream& out) {
  const auto cfg = resolve_config(inv);
  if (inv.out.empty()) throw usage_error("eval-gaem: --out is required");
  // --out names either the report CSV itself or a directory to hold report.csv.
  fs::path csv(inv.out);
  if (csv.extension() != ".csv") csv = csv / "report.csv";
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  fs::path stem = csv;
  stem.replace_extension();

  auto ec = eval_config(cfg);
  const bool need_gcn = eval::detail::has(ec.allocators, eval::Allocator::Gcn);
  const auto net = maybe_gcn(cfg, need_gcn, "eval.allocators containing gcn");
  if (net) ec.gcn = &*net;
  if (ec.mode == eval::EvalMode::Simulated) ec.policy = make_policy(cfg, "eval.mode = simulated");
  const auto envs = dataset_or_generated(cfg, static_cast<std::size_t>(cfg.envs), 500);
  echo_config(stem.string() + ".config.json", cfg);

  const auto rep = eval::evaluate_allocators(envs, ec);
  {
    std::ofstream os(csv);
    eval::write_report_csv(os, rep);
  }
  auto summary = eval::report_summary(rep);
  summary["seed"] = cfg.seed;
  write_json_file(stem.string() + ".summary.json", summary);
  eval::write_report_csv(out, rep);
  out << "summary " << summary.dump() << "\n";
  return kExitOk;
}

inline int cmd_gradcheck(const Invocation& inv, std::ostream& out) {
  const auto cfg = resolve_config(inv);
  const auto n = cfg.gradcheck_samples;
  const auto actor = rtd3::actor_grad_check(cfg.td3.shape, derive_seed(cfg.seed, 700), n);
  auto critic_shape = cfg.td3.shape;
  // The default critic has no dropout; check the mask path anyway.
  if (critic_shape.critic_dropout == 0.0) critic_shape.critic_dropout = 0.2;
  const auto critic = rtd3::critic_grad_check(critic_shape, derive_seed(cfg.seed, 701), n);
  auto shape = gcn_config(cfg).shape;
  const auto g = gcn::gcn_grad_check(shape, derive_seed(cfg.seed, 702), n);
  const bool ok = actor.passed(kGradTolerance) && critic.passed(kGradTolerance) && g.passed(kGradTolerance);
  const auto line = [&](const char* name, const nn::GradCheckReport& r) {
    out << name << " max_rel_error " << r.max_rel_error << " over " << r.checked << " parameters "
        << (r.passed(kGradTolerance) ? "ok" : "FAIL") << "\n";
  };
  line("actor", actor);
  line("critic", critic);
  line("gcn", g);
  if (!inv.out.empty()) {
    const auto dir = require_out(inv, "gradcheck");
    echo_config(dir / "effective_config.json", cfg);
    const auto rep = [](const nn::GradCheckReport& r) {
      return json{{"max_rel_error", r.max_rel_error}, {"checked", r.checked}, {"worst_index", r.worst_index}};
    };
    write_json_file(dir / "gradcheck.json", {{"tolerance", kGradTolerance},
                                             {"actor", rep(actor)},
                                             {"critic", rep(critic)},
                                             {"gcn", rep(g)},
                                             {"passed", ok}});
  }
  return ok ? kExitOk : kExitFailure;
}

inline int cmd_paramcount(const Invocation& inv, std::ostream& out) {
  const auto cfg = resolve_config(inv);
  const auto c = rtd3::count_parameters(cfg.td3.shape);
  out << "refined_actor " << c.refined_actor << "\nbaseline_actor " << c.baseline_actor << "\nrefined_critic "
      << c.refined_critic << "\nbaseline_critic " << c.baseline_critic << "\nactor_ratio " << c.actor_ratio()
      << "\ntotal_ratio " << c.total_ratio() << "\n";
  if (!inv.out.empty()) {
    const auto dir = require_out(inv, "paramcount");
    echo_config(dir / "effective_config.json", cfg);
    write_json_file(dir / "paramcount.json", {{"refined_actor", c.refined_actor},
                                              {"baseline_actor", c.baseline_actor},
                                              {"refined_critic", c.refined_critic},
                                              {"baseline_critic", c.baseline_critic},
                                              {"actor_ratio", c.actor_ratio()},
                                              {"total_ratio", c.total_ratio()}});
  }
  return kExitOk;
}

// ---- dispatch ----

namespace detail {

// Registers a flag whose value, when given, overrides the dotted config key.
template <typename T>
void override_flag(CLI::App* app, Invocation& inv, std::vector<std::function<void()>>& apply, const std::string& flag,
                   const std::string& key, const std::string& help) {
  auto value = std::make_shared<T>();
  CLI::Option* opt = app->add_option(flag, *value, help + " [" + key + "]");
  apply.push_back([opt, value, key, &inv] {
    if (opt->count() > 0) inv.overrides.emplace_back(key, json(*value));
  });
}

inline void list_flag(CLI::App* app, Invocation& inv, std::vector<std::function<void()>>& apply,
                      const std::string& flag, const std::string& key, const std::string& help) {
  auto value = std::make_shared<std::vector<std::string>>();
  CLI::Option* opt = app->add_option(flag, *value, help + " [" + key + "]")->delimiter(',');
  apply.push_back([opt, value, key, &inv] {
    if (opt->count() > 0) inv.overrides.emplace_back(key, json(*value));
  });
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Energy-aware multi-robot navigation and task allocation toolkit", "dream"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand and flag");

  Invocation inv;
  std::vector<std::function<void()>> apply;
  using Handler = int (*)(const Invocation&, std::ostream&);
  std::vector<std::pair<CLI::App*, Handler>> handlers;

  const auto add = [&](const char* name, const char* help, Handler h) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", inv.config_file, "JSON run config; unset keys take defaults")->check(CLI::ExistingFile);
    sub->add_option("--out", inv.out, "output directory");
    sub->add_option("--set", inv.sets, "override any config key, e.g. --set rtd3.gamma=0.95 (repeatable)");
    detail::override_flag<std::uint64_t>(sub, inv, apply, "--seed", "seed", "master seed");
    handlers.emplace_back(sub, h);
    return sub;
  };

  auto* t = add("train-rtd3", "train the navigation policy with the curriculum", cmd_train_rtd3);
  detail::override_flag<int>(t, inv, apply, "--episodes", "rtd3.episodes", "training episodes");
  detail::override_flag<int>(t, inv, apply, "--start-level", "rtd3.start_level", "first curriculum level (1-based)");
  detail::override_flag<int>(t, inv, apply, "--checkpoint-interval", "rtd3.checkpoint_interval",
                             "episodes between checkpoints, 0 = final only");

  auto* g = add("train-gcn", "train the allocation network on random scenarios", cmd_train_gcn);
  detail::override_flag<int>(g, inv, apply, "--epochs", "gcn.epochs", "training epochs");
  detail::override_flag<int>(g, inv, apply, "--count", "scenario.count", "scenarios to generate");
  detail::override_flag<std::string>(g, inv, apply, "--dataset", "paths.dataset", "JSONL dataset instead of generating");

  auto* d = add("gen-dataset", "write random multi-robot scenarios as JSONL", cmd_gen_dataset);
  detail::override_flag<int>(d, inv, apply, "--count", "scenario.count", "number of scenarios");
  detail::override_flag<int>(d, inv, apply, "--robots", "scenario.robots", "robots (= goals = homes)");

  auto* a = add("allocate", "assign goals and homes for given scenarios", cmd_allocate);
  detail::override_flag<std::string>(a, inv, apply, "--allocator", "eval.allocator", "random | gcn | oracle");
  detail::override_flag<std::string>(a, inv, apply, "--scenario", "paths.scenario", "single scenario JSON");
  detail::override_flag<std::string>(a, inv, apply, "--dataset", "paths.dataset", "JSONL scenarios");
  detail::override_flag<std::string>(a, inv, apply, "--gcn-checkpoint", "paths.gcn_checkpoint",
                                     "GCN stem or train-gcn output directory");

  auto* s = add("simulate", "run one allocated mission in the simulator", cmd_simulate);
  detail::override_flag<std::string>(s, inv, apply, "--allocator", "eval.allocator", "random | gcn | oracle");
  detail::override_flag<std::string>(s, inv, apply, "--scenario", "paths.scenario",
                                     "scenario JSON; drawn from the seed when absent");
  detail::override_flag<std::string>(s, inv, apply, "--policy", "eval.policy", "rtd3 | reference");
  detail::override_flag<std::string>(s, inv, apply, "--checkpoint", "paths.rtd3_checkpoint",
                                     "actor stem or train-rtd3 output directory");
  detail::override_flag<std::string>(s, inv, apply, "--gcn-checkpoint", "paths.gcn_checkpoint",
                                     "GCN stem or train-gcn output directory");

  auto* e = add("eval-gaem", "compare allocators and report energy savings", cmd_eval_gaem);
  detail::override_flag<int>(e, inv, apply, "--envs", "eval.envs", "number of environments");
  detail::override_flag<int>(e, inv, apply, "--runs", "eval.runs", "runs per environment");
  detail::list_flag(e, inv, apply, "--allocators", "eval.allocators", "comma list of random, gcn, oracle");
  detail::override_flag<std::string>(e, inv, apply, "--mode", "eval.mode", "model | simulated");
  detail::override_flag<int>(e, inv, apply, "--jobs", "eval.jobs", "environments evaluated in parallel");
  detail::override_flag<std::string>(e, inv, apply, "--dataset", "paths.dataset", "JSONL environments");
  detail::override_flag<std::string>(e, inv, apply, "--policy", "eval.policy", "rtd3 | reference");
  detail::override_flag<std::string>(e, inv, apply, "--checkpoint", "paths.rtd3_checkpoint",
                                     "actor stem or train-rtd3 output directory");
  detail::override_flag<std::string>(e, inv, apply, "--gcn-checkpoint", "paths.gcn_checkpoint",
                                     "GCN stem or train-gcn output directory");

  auto* c = add("gradcheck", "finite-difference check of actor, critic and GCN gradients", cmd_gradcheck);
  detail::override_flag<std::size_t>(c, inv, apply, "--samples", "gradcheck.samples", "parameters checked per network");

  add("paramcount", "refined vs baseline parameter counts", cmd_paramcount);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForHelp&) {
    const auto parsed = app.get_subcommands();
    out << (parsed.empty() ? app.help() : parsed.front()->help());
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n\n";
    const auto parsed = app.get_subcommands();
    err << (parsed.empty() ? app.help() : parsed.front()->help());
    return kExitUsage;
  }

  for (const auto& f : apply) f();
  try {
    for (const auto& [sub, h] : handlers) {
      if (sub->parsed()) return h(inv, out);
    }
    err << app.help();
    return kExitUsage;
  } catch (const config_error& ex) {
    err << "config error:\n";
    for (const auto& item : ex.items()) err << "  " << item << "\n";
    return kExitUsage;
  } catch (const usage_error& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "failed: " << ex.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace dream::cli

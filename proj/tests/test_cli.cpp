#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "dream/cli/commands.hpp"

using namespace dream;
using namespace dream::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result dream_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dream");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("dream_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::vector<std::string> config_errors(const json& j) {
  try {
    config_from_json(j);
  } catch (const config_error& e) {
    return e.items();
  }
  return {};
}

bool mentions(const std::vector<std::string>& items, const std::string& what) {
  for (const auto& s : items)
    if (s.find(what) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Config, EmptyObjectIsFullDefault) {
  const auto c = config_from_json(json::object());
  EXPECT_EQ(to_json(c), to_json(RunConfig{}));
  EXPECT_EQ(c.td3.gamma, 0.99);
  EXPECT_EQ(c.gcn_lr, 0.005);
  EXPECT_EQ(c.gcn_shape.dropout, 0.5);
  EXPECT_EQ(c.gcn_weights.stranded, 100.0);
  EXPECT_EQ(c.energy.battery_straight, 10.0);
  EXPECT_EQ(c.curriculum.size(), 3u);
}

TEST(Config, EchoRoundTrips) {
  RunConfig c;
  c.seed = 99;
  c.td3.gamma = 0.9;
  c.allocators = {"gcn"};
  c.curriculum[0].max_goal_distance = 2.5;
  const json j = to_json(c);
  EXPECT_EQ(to_json(config_from_json(j)), j);
}

TEST(Config, DropoutOutOfRangeIsFieldLevel) {
  const auto errs = config_errors({{"gcn", {{"dropout", 1.5}}}});
  ASSERT_EQ(errs.size(), 1u);
  EXPECT_NE(errs[0].find("gcn.dropout"), std::string::npos);
  EXPECT_TRUE(mentions(config_errors({{"rtd3", {{"actor_dropout", -0.1}}}}), "rtd3.actor_dropout"));
}

TEST(Config, UnknownKeysAndTypesAreItemized) {
  const json j = {{"rtd3", {{"gama", 0.9}, {"batch_size", 2.5}}},
                  {"colour", "red"},
                  {"eval", {{"mode", "vibes"}}},
                  {"sim", 3}};
  const auto errs = config_errors(j);
  EXPECT_TRUE(mentions(errs, "rtd3.gama: unknown key"));
  EXPECT_TRUE(mentions(errs, "colour: unknown key"));
  EXPECT_TRUE(mentions(errs, "rtd3.batch_size: expected an integer"));
  EXPECT_TRUE(mentions(errs, "eval.mode"));
  EXPECT_TRUE(mentions(errs, "sim: expected an object"));
  EXPECT_EQ(errs.size(), 5u);
}

TEST(Config, CurriculumLevelsValidated) {
  const auto errs = config_errors({{"curriculum", {{{"placement", "sideways"}, {"advance_window", 0}, {"extra", 1}}}}});
  EXPECT_TRUE(mentions(errs, "curriculum[0].placement"));
  EXPECT_TRUE(mentions(errs, "curriculum[0].advance_window"));
  EXPECT_TRUE(mentions(errs, "curriculum[0].extra: unknown key"));
  const auto c = config_from_json({{"curriculum", {{{"max_goal_distance", 2.0}}}}, {"scenario", {{"level", 1}}}});
  ASSERT_EQ(c.curriculum.size(), 1u);
  EXPECT_EQ(c.curriculum[0].max_goal_distance, 2.0);
  EXPECT_EQ(c.curriculum[0].fixed_layout.size(), 4u);  // rest of the level keeps its default
}

TEST(Cli, GammaOverrideReachesEchoedConfig) {
  const auto dir = scratch("gamma");
  write(dir / "cfg.json", R"({"rtd3": {"gamma": 0.97}})");
  auto r = dream_cli({"paramcount", "--config", (dir / "cfg.json").string(), "--out", (dir / "a").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_json_file(dir / "a" / "effective_config.json")["rtd3"]["gamma"], 0.97);

  // --set beats the file; named flags beat --set.
  r = dream_cli({"paramcount", "--config", (dir / "cfg.json").string(), "--set", "rtd3.gamma=0.99", "--set",
                 "seed=5", "--seed", "6", "--out", (dir / "b").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto echoed = read_json_file(dir / "b" / "effective_config.json");
  EXPECT_EQ(echoed["rtd3"]["gamma"], 0.99);
  EXPECT_EQ(echoed["seed"], 6);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(dream_cli({"paramcount"}).code, 0);
  EXPECT_EQ(dream_cli({}).code, 1);
  EXPECT_EQ(dream_cli({"fly"}).code, 1);
  const auto flag = dream_cli({"paramcount", "--warp"});
  EXPECT_EQ(flag.code, 1);
  EXPECT_NE(flag.err.find("Usage"), std::string::npos);  // help text comes with the error
  EXPECT_EQ(dream_cli({"paramcount", "--set", "gcn.dropout=1.5"}).code, 1);
  EXPECT_EQ(dream_cli({"gen-dataset", "--count", "2"}).code, 1);  // no --out
  const auto dir = scratch("exit");
  // gcn allocator without a checkpoint is a configuration error
  const auto r = dream_cli({"eval-gaem", "--allocators", "random,gcn", "--out", (dir / "r.csv").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("paths.gcn_checkpoint"), std::string::npos);
  // a diverging optimiser is a runtime failure
  const auto boom = dream_cli({"train-gcn", "--count", "8", "--epochs", "3", "--set", "gcn.lr=1e300", "--out",
                               (dir / "g").string()});
  EXPECT_EQ(boom.code, 2) << boom.err;
}

TEST(Cli, EvalGaemExample) {
  const auto dir = scratch("gaem");
  const auto csv = dir / "report.csv";
  const auto r = dream_cli({"eval-gaem", "--envs", "5", "--runs", "5", "--allocators", "random,oracle", "--mode",
                            "model", "--seed", "7", "--out", csv.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(csv);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0], "env,avg_random,avg_oracle,eps_oracle_pct");
  const auto summary = read_json_file(dir / "report.summary.json");
  EXPECT_EQ(summary["environments"], 5);
  EXPECT_TRUE(summary.contains("mean_eps_oracle"));
  EXPECT_EQ(read_json_file(dir / "report.config.json")["seed"], 7);
}

TEST(Cli, EvalGaemJobsDoNotChangeOutput) {
  const auto dir = scratch("jobs");
  ASSERT_EQ(dream_cli({"eval-gaem", "--envs", "6", "--jobs", "1", "--out", (dir / "a.csv").string()}).code, 0);
  ASSERT_EQ(dream_cli({"eval-gaem", "--envs", "6", "--jobs", "3", "--out", (dir / "b.csv").string()}).code, 0);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
}

TEST(Cli, RerunFromEchoedConfigIsBitIdentical) {
  const auto dir = scratch("rerun");
  ASSERT_EQ(dream_cli({"gen-dataset", "--count", "30", "--seed", "11", "--out", (dir / "d1").string()}).code, 0);
  ASSERT_EQ(dream_cli({"gen-dataset", "--config", (dir / "d1" / "effective_config.json").string(), "--out",
                       (dir / "d2").string()})
                .code,
            0);
  EXPECT_EQ(slurp(dir / "d1" / "dataset.jsonl"), slurp(dir / "d2" / "dataset.jsonl"));

  const std::vector<std::string> gcn_args = {"train-gcn", "--count", "24", "--epochs", "3", "--seed", "2"};
  auto a = gcn_args, b = gcn_args;
  a.insert(a.end(), {"--out", (dir / "g1").string()});
  ASSERT_EQ(dream_cli(a).code, 0);
  ASSERT_EQ(dream_cli({"train-gcn", "--config", (dir / "g1" / "effective_config.json").string(), "--out",
                       (dir / "g2").string()})
                .code,
            0);
  for (const char* f : {"gcn.bin", "gcn.json", "gcn_metrics.csv", "summary.json"}) {
    EXPECT_EQ(slurp(dir / "g1" / f), slurp(dir / "g2" / f)) << f;
  }
}

TEST(Cli, AllocateAndSimulate) {
  const auto dir = scratch("alloc");
  ASSERT_EQ(dream_cli({"gen-dataset", "--count", "4", "--out", (dir / "d").string()}).code, 0);
  const auto ds = (dir / "d" / "dataset.jsonl").string();
  auto r = dream_cli({"allocate", "--dataset", ds, "--allocator", "oracle", "--out", (dir / "a").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir / "a" / "assignments.jsonl");
  int n = 0;
  for (std::string l; std::getline(in, l); ++n) {
    const auto j = json::parse(l);
    EXPECT_EQ(j["allocator"], "oracle");
    EXPECT_EQ(j["goals"].size(), 3u);
  }
  EXPECT_EQ(n, 4);

  r = dream_cli({"simulate", "--policy", "reference", "--seed", "3", "--out", (dir / "s").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = read_json_file(dir / "s" / "mission.json");
  EXPECT_EQ(m["robots"].size(), 3u);
  EXPECT_GE(m["simulated_total_energy"].get<double>(), 0.0);
  EXPECT_EQ(slurp(dir / "s" / "trajectory.csv").rfind("step,robot_id,x,y,theta", 0), 0u);
  EXPECT_EQ(dream_cli({"simulate", "--seed", "3", "--out", (dir / "t").string()}).code, 1);  // rtd3 policy, no checkpoint
}

TEST(Cli, TrainRtd3WritesCheckpointAndConfig) {
  const auto dir = scratch("rtd3");
  const auto r = dream_cli({"train-rtd3", "--episodes", "1", "--set", "rtd3.warmup_steps=20", "--out",
                            (dir / "r").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "r" / "checkpoint" / "actor.bin"));
  EXPECT_TRUE(fs::exists(dir / "r" / "metrics.csv"));
  EXPECT_EQ(read_json_file(dir / "r" / "effective_config.json")["rtd3"]["episodes"], 1);
  // the run directory doubles as a checkpoint argument
  EXPECT_EQ(dream_cli({"simulate", "--checkpoint", (dir / "r").string(), "--out", (dir / "s").string()}).code, 0);
}

TEST(Cli, GradcheckAndParamcount) {
  const auto g = dream_cli({"gradcheck", "--samples", "100"});
  EXPECT_EQ(g.code, 0) << g.out;
  for (const char* net : {"actor", "critic", "gcn"}) EXPECT_NE(g.out.find(std::string(net) + " max_rel_error"), std::string::npos);
  const auto p = dream_cli({"paramcount"});
  EXPECT_NE(p.out.find("refined_actor 42882"), std::string::npos);
  EXPECT_NE(p.out.find("baseline_actor 512602"), std::string::npos);
}

TEST(Cli, HelpListsEveryFlag) {
  const auto r = dream_cli({"--help-all"});
  EXPECT_EQ(r.code, 0);
  for (const char* flag : {"--config", "--out", "--set", "--seed", "--episodes", "--start-level",
                           "--checkpoint-interval", "--epochs", "--count", "--dataset", "--robots", "--allocator",
                           "--scenario", "--gcn-checkpoint", "--policy", "--checkpoint", "--envs", "--runs",
                           "--allocators", "--mode", "--jobs", "--samples"}) {
    EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
  }
  for (const char* sub : {"train-rtd3", "train-gcn", "gen-dataset", "allocate", "simulate", "eval-gaem", "gradcheck",
                          "paramcount"}) {
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  }
}

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "commands.hpp"
#include "config.hpp"
#include "csv.hpp"

using namespace grpolab;
using namespace grpolab::cli;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_run_config(in);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / (name + "-" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const char* kSmallRun =
    "[task]\nfamily = kofv\nvocab_size = 4\nseq_len = 2\nk = 1\nnum_prompts = 6\n"
    "[trainer]\nprompts_per_batch = 3\ngroup_size = 4\nbase_lr = 4\nepochs = 3\nseed = 9\n";

}  // namespace

TEST_CASE("config defaults and overrides") {
  const auto c = parse("[trainer]\ngroup_size = 16\nprompts_per_batch = 8\n"
                       "lr_scaling = linear\nreference_prompts = 4\n[objective]\nkind = grpo\n");
  CHECK(c.trainer.group_size == 16);
  CHECK(c.trainer.prompts_per_batch == 8);
  CHECK(c.trainer.lr_scaling == LrScaling::linear);
  CHECK(c.trainer.learning_rate() == doctest::Approx(2.0 * c.trainer.base_lr));
  CHECK(c.trainer.objective.kind == ObjectiveKind::grpo);
  CHECK(c.task.family == "needle");
}

TEST_CASE("config round trip through its text form") {
  const auto c = parse(kSmallRun);
  const auto again = parse(format_run_config(c));
  CHECK(format_run_config(again) == format_run_config(c));
  CHECK(again.trainer.seed == 9);
  CHECK(again.task.k == 1);
}

TEST_CASE("config rejects bad input") {
  CHECK_THROWS_AS(parse("[trainer]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[nowhere]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("stray = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[trainer]\nepochs = many\n"), ConfigError);
  CHECK_THROWS_AS(parse("[trainer]\nbase_lr = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[objective]\nkind = sarsa\n"), ConfigError);
  CHECK_THROWS_AS(parse("[task]\nfamily = maze\n"), ConfigError);
  try {
    parse("[trainer]\ngroup_size = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("group size must be ≥ 2") != std::string::npos);
  }
}

TEST_CASE("csv formatting") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(2.0) == "2");
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_record({"a", "b"}) == "a,b\r\n");
}

TEST_CASE("csv round trip") {
  const std::vector<std::vector<std::string>> rows = {
      {"x", "with,comma", "quote\"d", ""}, {"line\nbreak", "1e-300", "-0"}};
  std::string text;
  for (const auto& r : rows) text += csv_record(r);
  CHECK(parse_csv(text) == rows);
  CHECK(parse_csv("a,b\nc,d\n") == std::vector<std::vector<std::string>>{{"a", "b"}, {"c", "d"}});
  CHECK_THROWS(parse_csv_record("\"open"));
  for (double x : {0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, -2.5}) {
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }
}

TEST_CASE("metrics csv is a pure function of the record") {
  RunRecord record;
  StepMetrics m;
  m.step = 1;
  m.epoch = 1;
  m.learning_rate = 0.1;
  m.expected_reward = 1.0 / 3.0;
  m.cumulative_rollouts = 16;
  record.rows.push_back(m);
  record.elapsed_seconds.push_back(0.5);
  const auto text = metrics_csv(record);
  CHECK(text.rfind("step,epoch,learning_rate,", 0) == 0);
  CHECK(text.find("1,1,0.10000000000000001,0,0.33333333333333331,") != std::string::npos);
  record.elapsed_seconds[0] = 99.0;
  CHECK(metrics_csv(record) == text);
}

TEST_CASE("output root precedence") {
  CommonOptions opts;
  ::setenv(kOutputEnv, "/from/env", 1);
  CHECK(resolve_output_root(opts) == "/from/env");
  CHECK(resolve_output_root(opts, "/from/config") == "/from/config");
  opts.out = "/from/flag";
  CHECK(resolve_output_root(opts, "/from/config") == "/from/flag");
  ::unsetenv(kOutputEnv);
  CHECK(resolve_output_root(CommonOptions{}) == "runs");
}

TEST_CASE("sweep configurations") {
  auto base = parse("[trainer]\nprompts_per_batch = 8\ngroup_size = 16\nbase_lr = 1\n"
                    "lr_scaling = linear\n[objective]\nkind = grpo\n");
  SweepOptions opts;
  opts.group_sizes = {16, 2, 4, 8};
  const auto configs = sweep_configs(base, opts);
  REQUIRE(configs.size() == 4);
  const std::size_t steps = configs.front().trainer.total_steps(20);
  for (const auto& c : configs) {
    CHECK(c.trainer.rollouts_per_step() == 128);
    CHECK(c.trainer.total_steps(20) == steps);
    CHECK(c.trainer.effective_reference_prompts() == 8);
  }
  CHECK(configs.front().trainer.group_size == 2);
  CHECK(configs.front().trainer.prompts_per_batch == 64);
  CHECK(configs.front().trainer.learning_rate() == doctest::Approx(8.0));
  CHECK(configs.back().trainer.learning_rate() == doctest::Approx(1.0));

  opts.group_sizes = {3};
  CHECK_THROWS_AS(sweep_configs(base, opts), std::invalid_argument);

  opts.group_sizes = {2, 4};
  opts.mode = SweepMode::fixed_prompts;
  for (const auto& c : sweep_configs(base, opts)) CHECK(c.trainer.prompts_per_batch == 8);

  base.trainer.objective.kind = ObjectiveKind::two_grpo;
  base.trainer.group_size = 2;
  const auto mixed = sweep_configs(base, opts);
  CHECK(mixed[0].trainer.objective.kind == ObjectiveKind::two_grpo);
  CHECK(mixed[1].trainer.objective.kind == ObjectiveKind::grpo);
}

TEST_CASE("train writes a reproducible run directory") {
  TempDir tmp("grpolab-cli-train");
  const auto config = tmp.path / "run.ini";
  std::ofstream(config) << kSmallRun;
  std::ostringstream out, err;
  CommonOptions common;
  common.out = tmp.path / "a";
  REQUIRE(cmd_train(config, common, out, err) == kExitOk);
  common.out = tmp.path / "b";
  REQUIRE(cmd_train(config, common, out, err) == kExitOk);
  const auto a = fs::directory_iterator(tmp.path / "a")->path();
  const auto b = fs::directory_iterator(tmp.path / "b")->path();
  for (const char* f : {"config.ini", "metrics.csv", "summary.csv", "timing.csv"}) {
    CHECK(fs::exists(a / f));
  }
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(a.filename().string().find("seed9") != std::string::npos);
  // 3 epochs of ceil(6/3) steps.
  CHECK(parse_csv(slurp(a / "metrics.csv")).size() == 1 + 6);

  common.seed = 10;
  common.out = tmp.path / "c";
  REQUIRE(cmd_train(config, common, out, err) == kExitOk);
  const auto c = fs::directory_iterator(tmp.path / "c")->path();
  CHECK(slurp(c / "metrics.csv") != slurp(a / "metrics.csv"));
}

TEST_CASE("train reports config errors as usage errors") {
  TempDir tmp("grpolab-cli-bad");
  const auto config = tmp.path / "run.ini";
  std::ofstream(config) << "[trainer]\ngroup_size = 1\n";
  std::ostringstream out, err;
  CHECK(cmd_train(config, CommonOptions{}, out, err) == kExitUsage);
  CHECK(err.str().find("group size must be ≥ 2") != std::string::npos);
  CHECK(cmd_train(tmp.path / "missing.ini", CommonOptions{}, out, err) == kExitUsage);
}

TEST_CASE("verify command") {
  TempDir tmp("grpolab-cli-verify");
  std::ostringstream out, err;
  CommonOptions common;
  common.out = tmp.path;
  CHECK(cmd_verify("nonsense", {}, common, out, err) == kExitUsage);
  VerifyOptions opts;
  opts.p = 0.5;
  opts.group_size = 2;
  CHECK(cmd_verify("advantage-limits", opts, common, out, err) == kExitOk);
  const auto rows = parse_csv(slurp(tmp.path / "verify-advantage-limits.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].front() == "check");
  CHECK(rows[1].back() == "pass");

  VerifyOptions bad;
  bad.p = 1.5;
  CHECK(cmd_verify("advantage-limits", bad, common, out, err) == kExitUsage);

  VerifyOptions violated;
  violated.schedule = {0.3, 0.1};
  violated.trials = 1000;
  CHECK(cmd_verify("hard-question", violated, common, out, err) == kExitFailure);
  CHECK(out.str().find("out of assumption") != std::string::npos);
}

TEST_CASE("report skips corrupt inputs") {
  TempDir tmp("grpolab-cli-report");
  const auto config = tmp.path / "run.ini";
  std::ofstream(config) << kSmallRun;
  std::ostringstream out, err;
  CommonOptions common;
  common.out = tmp.path / "runs";
  REQUIRE(cmd_train(config, common, out, err) == kExitOk);
  const auto run = fs::directory_iterator(tmp.path / "runs")->path();
  const auto bad = tmp.path / "bad.csv";
  std::ofstream(bad) << "not,a,metrics,file\n";
  common.out = tmp.path / "report";
  std::ostringstream rout, rerr;
  CHECK(cmd_report({run, bad}, common, rout, rerr) == kExitFailure);
  CHECK(rerr.str().find("bad.csv") != std::string::npos);
  const auto rows = parse_csv(slurp(tmp.path / "report" / "report.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][0] == run.filename().string());
  CHECK(rows[1][1] == "6");
  CHECK(cmd_report({run}, common, rout, rerr) == kExitOk);
  CHECK(cmd_report({}, common, rout, rerr) == kExitUsage);
}

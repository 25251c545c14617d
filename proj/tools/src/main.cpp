#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"

namespace cli = grpolab::cli;

int main(int argc, char** argv) {
  CLI::App app{"grpolab: group-relative policy optimization on synthetic verifiable-reward tasks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "grpolab 0.1.0");

  cli::CommonOptions common;
  std::string out_dir;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", out_dir, "output root directory (default: $GRPOLAB_OUT or ./runs)");
    sub->add_option("--seed", seed, "random seed");
  };

  std::string config_path;
  auto* train = app.add_subcommand("train", "train one configuration");
  train->add_option("config", config_path, "run configuration (.ini)")->required();
  add_common(train);

  std::string check;
  cli::VerifyOptions verify_opts;
  auto* verify = app.add_subcommand("verify", "run a statistical or gradient check");
  verify->add_option("check", check, "advantage-limits | scaling-identity | gradient-variance | "
                                     "hard-question | decomposition | finite-difference | all")
      ->required();
  verify->add_option("--p", verify_opts.p, "success probability");
  verify->add_option("-g,--g,--group-size", verify_opts.group_size, "group size G");
  verify->add_option("--groups", verify_opts.num_groups, "number of simulated groups or batches");
  verify->add_option("--pairs", verify_opts.num_pairs, "number of simulated pairs");
  verify->add_option("--adv-eps", verify_opts.adv_eps, "advantage normalization epsilon");
  verify->add_option("--schedule", verify_opts.schedule, "per-round success probabilities")
      ->delimiter(',');
  verify->add_option("--batch-sizes", verify_opts.batch_sizes, "rollouts per batch")
      ->delimiter(',');
  verify->add_option("--trials", verify_opts.trials, "Monte-Carlo trials");
  verify->add_option("--objective", verify_opts.objective, "objective kind");
  verify->add_option("--prompts", verify_opts.prompts, "prompts per batch");
  verify->add_option("--instances", verify_opts.instances, "random instances per objective");
  add_common(verify);

  cli::SweepOptions sweep_opts;
  std::string mode = "budget";
  std::size_t budget = 0;
  auto* sweep = app.add_subcommand("sweep", "train one configuration per group size");
  sweep->add_option("config", config_path, "base run configuration (.ini)")->required();
  sweep->add_option("--groups", sweep_opts.group_sizes, "group sizes")->delimiter(',');
  sweep->add_option("--mode", mode, "budget (fixed Q*G) or fixed-q")
      ->check(CLI::IsMember({"budget", "fixed-q"}));
  sweep->add_option("--budget", budget, "rollouts per step in budget mode");
  add_common(sweep);

  std::vector<std::filesystem::path> runs;
  auto* report = app.add_subcommand("report", "summarize run directories");
  report->add_option("runs", runs, "run directories or metrics.csv files")->required();
  add_common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  for (auto* sub : {train, verify, sweep, report}) {
    if (!sub->parsed()) continue;
    if (sub->count("--out") > 0) common.out = out_dir;
    if (sub->count("--seed") > 0) common.seed = seed;
  }

  if (*train) return cli::cmd_train(config_path, common, std::cout, std::cerr);
  if (*verify) return cli::cmd_verify(check, verify_opts, common, std::cout, std::cerr);
  if (*sweep) {
    sweep_opts.mode = mode == "budget" ? cli::SweepMode::budget_matched : cli::SweepMode::fixed_prompts;
    if (sweep->count("--budget") > 0) sweep_opts.budget = budget;
    return cli::cmd_sweep(config_path, sweep_opts, common, std::cout, std::cerr);
  }
  return cli::cmd_report(runs, common, std::cout, std::cerr);
}

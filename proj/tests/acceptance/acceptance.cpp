// Acceptance suite: one PASS/FAIL line per criterion. Exit status 0 iff all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "commands.hpp"
#include "config.hpp"
#include "grpolab/advantage.hpp"
#include "grpolab/objectives.hpp"
#include "grpolab/policy.hpp"
#include "grpolab/tasks.hpp"
#include "grpolab/trainer.hpp"
#include "grpolab/verify.hpp"

using namespace grpolab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Worst |estimate - target| / tolerance over all measurements.
double worst_margin(const std::vector<CheckReport>& reports) {
  double worst = 0.0;
  for (const auto& r : reports) {
    for (const auto& m : r.measurements) {
      if (m.tolerance > 0.0) worst = std::max(worst, std::abs(m.estimate - m.target) / m.tolerance);
    }
  }
  return worst;
}

bool all_passed(const std::vector<CheckReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.passed(); });
}

std::string failures(const std::vector<CheckReport>& reports) {
  std::string out;
  for (const auto& r : reports) {
    for (const auto& m : r.measurements) {
      if (m.status == CheckStatus::pass) continue;
      out += fmt::format(" [{} {}: {:.6g} vs {:.6g} tol {:.3g}]", r.name, m.label, m.estimate,
                         m.target, m.tolerance);
    }
  }
  return out;
}

Outcome pairwise_limits() {
  const auto start = Clock::now();
  Rng rng(101);
  std::vector<CheckReport> reports;
  for (double p : {0.1, 0.5, 0.9}) reports.push_back(check_advantage_limits(p, 2, 100000, 1e-8, rng, 0.01));
  const double elapsed = seconds_since(start);
  const bool ok = all_passed(reports) && elapsed < 10.0;
  return {ok, fmt::format("p in {{0.1,0.5,0.9}}, 1e5 pairs, worst |err|/tol {:.3f}, {:.2f}s (< 10s){}",
                          worst_margin(reports), elapsed, failures(reports))};
}

Outcome large_group_limits() {
  const auto start = Clock::now();
  Rng rng(102);
  std::vector<CheckReport> reports;
  for (double p : {0.25, 0.5}) reports.push_back(check_advantage_limits(p, 1024, 10000, 1e-8, rng, 0.05));
  // The band is the fixed 0.05 here, not widened by the standard error.
  bool within = true;
  double worst = 0.0;
  for (const auto& r : reports) {
    for (const auto& m : r.measurements) {
      const double err = std::abs(m.estimate - m.target);
      worst = std::max(worst, err);
      within = within && m.status != CheckStatus::inconclusive && err < 0.05;
    }
  }
  const double elapsed = seconds_since(start);
  return {within && elapsed < 60.0,
          fmt::format("G=1024, p in {{0.25,0.5}}, 1e4 groups, max |err| {:.4f} (< 0.05), {:.2f}s (< 60s)",
                      worst, elapsed)};
}

Outcome scaling_identity() {
  Rng rng(103);
  std::vector<CheckReport> reports;
  for (double p : {0.25, 0.5}) reports.push_back(check_scaling_identity(p, 1024, 10000, 100000, 1e-8, rng, 0.10));
  std::string ratios;
  for (const auto& r : reports) {
    for (const auto& m : r.measurements) {
      ratios += fmt::format(" {}={:.4f}/{:.4f}", m.label, m.estimate, m.target);
    }
  }
  return {all_passed(reports), "ratios within 10% of 1/sqrt(p(1-p)):" + ratios + failures(reports)};
}

Outcome variance_slope() {
  const auto start = Clock::now();
  Rng rng(104);
  const auto task = make_kofv_task(8, 2, 2, 16);
  const PolicyParams params(task.policy_shape());
  ObjectiveSpec spec;
  spec.kind = ObjectiveKind::two_grpo;
  spec.group_size = 2;
  const std::vector<std::size_t> sizes = {8, 32, 128, 512};
  const auto report = check_gradient_variance(task, params, spec, sizes, 500, rng, 0.1);
  double slope = std::nan("");
  for (const auto& m : report.measurements) {
    if (m.label == "loglog_slope") slope = m.estimate;
  }
  const double elapsed = seconds_since(start);
  const bool ok = slope >= -1.1 && slope <= -0.9 && elapsed < 120.0;
  return {ok, fmt::format("k-of-V V=8 k=2 T=2, 2-GRPO, B in {{8,32,128,512}}, 500 trials: slope {:.4f} "
                          "(in [-1.1,-0.9]), {:.2f}s (< 120s)",
                          slope, elapsed)};
}

Outcome gradient_correctness() {
  Rng rng(105);
  std::vector<CheckReport> reports;
  for (auto kind : {ObjectiveKind::vpg, ObjectiveKind::grpo, ObjectiveKind::two_grpo, ObjectiveKind::dpo}) {
    reports.push_back(check_objective_gradients(kind, 10, rng, 1e-5, 1e-6));
  }
  double worst = 0.0;
  for (const auto& r : reports) {
    for (const auto& m : r.measurements) worst = std::max(worst, m.estimate);
  }
  return {all_passed(reports) && worst < 1e-6,
          fmt::format("vpg, grpo, 2-grpo, dpo x 10 instances, step 1e-5: max rel error {:.3g} (< 1e-6){}",
                      worst, failures(reports))};
}

Outcome decomposition() {
  Rng rng(106);
  const auto task = make_kofv_task(6, 3, 2, 8);
  const std::vector<std::size_t> group_sizes = {2, 4, 16};
  double worst_err = 0.0;
  double worst_cos = 1.0;
  std::size_t mixed = 0;
  bool ok = true;
  for (std::size_t b = 0; b < 20; ++b) {
    const auto params = PolicyParams::random(task.policy_shape(), 1.0, rng);
    const std::size_t g = group_sizes[b % group_sizes.size()];
    const auto report = check_decomposition_equivalence(task, params, 8, g, rng, 1e-10, 1e-12);
    ok = ok && report.passed();
    for (const auto& m : report.measurements) {
      if (m.label.rfind("max_rel_error", 0) == 0) {
        worst_err = std::max(worst_err, m.estimate);
        ++mixed;
      }
      if (m.label == "cosine") worst_cos = std::min(worst_cos, m.estimate);
    }
  }
  ok = ok && worst_err < 1e-10 && worst_cos > 1.0 - 1e-12 && mixed > 0;
  return {ok, fmt::format("20 batches over G in {{2,4,16}}: max rel error {:.3g} (< 1e-10), "
                          "min cosine 1-{:.3g} (> 1-1e-12)",
                          worst_err, 1.0 - worst_cos)};
}

Outcome hard_question() {
  Rng rng(107);
  std::vector<CheckReport> reports;
  reports.push_back(check_hard_question_random_schedules(1000, 16, rng));
  const std::vector<double> rising = {0.1, 0.15, 0.2, 0.3, 0.5};
  const std::vector<double> constant(6, 0.07);
  reports.push_back(check_hard_question(rising, 100000, rng));
  reports.push_back(check_hard_question(constant, 100000, rng));
  const bool equality = prob_success_schedule(constant) == prob_success_single_policy(0.07, 6);
  std::size_t violations = 0;
  for (const auto& m : reports.front().measurements) {
    if (m.label == "violations") violations = static_cast<std::size_t>(m.estimate);
  }
  return {all_passed(reports) && equality && violations == 0,
          fmt::format("1000 random schedules (m <= 16): {} violations; Monte Carlo within 3 sigma; "
                      "constant schedule exact: {}{}",
                      violations, equality ? "yes" : "no", failures(reports))};
}

Outcome budget_matched() {
  const auto start = Clock::now();
  Rng task_rng(0);
  const auto task = make_needle_task(8, 2, 20, task_rng);
  const double baseline = expected_reward(task, PolicyParams(task.policy_shape()));
  const double eta = 64.0;
  auto config_for = [&](std::size_t q, std::size_t g, std::uint64_t seed) {
    TrainConfig c;
    c.prompts_per_batch = q;
    c.group_size = g;
    c.base_lr = eta;
    c.lr_scaling = LrScaling::linear;
    c.reference_prompts = 8;
    c.epochs = 80;
    c.seed = seed;
    c.objective.kind = ObjectiveKind::grpo;
    return c;
  };
  double small_group = 0.0;
  double large_group = 0.0;
  bool budgets_equal = true;
  std::size_t rollouts = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto a = run_training(task, config_for(64, 2, seed));
    const auto b = run_training(task, config_for(8, 16, seed));
    budgets_equal = budgets_equal && a.record.rows.size() == b.record.rows.size() &&
                    a.record.rows.back().cumulative_rollouts == b.record.rows.back().cumulative_rollouts;
    rollouts = a.record.rows.back().cumulative_rollouts;
    small_group += a.record.rows.back().expected_reward / 5.0;
    large_group += b.record.rows.back().expected_reward / 5.0;
  }
  const double elapsed = seconds_since(start);
  const double diff = std::abs(small_group - large_group);
  const bool ok = budgets_equal && diff < 0.05 && small_group >= 5.0 * baseline &&
                  large_group >= 5.0 * baseline && elapsed < 300.0;
  return {ok, fmt::format("needle V=8 T=2, 20 prompts, 80 epochs, eta={}: rollouts equal {} ({}), "
                          "Q=64/G=2 {:.4f} vs Q=8/G=16 {:.4f}, |diff| {:.4f} (< 0.05), "
                          "baseline {:.4f} (x5 = {:.4f}), {:.1f}s (< 300s)",
                          eta, budgets_equal ? "yes" : "no", rollouts, small_group, large_group,
                          diff, baseline, 5.0 * baseline, elapsed)};
}

Trajectory with_probs(const PolicyParams& params, std::size_t prompt, std::vector<std::size_t> tokens) {
  Trajectory traj{prompt, std::move(tokens), {}};
  for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
    traj.token_probs.push_back(params.token_prob(prompt, t, traj.tokens[t]));
  }
  return traj;
}

Outcome degenerate_noop() {
  Rng rng(109);
  const auto task = make_kofv_task(8, 2, 2, 6);
  const auto initial = PolicyParams::random(task.policy_shape(), 1.0, rng);
  // All-correct groups on even prompts, all-incorrect on odd ones.
  std::vector<RolloutGroup> groups;
  for (std::size_t q = 0; q < task.num_prompts(); ++q) {
    RolloutGroup group;
    group.prompt = q;
    const int wanted = q % 2 == 0 ? 1 : 0;
    for (std::size_t a = 0; a < 8 && group.size() < 4; ++a) {
      for (std::size_t b = 0; b < 8 && group.size() < 4; ++b) {
        auto traj = with_probs(initial, q, {a, b});
        if (reward(task, traj) != wanted) continue;
        group.trajectories.push_back(std::move(traj));
        group.rewards.push_back(wanted);
      }
    }
    groups.push_back(std::move(group));
  }
  std::vector<RolloutGroup> pairs;
  for (const auto& g : groups) {
    pairs.push_back({g.prompt, {g.trajectories[0], g.trajectories[1]}, {g.rewards[0], g.rewards[1]}});
  }
  bool ok = true;
  std::string kinds;
  for (auto kind : {ObjectiveKind::grpo, ObjectiveKind::two_grpo, ObjectiveKind::dpo}) {
    const auto& batch = kind == ObjectiveKind::two_grpo ? pairs : groups;
    for (auto opt : {OptimizerKind::sgd, OptimizerKind::adam}) {
      TrainConfig c;
      c.prompts_per_batch = batch.size();
      c.group_size = batch.front().size();
      c.base_lr = 0.5;
      c.warmup_steps = 0;
      c.optimizer = opt;
      c.objective.kind = kind;
      Trainer trainer(task, c, initial);
      const auto grad = trainer.evaluate(batch).gradient;
      trainer.update(batch);
      const bool same = std::equal(initial.logits().begin(), initial.logits().end(),
                                   trainer.params().logits().begin());
      ok = ok && grad.is_zero() && same;
    }
    kinds += std::string(kinds.empty() ? "" : ",") + std::string(to_string(kind));
  }
  return {ok, fmt::format("{} all-correct/all-incorrect groups; objectives {} under sgd and adam: "
                          "zero gradient and bit-identical parameters",
                          groups.size(), kinds)};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// The single directory created under `root`.
fs::path only_child(const fs::path& root) {
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) entries.push_back(e.path());
  }
  if (entries.size() != 1) throw std::runtime_error("expected one directory under " + root.string());
  return entries.front();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / fmt::format("grpolab-acceptance-{}", ::getpid());
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path config = root / "run.ini";
  {
    std::ofstream out(config);
    out << "[task]\nfamily = needle\nvocab_size = 8\nseq_len = 2\nnum_prompts = 20\n"
           "[objective]\nkind = grpo\n"
           "[trainer]\nprompts_per_batch = 8\ngroup_size = 4\nbase_lr = 16\nepochs = 10\nseed = 3\n";
  }
  std::ostringstream sink;
  std::vector<std::string> checked;
  bool ok = true;
  auto compare = [&](const std::string& what, const fs::path& a, const fs::path& b) {
    const auto x = slurp(a);
    const bool same = !x.empty() && x == slurp(b);
    ok = ok && same;
    checked.push_back(what + (same ? "" : " DIFFERS"));
  };
  try {
    for (int i = 0; i < 2; ++i) {
      cli::CommonOptions common;
      common.out = root / fmt::format("train{}", i);
      ok = ok && cli::cmd_train(config, common, sink, sink) == cli::kExitOk;
      common.out = root / fmt::format("verify{}", i);
      ok = ok && cli::cmd_verify("all", {}, common, sink, sink) == cli::kExitOk;
      common.out = root / fmt::format("sweep{}", i);
      cli::SweepOptions sweep;
      sweep.group_sizes = {2, 4, 8};
      ok = ok && cli::cmd_sweep(config, sweep, common, sink, sink) == cli::kExitOk;
    }
    compare("train", only_child(root / "train0") / "metrics.csv", only_child(root / "train1") / "metrics.csv");
    compare("verify", root / "verify0" / "verify-all.csv", root / "verify1" / "verify-all.csv");
    compare("sweep", only_child(root / "sweep0") / "sweep.csv", only_child(root / "sweep1") / "sweep.csv");
    for (int g : {2, 4, 8}) {
      const auto name = fmt::format("G{}", g);
      compare("sweep/" + name, only_child(root / "sweep0") / name / "metrics.csv",
              only_child(root / "sweep1") / name / "metrics.csv");
    }
    const std::vector<fs::path> runs = {only_child(root / "train0"), only_child(root / "sweep0") / "G2"};
    for (int i = 0; i < 2; ++i) {
      cli::CommonOptions common;
      common.out = root / fmt::format("report{}", i);
      ok = ok && cli::cmd_report(runs, common, sink, sink) == cli::kExitOk;
    }
    compare("report", root / "report0" / "report.csv", root / "report1" / "report.csv");
  } catch (const std::exception& e) {
    ok = false;
    checked.push_back(std::string("error: ") + e.what());
  }
  fs::remove_all(root);
  std::string list;
  for (const auto& c : checked) list += (list.empty() ? "" : ", ") + c;
  return {ok, "reruns byte-identical: " + list};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"pairwise advantage limits", pairwise_limits},
      {"large-group advantage limits", large_group_limits},
      {"scaling-factor identity", scaling_identity},
      {"gradient variance ~ 1/B", variance_slope},
      {"gradient correctness", gradient_correctness},
      {"surrogate/contrastive decomposition", decomposition},
      {"hard-question inequality", hard_question},
      {"budget-matched training", budget_matched},
      {"degenerate-group no-op", degenerate_noop},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failed += outcome.pass ? 0 : 1;
    fmt::print("{} {:>2} {}: {}\n", outcome.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, outcome.detail);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

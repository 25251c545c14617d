#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "grpolab/errors.hpp"

namespace grpolab::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kMetricsHeader = {
    "step",      "epoch",     "learning_rate",       "mean_reward", "expected_reward",
    "phat_mean", "phat_min",  "phat_max",            "degenerate_fraction",
    "grad_norm", "cumulative_rollouts"};

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream file(path, std::ios::binary);
  file << contents;
  if (!file) throw std::runtime_error("cannot write '" + path.string() + "'");
}

std::string read_file(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm local{};
  localtime_r(&now, &local);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &local);
  return buf;
}

// Creates <root>/<stem>, adding -2, -3, ... if the name is taken.
fs::path fresh_directory(const fs::path& root, const std::string& stem) {
  fs::create_directories(root);
  fs::path dir = root / stem;
  for (int n = 2; fs::exists(dir); ++n) dir = root / fmt::format("{}-{}", stem, n);
  fs::create_directories(dir);
  return dir;
}

std::string describe(const CheckReport& report) {
  std::string line = fmt::format("[{}] {}", to_string(report.status()), report.name);
  if (!report.parameters.empty()) {
    line += " (";
    for (std::size_t i = 0; i < report.parameters.size(); ++i) {
      if (i > 0) line += ", ";
      line += report.parameters[i].first + "=" + report.parameters[i].second;
    }
    line += ")";
  }
  line += "\n";
  for (const auto& m : report.measurements) {
    line += fmt::format("  {:<28} estimate={:<12.6g} target={:<12.6g} se={:<10.3g} tol={:<10.3g} {}\n",
                        m.label, m.estimate, m.target, m.std_error, m.tolerance,
                        to_string(m.status));
  }
  for (const auto& note : report.notes) line += "  note: " + note + "\n";
  return line;
}

template <typename T>
T pick(const std::optional<T>& value, T fallback) {
  return value ? *value : fallback;
}

TaskSpec variance_task() { return make_kofv_task(8, 2, 2, 16); }

std::vector<CheckReport> advantage_limit_suite(Rng& rng) {
  std::vector<CheckReport> out;
  for (double p : {0.1, 0.5, 0.9}) out.push_back(check_advantage_limits(p, 2, 100000, 1e-8, rng));
  for (double p : {0.25, 0.5}) {
    out.push_back(check_advantage_limits(p, 1024, 10000, 1e-8, rng, 0.05));
  }
  return out;
}

std::vector<CheckReport> finite_difference_suite(const std::vector<ObjectiveKind>& kinds,
                                                 std::size_t instances, Rng& rng) {
  std::vector<CheckReport> out;
  for (auto kind : kinds) out.push_back(check_objective_gradients(kind, instances, rng));
  return out;
}

std::vector<CheckReport> decomposition_suite(const std::vector<std::size_t>& group_sizes,
                                             std::size_t batches, std::size_t prompts, Rng& rng) {
  const auto task = make_kofv_task(6, 3, 2, 8);
  std::vector<CheckReport> out;
  for (std::size_t b = 0; b < batches; ++b) {
    const auto params = PolicyParams::random(task.policy_shape(), 1.0, rng);
    const std::size_t g = group_sizes[b % group_sizes.size()];
    out.push_back(check_decomposition_equivalence(task, params, prompts, g, rng));
  }
  return out;
}

}  // namespace

fs::path resolve_output_root(const CommonOptions& options, const std::string& config_dir) {
  if (options.out) return *options.out;
  if (!config_dir.empty()) return config_dir;
  if (const char* env = std::getenv(kOutputEnv); env != nullptr && *env != '\0') return env;
  return "runs";
}

std::string metrics_csv(const RunRecord& record) {
  std::string out = csv_record(kMetricsHeader);
  for (const auto& r : record.rows) {
    out += csv_record({std::to_string(r.step), std::to_string(r.epoch),
                       format_double(r.learning_rate), format_double(r.mean_reward),
                       format_double(r.expected_reward), format_double(r.phat_mean),
                       format_double(r.phat_min), format_double(r.phat_max),
                       format_double(r.degenerate_fraction), format_double(r.grad_norm),
                       std::to_string(r.cumulative_rollouts)});
  }
  return out;
}

std::string timing_csv(const RunRecord& record) {
  std::string out = csv_record({"step", "elapsed_seconds"});
  for (std::size_t i = 0; i < record.rows.size(); ++i) {
    out += csv_record({std::to_string(record.rows[i].step),
                       format_double(record.elapsed_seconds.at(i))});
  }
  return out;
}

double final_epoch_mean_reward(const RunRecord& record) {
  if (record.rows.empty()) return 0.0;
  const std::size_t last = record.rows.back().epoch;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : record.rows) {
    if (r.epoch != last) continue;
    sum += r.mean_reward;
    ++n;
  }
  return sum / static_cast<double>(n);
}

std::string summary_csv(const RunConfig& config, const RunRecord& record) {
  const auto& t = config.trainer;
  const StepMetrics last = record.rows.empty() ? StepMetrics{} : record.rows.back();
  std::string out = csv_record({"objective", "prompts_per_batch", "group_size", "learning_rate",
                                "steps", "total_rollouts", "final_expected_reward",
                                "final_epoch_mean_reward"});
  out += csv_record({std::string(to_string(t.objective.kind)),
                     std::to_string(t.prompts_per_batch), std::to_string(t.group_size),
                     format_double(t.learning_rate()), std::to_string(record.rows.size()),
                     std::to_string(last.cumulative_rollouts), format_double(last.expected_reward),
                     format_double(final_epoch_mean_reward(record))});
  return out;
}

std::string reports_csv(const std::vector<CheckReport>& reports) {
  std::string out =
      csv_record({"check", "measurement", "estimate", "target", "std_error", "tolerance", "status"});
  for (const auto& report : reports) {
    for (const auto& m : report.measurements) {
      out += csv_record({report.name, m.label, format_double(m.estimate), format_double(m.target),
                         format_double(m.std_error), format_double(m.tolerance),
                         std::string(to_string(m.status))});
    }
  }
  return out;
}

void write_run(const fs::path& dir, const RunConfig& config, const RunRecord& record) {
  write_file(dir / "config.ini", format_run_config(config));
  write_file(dir / "metrics.csv", metrics_csv(record));
  write_file(dir / "summary.csv", summary_csv(config, record));
  write_file(dir / "timing.csv", timing_csv(record));
}

int cmd_train(const fs::path& config_path, const CommonOptions& options, std::ostream& out,
              std::ostream& err) {
  RunConfig config;
  try {
    config = load_run_config(config_path);
    if (options.seed) config.trainer.seed = *options.seed;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    const auto task = config.task.build();
    const auto result = run_training(task, config.trainer);
    const auto root = resolve_output_root(options, config.output_dir);
    const auto dir =
        fresh_directory(root, fmt::format("run-{}-seed{}", timestamp(), config.trainer.seed));
    write_run(dir, config, result.record);
    const auto& last = result.record.rows.back();
    out << fmt::format("run directory: {}\n", dir.string());
    out << fmt::format("steps: {}  total rollouts: {}  final expected reward: {:.6f}  "
                       "final-epoch batch reward: {:.6f}\n",
                       result.record.rows.size(), last.cumulative_rollouts, last.expected_reward,
                       final_epoch_mean_reward(result.record));
    return kExitOk;
  } catch (const NumericalError& e) {
    err << "numerical error at step " << e.index() << ": " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

const std::vector<std::string>& verify_check_names() {
  static const std::vector<std::string> names = {
      "advantage-limits", "scaling-identity", "gradient-variance", "hard-question",
      "decomposition",    "finite-difference", "all"};
  return names;
}

std::vector<CheckReport> run_checks(const std::string& check, const VerifyOptions& o,
                                    std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<ObjectiveKind> all_kinds = {ObjectiveKind::vpg, ObjectiveKind::ppo,
                                                ObjectiveKind::grpo, ObjectiveKind::two_grpo,
                                                ObjectiveKind::dpo};
  if (check == "advantage-limits") {
    const std::size_t g = pick(o.group_size, std::size_t{2});
    const std::size_t n = pick(o.num_groups, g == 2 ? std::size_t{100000} : std::size_t{10000});
    return {check_advantage_limits(pick(o.p, 0.5), g, n, pick(o.adv_eps, 1e-8), rng,
                                   g == 2 ? 0.01 : 0.05)};
  }
  if (check == "scaling-identity") {
    return {check_scaling_identity(pick(o.p, 0.25), pick(o.group_size, std::size_t{1024}),
                                   pick(o.num_groups, std::size_t{10000}),
                                   pick(o.num_pairs, std::size_t{100000}), pick(o.adv_eps, 1e-8),
                                   rng)};
  }
  if (check == "gradient-variance") {
    const auto task = variance_task();
    const PolicyParams params(task.policy_shape());
    ObjectiveSpec spec;
    spec.kind = parse_objective_kind(pick(o.objective, std::string("two_grpo")));
    spec.group_size = pick(o.group_size, std::size_t{2});
    spec.validate();
    const std::vector<std::size_t> sizes =
        o.batch_sizes.empty() ? std::vector<std::size_t>{8, 32, 128, 512} : o.batch_sizes;
    return {check_gradient_variance(task, params, spec, sizes,
                                    pick(o.trials, std::size_t{500}), rng)};
  }
  if (check == "hard-question") {
    const std::vector<double> schedule =
        o.schedule.empty() ? std::vector<double>{0.1, 0.2, 0.3, 0.4} : o.schedule;
    return {check_hard_question(schedule, pick(o.trials, std::size_t{100000}), rng)};
  }
  if (check == "decomposition") {
    const std::vector<std::size_t> sizes =
        o.group_size ? std::vector<std::size_t>{*o.group_size} : std::vector<std::size_t>{2, 4, 16};
    return decomposition_suite(sizes, pick(o.num_groups, std::size_t{20}),
                               pick(o.prompts, std::size_t{8}), rng);
  }
  if (check == "finite-difference") {
    const auto kinds = o.objective ? std::vector<ObjectiveKind>{parse_objective_kind(*o.objective)}
                                   : all_kinds;
    return finite_difference_suite(kinds, pick(o.instances, std::size_t{10}), rng);
  }
  if (check == "all") {
    std::vector<CheckReport> reports = advantage_limit_suite(rng);
    for (double p : {0.25, 0.5}) {
      reports.push_back(check_scaling_identity(p, 1024, 10000, 100000, 1e-8, rng));
    }
    {
      const auto task = variance_task();
      const PolicyParams params(task.policy_shape());
      ObjectiveSpec spec;
      spec.kind = ObjectiveKind::two_grpo;
      const std::vector<std::size_t> sizes = {8, 32, 128, 512};
      reports.push_back(check_gradient_variance(task, params, spec, sizes, 500, rng));
    }
    for (auto& r : finite_difference_suite(all_kinds, 10, rng)) reports.push_back(std::move(r));
    for (auto& r : decomposition_suite({2, 4, 16}, 20, 8, rng)) reports.push_back(std::move(r));
    reports.push_back(check_hard_question_random_schedules(1000, 16, rng));
    const std::vector<double> rising = {0.1, 0.2, 0.3, 0.4};
    const std::vector<double> constant(8, 0.05);
    reports.push_back(check_hard_question(rising, 100000, rng));
    reports.push_back(check_hard_question(constant, 100000, rng));
    return reports;
  }
  throw std::invalid_argument("unknown check '" + check + "'");
}

int cmd_verify(const std::string& check, const VerifyOptions& options, const CommonOptions& common,
               std::ostream& out, std::ostream& err) {
  const auto& names = verify_check_names();
  if (std::find(names.begin(), names.end(), check) == names.end()) {
    err << "unknown check '" << check << "'; expected one of:";
    for (const auto& n : names) err << " " << n;
    err << "\n";
    return kExitUsage;
  }
  std::vector<CheckReport> reports;
  try {
    reports = run_checks(check, options, pick(common.seed, std::uint64_t{0}));
  } catch (const std::invalid_argument& e) {
    err << "invalid check parameters: " << e.what() << "\n";
    return kExitUsage;
  }
  bool all_pass = true;
  for (const auto& r : reports) {
    out << describe(r);
    all_pass = all_pass && r.passed();
  }
  try {
    const auto root = resolve_output_root(common);
    fs::create_directories(root);
    const auto path = root / ("verify-" + check + ".csv");
    write_file(path, reports_csv(reports));
    out << "report written to " << path.string() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  out << (all_pass ? "all checks passed\n" : "some checks did not pass\n");
  return all_pass ? kExitOk : kExitFailure;
}

std::vector<RunConfig> sweep_configs(const RunConfig& base, const SweepOptions& options) {
  if (options.group_sizes.empty()) throw std::invalid_argument("sweep needs group sizes");
  const auto& t = base.trainer;
  const std::size_t budget = options.budget ? *options.budget : t.rollouts_per_step();
  const std::size_t reference = t.effective_reference_prompts();
  const std::set<std::size_t> sizes(options.group_sizes.begin(), options.group_sizes.end());
  std::vector<RunConfig> out;
  for (std::size_t g : sizes) {
    if (g < 2) throw std::invalid_argument("group size must be ≥ 2");
    RunConfig config = base;
    config.trainer.group_size = g;
    if (options.mode == SweepMode::budget_matched) {
      if (budget % g != 0) {
        throw std::invalid_argument(
            fmt::format("rollout budget {} is not divisible by group size {}", budget, g));
      }
      config.trainer.prompts_per_batch = budget / g;
      config.trainer.reference_prompts = reference;
    }
    if (config.trainer.objective.kind == ObjectiveKind::two_grpo && g != 2) {
      config.trainer.objective.kind = ObjectiveKind::grpo;
    }
    config.validate();
    out.push_back(std::move(config));
  }
  return out;
}

int cmd_sweep(const fs::path& config_path, const SweepOptions& options,
              const CommonOptions& common, std::ostream& out, std::ostream& err) {
  std::vector<RunConfig> configs;
  RunConfig base;
  try {
    base = load_run_config(config_path);
    if (common.seed) base.trainer.seed = *common.seed;
    configs = sweep_configs(base, options);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "sweep error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    const auto root = resolve_output_root(common, base.output_dir);
    const auto dir = fresh_directory(root, "sweep-" + timestamp());
    const auto task = base.task.build();
    std::string table = csv_record({"group_size", "prompts_per_batch", "rollouts_per_step",
                                    "learning_rate", "steps", "total_rollouts",
                                    "final_expected_reward", "final_epoch_mean_reward"});
    for (const auto& config : configs) {
      const auto result = run_training(task, config.trainer);
      const auto run_dir = dir / fmt::format("G{}", config.trainer.group_size);
      fs::create_directories(run_dir);
      write_run(run_dir, config, result.record);
      const auto& last = result.record.rows.back();
      table += csv_record({std::to_string(config.trainer.group_size),
                           std::to_string(config.trainer.prompts_per_batch),
                           std::to_string(config.trainer.rollouts_per_step()),
                           format_double(config.trainer.learning_rate()),
                           std::to_string(result.record.rows.size()),
                           std::to_string(last.cumulative_rollouts),
                           format_double(last.expected_reward),
                           format_double(final_epoch_mean_reward(result.record))});
      out << fmt::format("G={:<4} Q={:<4} steps={:<5} rollouts={:<8} final expected reward={:.6f}\n",
                         config.trainer.group_size, config.trainer.prompts_per_batch,
                         result.record.rows.size(), last.cumulative_rollouts,
                         last.expected_reward);
    }
    write_file(dir / "sweep.csv", table);
    out << "sweep directory: " << dir.string() << "\n";
    return kExitOk;
  } catch (const NumericalError& e) {
    err << "numerical error at step " << e.index() << ": " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

namespace {

struct RunSummary {
  std::string name;
  std::size_t steps = 0;
  double final_expected_reward = 0.0;
  double final_mean_reward = 0.0;
  std::size_t total_rollouts = 0;
};

RunSummary read_run(const fs::path& run) {
  const fs::path file = fs::is_directory(run) ? run / "metrics.csv" : run;
  const auto rows = parse_csv(read_file(file));
  if (rows.empty() || rows.front() != kMetricsHeader) {
    throw std::runtime_error("unexpected header");
  }
  if (rows.size() < 2) throw std::runtime_error("no data rows");
  RunSummary s;
  s.name = (fs::is_directory(run) ? run : run.parent_path()).filename().string();
  if (s.name.empty()) s.name = run.string();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != kMetricsHeader.size()) {
      throw std::runtime_error(fmt::format("row {} has {} fields", i, row.size()));
    }
    try {
      std::size_t pos = 0;
      s.final_expected_reward = std::stod(row[4], &pos);
      s.final_mean_reward = std::stod(row[3]);
      s.total_rollouts = std::stoull(row[10]);
    } catch (const std::exception&) {
      throw std::runtime_error(fmt::format("row {} is not numeric", i));
    }
  }
  s.steps = rows.size() - 1;
  return s;
}

}  // namespace

int cmd_report(const std::vector<fs::path>& runs, const CommonOptions& common, std::ostream& out,
               std::ostream& err) {
  if (runs.empty()) {
    err << "report needs at least one run directory\n";
    return kExitUsage;
  }
  std::vector<RunSummary> good;
  bool failed = false;
  for (const auto& run : runs) {
    try {
      good.push_back(read_run(run));
    } catch (const std::exception& e) {
      err << "skipping " << run.string() << ": " << e.what() << "\n";
      failed = true;
    }
  }
  if (!good.empty()) {
    const auto& base = good.front();
    std::string table = csv_record({"run", "steps", "total_rollouts", "relative_budget",
                                    "final_expected_reward", "final_batch_reward",
                                    "delta_reward"});
    out << fmt::format("{:<36} {:>6} {:>12} {:>8} {:>12} {:>12} {:>10}\n", "run", "steps",
                       "rollouts", "budget", "final_reward", "batch_reward", "delta");
    for (const auto& s : good) {
      const double budget = base.total_rollouts == 0
                                ? 0.0
                                : static_cast<double>(s.total_rollouts) /
                                      static_cast<double>(base.total_rollouts);
      const double delta = s.final_expected_reward - base.final_expected_reward;
      table += csv_record({s.name, std::to_string(s.steps), std::to_string(s.total_rollouts),
                           format_double(budget), format_double(s.final_expected_reward),
                           format_double(s.final_mean_reward), format_double(delta)});
      out << fmt::format("{:<36} {:>6} {:>12} {:>8.3f} {:>12.6f} {:>12.6f} {:>+10.6f}\n", s.name,
                         s.steps, s.total_rollouts, budget, s.final_expected_reward,
                         s.final_mean_reward, delta);
    }
    try {
      const auto root = resolve_output_root(common);
      fs::create_directories(root);
      write_file(root / "report.csv", table);
      out << "report written to " << (root / "report.csv").string() << "\n";
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitFailure;
    }
  }
  return failed || good.empty() ? kExitFailure : kExitOk;
}

}  // namespace grpolab::cli

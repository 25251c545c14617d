#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "grpolab/trainer.hpp"
#include "grpolab/verify.hpp"

namespace grpolab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Environment variable naming the default output root.
inline constexpr const char* kOutputEnv = "GRPOLAB_OUT";

struct CommonOptions {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
};

/// --out, then the config's [output] dir, then $GRPOLAB_OUT, then "runs".
std::filesystem::path resolve_output_root(const CommonOptions& options,
                                          const std::string& config_dir = {});

/// Metrics file contents: fixed header, one CRLF record per step, 17
/// significant digits. A pure function of the record rows.
std::string metrics_csv(const RunRecord& record);
std::string timing_csv(const RunRecord& record);
std::string summary_csv(const RunConfig& config, const RunRecord& record);
std::string reports_csv(const std::vector<CheckReport>& reports);

/// Writes config.ini, metrics.csv, summary.csv and timing.csv into `dir`.
void write_run(const std::filesystem::path& dir, const RunConfig& config, const RunRecord& record);

/// Mean batch reward over the final epoch's rows.
double final_epoch_mean_reward(const RunRecord& record);

int cmd_train(const std::filesystem::path& config_path, const CommonOptions& options,
              std::ostream& out, std::ostream& err);

struct VerifyOptions {
  std::optional<double> p;
  std::optional<std::size_t> group_size;
  std::optional<std::size_t> num_groups;
  std::optional<std::size_t> num_pairs;
  std::optional<double> adv_eps;
  std::vector<double> schedule;
  std::vector<std::size_t> batch_sizes;
  std::optional<std::size_t> trials;
  std::optional<std::string> objective;
  std::optional<std::size_t> prompts;
  std::optional<std::size_t> instances;
};

/// Check names accepted by `verify`, "all" included.
const std::vector<std::string>& verify_check_names();

/// Runs one named check (or the whole suite for "all") and returns its reports.
/// Throws std::invalid_argument for an unknown name or bad parameters.
std::vector<CheckReport> run_checks(const std::string& check, const VerifyOptions& options,
                                    std::uint64_t seed);

int cmd_verify(const std::string& check, const VerifyOptions& options,
               const CommonOptions& common, std::ostream& out, std::ostream& err);

enum class SweepMode { budget_matched, fixed_prompts };

struct SweepOptions {
  std::vector<std::size_t> group_sizes = {2, 4, 8, 16};
  SweepMode mode = SweepMode::budget_matched;
  /// Rollouts per step B; defaults to Q·G of the base config.
  std::optional<std::size_t> budget;
};

/// One training configuration per group size. Budget-matched: Q = B/G with
/// steps and lr anchored at the base config's reference batch. Fixed-prompts:
/// Q from the base config. two_grpo turns into grpo for G != 2.
std::vector<RunConfig> sweep_configs(const RunConfig& base, const SweepOptions& options);

int cmd_sweep(const std::filesystem::path& config_path, const SweepOptions& options,
              const CommonOptions& common, std::ostream& out, std::ostream& err);

int cmd_report(const std::vector<std::filesystem::path>& runs, const CommonOptions& common,
               std::ostream& out, std::ostream& err);

}  // namespace grpolab::cli

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "grpolab/advantage.hpp"
#include "grpolab/objectives.hpp"
#include "grpolab/policy.hpp"
#include "grpolab/random.hpp"
#include "grpolab/tasks.hpp"

namespace grpolab {

enum class LrScaling { none, linear };
enum class OptimizerKind { sgd, adam };

std::string_view to_string(LrScaling scaling);
LrScaling parse_lr_scaling(std::string_view name);
std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double delta = 1e-8;
};

struct TrainConfig {
  std::size_t prompts_per_batch = 8;  // Q
  std::size_t group_size = 2;         // G
  double base_lr = 0.1;
  LrScaling lr_scaling = LrScaling::none;
  /// Reference prompt batch Q0. It anchors linear lr scaling and fixes the
  /// number of steps per epoch at ceil(num_prompts / Q0), so budget-matched
  /// variants (equal Q·G) run the same number of steps. 0 means Q0 = Q.
  std::size_t reference_prompts = 0;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::sgd;
  AdamSettings adam;
  std::size_t warmup_steps = 10;
  /// Optimizer updates per generated batch; values above 1 take the policy
  /// off-policy within a batch so the clip branch can bind.
  std::size_t updates_per_batch = 1;
  /// Objective settings; group_size is taken from this config.
  ObjectiveSpec objective;

  std::size_t effective_reference_prompts() const {
    return reference_prompts == 0 ? prompts_per_batch : reference_prompts;
  }
  std::size_t steps_per_epoch(std::size_t num_prompts) const;
  std::size_t total_steps(std::size_t num_prompts) const {
    return epochs * steps_per_epoch(num_prompts);
  }
  /// Rollouts generated per step, B = Q·G.
  std::size_t rollouts_per_step() const { return prompts_per_batch * group_size; }
  /// Post-warmup learning rate after batch-size scaling.
  double learning_rate() const;
  ObjectiveSpec objective_spec() const;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// base_lr · Q/Q0 under linear scaling, base_lr otherwise.
double lr_for_batch(double base_lr, std::size_t reference_prompts, std::size_t prompts,
                    LrScaling scaling = LrScaling::linear);

/// SGD or Adam over a flat parameter vector. A step with an exactly zero
/// gradient is a no-op for both (Adam's moments and counter are untouched).
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, AdamSettings adam, std::size_t size);

  void step(std::span<double> params, const Gradient& grad, double lr);

 private:
  OptimizerKind kind_;
  AdamSettings adam_;
  std::vector<double> first_moment_;
  std::vector<double> second_moment_;
  std::size_t steps_ = 0;
};

/// One row of the run record. Every field is a deterministic function of
/// (task, config); wall-clock time lives in RunRecord::elapsed_seconds.
struct StepMetrics {
  std::size_t step = 0;   // 1-based
  std::size_t epoch = 0;  // 1-based
  double learning_rate = 0.0;
  double mean_reward = 0.0;      // mean batch reward
  double expected_reward = 0.0;  // exact mean_q p_q after the update
  double phat_mean = 0.0;
  double phat_min = 0.0;
  double phat_max = 0.0;
  double degenerate_fraction = 0.0;
  double grad_norm = 0.0;
  std::size_t cumulative_rollouts = 0;

  bool operator==(const StepMetrics&) const = default;
};

struct RunRecord {
  std::vector<StepMetrics> rows;
  std::vector<double> elapsed_seconds;  // parallel to rows
};

/// Sequential prompt sampler: shuffles the prompt set at the start of every
/// pass and hands out prompts without replacement within a pass.
class PromptStream {
 public:
  PromptStream(std::size_t num_prompts, Rng& rng);
  std::vector<std::size_t> next(std::size_t count, Rng& rng);

 private:
  std::vector<std::size_t> order_;
  std::size_t position_ = 0;
};

/// Owns the mutable training state: parameters, optimizer, prompt stream and
/// the seeded random source. Single writer; not thread-safe.
class Trainer {
 public:
  Trainer(const TaskSpec& task, TrainConfig config);
  Trainer(const TaskSpec& task, TrainConfig config, PolicyParams initial);

  /// Samples Q prompts, G rollouts each, scores them and updates the policy.
  StepMetrics step();

  /// Generates one batch of groups under the current parameters.
  std::vector<RolloutGroup> collect_batch();

  /// Applies the configured objective to `groups` and updates the policy.
  /// Throws NumericalError (with the step index) on a nonfinite gradient.
  StepMetrics update(std::span<const RolloutGroup> groups);

  /// Loss and gradient of the configured objective at the current params.
  LossGradient evaluate(std::span<const RolloutGroup> groups) const;

  const PolicyParams& params() const { return params_; }
  std::size_t steps_taken() const { return steps_taken_; }
  std::size_t cumulative_rollouts() const { return cumulative_rollouts_; }
  /// Warmup-ramped learning rate for the next step.
  double current_learning_rate() const;

 private:
  TaskSpec task_;
  TrainConfig config_;
  ObjectiveSpec objective_;
  PolicyParams params_;
  PolicyParams dpo_reference_;  // frozen initial policy
  Optimizer optimizer_;
  Rng rng_;
  PromptStream prompts_;
  std::size_t steps_taken_ = 0;
  std::size_t cumulative_rollouts_ = 0;
};

struct TrainingResult {
  RunRecord record;
  PolicyParams final_params;
};

/// Runs epochs × steps_per_epoch steps from the uniform policy.
TrainingResult run_training(const TaskSpec& task, const TrainConfig& config);

}  // namespace grpolab

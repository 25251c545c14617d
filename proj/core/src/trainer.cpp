#include "grpolab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "grpolab/errors.hpp"

namespace grpolab {

std::string_view to_string(LrScaling scaling) {
  return scaling == LrScaling::linear ? "linear" : "none";
}

LrScaling parse_lr_scaling(std::string_view name) {
  if (name == "none") return LrScaling::none;
  if (name == "linear") return LrScaling::linear;
  throw std::invalid_argument("unknown lr_scaling '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "sgd";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

double lr_for_batch(double base_lr, std::size_t reference_prompts, std::size_t prompts,
                    LrScaling scaling) {
  if (!(base_lr > 0.0) || reference_prompts == 0 || prompts == 0) {
    throw std::invalid_argument("learning-rate scaling needs positive arguments");
  }
  if (scaling == LrScaling::none) return base_lr;
  return base_lr * static_cast<double>(prompts) / static_cast<double>(reference_prompts);
}

std::size_t TrainConfig::steps_per_epoch(std::size_t num_prompts) const {
  const std::size_t q0 = effective_reference_prompts();
  return (num_prompts + q0 - 1) / q0;
}

double TrainConfig::learning_rate() const {
  return lr_for_batch(base_lr, effective_reference_prompts(), prompts_per_batch, lr_scaling);
}

ObjectiveSpec TrainConfig::objective_spec() const {
  ObjectiveSpec spec = objective;
  spec.group_size = group_size;
  return spec;
}

void TrainConfig::validate() const {
  if (prompts_per_batch < 1) throw std::invalid_argument("prompts_per_batch must be ≥ 1");
  if (group_size < 2) throw std::invalid_argument("group size must be ≥ 2");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) {
    throw std::invalid_argument("base_lr must be positive");
  }
  if (epochs < 1) throw std::invalid_argument("epochs must be ≥ 1");
  if (updates_per_batch < 1) throw std::invalid_argument("updates_per_batch must be ≥ 1");
  if (optimizer == OptimizerKind::adam) {
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) {
      throw std::invalid_argument("adam_beta1 must lie in [0, 1)");
    }
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
      throw std::invalid_argument("adam_beta2 must lie in [0, 1)");
    }
    if (!(adam.delta > 0.0)) throw std::invalid_argument("adam_delta must be positive");
  }
  objective_spec().validate();
}

Optimizer::Optimizer(OptimizerKind kind, AdamSettings adam, std::size_t size)
    : kind_(kind), adam_(adam) {
  if (kind_ == OptimizerKind::adam) {
    first_moment_.assign(size, 0.0);
    second_moment_.assign(size, 0.0);
  }
}

void Optimizer::step(std::span<double> params, const Gradient& grad, double lr) {
  if (grad.size() != params.size()) throw std::invalid_argument("gradient size mismatch");
  if (grad.is_zero()) return;
  if (kind_ == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    return;
  }
  ++steps_;
  const double bias1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    first_moment_[i] = adam_.beta1 * first_moment_[i] + (1.0 - adam_.beta1) * grad[i];
    second_moment_[i] = adam_.beta2 * second_moment_[i] + (1.0 - adam_.beta2) * grad[i] * grad[i];
    const double m_hat = first_moment_[i] / bias1;
    const double v_hat = second_moment_[i] / bias2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + adam_.delta);
  }
}

PromptStream::PromptStream(std::size_t num_prompts, Rng& rng) : order_(num_prompts) {
  if (num_prompts == 0) throw std::invalid_argument("prompt stream needs prompts");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  rng.shuffle(std::span(order_));
}

std::vector<std::size_t> PromptStream::next(std::size_t count, Rng& rng) {
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    if (position_ == order_.size()) {
      rng.shuffle(std::span(order_));
      position_ = 0;
    }
    out.push_back(order_[position_++]);
  }
  return out;
}

namespace {

const TrainConfig& validated(const TrainConfig& config) {
  config.validate();
  return config;
}

}  // namespace

Trainer::Trainer(const TaskSpec& task, TrainConfig config)
    : Trainer(task, config, PolicyParams(task.policy_shape())) {}

Trainer::Trainer(const TaskSpec& task, TrainConfig config, PolicyParams initial)
    : task_(task),
      config_(validated(config)),
      objective_(config_.objective_spec()),
      params_(std::move(initial)),
      dpo_reference_(params_),
      optimizer_(config_.optimizer, config_.adam, params_.shape().size()),
      rng_(config_.seed),
      prompts_(task_.num_prompts(), rng_) {
  if (params_.shape() != task_.policy_shape()) {
    throw std::invalid_argument("initial policy shape does not match task");
  }
}

double Trainer::current_learning_rate() const {
  const double lr = config_.learning_rate();
  if (config_.warmup_steps == 0 || steps_taken_ >= config_.warmup_steps) return lr;
  return lr * static_cast<double>(steps_taken_ + 1) / static_cast<double>(config_.warmup_steps);
}

std::vector<RolloutGroup> Trainer::collect_batch() {
  const auto prompts = prompts_.next(config_.prompts_per_batch, rng_);
  std::vector<RolloutGroup> groups;
  groups.reserve(prompts.size());
  for (std::size_t prompt : prompts) {
    RolloutGroup group;
    group.prompt = prompt;
    for (std::size_t i = 0; i < config_.group_size; ++i) {
      group.trajectories.push_back(sample_trajectory(params_, prompt, rng_));
      group.rewards.push_back(reward(task_, group.trajectories.back()));
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

LossGradient Trainer::evaluate(std::span<const RolloutGroup> groups) const {
  switch (objective_.kind) {
    case ObjectiveKind::grpo:
    case ObjectiveKind::ppo:
      return grpo_surrogate(params_, groups, objective_);
    case ObjectiveKind::two_grpo:
      // Multi-update batches go off-policy and need the clipped surrogate.
      if (config_.updates_per_batch == 1) {
        return two_grpo_objective(params_, groups);
      }
      return grpo_surrogate(params_, groups, objective_);
    case ObjectiveKind::vpg: {
      std::vector<ScoredTrajectory> batch;
      for (const auto& group : groups) {
        for (std::size_t i = 0; i < group.size(); ++i) {
          batch.push_back({group.trajectories[i], group.rewards[i]});
        }
      }
      return vpg_objective(params_, batch, objective_.vpg_form);
    }
    case ObjectiveKind::dpo: {
      // Online preference pairs: first correct vs. first incorrect rollout of
      // each mixed group, scored against the initial policy.
      std::vector<PreferenceTriple> triples;
      for (const auto& group : groups) {
        if (group.is_degenerate()) continue;
        const auto pos = std::find(group.rewards.begin(), group.rewards.end(), 1);
        const auto neg = std::find(group.rewards.begin(), group.rewards.end(), 0);
        triples.push_back({group.trajectories[pos - group.rewards.begin()],
                           group.trajectories[neg - group.rewards.begin()]});
      }
      if (triples.empty()) return {0.0, Gradient(params_.shape().size())};
      return dpo_objective(params_, dpo_reference_, triples, objective_.beta);
    }
  }
  throw std::logic_error("unhandled objective kind");
}

StepMetrics Trainer::update(std::span<const RolloutGroup> groups) {
  if (groups.empty()) throw std::invalid_argument("update needs at least one group");
  StepMetrics metrics;
  metrics.step = steps_taken_ + 1;
  metrics.epoch = steps_taken_ / config_.steps_per_epoch(task_.num_prompts()) + 1;
  metrics.learning_rate = current_learning_rate();

  std::size_t rollouts = 0;
  double reward_sum = 0.0;
  double phat_sum = 0.0;
  double phat_min = 1.0;
  double phat_max = 0.0;
  std::size_t degenerate = 0;
  for (const auto& group : groups) {
    check_group(group);
    rollouts += group.size();
    reward_sum += static_cast<double>(group.num_correct());
    const double phat = group.success_rate();
    phat_sum += phat;
    phat_min = std::min(phat_min, phat);
    phat_max = std::max(phat_max, phat);
    degenerate += group.is_degenerate() ? 1 : 0;
  }
  const auto num_groups = static_cast<double>(groups.size());
  metrics.mean_reward = reward_sum / static_cast<double>(rollouts);
  metrics.phat_mean = phat_sum / num_groups;
  metrics.phat_min = phat_min;
  metrics.phat_max = phat_max;
  metrics.degenerate_fraction = static_cast<double>(degenerate) / num_groups;

  for (std::size_t u = 0; u < config_.updates_per_batch; ++u) {
    LossGradient eval;
    try {
      eval = evaluate(groups);
    } catch (const NumericalError& e) {
      throw NumericalError("step " + std::to_string(metrics.step) + ": " + e.what(), metrics.step);
    }
    if (!eval.gradient.all_finite() || !std::isfinite(eval.loss)) {
      throw NumericalError("nonfinite gradient at step " + std::to_string(metrics.step) +
                               " (update " + std::to_string(u + 1) + ", loss " +
                               std::to_string(eval.loss) + ")",
                           metrics.step);
    }
    if (u == 0) metrics.grad_norm = eval.gradient.norm();
    optimizer_.step(params_.logits(), eval.gradient, metrics.learning_rate);
  }

  ++steps_taken_;
  cumulative_rollouts_ += rollouts;
  metrics.cumulative_rollouts = cumulative_rollouts_;
  metrics.expected_reward = expected_reward(task_, params_);
  return metrics;
}

StepMetrics Trainer::step() {
  const auto groups = collect_batch();
  return update(groups);
}

TrainingResult run_training(const TaskSpec& task, const TrainConfig& config) {
  Trainer trainer(task, config);
  RunRecord record;
  const std::size_t steps = config.total_steps(task.num_prompts());
  record.rows.reserve(steps);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t s = 0; s < steps; ++s) {
    record.rows.push_back(trainer.step());
    record.elapsed_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  return {std::move(record), trainer.params()};
}

}  // namespace grpolab

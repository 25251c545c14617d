#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "grpolab/random.hpp"

namespace grpolab {

/// Dimensions of the tabular policy: one softmax per (prompt, position).
struct PolicyShape {
  std::size_t num_prompts = 1;
  std::size_t seq_len = 1;
  std::size_t vocab_size = 2;

  std::size_t size() const { return num_prompts * seq_len * vocab_size; }
  bool operator==(const PolicyShape&) const = default;
};

/// Order-0 autoregressive policy: the token distribution at position t of
/// prompt q is softmax(logits[q][t][.]) and does not depend on the prefix.
/// Logits are stored row-major as (prompt, position, token).
class PolicyParams {
 public:
  /// Zero logits, i.e. the uniform policy.
  explicit PolicyParams(PolicyShape shape);
  PolicyParams(PolicyShape shape, std::vector<double> logits);

  /// Logits drawn uniformly from [-scale, scale].
  static PolicyParams random(PolicyShape shape, double scale, Rng& rng);

  const PolicyShape& shape() const { return shape_; }
  std::span<const double> logits() const { return logits_; }
  std::span<double> logits() { return logits_; }

  /// Flat offset of logits[prompt][position][0].
  std::size_t offset(std::size_t prompt, std::size_t position) const {
    return (prompt * shape_.seq_len + position) * shape_.vocab_size;
  }

  std::span<const double> slice(std::size_t prompt, std::size_t position) const {
    return logits().subspan(offset(prompt, position), shape_.vocab_size);
  }

  /// Max-subtracted softmax of one slice, written into `out` (size V).
  void softmax(std::size_t prompt, std::size_t position, std::span<double> out) const;
  std::vector<double> softmax(std::size_t prompt, std::size_t position) const;

  double token_prob(std::size_t prompt, std::size_t position, std::size_t token) const;

  bool operator==(const PolicyParams&) const = default;

 private:
  PolicyShape shape_;
  std::vector<double> logits_;
};

/// A prompt and the generated token sequence, with the probability each token
/// had under the generating policy (needed later for importance ratios).
struct Trajectory {
  std::size_t prompt = 0;
  std::vector<std::size_t> tokens;
  std::vector<double> token_probs;

  bool operator==(const Trajectory&) const = default;
};

/// Dense vector aligned index-for-index with PolicyParams::logits().
struct Gradient {
  std::vector<double> values;

  Gradient() = default;
  explicit Gradient(std::size_t size) : values(size, 0.0) {}

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  /// this += scale * other
  void add_scaled(const Gradient& other, double scale);
  void scale(double factor);
  double norm() const;
  bool is_zero() const;
  bool all_finite() const;

  bool operator==(const Gradient&) const = default;
};

/// Draws one token per position independently from the prompt's softmax rows.
/// Throws std::invalid_argument when prompt >= num_prompts.
Trajectory sample_trajectory(const PolicyParams& params, std::size_t prompt, Rng& rng);

/// Validates a trajectory against the policy dimensions.
void check_trajectory(const PolicyParams& params, const Trajectory& traj);

/// Σ_t log π(token_t | prompt, t) under `params`.
double sequence_log_prob(const PolicyParams& params, const Trajectory& traj);

/// Length-normalized token-probability mean (1/T) Σ_t π(token_t | prompt, t),
/// evaluated under `params` rather than the recorded sampling probabilities.
double sequence_avg_prob(const PolicyParams& params, const Trajectory& traj);

/// ∇ Σ_t log π(token_t): one-hot(token) − softmax at every visited slice.
Gradient grad_log_prob(const PolicyParams& params, const Trajectory& traj);

/// ∇ sequence_avg_prob: per token (1/T) π(token) (one-hot − softmax).
Gradient grad_avg_prob(const PolicyParams& params, const Trajectory& traj);

/// ∇ of the full sequence probability Π_t π(token_t) = π_seq ∇ log π_seq.
Gradient grad_sequence_prob(const PolicyParams& params, const Trajectory& traj);

/// Accumulates `weight` · ∂/∂logits of log π(token) at one slice into `grad`.
void accumulate_token_score(const PolicyParams& params, std::size_t prompt,
                            std::size_t position, std::size_t token, double weight,
                            Gradient& grad);

}  // namespace grpolab

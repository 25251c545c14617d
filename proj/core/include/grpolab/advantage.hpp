#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "grpolab/policy.hpp"

namespace grpolab {

/// Default denominator offset for group normalization.
inline constexpr double kDefaultAdvantageEps = 1e-6;

/// G rollouts of one prompt with their binary rewards; the unit of
/// advantage normalization.
struct RolloutGroup {
  std::size_t prompt = 0;
  std::vector<Trajectory> trajectories;
  std::vector<int> rewards;

  std::size_t size() const { return trajectories.size(); }
  std::size_t num_correct() const;
  /// Within-group success estimate G⁺/G.
  double success_rate() const;
  /// All rewards identical: every advantage is zero.
  bool is_degenerate() const;
};

/// Validates G >= 2, matching lengths and binary rewards.
void check_group(const RolloutGroup& group);

/// Per-trajectory advantages; constant across the tokens of a trajectory.
using AdvantageVector = std::vector<double>;

/// A_i = (r_i − mean(r)) / (std(r) + eps) with the population standard
/// deviation. Groups with identical rewards map to exact zeros. eps may be 0
/// (the exact closed-form regime); negative eps or G < 2 throw.
AdvantageVector group_normalize(std::span<const int> rewards, double eps = kDefaultAdvantageEps);

/// 2-GRPO advantages: (1,−1), (−1,1) for a mixed pair, (0,0) otherwise.
std::pair<int, int> pair_advantage(int r1, int r2);

enum class LimitMode { large_group, pairwise };

/// Closed-form conditional-mean limit of the normalized advantage given the
/// reward x ∈ {0,1} and success probability p ∈ (0,1):
/// large-group (x − p)/√(p(1 − p)); pairwise x − p.
double theoretical_advantage_limit(int x, double p, LimitMode mode);

/// Closed-form advantages of a mixed binary group with success rate p_hat:
/// A⁺ = √((1−p̂)/p̂)·σ̂/(σ̂+eps), A⁻ = −√(p̂/(1−p̂))·σ̂/(σ̂+eps).
std::pair<double, double> mixed_group_advantages(double p_hat, double eps);

}  // namespace grpolab

#include "grpolab/advantage.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace grpolab {

std::size_t RolloutGroup::num_correct() const {
  return static_cast<std::size_t>(std::count(rewards.begin(), rewards.end(), 1));
}

double RolloutGroup::success_rate() const {
  return static_cast<double>(num_correct()) / static_cast<double>(rewards.size());
}

bool RolloutGroup::is_degenerate() const {
  return std::adjacent_find(rewards.begin(), rewards.end(), std::not_equal_to<>()) ==
         rewards.end();
}

void check_group(const RolloutGroup& group) {
  if (group.trajectories.size() < 2) {
    throw std::invalid_argument("group size must be ≥ 2, got " +
                                std::to_string(group.trajectories.size()));
  }
  if (group.rewards.size() != group.trajectories.size()) {
    throw std::invalid_argument("rewards and trajectories differ in length");
  }
  for (int r : group.rewards) {
    if (r != 0 && r != 1) throw std::invalid_argument("rewards must be 0 or 1");
  }
  for (const auto& traj : group.trajectories) {
    if (traj.prompt != group.prompt) {
      throw std::invalid_argument("trajectory prompt differs from its group's prompt");
    }
  }
}

AdvantageVector group_normalize(std::span<const int> rewards, double eps) {
  if (rewards.size() < 2) throw std::invalid_argument("group size must be ≥ 2");
  for (int r : rewards) {
    if (r != 0 && r != 1) throw std::invalid_argument("rewards must be 0 or 1");
  }
  if (!(eps >= 0.0) || !std::isfinite(eps)) {
    throw std::invalid_argument("advantage eps must be finite and nonnegative");
  }
  AdvantageVector advantages(rewards.size(), 0.0);
  if (std::adjacent_find(rewards.begin(), rewards.end(), std::not_equal_to<>()) ==
      rewards.end()) {
    return advantages;
  }
  const auto n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (int r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (int r : rewards) var += (r - mean) * (r - mean);
  const double denom = std::sqrt(var / n) + eps;
  for (std::size_t i = 0; i < rewards.size(); ++i) advantages[i] = (rewards[i] - mean) / denom;
  return advantages;
}

std::pair<int, int> pair_advantage(int r1, int r2) {
  if (r1 == r2) return {0, 0};
  return r1 > r2 ? std::pair{1, -1} : std::pair{-1, 1};
}

double theoretical_advantage_limit(int x, double p, LimitMode mode) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must lie in (0, 1)");
  if (x != 0 && x != 1) throw std::invalid_argument("x must be 0 or 1");
  const double centered = x - p;
  return mode == LimitMode::pairwise ? centered : centered / std::sqrt(p * (1.0 - p));
}

std::pair<double, double> mixed_group_advantages(double p_hat, double eps) {
  if (!(p_hat > 0.0 && p_hat < 1.0)) throw std::invalid_argument("p_hat must lie in (0, 1)");
  const double sigma = std::sqrt(p_hat * (1.0 - p_hat));
  const double shrink = sigma / (sigma + eps);
  return {std::sqrt((1.0 - p_hat) / p_hat) * shrink, -std::sqrt(p_hat / (1.0 - p_hat)) * shrink};
}

}  // namespace grpolab

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "grpolab/advantage.hpp"
#include "grpolab/policy.hpp"

namespace grpolab {

enum class ObjectiveKind { vpg, ppo, grpo, two_grpo, dpo };

/// How the clipped surrogate weights each token.
///
/// importance_ratio: min(ρ·A, clip(ρ)·A) with ρ = π_θ/π_old, as in PPO. Its
/// on-policy gradient is the advantage-weighted score A·∇log π.
///
/// mean_field: the same term multiplied by the recorded π_old, so on-policy it
/// equals A·π_θ and its gradient is A·∇π_θ. Summed over tokens this is the
/// length-normalized A·π^GRPO objective whose gradient has the contrastive
/// form. Clipping still acts as a per-token indicator.
enum class SurrogateForm { importance_ratio, mean_field };

/// Vanilla policy gradient: log form r·∇log π (REINFORCE), or the literal
/// r·Σ_t ∇π(o_t) form kept for comparison.
enum class VpgForm { log_prob, literal_prob };

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind parse_objective_kind(std::string_view name);
std::string_view to_string(SurrogateForm form);
SurrogateForm parse_surrogate_form(std::string_view name);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::grpo;
  double clip_eps = 0.2;
  double adv_eps = kDefaultAdvantageEps;
  std::size_t group_size = 2;
  double beta = 0.1;
  /// Constant per-prompt baseline used by PPO mode (no value network).
  double ppo_baseline = 0.5;
  /// Unset: importance_ratio for ppo, mean_field for the GRPO family.
  std::optional<SurrogateForm> surrogate;
  VpgForm vpg_form = VpgForm::log_prob;

  SurrogateForm surrogate_form() const;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Every objective is exposed as a loss to minimize (the reward objective J
/// negated); `gradient` is ∇loss.
struct LossGradient {
  double loss = 0.0;
  Gradient gradient;
};

struct ScoredTrajectory {
  Trajectory trajectory;
  int reward = 0;
};

struct PreferenceTriple {
  Trajectory positive;
  Trajectory negative;
};

/// Weights (a, b) of the general contrastive gradient
/// ∇L = −(a ∇π(y⁺) − b ∇π(y⁻)); both nonnegative.
struct ContrastiveCoefficients {
  double a = 0.0;
  double b = 0.0;
};

/// loss = −mean r_i log π(o_i) (log form) or −mean r_i Σ_t π(o_i,t) (literal).
LossGradient vpg_objective(const PolicyParams& params, std::span<const ScoredTrajectory> batch,
                           VpgForm form = VpgForm::log_prob);

/// Per-group advantages for the GRPO family: group_normalize for grpo,
/// pair_advantage for two_grpo, r − ppo_baseline for ppo.
std::vector<AdvantageVector> compute_advantages(std::span<const RolloutGroup> groups,
                                                const ObjectiveSpec& spec);

/// Clipped surrogate averaged 1/|groups| · 1/G · 1/|o| (i.e. 1/(QG) for equal
/// groups). The importance ratio uses each trajectory's recorded token_probs
/// as π_old. At a kink the unclipped branch is taken; a binding clip branch
/// contributes zero gradient. Throws NumericalError(group index) on a
/// nonfinite ratio.
LossGradient clipped_surrogate(const PolicyParams& params, std::span<const RolloutGroup> groups,
                               std::span<const AdvantageVector> advantages, double clip_eps,
                               SurrogateForm form);

/// compute_advantages followed by clipped_surrogate with spec.surrogate.
LossGradient grpo_surrogate(const PolicyParams& params, std::span<const RolloutGroup> groups,
                            const ObjectiveSpec& spec);

/// Contrastive form of the GRPO objective: per group
/// √(p̂(1−p̂)) · (mean_{o⁺} π^GRPO − mean_{o⁻} π^GRPO), degenerate groups
/// contributing 0, averaged over all groups and negated.
LossGradient grpo_contrastive(const PolicyParams& params, std::span<const RolloutGroup> groups);

/// 2-GRPO: per pair 1/2 (π^GRPO(o⁺) − π^GRPO(o⁻)) when mixed, 0 otherwise,
/// averaged over pairs and negated. Throws if any group has G != 2.
LossGradient two_grpo_objective(const PolicyParams& params, std::span<const RolloutGroup> groups);

/// DPO with full-sequence log-probabilities (sum of token log-probs).
LossGradient dpo_objective(const PolicyParams& params, const PolicyParams& reference,
                           std::span<const PreferenceTriple> triples, double beta);

/// σ' = σ(r̂(o⁻) − r̂(o⁺)) with r̂ = β log(π_θ/π_ref).
double dpo_sigma_prime(const PolicyParams& params, const PolicyParams& reference,
                       const PreferenceTriple& triple, double beta);

/// GRPO: a = b = √(p̂(1−p̂)); degenerate p̂ ∈ {0,1} gives (0, 0).
ContrastiveCoefficients grpo_coefficients(double p_hat);

/// DPO: a = βσ'/π_ref(o⁺), b = βσ'/π_ref(o⁻) with full-sequence π_ref.
ContrastiveCoefficients dpo_coefficients(double beta, double sigma_prime,
                                         double reference_positive_prob,
                                         double reference_negative_prob);

}  // namespace grpolab

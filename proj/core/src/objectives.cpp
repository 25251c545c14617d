#include "grpolab/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "grpolab/errors.hpp"

namespace grpolab {

std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::vpg: return "vpg";
    case ObjectiveKind::ppo: return "ppo";
    case ObjectiveKind::grpo: return "grpo";
    case ObjectiveKind::two_grpo: return "two_grpo";
    case ObjectiveKind::dpo: return "dpo";
  }
  return "unknown";
}

ObjectiveKind parse_objective_kind(std::string_view name) {
  for (auto kind : {ObjectiveKind::vpg, ObjectiveKind::ppo, ObjectiveKind::grpo,
                    ObjectiveKind::two_grpo, ObjectiveKind::dpo}) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown objective kind '" + std::string(name) + "'");
}

std::string_view to_string(SurrogateForm form) {
  return form == SurrogateForm::mean_field ? "mean_field" : "importance_ratio";
}

SurrogateForm parse_surrogate_form(std::string_view name) {
  if (name == "mean_field") return SurrogateForm::mean_field;
  if (name == "importance_ratio") return SurrogateForm::importance_ratio;
  throw std::invalid_argument("unknown surrogate form '" + std::string(name) + "'");
}

SurrogateForm ObjectiveSpec::surrogate_form() const {
  if (surrogate) return *surrogate;
  return kind == ObjectiveKind::ppo ? SurrogateForm::importance_ratio : SurrogateForm::mean_field;
}

void ObjectiveSpec::validate() const {
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (!positive(clip_eps)) throw std::invalid_argument("clip_eps must be positive");
  if (!(adv_eps >= 0.0) || !std::isfinite(adv_eps)) {
    throw std::invalid_argument("adv_eps must be nonnegative");
  }
  if (group_size < 2) throw std::invalid_argument("group size must be ≥ 2");
  if (kind == ObjectiveKind::two_grpo && group_size != 2) {
    throw std::invalid_argument("two_grpo requires group size 2");
  }
  if (kind == ObjectiveKind::dpo && !positive(beta)) {
    throw std::invalid_argument("beta must be positive");
  }
  if (kind == ObjectiveKind::ppo && !std::isfinite(ppo_baseline)) {
    throw std::invalid_argument("ppo_baseline must be finite");
  }
}

LossGradient vpg_objective(const PolicyParams& params, std::span<const ScoredTrajectory> batch,
                           VpgForm form) {
  if (batch.empty()) throw std::invalid_argument("vpg batch must be nonempty");
  LossGradient out{0.0, Gradient(params.shape().size())};
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (const auto& item : batch) {
    check_trajectory(params, item.trajectory);
    if (item.reward == 0) continue;
    const double r = item.reward;
    const auto& traj = item.trajectory;
    if (form == VpgForm::log_prob) {
      out.loss -= weight * r * sequence_log_prob(params, traj);
      for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
        accumulate_token_score(params, traj.prompt, t, traj.tokens[t], -weight * r, out.gradient);
      }
    } else {
      for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
        const double prob = params.token_prob(traj.prompt, t, traj.tokens[t]);
        out.loss -= weight * r * prob;
        accumulate_token_score(params, traj.prompt, t, traj.tokens[t], -weight * r * prob,
                               out.gradient);
      }
    }
  }
  return out;
}

std::vector<AdvantageVector> compute_advantages(std::span<const RolloutGroup> groups,
                                                const ObjectiveSpec& spec) {
  std::vector<AdvantageVector> out;
  out.reserve(groups.size());
  for (const auto& group : groups) {
    check_group(group);
    switch (spec.kind) {
      case ObjectiveKind::grpo:
        out.push_back(group_normalize(group.rewards, spec.adv_eps));
        break;
      case ObjectiveKind::two_grpo: {
        if (group.size() != 2) throw std::invalid_argument("two_grpo requires group size 2");
        const auto [a1, a2] = pair_advantage(group.rewards[0], group.rewards[1]);
        out.push_back({static_cast<double>(a1), static_cast<double>(a2)});
        break;
      }
      case ObjectiveKind::ppo: {
        AdvantageVector adv;
        for (int r : group.rewards) adv.push_back(r - spec.ppo_baseline);
        out.push_back(std::move(adv));
        break;
      }
      default:
        throw std::invalid_argument("advantages are defined for grpo, two_grpo and ppo only");
    }
  }
  return out;
}

LossGradient clipped_surrogate(const PolicyParams& params, std::span<const RolloutGroup> groups,
                               std::span<const AdvantageVector> advantages, double clip_eps,
                               SurrogateForm form) {
  if (groups.empty()) throw std::invalid_argument("surrogate needs at least one group");
  if (advantages.size() != groups.size()) {
    throw std::invalid_argument("one advantage vector per group required");
  }
  LossGradient out{0.0, Gradient(params.shape().size())};
  const double lo = 1.0 - clip_eps;
  const double hi = 1.0 + clip_eps;
  const double group_weight = 1.0 / static_cast<double>(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    check_group(group);
    if (advantages[g].size() != group.size()) {
      throw std::invalid_argument("advantage vector length differs from group size");
    }
    const double traj_weight = group_weight / static_cast<double>(group.size());
    for (std::size_t i = 0; i < group.size(); ++i) {
      const auto& traj = group.trajectories[i];
      check_trajectory(params, traj);
      if (traj.token_probs.size() != traj.tokens.size()) {
        throw std::invalid_argument("trajectory lacks recorded sampling probabilities");
      }
      const double adv = advantages[g][i];
      if (adv == 0.0) continue;
      const double w = traj_weight / static_cast<double>(traj.tokens.size());
      for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
        const double old_prob = traj.token_probs[t];
        const double prob = params.token_prob(traj.prompt, t, traj.tokens[t]);
        const double ratio = prob / old_prob;
        if (!std::isfinite(ratio)) {
          throw NumericalError("nonfinite importance ratio in group " + std::to_string(g), g);
        }
        const double unclipped = ratio * adv;
        const double clipped = std::clamp(ratio, lo, hi) * adv;
        const bool take_unclipped = unclipped <= clipped;
        const double term = take_unclipped ? unclipped : clipped;
        const double scale = form == SurrogateForm::mean_field ? old_prob : 1.0;
        out.loss -= w * scale * term;
        if (take_unclipped) {
          // d(scale·ρ)/dlogits = scale·ρ·score, and old_prob·ρ = π_θ.
          const double dweight = form == SurrogateForm::mean_field ? prob : ratio;
          accumulate_token_score(params, traj.prompt, t, traj.tokens[t], -w * adv * dweight,
                                 out.gradient);
        }
      }
    }
  }
  return out;
}

LossGradient grpo_surrogate(const PolicyParams& params, std::span<const RolloutGroup> groups,
                            const ObjectiveSpec& spec) {
  const auto advantages = compute_advantages(groups, spec);
  return clipped_surrogate(params, groups, advantages, spec.clip_eps, spec.surrogate_form());
}

namespace {

// Accumulates −weight · (mean over `members` of ∇π^GRPO) and returns the
// matching mean of π^GRPO.
double accumulate_mean_avg_prob(const PolicyParams& params, const RolloutGroup& group,
                                int reward_value, double weight, Gradient& grad) {
  std::size_t count = 0;
  for (int r : group.rewards) count += r == reward_value ? 1 : 0;
  double mean_prob = 0.0;
  const double inv_count = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (group.rewards[i] != reward_value) continue;
    const auto& traj = group.trajectories[i];
    mean_prob += inv_count * sequence_avg_prob(params, traj);
    grad.add_scaled(grad_avg_prob(params, traj), -weight * inv_count);
  }
  return mean_prob;
}

}  // namespace

LossGradient grpo_contrastive(const PolicyParams& params, std::span<const RolloutGroup> groups) {
  if (groups.empty()) throw std::invalid_argument("contrastive form needs at least one group");
  LossGradient out{0.0, Gradient(params.shape().size())};
  const double group_weight = 1.0 / static_cast<double>(groups.size());
  for (const auto& group : groups) {
    check_group(group);
    const auto coeff = grpo_coefficients(group.success_rate());
    if (coeff.a == 0.0) continue;
    const double pos = accumulate_mean_avg_prob(params, group, 1, group_weight * coeff.a,
                                                out.gradient);
    const double neg = accumulate_mean_avg_prob(params, group, 0, -group_weight * coeff.b,
                                                out.gradient);
    out.loss -= group_weight * (coeff.a * pos - coeff.b * neg);
  }
  return out;
}

LossGradient two_grpo_objective(const PolicyParams& params, std::span<const RolloutGroup> groups) {
  if (groups.empty()) throw std::invalid_argument("2-GRPO needs at least one pair");
  LossGradient out{0.0, Gradient(params.shape().size())};
  const double pair_weight = 0.5 / static_cast<double>(groups.size());
  for (const auto& group : groups) {
    check_group(group);
    if (group.size() != 2) throw std::invalid_argument("2-GRPO requires group size 2");
    const auto [a1, a2] = pair_advantage(group.rewards[0], group.rewards[1]);
    if (a1 == 0) continue;
    const auto& positive = group.trajectories[a1 > 0 ? 0 : 1];
    const auto& negative = group.trajectories[a1 > 0 ? 1 : 0];
    out.loss -= pair_weight *
                (sequence_avg_prob(params, positive) - sequence_avg_prob(params, negative));
    out.gradient.add_scaled(grad_avg_prob(params, positive), -pair_weight);
    out.gradient.add_scaled(grad_avg_prob(params, negative), pair_weight);
  }
  return out;
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// −log σ(z) without overflow.
double neg_log_sigmoid(double z) {
  return z >= 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

double dpo_margin(const PolicyParams& params, const PolicyParams& reference,
                  const PreferenceTriple& triple, double beta) {
  if (triple.positive.prompt != triple.negative.prompt) {
    throw std::invalid_argument("preference pair must share a prompt");
  }
  const double pos = sequence_log_prob(params, triple.positive) -
                     sequence_log_prob(reference, triple.positive);
  const double neg = sequence_log_prob(params, triple.negative) -
                     sequence_log_prob(reference, triple.negative);
  return beta * (pos - neg);
}

}  // namespace

double dpo_sigma_prime(const PolicyParams& params, const PolicyParams& reference,
                       const PreferenceTriple& triple, double beta) {
  return sigmoid(-dpo_margin(params, reference, triple, beta));
}

LossGradient dpo_objective(const PolicyParams& params, const PolicyParams& reference,
                           std::span<const PreferenceTriple> triples, double beta) {
  if (triples.empty()) throw std::invalid_argument("DPO needs at least one triple");
  if (params.shape() != reference.shape()) {
    throw std::invalid_argument("reference policy shape differs from policy");
  }
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  LossGradient out{0.0, Gradient(params.shape().size())};
  const double weight = 1.0 / static_cast<double>(triples.size());
  for (const auto& triple : triples) {
    const double margin = dpo_margin(params, reference, triple, beta);
    out.loss += weight * neg_log_sigmoid(margin);
    const double coeff = weight * beta * sigmoid(-margin);
    const auto& pos = triple.positive;
    const auto& neg = triple.negative;
    for (std::size_t t = 0; t < pos.tokens.size(); ++t) {
      accumulate_token_score(params, pos.prompt, t, pos.tokens[t], -coeff, out.gradient);
    }
    for (std::size_t t = 0; t < neg.tokens.size(); ++t) {
      accumulate_token_score(params, neg.prompt, t, neg.tokens[t], coeff, out.gradient);
    }
  }
  return out;
}

ContrastiveCoefficients grpo_coefficients(double p_hat) {
  if (!(p_hat >= 0.0 && p_hat <= 1.0)) throw std::invalid_argument("p_hat must lie in [0, 1]");
  if (p_hat == 0.0 || p_hat == 1.0) return {};
  const double s = std::sqrt(p_hat * (1.0 - p_hat));
  return {s, s};
}

ContrastiveCoefficients dpo_coefficients(double beta, double sigma_prime,
                                         double reference_positive_prob,
                                         double reference_negative_prob) {
  if (!(reference_positive_prob > 0.0) || !(reference_negative_prob > 0.0)) {
    throw std::invalid_argument("reference probabilities must be positive");
  }
  return {beta * sigma_prime / reference_positive_prob,
          beta * sigma_prime / reference_negative_prob};
}

}  // namespace grpolab

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "grpolab/objectives.hpp"
#include "grpolab/policy.hpp"
#include "grpolab/random.hpp"
#include "grpolab/tasks.hpp"

namespace grpolab {

enum class CheckStatus { pass, fail, inconclusive };

std::string_view to_string(CheckStatus status);

/// One estimate compared against its closed-form target. Passes iff
/// |estimate − target| ≤ tolerance, where tolerance = max(fixed bound,
/// 3 · standard error) unless the check states otherwise.
struct Measurement {
  std::string label;
  double estimate = 0.0;
  double target = 0.0;
  double std_error = 0.0;
  double tolerance = 0.0;
  CheckStatus status = CheckStatus::pass;
};

struct CheckReport {
  std::string name;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::vector<Measurement> measurements;
  std::vector<std::string> notes;

  /// fail if any measurement fails; otherwise inconclusive if any is.
  CheckStatus status() const;
  bool passed() const { return status() == CheckStatus::pass; }

  void add_parameter(std::string key, double value);
  void add_parameter(std::string key, std::string value);
  /// Records a measurement judged against max(fixed_bound, 3·std_error).
  Measurement& add(std::string label, double estimate, double target, double std_error,
                   double fixed_bound);
};

/// Tolerance band used throughout: max(fixed bound, 3 standard errors).
double combined_tolerance(double fixed_bound, double std_error);

/// Conditional-mean estimate Ê[Y | X = x] with its cluster-robust standard
/// error (groups are the sampling units).
struct ConditionalMean {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

/// Simulates `num_groups` groups of G Bernoulli(p) rewards, normalizes each
/// with group_normalize(adv_eps) and estimates Ê[Y|X=1], Ê[Y|X=0]. Returns
/// {x=0, x=1}. Groups with no draw of the requested value do not contribute.
std::pair<ConditionalMean, ConditionalMean> simulate_conditional_advantages(
    double p, std::size_t group_size, std::size_t num_groups, double adv_eps, Rng& rng);

/// Conditional advantage means against the closed-form limit: x − p for
/// G = 2, (x − p)/√(p(1 − p)) otherwise. Zero conditional counts make the
/// report inconclusive.
CheckReport check_advantage_limits(double p, std::size_t group_size, std::size_t num_groups,
                                   double adv_eps, Rng& rng, double fixed_bound = 0.01);

/// Ratio of large-group to pairwise conditional means against 1/√(p(1−p)),
/// with a relative tolerance.
CheckReport check_scaling_identity(double p, std::size_t large_group_size,
                                   std::size_t large_groups, std::size_t num_pairs,
                                   double adv_eps, Rng& rng, double relative_tolerance = 0.10);

/// Per-unit gradient sampler for the variance check: draws one i.i.d. data
/// unit (prompt + rollout group) and returns its gradient.
using GradientSampler = std::function<Gradient(Rng&)>;

/// Gradient sampler for a GRPO-family objective: a uniformly drawn prompt,
/// G rollouts from `params`, and the objective's gradient on that one group.
GradientSampler group_gradient_sampler(const TaskSpec& task, const PolicyParams& params,
                                       const ObjectiveSpec& spec);

struct VarianceEstimate {
  std::size_t batch_size = 0;  // rollouts per batch
  double trace = 0.0;          // Σ_coord empirical variance of the batch gradient
  double std_error = 0.0;      // jackknife over trials
};

/// Empirical variance trace of the mean of `units` sampled unit gradients,
/// over `trials` independent batches.
VarianceEstimate estimate_batch_variance(const GradientSampler& sampler, std::size_t units,
                                         std::size_t trials, Rng& rng);

/// Batch-gradient variance versus batch size B (in rollouts, B = units·G).
/// Reports each variance trace, each doubling-normalized ratio Var(B_{k+1})
/// ·B_{k+1}/(Var(B_k)·B_k) against 1, and the fitted log-log slope against −1
/// with |slope + 1| ≤ slope_tolerance.
CheckReport check_gradient_variance(const TaskSpec& task, const PolicyParams& params,
                                    const ObjectiveSpec& spec,
                                    std::span<const std::size_t> batch_sizes, std::size_t trials,
                                    Rng& rng, double slope_tolerance = 0.1);

/// P_{2m} = 1 − (1 − p₀)^{2m}, evaluated as a product of m squared factors so
/// that a constant schedule reproduces P_{m×2} bit-for-bit.
double prob_success_single_policy(double p0, std::size_t m);
/// P_{m×2} = 1 − Π_i (1 − p_i)².
double prob_success_schedule(std::span<const double> schedule);

/// Closed forms of both probabilities, the inequality P_{m×2} ≥ P_{2m}
/// (exact, no tolerance) when every p_i ≥ p₀, and Monte-Carlo confirmations
/// within 3 binomial standard errors. Schedules violating p_i ≥ p₀ are
/// reported as out of assumption rather than failed.
CheckReport check_hard_question(std::span<const double> schedule, std::size_t num_trials,
                                Rng& rng);

/// Draws `num_schedules` random schedules with every p_i ≥ p₀ and length
/// m ∈ [1, max_m]; counts violations of P_{m×2} ≥ P_{2m} (target 0, exact).
CheckReport check_hard_question_random_schedules(std::size_t num_schedules, std::size_t max_m,
                                                 Rng& rng);

/// Max coordinate deviation between a and b, normalized by max(|a|_∞, |b|_∞);
/// 0 when both vectors are zero.
double max_relative_error(const Gradient& a, const Gradient& b);
/// Cosine similarity; 1 when both vectors are zero.
double cosine_similarity(const Gradient& a, const Gradient& b);

/// Samples Q groups of G on-policy rollouts and compares the mean-field GRPO
/// surrogate gradient (adv_eps = 0) with the contrastive-form gradient (and
/// with the 2-GRPO gradient when G = 2).
CheckReport check_decomposition_equivalence(const TaskSpec& task, const PolicyParams& params,
                                            std::size_t num_prompts, std::size_t group_size,
                                            Rng& rng, double relative_bound = 1e-10,
                                            double cosine_bound = 1e-12);

/// Same comparison on an explicit batch.
CheckReport compare_decomposition(const PolicyParams& params,
                                  std::span<const RolloutGroup> groups,
                                  double relative_bound = 1e-10, double cosine_bound = 1e-12);

/// Scalar objective with analytic gradient, evaluated at arbitrary logits.
using ObjectiveClosure = std::function<LossGradient(const PolicyParams&)>;

/// Finite-difference error of one closure at one point.
struct FiniteDifferenceResult {
  double max_relative_error = 0.0;
  std::size_t probes = 0;
};

/// Central differences along `num_probes` random unit directions; the error
/// per probe is |fd − g·d| / max(‖g‖₂, floor). Normalizing by the gradient
/// norm keeps directions nearly orthogonal to g from inflating the error.
/// step ∈ [1e-7, 1e-3].
FiniteDifferenceResult finite_difference_error(const ObjectiveClosure& objective,
                                               const PolicyParams& params, double step,
                                               std::size_t num_probes, Rng& rng,
                                               double floor = 1e-8);

CheckReport finite_difference_check(const std::string& name, const ObjectiveClosure& objective,
                                    const PolicyParams& params, double step,
                                    std::size_t num_probes, Rng& rng,
                                    double relative_bound = 1e-6);

/// Gradient correctness of one objective kind on `num_instances` random
/// instances (random logits, random on- or off-policy rollouts).
CheckReport check_objective_gradients(ObjectiveKind kind, std::size_t num_instances, Rng& rng,
                                      double step = 1e-5, double relative_bound = 1e-6);

}  // namespace grpolab

#include "grpolab/verify.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "grpolab/advantage.hpp"

namespace grpolab {

std::string_view to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::inconclusive: return "inconclusive";
  }
  return "unknown";
}

double combined_tolerance(double fixed_bound, double std_error) {
  return std::max(fixed_bound, 3.0 * std_error);
}

CheckStatus CheckReport::status() const {
  bool inconclusive = false;
  for (const auto& m : measurements) {
    if (m.status == CheckStatus::fail) return CheckStatus::fail;
    inconclusive = inconclusive || m.status == CheckStatus::inconclusive;
  }
  return inconclusive ? CheckStatus::inconclusive : CheckStatus::pass;
}

void CheckReport::add_parameter(std::string key, double value) {
  char buf[32];
  const bool integral = std::abs(value) < 1e15 && value == std::trunc(value);
  const auto end = integral ? std::to_chars(buf, buf + sizeof buf, static_cast<long long>(value)).ptr
                            : std::to_chars(buf, buf + sizeof buf, value).ptr;
  parameters.emplace_back(std::move(key), std::string(buf, end));
}

void CheckReport::add_parameter(std::string key, std::string value) {
  parameters.emplace_back(std::move(key), std::move(value));
}

namespace {

Measurement& add_with_tolerance(CheckReport& report, std::string label, double estimate,
                                double target, double std_error, double tolerance) {
  Measurement m{std::move(label), estimate, target, std_error, tolerance, CheckStatus::pass};
  m.status = std::abs(estimate - target) <= tolerance ? CheckStatus::pass : CheckStatus::fail;
  report.measurements.push_back(std::move(m));
  return report.measurements.back();
}

}  // namespace

Measurement& CheckReport::add(std::string label, double estimate, double target,
                              double std_error, double fixed_bound) {
  return add_with_tolerance(*this, std::move(label), estimate, target, std_error,
                            combined_tolerance(fixed_bound, std_error));
}

// ---------------------------------------------------------------------------
// Advantage limits

namespace {

struct RatioAccumulator {
  std::vector<double> sums;
  std::vector<double> counts;

  ConditionalMean finish() const {
    ConditionalMean out;
    double total_sum = 0.0;
    double total_count = 0.0;
    for (std::size_t g = 0; g < sums.size(); ++g) {
      total_sum += sums[g];
      total_count += counts[g];
    }
    out.count = static_cast<std::size_t>(total_count);
    if (total_count == 0.0) return out;
    out.mean = total_sum / total_count;
    const auto n = static_cast<double>(sums.size());
    if (n < 2.0) return out;
    double resid = 0.0;
    for (std::size_t g = 0; g < sums.size(); ++g) {
      const double e = sums[g] - out.mean * counts[g];
      resid += e * e;
    }
    const double mean_count = total_count / n;
    out.std_error = std::sqrt(resid / (n * (n - 1.0))) / mean_count;
    return out;
  }
};

}  // namespace

std::pair<ConditionalMean, ConditionalMean> simulate_conditional_advantages(
    double p, std::size_t group_size, std::size_t num_groups, double adv_eps, Rng& rng) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must lie in (0, 1)");
  if (group_size < 2) throw std::invalid_argument("group size must be ≥ 2");
  if (num_groups < 1) throw std::invalid_argument("need at least one group");
  RatioAccumulator zero{std::vector<double>(num_groups), std::vector<double>(num_groups)};
  RatioAccumulator one{std::vector<double>(num_groups), std::vector<double>(num_groups)};
  std::vector<int> rewards(group_size);
  for (std::size_t g = 0; g < num_groups; ++g) {
    for (int& r : rewards) r = rng.bernoulli(p) ? 1 : 0;
    const auto adv = group_normalize(rewards, adv_eps);
    for (std::size_t i = 0; i < group_size; ++i) {
      auto& acc = rewards[i] == 1 ? one : zero;
      acc.sums[g] += adv[i];
      acc.counts[g] += 1.0;
    }
  }
  return {zero.finish(), one.finish()};
}

CheckReport check_advantage_limits(double p, std::size_t group_size, std::size_t num_groups,
                                   double adv_eps, Rng& rng, double fixed_bound) {
  CheckReport report;
  report.name = "advantage-limits";
  report.add_parameter("p", p);
  report.add_parameter("group_size", static_cast<double>(group_size));
  report.add_parameter("num_groups", static_cast<double>(num_groups));
  report.add_parameter("adv_eps", adv_eps);
  const auto mode = group_size == 2 ? LimitMode::pairwise : LimitMode::large_group;
  report.add_parameter("mode", mode == LimitMode::pairwise ? "pairwise" : "large-group");
  const auto [given0, given1] =
      simulate_conditional_advantages(p, group_size, num_groups, adv_eps, rng);
  for (int x : {1, 0}) {
    const auto& est = x == 1 ? given1 : given0;
    const double target = theoretical_advantage_limit(x, p, mode);
    const std::string label = "E[Y|X=" + std::to_string(x) + "]";
    if (est.count == 0) {
      report.measurements.push_back(
          {label, 0.0, target, 0.0, fixed_bound, CheckStatus::inconclusive});
      report.notes.push_back("no draws with X=" + std::to_string(x));
      continue;
    }
    report.add(label, est.mean, target, est.std_error, fixed_bound);
  }
  return report;
}

CheckReport check_scaling_identity(double p, std::size_t large_group_size,
                                   std::size_t large_groups, std::size_t num_pairs,
                                   double adv_eps, Rng& rng, double relative_tolerance) {
  CheckReport report;
  report.name = "scaling-identity";
  report.add_parameter("p", p);
  report.add_parameter("large_group_size", static_cast<double>(large_group_size));
  report.add_parameter("large_groups", static_cast<double>(large_groups));
  report.add_parameter("num_pairs", static_cast<double>(num_pairs));
  const auto large = simulate_conditional_advantages(p, large_group_size, large_groups, adv_eps, rng);
  const auto pairs = simulate_conditional_advantages(p, 2, num_pairs, adv_eps, rng);
  const double target = 1.0 / std::sqrt(p * (1.0 - p));
  for (int x : {1, 0}) {
    const auto& l = x == 1 ? large.second : large.first;
    const auto& s = x == 1 ? pairs.second : pairs.first;
    const std::string label = "ratio[X=" + std::to_string(x) + "]";
    if (l.count == 0 || s.count == 0 || s.mean == 0.0) {
      report.measurements.push_back(
          {label, 0.0, target, 0.0, relative_tolerance * target, CheckStatus::inconclusive});
      continue;
    }
    const double ratio = l.mean / s.mean;
    const double se = std::abs(ratio) * std::hypot(l.std_error / l.mean, s.std_error / s.mean);
    add_with_tolerance(report, label, ratio, target, se, relative_tolerance * target);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Gradient variance

GradientSampler group_gradient_sampler(const TaskSpec& task, const PolicyParams& params,
                                       const ObjectiveSpec& spec) {
  if (params.shape() != task.policy_shape()) {
    throw std::invalid_argument("policy shape does not match task");
  }
  if (spec.kind == ObjectiveKind::dpo) {
    throw std::invalid_argument("variance check is defined for rollout-group objectives");
  }
  return [&task, &params, spec](Rng& rng) {
    RolloutGroup group;
    group.prompt = rng.index(task.num_prompts());
    for (std::size_t i = 0; i < spec.group_size; ++i) {
      group.trajectories.push_back(sample_trajectory(params, group.prompt, rng));
      group.rewards.push_back(reward(task, group.trajectories.back()));
    }
    const std::span<const RolloutGroup> one(&group, 1);
    switch (spec.kind) {
      case ObjectiveKind::two_grpo:
        return two_grpo_objective(params, one).gradient;
      case ObjectiveKind::vpg: {
        std::vector<ScoredTrajectory> batch;
        for (std::size_t i = 0; i < group.size(); ++i) {
          batch.push_back({group.trajectories[i], group.rewards[i]});
        }
        return vpg_objective(params, batch, spec.vpg_form).gradient;
      }
      default:
        return grpo_surrogate(params, one, spec).gradient;
    }
  };
}

VarianceEstimate estimate_batch_variance(const GradientSampler& sampler, std::size_t units,
                                         std::size_t trials, Rng& rng) {
  if (units < 1) throw std::invalid_argument("batch needs at least one unit");
  if (trials < 3) throw std::invalid_argument("variance estimate needs at least 3 trials");
  std::vector<Gradient> means;
  means.reserve(trials);
  for (std::size_t k = 0; k < trials; ++k) {
    Gradient batch = sampler(rng);
    for (std::size_t u = 1; u < units; ++u) batch.add_scaled(sampler(rng), 1.0);
    batch.scale(1.0 / static_cast<double>(units));
    means.push_back(std::move(batch));
  }
  const std::size_t dim = means.front().size();
  const auto n = static_cast<double>(trials);
  std::vector<double> s1(dim, 0.0);
  std::vector<double> s2(dim, 0.0);
  for (const auto& g : means) {
    for (std::size_t c = 0; c < dim; ++c) {
      s1[c] += g[c];
      s2[c] += g[c] * g[c];
    }
  }
  auto trace_from = [&](auto&& sum1, auto&& sum2, double count) {
    double trace = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      trace += std::max(0.0, (sum2(c) - sum1(c) * sum1(c) / count) / (count - 1.0));
    }
    return trace;
  };
  VarianceEstimate out;
  out.batch_size = units;
  out.trace = trace_from([&](std::size_t c) { return s1[c]; },
                         [&](std::size_t c) { return s2[c]; }, n);
  // Leave-one-out jackknife.
  std::vector<double> loo(trials);
  double loo_mean = 0.0;
  for (std::size_t k = 0; k < trials; ++k) {
    const auto& g = means[k];
    loo[k] = trace_from([&](std::size_t c) { return s1[c] - g[c]; },
                        [&](std::size_t c) { return s2[c] - g[c] * g[c]; }, n - 1.0);
    loo_mean += loo[k] / n;
  }
  double spread = 0.0;
  for (double t : loo) spread += (t - loo_mean) * (t - loo_mean);
  out.std_error = std::sqrt((n - 1.0) / n * spread);
  return out;
}

CheckReport check_gradient_variance(const TaskSpec& task, const PolicyParams& params,
                                    const ObjectiveSpec& spec,
                                    std::span<const std::size_t> batch_sizes, std::size_t trials,
                                    Rng& rng, double slope_tolerance) {
  if (batch_sizes.size() < 2) throw std::invalid_argument("need at least two batch sizes");
  if (trials < 100) throw std::invalid_argument("variance check needs at least 100 trials");
  for (std::size_t i = 0; i < batch_sizes.size(); ++i) {
    if (batch_sizes[i] % spec.group_size != 0 || batch_sizes[i] == 0) {
      throw std::invalid_argument("batch sizes must be positive multiples of the group size");
    }
    if (i > 0 && batch_sizes[i] <= batch_sizes[i - 1]) {
      throw std::invalid_argument("batch sizes must be strictly increasing");
    }
  }
  CheckReport report;
  report.name = "gradient-variance";
  report.add_parameter("objective", std::string(to_string(spec.kind)));
  report.add_parameter("group_size", static_cast<double>(spec.group_size));
  report.add_parameter("trials", static_cast<double>(trials));
  const auto sampler = group_gradient_sampler(task, params, spec);
  std::vector<VarianceEstimate> estimates;
  for (std::size_t b : batch_sizes) {
    estimates.push_back(estimate_batch_variance(sampler, b / spec.group_size, trials, rng));
    estimates.back().batch_size = b;
  }
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const auto& e = estimates[i];
    // Informational only: the 1/B prediction from the smallest batch.
    const double predicted = estimates.front().trace * static_cast<double>(batch_sizes.front()) /
                             static_cast<double>(e.batch_size);
    Measurement m{"var_trace[B=" + std::to_string(e.batch_size) + "]", e.trace, predicted,
                  e.std_error, 0.0, CheckStatus::pass};
    report.measurements.push_back(m);
    if (i > 0) {
      const auto& prev = estimates[i - 1];
      const double ratio = e.trace * static_cast<double>(e.batch_size) /
                           (prev.trace * static_cast<double>(prev.batch_size));
      const double se = ratio * std::hypot(e.std_error / e.trace, prev.std_error / prev.trace);
      report.add("scaled_ratio[B=" + std::to_string(prev.batch_size) + "->" +
                     std::to_string(e.batch_size) + "]",
                 ratio, 1.0, se, 0.0);
    }
    xs.push_back(std::log(static_cast<double>(e.batch_size)));
    ys.push_back(std::log(e.trace));
  }
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / n;
    my += ys[i] / n;
  }
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  double resid = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - my - slope * (xs[i] - mx);
    resid += e * e;
  }
  const double slope_se = xs.size() > 2 ? std::sqrt(resid / (n - 2.0) / sxx) : 0.0;
  add_with_tolerance(report, "loglog_slope", slope, -1.0, slope_se, slope_tolerance);
  return report;
}

// ---------------------------------------------------------------------------
// Hard questions

double prob_success_single_policy(double p0, std::size_t m) {
  double miss = 1.0;
  const double q = 1.0 - p0;
  for (std::size_t i = 0; i < m; ++i) miss *= q * q;
  return 1.0 - miss;
}

double prob_success_schedule(std::span<const double> schedule) {
  double miss = 1.0;
  for (double p : schedule) {
    const double q = 1.0 - p;
    miss *= q * q;
  }
  return 1.0 - miss;
}

CheckReport check_hard_question(std::span<const double> schedule, std::size_t num_trials,
                                Rng& rng) {
  if (schedule.empty()) throw std::invalid_argument("schedule must be nonempty");
  for (double p : schedule) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("schedule entries must lie in [0, 1]");
  }
  if (num_trials < 1) throw std::invalid_argument("need at least one trial");
  const double p0 = schedule.front();
  const std::size_t m = schedule.size();
  CheckReport report;
  report.name = "hard-question";
  report.add_parameter("p0", p0);
  report.add_parameter("m", static_cast<double>(m));
  report.add_parameter("num_trials", static_cast<double>(num_trials));

  const double single = prob_success_single_policy(p0, m);
  const double scheduled = prob_success_schedule(schedule);
  const bool in_assumption =
      std::all_of(schedule.begin(), schedule.end(), [&](double p) { return p >= p0; });
  const bool constant =
      std::all_of(schedule.begin(), schedule.end(), [&](double p) { return p == p0; });

  Measurement inequality{"P_mx2-P_2m", scheduled - single, 0.0, 0.0, 0.0, CheckStatus::pass};
  if (scheduled < single) {
    inequality.status = in_assumption ? CheckStatus::fail : CheckStatus::inconclusive;
  }
  report.measurements.push_back(inequality);
  if (!in_assumption) report.notes.push_back("schedule violates p_i >= p0: out of assumption");
  if (constant) {
    report.notes.push_back("constant schedule: equality case");
    add_with_tolerance(report, "equality", scheduled, single, 0.0, 0.0);
  }

  std::size_t hits_single = 0;
  std::size_t hits_schedule = 0;
  for (std::size_t k = 0; k < num_trials; ++k) {
    bool any = false;
    for (std::size_t i = 0; i < 2 * m; ++i) any = rng.bernoulli(p0) || any;
    hits_single += any ? 1 : 0;
    any = false;
    for (double p : schedule) {
      any = rng.bernoulli(p) || any;
      any = rng.bernoulli(p) || any;
    }
    hits_schedule += any ? 1 : 0;
  }
  const auto n = static_cast<double>(num_trials);
  const auto binomial_se = [&](double prob) { return std::sqrt(prob * (1.0 - prob) / n); };
  report.add("P_2m", static_cast<double>(hits_single) / n, single, binomial_se(single), 0.0);
  report.add("P_mx2", static_cast<double>(hits_schedule) / n, scheduled, binomial_se(scheduled),
             0.0);
  return report;
}

CheckReport check_hard_question_random_schedules(std::size_t num_schedules, std::size_t max_m,
                                                 Rng& rng) {
  if (num_schedules < 1 || max_m < 1) {
    throw std::invalid_argument("need at least one schedule of length at least one");
  }
  CheckReport report;
  report.name = "hard-question-random";
  report.add_parameter("num_schedules", static_cast<double>(num_schedules));
  report.add_parameter("max_m", static_cast<double>(max_m));
  std::size_t violations = 0;
  double tightest = std::numeric_limits<double>::infinity();
  std::vector<double> schedule;
  for (std::size_t k = 0; k < num_schedules; ++k) {
    const std::size_t m = 1 + rng.index(max_m);
    schedule.assign(m, 0.0);
    schedule[0] = rng.uniform();
    for (std::size_t i = 1; i < m; ++i) schedule[i] = schedule[0] + (1.0 - schedule[0]) * rng.uniform();
    const double gap = prob_success_schedule(schedule) - prob_success_single_policy(schedule[0], m);
    violations += gap < 0.0 ? 1 : 0;
    tightest = std::min(tightest, gap);
  }
  add_with_tolerance(report, "violations", static_cast<double>(violations), 0.0, 0.0, 0.0);
  report.measurements.push_back({"min_gap", tightest, 0.0, 0.0, 0.0,
                                 tightest >= 0.0 ? CheckStatus::pass : CheckStatus::fail});
  return report;
}

// ---------------------------------------------------------------------------
// Decomposition equivalence

double max_relative_error(const Gradient& a, const Gradient& b) {
  if (a.size() != b.size()) throw std::invalid_argument("gradient size mismatch");
  double scale = 0.0;
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
    diff = std::max(diff, std::abs(a[i] - b[i]));
  }
  return scale == 0.0 ? 0.0 : diff / scale;
}

double cosine_similarity(const Gradient& a, const Gradient& b) {
  if (a.size() != b.size()) throw std::invalid_argument("gradient size mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot / (na * nb);
}

CheckReport compare_decomposition(const PolicyParams& params,
                                  std::span<const RolloutGroup> groups, double relative_bound,
                                  double cosine_bound) {
  CheckReport report;
  report.name = "decomposition";
  report.add_parameter("num_groups", static_cast<double>(groups.size()));
  report.add_parameter("group_size", static_cast<double>(groups.empty() ? 0 : groups[0].size()));
  ObjectiveSpec spec;
  spec.kind = ObjectiveKind::grpo;
  spec.adv_eps = 0.0;
  spec.surrogate = SurrogateForm::mean_field;
  const auto surrogate = grpo_surrogate(params, groups, spec);
  const auto contrastive = grpo_contrastive(params, groups);
  const bool degenerate = std::all_of(groups.begin(), groups.end(),
                                      [](const RolloutGroup& g) { return g.is_degenerate(); });
  if (degenerate) {
    report.notes.push_back("all groups degenerate");
    add_with_tolerance(report, "surrogate_norm", surrogate.gradient.norm(), 0.0, 0.0, 0.0);
    add_with_tolerance(report, "contrastive_norm", contrastive.gradient.norm(), 0.0, 0.0, 0.0);
    return report;
  }
  add_with_tolerance(report, "max_rel_error", max_relative_error(surrogate.gradient,
                                                                 contrastive.gradient),
                     0.0, 0.0, relative_bound);
  add_with_tolerance(report, "cosine", cosine_similarity(surrogate.gradient, contrastive.gradient),
                     1.0, 0.0, cosine_bound);
  const bool pairs =
      std::all_of(groups.begin(), groups.end(), [](const RolloutGroup& g) { return g.size() == 2; });
  if (pairs) {
    const auto two = two_grpo_objective(params, groups);
    add_with_tolerance(report, "max_rel_error_two_grpo",
                       max_relative_error(two.gradient, contrastive.gradient), 0.0, 0.0,
                       relative_bound);
  }
  return report;
}

CheckReport check_decomposition_equivalence(const TaskSpec& task, const PolicyParams& params,
                                            std::size_t num_prompts, std::size_t group_size,
                                            Rng& rng, double relative_bound,
                                            double cosine_bound) {
  if (group_size < 2) throw std::invalid_argument("group size must be ≥ 2");
  if (num_prompts < 1) throw std::invalid_argument("need at least one prompt");
  std::vector<RolloutGroup> groups;
  for (std::size_t q = 0; q < num_prompts; ++q) {
    RolloutGroup group;
    group.prompt = rng.index(task.num_prompts());
    for (std::size_t i = 0; i < group_size; ++i) {
      group.trajectories.push_back(sample_trajectory(params, group.prompt, rng));
      group.rewards.push_back(reward(task, group.trajectories.back()));
    }
    groups.push_back(std::move(group));
  }
  return compare_decomposition(params, groups, relative_bound, cosine_bound);
}

// ---------------------------------------------------------------------------
// Finite differences

FiniteDifferenceResult finite_difference_error(const ObjectiveClosure& objective,
                                               const PolicyParams& params, double step,
                                               std::size_t num_probes, Rng& rng, double floor) {
  if (!(step >= 1e-7 && step <= 1e-3)) {
    throw std::invalid_argument("finite-difference step must lie in [1e-7, 1e-3]");
  }
  if (num_probes < 1) throw std::invalid_argument("need at least one probe");
  const auto analytic = objective(params);
  const double scale = std::max(analytic.gradient.norm(), floor);
  FiniteDifferenceResult out;
  out.probes = num_probes;
  const std::size_t dim = params.shape().size();
  std::vector<double> direction(dim);
  for (std::size_t k = 0; k < num_probes; ++k) {
    double norm = 0.0;
    for (double& d : direction) {
      d = 2.0 * rng.uniform() - 1.0;
      norm += d * d;
    }
    norm = std::sqrt(norm);
    for (double& d : direction) d /= norm;
    std::vector<double> plus(params.logits().begin(), params.logits().end());
    std::vector<double> minus = plus;
    double directional = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      plus[i] += step * direction[i];
      minus[i] -= step * direction[i];
      directional += analytic.gradient[i] * direction[i];
    }
    const double f_plus = objective(PolicyParams(params.shape(), std::move(plus))).loss;
    const double f_minus = objective(PolicyParams(params.shape(), std::move(minus))).loss;
    const double fd = (f_plus - f_minus) / (2.0 * step);
    out.max_relative_error = std::max(out.max_relative_error, std::abs(fd - directional) / scale);
  }
  return out;
}

CheckReport finite_difference_check(const std::string& name, const ObjectiveClosure& objective,
                                    const PolicyParams& params, double step,
                                    std::size_t num_probes, Rng& rng, double relative_bound) {
  CheckReport report;
  report.name = "finite-difference";
  report.add_parameter("objective", name);
  report.add_parameter("step", step);
  report.add_parameter("num_probes", static_cast<double>(num_probes));
  const auto result = finite_difference_error(objective, params, step, num_probes, rng);
  add_with_tolerance(report, name + ":max_rel_error", result.max_relative_error, 0.0, 0.0,
                     relative_bound);
  return report;
}

namespace {

// Off-policy perturbation small enough that few tokens sit near a clip kink.
constexpr double kOffPolicyScale = 0.05;

std::vector<RolloutGroup> random_groups(const PolicyParams& generator, std::size_t count,
                                        std::size_t group_size, Rng& rng) {
  std::vector<RolloutGroup> groups;
  for (std::size_t g = 0; g < count; ++g) {
    RolloutGroup group;
    group.prompt = rng.index(generator.shape().num_prompts);
    for (std::size_t i = 0; i < group_size; ++i) {
      group.trajectories.push_back(sample_trajectory(generator, group.prompt, rng));
      group.rewards.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

PolicyParams perturbed(const PolicyParams& base, double scale, Rng& rng) {
  std::vector<double> logits(base.logits().begin(), base.logits().end());
  for (double& x : logits) x += scale * (2.0 * rng.uniform() - 1.0);
  return PolicyParams(base.shape(), std::move(logits));
}

}  // namespace

CheckReport check_objective_gradients(ObjectiveKind kind, std::size_t num_instances, Rng& rng,
                                      double step, double relative_bound) {
  CheckReport report;
  report.name = "finite-difference";
  report.add_parameter("objective", std::string(to_string(kind)));
  report.add_parameter("instances", static_cast<double>(num_instances));
  report.add_parameter("step", step);
  const PolicyShape shape{3, 3, 4};
  double worst = 0.0;
  double worst_alt = 0.0;
  for (std::size_t k = 0; k < num_instances; ++k) {
    const auto old_params = PolicyParams::random(shape, 1.5, rng);
    const auto params = perturbed(old_params, kOffPolicyScale, rng);
    std::vector<ObjectiveClosure> closures;
    switch (kind) {
      case ObjectiveKind::vpg: {
        std::vector<ScoredTrajectory> batch;
        for (const auto& g : random_groups(old_params, 3, 2, rng)) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            batch.push_back({g.trajectories[i], g.rewards[i]});
          }
        }
        closures.push_back([batch](const PolicyParams& p) { return vpg_objective(p, batch); });
        closures.push_back([batch](const PolicyParams& p) {
          return vpg_objective(p, batch, VpgForm::literal_prob);
        });
        break;
      }
      case ObjectiveKind::grpo:
      case ObjectiveKind::ppo: {
        const auto groups = random_groups(old_params, 3, 4, rng);
        ObjectiveSpec spec;
        spec.kind = kind;
        spec.group_size = 4;
        spec.ppo_baseline = 0.4;
        for (auto form : {SurrogateForm::mean_field, SurrogateForm::importance_ratio}) {
          spec.surrogate = form;
          closures.push_back(
              [groups, spec](const PolicyParams& p) { return grpo_surrogate(p, groups, spec); });
        }
        break;
      }
      case ObjectiveKind::two_grpo: {
        const auto groups = random_groups(old_params, 4, 2, rng);
        closures.push_back(
            [groups](const PolicyParams& p) { return two_grpo_objective(p, groups); });
        break;
      }
      case ObjectiveKind::dpo: {
        std::vector<PreferenceTriple> triples;
        for (std::size_t t = 0; t < 3; ++t) {
          const std::size_t prompt = rng.index(shape.num_prompts);
          triples.push_back({sample_trajectory(old_params, prompt, rng),
                             sample_trajectory(old_params, prompt, rng)});
        }
        closures.push_back([triples, old_params](const PolicyParams& p) {
          return dpo_objective(p, old_params, triples, 0.5);
        });
        break;
      }
    }
    for (std::size_t c = 0; c < closures.size(); ++c) {
      const double err = finite_difference_error(closures[c], params, step, 8, rng).max_relative_error;
      (c == 0 ? worst : worst_alt) = std::max(c == 0 ? worst : worst_alt, err);
    }
  }
  add_with_tolerance(report, std::string(to_string(kind)) + ":max_rel_error", worst, 0.0, 0.0,
                     relative_bound);
  if (kind == ObjectiveKind::vpg) {
    add_with_tolerance(report, "vpg_literal:max_rel_error", worst_alt, 0.0, 0.0, relative_bound);
  } else if (kind == ObjectiveKind::grpo || kind == ObjectiveKind::ppo) {
    add_with_tolerance(report, std::string(to_string(kind)) + "_importance_ratio:max_rel_error",
                       worst_alt, 0.0, 0.0, relative_bound);
  }
  return report;
}

}  // namespace grpolab

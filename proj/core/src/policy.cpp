#include "grpolab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace grpolab {

namespace {

void check_shape(const PolicyShape& shape) {
  if (shape.num_prompts == 0 || shape.seq_len == 0 || shape.vocab_size == 0) {
    throw std::invalid_argument("policy dimensions must be positive");
  }
}

}  // namespace

PolicyParams::PolicyParams(PolicyShape shape) : shape_(shape) {
  check_shape(shape_);
  logits_.assign(shape_.size(), 0.0);
}

PolicyParams::PolicyParams(PolicyShape shape, std::vector<double> logits)
    : shape_(shape), logits_(std::move(logits)) {
  check_shape(shape_);
  if (logits_.size() != shape_.size()) {
    throw std::invalid_argument("logit count " + std::to_string(logits_.size()) +
                                " does not match policy shape " +
                                std::to_string(shape_.size()));
  }
  if (!std::all_of(logits_.begin(), logits_.end(), [](double x) { return std::isfinite(x); })) {
    throw std::invalid_argument("policy logits must be finite");
  }
}

PolicyParams PolicyParams::random(PolicyShape shape, double scale, Rng& rng) {
  std::vector<double> logits(shape.size());
  for (double& x : logits) x = scale * (2.0 * rng.uniform() - 1.0);
  return PolicyParams(shape, std::move(logits));
}

void PolicyParams::softmax(std::size_t prompt, std::size_t position,
                           std::span<double> out) const {
  const auto row = slice(prompt, position);
  const double top = *std::max_element(row.begin(), row.end());
  double total = 0.0;
  for (std::size_t v = 0; v < row.size(); ++v) {
    out[v] = std::exp(row[v] - top);
    total += out[v];
  }
  for (double& p : out) p /= total;
}

std::vector<double> PolicyParams::softmax(std::size_t prompt, std::size_t position) const {
  std::vector<double> out(shape_.vocab_size);
  softmax(prompt, position, out);
  return out;
}

double PolicyParams::token_prob(std::size_t prompt, std::size_t position,
                                std::size_t token) const {
  const auto row = slice(prompt, position);
  const double top = *std::max_element(row.begin(), row.end());
  double total = 0.0;
  for (double x : row) total += std::exp(x - top);
  return std::exp(row[token] - top) / total;
}

void Gradient::add_scaled(const Gradient& other, double scale) {
  if (other.size() != size()) throw std::invalid_argument("gradient size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += scale * other.values[i];
}

void Gradient::scale(double factor) {
  for (double& x : values) x *= factor;
}

double Gradient::norm() const {
  double total = 0.0;
  for (double x : values) total += x * x;
  return std::sqrt(total);
}

bool Gradient::is_zero() const {
  return std::all_of(values.begin(), values.end(), [](double x) { return x == 0.0; });
}

bool Gradient::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

Trajectory sample_trajectory(const PolicyParams& params, std::size_t prompt, Rng& rng) {
  const auto& shape = params.shape();
  if (prompt >= shape.num_prompts) {
    throw std::invalid_argument("prompt id " + std::to_string(prompt) + " out of range [0, " +
                                std::to_string(shape.num_prompts) + ")");
  }
  Trajectory traj;
  traj.prompt = prompt;
  traj.tokens.reserve(shape.seq_len);
  traj.token_probs.reserve(shape.seq_len);
  std::vector<double> probs(shape.vocab_size);
  for (std::size_t t = 0; t < shape.seq_len; ++t) {
    params.softmax(prompt, t, probs);
    // Inverse CDF; the last token absorbs any rounding shortfall.
    const double u = rng.uniform();
    std::size_t token = shape.vocab_size - 1;
    double cumulative = 0.0;
    for (std::size_t v = 0; v + 1 < shape.vocab_size; ++v) {
      cumulative += probs[v];
      if (u < cumulative) {
        token = v;
        break;
      }
    }
    // A zero-probability token can only be reached through the fallback.
    while (probs[token] == 0.0 && token > 0) --token;
    traj.tokens.push_back(token);
    traj.token_probs.push_back(probs[token]);
  }
  return traj;
}

void check_trajectory(const PolicyParams& params, const Trajectory& traj) {
  const auto& shape = params.shape();
  if (traj.prompt >= shape.num_prompts) {
    throw std::invalid_argument("trajectory prompt " + std::to_string(traj.prompt) +
                                " out of range");
  }
  if (traj.tokens.size() != shape.seq_len) {
    throw std::invalid_argument("trajectory length " + std::to_string(traj.tokens.size()) +
                                " does not match seq_len " + std::to_string(shape.seq_len));
  }
  for (std::size_t token : traj.tokens) {
    if (token >= shape.vocab_size) {
      throw std::invalid_argument("token id " + std::to_string(token) + " out of vocabulary");
    }
  }
}

double sequence_log_prob(const PolicyParams& params, const Trajectory& traj) {
  check_trajectory(params, traj);
  double total = 0.0;
  for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
    const auto row = params.slice(traj.prompt, t);
    const double top = *std::max_element(row.begin(), row.end());
    double norm = 0.0;
    for (double x : row) norm += std::exp(x - top);
    total += row[traj.tokens[t]] - top - std::log(norm);
  }
  return total;
}

double sequence_avg_prob(const PolicyParams& params, const Trajectory& traj) {
  check_trajectory(params, traj);
  double total = 0.0;
  for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
    total += params.token_prob(traj.prompt, t, traj.tokens[t]);
  }
  return total / static_cast<double>(traj.tokens.size());
}

void accumulate_token_score(const PolicyParams& params, std::size_t prompt,
                            std::size_t position, std::size_t token, double weight,
                            Gradient& grad) {
  const std::size_t vocab = params.shape().vocab_size;
  std::vector<double> probs(vocab);
  params.softmax(prompt, position, probs);
  const std::size_t base = params.offset(prompt, position);
  for (std::size_t v = 0; v < vocab; ++v) {
    grad[base + v] += weight * ((v == token ? 1.0 : 0.0) - probs[v]);
  }
}

Gradient grad_log_prob(const PolicyParams& params, const Trajectory& traj) {
  check_trajectory(params, traj);
  Gradient grad(params.shape().size());
  for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
    accumulate_token_score(params, traj.prompt, t, traj.tokens[t], 1.0, grad);
  }
  return grad;
}

Gradient grad_avg_prob(const PolicyParams& params, const Trajectory& traj) {
  check_trajectory(params, traj);
  Gradient grad(params.shape().size());
  const double inv_len = 1.0 / static_cast<double>(traj.tokens.size());
  for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
    const double prob = params.token_prob(traj.prompt, t, traj.tokens[t]);
    accumulate_token_score(params, traj.prompt, t, traj.tokens[t], inv_len * prob, grad);
  }
  return grad;
}

Gradient grad_sequence_prob(const PolicyParams& params, const Trajectory& traj) {
  Gradient grad = grad_log_prob(params, traj);
  grad.scale(std::exp(sequence_log_prob(params, traj)));
  return grad;
}

}  // namespace grpolab

#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "grpolab/policy.hpp"
#include "grpolab/random.hpp"

namespace grpolab {

/// Correct set given as a product of per-position accepted-token sets:
/// a sequence is correct iff accepted[t][token_t] for every t.
struct ProductSet {
  std::vector<std::vector<bool>> accepted;  // [position][token]

  bool operator==(const ProductSet&) const = default;
};

/// Correct set given as an explicit list of accepted sequences.
struct SequenceList {
  std::vector<std::vector<std::size_t>> sequences;

  bool operator==(const SequenceList&) const = default;
};

using CorrectSet = std::variant<ProductSet, SequenceList>;

/// Synthetic task with a verifiable binary reward. Immutable once built; the
/// constructor validates that every prompt's correct set is a nonempty strict
/// subset of all V^T sequences.
class TaskSpec {
 public:
  TaskSpec(std::size_t vocab_size, std::size_t seq_len, std::vector<CorrectSet> correct_sets);

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t seq_len() const { return seq_len_; }
  std::size_t num_prompts() const { return correct_sets_.size(); }
  const CorrectSet& correct_set(std::size_t prompt) const { return correct_sets_.at(prompt); }

  /// Policy shape that matches this task.
  PolicyShape policy_shape() const { return {num_prompts(), seq_len_, vocab_size_}; }

  bool operator==(const TaskSpec&) const = default;

 private:
  std::size_t vocab_size_;
  std::size_t seq_len_;
  std::vector<CorrectSet> correct_sets_;
};

/// Largest explicit sequence list success_probability will sum over.
inline constexpr std::size_t kMaxEnumeratedSequences = std::size_t{1} << 22;

/// 1 iff the trajectory's token sequence lies in its prompt's correct set.
int reward(const TaskSpec& task, const Trajectory& traj);

/// Exact probability that one rollout of `prompt` is correct under `params`.
double success_probability(const TaskSpec& task, const PolicyParams& params, std::size_t prompt);

/// Mean over prompts of success_probability: the exact expected reward.
double expected_reward(const TaskSpec& task, const PolicyParams& params);

/// One random correct sequence per prompt, stored in product form.
TaskSpec make_needle_task(std::size_t vocab_size, std::size_t seq_len, std::size_t num_prompts,
                          Rng& rng);

/// k accepted tokens at every position. The accepted window is rotated by
/// (prompt + position) so prompts differ; construction is deterministic.
TaskSpec make_kofv_task(std::size_t vocab_size, std::size_t seq_len, std::size_t k,
                        std::size_t num_prompts);

}  // namespace grpolab

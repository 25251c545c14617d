#include "grpolab/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

#include "grpolab/errors.hpp"

namespace grpolab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

// V^T, saturating at SIZE_MAX.
std::size_t sequence_space(std::size_t vocab_size, std::size_t seq_len) {
  std::size_t total = 1;
  for (std::size_t t = 0; t < seq_len; ++t) {
    if (total > SIZE_MAX / vocab_size) return SIZE_MAX;
    total *= vocab_size;
  }
  return total;
}

void validate(const ProductSet& set, std::size_t vocab_size, std::size_t seq_len,
              std::size_t prompt) {
  const std::string where = "prompt " + std::to_string(prompt) + ": ";
  if (set.accepted.size() != seq_len) {
    throw std::invalid_argument(where + "product set must have one entry per position");
  }
  bool restricts = false;
  for (const auto& row : set.accepted) {
    if (row.size() != vocab_size) {
      throw std::invalid_argument(where + "accepted-token mask must cover the vocabulary");
    }
    const auto count = static_cast<std::size_t>(std::count(row.begin(), row.end(), true));
    if (count == 0) throw std::invalid_argument(where + "empty accepted-token set");
    if (count < vocab_size) restricts = true;
  }
  if (!restricts) {
    throw std::invalid_argument(where + "correct set must not contain every sequence");
  }
}

void validate(const SequenceList& list, std::size_t vocab_size, std::size_t seq_len,
              std::size_t prompt) {
  const std::string where = "prompt " + std::to_string(prompt) + ": ";
  if (list.sequences.empty()) throw std::invalid_argument(where + "empty correct set");
  std::set<std::vector<std::size_t>> distinct;
  for (const auto& seq : list.sequences) {
    if (seq.size() != seq_len) {
      throw std::invalid_argument(where + "sequence length does not match seq_len");
    }
    if (std::any_of(seq.begin(), seq.end(), [&](std::size_t v) { return v >= vocab_size; })) {
      throw std::invalid_argument(where + "token id out of vocabulary");
    }
    distinct.insert(seq);
  }
  if (distinct.size() >= sequence_space(vocab_size, seq_len)) {
    throw std::invalid_argument(where + "correct set must not contain every sequence");
  }
}

}  // namespace

TaskSpec::TaskSpec(std::size_t vocab_size, std::size_t seq_len,
                   std::vector<CorrectSet> correct_sets)
    : vocab_size_(vocab_size), seq_len_(seq_len), correct_sets_(std::move(correct_sets)) {
  if (vocab_size_ < 2) throw std::invalid_argument("vocab_size must be at least 2");
  if (seq_len_ == 0) throw std::invalid_argument("seq_len must be positive");
  if (correct_sets_.empty()) throw std::invalid_argument("task needs at least one prompt");
  for (std::size_t q = 0; q < correct_sets_.size(); ++q) {
    std::visit([&](const auto& set) { validate(set, vocab_size_, seq_len_, q); },
               correct_sets_[q]);
  }
}

int reward(const TaskSpec& task, const Trajectory& traj) {
  if (traj.prompt >= task.num_prompts()) {
    throw std::invalid_argument("trajectory prompt out of range for task");
  }
  if (traj.tokens.size() != task.seq_len()) {
    throw std::invalid_argument("trajectory length does not match task seq_len");
  }
  if (std::any_of(traj.tokens.begin(), traj.tokens.end(),
                  [&](std::size_t v) { return v >= task.vocab_size(); })) {
    throw std::invalid_argument("trajectory token out of task vocabulary");
  }
  return std::visit(
      overloaded{
          [&](const ProductSet& set) {
            for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
              if (!set.accepted[t][traj.tokens[t]]) return 0;
            }
            return 1;
          },
          [&](const SequenceList& list) {
            return std::find(list.sequences.begin(), list.sequences.end(), traj.tokens) !=
                           list.sequences.end()
                       ? 1
                       : 0;
          },
      },
      task.correct_set(traj.prompt));
}

double success_probability(const TaskSpec& task, const PolicyParams& params, std::size_t prompt) {
  if (params.shape() != task.policy_shape()) {
    throw std::invalid_argument("policy shape does not match task");
  }
  if (prompt >= task.num_prompts()) throw std::invalid_argument("prompt id out of range");
  std::vector<double> probs(task.vocab_size());
  return std::visit(
      overloaded{
          [&](const ProductSet& set) {
            double p = 1.0;
            for (std::size_t t = 0; t < task.seq_len(); ++t) {
              params.softmax(prompt, t, probs);
              double mass = 0.0;
              for (std::size_t v = 0; v < probs.size(); ++v) {
                if (set.accepted[t][v]) mass += probs[v];
              }
              p *= mass;
            }
            return p;
          },
          [&](const SequenceList& list) {
            if (list.sequences.size() > kMaxEnumeratedSequences) {
              throw UnsupportedError("correct set too large to enumerate");
            }
            std::vector<std::vector<double>> table(task.seq_len());
            for (std::size_t t = 0; t < task.seq_len(); ++t) table[t] = params.softmax(prompt, t);
            // Duplicates in the list name the same sequence once.
            const std::set<std::vector<std::size_t>> distinct(list.sequences.begin(),
                                                              list.sequences.end());
            double p = 0.0;
            for (const auto& seq : distinct) {
              double term = 1.0;
              for (std::size_t t = 0; t < seq.size(); ++t) term *= table[t][seq[t]];
              p += term;
            }
            return p;
          },
      },
      task.correct_set(prompt));
}

double expected_reward(const TaskSpec& task, const PolicyParams& params) {
  double total = 0.0;
  for (std::size_t q = 0; q < task.num_prompts(); ++q) total += success_probability(task, params, q);
  return total / static_cast<double>(task.num_prompts());
}

TaskSpec make_needle_task(std::size_t vocab_size, std::size_t seq_len, std::size_t num_prompts,
                          Rng& rng) {
  if (vocab_size < 2 || seq_len == 0 || num_prompts == 0) {
    throw std::invalid_argument("needle task needs V >= 2, T >= 1, at least one prompt");
  }
  std::vector<CorrectSet> sets;
  sets.reserve(num_prompts);
  for (std::size_t q = 0; q < num_prompts; ++q) {
    ProductSet set;
    set.accepted.assign(seq_len, std::vector<bool>(vocab_size, false));
    for (std::size_t t = 0; t < seq_len; ++t) set.accepted[t][rng.index(vocab_size)] = true;
    sets.emplace_back(std::move(set));
  }
  return TaskSpec(vocab_size, seq_len, std::move(sets));
}

TaskSpec make_kofv_task(std::size_t vocab_size, std::size_t seq_len, std::size_t k,
                        std::size_t num_prompts) {
  if (k < 1 || k >= vocab_size) throw std::invalid_argument("k-of-V task needs 1 <= k < V");
  if (seq_len == 0 || num_prompts == 0) {
    throw std::invalid_argument("k-of-V task needs T >= 1 and at least one prompt");
  }
  std::vector<CorrectSet> sets;
  sets.reserve(num_prompts);
  for (std::size_t q = 0; q < num_prompts; ++q) {
    ProductSet set;
    set.accepted.assign(seq_len, std::vector<bool>(vocab_size, false));
    for (std::size_t t = 0; t < seq_len; ++t) {
      for (std::size_t j = 0; j < k; ++j) set.accepted[t][(q + t + j) % vocab_size] = true;
    }
    sets.emplace_back(std::move(set));
  }
  return TaskSpec(vocab_size, seq_len, std::move(sets));
}

}  // namespace grpolab

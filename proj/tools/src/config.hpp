#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "grpolab/tasks.hpp"
#include "grpolab/trainer.hpp"

namespace grpolab::cli {

/// Invalid or unreadable run configuration. The message names the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TaskConfig {
  std::string family = "needle";  // needle | kofv
  std::size_t vocab_size = 8;
  std::size_t seq_len = 2;
  std::size_t k = 2;  // kofv only
  std::size_t num_prompts = 20;
  std::uint64_t seed = 0;

  TaskSpec build() const;
};

struct RunConfig {
  TaskConfig task;
  TrainConfig trainer;
  std::string output_dir;  // empty: fall back to the environment/default root

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Parses the sectioned key=value format. Sections: [task], [objective],
/// [trainer], [output]. Unknown sections or keys are rejected. Missing keys
/// keep their defaults. The result is validated.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical text form listing every field; parsing it yields an equal config.
std::string format_run_config(const RunConfig& config);

}  // namespace grpolab::cli

#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include "promptopt/objective.hpp"
#include "promptopt/orchestrator.hpp"

namespace testing {

// The shared fixture task: a well-separated planted optimum (loss ~0.5748,
// accuracy 90) that the acceptance arms compare on.
inline promptopt::SyntheticTaskSpec fixture_task_spec() {
  promptopt::SyntheticTaskSpec spec;
  spec.seed = 123;
  spec.vocab_size = 200;
  spec.d = 16;
  spec.classes = 5;
  spec.shots = 4;
  spec.planted_context_ids = {10, 11, 12, 13};
  spec.noise_sigma = 0.3;
  spec.temperature = 10.0;
  return spec;
}

// Loss of the planted prompt on the fixture task, frozen from a reference
// computation that was cross-checked against an independent oracle.
inline constexpr double kFixturePlantedLoss = 0.5747771628852731;
inline constexpr double kFixturePlantedAccuracy = 90.0;

// Arm-comparison configuration: the small learning rate keeps the matched
// 230-step gradient budget short of the planted basin from a random init.
inline promptopt::RunConfig fixture_run_config(std::uint64_t seed) {
  promptopt::RunConfig config;
  config.rounds = 3;
  config.inner_iterations = 10;
  config.final_iterations = 200;
  config.gd.lr = 0.005;
  config.prompt_length = 4;
  config.seed = seed;
  config.retry.backoff_base_s = 0.0;
  return config;
}

// 8-token vocabulary with hand-set embeddings; id 0 is special.
inline promptopt::Vocabulary tiny_vocab() {
  using promptopt::RowMatrix;
  std::vector<std::string> tokens = {"<pad>", "a", "photo", "of", "cat", "dog", "the", "bird"};
  RowMatrix emb(8, 3);
  emb << 0.0, 0.0, 0.0,   // <pad>
      1.0, 0.0, 0.0,      // a
      0.0, 1.0, 0.0,      // photo
      0.0, 0.0, 1.0,      // of
      1.0, 1.0, 0.0,      // cat
      1.0, 0.0, 1.0,      // dog
      0.0, 1.0, 1.0,      // the
      1.0, 1.0, 1.0;      // bird
  return promptopt::Vocabulary(std::move(tokens), std::move(emb), {0});
}

inline std::filesystem::path unique_temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("promptopt_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing

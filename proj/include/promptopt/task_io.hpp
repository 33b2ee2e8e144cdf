#pragma once

#include <string>

#include "promptopt/objective.hpp"

namespace promptopt {

// Task directory layout:
//   vocab_tokens.txt      one token per line (line number = id)
//   vocab_embeddings.bin  |S| x d matrix (see Vocabulary::save)
//   samples.tsv           one record per line: label, then d floats
//   manifest.json         spec echo, class token ids, planted prompt + its
//                         generation-time loss/accuracy
void save_task(const SyntheticTask& task, const std::string& dir);

SyntheticTask load_task(const std::string& dir);

// Planted-prompt loss recorded in a saved manifest.
double manifest_planted_loss(const std::string& dir);

}  // namespace promptopt

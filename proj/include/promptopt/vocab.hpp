#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "promptopt/errors.hpp"
#include "promptopt/types.hpp"

namespace promptopt {

struct DiscretePrompt {
  std::vector<int> token_ids;
  std::string text;  // space-joined rendering of token_ids

  bool operator==(const DiscretePrompt& other) const { return token_ids == other.token_ids; }
};

// Token dictionary with one embedding row per token. Immutable after
// construction; safe to share across threads.
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> tokens, RowMatrix embeddings,
             std::unordered_set<int> special_ids = {});

  // Seeded generator: |size| pronounceable pseudo-word tokens with unit-norm
  // rows drawn uniformly from the sphere in R^d.
  static Vocabulary random(std::uint64_t seed, int size, int d);

  int size() const { return static_cast<int>(tokens_.size()); }
  int dim() const { return static_cast<int>(embeddings_.cols()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(int id) const { return tokens_.at(id); }
  const RowMatrix& embeddings() const { return embeddings_; }
  const std::unordered_set<int>& special_ids() const { return special_ids_; }
  bool is_special(int id) const { return special_ids_.count(id) != 0; }

  // Exact lookup of a (already normalized) token string; -1 if absent.
  int find(const std::string& token) const;

  // File formats: a token sidecar (one token per line, line number = id;
  // tokens of the form <name> are special) and a matrix file, either binary
  // ("POEMB1\n" magic, u64 rows, u64 cols, row-major little-endian doubles)
  // or textual (one whitespace-separated row per line).
  void save(const std::string& tokens_path, const std::string& embeddings_path) const;
  static Vocabulary load(const std::string& tokens_path, const std::string& embeddings_path);

 private:
  std::vector<std::string> tokens_;
  RowMatrix embeddings_;
  std::unordered_set<int> special_ids_;
  std::unordered_map<std::string, int> index_;
};

// Deterministic pseudo-word for a token index ("ba", "be", ... syllables).
std::string pseudo_word(int index);

// Word-level tokenization: lowercase, split on whitespace, strip surrounding
// punctuation per token, map to exact vocabulary ids. Words that are absent
// (or map to special tokens) are dropped; *dropped, when given, receives the
// count. Throws Errc::all_tokens_unknown when nothing survives.
DiscretePrompt tokenize(const std::string& text, const Vocabulary& vocab, int* dropped = nullptr);

// Row i of the result is the embedding row of p.token_ids[i].
RowMatrix embed(const DiscretePrompt& p, const Vocabulary& vocab);

// Per-row nearest non-special token under the metric; ties break to the
// lowest token index. Throws Errc::zero_vector_under_cosine for a zero row
// under the cosine metric.
DiscretePrompt project(const RowMatrix& theta, const Vocabulary& vocab, Metric metric);

std::string render(const DiscretePrompt& p, const Vocabulary& vocab);

// Builds a DiscretePrompt from ids, validating them and filling in the text.
DiscretePrompt make_prompt(std::vector<int> ids, const Vocabulary& vocab);

}  // namespace promptopt

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "promptopt/errors.hpp"
#include "promptopt/types.hpp"

namespace promptopt {

enum class Origin { gradient, llm, manual, noise };

const char* origin_name(Origin origin);

struct Candidate {
  std::optional<RowMatrix> theta;  // soft snapshot; absent for parse-only candidates
  std::string text;
  double loss = 0.0;
  double accuracy = 0.0;
  Origin origin = Origin::gradient;
  int round = 0;
  int iteration = 0;
};

// Per-round candidate set, deduplicated by text keeping the lower-loss entry.
class CandidatePool {
 public:
  void add(Candidate candidate);
  void clear() { entries_.clear(); }
  bool empty() const { return entries_.empty(); }
  size_t size() const { return entries_.size(); }
  const std::vector<Candidate>& entries() const { return entries_; }

 private:
  std::vector<Candidate> entries_;  // insertion order
};

// The k lowest-loss candidates, emitted worst-first (descending loss) so the
// best appears last. Loss ties resolve to the earlier (round, iteration).
std::vector<Candidate> select_topk(const CandidatePool& pool, int k);

enum class InstructionStyle { gpt, llama };

struct InstructionSpec {
  InstructionStyle style = InstructionStyle::gpt;
  std::string task_description = "image classification with CLIP model";
  std::string task_goal = "image classification";
  std::optional<std::string> manual_prompt;
  bool include_task_description = true;  // TD
  bool include_manual_prompt = false;    // MP
  bool include_trajectory = true;        // OT
  int n_generate = 3;
  int max_words = 10;

  void validate() const {
    if (n_generate < 1) throw Error(Errc::config, "n_generate must be at least 1");
    if (max_words < 1) throw Error(Errc::config, "max_words must be at least 1");
    if (include_manual_prompt && !manual_prompt)
      throw Error(Errc::config, "manual prompt flag set but no manual prompt configured");
  }
};

// System/user message pair for chat-style transports. gpt style has no
// system message.
struct InstructionMessages {
  std::optional<std::string> system;
  std::string user;

  // Flat text used for logging and golden files: the user content, prefixed
  // by "System: ..." when a system message exists.
  std::string flat() const;
};

// Pure function of (candidates, spec, manual): identical inputs produce
// byte-identical output. candidates must already be in select_topk order;
// the evaluated manual candidate, when MP is set, is merged into the block
// list at its loss position. Throws Errc::missing_trajectory when OT is set
// with no candidates.
InstructionMessages build_instruction(const std::vector<Candidate>& candidates,
                                      const InstructionSpec& spec,
                                      const std::optional<Candidate>& manual = std::nullopt);

// Extracts up to n_expected templates from an LLM response: strips list
// numbering, surrounding quotes and label prefixes, drops preamble lines,
// over-long lines (a word is a whitespace token containing an alphanumeric
// character, so "{}" is free) and duplicates. Throws
// Errc::no_templates_parsed when nothing survives.
std::vector<std::string> parse_response(const std::string& text, int n_expected, int max_words);

// Number of countable words in a template (see parse_response).
int count_words(const std::string& text);

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const InstructionMessages& instruction) = 0;
  virtual std::string name() const = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  double backoff_base_s = 1.0;  // doubles per retry; 0 disables sleeping
};

struct LlmReply {
  std::string text;
  int attempts = 0;
};

// Calls the client, retrying transport/timeout failures with exponential
// backoff. After max_attempts failures the last error is rethrown.
LlmReply llm_complete(LlmClient& client, const InstructionMessages& instruction,
                      const RetryPolicy& policy);

}  // namespace promptopt

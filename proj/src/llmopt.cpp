#include "promptopt/llmopt.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace promptopt {

const char* origin_name(Origin origin) {
  switch (origin) {
    case Origin::gradient: return "gradient";
    case Origin::llm: return "llm";
    case Origin::manual: return "manual";
    case Origin::noise: return "noise";
  }
  return "unknown";
}

void CandidatePool::add(Candidate candidate) {
  if (candidate.text.empty()) throw Error(Errc::config, "candidate text must not be empty");
  for (Candidate& existing : entries_) {
    if (existing.text == candidate.text) {
      if (candidate.loss < existing.loss) existing = std::move(candidate);
      return;
    }
  }
  entries_.push_back(std::move(candidate));
}

namespace {

bool better(const Candidate& a, const Candidate& b) {
  if (a.loss != b.loss) return a.loss < b.loss;
  if (a.round != b.round) return a.round < b.round;
  return a.iteration < b.iteration;
}

}  // namespace

std::vector<Candidate> select_topk(const CandidatePool& pool, int k) {
  if (pool.empty()) throw Error(Errc::empty_pool, "cannot select from an empty candidate pool");
  if (k < 1) throw Error(Errc::config, "top-k count must be at least 1");
  std::vector<Candidate> sorted(pool.entries());
  std::stable_sort(sorted.begin(), sorted.end(), better);
  if (static_cast<int>(sorted.size()) > k) sorted.resize(static_cast<size_t>(k));
  // worst-first so the best candidate appears last; equal losses keep the
  // earlier (round, iteration) first
  std::stable_sort(sorted.begin(), sorted.end(), [](const Candidate& a, const Candidate& b) {
    return a.loss > b.loss;
  });
  return sorted;
}

namespace {

std::string format_score(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

void append_block(std::ostringstream& out, const Candidate& c) {
  out << "Templates: " << c.text << "\n"
      << "Loss: " << format_score(c.loss, 2) << "\n"
      << "Accuracy: " << format_score(c.accuracy, 1) << "\n\n";
}

}  // namespace

std::string InstructionMessages::flat() const {
  if (!system) return user;
  return "System: " + *system + "\n\nUser:\n" + user;
}

InstructionMessages build_instruction(const std::vector<Candidate>& candidates,
                                      const InstructionSpec& spec,
                                      const std::optional<Candidate>& manual) {
  spec.validate();
  if (spec.include_trajectory && candidates.empty())
    throw Error(Errc::missing_trajectory, "trajectory flag set but no candidates to show");
  if (spec.include_manual_prompt && !manual)
    throw Error(Errc::config, "manual prompt flag set but no evaluated manual candidate given");

  // Assemble the rendered blocks: trajectory candidates in the given order,
  // with the manual candidate spliced in at its loss position.
  std::vector<Candidate> blocks;
  if (spec.include_trajectory) {
    for (const Candidate& c : candidates)
      if (c.origin != Origin::manual) blocks.push_back(c);
  }
  if (spec.include_manual_prompt) {
    auto pos = std::find_if(blocks.begin(), blocks.end(),
                            [&](const Candidate& c) { return c.loss <= manual->loss; });
    blocks.insert(pos, *manual);
  }

  std::ostringstream body;
  if (spec.style == InstructionStyle::gpt) {
    if (spec.include_task_description) {
      body << "Hi GPT, assume you are a prompt pattern learner.\n"
           << "I have a list of text templates with their corresponding loss values and "
              "accuracy. They are used for " << spec.task_description
           << ". The templates are arranged in descending order based on their loss value "
              "on training samples, where lower loss indicates better quality.\n\n";
    }
    for (const Candidate& c : blocks) append_block(body, c);
    if (!blocks.empty()) {
      body << "There are latent patterns that make the template good.\n"
           << "Based on these patterns, write your new template that is different from the "
              "old ones and has a loss as low as possible.\n\n";
    }
    body << "Here are some requirements\n"
         << "- Please reply with only the template\n"
         << "- Keep every template under " << spec.max_words << " words\n"
         << "- Generate " << spec.n_generate << " templates that potentially have better "
         << spec.task_goal << " performance\n";
    return InstructionMessages{std::nullopt, body.str()};
  }

  // llama style: one system sentence, then a user block with the requirements
  // ahead of the trajectory.
  body << "Propose new prompts for user. Reply with only the proposed short template, do "
          "not reply the loss and accuracy. Keep every template under "
       << spec.max_words << " words. Generate " << spec.n_generate
       << " templates that potentially have better " << spec.task_goal << " performance.";
  if (spec.include_task_description) {
    body << " I have a list of text templates with their corresponding loss values and "
            "accuracy. They are used for " << spec.task_description
         << ". The templates are arranged in descending order based on their loss value on "
            "training samples, where lower loss indicates better quality.";
  }
  body << "\n";
  if (!blocks.empty()) {
    body << "\n";
    for (const Candidate& c : blocks) append_block(body, c);
  }
  return InstructionMessages{
      "You are a helpful, respectful and honest assistant capable of proposing new prompts "
      "for users.",
      body.str()};
}

int count_words(const std::string& text) {
  std::istringstream ss(text);
  std::string word;
  int n = 0;
  while (ss >> word) {
    const bool countable = std::any_of(word.begin(), word.end(), [](unsigned char c) {
      return std::isalnum(c) != 0;
    });
    if (countable) ++n;
  }
  return n;
}

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool to_lower_eq(char c, char ref) {
  return std::tolower(static_cast<unsigned char>(c)) == ref;
}

// Strips "1.", "2)", "-", "*", "•" markers from the front of a line.
std::string strip_list_marker(const std::string& line) {
  size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) return line.substr(i + 1);
  if (!line.empty() && (line[0] == '-' || line[0] == '*')) return line.substr(1);
  if (line.size() >= 3 && line.compare(0, 3, "\xe2\x80\xa2") == 0) return line.substr(3);
  return line;
}

// Strips "Template:", "Templates:", "Template 3:" labels from the front.
std::string strip_label_prefix(const std::string& line) {
  static const char* label = "template";
  size_t i = 0;
  while (i < line.size() && i < 8 && to_lower_eq(line[i], label[i])) ++i;
  if (i != 8) return line;
  size_t j = i;
  if (j < line.size() && (line[j] == 's' || line[j] == 'S')) ++j;
  while (j < line.size() && (line[j] == ' ' || std::isdigit(static_cast<unsigned char>(line[j]))))
    ++j;
  if (j < line.size() && line[j] == ':') return line.substr(j + 1);
  return line;
}

std::string strip_surrounding_quotes(const std::string& line) {
  static const std::pair<const char*, const char*> pairs[] = {
      {"\"", "\""}, {"'", "'"}, {"`", "`"},
      {"\xe2\x80\x9c", "\xe2\x80\x9d"},  // “ ”
      {"\xe2\x80\x98", "\xe2\x80\x99"},  // ‘ ’
  };
  for (const auto& [open, close] : pairs) {
    const size_t lo = std::strlen(open), lc = std::strlen(close);
    if (line.size() >= lo + lc && line.compare(0, lo, open) == 0 &&
        line.compare(line.size() - lc, lc, close) == 0)
      return line.substr(lo, line.size() - lo - lc);
  }
  return line;
}

}  // namespace

std::vector<std::string> parse_response(const std::string& text, int n_expected, int max_words) {
  if (n_expected < 1) throw Error(Errc::config, "n_expected must be at least 1");
  if (max_words < 1) throw Error(Errc::config, "max_words must be at least 1");

  std::vector<std::string> templates;
  std::unordered_set<std::string> seen;
  std::istringstream ss(text);
  std::string line;
  while (static_cast<int>(templates.size()) < n_expected && std::getline(ss, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    t = trim(strip_list_marker(t));
    t = trim(strip_label_prefix(t));
    t = trim(strip_surrounding_quotes(t));
    if (t.empty()) continue;
    if (t.back() == ':') continue;  // preamble or label line ("Sure! Here are templates:")
    if (count_words(t) == 0 || count_words(t) > max_words) continue;
    if (!seen.insert(t).second) continue;
    templates.push_back(t);
  }
  if (templates.empty())
    throw Error(Errc::no_templates_parsed, "no usable template lines in LLM response");
  return templates;
}

LlmReply llm_complete(LlmClient& client, const InstructionMessages& instruction,
                      const RetryPolicy& policy) {
  if (instruction.user.empty()) throw Error(Errc::config, "instruction must not be empty");
  if (policy.max_attempts < 1) throw Error(Errc::config, "retry policy needs at least 1 attempt");

  double backoff = policy.backoff_base_s;
  for (int attempt = 1;; ++attempt) {
    try {
      return LlmReply{client.complete(instruction), attempt};
    } catch (const Error& e) {
      const bool retryable = e.code() == Errc::llm_transport || e.code() == Errc::llm_timeout;
      if (!retryable || attempt >= policy.max_attempts) throw;
    }
    if (backoff > 0.0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
    }
  }
}

}  // namespace promptopt

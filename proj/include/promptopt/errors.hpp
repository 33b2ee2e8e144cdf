#pragma once

#include <stdexcept>
#include <string>

namespace promptopt {

enum class Errc {
  config,
  io,
  parse,
  shape_mismatch,
  all_tokens_unknown,
  zero_vector_under_cosine,
  non_finite_gradient,
  empty_pool,
  missing_trajectory,
  no_templates_parsed,
  llm_transport,
  llm_timeout,
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

const char* errc_name(Errc code);

}  // namespace promptopt

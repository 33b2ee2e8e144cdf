#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace promptopt {

// One recorded run event. Serialized as one self-describing JSON object per
// line; fields with sentinel values (-1 counts, has_score=false) are omitted.
struct TrajectoryEvent {
  std::string kind;    // eval | restart | round_end | llm_error | skip
  int round = 0;
  int iteration = 0;
  std::string origin;  // gradient | llm | manual | noise; empty when n/a
  std::string prompt;
  bool has_score = false;
  double loss = 0.0;
  double accuracy = 0.0;
  double wall_time = 0.0;
  int attempts = -1;       // LLM call attempts for restart/llm_error events
  int dropped_words = -1;  // unknown words dropped when embedding an LLM template
  int pool_before = -1;    // pool size before the round-boundary clear
};

std::string to_json_line(const TrajectoryEvent& event);

// Throws Errc::parse with the 1-based line number on malformed input.
TrajectoryEvent parse_json_line(const std::string& line, size_t line_number);

// Append-only event record with idempotent incremental flushing: a second
// flush only writes events appended since the previous one.
class TrajectoryLog {
 public:
  void append(TrajectoryEvent event) { events_.push_back(std::move(event)); }
  const std::vector<TrajectoryEvent>& events() const { return events_; }

  void flush(std::ostream& sink);
  size_t flushed() const { return flushed_; }

 private:
  std::vector<TrajectoryEvent> events_;
  size_t flushed_ = 0;
};

std::vector<TrajectoryEvent> read_trajectory_file(const std::string& path);

}  // namespace promptopt

#include "promptopt/trajectory.hpp"

#include <fstream>
#include <ostream>

#include <json.hpp>

#include "promptopt/errors.hpp"

namespace promptopt {

std::string to_json_line(const TrajectoryEvent& e) {
  nlohmann::json j;
  j["kind"] = e.kind;
  j["round"] = e.round;
  j["iteration"] = e.iteration;
  if (!e.origin.empty()) j["origin"] = e.origin;
  if (!e.prompt.empty()) j["prompt"] = e.prompt;
  if (e.has_score) {
    j["loss"] = e.loss;
    j["accuracy"] = e.accuracy;
  }
  j["wall_time"] = e.wall_time;
  if (e.attempts >= 0) j["attempts"] = e.attempts;
  if (e.dropped_words >= 0) j["dropped_words"] = e.dropped_words;
  if (e.pool_before >= 0) j["pool_before"] = e.pool_before;
  return j.dump();
}

TrajectoryEvent parse_json_line(const std::string& line, size_t line_number) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
    TrajectoryEvent e;
    e.kind = j.at("kind").get<std::string>();
    e.round = j.at("round").get<int>();
    e.iteration = j.at("iteration").get<int>();
    e.origin = j.value("origin", "");
    e.prompt = j.value("prompt", "");
    if (j.contains("loss")) {
      e.has_score = true;
      e.loss = j.at("loss").get<double>();
      e.accuracy = j.at("accuracy").get<double>();
    }
    e.wall_time = j.value("wall_time", 0.0);
    e.attempts = j.value("attempts", -1);
    e.dropped_words = j.value("dropped_words", -1);
    e.pool_before = j.value("pool_before", -1);
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::parse, "trajectory line " + std::to_string(line_number) +
                                 " is malformed: " + ex.what());
  }
}

void TrajectoryLog::flush(std::ostream& sink) {
  for (size_t i = flushed_; i < events_.size(); ++i) {
    sink << to_json_line(events_[i]) << '\n';
    if (!sink) throw Error(Errc::io, "trajectory sink write failure");
  }
  flushed_ = events_.size();
  sink.flush();
}

std::vector<TrajectoryEvent> read_trajectory_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read trajectory file " + path);
  std::vector<TrajectoryEvent> events;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    events.push_back(parse_json_line(line, lineno));
  }
  return events;
}

}  // namespace promptopt

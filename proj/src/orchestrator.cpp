#include "promptopt/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "promptopt/rng.hpp"

namespace promptopt {

void RunConfig::validate() const {
  if (rounds < 0) throw Error(Errc::config, "rounds must be non-negative");
  if (inner_iterations < 1) throw Error(Errc::config, "inner_iterations must be at least 1");
  if (final_iterations < 0) throw Error(Errc::config, "final_iterations must be non-negative");
  if (topk < 1) throw Error(Errc::config, "topk must be at least 1");
  if (prompt_length < 1) throw Error(Errc::config, "prompt_length must be at least 1");
  if (noise_sigma < 0.0) throw Error(Errc::config, "noise_sigma must be non-negative");
  if (manual_init && init_text.empty())
    throw Error(Errc::config, "manual initialization requires init text");
  if (retry.max_attempts < 1) throw Error(Errc::config, "retry attempts must be at least 1");
  GdConfig probe = gd;
  probe.iterations = inner_iterations;
  probe.validate();
  instruction.validate();
}

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kNoiseStream = 2;

class Clock {
 public:
  explicit Clock(ClockKind kind) : kind_(kind), start_(std::chrono::steady_clock::now()) {}

  double now() {
    if (kind_ == ClockKind::logical) return static_cast<double>(++ticks_) / 1000.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  ClockKind kind_;
  std::chrono::steady_clock::time_point start_;
  std::uint64_t ticks_ = 0;
};

RowMatrix initial_theta(const RunConfig& config, const Vocabulary& vocab) {
  if (config.manual_init) return embed(tokenize(config.init_text, vocab), vocab);
  Rng rng(mix_seed(config.seed, kInitStream));
  RowMatrix theta(config.prompt_length, vocab.dim());
  for (int r = 0; r < config.prompt_length; ++r)
    theta.row(r) = rng.unit_vector(vocab.dim()).transpose();
  return theta;
}

// Shared bookkeeping for a single run: event log, running best, per-round
// summaries, counters.
struct Tracker {
  Tracker(const RunConfig& config, const Objective& objective, const Vocabulary& vocab)
      : config(config), objective(objective), vocab(vocab), clock(config.clock) {}

  const RunConfig& config;
  const Objective& objective;
  const Vocabulary& vocab;
  Clock clock;
  TrajectoryLog log;
  RunResult result;
  bool has_best = false;
  bool round_open = false;
  RoundSummary current_round;

  void begin_round(int round) {
    current_round = RoundSummary{};
    current_round.round = round;
    current_round.best_loss = std::numeric_limits<double>::infinity();
    round_open = true;
  }

  void end_round() {
    if (round_open && std::isfinite(current_round.best_loss))
      result.rounds.push_back(current_round);
    round_open = false;
  }

  void consider_best(const Candidate& c) {
    if (!has_best || c.loss < result.best_loss) {
      has_best = true;
      result.best_loss = c.loss;
      result.best_accuracy = c.accuracy;
      result.best_text = c.text;
      result.best_origin = origin_name(c.origin);
      result.best_round = c.round;
      result.best_iteration = c.iteration;
      if (c.theta) result.best_theta = *c.theta;
    }
    if (round_open && c.loss < current_round.best_loss) {
      current_round.best_loss = c.loss;
      current_round.best_accuracy = c.accuracy;
      current_round.best_text = c.text;
    }
  }

  // Evaluates the discretized prompt, records the event, updates the best.
  // soft_theta, when given, is stored in the candidate (gradient snapshots);
  // otherwise the candidate keeps the embedded prompt itself.
  Candidate evaluate(const DiscretePrompt& prompt, const RowMatrix* soft_theta, Origin origin,
                     int round, int iteration, int dropped = -1) {
    const RowMatrix discrete = embed(prompt, vocab);
    Candidate c;
    c.theta = soft_theta ? *soft_theta : discrete;
    c.text = prompt.text;
    c.loss = objective.loss(discrete);
    c.accuracy = objective.accuracy(discrete);
    c.origin = origin;
    c.round = round;
    c.iteration = iteration;
    ++result.evaluations;
    if (dropped > 0) result.dropped_words += dropped;

    TrajectoryEvent e;
    e.kind = "eval";
    e.round = round;
    e.iteration = iteration;
    e.origin = origin_name(origin);
    e.prompt = c.text;
    e.has_score = true;
    e.loss = c.loss;
    e.accuracy = c.accuracy;
    e.dropped_words = dropped;
    e.wall_time = clock.now();
    log.append(std::move(e));

    consider_best(c);
    return c;
  }

  // Exactly |iterations| gradient steps; every post-step theta is projected,
  // evaluated and (when a pool is given) recorded as a candidate.
  RowMatrix gradient_phase(const RowMatrix& theta0, int iterations, int round,
                           CandidatePool* pool) {
    GdConfig gd = config.gd;
    gd.iterations = iterations;
    return run_inner(theta0, objective, gd, [&](int iter, const RowMatrix& theta) {
      ++result.gradient_steps;
      const DiscretePrompt projected = project(theta, vocab, config.metric);
      Candidate c = evaluate(projected, &theta, Origin::gradient, round, iter);
      if (pool) pool->add(std::move(c));
    });
  }

  void log_restart(const Candidate& chosen, int attempts) {
    TrajectoryEvent e;
    e.kind = "restart";
    e.round = chosen.round;
    e.iteration = chosen.iteration;
    e.origin = origin_name(chosen.origin);
    e.prompt = chosen.text;
    e.has_score = true;
    e.loss = chosen.loss;
    e.accuracy = chosen.accuracy;
    e.attempts = attempts;
    e.wall_time = clock.now();
    log.append(std::move(e));
    current_round.restarted = true;
    current_round.restart_text = chosen.text;
    current_round.restart_loss = chosen.loss;
  }

  void log_round_end(int round, int pool_before) {
    TrajectoryEvent e;
    e.kind = "round_end";
    e.round = round;
    e.pool_before = pool_before;
    e.wall_time = clock.now();
    log.append(std::move(e));
  }

  RunResult finish() {
    end_round();
    result.events = log.events();
    return std::move(result);
  }
};

std::vector<int> clamp_length(std::vector<int> ids, int max_words) {
  if (static_cast<int>(ids.size()) > max_words) ids.resize(static_cast<size_t>(max_words));
  return ids;
}

const Candidate* pool_minimum(const CandidatePool& pool) {
  const Candidate* best = nullptr;
  for (const Candidate& c : pool.entries()) {
    if (!best || c.loss < best->loss) best = &c;
  }
  return best;
}

// One LLM interaction: build the instruction from the pool, query, evaluate
// every parsed template, and pick the restart point. Returns the new theta,
// or nothing when the transport failed and the round degrades to
// gradient-only continuation.
std::optional<RowMatrix> llm_phase(Tracker& t, CandidatePool& pool, int round, LlmClient& client,
                                   const std::optional<Candidate>& manual) {
  const RunConfig& config = t.config;
  const auto topk = select_topk(pool, config.topk);
  const InstructionMessages instruction = build_instruction(topk, config.instruction, manual);

  LlmReply reply;
  try {
    reply = llm_complete(client, instruction, config.retry);
    ++t.result.llm_calls;
  } catch (const Error& e) {
    if (e.code() != Errc::llm_transport && e.code() != Errc::llm_timeout) throw;
    ++t.result.llm_calls;
    ++t.result.llm_failures;
    TrajectoryEvent ev;
    ev.kind = "llm_error";
    ev.round = round;
    ev.prompt = e.what();
    ev.attempts = config.retry.max_attempts;
    ev.wall_time = t.clock.now();
    t.log.append(std::move(ev));
    return std::nullopt;
  }

  std::vector<std::string> templates;
  try {
    templates = parse_response(reply.text, config.instruction.n_generate,
                               config.instruction.max_words);
  } catch (const Error& e) {
    if (e.code() != Errc::no_templates_parsed) throw;
  }

  std::vector<Candidate> generated;
  for (size_t j = 0; j < templates.size(); ++j) {
    int dropped = 0;
    DiscretePrompt prompt;
    try {
      prompt = tokenize(templates[j], t.vocab, &dropped);
    } catch (const Error& e) {
      if (e.code() != Errc::all_tokens_unknown) throw;
      TrajectoryEvent ev;
      ev.kind = "skip";
      ev.round = round;
      ev.iteration = static_cast<int>(j) + 1;
      ev.origin = origin_name(Origin::llm);
      ev.prompt = templates[j];
      ev.wall_time = t.clock.now();
      t.log.append(std::move(ev));
      continue;
    }
    prompt = make_prompt(clamp_length(std::move(prompt.token_ids), config.instruction.max_words),
                         t.vocab);
    Candidate c = t.evaluate(prompt, nullptr, Origin::llm, round, static_cast<int>(j) + 1,
                             dropped);
    pool.add(c);
    generated.push_back(std::move(c));
  }

  const Candidate* chosen = nullptr;
  for (const Candidate& c : generated)
    if (!chosen || c.loss < chosen->loss) chosen = &c;
  if (!chosen) chosen = pool_minimum(pool);  // parsing yielded nothing usable

  const DiscretePrompt restart_prompt = make_prompt(
      clamp_length(tokenize(chosen->text, t.vocab).token_ids, config.instruction.max_words),
      t.vocab);
  t.log_restart(*chosen, reply.attempts);
  return embed(restart_prompt, t.vocab);
}

std::optional<Candidate> manual_candidate(Tracker& t, int round, CandidatePool& pool) {
  if (!t.config.instruction.include_manual_prompt) return std::nullopt;
  int dropped = 0;
  const DiscretePrompt prompt = tokenize(*t.config.instruction.manual_prompt, t.vocab, &dropped);
  Candidate c = t.evaluate(prompt, nullptr, Origin::manual, round, 0, dropped);
  pool.add(c);
  return c;
}

}  // namespace

RunResult run(const RunConfig& config, const Objective& objective, const Vocabulary& vocab,
              LlmClient& client) {
  config.validate();
  Tracker t(config, objective, vocab);
  RowMatrix theta = initial_theta(config, vocab);
  CandidatePool pool;

  for (int round = 1; round <= config.rounds; ++round) {
    t.begin_round(round);
    theta = t.gradient_phase(theta, config.inner_iterations, round, &pool);
    const auto manual = manual_candidate(t, round, pool);
    if (auto restart = llm_phase(t, pool, round, client, manual)) theta = std::move(*restart);
    const int pool_before = static_cast<int>(pool.size());
    pool.clear();
    t.log_round_end(round, pool_before);
    t.end_round();
  }

  if (config.final_iterations > 0) {
    t.begin_round(config.rounds + 1);
    theta = t.gradient_phase(theta, config.final_iterations, config.rounds + 1, nullptr);
  }
  return t.finish();
}

RunResult run_gradient_only(const RunConfig& config, const Objective& objective,
                            const Vocabulary& vocab) {
  config.validate();
  Tracker t(config, objective, vocab);
  RowMatrix theta = initial_theta(config, vocab);
  const int total = config.rounds * config.inner_iterations + config.final_iterations;
  t.begin_round(1);
  if (total > 0) theta = t.gradient_phase(theta, total, 1, nullptr);
  return t.finish();
}

RunResult run_noise_restart(const RunConfig& config, const Objective& objective,
                            const Vocabulary& vocab) {
  config.validate();
  Tracker t(config, objective, vocab);
  RowMatrix theta = initial_theta(config, vocab);
  Rng noise(mix_seed(config.seed, kNoiseStream));

  for (int round = 1; round <= config.rounds; ++round) {
    t.begin_round(round);
    theta = t.gradient_phase(theta, config.inner_iterations, round, nullptr);
    if (config.noise_sigma > 0.0) {
      for (Eigen::Index r = 0; r < theta.rows(); ++r)
        theta.row(r) += config.noise_sigma * noise.gaussian_vector(static_cast<int>(theta.cols()))
                            .transpose();
    }
    Candidate marker;
    marker.text = project(theta, vocab, config.metric).text;
    marker.origin = Origin::noise;
    marker.round = round;
    TrajectoryEvent e;
    e.kind = "restart";
    e.round = round;
    e.origin = origin_name(Origin::noise);
    e.prompt = marker.text;
    e.wall_time = t.clock.now();
    t.log.append(std::move(e));
    t.log_round_end(round, 0);
    t.end_round();
  }

  if (config.final_iterations > 0) {
    t.begin_round(config.rounds + 1);
    theta = t.gradient_phase(theta, config.final_iterations, config.rounds + 1, nullptr);
  }
  return t.finish();
}

// ---- ablation harness ----

namespace {

const char* kAxisNames[] = {"flags", "rounds", "inner-iters", "metric", "prompt-len"};

bool known_axis(const std::string& name) {
  for (const char* n : kAxisNames)
    if (name == n) return true;
  return false;
}

int parse_positive_int(const std::string& value, const std::string& axis) {
  try {
    size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size() || v < 0) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::config, "bad value '" + value + "' for ablation axis " + axis);
  }
}

void validate_axis_value(const std::string& name, const std::string& value) {
  if (name == "flags") {
    if (value.size() != 3 || value.find_first_not_of("01") != std::string::npos)
      throw Error(Errc::config, "flags axis value must be three 0/1 characters (TD,MP,OT), got '" +
                                    value + "'");
  } else if (name == "metric") {
    if (value != "l2" && value != "cosine")
      throw Error(Errc::config, "metric axis value must be l2 or cosine, got '" + value + "'");
  } else if (name == "rounds") {
    parse_positive_int(value, name);
  } else {
    if (parse_positive_int(value, name) < 1)
      throw Error(Errc::config, name + " axis value must be at least 1");
  }
}

// Applies one axis assignment; returns true when the cell must run the
// noise-restart arm (the all-flags-off instruction row).
bool apply_axis(RunConfig& config, const std::string& name, const std::string& value) {
  if (name == "flags") {
    config.instruction.include_task_description = value[0] == '1';
    config.instruction.include_manual_prompt = value[1] == '1';
    config.instruction.include_trajectory = value[2] == '1';
    return value == "000";
  }
  if (name == "rounds") {
    config.rounds = parse_positive_int(value, name);
  } else if (name == "inner-iters") {
    config.inner_iterations = parse_positive_int(value, name);
  } else if (name == "metric") {
    config.metric = value == "l2" ? Metric::l2 : Metric::cosine;
  } else if (name == "prompt-len") {
    config.prompt_length = parse_positive_int(value, name);
  }
  return false;
}

}  // namespace

void AblationGrid::validate() const {
  if (axes.empty()) throw Error(Errc::config, "ablation grid has no axes");
  for (const auto& axis : axes) {
    if (!known_axis(axis.name))
      throw Error(Errc::config, "unknown ablation axis: " + axis.name);
    if (axis.values.empty())
      throw Error(Errc::config, "ablation axis " + axis.name + " has no values");
    for (const auto& v : axis.values) validate_axis_value(axis.name, v);
    const size_t count =
        static_cast<size_t>(std::count_if(axes.begin(), axes.end(), [&](const AblationAxis& a) {
          return a.name == axis.name;
        }));
    if (count > 1) throw Error(Errc::config, "duplicate ablation axis: " + axis.name);
  }
}

std::vector<AblationCell> run_ablation(const AblationGrid& grid, const RunConfig& base_config,
                                       const Objective& objective, const Vocabulary& vocab,
                                       const ClientFactory& make_client, const CellRunSink& sink) {
  grid.validate();
  base_config.validate();
  if (!make_client) throw Error(Errc::config, "ablation needs a client factory");

  const std::vector<std::uint64_t> seeds =
      grid.seeds.empty() ? std::vector<std::uint64_t>{base_config.seed} : grid.seeds;

  size_t n_cells = 1;
  for (const auto& axis : grid.axes) n_cells *= axis.values.size();

  std::vector<AblationCell> cells;
  cells.reserve(n_cells);
  for (size_t index = 0; index < n_cells; ++index) {
    AblationCell cell;
    cell.index = static_cast<int>(index);

    // row-major expansion: the last axis varies fastest
    size_t rem = index;
    for (auto it = grid.axes.rbegin(); it != grid.axes.rend(); ++it) {
      cell.assignment[it->name] = it->values[rem % it->values.size()];
      rem /= it->values.size();
    }

    try {
      RunConfig config = base_config;
      bool noise_arm = false;
      for (const auto& axis : grid.axes)
        noise_arm |= apply_axis(config, axis.name, cell.assignment.at(axis.name));

      std::vector<double> losses, accuracies;
      for (const std::uint64_t seed : seeds) {
        config.seed = seed;
        RunResult result;
        if (noise_arm) {
          result = run_noise_restart(config, objective, vocab);
        } else {
          auto client = make_client();
          if (!client) throw Error(Errc::config, "client factory returned nothing");
          result = run(config, objective, vocab, *client);
        }
        losses.push_back(result.best_loss);
        accuracies.push_back(result.best_accuracy);
        ++cell.seeds_run;
        if (sink) sink(cell, seed, result);
      }

      auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
      };
      auto stddev = [&](const std::vector<double>& v, double m) {
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size()));
      };
      cell.mean_loss = mean(losses);
      cell.std_loss = stddev(losses, cell.mean_loss);
      cell.mean_accuracy = mean(accuracies);
      cell.std_accuracy = stddev(accuracies, cell.mean_accuracy);
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::string ablation_table(const std::vector<AblationCell>& cells) {
  std::ostringstream out;
  // stable column order: union of axis names in first-seen order
  std::vector<std::string> columns;
  for (const auto& cell : cells)
    for (const auto& [name, _] : cell.assignment)
      if (std::find(columns.begin(), columns.end(), name) == columns.end())
        columns.push_back(name);

  out << "cell";
  for (const auto& c : columns) out << '\t' << c;
  out << "\tseeds\tmean_loss\tstd_loss\tmean_accuracy\tstd_accuracy\tstatus\n";

  char buf[64];
  for (const auto& cell : cells) {
    out << cell.index;
    for (const auto& c : columns) {
      auto it = cell.assignment.find(c);
      out << '\t' << (it == cell.assignment.end() ? "-" : it->second);
    }
    out << '\t' << cell.seeds_run;
    auto emit = [&](double v) {
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      out << '\t' << buf;
    };
    if (cell.failed) {
      out << "\t-\t-\t-\t-";
      std::string msg = cell.error;
      for (char& ch : msg)
        if (ch == '\t' || ch == '\n') ch = ' ';
      out << "\tfailed: " << msg << '\n';
    } else {
      emit(cell.mean_loss);
      emit(cell.std_loss);
      emit(cell.mean_accuracy);
      emit(cell.std_accuracy);
      out << "\tok\n";
    }
  }
  return out.str();
}

}  // namespace promptopt

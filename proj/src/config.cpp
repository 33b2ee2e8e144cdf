#include "promptopt/config.hpp"

#include <algorithm>

#include "promptopt/rng.hpp"

namespace promptopt {

namespace {

using nlohmann::json;

void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw Error(Errc::config, where + " must be a JSON object");
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
          return it.key() == k;
        }) == allowed.end())
      throw Error(Errc::config, "unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::config, std::string("bad value for '") + key + "'");
  }
}

Metric parse_metric(const std::string& name) {
  if (name == "l2") return Metric::l2;
  if (name == "cosine") return Metric::cosine;
  throw Error(Errc::config, "metric must be 'l2' or 'cosine', got '" + name + "'");
}

void parse_task(const json& j, AppConfig& out) {
  expect_object(j, "task");
  check_keys(j, "task",
             {"kind", "dir", "seed", "vocab_size", "dim", "classes", "shots",
              "planted_context_ids", "noise_sigma", "temperature"});
  const std::string kind = get_or<std::string>(j, "kind", "synthetic");
  if (kind == "files") {
    out.task_from_files = true;
    out.task_dir = get_or<std::string>(j, "dir", "");
    if (out.task_dir.empty()) throw Error(Errc::config, "task.kind 'files' needs task.dir");
    return;
  }
  if (kind != "synthetic")
    throw Error(Errc::config, "task.kind must be 'synthetic' or 'files', got '" + kind + "'");
  SyntheticTaskSpec& spec = out.task_spec;
  spec.seed = get_or<std::uint64_t>(j, "seed", spec.seed);
  spec.vocab_size = get_or<int>(j, "vocab_size", spec.vocab_size);
  spec.d = get_or<int>(j, "dim", spec.d);
  spec.classes = get_or<int>(j, "classes", spec.classes);
  spec.shots = get_or<int>(j, "shots", spec.shots);
  spec.planted_context_ids =
      get_or<std::vector<int>>(j, "planted_context_ids", spec.planted_context_ids);
  spec.noise_sigma = get_or<double>(j, "noise_sigma", spec.noise_sigma);
  spec.temperature = get_or<double>(j, "temperature", spec.temperature);
  spec.validate();
}

void parse_run(const json& j, RunConfig& run) {
  expect_object(j, "run");
  check_keys(j, "run",
             {"rounds", "inner_iterations", "final_iterations", "topk", "lr", "momentum",
              "prompt_length", "seed", "metric", "init", "init_text", "noise_sigma", "clock"});
  run.rounds = get_or<int>(j, "rounds", run.rounds);
  run.inner_iterations = get_or<int>(j, "inner_iterations", run.inner_iterations);
  run.final_iterations = get_or<int>(j, "final_iterations", run.final_iterations);
  run.topk = get_or<int>(j, "topk", run.topk);
  run.gd.lr = get_or<double>(j, "lr", run.gd.lr);
  run.gd.momentum = get_or<double>(j, "momentum", run.gd.momentum);
  run.prompt_length = get_or<int>(j, "prompt_length", run.prompt_length);
  run.seed = get_or<std::uint64_t>(j, "seed", run.seed);
  run.metric = parse_metric(get_or<std::string>(j, "metric", "l2"));
  run.noise_sigma = get_or<double>(j, "noise_sigma", run.noise_sigma);
  const std::string init = get_or<std::string>(j, "init", "random");
  if (init == "manual") {
    run.manual_init = true;
    run.init_text = get_or<std::string>(j, "init_text", "");
    if (run.init_text.empty())
      throw Error(Errc::config, "run.init 'manual' needs run.init_text");
  } else if (init != "random") {
    throw Error(Errc::config, "run.init must be 'random' or 'manual', got '" + init + "'");
  }
  const std::string clock = get_or<std::string>(j, "clock", "logical");
  if (clock == "real") {
    run.clock = ClockKind::real;
  } else if (clock != "logical") {
    throw Error(Errc::config, "run.clock must be 'logical' or 'real', got '" + clock + "'");
  }
}

void parse_instruction(const json& j, InstructionSpec& spec) {
  expect_object(j, "instruction");
  check_keys(j, "instruction",
             {"style", "task_description", "task_goal", "manual_prompt",
              "include_task_description", "include_manual_prompt", "include_trajectory",
              "n_generate", "max_words"});
  const std::string style = get_or<std::string>(j, "style", "gpt");
  if (style == "llama") {
    spec.style = InstructionStyle::llama;
  } else if (style != "gpt") {
    throw Error(Errc::config, "instruction.style must be 'gpt' or 'llama', got '" + style + "'");
  }
  spec.task_description = get_or<std::string>(j, "task_description", spec.task_description);
  spec.task_goal = get_or<std::string>(j, "task_goal", spec.task_goal);
  if (j.contains("manual_prompt") && !j.at("manual_prompt").is_null())
    spec.manual_prompt = j.at("manual_prompt").get<std::string>();
  spec.include_task_description =
      get_or<bool>(j, "include_task_description", spec.include_task_description);
  spec.include_manual_prompt =
      get_or<bool>(j, "include_manual_prompt", spec.include_manual_prompt);
  spec.include_trajectory = get_or<bool>(j, "include_trajectory", spec.include_trajectory);
  spec.n_generate = get_or<int>(j, "n_generate", spec.n_generate);
  spec.max_words = get_or<int>(j, "max_words", spec.max_words);
}

void parse_llm(const json& j, AppConfig& out) {
  expect_object(j, "llm");
  check_keys(j, "llm",
             {"kind", "endpoint", "model", "temperature", "timeout_s", "api_key_env",
              "retries", "backoff_s", "script", "seed"});
  const std::string kind = get_or<std::string>(j, "kind", "neighborhood");
  if (kind == "scripted") {
    out.llm.kind = LlmSelection::Kind::scripted;
  } else if (kind == "oracle") {
    out.llm.kind = LlmSelection::Kind::oracle;
  } else if (kind == "neighborhood") {
    out.llm.kind = LlmSelection::Kind::neighborhood;
  } else if (kind == "http") {
    out.llm.kind = LlmSelection::Kind::http;
  } else {
    throw Error(Errc::config, "llm.kind must be scripted, oracle, neighborhood or http");
  }
  out.llm.http.endpoint = get_or<std::string>(j, "endpoint", out.llm.http.endpoint);
  out.llm.http.model = get_or<std::string>(j, "model", out.llm.http.model);
  out.llm.http.temperature = get_or<double>(j, "temperature", out.llm.http.temperature);
  out.llm.http.timeout_s = get_or<double>(j, "timeout_s", out.llm.http.timeout_s);
  out.llm.http.api_key_env = get_or<std::string>(j, "api_key_env", out.llm.http.api_key_env);
  out.run.retry.max_attempts = get_or<int>(j, "retries", out.run.retry.max_attempts);
  out.run.retry.backoff_base_s = get_or<double>(j, "backoff_s", out.run.retry.backoff_base_s);
  out.llm.script = get_or<std::vector<std::string>>(j, "script", {});
  if (j.contains("seed") && !j.at("seed").is_null())
    out.llm.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace

AppConfig parse_app_config(const nlohmann::json& document) {
  expect_object(document, "configuration");
  check_keys(document, "configuration", {"task", "run", "instruction", "llm", "out_dir"});
  AppConfig out;
  if (document.contains("task")) parse_task(document.at("task"), out);
  if (document.contains("run")) parse_run(document.at("run"), out.run);
  if (document.contains("instruction"))
    parse_instruction(document.at("instruction"), out.run.instruction);
  if (document.contains("llm")) parse_llm(document.at("llm"), out);
  out.out_dir = get_or<std::string>(document, "out_dir", out.out_dir);
  out.run.validate();
  if (out.llm.kind == LlmSelection::Kind::http && out.llm.http.endpoint.empty())
    throw Error(Errc::config, "llm.kind 'http' needs llm.endpoint");
  if (out.llm.kind == LlmSelection::Kind::scripted && out.llm.script.empty())
    throw Error(Errc::config, "llm.kind 'scripted' needs a non-empty llm.script list");
  return out;
}

AppConfig parse_app_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config, std::string("configuration is not valid JSON: ") + e.what());
  }
  return parse_app_config(j);
}

const char* llm_kind_name(LlmSelection::Kind kind) {
  switch (kind) {
    case LlmSelection::Kind::scripted: return "scripted";
    case LlmSelection::Kind::oracle: return "oracle";
    case LlmSelection::Kind::neighborhood: return "neighborhood";
    case LlmSelection::Kind::http: return "http";
  }
  return "unknown";
}

nlohmann::json app_config_to_json(const AppConfig& config) {
  nlohmann::json task;
  if (config.task_from_files) {
    task = {{"kind", "files"}, {"dir", config.task_dir}};
  } else {
    const SyntheticTaskSpec& s = config.task_spec;
    task = {{"kind", "synthetic"},       {"seed", s.seed},
            {"vocab_size", s.vocab_size}, {"dim", s.d},
            {"classes", s.classes},       {"shots", s.shots},
            {"planted_context_ids", s.planted_context_ids},
            {"noise_sigma", s.noise_sigma}, {"temperature", s.temperature}};
  }

  const RunConfig& r = config.run;
  const InstructionSpec& i = r.instruction;
  nlohmann::json instruction = {
      {"style", i.style == InstructionStyle::gpt ? "gpt" : "llama"},
      {"task_description", i.task_description},
      {"task_goal", i.task_goal},
      {"include_task_description", i.include_task_description},
      {"include_manual_prompt", i.include_manual_prompt},
      {"include_trajectory", i.include_trajectory},
      {"n_generate", i.n_generate},
      {"max_words", i.max_words}};
  if (i.manual_prompt) instruction["manual_prompt"] = *i.manual_prompt;

  nlohmann::json llm = {{"kind", llm_kind_name(config.llm.kind)},
                        {"endpoint", config.llm.http.endpoint},
                        {"model", config.llm.http.model},
                        {"temperature", config.llm.http.temperature},
                        {"timeout_s", config.llm.http.timeout_s},
                        {"api_key_env", config.llm.http.api_key_env},
                        {"retries", r.retry.max_attempts},
                        {"backoff_s", r.retry.backoff_base_s}};
  if (config.llm.kind == LlmSelection::Kind::scripted) llm["script"] = config.llm.script;
  if (config.llm.seed) llm["seed"] = *config.llm.seed;

  return nlohmann::json{
      {"task", task},
      {"run",
       {{"rounds", r.rounds},
        {"inner_iterations", r.inner_iterations},
        {"final_iterations", r.final_iterations},
        {"topk", r.topk},
        {"lr", r.gd.lr},
        {"momentum", r.gd.momentum},
        {"prompt_length", r.prompt_length},
        {"seed", r.seed},
        {"metric", r.metric == Metric::l2 ? "l2" : "cosine"},
        {"init", r.manual_init ? "manual" : "random"},
        {"init_text", r.init_text},
        {"noise_sigma", r.noise_sigma},
        {"clock", r.clock == ClockKind::logical ? "logical" : "real"}}},
      {"instruction", instruction},
      {"llm", llm},
      {"out_dir", config.out_dir}};
}

std::unique_ptr<LlmClient> make_client(const AppConfig& config, const SyntheticTask& task) {
  switch (config.llm.kind) {
    case LlmSelection::Kind::scripted:
      return std::make_unique<ScriptedClient>(config.llm.script);
    case LlmSelection::Kind::oracle:
      return std::make_unique<OracleClient>(task.planted_prompt.text);
    case LlmSelection::Kind::neighborhood: {
      const std::uint64_t seed =
          config.llm.seed ? *config.llm.seed : mix_seed(config.run.seed, 3);
      return std::make_unique<NeighborhoodClient>(task.vocab, seed,
                                                  config.run.instruction.n_generate);
    }
    case LlmSelection::Kind::http:
      return std::make_unique<HttpOpenAiClient>(config.llm.http);
  }
  throw Error(Errc::internal, "unhandled llm kind");
}

AblationGrid parse_ablation_grid(const nlohmann::json& document) {
  expect_object(document, "ablation grid");
  check_keys(document, "ablation grid", {"axes", "seeds"});
  if (!document.contains("axes") || !document.at("axes").is_array())
    throw Error(Errc::config, "ablation grid needs an 'axes' array");
  AblationGrid grid;
  for (const auto& axis_json : document.at("axes")) {
    expect_object(axis_json, "ablation axis");
    check_keys(axis_json, "ablation axis", {"name", "values"});
    AblationAxis axis;
    axis.name = get_or<std::string>(axis_json, "name", "");
    if (!axis_json.contains("values") || !axis_json.at("values").is_array())
      throw Error(Errc::config, "ablation axis '" + axis.name + "' needs a 'values' array");
    for (const auto& v : axis_json.at("values")) {
      if (v.is_string()) {
        axis.values.push_back(v.get<std::string>());
      } else if (v.is_number_integer()) {
        axis.values.push_back(std::to_string(v.get<long long>()));
      } else {
        throw Error(Errc::config, "axis values must be strings or integers");
      }
    }
    grid.axes.push_back(std::move(axis));
  }
  grid.seeds = get_or<std::vector<std::uint64_t>>(document, "seeds", {});
  grid.validate();
  return grid;
}

}  // namespace promptopt

// End-to-end checks of the installed command surface: flag precedence, exit
// codes and artifact layout. Spawns the real binary.
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

const std::string kCli = PROMPTOPT_CLI_PATH;

int run_cli(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path scratch(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("promptopt_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  out << j.dump(2);
}

nlohmann::json base_config() {
  return {
      {"task", {{"seed", 123}}},
      {"run", {{"rounds", 1}, {"inner_iterations", 3}, {"final_iterations", 4},
               {"lr", 0.005}, {"seed", 5}}},
      {"llm", {{"kind", "oracle"}}}};
}

}  // namespace

TEST_CASE("flags beat file values which beat defaults") {
  const auto dir = scratch("precedence");
  const auto config = dir / "config.json";
  write_json(config, base_config());

  REQUIRE(run_cli("run --config " + config.string() + " --out " + (dir / "a").string()) == 0);
  auto summary = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
  CHECK(summary["config"]["run"]["seed"] == 5);           // file beats default
  CHECK(summary["config"]["run"]["rounds"] == 1);

  REQUIRE(run_cli("run --config " + config.string() + " --seed 9 --rounds 2 --out " +
                  (dir / "b").string()) == 0);
  summary = nlohmann::json::parse(slurp(dir / "b" / "summary.json"));
  CHECK(summary["config"]["run"]["seed"] == 9);           // flag beats file
  CHECK(summary["config"]["run"]["rounds"] == 2);
  fs::remove_all(dir);
}

TEST_CASE("configuration errors exit with code 2") {
  const auto dir = scratch("badcfg");
  const auto config = dir / "config.json";
  auto j = base_config();
  j["run"]["rounds"] = -1;
  write_json(config, j);
  CHECK(run_cli("run --config " + config.string() + " --out " + dir.string()) == 2);

  write_json(config, {{"runs", nlohmann::json::object()}});  // typo section
  CHECK(run_cli("run --config " + config.string() + " --out " + dir.string()) == 2);
  fs::remove_all(dir);
}

TEST_CASE("total LLM transport failure exits with code 4 but keeps artifacts") {
  const auto dir = scratch("exhaust");
  const auto config = dir / "config.json";
  auto j = base_config();
  j["llm"] = {{"kind", "http"},
              {"endpoint", "http://127.0.0.1:1/v1/chat/completions"},
              {"timeout_s", 0.5},
              {"retries", 1},
              {"backoff_s", 0.0}};
  write_json(config, j);
  CHECK(run_cli("run --config " + config.string() + " --out " + (dir / "out").string()) == 4);
  CHECK(fs::exists(dir / "out" / "trajectory.jsonl"));
  CHECK(slurp(dir / "out" / "trajectory.jsonl").find("llm_error") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("seed sweeps produce one artifact set per seed") {
  const auto dir = scratch("sweep");
  const auto config = dir / "config.json";
  write_json(config, base_config());
  REQUIRE(run_cli("baseline --kind gradient --seeds 1,2 --config " + config.string() +
                  " --out " + (dir / "out").string()) == 0);
  for (const char* name : {"trajectory_seed1.jsonl", "summary_seed1.json", "curve_seed1.tsv",
                           "trajectory_seed2.jsonl", "summary_seed2.json", "curve_seed2.tsv"})
    CHECK(fs::exists(dir / "out" / name));
  CHECK(slurp(dir / "out" / "trajectory_seed1.jsonl") !=
        slurp(dir / "out" / "trajectory_seed2.jsonl"));
  fs::remove_all(dir);
}

TEST_CASE("noise baseline with sigma zero matches the gradient curve") {
  const auto dir = scratch("noise");
  const auto config = dir / "config.json";
  write_json(config, base_config());
  REQUIRE(run_cli("baseline --kind noise --noise-sigma 0 --config " + config.string() +
                  " --out " + (dir / "n").string()) == 0);
  REQUIRE(run_cli("baseline --kind gradient --config " + config.string() + " --out " +
                  (dir / "g").string()) == 0);
  CHECK(slurp(dir / "n" / "curve.tsv") == slurp(dir / "g" / "curve.tsv"));

  // a real sigma perturbs the curve
  REQUIRE(run_cli("baseline --kind noise --noise-sigma 0.8 --config " + config.string() +
                  " --out " + (dir / "n8").string()) == 0);
  CHECK(slurp(dir / "n8" / "curve.tsv") != slurp(dir / "g" / "curve.tsv"));
  fs::remove_all(dir);
}

TEST_CASE("gen-task is reproducible at the command level") {
  const auto dir = scratch("gentask");
  const auto config = dir / "config.json";
  write_json(config, base_config());
  REQUIRE(run_cli("gen-task --config " + config.string() + " --out " + (dir / "t1").string()) ==
          0);
  REQUIRE(run_cli("gen-task --config " + config.string() + " --out " + (dir / "t2").string()) ==
          0);
  for (const char* name :
       {"vocab_tokens.txt", "vocab_embeddings.bin", "samples.tsv", "manifest.json"})
    CHECK(slurp(dir / "t1" / name) == slurp(dir / "t2" / name));

  // the generated files load back as a task source
  auto j = base_config();
  j["task"] = {{"kind", "files"}, {"dir", (dir / "t1").string()}};
  write_json(config, j);
  CHECK(run_cli("run --config " + config.string() + " --out " + (dir / "run").string()) == 0);
  fs::remove_all(dir);
}

TEST_CASE("report renders the oracle fixture with non-increasing restart losses") {
  const auto dir = scratch("report");
  const auto config = dir / "config.json";
  auto j = base_config();
  j["run"]["rounds"] = 3;
  j["run"]["inner_iterations"] = 10;
  j["run"]["final_iterations"] = 50;
  write_json(config, j);
  REQUIRE(run_cli("run --config " + config.string() + " --out " + (dir / "out").string()) == 0);
  REQUIRE(run_cli("report " + (dir / "out" / "trajectory.jsonl").string() + " --out " +
                  (dir / "rep").string()) == 0);

  const std::string text = slurp(dir / "rep" / "report.txt");
  std::vector<double> restart_losses;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const size_t pos = line.find("(loss ");
    if (line.find("restart after round") != std::string::npos && pos != std::string::npos)
      restart_losses.push_back(std::stod(line.substr(pos + 6)));
  }
  REQUIRE(restart_losses.size() == 3);
  CHECK(restart_losses[1] <= restart_losses[0]);
  CHECK(restart_losses[2] <= restart_losses[1]);

  const std::string svg = slurp(dir / "rep" / "report.svg");
  CHECK(svg.find("<polyline") != std::string::npos);

  // re-rendering archived trajectories reproduces the report bytes
  REQUIRE(run_cli("report " + (dir / "out" / "trajectory.jsonl").string() + " --out " +
                  (dir / "rep2").string()) == 0);
  CHECK(slurp(dir / "rep2" / "report.txt") == text);
  CHECK(slurp(dir / "rep2" / "report.svg") == svg);
  fs::remove_all(dir);
}

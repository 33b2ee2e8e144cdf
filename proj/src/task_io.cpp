#include "promptopt/task_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace promptopt {

namespace {

constexpr const char* kTokensFile = "vocab_tokens.txt";
constexpr const char* kEmbeddingsFile = "vocab_embeddings.bin";
constexpr const char* kSamplesFile = "samples.tsv";
constexpr const char* kManifestFile = "manifest.json";

std::string exact_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_task(const SyntheticTask& task, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);

  task.vocab->save((base / kTokensFile).string(), (base / kEmbeddingsFile).string());

  std::ofstream sf(base / kSamplesFile);
  if (!sf) throw Error(Errc::io, "cannot write samples file in " + dir);
  for (const Sample& s : task.dataset.samples) {
    sf << s.label;
    for (Eigen::Index i = 0; i < s.features.size(); ++i) sf << '\t' << exact_double(s.features(i));
    sf << '\n';
  }
  if (!sf.flush()) throw Error(Errc::io, "write failure on samples file");

  const RowMatrix planted_theta = embed(task.planted_prompt, *task.vocab);
  nlohmann::json manifest = {
      {"spec",
       {{"seed", task.spec.seed},
        {"vocab_size", task.spec.vocab_size},
        {"dim", task.spec.d},
        {"classes", task.spec.classes},
        {"shots", task.spec.shots},
        {"planted_context_ids", task.spec.planted_context_ids},
        {"noise_sigma", task.spec.noise_sigma},
        {"temperature", task.spec.temperature}}},
      {"class_token_ids", task.objective->class_token_ids()},
      {"planted",
       {{"ids", task.planted_prompt.token_ids},
        {"text", task.planted_prompt.text},
        {"loss", task.objective->loss(planted_theta)},
        {"accuracy", task.objective->accuracy(planted_theta)}}},
      {"files",
       {{"tokens", kTokensFile}, {"embeddings", kEmbeddingsFile}, {"samples", kSamplesFile}}}};

  std::ofstream mf(base / kManifestFile);
  if (!mf) throw Error(Errc::io, "cannot write manifest in " + dir);
  mf << manifest.dump(2) << '\n';
  if (!mf.flush()) throw Error(Errc::io, "write failure on manifest");
}

SyntheticTask load_task(const std::string& dir) {
  const std::filesystem::path base(dir);
  std::ifstream mf(base / kManifestFile);
  if (!mf) throw Error(Errc::io, "cannot read manifest in " + dir);
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, std::string("malformed manifest: ") + e.what());
  }

  SyntheticTask task;
  try {
    const auto& spec = manifest.at("spec");
    task.spec.seed = spec.at("seed").get<std::uint64_t>();
    task.spec.vocab_size = spec.at("vocab_size").get<int>();
    task.spec.d = spec.at("dim").get<int>();
    task.spec.classes = spec.at("classes").get<int>();
    task.spec.shots = spec.at("shots").get<int>();
    task.spec.planted_context_ids = spec.at("planted_context_ids").get<std::vector<int>>();
    task.spec.noise_sigma = spec.at("noise_sigma").get<double>();
    task.spec.temperature = spec.at("temperature").get<double>();

    task.vocab = std::make_shared<Vocabulary>(Vocabulary::load(
        (base / manifest.at("files").at("tokens").get<std::string>()).string(),
        (base / manifest.at("files").at("embeddings").get<std::string>()).string()));

    const std::string samples_path =
        (base / manifest.at("files").at("samples").get<std::string>()).string();
    std::ifstream sf(samples_path);
    if (!sf) throw Error(Errc::io, "cannot read " + samples_path);
    task.dataset.num_classes = task.spec.classes;
    task.dataset.shots = task.spec.shots;
    std::string line;
    size_t lineno = 0;
    while (std::getline(sf, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::istringstream ls(line);
      Sample s;
      if (!(ls >> s.label))
        throw Error(Errc::parse, "samples line " + std::to_string(lineno) + ": missing label");
      std::vector<double> values;
      double v;
      while (ls >> v) values.push_back(v);
      if (static_cast<int>(values.size()) != task.spec.d)
        throw Error(Errc::parse, "samples line " + std::to_string(lineno) + ": expected " +
                                     std::to_string(task.spec.d) + " features");
      s.features = Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
      task.dataset.samples.push_back(std::move(s));
    }

    task.objective = std::make_shared<FewShotObjective>(
        *task.vocab, task.dataset, manifest.at("class_token_ids").get<std::vector<int>>(),
        task.spec.temperature);
    task.planted_prompt =
        make_prompt(manifest.at("planted").at("ids").get<std::vector<int>>(), *task.vocab);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, std::string("manifest missing fields: ") + e.what());
  }
  return task;
}

double manifest_planted_loss(const std::string& dir) {
  std::ifstream mf(std::filesystem::path(dir) / kManifestFile);
  if (!mf) throw Error(Errc::io, "cannot read manifest in " + dir);
  nlohmann::json manifest;
  try {
    mf >> manifest;
    return manifest.at("planted").at("loss").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace promptopt

#include "promptopt/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "promptopt/rng.hpp"

namespace promptopt {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::config: return "config";
    case Errc::io: return "io";
    case Errc::parse: return "parse";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::all_tokens_unknown: return "all_tokens_unknown";
    case Errc::zero_vector_under_cosine: return "zero_vector_under_cosine";
    case Errc::non_finite_gradient: return "non_finite_gradient";
    case Errc::empty_pool: return "empty_pool";
    case Errc::missing_trajectory: return "missing_trajectory";
    case Errc::no_templates_parsed: return "no_templates_parsed";
    case Errc::llm_transport: return "llm_transport";
    case Errc::llm_timeout: return "llm_timeout";
    case Errc::internal: return "internal";
  }
  return "unknown";
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, RowMatrix embeddings,
                       std::unordered_set<int> special_ids)
    : tokens_(std::move(tokens)), embeddings_(std::move(embeddings)),
      special_ids_(std::move(special_ids)) {
  if (tokens_.empty()) throw Error(Errc::config, "vocabulary must not be empty");
  if (embeddings_.rows() != static_cast<Eigen::Index>(tokens_.size()))
    throw Error(Errc::config, "embedding row count must equal token count");
  if (embeddings_.cols() < 1) throw Error(Errc::config, "embedding dimension must be positive");
  if (!embeddings_.allFinite()) throw Error(Errc::config, "embeddings contain non-finite entries");
  index_.reserve(tokens_.size());
  for (int i = 0; i < size(); ++i) {
    const std::string& t = tokens_[i];
    if (t.empty()) throw Error(Errc::config, "empty token string at id " + std::to_string(i));
    if (!index_.emplace(t, i).second)
      throw Error(Errc::config, "duplicate token string: " + t);
  }
  for (int id : special_ids_) {
    if (id < 0 || id >= size())
      throw Error(Errc::config, "special id out of range: " + std::to_string(id));
  }
  if (static_cast<int>(special_ids_.size()) >= size())
    throw Error(Errc::config, "vocabulary needs at least one non-special token");
}

std::string pseudo_word(int index) {
  static const char* consonants = "bcdfghjklmnprstvwz";
  static const char* vowels = "aeiou";
  const int n_syll = 18 * 5;
  std::string out;
  int hi = index / n_syll;
  int lo = index % n_syll;
  // Two syllables cover 8100 tokens; longer indexes grow a prefix.
  while (hi >= n_syll) {
    int s = hi % n_syll;
    out.insert(0, {consonants[s / 5], vowels[s % 5]});
    hi /= n_syll;
  }
  out += consonants[hi / 5];
  out += vowels[hi % 5];
  out += consonants[lo / 5];
  out += vowels[lo % 5];
  return out;
}

Vocabulary Vocabulary::random(std::uint64_t seed, int size, int d) {
  if (size < 1 || d < 1) throw Error(Errc::config, "vocabulary size and dimension must be positive");
  Rng rng(seed);
  std::vector<std::string> tokens(size);
  RowMatrix emb(size, d);
  for (int i = 0; i < size; ++i) {
    tokens[i] = pseudo_word(i);
    emb.row(i) = rng.unit_vector(d).transpose();
  }
  return Vocabulary(std::move(tokens), std::move(emb));
}

int Vocabulary::find(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

namespace {

bool is_special_name(const std::string& t) {
  return t.size() >= 2 && t.front() == '<' && t.back() == '>';
}

constexpr char kEmbMagic[8] = {'P', 'O', 'E', 'M', 'B', '1', '\n', '\0'};

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8] = {};
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) return 0;
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_double_le(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  write_u64(out, bits);
}

double read_double_le(std::istream& in) {
  std::uint64_t bits = read_u64(in);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

void Vocabulary::save(const std::string& tokens_path, const std::string& embeddings_path) const {
  std::ofstream tf(tokens_path);
  if (!tf) throw Error(Errc::io, "cannot write " + tokens_path);
  for (const auto& t : tokens_) tf << t << '\n';
  if (!tf.flush()) throw Error(Errc::io, "write failure on " + tokens_path);

  std::ofstream ef(embeddings_path, std::ios::binary);
  if (!ef) throw Error(Errc::io, "cannot write " + embeddings_path);
  ef.write(kEmbMagic, 8);
  write_u64(ef, static_cast<std::uint64_t>(embeddings_.rows()));
  write_u64(ef, static_cast<std::uint64_t>(embeddings_.cols()));
  for (Eigen::Index r = 0; r < embeddings_.rows(); ++r)
    for (Eigen::Index c = 0; c < embeddings_.cols(); ++c) write_double_le(ef, embeddings_(r, c));
  if (!ef.flush()) throw Error(Errc::io, "write failure on " + embeddings_path);
}

Vocabulary Vocabulary::load(const std::string& tokens_path, const std::string& embeddings_path) {
  std::ifstream tf(tokens_path);
  if (!tf) throw Error(Errc::io, "cannot read " + tokens_path);
  std::vector<std::string> tokens;
  std::unordered_set<int> specials;
  std::string line;
  while (std::getline(tf, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (is_special_name(line)) specials.insert(static_cast<int>(tokens.size()));
    tokens.push_back(line);
  }
  if (tokens.empty()) throw Error(Errc::io, "no tokens in " + tokens_path);

  std::ifstream ef(embeddings_path, std::ios::binary);
  if (!ef) throw Error(Errc::io, "cannot read " + embeddings_path);
  char magic[8] = {};
  ef.read(magic, 8);
  RowMatrix emb;
  if (ef.gcount() == 8 && std::memcmp(magic, kEmbMagic, 8) == 0) {
    const auto rows = static_cast<Eigen::Index>(read_u64(ef));
    const auto cols = static_cast<Eigen::Index>(read_u64(ef));
    if (!ef || rows < 1 || cols < 1 || rows > (1 << 24) || cols > (1 << 24))
      throw Error(Errc::io, "corrupt embedding header in " + embeddings_path);
    emb.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) emb(r, c) = read_double_le(ef);
    if (!ef) throw Error(Errc::io, "truncated embedding matrix in " + embeddings_path);
  } else {
    // Textual fallback: one row of whitespace-separated doubles per line.
    ef.close();
    std::ifstream tf2(embeddings_path);
    std::vector<std::vector<double>> rows;
    while (std::getline(tf2, line)) {
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      std::istringstream ls(line);
      std::vector<double> row;
      double v;
      while (ls >> v) row.push_back(v);
      if (!rows.empty() && row.size() != rows.front().size())
        throw Error(Errc::io, "ragged rows in " + embeddings_path);
      rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().empty())
      throw Error(Errc::io, "no matrix data in " + embeddings_path);
    emb.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (size_t r = 0; r < rows.size(); ++r)
      for (size_t c = 0; c < rows[r].size(); ++c)
        emb(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  if (emb.rows() != static_cast<Eigen::Index>(tokens.size()))
    throw Error(Errc::io, "token count does not match embedding rows");
  return Vocabulary(std::move(tokens), std::move(emb), std::move(specials));
}

namespace {

std::string clean_word(const std::string& raw) {
  size_t begin = 0, end = raw.size();
  auto is_strippable = [](unsigned char c) {
    return std::ispunct(c) != 0;
  };
  while (begin < end && is_strippable(raw[begin])) ++begin;
  while (end > begin && is_strippable(raw[end - 1])) --end;
  std::string out = raw.substr(begin, end - begin);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

DiscretePrompt tokenize(const std::string& text, const Vocabulary& vocab, int* dropped) {
  std::istringstream ss(text);
  std::string word;
  std::vector<int> ids;
  int drop_count = 0;
  while (ss >> word) {
    const std::string cleaned = clean_word(word);
    if (cleaned.empty()) continue;  // pure punctuation, e.g. "{}"
    const int id = vocab.find(cleaned);
    if (id < 0 || vocab.is_special(id)) {
      ++drop_count;
      continue;
    }
    ids.push_back(id);
  }
  if (dropped) *dropped = drop_count;
  if (ids.empty())
    throw Error(Errc::all_tokens_unknown, "no word of \"" + text + "\" is in the vocabulary");
  return make_prompt(std::move(ids), vocab);
}

DiscretePrompt make_prompt(std::vector<int> ids, const Vocabulary& vocab) {
  if (ids.empty()) throw Error(Errc::config, "prompt must contain at least one token");
  std::string text;
  for (size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || id >= vocab.size())
      throw Error(Errc::config, "token id out of range: " + std::to_string(id));
    if (vocab.is_special(id))
      throw Error(Errc::config, "special token id in prompt: " + std::to_string(id));
    if (i) text += ' ';
    text += vocab.token(id);
  }
  return DiscretePrompt{std::move(ids), std::move(text)};
}

RowMatrix embed(const DiscretePrompt& p, const Vocabulary& vocab) {
  RowMatrix theta(static_cast<Eigen::Index>(p.token_ids.size()), vocab.dim());
  for (size_t i = 0; i < p.token_ids.size(); ++i) {
    const int id = p.token_ids[i];
    if (id < 0 || id >= vocab.size())
      throw Error(Errc::config, "token id out of range: " + std::to_string(id));
    theta.row(static_cast<Eigen::Index>(i)) = vocab.embeddings().row(id);
  }
  return theta;
}

DiscretePrompt project(const RowMatrix& theta, const Vocabulary& vocab, Metric metric) {
  if (theta.rows() < 1) throw Error(Errc::shape_mismatch, "theta must have at least one row");
  if (theta.cols() != vocab.dim())
    throw Error(Errc::shape_mismatch, "theta dimension does not match vocabulary");
  if (!theta.allFinite()) throw Error(Errc::config, "theta contains non-finite entries");

  const RowMatrix& emb = vocab.embeddings();
  Vector emb_norms;
  if (metric == Metric::cosine) emb_norms = emb.rowwise().norm();

  std::vector<int> ids(static_cast<size_t>(theta.rows()));
  for (Eigen::Index r = 0; r < theta.rows(); ++r) {
    const auto row = theta.row(r);
    double row_norm = 0.0;
    if (metric == Metric::cosine) {
      row_norm = row.norm();
      if (row_norm == 0.0)
        throw Error(Errc::zero_vector_under_cosine,
                    "theta row " + std::to_string(r) + " has zero norm under cosine metric");
    }
    int best_id = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int t = 0; t < vocab.size(); ++t) {
      if (vocab.is_special(t)) continue;
      double dist;
      if (metric == Metric::l2) {
        dist = (emb.row(t) - row).squaredNorm();
      } else {
        if (emb_norms(t) == 0.0) continue;  // cosine undefined for a zero embedding row
        dist = 1.0 - emb.row(t).dot(row) / (emb_norms(t) * row_norm);
      }
      if (dist < best_dist) {
        best_dist = dist;
        best_id = t;
      }
    }
    if (best_id < 0)
      throw Error(Errc::config, "no projectable token in vocabulary");
    ids[static_cast<size_t>(r)] = best_id;
  }
  return make_prompt(std::move(ids), vocab);
}

std::string render(const DiscretePrompt& p, const Vocabulary& vocab) {
  std::string text;
  for (size_t i = 0; i < p.token_ids.size(); ++i) {
    if (i) text += ' ';
    text += vocab.token(p.token_ids[i]);
  }
  return text;
}

}  // namespace promptopt

#include "promptopt/objective.hpp"

#include <cmath>

#include "promptopt/rng.hpp"

namespace promptopt {

namespace {

// Floor on pooled-vector norms so a (measure-zero) exact cancellation of the
// prompt mean against a class row cannot produce NaNs.
constexpr double kNormFloor = 1e-12;

void check_theta(const RowMatrix& theta, int d) {
  if (theta.rows() < 1) throw Error(Errc::shape_mismatch, "theta must have at least one row");
  if (theta.cols() != d)
    throw Error(Errc::shape_mismatch, "theta has " + std::to_string(theta.cols()) +
                                          " columns, objective expects " + std::to_string(d));
  if (!theta.allFinite()) throw Error(Errc::shape_mismatch, "theta contains non-finite entries");
}

}  // namespace

void SyntheticTaskSpec::validate() const {
  if (classes < 2) throw Error(Errc::config, "synthetic task needs at least 2 classes");
  if (shots < 1) throw Error(Errc::config, "synthetic task needs at least 1 shot per class");
  if (d < 1) throw Error(Errc::config, "embedding dimension must be positive");
  if (planted_context_ids.empty())
    throw Error(Errc::config, "planted context must contain at least one token id");
  if (vocab_size <= classes + static_cast<int>(planted_context_ids.size()))
    throw Error(Errc::config, "vocab_size must exceed classes + planted context length");
  if (!(noise_sigma > 0.0)) throw Error(Errc::config, "noise_sigma must be positive");
  if (!(temperature > 0.0)) throw Error(Errc::config, "temperature must be positive");
  for (int id : planted_context_ids) {
    // ids 0..classes are reserved for <pad> and the class tokens
    if (id <= classes || id >= vocab_size)
      throw Error(Errc::config, "planted context id " + std::to_string(id) +
                                    " must lie in [" + std::to_string(classes + 1) + ", " +
                                    std::to_string(vocab_size) + ")");
  }
}

FewShotObjective::FewShotObjective(const Vocabulary& vocab, FewShotDataset dataset,
                                   std::vector<int> class_token_ids, double temperature)
    : dataset_(std::move(dataset)), class_token_ids_(std::move(class_token_ids)),
      temperature_(temperature), d_(vocab.dim()) {
  if (!(temperature_ > 0.0)) throw Error(Errc::config, "temperature must be positive");
  if (static_cast<int>(class_token_ids_.size()) != dataset_.num_classes)
    throw Error(Errc::config, "one class token per class required");
  if (dataset_.samples.empty()) throw Error(Errc::config, "dataset must not be empty");

  class_rows_.resize(dataset_.num_classes, d_);
  for (int c = 0; c < dataset_.num_classes; ++c) {
    const int id = class_token_ids_[c];
    if (id < 0 || id >= vocab.size())
      throw Error(Errc::config, "class token id out of range: " + std::to_string(id));
    class_rows_.row(c) = vocab.embeddings().row(id);
  }

  const auto n = static_cast<Eigen::Index>(dataset_.samples.size());
  features_.resize(n, d_);
  labels_.resize(dataset_.samples.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Sample& s = dataset_.samples[static_cast<size_t>(i)];
    if (s.features.size() != d_)
      throw Error(Errc::config, "sample feature dimension mismatch");
    if (!s.features.allFinite()) throw Error(Errc::config, "sample features must be finite");
    if (s.label < 0 || s.label >= dataset_.num_classes)
      throw Error(Errc::config, "sample label out of range");
    const double norm = s.features.norm();
    if (norm == 0.0) throw Error(Errc::config, "sample feature vector has zero norm");
    features_.row(i) = (s.features / norm).transpose();
    labels_[static_cast<size_t>(i)] = s.label;
  }
}

RowMatrix FewShotObjective::logits(const RowMatrix& theta) const {
  const double pooled = static_cast<double>(theta.rows()) + 1.0;
  const Vector prompt_sum = theta.colwise().sum().transpose();
  RowMatrix z(features_.rows(), class_rows_.rows());
  for (Eigen::Index c = 0; c < class_rows_.rows(); ++c) {
    Vector u = (prompt_sum + class_rows_.row(c).transpose()) / pooled;
    const double norm = std::max(u.norm(), kNormFloor);
    Vector t = u / norm;
    z.col(c) = temperature_ * (features_ * t);
  }
  return z;
}

double FewShotObjective::loss(const RowMatrix& theta) const {
  check_theta(theta, d_);
  const RowMatrix z = logits(theta);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double zmax = z.row(i).maxCoeff();
    double denom = 0.0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) denom += std::exp(z(i, c) - zmax);
    total += -(z(i, labels_[static_cast<size_t>(i)]) - zmax - std::log(denom));
  }
  return total / static_cast<double>(z.rows());
}

RowMatrix FewShotObjective::grad(const RowMatrix& theta) const {
  check_theta(theta, d_);
  const double pooled = static_cast<double>(theta.rows()) + 1.0;
  const Vector prompt_sum = theta.colwise().sum().transpose();
  const auto n = features_.rows();
  const auto C = class_rows_.rows();

  // softmax probabilities
  RowMatrix z = logits(theta);
  RowMatrix p(n, C);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zmax = z.row(i).maxCoeff();
    double denom = 0.0;
    for (Eigen::Index c = 0; c < C; ++c) denom += std::exp(z(i, c) - zmax);
    for (Eigen::Index c = 0; c < C; ++c) p(i, c) = std::exp(z(i, c) - zmax) / denom;
  }

  // The loss depends on theta only through the row sum, so every row of the
  // gradient is the same vector: sum_c d(loss)/d(u_c) / (L+1).
  Vector row_grad = Vector::Zero(d_);
  for (Eigen::Index c = 0; c < C; ++c) {
    Vector u = (prompt_sum + class_rows_.row(c).transpose()) / pooled;
    const double norm = std::max(u.norm(), kNormFloor);
    Vector t = u / norm;
    Vector acc = Vector::Zero(d_);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double coeff = (p(i, c) - (labels_[static_cast<size_t>(i)] == c ? 1.0 : 0.0)) /
                           static_cast<double>(n);
      acc += coeff * features_.row(i).transpose();
    }
    // project through the normalization jacobian: (I - t t^T) / norm
    Vector g_u = (acc - t * t.dot(acc)) / norm * temperature_;
    row_grad += g_u / pooled;
  }

  RowMatrix g(theta.rows(), d_);
  for (Eigen::Index r = 0; r < theta.rows(); ++r) g.row(r) = row_grad.transpose();
  return g;
}

double FewShotObjective::accuracy(const RowMatrix& theta) const {
  check_theta(theta, d_);
  const RowMatrix z = logits(theta);
  int correct = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < z.cols(); ++c)
      if (z(i, c) > z(i, best)) best = static_cast<int>(c);
    if (best == labels_[static_cast<size_t>(i)]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(z.rows());
}

QuadraticObjective::QuadraticObjective(DiscretePrompt target, const Vocabulary& vocab)
    : target_(std::move(target)), vocab_(&vocab) {
  target_theta_ = embed(target_, vocab);
}

void QuadraticObjective::check_shape(const RowMatrix& theta) const {
  if (theta.rows() != target_theta_.rows() || theta.cols() != target_theta_.cols())
    throw Error(Errc::shape_mismatch, "theta shape does not match quadratic target");
  if (!theta.allFinite()) throw Error(Errc::shape_mismatch, "theta contains non-finite entries");
}

double QuadraticObjective::loss(const RowMatrix& theta) const {
  check_shape(theta);
  return (theta - target_theta_).squaredNorm();
}

RowMatrix QuadraticObjective::grad(const RowMatrix& theta) const {
  check_shape(theta);
  return 2.0 * (theta - target_theta_);
}

double QuadraticObjective::accuracy(const RowMatrix& theta) const {
  check_shape(theta);
  return project(theta, *vocab_, Metric::l2) == target_ ? 100.0 : 0.0;
}

SyntheticTask make_synthetic_task(const SyntheticTaskSpec& spec) {
  spec.validate();

  Vocabulary base = Vocabulary::random(spec.seed, spec.vocab_size, spec.d);
  std::vector<std::string> tokens = base.tokens();
  tokens[0] = "<pad>";
  auto vocab = std::make_shared<Vocabulary>(std::move(tokens), base.embeddings(),
                                            std::unordered_set<int>{0});

  std::vector<int> class_ids(spec.classes);
  for (int c = 0; c < spec.classes; ++c) class_ids[c] = c + 1;

  DiscretePrompt planted = make_prompt(spec.planted_context_ids, *vocab);
  const RowMatrix planted_rows = embed(planted, *vocab);
  const double pooled = static_cast<double>(planted_rows.rows()) + 1.0;
  const Vector planted_sum = planted_rows.colwise().sum().transpose();

  Rng rng(mix_seed(spec.seed, 1));
  FewShotDataset dataset;
  dataset.num_classes = spec.classes;
  dataset.shots = spec.shots;
  dataset.samples.reserve(static_cast<size_t>(spec.classes) * spec.shots);
  for (int c = 0; c < spec.classes; ++c) {
    Vector u = (planted_sum + vocab->embeddings().row(class_ids[c]).transpose()) / pooled;
    Vector direction = u / u.norm();
    for (int k = 0; k < spec.shots; ++k) {
      Vector x = direction + spec.noise_sigma * rng.gaussian_vector(spec.d);
      double norm = x.norm();
      while (norm == 0.0) {
        x = direction + spec.noise_sigma * rng.gaussian_vector(spec.d);
        norm = x.norm();
      }
      dataset.samples.push_back(Sample{x / norm, c});
    }
  }

  auto objective = std::make_shared<FewShotObjective>(*vocab, dataset, class_ids,
                                                      spec.temperature);
  return SyntheticTask{vocab, std::move(dataset), std::move(objective), std::move(planted), spec};
}

std::shared_ptr<QuadraticObjective> make_quadratic(const DiscretePrompt& target,
                                                   const Vocabulary& vocab) {
  return std::make_shared<QuadraticObjective>(target, vocab);
}

RowMatrix finite_diff_grad(const Objective& objective, const RowMatrix& theta, double h) {
  if (!(h > 0.0)) throw Error(Errc::config, "finite difference step must be positive");
  RowMatrix g(theta.rows(), theta.cols());
  RowMatrix probe = theta;
  for (Eigen::Index r = 0; r < theta.rows(); ++r) {
    for (Eigen::Index c = 0; c < theta.cols(); ++c) {
      const double saved = probe(r, c);
      probe(r, c) = saved + h;
      const double up = objective.loss(probe);
      probe(r, c) = saved - h;
      const double down = objective.loss(probe);
      probe(r, c) = saved;
      g(r, c) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

}  // namespace promptopt

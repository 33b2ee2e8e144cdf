#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "promptopt/types.hpp"
#include "promptopt/vocab.hpp"

namespace promptopt {

struct Sample {
  Vector features;
  int label = 0;
};

struct FewShotDataset {
  std::vector<Sample> samples;  // grouped C blocks of K, class-major order
  int num_classes = 0;
  int shots = 0;
};

struct SyntheticTaskSpec {
  std::uint64_t seed = 42;
  int vocab_size = 200;
  int d = 16;
  int classes = 5;
  int shots = 4;
  std::vector<int> planted_context_ids = {10, 11, 12, 13};
  double noise_sigma = 0.3;
  double temperature = 10.0;

  void validate() const;
};

// Black-box loss contract. loss/grad/accuracy accept any finite theta with
// dim() columns (the synthetic objective accepts any row count; the quadratic
// pins it). Implementations are immutable and safe to call concurrently.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual double loss(const RowMatrix& theta) const = 0;
  virtual RowMatrix grad(const RowMatrix& theta) const = 0;
  virtual double accuracy(const RowMatrix& theta) const = 0;  // percent in [0, 100]
  virtual int dim() const = 0;
};

// Cosine-similarity classifier over mean-pooled embeddings: the text feature
// of class c is normalize(mean of the prompt rows and the class-token row),
// logits are temperature * cos(feature, sample), loss is mean softmax
// cross-entropy over the dataset and accuracy the mean argmax hit rate
// (ties resolve to the lowest class index).
class FewShotObjective : public Objective {
 public:
  FewShotObjective(const Vocabulary& vocab, FewShotDataset dataset,
                   std::vector<int> class_token_ids, double temperature);

  double loss(const RowMatrix& theta) const override;
  RowMatrix grad(const RowMatrix& theta) const override;
  double accuracy(const RowMatrix& theta) const override;
  int dim() const override { return d_; }

  const FewShotDataset& dataset() const { return dataset_; }
  const std::vector<int>& class_token_ids() const { return class_token_ids_; }
  double temperature() const { return temperature_; }

 private:
  // logits(i, c) for every sample i and class c
  RowMatrix logits(const RowMatrix& theta) const;

  RowMatrix class_rows_;   // C x d embedding rows of the class tokens
  RowMatrix features_;     // n x d unit-norm sample features
  std::vector<int> labels_;
  FewShotDataset dataset_;
  std::vector<int> class_token_ids_;
  double temperature_;
  int d_;
};

// loss = ||theta - embed(target)||_F^2, grad = 2(theta - embed(target)),
// accuracy = 100 iff project(theta) == target under L2.
class QuadraticObjective : public Objective {
 public:
  QuadraticObjective(DiscretePrompt target, const Vocabulary& vocab);

  double loss(const RowMatrix& theta) const override;
  RowMatrix grad(const RowMatrix& theta) const override;
  double accuracy(const RowMatrix& theta) const override;
  int dim() const override { return static_cast<int>(target_theta_.cols()); }

  const DiscretePrompt& target() const { return target_; }

 private:
  void check_shape(const RowMatrix& theta) const;

  DiscretePrompt target_;
  RowMatrix target_theta_;
  const Vocabulary* vocab_;
};

// A generated task bundle: the vocabulary, the few-shot data, the objective
// over them, and the planted near-optimal context prompt.
struct SyntheticTask {
  std::shared_ptr<Vocabulary> vocab;
  FewShotDataset dataset;
  std::shared_ptr<FewShotObjective> objective;
  DiscretePrompt planted_prompt;
  SyntheticTaskSpec spec;
};

// Deterministic from spec.seed. Token 0 is a <pad> special, ids 1..C are the
// class tokens, and every class direction is normalize(mean of the planted
// context rows and the class row); samples are normalize(direction +
// noise_sigma * gaussian), K per class.
SyntheticTask make_synthetic_task(const SyntheticTaskSpec& spec);

std::shared_ptr<QuadraticObjective> make_quadratic(const DiscretePrompt& target,
                                                   const Vocabulary& vocab);

// Central finite differences per coordinate; test oracle for grad().
RowMatrix finite_diff_grad(const Objective& objective, const RowMatrix& theta, double h);

}  // namespace promptopt

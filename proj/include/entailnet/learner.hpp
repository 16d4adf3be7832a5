#pragma once

// Binary relevance: one independent probabilistic model per target column.
// The correction step only needs marginal probabilities, so any learner that
// produces them fits behind BaseLearner.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "entailnet/dataset.hpp"

namespace entailnet {

class PredictionTable;

class BinaryModel {
 public:
  virtual ~BinaryModel() = default;
  /// P(target = true) for one row; always within [0, 1].
  virtual double predict(const FeatureMatrix& features, std::size_t row) const = 0;
  std::vector<double> predict_proba(const FeatureMatrix& features) const;
};

class BaseLearner {
 public:
  virtual ~BaseLearner() = default;
  virtual std::string name() const = 0;
  /// target[i] is 0 or 1 for row i of features.
  virtual std::unique_ptr<BinaryModel> fit(const FeatureMatrix& features,
                                           std::span<const std::uint8_t> target) const = 0;
};

/// Laplace-smoothed training frequency, ignoring features.
class PriorLearner final : public BaseLearner {
 public:
  explicit PriorLearner(double alpha = 1.0) : alpha_(alpha) {}
  std::string name() const override { return "prior"; }
  std::unique_ptr<BinaryModel> fit(const FeatureMatrix& features, std::span<const std::uint8_t> target) const override;

 private:
  double alpha_;
};

/// Naive Bayes over binarised numeric features (above the training median)
/// and categorical nominal features, additive smoothing alpha. Missing values
/// are skipped. A constant target degenerates to the smoothed prior.
class NaiveBayesLearner final : public BaseLearner {
 public:
  explicit NaiveBayesLearner(double alpha = 1.0) : alpha_(alpha) {}
  std::string name() const override { return "nb"; }
  std::unique_ptr<BinaryModel> fit(const FeatureMatrix& features, std::span<const std::uint8_t> target) const override;

 private:
  double alpha_;
};

/// "prior" or "nb"; throws UsageError otherwise.
std::unique_ptr<BaseLearner> make_learner(std::string_view name);

struct FeatureSchema {
  std::vector<std::string> names;
  std::vector<FeatureKind> kinds;

  static FeatureSchema of(const FeatureMatrix& features);
  bool operator==(const FeatureSchema&) const = default;
};

struct ModelBundle {
  FeatureSchema schema;
  std::vector<std::string> targets;
  std::vector<std::shared_ptr<const BinaryModel>> models;
};

/// One model per column of `targets` (real labels plus any leak columns).
ModelBundle train_binary_relevance(const BaseLearner& learner, const FeatureMatrix& features,
                                   const LabelMatrix& targets, std::size_t threads = 1);

/// Rows follow `features`; `instance_ids` names them. Throws DataError when
/// the feature schema differs from training.
PredictionTable predict_marginals(const ModelBundle& models, const FeatureMatrix& features,
                                  std::vector<std::string> instance_ids, std::size_t threads = 1);

}  // namespace entailnet

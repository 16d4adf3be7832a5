#include "entailnet/learner.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "entailnet/error.hpp"
#include "entailnet/parallel.hpp"
#include "entailnet/predictions.hpp"

namespace entailnet {

std::vector<double> BinaryModel::predict_proba(const FeatureMatrix& features) const {
  std::vector<double> out(features.n_instances());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = predict(features, r);
  return out;
}

namespace {

void check_target(const FeatureMatrix& features, std::span<const std::uint8_t> target) {
  if (target.size() != features.n_instances()) {
    throw UsageError("target has " + std::to_string(target.size()) + " rows, features have " +
                     std::to_string(features.n_instances()));
  }
}

double smoothed_frequency(std::span<const std::uint8_t> target, double alpha) {
  std::size_t pos = 0;
  for (auto t : target) pos += t ? 1 : 0;
  return (static_cast<double>(pos) + alpha) / (static_cast<double>(target.size()) + 2.0 * alpha);
}

class ConstantModel final : public BinaryModel {
 public:
  explicit ConstantModel(double p) : p_(p) {}
  double predict(const FeatureMatrix&, std::size_t) const override { return p_; }

 private:
  double p_;
};

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Per-feature log-likelihood tables, indexed [class][value].
struct NumericTerm {
  std::size_t column;
  double threshold;
  double log_p[2][2];
};

struct NominalTerm {
  std::size_t column;
  std::map<std::string, std::size_t> index;  // unseen values map to index.size()
  std::vector<double> log_p[2];
};

class NaiveBayesModel final : public BinaryModel {
 public:
  NaiveBayesModel(double log_prior_odds, std::vector<NumericTerm> numeric, std::vector<NominalTerm> nominal)
      : log_prior_odds_(log_prior_odds), numeric_(std::move(numeric)), nominal_(std::move(nominal)) {}

  double predict(const FeatureMatrix& features, std::size_t row) const override {
    double lo = log_prior_odds_;
    for (const auto& t : numeric_) {
      const auto& cell = features.column(t.column).numeric[row];
      if (!cell) continue;
      const int bit = *cell > t.threshold ? 1 : 0;
      lo += t.log_p[1][bit] - t.log_p[0][bit];
    }
    for (const auto& t : nominal_) {
      const auto& cell = features.column(t.column).nominal[row];
      if (!cell) continue;
      auto it = t.index.find(*cell);
      const std::size_t v = it == t.index.end() ? t.index.size() : it->second;
      lo += t.log_p[1][v] - t.log_p[0][v];
    }
    // logistic, written to avoid overflow on either tail
    if (lo >= 0) return 1.0 / (1.0 + std::exp(-lo));
    const double e = std::exp(lo);
    return e / (1.0 + e);
  }

 private:
  double log_prior_odds_;
  std::vector<NumericTerm> numeric_;
  std::vector<NominalTerm> nominal_;
};

}  // namespace

std::unique_ptr<BinaryModel> PriorLearner::fit(const FeatureMatrix& features,
                                               std::span<const std::uint8_t> target) const {
  check_target(features, target);
  return std::make_unique<ConstantModel>(smoothed_frequency(target, alpha_));
}

std::unique_ptr<BinaryModel> NaiveBayesLearner::fit(const FeatureMatrix& features,
                                                    std::span<const std::uint8_t> target) const {
  check_target(features, target);
  const std::size_t n = target.size();
  std::size_t n_pos = 0;
  for (auto t : target) n_pos += t ? 1 : 0;
  if (n_pos == 0 || n_pos == n) return std::make_unique<ConstantModel>(smoothed_frequency(target, alpha_));

  const double n_cls[2] = {static_cast<double>(n - n_pos), static_cast<double>(n_pos)};
  const double log_prior_odds = std::log((n_cls[1] + alpha_) / (n_cls[0] + alpha_));

  std::vector<NumericTerm> numeric;
  std::vector<NominalTerm> nominal;
  for (std::size_t c = 0; c < features.n_features(); ++c) {
    const FeatureColumn& col = features.column(c);
    if (col.kind == FeatureKind::Numeric) {
      std::vector<double> present;
      for (const auto& v : col.numeric)
        if (v) present.push_back(*v);
      if (present.empty()) continue;
      NumericTerm term{c, median_of(present), {}};
      double ones[2] = {0, 0}, seen[2] = {0, 0};
      for (std::size_t r = 0; r < n; ++r) {
        if (!col.numeric[r]) continue;
        const int y = target[r] ? 1 : 0;
        seen[y] += 1;
        if (*col.numeric[r] > term.threshold) ones[y] += 1;
      }
      for (int y = 0; y < 2; ++y) {
        const double p1 = (ones[y] + alpha_) / (seen[y] + 2.0 * alpha_);
        term.log_p[y][1] = std::log(p1);
        term.log_p[y][0] = std::log1p(-p1);
      }
      numeric.push_back(term);
    } else {
      NominalTerm term;
      term.column = c;
      for (const auto& v : col.nominal)
        if (v) term.index.emplace(*v, 0);
      if (term.index.empty()) continue;
      std::size_t k = 0;
      for (auto& [value, idx] : term.index) idx = k++;
      const std::size_t slots = term.index.size() + 1;
      std::vector<double> counts[2] = {std::vector<double>(slots, 0.0), std::vector<double>(slots, 0.0)};
      double seen[2] = {0, 0};
      for (std::size_t r = 0; r < n; ++r) {
        if (!col.nominal[r]) continue;
        const int y = target[r] ? 1 : 0;
        seen[y] += 1;
        counts[y][term.index.at(*col.nominal[r])] += 1;
      }
      for (int y = 0; y < 2; ++y) {
        term.log_p[y].resize(slots);
        const double denom = seen[y] + alpha_ * static_cast<double>(slots);
        for (std::size_t v = 0; v < slots; ++v) term.log_p[y][v] = std::log((counts[y][v] + alpha_) / denom);
      }
      nominal.push_back(std::move(term));
    }
  }
  return std::make_unique<NaiveBayesModel>(log_prior_odds, std::move(numeric), std::move(nominal));
}

std::unique_ptr<BaseLearner> make_learner(std::string_view name) {
  if (name == "prior") return std::make_unique<PriorLearner>();
  if (name == "nb") return std::make_unique<NaiveBayesLearner>();
  throw UsageError("unknown learner '" + std::string(name) + "' (expected prior or nb)");
}

FeatureSchema FeatureSchema::of(const FeatureMatrix& features) {
  FeatureSchema s;
  for (const auto& c : features.columns()) {
    s.names.push_back(c.name);
    s.kinds.push_back(c.kind);
  }
  return s;
}

ModelBundle train_binary_relevance(const BaseLearner& learner, const FeatureMatrix& features,
                                   const LabelMatrix& targets, std::size_t threads) {
  if (targets.n_instances() != features.n_instances()) {
    throw DataError("label rows (" + std::to_string(targets.n_instances()) + ") differ from feature rows (" +
                    std::to_string(features.n_instances()) + ")");
  }
  ModelBundle bundle;
  bundle.schema = FeatureSchema::of(features);
  bundle.targets = targets.names();
  bundle.models.resize(targets.n_labels());
  parallel_for(targets.n_labels(), threads, [&](std::size_t j) {
    std::vector<std::uint8_t> y(targets.n_instances());
    for (std::size_t r = 0; r < y.size(); ++r) y[r] = targets.get(r, j) ? 1 : 0;
    bundle.models[j] = learner.fit(features, y);
  });
  return bundle;
}

PredictionTable predict_marginals(const ModelBundle& models, const FeatureMatrix& features,
                                  std::vector<std::string> instance_ids, std::size_t threads) {
  if (!(FeatureSchema::of(features) == models.schema)) {
    throw DataError("feature schema differs from the one the models were trained on");
  }
  if (instance_ids.size() != features.n_instances()) {
    throw UsageError("instance id count does not match feature rows");
  }
  PredictionTable table(std::move(instance_ids), models.targets);
  parallel_for(models.models.size(), threads, [&](std::size_t j) {
    for (std::size_t r = 0; r < table.rows(); ++r) {
      table.set(r, j, std::clamp(models.models[j]->predict(features, r), 0.0, 1.0));
    }
  });
  return table;
}

}  // namespace entailnet

#pragma once

// Ranking metrics: per-label average precision over test instances and the
// mean across labels, plus before/after reports.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "entailnet/dataset.hpp"
#include "entailnet/predictions.hpp"
#include "json.hpp"

namespace entailnet {

/// Instances of one label sorted by descending score; equal scores keep
/// instance-index order.
struct LabelRanking {
  std::string label;
  std::vector<std::size_t> order;   // instance indices, best first
  std::vector<std::uint8_t> relevant;  // relevance of order[k]
};

LabelRanking rank_label(std::string label, std::span<const double> scores, std::span<const std::uint8_t> truth);

/// Non-interpolated AP: mean over relevant instances of precision at their
/// rank. nullopt when no instance is relevant.
std::optional<double> average_precision(const LabelRanking& ranking);
std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> truth);

/// Unweighted mean AP over evaluable labels. Throws DataError if none is.
double map_score(std::span<const LabelRanking> rankings);

struct MeanStd {
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation; 0 for a single value
  bool operator==(const MeanStd&) const = default;
};

MeanStd mean_std(std::span<const double> values);

struct LabelAp {
  std::string label;
  std::optional<double> before;
  std::optional<double> after;
  bool operator==(const LabelAp&) const = default;
};

struct FoldEvaluation {
  std::size_t fold = 0;
  double map_before = 0.0;
  double map_after = 0.0;
  std::vector<LabelAp> per_label;
  std::size_t positive_entailments = 0;
  std::size_t exclusions = 0;
  std::size_t minsup_entail = 0;
  std::size_t minsup_excl = 0;
  bool operator==(const FoldEvaluation&) const = default;
};

struct EvaluationReport {
  std::vector<FoldEvaluation> folds;
  MeanStd map_before;
  MeanStd map_after;
  /// 100 * (after - before) / before on the fold-mean MAPs.
  double improvement_pct = 0.0;
  /// Mean AP over the folds where the label was evaluable.
  std::vector<LabelAp> per_label;
  MeanStd positive_entailments;
  MeanStd exclusions;
  bool operator==(const EvaluationReport&) const = default;
};

/// Scores the labels of `truth` (rows aligned with the tables) before and
/// after. Both tables need identical instance ids and every truth label.
/// Throws DataError on a coverage mismatch.
FoldEvaluation evaluate_fold(const PredictionTable& before, const PredictionTable& after, const LabelMatrix& truth,
                             std::size_t fold = 0);

/// Single-fold report.
EvaluationReport compare(const PredictionTable& before, const PredictionTable& after, const LabelMatrix& truth);

EvaluationReport aggregate(std::vector<FoldEvaluation> folds);

nlohmann::json to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const nlohmann::json& j);

/// Aligned plain-text summary.
std::string format_report_text(const EvaluationReport& report);

}  // namespace entailnet

#pragma once

// Cross-validated experiment: per fold, discover relationships on the
// training rows, add leak columns, obtain marginals for the test rows,
// correct them through the network, and score before/after.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "entailnet/dataset.hpp"
#include "entailnet/discovery.hpp"
#include "entailnet/evaluation.hpp"
#include "entailnet/inference.hpp"
#include "entailnet/network.hpp"
#include "entailnet/predictions.hpp"

namespace entailnet {

enum class ExploitMode { None, Entail, Excl, Both };

ExploitMode parse_exploit(std::string_view text);
std::string_view to_string(ExploitMode mode);

struct PipelineConfig {
  /// "prior", "nb", or "external:<path>" (a predictions file covering every
  /// dataset row, ids being 0-based row indices).
  std::string learner = "nb";
  std::size_t minsup_entail = 2;
  std::size_t minsup_excl = 2;
  ExploitMode exploit = ExploitMode::Both;
  std::size_t folds = 10;
  std::uint64_t seed = 1;
  bool escalate = false;
  std::size_t escalate_cap = 50;
  std::chrono::milliseconds escalate_time{60'000};
  double clamp_epsilon = kDefaultClampEpsilon;
  std::size_t threads = 0;  // 0 = all cores
};

/// Sets one key of the flat config format; throws UsageError for unknown
/// keys or bad values.
void apply_config_entry(PipelineConfig& config, std::string_view key, std::string_view value);

/// "key = value" lines; '#' starts a comment. Keys override `base`.
PipelineConfig parse_config(std::istream& in, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

/// Keeps only the relationship kinds the mode exploits. Equivalences travel
/// with entailments.
RelationshipSet filter_relationships(const RelationshipSet& relationships, ExploitMode mode);

struct NetworkSummary {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t leaks = 0;
  std::size_t constraints = 0;
  std::size_t aliases = 0;

  static NetworkSummary of(const LabelNetwork& network);
  bool operator==(const NetworkSummary&) const = default;
};

/// 0-based row indices as text.
std::vector<std::string> row_ids(std::span<const std::size_t> rows);

/// Every cell clamped to [eps, 1 - eps].
PredictionTable clamp_table(const PredictionTable& raw, double clamp_epsilon);

/// Posterior table with the same rows and columns as `raw`. Every row is
/// checked against the network's consistency rules (InvariantError on
/// failure). A network without edges or aliases returns clamp_table(raw).
PredictionTable correct_table(const LabelNetwork& network, const PredictionTable& raw, double clamp_epsilon,
                              std::size_t threads = 1);

struct FoldResult {
  std::size_t fold = 0;
  RelationshipSet relationships;  // as discovered on the training rows
  LabelNetwork network;           // built from the exploited subset
  NetworkSummary summary;
  PredictionTable raw;
  PredictionTable corrected;
  FoldEvaluation evaluation;
  std::vector<std::string> warnings;
};

struct CvResult {
  std::vector<FoldResult> folds;
  EvaluationReport report;
};

/// Parsed "external:<path>" file, or nullopt for built-in learners.
std::optional<PredictionTable> load_external_predictions(const PipelineConfig& config);

/// One train/test evaluation. `external` supplies predictions by row id when
/// the config names an external learner.
FoldResult run_split(const MultiLabelDataset& dataset, std::span<const std::size_t> train_rows,
                     std::span<const std::size_t> test_rows, const PipelineConfig& config, std::size_t fold_index = 0,
                     const PredictionTable* external = nullptr);

FoldResult run_fold(const MultiLabelDataset& dataset, const FoldSplit& split, std::size_t fold_index,
                    const PipelineConfig& config);

/// `external`, when given, replaces loading the file named by the config.
CvResult run_cv(const MultiLabelDataset& dataset, const PipelineConfig& config,
                const PredictionTable* external = nullptr);

}  // namespace entailnet

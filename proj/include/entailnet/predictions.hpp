#pragma once

// Wide prediction tables: one row per instance, one probability column per
// network node. On disk: CSV with header "instance_id,<node>,...".

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "entailnet/network.hpp"

namespace entailnet {

class PredictionTable {
 public:
  PredictionTable() = default;
  /// Zero-filled. Throws DataError on duplicate ids or columns.
  PredictionTable(std::vector<std::string> instance_ids, std::vector<std::string> columns);

  std::size_t rows() const { return ids_.size(); }
  std::size_t cols() const { return columns_.size(); }
  const std::vector<std::string>& instance_ids() const { return ids_; }
  const std::vector<std::string>& columns() const { return columns_; }

  std::optional<std::size_t> find_column(std::string_view name) const;
  std::optional<std::size_t> find_row(std::string_view id) const;

  double at(std::size_t row, std::size_t col) const { return values_[row * columns_.size() + col]; }
  void set(std::size_t row, std::size_t col, double v) { values_[row * columns_.size() + col] = v; }
  std::span<const double> row(std::size_t r) const {
    return std::span(values_).subspan(r * columns_.size(), columns_.size());
  }
  std::vector<double> column(std::size_t col) const;

  /// Rows in the given id order; throws DataError for an id not present.
  PredictionTable select_rows(std::span<const std::string> ids) const;

  bool operator==(const PredictionTable&) const = default;

 private:
  std::vector<std::string> ids_;
  std::vector<std::string> columns_;
  std::vector<double> values_;
};

/// Throws DataError with line/column for malformed cells or values outside [0, 1].
PredictionTable read_predictions(std::istream& in);
PredictionTable load_predictions(const std::filesystem::path& path);
void write_predictions(std::ostream& out, const PredictionTable& table);

struct IngestOptions {
  /// When set, every instance id in the file must be one of these.
  std::optional<std::vector<std::string>> known_ids;
  /// Training frequency of each leak label, used when its column is absent.
  std::map<std::string, double> leak_frequencies;
};

struct IngestResult {
  PredictionTable table;
  std::vector<std::string> warnings;
};

/// Completes an externally produced table against a network. Real-label
/// columns (aliases included) are required; missing leak columns are imputed from
/// leak_frequencies with a warning; columns matching no node or alias are
/// dropped with a warning. Output columns: evidence nodes in network order,
/// then aliases.
IngestResult ingest_external_predictions(const PredictionTable& file, const LabelNetwork& network,
                                         const IngestOptions& options);
IngestResult ingest_external_predictions(const std::filesystem::path& path, const LabelNetwork& network,
                                         const IngestOptions& options);

}  // namespace entailnet

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace entailnet {

/// Packed column of booleans, bit i of word i/64 is row i. Bits past the
/// last row are always zero.
using BitColumn = std::vector<std::uint64_t>;

constexpr std::size_t words_for(std::size_t rows) { return (rows + 63) / 64; }

/// Instances x labels boolean matrix stored column-major as bitsets.
class LabelMatrix {
 public:
  LabelMatrix() = default;

  /// All cells false. Throws DataError on empty or duplicate names.
  LabelMatrix(std::vector<std::string> names, std::size_t n_instances);

  /// rows[i][j] is instance i, label j; every row must have names.size() cells.
  static LabelMatrix from_rows(std::vector<std::string> names,
                               const std::vector<std::vector<int>>& rows);

  std::size_t n_instances() const { return n_instances_; }
  std::size_t n_labels() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws DataError for an unknown label.
  std::size_t index_of(std::string_view name) const;

  bool get(std::size_t row, std::size_t label) const {
    return (columns_[label][row / 64] >> (row % 64)) & 1U;
  }
  void set(std::size_t row, std::size_t label, bool value);

  std::span<const std::uint64_t> column(std::size_t label) const { return columns_[label]; }
  std::size_t positives(std::size_t label) const;

  LabelMatrix select_rows(std::span<const std::size_t> rows) const;

  /// Appends a label column; bits must be sized for n_instances().
  void append_column(std::string name, BitColumn bits);

  bool operator==(const LabelMatrix&) const = default;

 private:
  std::vector<std::string> names_;
  std::size_t n_instances_ = 0;
  std::vector<BitColumn> columns_;
};

enum class FeatureKind { Numeric, Nominal };

/// One feature column. Exactly one of numeric / nominal is populated
/// (matching kind); nullopt cells are missing values.
struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<std::optional<double>> numeric;
  std::vector<std::optional<std::string>> nominal;

  std::size_t size() const { return kind == FeatureKind::Numeric ? numeric.size() : nominal.size(); }
  bool missing(std::size_t row) const {
    return kind == FeatureKind::Numeric ? !numeric[row].has_value() : !nominal[row].has_value();
  }
  bool operator==(const FeatureColumn&) const = default;
};

class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t n_instances, std::vector<FeatureColumn> columns);

  std::size_t n_instances() const { return n_instances_; }
  std::size_t n_features() const { return columns_.size(); }
  const std::vector<FeatureColumn>& columns() const { return columns_; }
  const FeatureColumn& column(std::size_t i) const { return columns_[i]; }

  FeatureMatrix select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::size_t n_instances_ = 0;
  std::vector<FeatureColumn> columns_;
};

struct MultiLabelDataset {
  std::string name;
  FeatureMatrix features;
  LabelMatrix labels;

  std::size_t n_instances() const { return labels.n_instances(); }
  MultiLabelDataset select_rows(std::span<const std::size_t> rows) const;
};

/// Per-instance fold index in [0, fold_count).
struct FoldSplit {
  std::size_t fold_count = 0;
  std::vector<std::size_t> assignment;

  std::vector<std::size_t> train_rows(std::size_t fold) const;
  std::vector<std::size_t> test_rows(std::size_t fold) const;
};

/// CSV with a header row. Columns named in label_names become labels (kept in
/// header order) and must hold only 0/1; the rest are features, numeric when
/// every present cell parses as a number, nominal otherwise. "?" marks a
/// missing feature value.
MultiLabelDataset read_csv(std::istream& in, const std::set<std::string>& label_names,
                           std::string name = "dataset");
MultiLabelDataset load_csv(const std::filesystem::path& path,
                           const std::set<std::string>& label_names);

/// Writes features first, then labels, so reading back with the same label
/// names reproduces both matrices.
void write_csv(std::ostream& out, const MultiLabelDataset& dataset);

/// Mulan-style pair: an ARFF file plus an XML file listing label attributes.
MultiLabelDataset read_mulan(std::istream& arff, std::istream& xml, std::string name = "dataset");
MultiLabelDataset load_mulan(const std::filesystem::path& arff_path,
                             const std::filesystem::path& xml_path);

/// Uniform random assignment with fold sizes differing by at most one.
/// Depends only on (n_instances, fold_count, seed).
FoldSplit split_folds(const MultiLabelDataset& dataset, std::size_t fold_count, std::uint64_t seed);
FoldSplit split_folds(std::size_t n_instances, std::size_t fold_count, std::uint64_t seed);

}  // namespace entailnet

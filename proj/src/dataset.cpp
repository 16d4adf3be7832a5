#include "entailnet/dataset.hpp"

#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "entailnet/csv.hpp"
#include "entailnet/error.hpp"
#include "entailnet/kernels.hpp"

namespace entailnet {

namespace {

void validate_names(const std::vector<std::string>& names, const char* what) {
  std::set<std::string_view> seen;
  for (const auto& n : names) {
    if (n.empty()) throw DataError(std::string(what) + " name must be non-empty");
    if (!seen.insert(n).second) throw DataError(std::string("duplicate ") + what + " name '" + n + "'");
  }
}

}  // namespace

LabelMatrix::LabelMatrix(std::vector<std::string> names, std::size_t n_instances)
    : names_(std::move(names)), n_instances_(n_instances) {
  validate_names(names_, "label");
  columns_.assign(names_.size(), BitColumn(words_for(n_instances_), 0));
}

LabelMatrix LabelMatrix::from_rows(std::vector<std::string> names,
                                   const std::vector<std::vector<int>>& rows) {
  LabelMatrix m(std::move(names), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.n_labels()) {
      throw DataError("row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                      " cells, expected " + std::to_string(m.n_labels()));
    }
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      if (rows[i][j] != 0 && rows[i][j] != 1) {
        throw DataError("row " + std::to_string(i) + ", label '" + m.names_[j] + "': value is not 0/1");
      }
      m.set(i, j, rows[i][j] == 1);
    }
  }
  return m;
}

std::optional<std::size_t> LabelMatrix::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t LabelMatrix::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw DataError("unknown label '" + std::string(name) + "'");
}

void LabelMatrix::set(std::size_t row, std::size_t label, bool value) {
  const std::uint64_t mask = std::uint64_t{1} << (row % 64);
  auto& word = columns_[label][row / 64];
  word = value ? (word | mask) : (word & ~mask);
}

std::size_t LabelMatrix::positives(std::size_t label) const {
  return static_cast<std::size_t>(kernels::popcount(columns_[label]));
}

LabelMatrix LabelMatrix::select_rows(std::span<const std::size_t> rows) const {
  LabelMatrix out(names_, rows.size());
  for (std::size_t j = 0; j < names_.size(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (get(rows[i], j)) out.set(i, j, true);
    }
  }
  return out;
}

void LabelMatrix::append_column(std::string name, BitColumn bits) {
  if (name.empty()) throw DataError("label name must be non-empty");
  if (find(name)) throw DataError("duplicate label name '" + name + "'");
  if (bits.size() != words_for(n_instances_)) {
    throw DataError("column '" + name + "' has the wrong number of rows");
  }
  if (n_instances_ % 64 != 0 && !bits.empty()) {
    bits.back() &= (std::uint64_t{1} << (n_instances_ % 64)) - 1;
  }
  names_.push_back(std::move(name));
  columns_.push_back(std::move(bits));
}

FeatureMatrix::FeatureMatrix(std::size_t n_instances, std::vector<FeatureColumn> columns)
    : n_instances_(n_instances), columns_(std::move(columns)) {
  std::vector<std::string> names;
  for (const auto& c : columns_) {
    if (c.size() != n_instances_) {
      throw DataError("feature '" + c.name + "' has " + std::to_string(c.size()) + " rows, expected " +
                      std::to_string(n_instances_));
    }
    names.push_back(c.name);
  }
  validate_names(names, "feature");
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
  std::vector<FeatureColumn> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) {
    FeatureColumn sub{c.name, c.kind, {}, {}};
    if (c.kind == FeatureKind::Numeric) {
      sub.numeric.reserve(rows.size());
      for (auto r : rows) sub.numeric.push_back(c.numeric[r]);
    } else {
      sub.nominal.reserve(rows.size());
      for (auto r : rows) sub.nominal.push_back(c.nominal[r]);
    }
    out.push_back(std::move(sub));
  }
  return FeatureMatrix(rows.size(), std::move(out));
}

MultiLabelDataset MultiLabelDataset::select_rows(std::span<const std::size_t> rows) const {
  return MultiLabelDataset{name, features.select_rows(rows), labels.select_rows(rows)};
}

std::vector<std::size_t> FoldSplit::train_rows(std::size_t fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] != fold) rows.push_back(i);
  }
  return rows;
}

std::vector<std::size_t> FoldSplit::test_rows(std::size_t fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == fold) rows.push_back(i);
  }
  return rows;
}

MultiLabelDataset read_csv(std::istream& in, const std::set<std::string>& label_names, std::string name) {
  if (label_names.empty()) throw DataError("no labels declared");
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw DataError("missing header row");
  for (const auto& l : label_names) {
    bool present = false;
    for (const auto& h : *header) present = present || h == l;
    if (!present) throw DataError("missing label column '" + l + "'");
  }

  const std::size_t width = header->size();
  std::vector<bool> is_label(width);
  for (std::size_t c = 0; c < width; ++c) is_label[c] = label_names.contains((*header)[c]);

  std::vector<std::vector<int>> label_rows;
  std::vector<std::vector<std::string>> feature_cells(width);
  while (auto record = reader.next()) {
    const std::size_t row = label_rows.size() + 1;
    if (record->size() != width) {
      throw DataError("line " + std::to_string(reader.line()) + " (row " + std::to_string(row) + "): " +
                      std::to_string(record->size()) + " fields, header has " + std::to_string(width));
    }
    std::vector<int> labels;
    for (std::size_t c = 0; c < width; ++c) {
      const std::string& cell = (*record)[c];
      if (is_label[c]) {
        if (cell != "0" && cell != "1") {
          throw DataError("line " + std::to_string(reader.line()) + " (row " + std::to_string(row) +
                          "), column '" + (*header)[c] + "': label value '" + cell + "' is not 0/1");
        }
        labels.push_back(cell == "1" ? 1 : 0);
      } else {
        feature_cells[c].push_back(cell);
      }
    }
    label_rows.push_back(std::move(labels));
  }

  std::vector<std::string> ordered_labels;
  std::vector<FeatureColumn> features;
  for (std::size_t c = 0; c < width; ++c) {
    if (is_label[c]) {
      ordered_labels.push_back((*header)[c]);
      continue;
    }
    FeatureColumn col{(*header)[c], FeatureKind::Numeric, {}, {}};
    bool numeric = true;
    for (const auto& cell : feature_cells[c]) {
      if (cell != "?" && !csv::parse_double(cell)) {
        numeric = false;
        break;
      }
    }
    if (numeric) {
      for (const auto& cell : feature_cells[c]) {
        col.numeric.push_back(cell == "?" ? std::nullopt : csv::parse_double(cell));
      }
    } else {
      col.kind = FeatureKind::Nominal;
      for (const auto& cell : feature_cells[c]) {
        col.nominal.push_back(cell == "?" ? std::nullopt : std::optional<std::string>(cell));
      }
    }
    features.push_back(std::move(col));
  }

  const std::size_t n = label_rows.size();
  return MultiLabelDataset{std::move(name), FeatureMatrix(n, std::move(features)),
                           LabelMatrix::from_rows(std::move(ordered_labels), label_rows)};
}

MultiLabelDataset load_csv(const std::filesystem::path& path, const std::set<std::string>& label_names) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_csv(in, label_names, path.stem().string());
}

void write_csv(std::ostream& out, const MultiLabelDataset& dataset) {
  std::vector<std::string> header;
  for (const auto& c : dataset.features.columns()) header.push_back(c.name);
  for (const auto& l : dataset.labels.names()) header.push_back(l);
  csv::write_record(out, header);
  for (std::size_t i = 0; i < dataset.n_instances(); ++i) {
    std::vector<std::string> row;
    for (const auto& c : dataset.features.columns()) {
      if (c.missing(i)) {
        row.emplace_back("?");
      } else if (c.kind == FeatureKind::Numeric) {
        row.push_back(csv::format_double(*c.numeric[i]));
      } else {
        row.push_back(*c.nominal[i]);
      }
    }
    for (std::size_t j = 0; j < dataset.labels.n_labels(); ++j) {
      row.emplace_back(dataset.labels.get(i, j) ? "1" : "0");
    }
    csv::write_record(out, row);
  }
}

FoldSplit split_folds(const MultiLabelDataset& dataset, std::size_t fold_count, std::uint64_t seed) {
  return split_folds(dataset.n_instances(), fold_count, seed);
}

FoldSplit split_folds(std::size_t n_instances, std::size_t fold_count, std::uint64_t seed) {
  if (fold_count < 2) throw UsageError("fold count must be at least 2");
  if (fold_count > n_instances) {
    throw UsageError("fold count " + std::to_string(fold_count) + " exceeds instance count " +
                     std::to_string(n_instances));
  }
  // Fisher-Yates over mt19937_64 with rejection sampling: the engine's output
  // sequence is fixed by the standard, so the split is portable across
  // standard libraries (std::shuffle and the distributions are not).
  std::mt19937_64 rng(seed);
  auto bounded = [&rng](std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw;
    do {
      draw = rng();
    } while (draw >= limit);
    return draw % bound;
  };
  std::vector<std::size_t> order(n_instances);
  for (std::size_t i = 0; i < n_instances; ++i) order[i] = i;
  for (std::size_t i = n_instances; i > 1; --i) {
    std::swap(order[i - 1], order[bounded(i)]);
  }
  FoldSplit split{fold_count, std::vector<std::size_t>(n_instances)};
  for (std::size_t pos = 0; pos < n_instances; ++pos) split.assignment[order[pos]] = pos % fold_count;
  return split;
}

}  // namespace entailnet

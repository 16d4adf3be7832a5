#include "entailnet/predictions.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include "entailnet/csv.hpp"
#include "entailnet/error.hpp"

namespace entailnet {

namespace {

void check_unique(const std::vector<std::string>& v, const char* what) {
  std::set<std::string_view> seen;
  for (const auto& s : v) {
    if (!seen.insert(s).second) throw DataError(std::string("duplicate ") + what + " '" + s + "'");
  }
}

}  // namespace

PredictionTable::PredictionTable(std::vector<std::string> instance_ids, std::vector<std::string> columns)
    : ids_(std::move(instance_ids)), columns_(std::move(columns)), values_(ids_.size() * columns_.size(), 0.0) {
  check_unique(ids_, "instance id");
  check_unique(columns_, "column");
}

std::optional<std::size_t> PredictionTable::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i] == name) return i;
  return std::nullopt;
}

std::optional<std::size_t> PredictionTable::find_row(std::string_view id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (ids_[i] == id) return i;
  return std::nullopt;
}

std::vector<double> PredictionTable::column(std::size_t col) const {
  std::vector<double> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, col);
  return out;
}

PredictionTable PredictionTable::select_rows(std::span<const std::string> ids) const {
  std::unordered_map<std::string_view, std::size_t> pos;
  for (std::size_t i = 0; i < ids_.size(); ++i) pos.emplace(ids_[i], i);
  PredictionTable out(std::vector<std::string>(ids.begin(), ids.end()), columns_);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto it = pos.find(ids[r]);
    if (it == pos.end()) throw DataError("unknown instance id '" + ids[r] + "'");
    for (std::size_t c = 0; c < cols(); ++c) out.set(r, c, at(it->second, c));
  }
  return out;
}

PredictionTable read_predictions(std::istream& in) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw DataError("predictions: empty input, expected a header row");
  if (header->empty() || (*header)[0] != "instance_id") {
    throw DataError("predictions: first header column must be 'instance_id'");
  }
  std::vector<std::string> columns(header->begin() + 1, header->end());
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  while (auto record = reader.next()) {
    if (record->size() != header->size()) {
      throw DataError("predictions line " + std::to_string(reader.line()) + ": expected " +
                      std::to_string(header->size()) + " fields, found " + std::to_string(record->size()));
    }
    std::vector<double> row(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::string& cell = (*record)[c + 1];
      auto v = csv::parse_double(cell);
      if (!v || *v < 0.0 || *v > 1.0) {
        throw DataError("predictions line " + std::to_string(reader.line()) + ", column '" + columns[c] +
                        "': '" + cell + "' is not a probability in [0, 1]");
      }
      row[c] = *v;
    }
    ids.push_back((*record)[0]);
    rows.push_back(std::move(row));
  }
  PredictionTable table(std::move(ids), std::move(columns));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) table.set(r, c, rows[r][c]);
  return table;
}

PredictionTable load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions file " + path.string());
  return read_predictions(in);
}

void write_predictions(std::ostream& out, const PredictionTable& table) {
  std::vector<std::string> fields;
  fields.reserve(table.cols() + 1);
  fields.push_back("instance_id");
  for (const auto& c : table.columns()) fields.push_back(c);
  csv::write_record(out, fields);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    fields.clear();
    fields.push_back(table.instance_ids()[r]);
    for (std::size_t c = 0; c < table.cols(); ++c) fields.push_back(csv::format_double(table.at(r, c)));
    csv::write_record(out, fields);
  }
}

IngestResult ingest_external_predictions(const PredictionTable& file, const LabelNetwork& network,
                                         const IngestOptions& options) {
  IngestResult result;
  if (options.known_ids) {
    std::set<std::string_view> known(options.known_ids->begin(), options.known_ids->end());
    for (const auto& id : file.instance_ids()) {
      if (!known.contains(id)) throw DataError("predictions: unknown instance id '" + id + "'");
    }
  }

  std::vector<std::string> columns;
  std::vector<std::optional<std::size_t>> source;
  std::vector<double> fill;
  for (std::size_t idx : network.evidence_nodes()) {
    const NetworkNode& node = network.node(idx);
    auto col = file.find_column(node.name);
    columns.push_back(node.name);
    source.push_back(col);
    fill.push_back(0.0);
    if (col) continue;
    if (node.kind == NodeKind::Label) {
      throw DataError("predictions: missing column for label '" + node.name + "'");
    }
    auto freq = options.leak_frequencies.find(node.name);
    if (freq == options.leak_frequencies.end()) {
      throw DataError("predictions: missing column for leak '" + node.name + "' and no training frequency to impute");
    }
    fill.back() = freq->second;
    result.warnings.push_back("column '" + node.name + "' missing; imputed with training frequency " +
                              std::to_string(freq->second));
  }
  for (const auto& [alias, rep] : network.aliases()) {
    auto col = file.find_column(alias);
    if (!col) throw DataError("predictions: missing column for label '" + alias + "'");
    columns.push_back(alias);
    source.push_back(col);
    fill.push_back(0.0);
  }
  for (const auto& name : file.columns()) {
    if (!network.find(name) && !network.aliases().contains(name)) {
      result.warnings.push_back("column '" + name + "' matches no network node; ignored");
    }
  }

  result.table = PredictionTable(file.instance_ids(), std::move(columns));
  for (std::size_t r = 0; r < file.rows(); ++r) {
    for (std::size_t c = 0; c < source.size(); ++c) {
      result.table.set(r, c, source[c] ? file.at(r, *source[c]) : fill[c]);
    }
  }
  return result;
}

IngestResult ingest_external_predictions(const std::filesystem::path& path, const LabelNetwork& network,
                                         const IngestOptions& options) {
  return ingest_external_predictions(load_predictions(path), network, options);
}

}  // namespace entailnet

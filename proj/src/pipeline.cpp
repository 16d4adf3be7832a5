#include "entailnet/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>

#include "entailnet/csv.hpp"
#include "entailnet/error.hpp"
#include "entailnet/learner.hpp"
#include "entailnet/parallel.hpp"

namespace entailnet {

ExploitMode parse_exploit(std::string_view text) {
  if (text == "none") return ExploitMode::None;
  if (text == "entail") return ExploitMode::Entail;
  if (text == "excl") return ExploitMode::Excl;
  if (text == "both") return ExploitMode::Both;
  throw UsageError("unknown exploit mode '" + std::string(text) + "' (expected entail, excl, both or none)");
}

std::string_view to_string(ExploitMode mode) {
  switch (mode) {
    case ExploitMode::None: return "none";
    case ExploitMode::Entail: return "entail";
    case ExploitMode::Excl: return "excl";
    case ExploitMode::Both: return "both";
  }
  return "?";
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_unsigned(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw UsageError("config '" + std::string(key) + "': '" + std::string(value) + "' is not a non-negative integer");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw UsageError("config '" + std::string(key) + "': '" + std::string(value) + "' is not a boolean");
}

}  // namespace

void apply_config_entry(PipelineConfig& config, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "learner") {
    if (value != "prior" && value != "nb" && !value.starts_with("external:")) {
      throw UsageError("unknown learner '" + std::string(value) + "' (expected prior, nb or external:<path>)");
    }
    config.learner = std::string(value);
  } else if (key == "minsup_entail") {
    config.minsup_entail = parse_unsigned<std::size_t>(key, value);
  } else if (key == "minsup_excl") {
    config.minsup_excl = parse_unsigned<std::size_t>(key, value);
  } else if (key == "exploit") {
    config.exploit = parse_exploit(value);
  } else if (key == "folds") {
    config.folds = parse_unsigned<std::size_t>(key, value);
  } else if (key == "seed") {
    config.seed = parse_unsigned<std::uint64_t>(key, value);
  } else if (key == "escalate") {
    config.escalate = parse_bool(key, value);
  } else if (key == "escalate_cap") {
    config.escalate_cap = parse_unsigned<std::size_t>(key, value);
  } else if (key == "escalate_time") {
    auto secs = csv::parse_double(value);
    if (!secs || *secs <= 0) throw UsageError("config 'escalate_time' must be a positive number of seconds");
    config.escalate_time = std::chrono::milliseconds(static_cast<long long>(*secs * 1000.0));
  } else if (key == "clamp_epsilon") {
    auto eps = csv::parse_double(value);
    if (!eps || *eps < 0 || *eps >= 0.5) throw UsageError("config 'clamp_epsilon' must lie in [0, 0.5)");
    config.clamp_epsilon = *eps;
  } else if (key == "threads") {
    config.threads = parse_unsigned<std::size_t>(key, value);
  } else {
    throw UsageError("unknown config key '" + std::string(key) + "'");
  }
}

PipelineConfig parse_config(std::istream& in, PipelineConfig base) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_config_entry(base, trim(s.substr(0, eq)), s.substr(eq + 1));
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  return parse_config(in, std::move(base));
}

RelationshipSet filter_relationships(const RelationshipSet& relationships, ExploitMode mode) {
  RelationshipSet out = relationships;
  if (mode == ExploitMode::None || mode == ExploitMode::Excl) {
    out.positive_entailments.clear();
    out.equivalences.clear();
  }
  if (mode == ExploitMode::None || mode == ExploitMode::Entail) out.exclusions.clear();
  return out;
}

NetworkSummary NetworkSummary::of(const LabelNetwork& network) {
  return {network.size(), network.edges().size(), network.leak_nodes().size(), network.constraint_count(),
          network.aliases().size()};
}

std::vector<std::string> row_ids(std::span<const std::size_t> rows) {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (auto r : rows) ids.push_back(std::to_string(r));
  return ids;
}

PredictionTable clamp_table(const PredictionTable& raw, double clamp_epsilon) {
  PredictionTable out = raw;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out.set(r, c, clamp_evidence(raw.at(r, c), clamp_epsilon).if_true);
  return out;
}

PredictionTable correct_table(const LabelNetwork& network, const PredictionTable& raw, double clamp_epsilon,
                              std::size_t threads) {
  if (network.edges().empty() && network.aliases().empty()) return clamp_table(raw, clamp_epsilon);

  // column -> node whose posterior fills it
  std::vector<std::size_t> target(raw.cols());
  for (std::size_t c = 0; c < raw.cols(); ++c) {
    const std::string& name = raw.columns()[c];
    if (auto idx = network.find(name)) {
      target[c] = *idx;
    } else if (auto al = network.aliases().find(name); al != network.aliases().end()) {
      target[c] = network.index_of(al->second);
    } else {
      throw DataError("column '" + name + "' matches no network node");
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> evidence_cols;  // (node, column)
  for (std::size_t idx : network.evidence_nodes()) {
    auto col = raw.find_column(network.node(idx).name);
    if (!col) throw DataError("missing column for network node '" + network.node(idx).name + "'");
    evidence_cols.emplace_back(idx, *col);
  }

  const InferenceEngine engine(network);
  PredictionTable out = raw;
  parallel_for(raw.rows(), threads, [&](std::size_t r) {
    EvidenceModel ev;
    ev.weights.assign(network.size(), VirtualEvidence{});
    for (auto [idx, col] : evidence_cols) {
      try {
        ev.weights[idx] = clamp_evidence(raw.at(r, col), clamp_epsilon);
      } catch (const DataError& e) {
        throw DataError("instance '" + raw.instance_ids()[r] + "', column '" + raw.columns()[col] + "': " + e.what());
      }
    }
    const std::vector<double> post = engine.posteriors(ev);
    if (auto problems = check_consistency(network, post); !problems.empty()) {
      throw InvariantError("instance '" + raw.instance_ids()[r] + "': " + problems.front());
    }
    for (std::size_t c = 0; c < raw.cols(); ++c) out.set(r, c, post[target[c]]);
  });
  return out;
}

std::optional<PredictionTable> load_external_predictions(const PipelineConfig& config) {
  constexpr std::string_view prefix = "external:";
  if (!std::string_view(config.learner).starts_with(prefix)) return std::nullopt;
  return load_predictions(std::filesystem::path(config.learner.substr(prefix.size())));
}

FoldResult run_split(const MultiLabelDataset& dataset, std::span<const std::size_t> train_rows,
                     std::span<const std::size_t> test_rows, const PipelineConfig& config, std::size_t fold_index,
                     const PredictionTable* external) {
  FoldResult result;
  result.fold = fold_index;
  const MultiLabelDataset train = dataset.select_rows(train_rows);
  const MultiLabelDataset test = dataset.select_rows(test_rows);

  DiscoveryOptions opts;
  opts.minsup_entail = config.minsup_entail;
  opts.minsup_excl = config.minsup_excl;
  opts.escalate = config.escalate;
  opts.escalate_cap = config.escalate_cap;
  opts.escalate_time = config.escalate_time;
  opts.threads = config.threads;
  result.relationships = discover(train.labels, opts);
  result.network = build_network(filter_relationships(result.relationships, config.exploit), train.labels.names());
  result.summary = NetworkSummary::of(result.network);

  const LabelMatrix train_targets = generate_leak_labels(train.labels, result.network);
  std::vector<std::string> test_ids = row_ids(test_rows);
  if (external) {
    IngestOptions ingest;
    for (std::size_t j = train.labels.n_labels(); j < train_targets.n_labels(); ++j) {
      const double n = static_cast<double>(train_targets.n_instances());
      ingest.leak_frequencies[train_targets.names()[j]] = n > 0 ? static_cast<double>(train_targets.positives(j)) / n : 0.0;
    }
    auto ingested = ingest_external_predictions(*external, result.network, ingest);
    result.warnings = std::move(ingested.warnings);
    result.raw = ingested.table.select_rows(test_ids);
  } else {
    auto learner = make_learner(config.learner);
    const ModelBundle models = train_binary_relevance(*learner, train.features, train_targets, config.threads);
    result.raw = predict_marginals(models, test.features, std::move(test_ids), config.threads);
  }

  result.corrected = config.exploit == ExploitMode::None
                         ? clamp_table(result.raw, config.clamp_epsilon)
                         : correct_table(result.network, result.raw, config.clamp_epsilon, config.threads);

  result.evaluation = evaluate_fold(clamp_table(result.raw, config.clamp_epsilon), result.corrected, test.labels,
                                    fold_index);
  const bool entail = config.exploit == ExploitMode::Entail || config.exploit == ExploitMode::Both;
  const bool excl = config.exploit == ExploitMode::Excl || config.exploit == ExploitMode::Both;
  result.evaluation.positive_entailments = entail ? result.relationships.positive_entailments.size() : 0;
  result.evaluation.exclusions = excl ? result.relationships.exclusions.size() : 0;
  result.evaluation.minsup_entail = result.relationships.minsup_entail;
  result.evaluation.minsup_excl = result.relationships.minsup_excl;
  return result;
}

FoldResult run_fold(const MultiLabelDataset& dataset, const FoldSplit& split, std::size_t fold_index,
                    const PipelineConfig& config) {
  if (fold_index >= split.fold_count) throw UsageError("fold index out of range");
  auto external = load_external_predictions(config);
  const auto train = split.train_rows(fold_index);
  const auto test = split.test_rows(fold_index);
  return run_split(dataset, train, test, config, fold_index, external ? &*external : nullptr);
}

CvResult run_cv(const MultiLabelDataset& dataset, const PipelineConfig& config, const PredictionTable* external) {
  const FoldSplit split = split_folds(dataset, config.folds, config.seed);
  std::optional<PredictionTable> loaded;
  if (!external) {
    loaded = load_external_predictions(config);
    if (loaded) external = &*loaded;
  }
  CvResult cv;
  std::vector<FoldEvaluation> evals;
  for (std::size_t k = 0; k < split.fold_count; ++k) {
    const auto train = split.train_rows(k);
    const auto test = split.test_rows(k);
    cv.folds.push_back(run_split(dataset, train, test, config, k, external));
    evals.push_back(cv.folds.back().evaluation);
  }
  cv.report = aggregate(std::move(evals));
  return cv;
}

}  // namespace entailnet

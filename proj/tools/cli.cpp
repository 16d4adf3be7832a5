#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "entailnet/csv.hpp"
#include "entailnet/discovery.hpp"
#include "entailnet/error.hpp"
#include "entailnet/evaluation.hpp"
#include "entailnet/network.hpp"
#include "entailnet/parallel.hpp"
#include "entailnet/pipeline.hpp"
#include "entailnet/predictions.hpp"
#include "json.hpp"

namespace entailnet::cli {

namespace {

namespace fs = std::filesystem;

struct DatasetArgs {
  std::string data;
  std::string labels;
  std::string arff;
  std::string xml;

  bool given() const { return !data.empty() || !arff.empty(); }
};

void add_dataset_options(CLI::App* app, DatasetArgs& d) {
  app->add_option("--data", d.data, "CSV dataset with a header row ('-' for stdin)");
  app->add_option("--labels", d.labels, "comma-separated label columns of the CSV dataset");
  app->add_option("--arff", d.arff, "ARFF dataset (with --xml)");
  app->add_option("--xml", d.xml, "XML label list for the ARFF dataset");
}

std::set<std::string> split_labels(const std::string& text) {
  std::set<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto b = item.find_first_not_of(" \t");
    auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.insert(item.substr(b, e - b + 1));
  }
  return out;
}

MultiLabelDataset load_dataset(const DatasetArgs& d, std::istream& in) {
  if (!d.data.empty() && !d.arff.empty()) throw UsageError("give either --data or --arff, not both");
  if (!d.data.empty()) {
    if (d.labels.empty()) throw UsageError("--data needs --labels");
    const auto names = split_labels(d.labels);
    if (d.data == "-") return read_csv(in, names, "stdin");
    if (!fs::exists(d.data)) throw DataError("cannot open dataset " + d.data);
    return load_csv(d.data, names);
  }
  if (!d.arff.empty()) {
    if (d.xml.empty()) throw UsageError("--arff needs --xml");
    if (!fs::exists(d.arff)) throw DataError("cannot open dataset " + d.arff);
    if (!fs::exists(d.xml)) throw DataError("cannot open label file " + d.xml);
    return load_mulan(d.arff, d.xml);
  }
  throw UsageError("a dataset is required (--data with --labels, or --arff with --xml)");
}

nlohmann::json read_json(const std::string& path, std::istream& in, const char* what) {
  try {
    if (path == "-") return nlohmann::json::parse(in);
    std::ifstream f(path);
    if (!f) throw DataError(std::string("cannot open ") + what + " " + path);
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("malformed ") + what + " JSON: " + e.what());
  }
}

// Writes through a temporary buffer so a failing command leaves no partial file.
void emit(const std::string& path, std::ostream& out, const std::string& text) {
  if (path.empty() || path == "-") {
    out << text;
    out.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  f << text;
  if (!f) throw DataError("write failed for " + path);
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::size_t threads_of(std::size_t requested) { return resolve_threads(requested); }

std::string relationships_text(const RelationshipSet& r) {
  std::ostringstream o;
  o << "minsup_entail " << r.minsup_entail << "\nminsup_excl " << r.minsup_excl << '\n';
  for (const auto& e : r.positive_entailments)
    o << "entail " << e.antecedent << " -> " << e.consequent << " (support " << e.support << ")\n";
  for (const auto& x : r.exclusions) {
    o << "exclusion {";
    for (std::size_t i = 0; i < x.labels.size(); ++i) o << (i ? "," : "") << x.labels[i];
    o << "} (support " << x.support << ")\n";
  }
  for (const auto& p : r.equivalences)
    o << "equivalent " << p.first << " <-> " << p.second << " (support " << p.support << ")\n";
  for (const auto& p : r.coexhaustions)
    o << "coexhaustive " << p.first << " | " << p.second << " (support " << p.support << ")\n";
  return o.str();
}

std::map<std::string, double> leak_frequencies(const MultiLabelDataset& data, const LabelNetwork& net) {
  const LabelMatrix all = generate_leak_labels(data.labels, net);
  std::map<std::string, double> out;
  const double n = static_cast<double>(all.n_instances());
  for (std::size_t j = data.labels.n_labels(); j < all.n_labels(); ++j) {
    out[all.names()[j]] = n > 0 ? static_cast<double>(all.positives(j)) / n : 0.0;
  }
  return out;
}

PredictionTable read_table(const std::string& path, std::istream& in) {
  if (path == "-") return read_predictions(in);
  if (!fs::exists(path)) throw DataError("cannot open predictions file " + path);
  return load_predictions(path);
}

LabelMatrix truth_for(const MultiLabelDataset& data, const PredictionTable& table) {
  std::vector<std::size_t> rows;
  for (const auto& id : table.instance_ids()) {
    std::size_t r = 0;
    auto [p, ec] = std::from_chars(id.data(), id.data() + id.size(), r);
    if (ec != std::errc{} || p != id.data() + id.size() || r >= data.n_instances()) {
      throw DataError("instance id '" + id + "' is not a row index of the dataset");
    }
    rows.push_back(r);
  }
  return data.labels.select_rows(rows);
}

std::string write_table(const PredictionTable& t) {
  std::ostringstream o;
  write_predictions(o, t);
  return o.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discover label relationships and correct multi-label probability estimates", "entailnet"};
  app.require_subcommand(1);

  // discover
  DatasetArgs d_data;
  std::size_t minsup_entail = 2, minsup_excl = 2, escalate_cap = 50, threads = 0;
  double escalate_time = 60.0;
  bool escalate = false;
  std::string output = "-", format = "json";
  auto* discover_cmd = app.add_subcommand("discover", "discover relationships in a label matrix");
  add_dataset_options(discover_cmd, d_data);
  discover_cmd->add_option("--minsup-entail", minsup_entail, "minimum support of positive entailments");
  discover_cmd->add_option("--minsup-excl", minsup_excl, "minimum support of exclusions");
  discover_cmd->add_flag("--escalate", escalate, "double exclusion support until mining fits the caps");
  discover_cmd->add_option("--escalate-cap", escalate_cap, "largest acceptable number of exclusion sets");
  discover_cmd->add_option("--escalate-time", escalate_time, "seconds allowed per mining attempt");
  discover_cmd->add_option("--threads", threads, "worker threads (0 = all cores)");
  discover_cmd->add_option("--output", output, "output file ('-' for stdout)");
  discover_cmd->add_option("--format", format, "json or text")->check(CLI::IsMember({"json", "text"}));

  // build-net
  std::string rel_path, exploit = "both";
  auto* build = app.add_subcommand("build-net", "build the label network from relationships");
  build->add_option("--relationships", rel_path, "relationships JSON ('-' for stdin)")->required();
  build->add_option("--exploit", exploit, "relationship kinds to encode")
      ->check(CLI::IsMember({"entail", "excl", "both", "none"}));
  build->add_option("--output", output, "output file ('-' for stdout)");

  // leaks
  DatasetArgs l_data;
  std::string net_path;
  auto* leaks = app.add_subcommand("leaks", "append leak label columns to a dataset");
  add_dataset_options(leaks, l_data);
  auto* leak_rel = leaks->add_option("--relationships", rel_path, "relationships JSON");
  auto* leak_net = leaks->add_option("--network", net_path, "network JSON");
  leak_rel->excludes(leak_net);
  leaks->add_option("--output", output, "output CSV ('-' for stdout)");

  // correct
  DatasetArgs c_data;
  std::string pred_path;
  double clamp_epsilon = kDefaultClampEpsilon;
  auto* correct = app.add_subcommand("correct", "correct predicted marginals through a network");
  correct->add_option("--network", net_path, "network JSON ('-' for stdin)")->required();
  correct->add_option("--predictions", pred_path, "predictions CSV ('-' for stdin)")->required();
  correct->add_option("--output", output, "output CSV ('-' for stdout)");
  correct->add_option("--clamp-epsilon", clamp_epsilon, "evidence clamp epsilon");
  correct->add_option("--threads", threads, "worker threads (0 = all cores)");
  add_dataset_options(correct, c_data);  // optional: leak frequencies for imputation

  // evaluate
  DatasetArgs e_data;
  std::string before_path, after_path;
  auto* evaluate = app.add_subcommand("evaluate", "score predictions before and after correction");
  add_dataset_options(evaluate, e_data);
  evaluate->add_option("--before", before_path, "uncorrected predictions CSV")->required();
  evaluate->add_option("--after", after_path, "corrected predictions CSV")->required();
  evaluate->add_option("--output", output, "report file ('-' for stdout)");
  evaluate->add_option("--format", format, "json or text")->check(CLI::IsMember({"json", "text"}));

  // pipeline
  DatasetArgs p_data;
  std::string config_path, output_dir, learner;
  std::string p_format = "text";
  std::size_t folds = 10;
  std::uint64_t seed = 1;
  auto* pipeline = app.add_subcommand("pipeline", "cross-validated before/after experiment");
  add_dataset_options(pipeline, p_data);
  pipeline->add_option("--config", config_path, "key = value config file; flags override it");
  auto* o_learner = pipeline->add_option("--learner", learner, "prior, nb, or external:<predictions.csv>");
  auto* o_me = pipeline->add_option("--minsup-entail", minsup_entail, "minimum support of positive entailments");
  auto* o_mx = pipeline->add_option("--minsup-excl", minsup_excl, "minimum support of exclusions");
  auto* o_ex = pipeline->add_option("--exploit", exploit, "entail, excl, both or none")
                   ->check(CLI::IsMember({"entail", "excl", "both", "none"}));
  auto* o_folds = pipeline->add_option("--folds", folds, "cross-validation folds");
  auto* o_seed = pipeline->add_option("--seed", seed, "fold assignment seed");
  auto* o_esc = pipeline->add_flag("--escalate", escalate, "escalate exclusion support");
  auto* o_cap = pipeline->add_option("--escalate-cap", escalate_cap, "largest acceptable number of exclusion sets");
  auto* o_time = pipeline->add_option("--escalate-time", escalate_time, "seconds allowed per mining attempt");
  auto* o_eps = pipeline->add_option("--clamp-epsilon", clamp_epsilon, "evidence clamp epsilon");
  auto* o_thr = pipeline->add_option("--threads", threads, "worker threads (0 = all cores)");
  pipeline->add_option("--output-dir", output_dir, "directory for per-fold artifacts and reports");
  pipeline->add_option("--output", output, "report destination ('-' for stdout)");
  pipeline->add_option("--format", p_format, "json or text")->check(CLI::IsMember({"json", "text"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (discover_cmd->parsed()) {
      const auto data = load_dataset(d_data, in);
      DiscoveryOptions opts;
      opts.minsup_entail = minsup_entail;
      opts.minsup_excl = minsup_excl;
      opts.escalate = escalate;
      opts.escalate_cap = escalate_cap;
      if (!(escalate_time > 0)) throw UsageError("--escalate-time must be positive");
      opts.escalate_time = std::chrono::milliseconds(static_cast<long long>(escalate_time * 1000.0));
      opts.threads = threads_of(threads);
      const auto rel = discover(data.labels, opts);
      emit(output, out, format == "json" ? dump(to_json(rel)) : relationships_text(rel));
    } else if (build->parsed()) {
      const auto rel = relationships_from_json(read_json(rel_path, in, "relationships"));
      const auto net = build_network(filter_relationships(rel, parse_exploit(exploit)), rel.labels);
      emit(output, out, dump(to_json(net)));
    } else if (leaks->parsed()) {
      if (rel_path.empty() && net_path.empty()) throw UsageError("leaks needs --relationships or --network");
      if ((rel_path == "-" || net_path == "-") && l_data.data == "-") throw UsageError("only one input can be stdin");
      auto data = load_dataset(l_data, in);
      const LabelNetwork net = !net_path.empty()
                                   ? network_from_json(read_json(net_path, in, "network"))
                                   : build_network(relationships_from_json(read_json(rel_path, in, "relationships")),
                                                   data.labels.names());
      data.labels = generate_leak_labels(data.labels, net);
      std::ostringstream o;
      write_csv(o, data);
      emit(output, out, o.str());
    } else if (correct->parsed()) {
      if (net_path == "-" && pred_path == "-") throw UsageError("only one input can be stdin");
      const LabelNetwork net = network_from_json(read_json(net_path, in, "network"));
      const PredictionTable file = read_table(pred_path, in);
      IngestOptions ingest;
      if (c_data.given()) ingest.leak_frequencies = leak_frequencies(load_dataset(c_data, in), net);
      auto ingested = ingest_external_predictions(file, net, ingest);
      for (const auto& w : ingested.warnings) err << "warning: " << w << '\n';
      const auto corrected = correct_table(net, ingested.table, clamp_epsilon, threads_of(threads));
      emit(output, out, write_table(corrected));
    } else if (evaluate->parsed()) {
      if (before_path == "-" && after_path == "-") throw UsageError("only one input can be stdin");
      const auto data = load_dataset(e_data, in);
      const auto before = read_table(before_path, in);
      const auto after = read_table(after_path, in);
      const auto report = compare(before, after, truth_for(data, before));
      emit(output, out, format == "json" ? dump(to_json(report)) : format_report_text(report));
    } else if (pipeline->parsed()) {
      PipelineConfig cfg;
      if (!config_path.empty()) cfg = load_config(config_path, cfg);
      if (o_learner->count()) apply_config_entry(cfg, "learner", learner);
      if (o_me->count()) cfg.minsup_entail = minsup_entail;
      if (o_mx->count()) cfg.minsup_excl = minsup_excl;
      if (o_ex->count()) cfg.exploit = parse_exploit(exploit);
      if (o_folds->count()) cfg.folds = folds;
      if (o_seed->count()) cfg.seed = seed;
      if (o_esc->count()) cfg.escalate = escalate;
      if (o_cap->count()) cfg.escalate_cap = escalate_cap;
      if (o_time->count()) apply_config_entry(cfg, "escalate_time", csv::format_double(escalate_time));
      if (o_eps->count()) apply_config_entry(cfg, "clamp_epsilon", csv::format_double(clamp_epsilon));
      if (o_thr->count()) cfg.threads = threads;
      cfg.threads = threads_of(cfg.threads);

      const auto data = load_dataset(p_data, in);
      const CvResult cv = run_cv(data, cfg);
      for (const auto& f : cv.folds)
        for (const auto& w : f.warnings) err << "warning: fold " << f.fold << ": " << w << '\n';

      const std::string json_text = dump(to_json(cv.report));
      const std::string text = format_report_text(cv.report);
      if (!output_dir.empty()) {
        fs::create_directories(output_dir);
        for (const auto& f : cv.folds) {
          const fs::path dir = fs::path(output_dir) / ("fold_" + std::to_string(f.fold));
          fs::create_directories(dir);
          emit((dir / "relationships.json").string(), out, dump(to_json(f.relationships)));
          emit((dir / "network.json").string(), out, dump(to_json(f.network)));
          emit((dir / "raw.csv").string(), out, write_table(f.raw));
          emit((dir / "corrected.csv").string(), out, write_table(f.corrected));
        }
        emit((fs::path(output_dir) / "report.json").string(), out, json_text);
        emit((fs::path(output_dir) / "report.txt").string(), out, text);
      }
      emit(output, out, p_format == "json" ? json_text : text);
    }
    return kOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvariantError& e) {
    err << "internal error: " << e.what() << '\n';
    return kInvariant;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInvariant;
  }
}

}  // namespace entailnet::cli

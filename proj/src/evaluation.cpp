#include "entailnet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "entailnet/error.hpp"

namespace entailnet {

LabelRanking rank_label(std::string label, std::span<const double> scores, std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) throw UsageError("scores and truth differ in length");
  LabelRanking r;
  r.label = std::move(label);
  r.order.resize(scores.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  r.relevant.reserve(scores.size());
  for (std::size_t i : r.order) r.relevant.push_back(truth[i] ? 1 : 0);
  return r;
}

std::optional<double> average_precision(const LabelRanking& ranking) {
  std::size_t hits = 0;
  double total = 0.0;
  for (std::size_t k = 0; k < ranking.relevant.size(); ++k) {
    if (!ranking.relevant[k]) continue;
    ++hits;
    total += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (hits == 0) return std::nullopt;
  return total / static_cast<double>(hits);
}

std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  return average_precision(rank_label("", scores, truth));
}

double map_score(std::span<const LabelRanking> rankings) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rankings) {
    if (auto ap = average_precision(r)) {
      sum += *ap;
      ++n;
    }
  }
  if (n == 0) throw DataError("no label has a relevant instance; MAP is undefined");
  return sum / static_cast<double>(n);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd m;
  if (values.empty()) return m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.stdev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

namespace {

double improvement(double before, double after) {
  if (after == before) return 0.0;
  return 100.0 * (after - before) / before;
}

}  // namespace

FoldEvaluation evaluate_fold(const PredictionTable& before, const PredictionTable& after, const LabelMatrix& truth,
                             std::size_t fold) {
  if (before.instance_ids() != after.instance_ids()) {
    throw DataError("before and after tables cover different instances");
  }
  if (before.rows() != truth.n_instances()) {
    throw DataError("prediction rows (" + std::to_string(before.rows()) + ") differ from truth rows (" +
                    std::to_string(truth.n_instances()) + ")");
  }
  FoldEvaluation ev;
  ev.fold = fold;
  std::vector<LabelRanking> rb, ra;
  std::vector<std::uint8_t> y(truth.n_instances());
  for (std::size_t j = 0; j < truth.n_labels(); ++j) {
    const std::string& name = truth.names()[j];
    auto cb = before.find_column(name);
    auto ca = after.find_column(name);
    if (!cb) throw DataError("before table lacks label '" + name + "'");
    if (!ca) throw DataError("after table lacks label '" + name + "'");
    for (std::size_t r = 0; r < y.size(); ++r) y[r] = truth.get(r, j) ? 1 : 0;
    rb.push_back(rank_label(name, before.column(*cb), y));
    ra.push_back(rank_label(name, after.column(*ca), y));
    ev.per_label.push_back({name, average_precision(rb.back()), average_precision(ra.back())});
  }
  ev.map_before = map_score(rb);
  ev.map_after = map_score(ra);
  return ev;
}

EvaluationReport compare(const PredictionTable& before, const PredictionTable& after, const LabelMatrix& truth) {
  return aggregate({evaluate_fold(before, after, truth)});
}

EvaluationReport aggregate(std::vector<FoldEvaluation> folds) {
  EvaluationReport rep;
  std::vector<double> mb, ma, pe, ex;
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> aps;
  for (const auto& f : folds) {
    mb.push_back(f.map_before);
    ma.push_back(f.map_after);
    pe.push_back(static_cast<double>(f.positive_entailments));
    ex.push_back(static_cast<double>(f.exclusions));
    for (const auto& l : f.per_label) {
      auto [it, fresh] = aps.try_emplace(l.label);
      if (fresh) order.push_back(l.label);
      if (l.before) it->second.first.push_back(*l.before);
      if (l.after) it->second.second.push_back(*l.after);
    }
  }
  rep.map_before = mean_std(mb);
  rep.map_after = mean_std(ma);
  rep.improvement_pct = folds.empty() ? 0.0 : improvement(rep.map_before.mean, rep.map_after.mean);
  rep.positive_entailments = mean_std(pe);
  rep.exclusions = mean_std(ex);
  for (const auto& name : order) {
    const auto& [b, a] = aps.at(name);
    LabelAp l{name, std::nullopt, std::nullopt};
    if (!b.empty()) l.before = mean_std(b).mean;
    if (!a.empty()) l.after = mean_std(a).mean;
    rep.per_label.push_back(std::move(l));
  }
  rep.folds = std::move(folds);
  return rep;
}

namespace {

nlohmann::json ms_json(const MeanStd& m) { return {{"mean", m.mean}, {"stdev", m.stdev}}; }
MeanStd ms_from(const nlohmann::json& j) { return {j.at("mean").get<double>(), j.at("stdev").get<double>()}; }

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
std::optional<double> opt_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

nlohmann::json labels_json(const std::vector<LabelAp>& v) {
  auto arr = nlohmann::json::array();
  for (const auto& l : v) arr.push_back({{"label", l.label}, {"ap_before", opt_json(l.before)}, {"ap_after", opt_json(l.after)}});
  return arr;
}

std::vector<LabelAp> labels_from(const nlohmann::json& j) {
  std::vector<LabelAp> v;
  for (const auto& e : j) v.push_back({e.at("label").get<std::string>(), opt_from(e.at("ap_before")), opt_from(e.at("ap_after"))});
  return v;
}

}  // namespace

nlohmann::json to_json(const EvaluationReport& report) {
  nlohmann::json j;
  j["map_before"] = ms_json(report.map_before);
  j["map_after"] = ms_json(report.map_after);
  j["improvement_pct"] = report.improvement_pct;
  j["per_label"] = labels_json(report.per_label);
  j["relationships"] = {{"positive_entailments", ms_json(report.positive_entailments)},
                        {"exclusions", ms_json(report.exclusions)}};
  auto folds = nlohmann::json::array();
  for (const auto& f : report.folds) {
    folds.push_back({{"fold", f.fold},
                     {"map_before", f.map_before},
                     {"map_after", f.map_after},
                     {"per_label", labels_json(f.per_label)},
                     {"positive_entailments", f.positive_entailments},
                     {"exclusions", f.exclusions},
                     {"minsup_entail", f.minsup_entail},
                     {"minsup_excl", f.minsup_excl}});
  }
  j["folds"] = std::move(folds);
  return j;
}

EvaluationReport report_from_json(const nlohmann::json& j) {
  try {
    EvaluationReport r;
    r.map_before = ms_from(j.at("map_before"));
    r.map_after = ms_from(j.at("map_after"));
    r.improvement_pct = j.at("improvement_pct").get<double>();
    r.per_label = labels_from(j.at("per_label"));
    r.positive_entailments = ms_from(j.at("relationships").at("positive_entailments"));
    r.exclusions = ms_from(j.at("relationships").at("exclusions"));
    for (const auto& f : j.at("folds")) {
      FoldEvaluation e;
      e.fold = f.at("fold").get<std::size_t>();
      e.map_before = f.at("map_before").get<double>();
      e.map_after = f.at("map_after").get<double>();
      e.per_label = labels_from(f.at("per_label"));
      e.positive_entailments = f.at("positive_entailments").get<std::size_t>();
      e.exclusions = f.at("exclusions").get<std::size_t>();
      e.minsup_entail = f.at("minsup_entail").get<std::size_t>();
      e.minsup_excl = f.at("minsup_excl").get<std::size_t>();
      r.folds.push_back(std::move(e));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report JSON: ") + e.what());
  }
}

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt("%.4f", *v) : std::string("-"); }

}  // namespace

std::string format_report_text(const EvaluationReport& report) {
  std::ostringstream out;
  auto pm = [](const MeanStd& m, const char* pattern) { return fmt(pattern, m.mean) + " +- " + fmt(pattern, m.stdev); };
  out << "folds              " << report.folds.size() << '\n';
  out << "MAP before         " << pm(report.map_before, "%.4f") << '\n';
  out << "MAP after          " << pm(report.map_after, "%.4f") << '\n';
  out << "improvement %      " << fmt("%.3f", report.improvement_pct) << '\n';
  out << "entailments        " << pm(report.positive_entailments, "%.1f") << '\n';
  out << "exclusions         " << pm(report.exclusions, "%.1f") << '\n';

  std::size_t width = 5;
  for (const auto& l : report.per_label) width = std::max(width, l.label.size());
  out << '\n' << std::string("label") << std::string(width - 5 + 2, ' ') << "AP before  AP after     delta\n";
  for (const auto& l : report.per_label) {
    std::string delta = (l.before && l.after) ? fmt("%+.4f", *l.after - *l.before) : std::string("-");
    std::string b = fmt_opt(l.before), a = fmt_opt(l.after);
    out << l.label << std::string(width - l.label.size() + 2, ' ') << std::string(9 - std::min<std::size_t>(9, b.size()), ' ')
        << b << "  " << std::string(8 - std::min<std::size_t>(8, a.size()), ' ') << a << "  "
        << std::string(8 - std::min<std::size_t>(8, delta.size()), ' ') << delta << '\n';
  }

  if (!report.folds.empty()) {
    out << "\nfold  MAP before  MAP after  entail  excl  minsup_entail  minsup_excl\n";
    for (const auto& f : report.folds) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%4zu  %10.4f  %9.4f  %6zu  %4zu  %13zu  %11zu\n", f.fold, f.map_before, f.map_after,
                    f.positive_entailments, f.exclusions, f.minsup_entail, f.minsup_excl);
      out << buf;
    }
  }
  return out.str();
}

}  // namespace entailnet

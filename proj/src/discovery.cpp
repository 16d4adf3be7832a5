#include "entailnet/discovery.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <numeric>
#include <set>

#include "entailnet/error.hpp"
#include "entailnet/kernels.hpp"
#include "entailnet/parallel.hpp"

namespace entailnet {

ContingencyTable build_contingency(const LabelMatrix& labels, std::size_t a, std::size_t b) {
  if (a == b) throw UsageError("contingency table needs two distinct labels, got '" + labels.names()[a] + "' twice");
  const std::size_t both = kernels::and_popcount(labels.column(a), labels.column(b));
  const std::size_t pos_a = labels.positives(a);
  const std::size_t pos_b = labels.positives(b);
  ContingencyTable t;
  t.both = both;
  t.a_only = pos_a - both;
  t.b_only = pos_b - both;
  t.neither = labels.n_instances() - both - t.a_only - t.b_only;
  return t;
}

ContingencyTable build_contingency(const LabelMatrix& labels, std::string_view a, std::string_view b) {
  return build_contingency(labels, labels.index_of(a), labels.index_of(b));
}

PairwiseRelations discover_pairwise(const LabelMatrix& labels, std::size_t minsup_entail,
                                    std::size_t minsup_excl, std::size_t threads) {
  if (minsup_entail < 1 || minsup_excl < 1) throw UsageError("minimum supports must be at least 1");
  const std::size_t q = labels.n_labels();
  std::vector<std::size_t> order(q);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return labels.names()[x] < labels.names()[y]; });

  // Row r holds the pairs (order[r], order[c]) for c > r; rows are independent.
  std::vector<PairwiseRelations> rows(q);
  parallel_for(q, threads, [&](std::size_t r) {
    PairwiseRelations& out = rows[r];
    const std::size_t a = order[r];
    const std::string& name_a = labels.names()[a];
    for (std::size_t c = r + 1; c < q; ++c) {
      const std::size_t b = order[c];
      const std::string& name_b = labels.names()[b];
      const ContingencyTable t = build_contingency(labels, a, b);
      if (t.a_only == 0 && t.both >= minsup_entail) out.entailments.push_back({name_a, name_b, t.both});
      if (t.b_only == 0 && t.both >= minsup_entail) out.entailments.push_back({name_b, name_a, t.both});
      if (t.both == 0 && t.a_only + t.b_only >= minsup_excl) {
        out.exclusions.push_back({{name_a, name_b}, t.a_only + t.b_only});
      }
      if (t.neither == 0) out.coexhaustions.push_back({name_a, name_b, t.a_only + t.b_only});
      if (t.a_only == 0 && t.b_only == 0 && t.both >= minsup_entail) {
        out.equivalences.push_back({name_a, name_b, t.both});
      }
    }
  });

  PairwiseRelations merged;
  for (auto& r : rows) {
    std::move(r.entailments.begin(), r.entailments.end(), std::back_inserter(merged.entailments));
    std::move(r.exclusions.begin(), r.exclusions.end(), std::back_inserter(merged.exclusions));
    std::move(r.coexhaustions.begin(), r.coexhaustions.end(), std::back_inserter(merged.coexhaustions));
    std::move(r.equivalences.begin(), r.equivalences.end(), std::back_inserter(merged.equivalences));
  }
  std::sort(merged.entailments.begin(), merged.entailments.end());
  std::sort(merged.exclusions.begin(), merged.exclusions.end());
  std::sort(merged.coexhaustions.begin(), merged.coexhaustions.end());
  std::sort(merged.equivalences.begin(), merged.equivalences.end());
  return merged;
}

MiningOutcome mine_maximal_exclusions(std::span<const Exclusion> pairwise_exclusions,
                                      const std::map<std::string, std::size_t>& positive_counts,
                                      std::size_t minsup_excl, const MiningBudget& budget) {
  std::set<std::string> vertex_names;
  for (const auto& p : pairwise_exclusions) {
    if (p.labels.size() != 2 || p.labels[0] == p.labels[1]) {
      throw UsageError("pairwise exclusions must name two distinct labels");
    }
    vertex_names.insert(p.labels.begin(), p.labels.end());
  }
  const std::vector<std::string> names(vertex_names.begin(), vertex_names.end());
  const std::size_t q = names.size();
  auto index = [&](const std::string& n) {
    return static_cast<std::uint32_t>(std::lower_bound(names.begin(), names.end(), n) - names.begin());
  };
  std::vector<std::size_t> counts(q, 0);
  for (std::size_t i = 0; i < q; ++i) {
    auto it = positive_counts.find(names[i]);
    if (it == positive_counts.end()) throw UsageError("no positive count for label '" + names[i] + "'");
    counts[i] = it->second;
  }

  const std::size_t words = words_for(q);
  std::vector<BitColumn> adjacency(q, BitColumn(words, 0));
  std::vector<std::vector<std::uint32_t>> level;
  for (const auto& p : pairwise_exclusions) {
    std::uint32_t a = index(p.labels[0]);
    std::uint32_t b = index(p.labels[1]);
    if (a > b) std::swap(a, b);
    adjacency[a][b / 64] |= std::uint64_t{1} << (b % 64);
    adjacency[b][a / 64] |= std::uint64_t{1} << (a % 64);
    level.push_back({a, b});
  }
  std::sort(level.begin(), level.end());
  level.erase(std::unique(level.begin(), level.end()), level.end());

  MiningOutcome outcome;
  BitColumn common(words);
  std::size_t visited = 0;
  while (!level.empty()) {
    std::vector<std::vector<std::uint32_t>> next;
    for (const auto& members : level) {
      if (budget.deadline && (visited++ % 256 == 0) && std::chrono::steady_clock::now() > *budget.deadline) {
        outcome.status = MiningOutcome::Status::TimedOut;
        outcome.sets.clear();
        return outcome;
      }
      common = adjacency[members[0]];
      for (std::size_t k = 1; k < members.size(); ++k) kernels::and_into(common, adjacency[members[k]]);
      if (kernels::popcount(common) == 0) {
        std::size_t support = 0;
        for (auto m : members) support += counts[m];
        if (support < minsup_excl) continue;
        Exclusion e;
        e.support = support;
        for (auto m : members) e.labels.push_back(names[m]);
        outcome.sets.push_back(std::move(e));
        if (budget.max_sets && outcome.sets.size() > *budget.max_sets) {
          outcome.status = MiningOutcome::Status::TooMany;
          return outcome;
        }
        continue;
      }
      // Extend only with common members past the current last one so each set
      // is generated once, from its sorted prefix.
      for (std::size_t w = members.back() / 64; w < words; ++w) {
        std::uint64_t bits = common[w];
        while (bits != 0) {
          const auto v = static_cast<std::uint32_t>(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
          bits &= bits - 1;
          if (v <= members.back()) continue;
          auto grown = members;
          grown.push_back(v);
          next.push_back(std::move(grown));
        }
      }
    }
    level = std::move(next);
  }
  std::sort(outcome.sets.begin(), outcome.sets.end());
  return outcome;
}

std::vector<Exclusion> mine_maximal_exclusions(std::span<const Exclusion> pairwise_exclusions,
                                               const std::map<std::string, std::size_t>& positive_counts,
                                               std::size_t minsup_excl) {
  return mine_maximal_exclusions(pairwise_exclusions, positive_counts, minsup_excl, MiningBudget{}).sets;
}

std::vector<PositiveEntailment> transitive_reduction(std::span<const PositiveEntailment> entailments) {
  std::vector<PositiveEntailment> edges(entailments.begin(), entailments.end());
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const auto& x, const auto& y) {
                            return x.antecedent == y.antecedent && x.consequent == y.consequent;
                          }),
              edges.end());

  std::set<std::string> node_set;
  for (const auto& e : edges) {
    if (e.antecedent == e.consequent) throw DataError("entailment cycle: " + e.antecedent + " -> " + e.antecedent);
    node_set.insert(e.antecedent);
    node_set.insert(e.consequent);
  }
  const std::vector<std::string> names(node_set.begin(), node_set.end());
  const std::size_t n = names.size();
  auto index = [&](const std::string& s) {
    return static_cast<std::size_t>(std::lower_bound(names.begin(), names.end(), s) - names.begin());
  };
  std::vector<std::vector<std::size_t>> children(n);
  for (const auto& e : edges) children[index(e.antecedent)].push_back(index(e.consequent));

  // Depth-first post-order doubles as cycle detection.
  enum class Mark { White, Grey, Black };
  std::vector<Mark> mark(n, Mark::White);
  std::vector<std::size_t> post;
  std::vector<std::size_t> stack_path;
  std::function<void(std::size_t)> visit = [&](std::size_t u) {
    mark[u] = Mark::Grey;
    stack_path.push_back(u);
    for (auto v : children[u]) {
      if (mark[v] == Mark::Grey) {
        std::string cycle;
        auto it = std::find(stack_path.begin(), stack_path.end(), v);
        for (; it != stack_path.end(); ++it) cycle += names[*it] + " -> ";
        throw DataError("entailment cycle: " + cycle + names[v]);
      }
      if (mark[v] == Mark::White) visit(v);
    }
    stack_path.pop_back();
    mark[u] = Mark::Black;
    post.push_back(u);
  };
  for (std::size_t u = 0; u < n; ++u) {
    if (mark[u] == Mark::White) visit(u);
  }

  const std::size_t words = words_for(n);
  std::vector<BitColumn> reach(n, BitColumn(words, 0));
  for (auto u : post) {
    for (auto v : children[u]) {
      reach[u][v / 64] |= std::uint64_t{1} << (v % 64);
      for (std::size_t w = 0; w < words; ++w) reach[u][w] |= reach[v][w];
    }
  }

  std::vector<PositiveEntailment> reduced;
  for (const auto& e : edges) {
    const std::size_t u = index(e.antecedent);
    const std::size_t v = index(e.consequent);
    bool redundant = false;
    for (auto w : children[u]) {
      if (w != v && ((reach[w][v / 64] >> (v % 64)) & 1U)) {
        redundant = true;
        break;
      }
    }
    if (!redundant) reduced.push_back(e);
  }
  return reduced;
}

namespace {

std::map<std::string, std::size_t> positive_count_map(const LabelMatrix& labels) {
  std::map<std::string, std::size_t> counts;
  for (std::size_t j = 0; j < labels.n_labels(); ++j) counts[labels.names()[j]] = labels.positives(j);
  return counts;
}

std::vector<Exclusion> pairs_with_support(const std::vector<Exclusion>& pairs, std::size_t minsup) {
  std::vector<Exclusion> kept;
  std::copy_if(pairs.begin(), pairs.end(), std::back_inserter(kept),
               [minsup](const Exclusion& e) { return e.support >= minsup; });
  return kept;
}

}  // namespace

EscalationResult escalate_minsup(const LabelMatrix& labels, std::size_t start, std::size_t cap_relationships,
                                 std::chrono::milliseconds cap_time) {
  if (start < 2) throw UsageError("escalation must start from a support of at least 2");
  if (cap_relationships < 1) throw UsageError("relationship cap must be at least 1");
  const auto pairs = discover_pairwise(labels, start, start).exclusions;
  const auto counts = positive_count_map(labels);
  EscalationResult result;
  for (std::size_t minsup = start; minsup <= labels.n_instances(); minsup *= 2) {
    result.attempted.push_back(minsup);
    const auto kept = pairs_with_support(pairs, minsup);
    MiningBudget budget{std::chrono::steady_clock::now() + cap_time, cap_relationships};
    auto outcome = mine_maximal_exclusions(kept, counts, minsup, budget);
    if (outcome.status == MiningOutcome::Status::Complete) {
      result.minsup = minsup;
      result.exclusions = std::move(outcome.sets);
      return result;
    }
  }
  throw DataError("no exclusion support up to the instance count (" + std::to_string(labels.n_instances()) +
                  ") yields at most " + std::to_string(cap_relationships) + " sets within the time cap");
}

RelationshipSet discover(const LabelMatrix& labels, const DiscoveryOptions& options) {
  auto pairwise = discover_pairwise(labels, options.minsup_entail, options.minsup_excl, options.threads);
  RelationshipSet out;
  out.labels = labels.names();
  out.positive_entailments = std::move(pairwise.entailments);
  out.coexhaustions = std::move(pairwise.coexhaustions);
  out.equivalences = std::move(pairwise.equivalences);
  out.minsup_entail = options.minsup_entail;
  if (options.escalate) {
    auto esc = escalate_minsup(labels, options.minsup_excl, options.escalate_cap, options.escalate_time);
    out.minsup_excl = esc.minsup;
    out.exclusions = std::move(esc.exclusions);
  } else {
    out.minsup_excl = options.minsup_excl;
    out.exclusions = mine_maximal_exclusions(pairwise.exclusions, positive_count_map(labels), options.minsup_excl);
  }
  return out;
}

CollapsedRelationships collapse_and_reduce(const RelationshipSet& relationships) {
  // Union-find with the smallest name as root.
  std::map<std::string, std::string> parent;
  std::function<std::string(const std::string&)> root = [&](const std::string& x) -> std::string {
    auto it = parent.find(x);
    if (it == parent.end() || it->second == x) return x;
    std::string r = root(it->second);
    parent[x] = r;
    return r;
  };
  for (const auto& eq : relationships.equivalences) {
    const std::string a = root(eq.first);
    const std::string b = root(eq.second);
    if (a == b) continue;
    if (a < b) {
      parent[b] = a;
    } else {
      parent[a] = b;
    }
  }

  CollapsedRelationships out;
  for (const auto& l : relationships.labels) out.representative[l] = root(l);
  auto rep = [&](const std::string& l) {
    auto it = out.representative.find(l);
    return it == out.representative.end() ? root(l) : it->second;
  };

  std::vector<PositiveEntailment> edges;
  for (const auto& e : relationships.positive_entailments) {
    PositiveEntailment m{rep(e.antecedent), rep(e.consequent), e.support};
    if (m.antecedent != m.consequent) edges.push_back(std::move(m));
  }
  out.entailments = transitive_reduction(edges);

  std::vector<Exclusion> sets;
  for (const auto& x : relationships.exclusions) {
    Exclusion m{{}, x.support};
    for (const auto& l : x.labels) m.labels.push_back(rep(l));
    std::sort(m.labels.begin(), m.labels.end());
    m.labels.erase(std::unique(m.labels.begin(), m.labels.end()), m.labels.end());
    if (m.labels.size() >= 2) sets.push_back(std::move(m));
  }
  std::sort(sets.begin(), sets.end());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    bool subsumed = false;
    for (std::size_t j = 0; j < sets.size() && !subsumed; ++j) {
      if (i == j) continue;
      const bool same = sets[i].labels == sets[j].labels;
      if (same && j < i) subsumed = true;
      if (!same && std::includes(sets[j].labels.begin(), sets[j].labels.end(), sets[i].labels.begin(),
                                 sets[i].labels.end())) {
        subsumed = true;
      }
    }
    if (!subsumed) out.exclusions.push_back(sets[i]);
  }
  return out;
}

nlohmann::json to_json(const RelationshipSet& r) {
  using nlohmann::json;
  json j;
  j["labels"] = r.labels;
  j["positive_entailments"] = json::array();
  for (const auto& e : r.positive_entailments) {
    j["positive_entailments"].push_back({{"antecedent", e.antecedent}, {"consequent", e.consequent}, {"support", e.support}});
  }
  j["exclusions"] = json::array();
  for (const auto& e : r.exclusions) j["exclusions"].push_back({{"labels", e.labels}, {"support", e.support}});
  j["coexhaustions"] = json::array();
  for (const auto& p : r.coexhaustions) {
    j["coexhaustions"].push_back({{"labels", {p.first, p.second}}, {"support", p.support}});
  }
  j["equivalences"] = json::array();
  for (const auto& p : r.equivalences) {
    j["equivalences"].push_back({{"labels", {p.first, p.second}}, {"support", p.support}});
  }
  j["minsup_entail"] = r.minsup_entail;
  j["minsup_excl"] = r.minsup_excl;
  return j;
}

RelationshipSet relationships_from_json(const nlohmann::json& j) {
  try {
    RelationshipSet r;
    if (j.contains("labels")) r.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& e : j.at("positive_entailments")) {
      r.positive_entailments.push_back({e.at("antecedent").get<std::string>(), e.at("consequent").get<std::string>(),
                                        e.value("support", std::size_t{0})});
    }
    for (const auto& e : j.at("exclusions")) {
      Exclusion x{e.at("labels").get<std::vector<std::string>>(), e.value("support", std::size_t{0})};
      std::sort(x.labels.begin(), x.labels.end());
      r.exclusions.push_back(std::move(x));
    }
    auto read_pairs = [&](const char* key, std::vector<LabelPair>& out) {
      if (!j.contains(key)) return;
      for (const auto& e : j.at(key)) {
        auto labels = e.at("labels").get<std::vector<std::string>>();
        if (labels.size() != 2) throw DataError(std::string(key) + " entries must name two labels");
        std::sort(labels.begin(), labels.end());
        out.push_back({labels[0], labels[1], e.value("support", std::size_t{0})});
      }
    };
    read_pairs("coexhaustions", r.coexhaustions);
    read_pairs("equivalences", r.equivalences);
    r.minsup_entail = j.value("minsup_entail", std::size_t{2});
    r.minsup_excl = j.value("minsup_excl", std::size_t{2});
    if (r.labels.empty()) {
      std::set<std::string> seen;
      for (const auto& e : r.positive_entailments) seen.insert({e.antecedent, e.consequent});
      for (const auto& x : r.exclusions) seen.insert(x.labels.begin(), x.labels.end());
      r.labels.assign(seen.begin(), seen.end());
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed relationship JSON: ") + e.what());
  }
}

}  // namespace entailnet

#include "entailnet/inference.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "entailnet/error.hpp"
#include "entailnet/kernels.hpp"

namespace entailnet {

VirtualEvidence clamp_evidence(double p, double clamp_epsilon) {
  if (!(p >= 0.0 && p <= 1.0)) {
    std::ostringstream msg;
    msg << "probability " << p << " is outside [0, 1]";
    throw DataError(msg.str());
  }
  if (!(clamp_epsilon >= 0.0 && clamp_epsilon < 0.5)) throw UsageError("clamp epsilon must lie in [0, 0.5)");
  const double c = std::min(std::max(p, clamp_epsilon), 1.0 - clamp_epsilon);
  return {c, 1.0 - c};
}

EvidenceModel attach_evidence(const LabelNetwork& network, const PredictionVector& predictions,
                              double clamp_epsilon) {
  EvidenceModel model;
  model.weights.assign(network.size(), VirtualEvidence{});
  for (auto i : network.evidence_nodes()) {
    const std::string& name = network.node(i).name;
    auto it = predictions.find(name);
    if (it == predictions.end()) throw DataError("no prediction for network node '" + name + "'");
    try {
      model.weights[i] = clamp_evidence(it->second, clamp_epsilon);
    } catch (const DataError& e) {
      throw DataError("node '" + name + "': " + e.what());
    }
  }
  return model;
}

namespace {

// Variables of the moral graph: factor scopes of every OR node (child plus
// parents) and every constraint (its parents).
std::vector<std::vector<std::size_t>> factor_scopes(const LabelNetwork& network) {
  std::vector<std::vector<std::size_t>> scopes;
  for (std::size_t i = 0; i < network.size(); ++i) {
    const auto& node = network.node(i);
    if (node.cpt == CptKind::DeterministicOr) {
      std::vector<std::size_t> s = node.parents;
      s.push_back(i);
      scopes.push_back(std::move(s));
    } else if (node.cpt == CptKind::ExactlyOne) {
      scopes.push_back(node.parents);
    }
  }
  return scopes;
}

struct MoralGraph {
  std::vector<std::size_t> node_of;           // compact id -> node index
  std::vector<std::size_t> id_of;             // node index -> compact id (or npos)
  std::vector<BitColumn> adjacency;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit MoralGraph(const LabelNetwork& network) {
    node_of = network.evidence_nodes();
    id_of.assign(network.size(), npos);
    for (std::size_t k = 0; k < node_of.size(); ++k) id_of[node_of[k]] = k;
    const std::size_t words = words_for(node_of.size());
    adjacency.assign(node_of.size(), BitColumn(words, 0));
    for (const auto& scope : factor_scopes(network)) {
      for (auto a : scope) {
        for (auto b : scope) {
          if (a == b) continue;
          const std::size_t ia = id_of[a];
          const std::size_t ib = id_of[b];
          adjacency[ia][ib / 64] |= std::uint64_t{1} << (ib % 64);
        }
      }
    }
  }

  // Connects v's neighbours pairwise and removes v; returns its degree.
  std::size_t eliminate(std::size_t v) {
    const BitColumn neighbours = adjacency[v];
    const std::size_t degree = kernels::popcount(neighbours);
    for (std::size_t w = 0; w < neighbours.size(); ++w) {
      std::uint64_t bits = neighbours[w];
      while (bits != 0) {
        const std::size_t u = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
        bits &= bits - 1;
        for (std::size_t x = 0; x < neighbours.size(); ++x) adjacency[u][x] |= neighbours[x];
        adjacency[u][u / 64] &= ~(std::uint64_t{1} << (u % 64));
        adjacency[u][v / 64] &= ~(std::uint64_t{1} << (v % 64));
      }
    }
    std::fill(adjacency[v].begin(), adjacency[v].end(), 0);
    return degree;
  }

  std::size_t fill_in(std::size_t v) const {
    const BitColumn& neighbours = adjacency[v];
    const std::size_t degree = kernels::popcount(neighbours);
    std::size_t linked = 0;  // each adjacent neighbour pair counted twice
    for (std::size_t w = 0; w < neighbours.size(); ++w) {
      std::uint64_t bits = neighbours[w];
      while (bits != 0) {
        const std::size_t u = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
        bits &= bits - 1;
        linked += kernels::and_popcount(adjacency[u], neighbours);
      }
    }
    return (degree * (degree - 1) - linked) / 2;
  }
};

}  // namespace

EliminationOrder min_fill_order(const LabelNetwork& network) {
  MoralGraph graph(network);
  const std::size_t m = graph.node_of.size();
  std::vector<std::size_t> by_name(m);
  std::iota(by_name.begin(), by_name.end(), 0);
  std::sort(by_name.begin(), by_name.end(), [&](std::size_t a, std::size_t b) {
    return network.node(graph.node_of[a]).name < network.node(graph.node_of[b]).name;
  });

  EliminationOrder order;
  std::vector<bool> done(m, false);
  for (std::size_t step = 0; step < m; ++step) {
    std::optional<std::size_t> best;
    std::size_t best_fill = 0;
    for (auto v : by_name) {
      if (done[v]) continue;
      const std::size_t fill = graph.fill_in(v);
      if (!best || fill < best_fill) {
        best = v;
        best_fill = fill;
      }
    }
    order.induced_width = std::max(order.induced_width, graph.eliminate(*best));
    done[*best] = true;
    order.nodes.push_back(graph.node_of[*best]);
  }
  return order;
}

std::size_t induced_width(const LabelNetwork& network, std::span<const std::size_t> order) {
  MoralGraph graph(network);
  if (order.size() != graph.node_of.size()) throw UsageError("elimination order must cover every evidence node");
  std::vector<bool> done(graph.node_of.size(), false);
  std::size_t width = 0;
  for (auto node : order) {
    if (node >= graph.id_of.size() || graph.id_of[node] == MoralGraph::npos || done[graph.id_of[node]]) {
      throw UsageError("elimination order is not a permutation of the evidence nodes");
    }
    const std::size_t v = graph.id_of[node];
    done[v] = true;
    width = std::max(width, graph.eliminate(v));
  }
  return width;
}

namespace {

using IndexMap = std::vector<std::uint32_t>;

// For each entry of a table over `scope` (bit j <-> scope[j]), the index of
// the matching entry of a table over `sub` (a subset, bit j <-> sub[j]).
IndexMap build_index_map(const std::vector<std::size_t>& scope, const std::vector<std::size_t>& sub) {
  std::vector<std::size_t> bit_in_scope;
  for (auto v : sub) {
    const auto it = std::find(scope.begin(), scope.end(), v);
    bit_in_scope.push_back(static_cast<std::size_t>(it - scope.begin()));
  }
  IndexMap map(std::size_t{1} << scope.size());
  for (std::size_t idx = 0; idx < map.size(); ++idx) {
    std::uint32_t s = 0;
    for (std::size_t j = 0; j < sub.size(); ++j) s |= static_cast<std::uint32_t>((idx >> bit_in_scope[j]) & 1U) << j;
    map[idx] = s;
  }
  return map;
}

void gather(std::span<double> out, std::span<const double> source, const IndexMap& map) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = source[map[i]];
}

double normalize(std::span<double> table) {
  const double total = kernels::sum(table);
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DataError("infeasible evidence: the constraints leave zero probability mass");
  }
  kernels::scale(table, 1.0 / total);
  return total;
}

}  // namespace

struct InferenceEngine::Compiled {
  struct Factor {
    std::vector<std::size_t> vars;  // elimination positions, descending
    std::vector<double> table;
  };
  struct Attached {
    std::size_t id;  // factor id or child bucket position
    IndexMap map;
  };
  struct Bucket {
    std::vector<std::size_t> scope;  // descending positions; back() is this bucket's variable
    std::vector<Attached> factors;
    std::vector<Attached> children;
    std::optional<std::size_t> parent;
  };

  LabelNetwork network;
  EliminationOrder order;
  std::vector<std::size_t> node_at;  // position -> node
  std::vector<std::size_t> position_of;
  std::vector<Factor> factors;
  std::vector<Bucket> buckets;
  std::size_t widest = 0;

  explicit Compiled(LabelNetwork net) : network(std::move(net)), order(min_fill_order(network)) {
    const std::size_t m = order.nodes.size();
    node_at = order.nodes;
    position_of.assign(network.size(), static_cast<std::size_t>(-1));
    for (std::size_t p = 0; p < m; ++p) position_of[node_at[p]] = p;

    std::vector<std::vector<std::size_t>> assigned(m);
    for (std::size_t i = 0; i < network.size(); ++i) {
      const auto& node = network.node(i);
      if (node.cpt == CptKind::UniformPrior) continue;
      Factor f;
      std::optional<std::size_t> child;
      if (node.cpt == CptKind::DeterministicOr) child = position_of[i];
      for (auto p : node.parents) f.vars.push_back(position_of[p]);
      if (child) f.vars.push_back(*child);
      std::sort(f.vars.begin(), f.vars.end(), std::greater<>());
      if (f.vars.size() > kMaxBucketScope) {
        throw DataError("node '" + node.name + "' has too many parents for exact inference");
      }
      f.table.assign(std::size_t{1} << f.vars.size(), 0.0);
      std::size_t child_bit = 0;
      if (child) child_bit = static_cast<std::size_t>(std::find(f.vars.begin(), f.vars.end(), *child) - f.vars.begin());
      for (std::size_t idx = 0; idx < f.table.size(); ++idx) {
        if (child) {
          const bool value = (idx >> child_bit) & 1U;
          const bool any_parent = (idx & ~(std::size_t{1} << child_bit)) != 0;
          f.table[idx] = value == any_parent ? 1.0 : 0.0;
        } else {
          f.table[idx] = std::popcount(idx) == 1 ? 1.0 : 0.0;
        }
      }
      assigned[f.vars.back()].push_back(factors.size());
      factors.push_back(std::move(f));
    }

    buckets.resize(m);
    std::vector<std::vector<std::size_t>> incoming(m);
    for (std::size_t p = 0; p < m; ++p) {
      std::set<std::size_t, std::greater<>> scope{p};
      for (auto fid : assigned[p]) scope.insert(factors[fid].vars.begin(), factors[fid].vars.end());
      for (auto c : incoming[p]) {
        const auto& cs = buckets[c].scope;
        scope.insert(cs.begin(), cs.end() - 1);
      }
      Bucket& b = buckets[p];
      b.scope.assign(scope.begin(), scope.end());
      if (b.scope.size() > kMaxBucketScope) {
        throw DataError("network too wide for exact inference: a bucket spans " + std::to_string(b.scope.size()) +
                        " variables (limit " + std::to_string(kMaxBucketScope) + ")");
      }
      widest = std::max(widest, b.scope.size());
      for (auto fid : assigned[p]) b.factors.push_back({fid, build_index_map(b.scope, factors[fid].vars)});
      for (auto c : incoming[p]) {
        const auto& cs = buckets[c].scope;
        b.children.push_back({c, build_index_map(b.scope, std::vector<std::size_t>(cs.begin(), cs.end() - 1))});
      }
      if (b.scope.size() > 1) {
        b.parent = b.scope[b.scope.size() - 2];
        incoming[*b.parent].push_back(p);
      }
    }
  }

  std::vector<double> run(const EvidenceModel& evidence) const {
    if (evidence.weights.size() != network.size()) throw UsageError("evidence does not match the network");
    const std::size_t m = buckets.size();
    std::vector<std::vector<double>> local(m);
    std::vector<std::vector<std::vector<double>>> expanded(m);  // child messages in parent layout
    std::vector<std::vector<double>> up(m);
    std::vector<std::vector<double>> down(m);

    for (std::size_t p = 0; p < m; ++p) {
      const Bucket& b = buckets[p];
      const std::size_t size = std::size_t{1} << b.scope.size();
      const std::size_t half = size / 2;
      std::vector<double>& table = local[p];
      table.assign(size, 1.0);
      std::vector<double> scratch(size);
      for (const auto& f : b.factors) {
        gather(scratch, factors[f.id].table, f.map);
        kernels::multiply(table, scratch);
      }
      const VirtualEvidence& w = evidence.weights[node_at[p]];
      kernels::scale(std::span(table).first(half), w.if_false);
      kernels::scale(std::span(table).subspan(half), w.if_true);

      std::vector<double> full = table;
      for (const auto& c : b.children) {
        std::vector<double> e(size);
        gather(e, up[c.id], c.map);
        kernels::multiply(full, e);
        expanded[p].push_back(std::move(e));
      }
      if (b.parent) {
        up[p].resize(half);
        kernels::add(up[p], std::span(full).first(half), std::span(full).subspan(half));
        normalize(up[p]);
      } else if (!(kernels::sum(full) > 0.0)) {
        throw DataError("infeasible evidence: the constraints leave zero probability mass");
      }
    }

    std::vector<double> posterior(network.size(), 1.0);
    for (std::size_t p = m; p-- > 0;) {
      const Bucket& b = buckets[p];
      const std::size_t size = std::size_t{1} << b.scope.size();
      const std::size_t half = size / 2;
      std::vector<double> base = local[p];
      if (b.parent) {
        kernels::multiply(std::span(base).first(half), down[p]);
        kernels::multiply(std::span(base).subspan(half), down[p]);
      }
      const std::size_t r = b.children.size();
      std::vector<std::vector<double>> prefix;
      prefix.reserve(r + 1);
      prefix.push_back(std::move(base));
      for (std::size_t i = 0; i < r; ++i) {
        std::vector<double> next = prefix.back();
        kernels::multiply(next, expanded[p][i]);
        prefix.push_back(std::move(next));
      }
      const std::vector<double>& belief = prefix.back();
      const double total = kernels::sum(belief);
      if (!(total > 0.0)) throw DataError("infeasible evidence: the constraints leave zero probability mass");
      posterior[node_at[p]] = kernels::sum(std::span(belief).subspan(half)) / total;

      std::optional<std::vector<double>> suffix;
      for (std::size_t i = r; i-- > 0;) {
        std::vector<double> product = prefix[i];
        if (suffix) kernels::multiply(product, *suffix);
        const Attached& child = b.children[i];
        std::vector<double>& msg = down[child.id];
        msg.assign(std::size_t{1} << (buckets[child.id].scope.size() - 1), 0.0);
        for (std::size_t idx = 0; idx < size; ++idx) msg[child.map[idx]] += product[idx];
        normalize(msg);
        if (suffix) {
          kernels::multiply(*suffix, expanded[p][i]);
        } else {
          suffix = expanded[p][i];
        }
      }
    }
    return posterior;
  }
};

InferenceEngine::InferenceEngine(LabelNetwork network) : compiled_(std::make_unique<Compiled>(std::move(network))) {}
InferenceEngine::~InferenceEngine() = default;
InferenceEngine::InferenceEngine(InferenceEngine&&) noexcept = default;
InferenceEngine& InferenceEngine::operator=(InferenceEngine&&) noexcept = default;

const LabelNetwork& InferenceEngine::network() const { return compiled_->network; }
const EliminationOrder& InferenceEngine::order() const { return compiled_->order; }
std::size_t InferenceEngine::max_bucket_scope() const { return compiled_->widest; }

std::vector<double> InferenceEngine::posteriors(const EvidenceModel& evidence) const {
  return compiled_->run(evidence);
}

CorrectedMarginals InferenceEngine::marginals(const EvidenceModel& evidence) const {
  return name_marginals(compiled_->network, posteriors(evidence));
}

CorrectedMarginals correct_marginals(const LabelNetwork& network, const EvidenceModel& evidence) {
  return InferenceEngine(network).marginals(evidence);
}

std::vector<double> brute_force_node_posteriors(const LabelNetwork& network, const EvidenceModel& evidence) {
  const auto vars = network.evidence_nodes();
  const std::size_t m = vars.size();
  if (m > kMaxBruteForceVariables) {
    throw UsageError("network has " + std::to_string(m) + " free variables; enumeration is limited to " +
                     std::to_string(kMaxBruteForceVariables));
  }
  if (evidence.weights.size() != network.size()) throw UsageError("evidence does not match the network");
  std::vector<std::size_t> bit(network.size(), 0);
  for (std::size_t k = 0; k < m; ++k) bit[vars[k]] = k;

  struct Check {
    bool exactly_one;
    std::size_t child_bit;
    std::uint64_t parent_mask;
  };
  std::vector<Check> checks;
  for (std::size_t i = 0; i < network.size(); ++i) {
    const auto& node = network.node(i);
    if (node.cpt == CptKind::UniformPrior) continue;
    std::uint64_t mask = 0;
    for (auto p : node.parents) mask |= std::uint64_t{1} << bit[p];
    checks.push_back({node.cpt == CptKind::ExactlyOne, node.cpt == CptKind::ExactlyOne ? 0 : bit[i], mask});
  }

  std::vector<double> mass(m, 0.0);
  double z = 0.0;
  for (std::uint64_t x = 0; x < (std::uint64_t{1} << m); ++x) {
    bool consistent = true;
    for (const auto& c : checks) {
      if (c.exactly_one) {
        consistent = std::popcount(x & c.parent_mask) == 1;
      } else {
        consistent = (((x >> c.child_bit) & 1U) != 0) == ((x & c.parent_mask) != 0);
      }
      if (!consistent) break;
    }
    if (!consistent) continue;
    double w = 1.0;
    for (std::size_t k = 0; k < m; ++k) {
      const auto& e = evidence.weights[vars[k]];
      w *= ((x >> k) & 1U) ? e.if_true : e.if_false;
    }
    z += w;
    for (std::size_t k = 0; k < m; ++k) {
      if ((x >> k) & 1U) mass[k] += w;
    }
  }
  if (!(z > 0.0)) throw DataError("infeasible evidence: the constraints leave zero probability mass");
  std::vector<double> posterior(network.size(), 1.0);
  for (std::size_t k = 0; k < m; ++k) posterior[vars[k]] = mass[k] / z;
  return posterior;
}

CorrectedMarginals brute_force_posteriors(const LabelNetwork& network, const EvidenceModel& evidence) {
  return name_marginals(network, brute_force_node_posteriors(network, evidence));
}

CorrectedMarginals name_marginals(const LabelNetwork& network, std::span<const double> posteriors) {
  CorrectedMarginals out;
  for (auto i : network.evidence_nodes()) out[network.node(i).name] = posteriors[i];
  for (const auto& [alias, rep] : network.aliases()) out[alias] = posteriors[network.index_of(rep)];
  return out;
}

std::vector<std::string> check_consistency(const LabelNetwork& network, std::span<const double> posteriors,
                                           double tolerance) {
  std::vector<std::string> problems;
  auto describe = [&](std::size_t i) {
    std::ostringstream s;
    s.precision(17);
    s << network.node(i).name << '=' << posteriors[i];
    return s.str();
  };
  for (auto i : network.evidence_nodes()) {
    if (!(posteriors[i] > 0.0 && posteriors[i] < 1.0)) problems.push_back("posterior out of (0,1): " + describe(i));
  }
  for (std::size_t i = 0; i < network.size(); ++i) {
    const auto& node = network.node(i);
    if (node.cpt == CptKind::DeterministicOr) {
      double total = 0.0;
      for (auto p : node.parents) {
        total += posteriors[p];
        if (posteriors[i] < posteriors[p] - tolerance) {
          problems.push_back("entailment violated: " + describe(i) + " < " + describe(p));
        }
      }
      if (posteriors[i] > total + tolerance) problems.push_back("union bound violated at " + describe(i));
    } else if (node.cpt == CptKind::ExactlyOne) {
      double total = 0.0;
      for (auto p : node.parents) total += posteriors[p];
      if (std::abs(total - 1.0) > tolerance) {
        std::ostringstream s;
        s.precision(17);
        s << "exclusion group " << node.name << " sums to " << total;
        problems.push_back(s.str());
      }
    }
  }
  return problems;
}

}  // namespace entailnet

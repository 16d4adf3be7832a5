#include "entailnet/network.hpp"

#include <algorithm>
#include <set>

#include "entailnet/error.hpp"

namespace entailnet {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Label: return "label";
    case NodeKind::LeakEntail: return "leak_entail";
    case NodeKind::LeakExcl: return "leak_excl";
    case NodeKind::Constraint: return "constraint";
  }
  return "?";
}

std::string_view to_string(CptKind kind) {
  switch (kind) {
    case CptKind::UniformPrior: return "uniform_prior";
    case CptKind::DeterministicOr: return "deterministic_or";
    case CptKind::ExactlyOne: return "exactly_one";
  }
  return "?";
}

namespace {

NodeKind parse_node_kind(const std::string& s) {
  for (auto k : {NodeKind::Label, NodeKind::LeakEntail, NodeKind::LeakExcl, NodeKind::Constraint}) {
    if (to_string(k) == s) return k;
  }
  throw DataError("unknown node kind '" + s + "'");
}

CptKind parse_cpt_kind(const std::string& s) {
  for (auto k : {CptKind::UniformPrior, CptKind::DeterministicOr, CptKind::ExactlyOne}) {
    if (to_string(k) == s) return k;
  }
  throw DataError("unknown CPT kind '" + s + "'");
}

std::string join(std::span<const std::string> parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string entail_leak_name(std::string_view consequent) { return "leak__" + std::string(consequent); }

std::string excl_leak_name(std::span<const std::string> members) { return "leakx__" + join(members, '+'); }

std::string constraint_name(std::span<const std::string> members) { return "excl__" + join(members, '+'); }

LabelNetwork::LabelNetwork(std::vector<NetworkNode> nodes, std::map<std::string, std::string> aliases)
    : nodes_(std::move(nodes)), aliases_(std::move(aliases)) {
  const std::size_t n = nodes_.size();
  std::set<std::string_view> names;
  for (const auto& node : nodes_) {
    if (node.name.empty()) throw DataError("network node with empty name");
    if (!names.insert(node.name).second) throw DataError("duplicate network node '" + node.name + "'");
  }
  auto kids = std::vector<std::vector<std::size_t>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto p : nodes_[i].parents) {
      if (p >= n || p == i) throw DataError("node '" + nodes_[i].name + "' has an invalid parent index");
      kids[p].push_back(i);
    }
  }

  // Kahn's algorithm; anything left over sits on a cycle.
  std::vector<std::size_t> indegree(n);
  for (std::size_t i = 0; i < n; ++i) indegree[i] = nodes_[i].parents.size();
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  std::size_t seen = 0;
  while (!ready.empty()) {
    const std::size_t u = ready.back();
    ready.pop_back();
    ++seen;
    for (auto v : kids[u]) {
      if (--indegree[v] == 0) ready.push_back(v);
    }
  }
  if (seen != n) throw DataError("network contains a directed cycle");

  for (std::size_t i = 0; i < n; ++i) {
    const NetworkNode& node = nodes_[i];
    const auto fail = [&](const std::string& why) { throw DataError("node '" + node.name + "': " + why); };
    std::size_t leak_parents = 0;
    for (auto p : node.parents) {
      const NodeKind pk = nodes_[p].kind;
      if (pk == NodeKind::Constraint) fail("a constraint node cannot be a parent");
      if (pk == NodeKind::LeakEntail || pk == NodeKind::LeakExcl) ++leak_parents;
    }
    switch (node.kind) {
      case NodeKind::Label:
        if (node.observed) fail("label nodes are not observed");
        if (node.parents.empty()) {
          if (node.cpt != CptKind::UniformPrior) fail("root label needs a uniform prior");
        } else {
          if (node.cpt != CptKind::DeterministicOr) fail("entailment consequent needs a deterministic OR");
          if (leak_parents != 1) fail("entailment consequent needs exactly one leak parent");
          for (auto p : node.parents) {
            const auto& parent = nodes_[p];
            if (parent.kind == NodeKind::LeakExcl) fail("exclusion leak cannot feed a label");
            if (parent.kind == NodeKind::LeakEntail && (parent.targets.size() != 1 || parent.targets[0] != node.name)) {
              fail("leak parent '" + parent.name + "' belongs to another label");
            }
          }
        }
        break;
      case NodeKind::LeakEntail:
      case NodeKind::LeakExcl:
        if (node.cpt != CptKind::UniformPrior || !node.parents.empty()) fail("leak nodes are uniform-prior roots");
        if (node.observed) fail("leak nodes are not observed");
        if (kids[i].size() != 1) fail("a leak node must have exactly one child");
        if (node.kind == NodeKind::LeakEntail && nodes_[kids[i][0]].kind != NodeKind::Label) {
          fail("entailment leak must feed a label");
        }
        if (node.kind == NodeKind::LeakExcl && nodes_[kids[i][0]].kind != NodeKind::Constraint) {
          fail("exclusion leak must feed a constraint");
        }
        break;
      case NodeKind::Constraint:
        if (node.cpt != CptKind::ExactlyOne) fail("constraint needs an exactly-one CPT");
        if (!node.observed) fail("constraint nodes are observed true");
        if (!kids[i].empty()) fail("constraint nodes have no children");
        if (leak_parents != 1 || node.parents.size() < 3) fail("constraint needs two or more members and one leak");
        for (auto p : node.parents) {
          if (nodes_[p].kind == NodeKind::LeakEntail) fail("entailment leak cannot feed a constraint");
        }
        break;
    }
  }

  for (const auto& [member, rep] : aliases_) {
    if (find(member)) throw DataError("alias '" + member + "' is also a node");
    auto r = find(rep);
    if (!r || nodes_[*r].kind != NodeKind::Label) throw DataError("alias '" + member + "' points to no label node");
  }
}

std::optional<std::size_t> LabelNetwork::find(std::string_view name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t LabelNetwork::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw DataError("unknown network node '" + std::string(name) + "'");
}

std::vector<std::pair<std::size_t, std::size_t>> LabelNetwork::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (auto p : nodes_[i].parents) out.emplace_back(p, i);
  }
  return out;
}

std::vector<std::vector<std::size_t>> LabelNetwork::children() const {
  std::vector<std::vector<std::size_t>> out(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (auto p : nodes_[i].parents) out[p].push_back(i);
  }
  return out;
}

std::vector<std::size_t> LabelNetwork::evidence_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind != NodeKind::Constraint) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> LabelNetwork::leak_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == NodeKind::LeakEntail || nodes_[i].kind == NodeKind::LeakExcl) out.push_back(i);
  }
  return out;
}

std::size_t LabelNetwork::constraint_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.kind == NodeKind::Constraint; }));
}

std::size_t LabelNetwork::entailment_consequent_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) {
    return n.kind == NodeKind::Label && n.cpt == CptKind::DeterministicOr;
  }));
}

LabelNetwork build_network(const RelationshipSet& relationships, std::span<const std::string> label_names) {
  std::set<std::string> known;
  for (const auto& l : label_names) {
    if (!known.insert(l).second) throw DataError("duplicate label name '" + l + "'");
  }
  RelationshipSet rel = relationships;
  if (rel.labels.empty()) rel.labels.assign(label_names.begin(), label_names.end());
  auto require_known = [&](const std::string& l) {
    if (!known.contains(l)) throw DataError("relationship references unknown label '" + l + "'");
  };
  for (const auto& e : rel.positive_entailments) {
    require_known(e.antecedent);
    require_known(e.consequent);
  }
  for (const auto& x : rel.exclusions) {
    for (const auto& l : x.labels) require_known(l);
  }
  for (const auto& p : rel.equivalences) {
    require_known(p.first);
    require_known(p.second);
  }
  for (const auto& l : label_names) {
    if (std::find(rel.labels.begin(), rel.labels.end(), l) == rel.labels.end()) rel.labels.push_back(l);
  }

  const CollapsedRelationships collapsed = collapse_and_reduce(rel);
  auto rep = [&](const std::string& l) { return collapsed.representative.at(l); };

  std::vector<NetworkNode> nodes;
  std::map<std::string, std::string> aliases;
  std::map<std::string, std::size_t> index;
  for (const auto& l : label_names) {
    if (rep(l) != l) {
      aliases[l] = rep(l);
      continue;
    }
    index[l] = nodes.size();
    nodes.push_back(NetworkNode{l, NodeKind::Label, CptKind::UniformPrior, {}, false, {}});
  }

  std::map<std::string, std::vector<std::string>> parents_of;
  for (const auto& e : collapsed.entailments) parents_of[e.consequent].push_back(e.antecedent);
  for (auto& [consequent, parents] : parents_of) {
    std::sort(parents.begin(), parents.end());
    const std::size_t leak = nodes.size();
    nodes.push_back(NetworkNode{entail_leak_name(consequent), NodeKind::LeakEntail, CptKind::UniformPrior, {}, false,
                                {consequent}});
    NetworkNode& child = nodes[index.at(consequent)];
    child.cpt = CptKind::DeterministicOr;
    for (const auto& p : parents) child.parents.push_back(index.at(p));
    child.parents.push_back(leak);
  }

  std::vector<std::size_t> excl_leaks;
  for (const auto& x : collapsed.exclusions) {
    excl_leaks.push_back(nodes.size());
    nodes.push_back(NetworkNode{excl_leak_name(x.labels), NodeKind::LeakExcl, CptKind::UniformPrior, {}, false, x.labels});
  }
  for (std::size_t k = 0; k < collapsed.exclusions.size(); ++k) {
    const auto& x = collapsed.exclusions[k];
    NetworkNode c{constraint_name(x.labels), NodeKind::Constraint, CptKind::ExactlyOne, {}, true, x.labels};
    for (const auto& m : x.labels) c.parents.push_back(index.at(m));
    c.parents.push_back(excl_leaks[k]);
    nodes.push_back(std::move(c));
  }
  return LabelNetwork(std::move(nodes), std::move(aliases));
}

LabelMatrix generate_leak_labels(const LabelMatrix& labels, const LabelNetwork& network) {
  LabelMatrix out = labels;
  const std::size_t words = words_for(labels.n_instances());
  auto column_of = [&](const std::string& name) {
    auto j = labels.find(name);
    if (!j) throw DataError("network references label '" + name + "' absent from the label matrix");
    return labels.column(*j);
  };
  for (auto li : network.leak_nodes()) {
    const NetworkNode& leak = network.node(li);
    BitColumn any_parent(words, 0);
    BitColumn bits(words, 0);
    if (leak.kind == NodeKind::LeakEntail) {
      const NetworkNode& child = network.node(network.index_of(leak.targets.at(0)));
      for (auto p : child.parents) {
        if (p == li) continue;
        const auto col = column_of(network.node(p).name);
        for (std::size_t w = 0; w < words; ++w) any_parent[w] |= col[w];
      }
      const auto consequent = column_of(child.name);
      for (std::size_t w = 0; w < words; ++w) bits[w] = consequent[w] & ~any_parent[w];
    } else {
      for (const auto& m : leak.targets) {
        const auto col = column_of(m);
        for (std::size_t w = 0; w < words; ++w) any_parent[w] |= col[w];
      }
      for (std::size_t w = 0; w < words; ++w) bits[w] = ~any_parent[w];
    }
    out.append_column(leak.name, std::move(bits));
  }
  return out;
}

LabelMatrix generate_leak_labels(const LabelMatrix& labels, const RelationshipSet& relationships) {
  return generate_leak_labels(labels, build_network(relationships, labels.names()));
}

nlohmann::json to_json(const LabelNetwork& network) {
  using nlohmann::json;
  json j;
  j["nodes"] = json::array();
  for (std::size_t i = 0; i < network.size(); ++i) {
    const auto& n = network.node(i);
    json node = {{"id", i},
                 {"name", n.name},
                 {"kind", to_string(n.kind)},
                 {"cpt", to_string(n.cpt)},
                 {"observed", n.observed}};
    if (!n.targets.empty()) node["targets"] = n.targets;
    j["nodes"].push_back(std::move(node));
  }
  j["edges"] = json::array();
  for (auto [p, c] : network.edges()) {
    j["edges"].push_back({{"parent", network.node(p).name}, {"child", network.node(c).name}});
  }
  j["aliases"] = network.aliases();
  return j;
}

LabelNetwork network_from_json(const nlohmann::json& j) {
  try {
    std::vector<NetworkNode> nodes;
    std::map<std::string, std::size_t> index;
    for (const auto& jn : j.at("nodes")) {
      NetworkNode n;
      n.name = jn.at("name").get<std::string>();
      n.kind = parse_node_kind(jn.at("kind").get<std::string>());
      n.cpt = parse_cpt_kind(jn.at("cpt").get<std::string>());
      n.observed = jn.value("observed", false);
      if (jn.contains("targets")) n.targets = jn.at("targets").get<std::vector<std::string>>();
      if (!index.emplace(n.name, nodes.size()).second) throw DataError("duplicate network node '" + n.name + "'");
      nodes.push_back(std::move(n));
    }
    for (const auto& e : j.at("edges")) {
      const auto parent = e.at("parent").get<std::string>();
      const auto child = e.at("child").get<std::string>();
      auto p = index.find(parent);
      auto c = index.find(child);
      if (p == index.end() || c == index.end()) throw DataError("edge " + parent + " -> " + child + " names an unknown node");
      nodes[c->second].parents.push_back(p->second);
    }
    std::map<std::string, std::string> aliases;
    if (j.contains("aliases")) aliases = j.at("aliases").get<std::map<std::string, std::string>>();
    return LabelNetwork(std::move(nodes), std::move(aliases));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed network JSON: ") + e.what());
  }
}

}  // namespace entailnet

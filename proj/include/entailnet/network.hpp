#pragma once

// Bayesian network encoding of discovered relationships. Real labels are
// nodes; an entailment consequent gets a deterministic OR over its reduced
// parents plus one leak parent; an exclusion set gets an observed
// exactly-one constraint node over its members plus one leak parent. Leak
// nodes are virtual labels that soak up causes the discovered structure
// misses.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "entailnet/dataset.hpp"
#include "entailnet/discovery.hpp"
#include "json.hpp"

namespace entailnet {

enum class NodeKind { Label, LeakEntail, LeakExcl, Constraint };
enum class CptKind { UniformPrior, DeterministicOr, ExactlyOne };

std::string_view to_string(NodeKind kind);
std::string_view to_string(CptKind kind);

struct NetworkNode {
  std::string name;
  NodeKind kind = NodeKind::Label;
  CptKind cpt = CptKind::UniformPrior;
  std::vector<std::size_t> parents;  // node indices, sorted by name with any leak last
  bool observed = false;             // constraint nodes are observed true
  /// LeakEntail: the consequent label. LeakExcl / Constraint: the exclusion members.
  std::vector<std::string> targets;

  bool operator==(const NetworkNode&) const = default;
};

class LabelNetwork {
 public:
  LabelNetwork() = default;

  /// Validates acyclicity, parent indices, and the structural rules for each
  /// node kind. `aliases` maps collapsed equivalent labels to their
  /// representative node. Throws DataError.
  LabelNetwork(std::vector<NetworkNode> nodes, std::map<std::string, std::string> aliases = {});

  const std::vector<NetworkNode>& nodes() const { return nodes_; }
  const NetworkNode& node(std::size_t i) const { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  const std::map<std::string, std::string>& aliases() const { return aliases_; }

  /// (parent, child) index pairs in node order.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
  std::vector<std::vector<std::size_t>> children() const;

  /// Nodes that receive soft evidence: everything except constraints.
  std::vector<std::size_t> evidence_nodes() const;
  std::vector<std::size_t> leak_nodes() const;
  std::size_t constraint_count() const;
  std::size_t entailment_consequent_count() const;

  bool operator==(const LabelNetwork&) const = default;

 private:
  std::vector<NetworkNode> nodes_;
  std::map<std::string, std::string> aliases_;
};

std::string entail_leak_name(std::string_view consequent);
std::string excl_leak_name(std::span<const std::string> members);
std::string constraint_name(std::span<const std::string> members);

/// Node order: label nodes in label_names order (equivalent labels collapsed
/// onto their representative), entailment leaks by consequent name,
/// exclusion leaks, then constraint nodes, the last two in set order.
LabelNetwork build_network(const RelationshipSet& relationships, std::span<const std::string> label_names);

/// Appends one column per leak node (network order) valued from the real
/// columns: an entailment leak is true where its consequent is true and every
/// discovered parent is false; an exclusion leak is true where every member is
/// false.
LabelMatrix generate_leak_labels(const LabelMatrix& labels, const LabelNetwork& network);
LabelMatrix generate_leak_labels(const LabelMatrix& labels, const RelationshipSet& relationships);

nlohmann::json to_json(const LabelNetwork& network);
LabelNetwork network_from_json(const nlohmann::json& j);

}  // namespace entailnet

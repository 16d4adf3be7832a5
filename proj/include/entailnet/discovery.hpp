#pragma once

// Mining of deterministic label relationships from a label matrix: the four
// pairwise kinds read off 2x2 contingency tables, levelwise growth of maximal
// mutually exclusive label sets, and reduction of the entailment graph.

#include <chrono>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "entailnet/dataset.hpp"
#include "json.hpp"

namespace entailnet {

/// Co-occurrence counts of labels a and b over one split.
struct ContingencyTable {
  std::size_t both = 0;     // a and b
  std::size_t b_only = 0;   // not a, b
  std::size_t a_only = 0;   // a, not b
  std::size_t neither = 0;  // neither

  std::size_t total() const { return both + b_only + a_only + neither; }
  bool operator==(const ContingencyTable&) const = default;
};

/// antecedent -> consequent: every instance with the antecedent has the consequent.
/// Support is the antecedent's positive count.
struct PositiveEntailment {
  std::string antecedent;
  std::string consequent;
  std::size_t support = 0;

  auto operator<=>(const PositiveEntailment&) const = default;
};

/// Labels of which no two co-occur. Members sorted; support is the sum of the
/// members' positive counts.
struct Exclusion {
  std::vector<std::string> labels;
  std::size_t support = 0;

  auto operator<=>(const Exclusion&) const = default;
};

/// A coexhaustive (every instance has at least one) or equivalent label pair,
/// first < second.
struct LabelPair {
  std::string first;
  std::string second;
  std::size_t support = 0;

  auto operator<=>(const LabelPair&) const = default;
};

struct PairwiseRelations {
  std::vector<PositiveEntailment> entailments;
  std::vector<Exclusion> exclusions;  // pairs only
  std::vector<LabelPair> coexhaustions;
  std::vector<LabelPair> equivalences;
};

/// Everything discovered on one split. Entailments are the full discovered
/// set; the network layer collapses equivalences and reduces them.
struct RelationshipSet {
  std::vector<std::string> labels;
  std::vector<PositiveEntailment> positive_entailments;
  std::vector<Exclusion> exclusions;
  std::vector<LabelPair> coexhaustions;
  std::vector<LabelPair> equivalences;
  std::size_t minsup_entail = 2;
  std::size_t minsup_excl = 2;

  bool operator==(const RelationshipSet&) const = default;
};

ContingencyTable build_contingency(const LabelMatrix& labels, std::string_view a, std::string_view b);
ContingencyTable build_contingency(const LabelMatrix& labels, std::size_t a, std::size_t b);

/// All pairwise relationships in canonical (lexicographic) order.
///   entailment a->b  iff a_only == 0 and both >= minsup_entail
///   exclusion {a,b}  iff both == 0 and a_only + b_only >= minsup_excl
///   coexhaustion     iff neither == 0 (support a_only + b_only, unfiltered)
///   equivalence      iff a_only == b_only == 0 and both >= minsup_entail
/// Pair counting is spread over `threads` workers; output does not depend on it.
PairwiseRelations discover_pairwise(const LabelMatrix& labels, std::size_t minsup_entail,
                                    std::size_t minsup_excl, std::size_t threads = 1);

struct MiningBudget {
  std::optional<std::chrono::steady_clock::time_point> deadline;
  /// Stop once more than this many maximal sets have been found.
  std::optional<std::size_t> max_sets;
};

struct MiningOutcome {
  enum class Status { Complete, TimedOut, TooMany };
  Status status = Status::Complete;
  std::vector<Exclusion> sets;  // valid only when Complete
};

/// Grows mutually exclusive sets level by level from the given pairs (a
/// k-set extends to a (k+1)-set only when the new member is paired with every
/// existing one) and keeps the maximal ones whose support reaches minsup_excl.
MiningOutcome mine_maximal_exclusions(std::span<const Exclusion> pairwise_exclusions,
                                      const std::map<std::string, std::size_t>& positive_counts,
                                      std::size_t minsup_excl, const MiningBudget& budget);

std::vector<Exclusion> mine_maximal_exclusions(std::span<const Exclusion> pairwise_exclusions,
                                               const std::map<std::string, std::size_t>& positive_counts,
                                               std::size_t minsup_excl);

/// Minimal edge set with the same reachability. Throws DataError naming the
/// cycle if the edges are not acyclic.
std::vector<PositiveEntailment> transitive_reduction(std::span<const PositiveEntailment> entailments);

struct EscalationResult {
  std::size_t minsup = 0;
  std::vector<Exclusion> exclusions;
  std::vector<std::size_t> attempted;
};

/// Doubles the exclusion support from `start` until mining finishes within
/// cap_time and yields at most cap_relationships sets.
EscalationResult escalate_minsup(const LabelMatrix& labels, std::size_t start, std::size_t cap_relationships,
                                 std::chrono::milliseconds cap_time);

struct DiscoveryOptions {
  std::size_t minsup_entail = 2;
  std::size_t minsup_excl = 2;
  bool escalate = false;
  std::size_t escalate_cap = 50;
  std::chrono::milliseconds escalate_time{60'000};
  std::size_t threads = 1;
};

RelationshipSet discover(const LabelMatrix& labels, const DiscoveryOptions& options);

/// Equivalence classes collapsed onto their lexicographically smallest member.
struct CollapsedRelationships {
  std::map<std::string, std::string> representative;  // every label -> its representative
  std::vector<PositiveEntailment> entailments;          // between representatives, reduced
  std::vector<Exclusion> exclusions;                    // between representatives, deduplicated
};

CollapsedRelationships collapse_and_reduce(const RelationshipSet& relationships);

nlohmann::json to_json(const RelationshipSet& relationships);
RelationshipSet relationships_from_json(const nlohmann::json& j);

}  // namespace entailnet

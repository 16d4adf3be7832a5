#pragma once

// Exact posterior marginals on a LabelNetwork under per-node virtual
// evidence, with every constraint node observed true.
//
// The engine eliminates variables in min-fill order (bucket elimination).
// Each bucket's outgoing message goes to the bucket of the next variable to
// be eliminated in its scope, so the buckets form a tree; a second,
// top-down pass over that tree yields every node's marginal from one
// elimination instead of one elimination per query.

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "entailnet/network.hpp"

namespace entailnet {

/// Per-instance probability estimate for each evidence node (real labels and
/// leaks), keyed by node or alias name.
using PredictionVector = std::map<std::string, double>;

/// Posterior P(label = true) keyed by node name; aliases are copied from
/// their representative.
using CorrectedMarginals = std::map<std::string, double>;

constexpr double kDefaultClampEpsilon = 1e-6;

/// Likelihood pair of a virtual-evidence finding.
struct VirtualEvidence {
  double if_true = 1.0;
  double if_false = 1.0;
};

/// Indexed by network node; entries for constraint nodes are ignored because
/// constraints are always observed true.
struct EvidenceModel {
  std::vector<VirtualEvidence> weights;
};

/// (clamp(p), 1 - clamp(p)) with clamp(p) = min(max(p, eps), 1 - eps).
/// Throws DataError for p outside [0, 1] or NaN.
VirtualEvidence clamp_evidence(double p, double clamp_epsilon);

/// Every evidence node needs an entry. Entries for aliases (collapsed
/// equivalent labels) are ignored: the representative speaks for its class.
EvidenceModel attach_evidence(const LabelNetwork& network, const PredictionVector& predictions,
                              double clamp_epsilon = kDefaultClampEpsilon);

struct EliminationOrder {
  std::vector<std::size_t> nodes;  // network node indices, first eliminated first
  std::size_t induced_width = 0;   // largest neighbour count at elimination time
};

/// Greedy minimum fill-in over the moral graph of the evidence nodes,
/// ties broken by node name.
EliminationOrder min_fill_order(const LabelNetwork& network);

/// Induced width of an arbitrary elimination order over the evidence nodes.
std::size_t induced_width(const LabelNetwork& network, std::span<const std::size_t> order);

class InferenceEngine {
 public:
  /// Largest bucket (in variables) the engine agrees to tabulate.
  static constexpr std::size_t kMaxBucketScope = 22;

  explicit InferenceEngine(LabelNetwork network);
  ~InferenceEngine();
  InferenceEngine(InferenceEngine&&) noexcept;
  InferenceEngine& operator=(InferenceEngine&&) noexcept;

  const LabelNetwork& network() const;
  const EliminationOrder& order() const;
  std::size_t max_bucket_scope() const;

  /// P(node = true | evidence, constraints) per node index; constraint
  /// entries are 1. Throws DataError when the evidence has zero probability.
  /// Safe to call concurrently.
  std::vector<double> posteriors(const EvidenceModel& evidence) const;

  CorrectedMarginals marginals(const EvidenceModel& evidence) const;

 private:
  struct Compiled;
  std::unique_ptr<Compiled> compiled_;
};

CorrectedMarginals correct_marginals(const LabelNetwork& network, const EvidenceModel& evidence);

/// Full joint enumeration over all evidence nodes; reference for tests.
/// Throws UsageError past kMaxBruteForceVariables.
constexpr std::size_t kMaxBruteForceVariables = 22;
std::vector<double> brute_force_node_posteriors(const LabelNetwork& network, const EvidenceModel& evidence);
CorrectedMarginals brute_force_posteriors(const LabelNetwork& network, const EvidenceModel& evidence);

/// Named map from a per-node posterior vector, aliases included.
CorrectedMarginals name_marginals(const LabelNetwork& network, std::span<const double> posteriors);

/// Checks the relationships the posteriors must respect: OR children dominate
/// each parent and are bounded by the parents' sum, each constraint's parents
/// sum to one, and every posterior lies strictly inside (0, 1). Returns one
/// message per violation.
std::vector<std::string> check_consistency(const LabelNetwork& network, std::span<const double> posteriors,
                                           double tolerance = 1e-9);

}  // namespace entailnet

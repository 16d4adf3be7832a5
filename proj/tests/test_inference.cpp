#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "entailnet/discovery.hpp"
#include "entailnet/error.hpp"
#include "entailnet/inference.hpp"
#include "oracles.hpp"

using namespace entailnet;

namespace {

LabelNetwork toy_network() { return build_network(discover(oracle::toy_labels(), {}), oracle::toy_names()); }

LabelNetwork chain_network() {
  RelationshipSet rel;
  rel.labels = {"A", "B"};
  rel.positive_entailments.push_back({"A", "B", 2});
  return build_network(rel, rel.labels);
}

LabelNetwork pair_exclusion_network() {
  RelationshipSet rel;
  rel.labels = {"A", "E"};
  rel.exclusions.push_back({{"A", "E"}, 2});
  return build_network(rel, rel.labels);
}

double at(const LabelNetwork& net, const std::vector<double>& post, std::string_view name) {
  return post[net.index_of(name)];
}

}  // namespace

TEST_SUITE("inference") {
  TEST_CASE("clamp") {
    auto v = clamp_evidence(0.0, 1e-6);
    CHECK(v.if_true == 1e-6);
    CHECK(v.if_false == 1.0 - 1e-6);
    CHECK(clamp_evidence(1.0, 1e-6).if_true == 1.0 - 1e-6);
    CHECK(clamp_evidence(0.3, 1e-6).if_true == 0.3);
    CHECK_THROWS_AS(clamp_evidence(1.2, 1e-6), DataError);
    CHECK_THROWS_AS(clamp_evidence(std::nan(""), 1e-6), DataError);
    CHECK_THROWS_AS(clamp_evidence(0.5, 0.7), UsageError);
  }

  TEST_CASE("entailment chain posteriors") {
    auto net = chain_network();
    auto ev = attach_evidence(net, {{"A", 0.4}, {"leak__B", 0.35}, {"B", 0.25}});
    auto post = InferenceEngine(net).posteriors(ev);
    // hand enumeration over (A, leak): weights .2925 .0525 .065 .035
    CHECK(at(net, post, "A") == doctest::Approx(0.1 / 0.445).epsilon(1e-12));
    CHECK(at(net, post, "leak__B") == doctest::Approx(0.0875 / 0.445).epsilon(1e-12));
    CHECK(at(net, post, "B") == doctest::Approx(0.1525 / 0.445).epsilon(1e-12));
    CHECK(at(net, post, "A") == doctest::Approx(0.2247).epsilon(1e-3));
    CHECK(at(net, post, "B") == doctest::Approx(0.3427).epsilon(1e-3));
  }

  TEST_CASE("pairwise exclusion posteriors") {
    auto net = pair_exclusion_network();
    auto ev = attach_evidence(net, {{"A", 0.3}, {"E", 0.85}, {"leakx__A+E", 0.3}});
    auto post = InferenceEngine(net).posteriors(ev);
    const double z = 0.0315 + 0.4165 + 0.0315;
    CHECK(at(net, post, "A") == doctest::Approx(0.0315 / z).epsilon(1e-12));
    CHECK(at(net, post, "E") == doctest::Approx(0.4165 / z).epsilon(1e-12));
    CHECK(at(net, post, "leakx__A+E") == doctest::Approx(0.0315 / z).epsilon(1e-12));
    CHECK(at(net, post, "A") + at(net, post, "E") + at(net, post, "leakx__A+E") == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("toy network on a full evidence row") {
    auto net = toy_network();
    PredictionVector before{{"A", .4},  {"leak__B", .35}, {"B", .25}, {"D", .6},           {"leak__C", .01},
                            {"C", .2},  {"F", .3},        {"E", .85}, {"leakx__A+E+F", .3}};
    auto ev = attach_evidence(net, before);
    auto post = InferenceEngine(net).posteriors(ev);
    auto ref = oracle::enumerate_posteriors(net, ev);
    for (std::size_t i = 0; i < net.size(); ++i) CHECK(post[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    CHECK(check_consistency(net, post).empty());
    const double group = at(net, post, "A") + at(net, post, "E") + at(net, post, "F") + at(net, post, "leakx__A+E+F");
    CHECK(group == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(at(net, post, "E") == doctest::Approx(0.85).epsilon(0.02));
    CHECK(at(net, post, "A") < 0.05);
  }

  TEST_CASE("alias predictions are ignored") {
    auto m = LabelMatrix::from_rows({"Q", "P", "R"}, {{1, 1, 1}, {1, 1, 1}, {0, 0, 1}, {0, 0, 0}});
    auto net = build_network(discover(m, {}), m.names());
    PredictionVector p{{"P", 0.7}, {"R", 0.4}, {"leak__R", 0.2}};
    auto a = attach_evidence(net, p);
    p["Q"] = 0.01;
    auto b = attach_evidence(net, p);
    for (std::size_t i = 0; i < net.size(); ++i) CHECK(a.weights[i].if_true == b.weights[i].if_true);
    auto named = correct_marginals(net, a);
    CHECK(named.at("Q") == named.at("P"));
    PredictionVector missing{{"P", 0.7}, {"R", 0.4}};
    CHECK_THROWS_AS(attach_evidence(net, missing), DataError);
  }

  TEST_CASE("random networks agree with enumeration") {
    std::mt19937_64 rng(2024);
    int checked = 0;
    while (checked < 150) {
      auto rel = oracle::random_structure(rng, 2 + rng() % 7, 0.3, 3);
      auto net = build_network(rel, rel.labels);
      if (oracle::free_count(net) > 14) continue;
      InferenceEngine engine(net);
      for (int k = 0; k < 3; ++k) {
        auto ev = oracle::random_evidence(rng, net);
        auto post = engine.posteriors(ev);
        auto ref = oracle::enumerate_posteriors(net, ev);
        for (std::size_t i = 0; i < net.size(); ++i) CHECK(std::abs(post[i] - ref[i]) <= 1e-9);
        auto lib_ref = brute_force_node_posteriors(net, ev);
        for (std::size_t i = 0; i < net.size(); ++i) CHECK(std::abs(lib_ref[i] - ref[i]) <= 1e-12);
        CHECK(check_consistency(net, post).empty());
      }
      ++checked;
    }
  }

  TEST_CASE("raising a node's own evidence never lowers its posterior") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 60; ++trial) {
      auto rel = oracle::random_structure(rng, 3 + rng() % 5, 0.35, 2);
      auto net = build_network(rel, rel.labels);
      InferenceEngine engine(net);
      auto ev = oracle::random_evidence(rng, net);
      const auto base = engine.posteriors(ev);
      for (auto i : net.evidence_nodes()) {
        auto up = ev;
        const double p = up.weights[i].if_true;
        up.weights[i] = clamp_evidence(std::min(1.0, p + 0.5 * (1.0 - p)), kDefaultClampEpsilon);
        CHECK(engine.posteriors(up)[i] >= base[i] - 1e-12);
      }
    }
  }

  TEST_CASE("isolated nodes keep their clamped evidence") {
    RelationshipSet rel;
    rel.labels = {"A", "B", "C"};
    rel.positive_entailments.push_back({"A", "B", 2});
    auto net = build_network(rel, rel.labels);
    auto ev = attach_evidence(net, {{"A", .2}, {"B", .9}, {"leak__B", .5}, {"C", 0.0}});
    auto post = InferenceEngine(net).posteriors(ev);
    CHECK(at(net, post, "C") == doctest::Approx(1e-6).epsilon(1e-9));
  }

  TEST_CASE("min-fill keeps a star narrow") {
    RelationshipSet rel;
    rel.labels = {"A"};
    for (int i = 0; i < 8; ++i) {
      rel.labels.push_back("C" + std::to_string(i));
      rel.positive_entailments.push_back({"A", rel.labels.back(), 2});
    }
    auto net = build_network(rel, rel.labels);
    auto order = min_fill_order(net);
    CHECK(order.nodes.size() == net.evidence_nodes().size());
    CHECK(order.induced_width == 2);
    CHECK(oracle::induced_width(net, order.nodes) == 2);
    const auto hub = std::find(order.nodes.begin(), order.nodes.end(), net.index_of("A")) - order.nodes.begin();
    CHECK(static_cast<std::size_t>(hub) + 3 >= order.nodes.size());
  }

  TEST_CASE("min-fill reaches the optimal width on the toy network") {
    auto net = toy_network();
    auto order = min_fill_order(net);
    std::vector<std::size_t> perm = net.evidence_nodes();
    std::size_t best = perm.size();
    do {
      best = std::min(best, oracle::induced_width(net, perm));
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(order.induced_width == best);
    CHECK(oracle::induced_width(net, order.nodes) == order.induced_width);
    CHECK(order.induced_width <= 4);
  }

  TEST_CASE("induced width agrees with the oracle on arbitrary orders") {
    std::mt19937_64 rng(5150);
    for (int trial = 0; trial < 40; ++trial) {
      auto rel = oracle::random_structure(rng, 3 + rng() % 6, 0.3, 3);
      auto net = build_network(rel, rel.labels);
      auto order = net.evidence_nodes();
      std::shuffle(order.begin(), order.end(), rng);
      CHECK(induced_width(net, order) == oracle::induced_width(net, order));
    }
  }

  TEST_CASE("order must be a permutation") {
    auto net = toy_network();
    std::vector<std::size_t> short_order{0, 1};
    CHECK_THROWS_AS(induced_width(net, short_order), UsageError);
  }

  TEST_CASE("infeasible evidence") {
    auto net = pair_exclusion_network();
    auto ev = attach_evidence(net, {{"A", 0.0}, {"E", 0.0}, {"leakx__A+E", 0.0}}, 0.0);
    CHECK_THROWS_AS(InferenceEngine(net).posteriors(ev), DataError);
  }

  TEST_CASE("overly wide factors are refused") {
    RelationshipSet rel;
    Exclusion big;
    for (int i = 0; i < 24; ++i) {
      rel.labels.push_back("L" + std::to_string(100 + i));
      big.labels.push_back(rel.labels.back());
    }
    big.support = 2;
    rel.exclusions.push_back(big);
    auto net = build_network(rel, rel.labels);
    CHECK_THROWS_AS(InferenceEngine{net}, DataError);
  }

  TEST_CASE("consistency checker flags violations") {
    auto net = chain_network();
    std::vector<double> post(net.size(), 0.5);
    post[net.index_of("A")] = 0.6;
    post[net.index_of("B")] = 0.5;
    CHECK(!check_consistency(net, post).empty());
    auto excl = pair_exclusion_network();
    std::vector<double> p2(excl.size(), 0.5);
    CHECK(!check_consistency(excl, p2).empty());
    std::vector<double> p3(net.size(), 1.0);
    CHECK(!check_consistency(net, p3).empty());
  }
  TEST_CASE("single root reproduces its evidence") {
    RelationshipSet rel;
    rel.labels = {"A"};
    auto net = build_network(rel, rel.labels);
    auto ev = attach_evidence(net, {{"A", 0.7}});
    CHECK(ev.weights[0].if_true == 0.7);
    CHECK(ev.weights[0].if_false == doctest::Approx(0.3));
    CHECK(InferenceEngine(net).posteriors(ev)[0] == doctest::Approx(0.7).epsilon(1e-15));
  }

  TEST_CASE("missing evidence names the node") {
    auto net = chain_network();
    try {
      attach_evidence(net, {{"A", 0.4}, {"B", 0.25}});
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("leak__B") != std::string::npos);
    }
  }

  TEST_CASE("near-zero antecedent evidence still sits below its consequent") {
    auto net = chain_network();
    auto ev = attach_evidence(net, {{"A", 0.0}, {"leak__B", 0.5}, {"B", 0.5}});
    auto post = InferenceEngine(net).posteriors(ev);
    CHECK(at(net, post, "A") < at(net, post, "B"));
  }

  TEST_CASE("a confident member takes the whole exclusion group") {
    auto net = build_network(discover(oracle::toy_labels(), {}), oracle::toy_names());
    PredictionVector p{{"A", 0.0}, {"leak__B", 0.5}, {"B", 0.5}, {"D", 0.5}, {"leak__C", 0.5},
                       {"C", 0.5}, {"F", 0.0},       {"E", 1.0}, {"leakx__A+E+F", 0.0}};
    auto post = InferenceEngine(net).posteriors(attach_evidence(net, p));
    CHECK(at(net, post, "E") > 1.0 - 1e-5);
  }

  TEST_CASE("isolated nodes are ordered by name") {
    RelationshipSet rel;
    rel.labels = {"d", "b", "c", "a"};
    auto net = build_network(rel, rel.labels);
    auto order = min_fill_order(net);
    std::vector<std::string> names;
    for (auto i : order.nodes) names.push_back(net.node(i).name);
    CHECK(names == std::vector<std::string>{"a", "b", "c", "d"});
    CHECK(order.induced_width == 0);
  }
}

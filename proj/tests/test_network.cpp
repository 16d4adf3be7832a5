#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "entailnet/discovery.hpp"
#include "entailnet/error.hpp"
#include "entailnet/network.hpp"
#include "oracles.hpp"

using namespace entailnet;

namespace {

LabelNetwork toy_network() {
  const auto names = oracle::toy_names();
  return build_network(discover(oracle::toy_labels(), {}), names);
}

std::set<std::string> parent_names(const LabelNetwork& net, std::string_view name) {
  std::set<std::string> out;
  for (auto p : net.node(net.index_of(name)).parents) out.insert(net.node(p).name);
  return out;
}

}  // namespace

TEST_SUITE("network") {
  TEST_CASE("toy network equals the stored golden file") {
    std::ifstream in(ENTAILNET_TEST_DATA "/toy_network.json");
    REQUIRE(in);
    auto golden = nlohmann::json::parse(in);
    CHECK(to_json(toy_network()) == golden);
    CHECK(network_from_json(golden) == toy_network());
  }

  TEST_CASE("toy network structure") {
    auto net = toy_network();
    std::set<std::string> names;
    for (const auto& n : net.nodes()) names.insert(n.name);
    CHECK(names == std::set<std::string>{"A", "B", "C", "D", "E", "F", "leak__B", "leak__C", "leakx__A+E+F",
                                         "excl__A+E+F"});
    CHECK(parent_names(net, "C") == std::set<std::string>{"B", "D", "leak__C"});
    CHECK(parent_names(net, "B") == std::set<std::string>{"A", "leak__B"});
    CHECK(parent_names(net, "excl__A+E+F") == std::set<std::string>{"A", "E", "F", "leakx__A+E+F"});
    CHECK(net.node(net.index_of("excl__A+E+F")).observed);
    CHECK(net.node(net.index_of("C")).cpt == CptKind::DeterministicOr);
    CHECK(net.constraint_count() == 1);
    CHECK(net.leak_nodes().size() == 3);
    CHECK(net.evidence_nodes().size() == 9);
    CHECK(net.entailment_consequent_count() == 2);
    // the leak parent comes last
    CHECK(net.node(net.node(net.index_of("C")).parents.back()).name == "leak__C");
  }

  TEST_CASE("toy leak columns") {
    auto net = toy_network();
    auto all = generate_leak_labels(oracle::toy_labels(), net);
    REQUIRE(all.n_labels() == 9);
    auto rows_true = [&](std::string_view name) {
      std::vector<std::size_t> out;
      const auto j = all.index_of(name);
      for (std::size_t r = 0; r < all.n_instances(); ++r)
        if (all.get(r, j)) out.push_back(r + 1);
      return out;
    };
    CHECK(rows_true("leak__B") == std::vector<std::size_t>{4, 6});
    CHECK(rows_true("leak__C") == std::vector<std::size_t>{9});
    CHECK(rows_true("leakx__A+E+F") == std::vector<std::size_t>{9});
    CHECK(generate_leak_labels(oracle::toy_labels(), discover(oracle::toy_labels(), {})) == all);
  }

  TEST_CASE("leak columns make every deterministic node hold on the data") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t q = 3 + rng() % 8;
      auto names = oracle::label_names(q);
      auto m = LabelMatrix::from_rows(names, oracle::random_rows(rng, 60, q, 0.1 + 0.05 * (trial % 5)));
      auto net = build_network(discover(m, {2, 2}), names);
      auto all = generate_leak_labels(m, net);
      for (std::size_t r = 0; r < all.n_instances(); ++r) {
        for (const auto& node : net.nodes()) {
          if (node.cpt == CptKind::UniformPrior) continue;
          std::size_t on = 0;
          for (auto p : node.parents) on += all.get(r, all.index_of(net.node(p).name)) ? 1 : 0;
          if (node.cpt == CptKind::DeterministicOr) {
            CHECK((on > 0) == all.get(r, all.index_of(node.name)));
          } else {
            CHECK(on == 1);
          }
        }
      }
    }
  }

  TEST_CASE("entailment-only and exclusion-only structures") {
    auto rel = discover(oracle::toy_labels(), {});
    auto entail_only = rel;
    entail_only.exclusions.clear();
    auto net = build_network(entail_only, oracle::toy_names());
    CHECK(net.constraint_count() == 0);
    CHECK(net.leak_nodes().size() == 2);
    auto excl_only = rel;
    excl_only.positive_entailments.clear();
    auto net2 = build_network(excl_only, oracle::toy_names());
    CHECK(net2.constraint_count() == 1);
    CHECK(net2.entailment_consequent_count() == 0);
  }

  TEST_CASE("no relationships gives isolated label nodes") {
    RelationshipSet rel;
    rel.labels = oracle::toy_names();
    auto net = build_network(rel, rel.labels);
    CHECK(net.size() == 6);
    CHECK(net.edges().empty());
  }

  TEST_CASE("equivalent labels become aliases") {
    auto m = LabelMatrix::from_rows({"Q", "P", "R"}, {{1, 1, 1}, {1, 1, 1}, {0, 0, 1}, {0, 0, 0}});
    auto net = build_network(discover(m, {}), m.names());
    CHECK(net.aliases() == std::map<std::string, std::string>{{"Q", "P"}});
    CHECK(!net.find("Q"));
    CHECK(parent_names(net, "R") == std::set<std::string>{"P", "leak__R"});
    CHECK(network_from_json(to_json(net)) == net);
  }

  TEST_CASE("validation rejects malformed networks") {
    NetworkNode a{"A", NodeKind::Label, CptKind::UniformPrior, {}, false, {}};
    CHECK_THROWS_AS(LabelNetwork({a, a}), DataError);
    NetworkNode b{"B", NodeKind::Label, CptKind::DeterministicOr, {2}, false, {}};
    NetworkNode c{"C", NodeKind::Label, CptKind::DeterministicOr, {1}, false, {}};
    CHECK_THROWS_AS(LabelNetwork({a, b, c}), DataError);  // B <-> C cycle
    NetworkNode bad_parent{"B", NodeKind::Label, CptKind::DeterministicOr, {7}, false, {}};
    CHECK_THROWS_AS(LabelNetwork({a, bad_parent}), DataError);
    NetworkNode unobserved{"X", NodeKind::Constraint, CptKind::ExactlyOne, {0}, false, {"A"}};
    CHECK_THROWS_AS(LabelNetwork({a, unobserved}), DataError);
    CHECK_THROWS_AS(LabelNetwork({a}, {{"Z", "Q"}}), DataError);
    CHECK_THROWS_AS(network_from_json(nlohmann::json::parse(R"({"nodes": 3})")), DataError);
  }

  TEST_CASE("unknown labels in relationships are rejected") {
    RelationshipSet rel;
    rel.labels = {"A", "B"};
    rel.positive_entailments.push_back({"A", "Z", 2});
    const std::vector<std::string> names{"A", "B"};
    CHECK_THROWS_AS(build_network(rel, names), DataError);
  }
  TEST_CASE("node count formula and leak idempotence") {
    std::mt19937_64 rng(303);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t q = 3 + rng() % 8;
      auto names = oracle::label_names(q);
      auto m = LabelMatrix::from_rows(names, oracle::random_rows(rng, 50, q, 0.15));
      auto rel = discover(m, {2, 2});
      rel.equivalences.clear();  // keep every label its own node
      std::set<std::string> consequents;
      for (const auto& e : transitive_reduction(rel.positive_entailments)) consequents.insert(e.consequent);
      auto net = build_network(rel, names);
      const auto excl_sets = collapse_and_reduce(rel).exclusions.size();
      CHECK(net.size() == q + consequents.size() + 2 * excl_sets);
      auto all = generate_leak_labels(m, net);
      std::vector<std::size_t> rows(all.n_instances());
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      // rebuilding from the original columns of the augmented matrix
      LabelMatrix originals(names, all.n_instances());
      for (std::size_t r = 0; r < all.n_instances(); ++r)
        for (std::size_t j = 0; j < q; ++j) originals.set(r, j, all.get(r, j));
      CHECK(generate_leak_labels(originals, net) == all);
      CHECK(to_json(build_network(rel, names)).dump() == to_json(net).dump());
    }
  }

  TEST_CASE("single exclusion pair") {
    RelationshipSet rel;
    rel.labels = {"X", "Y"};
    rel.exclusions.push_back({{"X", "Y"}, 4});
    auto net = build_network(rel, rel.labels);
    CHECK(parent_names(net, "excl__X+Y") == std::set<std::string>{"X", "Y", "leakx__X+Y"});
    CHECK(net.node(net.index_of("excl__X+Y")).cpt == CptKind::ExactlyOne);
  }

  TEST_CASE("a consequent that is never true has an all-false leak") {
    auto m = LabelMatrix::from_rows({"A", "B", "C"}, {{0, 0, 1}, {0, 0, 0}, {0, 0, 1}});
    RelationshipSet rel;
    rel.labels = m.names();
    rel.positive_entailments.push_back({"A", "B", 2});
    auto all = generate_leak_labels(m, rel);
    CHECK(all.positives(all.index_of("leak__B")) == 0);
  }

  TEST_CASE("duplicate label names are rejected") {
    RelationshipSet rel;
    rel.labels = {"A", "A"};
    CHECK_THROWS_AS(build_network(rel, rel.labels), DataError);
  }
}

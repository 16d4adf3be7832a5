#include <cmath>
#include <random>

#include "doctest.h"
#include "entailnet/error.hpp"
#include "entailnet/evaluation.hpp"
#include "oracles.hpp"

using namespace entailnet;

TEST_SUITE("evaluation") {
  TEST_CASE("perfect ranking") {
    std::vector<double> s{0.9, 0.8, 0.3, 0.1};
    std::vector<std::uint8_t> y{1, 1, 0, 0};
    CHECK(*average_precision(s, y) == 1.0);
  }

  TEST_CASE("single relevant instance at rank two of four") {
    std::vector<double> s{0.9, 0.8, 0.3, 0.1};
    std::vector<std::uint8_t> y{0, 1, 0, 0};
    CHECK(*average_precision(s, y) == 0.5);
  }

  TEST_CASE("no relevant instance is not evaluable") {
    std::vector<double> s{0.9, 0.1};
    std::vector<std::uint8_t> y{0, 0};
    CHECK(!average_precision(s, y));
  }

  TEST_CASE("ties keep instance order") {
    std::vector<double> s{0.5, 0.5, 0.5};
    auto r = rank_label("x", s, std::vector<std::uint8_t>{0, 0, 1});
    CHECK(r.order == std::vector<std::size_t>{0, 1, 2});
    CHECK(*average_precision(r) == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("matches the precision-at-rank oracle") {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> coarse(0, 4);
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t n = 1 + rng() % 10;
      std::vector<double> s(n);
      std::vector<std::uint8_t> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = coarse(rng) / 4.0;  // coarse scores force ties
        y[i] = rng() % 2;
      }
      auto got = average_precision(s, y);
      auto want = oracle::average_precision(s, y);
      REQUIRE(got.has_value() == want.has_value());
      if (got) {
        CHECK(*got == doctest::Approx(*want).epsilon(1e-14));
        CHECK(*got >= 0.0);
        CHECK(*got <= 1.0);
        // AP is 1 exactly when every relevant instance precedes every irrelevant one
        auto r = rank_label("x", s, y);
        bool separated = std::is_sorted(r.relevant.begin(), r.relevant.end(), std::greater<>());
        CHECK((*got == 1.0) == separated);
      }
    }
  }

  TEST_CASE("map over labels") {
    std::vector<LabelRanking> r;
    r.push_back(rank_label("a", std::vector<double>{0.9, 0.1}, std::vector<std::uint8_t>{1, 0}));
    r.push_back(rank_label("b", std::vector<double>{0.9, 0.8, 0.3, 0.1}, std::vector<std::uint8_t>{0, 1, 0, 0}));
    CHECK(map_score(r) == 0.75);
    std::vector<LabelRanking> one;
    one.push_back(rank_label("a", std::vector<double>{0.9, 0.1}, std::vector<std::uint8_t>{0, 0}));
    one.push_back(rank_label("b", std::vector<double>{0.2, 0.4, 0.9}, std::vector<std::uint8_t>{1, 1, 0}));
    CHECK(*average_precision(one[1]) == doctest::Approx((0.5 + 2.0 / 3.0) / 2.0));
    CHECK(map_score(one) == *average_precision(one[1]));
    one.pop_back();
    CHECK_THROWS_AS(map_score(one), DataError);
  }

  TEST_CASE("strictly increasing transforms leave MAP unchanged") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<LabelRanking> a, b;
      for (int l = 0; l < 4; ++l) {
        std::vector<double> s(12), t(12);
        std::vector<std::uint8_t> y(12);
        for (std::size_t i = 0; i < 12; ++i) {
          s[i] = std::round(u(rng) * 6 + 1) / 8;  // in [1/8, 7/8]
          t[i] = std::log(s[i] / (1 - s[i])) * 3 + 7;
          y[i] = rng() % 3 == 0;
        }
        y[0] = 1;
        a.push_back(rank_label("l", s, y));
        b.push_back(rank_label("l", t, y));
      }
      CHECK(map_score(a) == map_score(b));
    }
  }

  TEST_CASE("compare: identity and a fixed inversion") {
    auto truth = LabelMatrix::from_rows({"X", "Y"}, {{1, 1}, {0, 0}, {1, 0}, {0, 1}});
    PredictionTable before({"0", "1", "2", "3"}, {"X", "Y"});
    const double bx[] = {0.9, 0.8, 0.7, 0.1}, by[] = {0.8, 0.1, 0.3, 0.6};
    for (std::size_t r = 0; r < 4; ++r) {
      before.set(r, 0, bx[r]);
      before.set(r, 1, by[r]);
    }
    auto same = compare(before, before, truth);
    CHECK(same.improvement_pct == 0.0);
    CHECK(same.map_before.mean == same.map_after.mean);

    auto after = before;
    after.set(1, 0, 0.6);  // instance 2 now outranks instance 1 on X
    auto rep = compare(before, after, truth);
    REQUIRE(rep.per_label.size() == 2);
    CHECK(*rep.per_label[0].before == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
    CHECK(*rep.per_label[0].after == 1.0);
    CHECK(*rep.per_label[1].after == *rep.per_label[1].before);
    CHECK(rep.improvement_pct > 0.0);

    auto back = compare(after, before, truth);
    CHECK(back.improvement_pct < 0.0);
  }

  TEST_CASE("compare: coverage mismatch") {
    auto truth = LabelMatrix::from_rows({"X"}, {{1}, {0}});
    PredictionTable a({"0", "1"}, {"X"}), b({"1", "0"}, {"X"}), c({"0", "1"}, {"Z"});
    CHECK_THROWS_AS(compare(a, b, truth), DataError);
    CHECK_THROWS_AS(compare(a, c, truth), DataError);
    PredictionTable d({"0"}, {"X"});
    CHECK_THROWS_AS(compare(d, d, truth), DataError);
  }

  TEST_CASE("aggregate: sample standard deviation and relationship counts") {
    std::vector<FoldEvaluation> folds(3);
    const double mb[] = {0.2, 0.3, 0.4}, ma[] = {0.25, 0.3, 0.5};
    const std::size_t pe[] = {27, 28, 29};
    for (std::size_t k = 0; k < 3; ++k) {
      folds[k].fold = k;
      folds[k].map_before = mb[k];
      folds[k].map_after = ma[k];
      folds[k].positive_entailments = pe[k];
      folds[k].per_label = {{"X", mb[k], ma[k]}, {"Y", std::nullopt, std::nullopt}};
    }
    auto rep = aggregate(folds);
    CHECK(rep.map_before.mean == doctest::Approx(0.3));
    CHECK(rep.map_before.stdev == doctest::Approx(0.1));
    CHECK(rep.positive_entailments.mean == doctest::Approx(28.0));
    CHECK(rep.positive_entailments.stdev == doctest::Approx(1.0));
    CHECK(rep.improvement_pct == doctest::Approx(100.0 * (0.35 - 0.3) / 0.3));
    CHECK(!rep.per_label[1].before);

    auto parsed = report_from_json(nlohmann::json::parse(to_json(rep).dump()));
    CHECK(parsed == rep);
    auto j = to_json(rep);
    for (const char* key : {"map_before", "map_after", "improvement_pct", "per_label", "relationships"})
      CHECK(j.contains(key));
    CHECK(format_report_text(rep).find("16.667") != std::string::npos);
  }
}

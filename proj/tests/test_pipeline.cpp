#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "entailnet/error.hpp"
#include "entailnet/pipeline.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace entailnet;

namespace {

MultiLabelDataset toy_dataset() {
  std::ifstream in(ENTAILNET_TEST_DATA "/toy.csv");
  REQUIRE(in);
  return read_csv(in, {"A", "B", "C", "D", "E", "F"}, "toy");
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = i;
  return r;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("exploit modes parse") {
    CHECK(parse_exploit("both") == ExploitMode::Both);
    CHECK(to_string(parse_exploit("excl")) == "excl");
    CHECK_THROWS_AS(parse_exploit("all"), UsageError);
  }

  TEST_CASE("config file") {
    std::istringstream in(
        "# experiment\nlearner = prior\nminsup_entail=3\nminsup_excl = 4 # inline\nexploit = entail\n"
        "folds = 5\nseed = 9\nescalate = true\nescalate_cap = 7\nclamp_epsilon = 1e-4\nthreads = 2\n");
    auto c = parse_config(in);
    CHECK(c.learner == "prior");
    CHECK(c.minsup_entail == 3);
    CHECK(c.minsup_excl == 4);
    CHECK(c.exploit == ExploitMode::Entail);
    CHECK(c.folds == 5);
    CHECK(c.seed == 9);
    CHECK(c.escalate);
    CHECK(c.escalate_cap == 7);
    CHECK(c.clamp_epsilon == 1e-4);
    CHECK(c.threads == 2);
    std::istringstream unknown("colour = red\n");
    CHECK_THROWS_AS(parse_config(unknown), UsageError);
    std::istringstream bad("folds = many\n");
    CHECK_THROWS_AS(parse_config(bad), UsageError);
    std::istringstream no_eq("folds\n");
    CHECK_THROWS_AS(parse_config(no_eq), UsageError);
  }

  TEST_CASE("filtering by exploit mode") {
    auto rel = discover(oracle::toy_labels(), {});
    CHECK(filter_relationships(rel, ExploitMode::Entail).exclusions.empty());
    CHECK(filter_relationships(rel, ExploitMode::Entail).positive_entailments.size() == 4);
    CHECK(filter_relationships(rel, ExploitMode::Excl).positive_entailments.empty());
    CHECK(filter_relationships(rel, ExploitMode::Excl).exclusions.size() == 1);
    auto none = filter_relationships(rel, ExploitMode::None);
    CHECK(none.positive_entailments.empty());
    CHECK(none.exclusions.empty());
  }

  TEST_CASE("toy smoke path: whole dataset as train and test") {
    auto d = toy_dataset();
    const auto rows = all_rows(10);
    for (auto mode : {ExploitMode::Entail, ExploitMode::Excl, ExploitMode::Both}) {
      PipelineConfig cfg;
      cfg.learner = "nb";
      cfg.exploit = mode;
      auto res = run_split(d, rows, rows, cfg);
      CHECK(res.raw.instance_ids() == res.corrected.instance_ids());
      CHECK(res.raw.columns() == res.corrected.columns());
      CHECK((res.network.constraint_count() > 0) == (mode != ExploitMode::Entail));
      CHECK((res.network.entailment_consequent_count() > 0) == (mode != ExploitMode::Excl));
      std::vector<double> post(res.network.size(), 1.0);
      for (std::size_t r = 0; r < res.corrected.rows(); ++r) {
        for (std::size_t c = 0; c < res.corrected.cols(); ++c)
          post[res.network.index_of(res.corrected.columns()[c])] = res.corrected.at(r, c);
        CHECK(check_consistency(res.network, post).empty());
      }
    }
  }

  TEST_CASE("model count covers real and leak labels") {
    auto d = toy_dataset();
    const auto rows = all_rows(10);
    PipelineConfig cfg;
    cfg.learner = "prior";
    auto res = run_split(d, rows, rows, cfg);
    CHECK(res.raw.cols() == 9);
    // frequency 3/10 with Laplace smoothing
    CHECK(res.raw.at(0, *res.raw.find_column("A")) == doctest::Approx(4.0 / 12.0));
  }

  TEST_CASE("disabled exploitation is the identity") {
    auto data = synthetic::generate(3, 300);
    PipelineConfig cfg;
    cfg.exploit = ExploitMode::None;
    cfg.folds = 3;
    auto cv = run_cv(data.dataset, cfg, &data.predictions);
    CHECK(cv.report.improvement_pct == 0.0);
    for (const auto& f : cv.folds) {
      CHECK(f.network.edges().empty());
      CHECK(f.corrected == clamp_table(f.raw, cfg.clamp_epsilon));
      for (std::size_t r = 0; r < f.raw.rows(); ++r)
        for (std::size_t c = 0; c < f.raw.cols(); ++c) CHECK(std::abs(f.corrected.at(r, c) - f.raw.at(r, c)) <= 1e-6);
    }
  }

  TEST_CASE("no discovered relationships is the identity") {
    // independent labels with high support thresholds: nothing qualifies
    auto data = synthetic::generate(4, 300);
    PipelineConfig cfg;
    cfg.minsup_entail = 10000;
    cfg.minsup_excl = 10000;
    cfg.folds = 3;
    auto cv = run_cv(data.dataset, cfg, &data.predictions);
    CHECK(cv.report.improvement_pct == 0.0);
    for (const auto& f : cv.folds) CHECK(f.corrected == clamp_table(f.raw, cfg.clamp_epsilon));
  }

  TEST_CASE("deterministic given the seed") {
    auto d = toy_dataset();
    PipelineConfig cfg;
    cfg.folds = 2;
    cfg.learner = "nb";
    auto a = run_cv(d, cfg);
    auto b = run_cv(d, cfg);
    CHECK(a.report == b.report);
    cfg.threads = 3;
    CHECK(run_cv(d, cfg).report == a.report);
  }

  TEST_CASE("test rows never reach discovery or training") {
    auto data = synthetic::generate(5, 400);
    std::vector<std::size_t> train, test_a, test_b;
    for (std::size_t i = 0; i < 400; ++i) (i < 300 ? train : (i % 2 ? test_a : test_b)).push_back(i);
    PipelineConfig cfg;
    cfg.learner = "nb";
    auto a = run_split(data.dataset, train, test_a, cfg);
    auto b = run_split(data.dataset, train, test_b, cfg);
    auto c = run_split(data.dataset, train, train, cfg);
    CHECK(a.relationships == b.relationships);
    CHECK(a.network == b.network);
    CHECK(a.relationships == c.relationships);
    // identical models: the same row predicts the same way whatever else is tested
    std::vector<std::size_t> mixed{test_a[0], test_b[0]};
    auto m = run_split(data.dataset, train, mixed, cfg);
    CHECK(m.raw.row(0)[0] == a.raw.row(0)[0]);
    CHECK(m.raw.row(1)[0] == b.raw.row(0)[0]);
  }

  TEST_CASE("relationship counts are reported per fold") {
    auto d = toy_dataset();
    PipelineConfig cfg;
    cfg.folds = 2;
    cfg.learner = "prior";
    cfg.exploit = ExploitMode::Entail;
    auto cv = run_cv(d, cfg);
    for (const auto& f : cv.folds) {
      CHECK(f.evaluation.positive_entailments == f.relationships.positive_entailments.size());
      CHECK(f.evaluation.exclusions == 0);
    }
  }

  TEST_CASE("escalation records the chosen support") {
    auto data = synthetic::generate(6, 400);
    PipelineConfig cfg;
    cfg.folds = 2;
    cfg.exploit = ExploitMode::Excl;
    cfg.escalate = true;
    cfg.escalate_cap = 1;
    auto cv = run_cv(data.dataset, cfg, &data.predictions);
    for (const auto& f : cv.folds) {
      CHECK(f.evaluation.minsup_excl >= 2);
      CHECK(f.relationships.exclusions.size() <= 1);
    }
  }

  TEST_CASE("external predictions from a file, leak columns imputed") {
    auto data = synthetic::generate(7, 200);
    PredictionTable only_labels(data.predictions.instance_ids(), data.dataset.labels.names());
    for (std::size_t r = 0; r < only_labels.rows(); ++r)
      for (std::size_t c = 0; c < only_labels.cols(); ++c) only_labels.set(r, c, data.predictions.at(r, c));
    const auto path = std::filesystem::temp_directory_path() / "entailnet_external_test.csv";
    {
      std::ofstream out(path);
      write_predictions(out, only_labels);
    }
    PipelineConfig cfg;
    cfg.folds = 2;
    cfg.learner = "external:" + path.string();
    auto cv = run_cv(data.dataset, cfg);
    for (const auto& f : cv.folds) {
      CHECK(!f.warnings.empty());
      auto leak = f.raw.find_column("leak__L1");
      if (leak) CHECK(f.raw.at(0, *leak) == f.raw.at(1, *leak));
    }
    std::filesystem::remove(path);
  }

  TEST_CASE("corrected MAP does not fall on planted structure") {
    auto data = synthetic::generate(11, 1000);
    PipelineConfig cfg;
    cfg.folds = 5;
    auto cv = run_cv(data.dataset, cfg, &data.predictions);
    CHECK(cv.report.map_after.mean >= cv.report.map_before.mean);
  }
}

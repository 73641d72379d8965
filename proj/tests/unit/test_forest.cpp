#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "ssc/common.hpp"
#include "ssc/forest/forest.hpp"
#include "support/oracles.hpp"

using namespace ssc;
using namespace ssc::forest;
using testing::pairwise_auc;

namespace {

Dataset random_dataset(Rng& rng, int n, int p, bool separable) {
  Dataset d;
  d.manifest_version = "test-1";
  for (int j = 0; j < p; ++j) d.feature_names.push_back("f" + std::to_string(j));
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    std::vector<double> row(p);
    for (auto& v : row) v = uniform01(rng);
    if (separable) row[0] = y + 0.4 * uniform01(rng);
    d.rows.push_back(row);
    d.labels.push_back(y);
    d.patient_ids.push_back("P" + std::to_string(i));
    d.slide_ids.push_back("S" + std::to_string(i));
  }
  return d;
}

}  // namespace

TEST_CASE("AUC matches the pairwise oracle") {
  Rng rng(11);
  for (int inst = 0; inst < 50; ++inst) {
    std::vector<double> s(200);
    std::vector<int> l(200);
    for (int i = 0; i < 200; ++i) {
      // coarse scores so ties are common
      s[i] = std::floor(uniform01(rng) * 20) / 20;
      l[i] = uniform01(rng) < 0.3 ? 1 : 0;
    }
    l[0] = 1;
    l[1] = 0;
    CHECK(std::abs(roc_auc(s, l).auc - pairwise_auc(s, l)) < 1e-12);
  }
}

TEST_CASE("ROC edge cases") {
  std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  std::vector<int> l{0, 0, 1, 1};
  RocResult r = roc_auc(s, l);
  CHECK(r.auc == 1.0);
  CHECK(r.points.front().fpr == 0.0);
  CHECK(r.points.back().tpr == 1.0);
  CHECK(r.points.back().fpr == 1.0);
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    CHECK(r.points[i].fpr >= r.points[i - 1].fpr);
    CHECK(r.points[i].tpr >= r.points[i - 1].tpr);
  }
  std::vector<double> same(4, 0.3);
  CHECK(roc_auc(same, l).auc == 0.5);
  std::vector<int> one{1, 1, 1, 1};
  CHECK_THROWS_AS(roc_auc(s, one), ConfigError);
  // monotone transform
  std::vector<double> t;
  for (double v : s) t.push_back(std::exp(3 * v) - 7);
  std::vector<int> mixed{1, 0, 1, 0};
  CHECK(roc_auc(s, mixed).auc == roc_auc(t, mixed).auc);
}

TEST_CASE("forest separates a separable feature") {
  Rng rng(3);
  Dataset d = random_dataset(rng, 80, 9, true);
  ForestConfig cfg;
  cfg.seed = 5;
  ForestModel m = rf_train(d, cfg);
  CHECK(m.trees.size() == 100);
  int correct = 0;
  std::vector<double> scores;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double p = rf_predict(m, d.rows[i], "test-1");
    scores.push_back(p);
    correct += (p > 0.5) == (d.labels[i] == 1);
  }
  CHECK(correct == 80);
  CHECK(roc_auc(scores, d.labels).auc == 1.0);
  for (const Tree& t : m.trees)
    for (const Node& n : t.nodes) {
      if (n.feature < 0) {
        CHECK(std::abs(n.probs[0] + n.probs[1] - 1.0) < 1e-12);
      } else {
        CHECK(std::isfinite(n.threshold));
      }
    }
  CHECK_THROWS_AS(rf_predict(m, d.rows[0], "other"), ConfigError);
}

TEST_CASE("permuted labels give a null cross-validated AUC") {
  Rng rng(17);
  Dataset d = random_dataset(rng, 120, 9, true);
  std::shuffle(d.labels.begin(), d.labels.end(), rng);
  ForestConfig cfg;
  cfg.seed = 2;
  auto scores = cross_validated_scores(d, 5, cfg);
  const double auc = roc_auc(scores, d.labels).auc;
  CHECK(auc >= 0.35);
  CHECK(auc <= 0.65);
}

TEST_CASE("duplicating rows barely moves predictions") {
  Rng rng(23);
  Dataset d = random_dataset(rng, 60, 6, false);
  for (std::size_t i = 0; i < d.size(); ++i) d.rows[i][1] += 1.2 * d.labels[i];
  Dataset dd = d;
  for (std::size_t i = 0; i < d.size(); ++i) {
    dd.rows.push_back(d.rows[i]);
    dd.labels.push_back(d.labels[i]);
  }
  ForestConfig cfg;
  cfg.n_trees = 1000;  // keeps Monte Carlo noise well under the tolerance
  cfg.seed = 9;
  ForestModel a = rf_train(d, cfg);
  cfg.seed = 10;
  ForestModel b = rf_train(dd, cfg);
  // Held-out points: training rows themselves sit in-bag more often once
  // duplicated, which legitimately sharpens their own predictions.
  Rng probe(4);
  Dataset fresh = random_dataset(probe, 200, 6, false);
  double worst = 0, mean = 0;
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    fresh.rows[i][1] += 1.2 * fresh.labels[i];
    const double delta = std::abs(rf_predict(a, fresh.rows[i]) - rf_predict(b, fresh.rows[i]));
    worst = std::max(worst, delta);
    mean += delta / fresh.size();
  }
  MESSAGE("prediction change: mean " << mean << ", max " << worst);
  CHECK(mean < 0.05);
}

TEST_CASE("forest determinism, threads and JSON") {
  Rng rng(8);
  Dataset d = random_dataset(rng, 50, 5, false);
  ForestConfig cfg;
  cfg.seed = 77;
  cfg.n_trees = 20;
  ForestModel a = rf_train(d, cfg);
  cfg.threads = 3;
  ForestModel b = rf_train(d, cfg);
  CHECK(a == b);
  ForestModel c = forest_from_json(to_json(a));
  for (const auto& row : d.rows) CHECK(rf_predict(a, row) == rf_predict(c, row));
  CHECK(to_json(c) == to_json(a));
  Dataset single = d;
  std::fill(single.labels.begin(), single.labels.end(), 1);
  CHECK_THROWS_AS(rf_train(single, cfg), ConfigError);
}

TEST_CASE("forest predictions are invariant under monotone feature transforms") {
  Rng rng(31);
  Dataset d = random_dataset(rng, 60, 4, false);
  for (std::size_t i = 0; i < d.size(); ++i) d.rows[i][2] += 0.3 * d.labels[i];
  Dataset t = d;
  for (auto& row : t.rows)
    for (double& v : row) v = std::exp(2 * v);
  ForestConfig cfg;
  cfg.seed = 1;
  cfg.n_trees = 30;
  ForestModel a = rf_train(d, cfg);
  ForestModel b = rf_train(t, cfg);
  for (std::size_t i = 0; i < d.size(); ++i)
    CHECK(rf_predict(a, d.rows[i]) == rf_predict(b, t.rows[i]));
}

TEST_CASE("hard leaves average to vote fractions") {
  ForestModel m;
  m.manifest_version = "v";
  for (int k = 0; k < 4; ++k) {
    Tree t;
    Node leaf;
    leaf.probs = {k < 2 ? 0.0 : 1.0, k < 2 ? 1.0 : 0.0};
    t.nodes.push_back(leaf);
    m.trees.push_back(t);
  }
  std::vector<double> x{0.0};
  CHECK(rf_predict(m, x) == 0.5);
}

TEST_CASE("stratified patient bootstrap") {
  std::vector<double> s;
  std::vector<int> l;
  std::vector<std::string> pid;
  for (int i = 0; i < 20; ++i) {
    s.push_back(i < 10 ? 0.1 * i / 10 : 0.9 + 0.01 * i);
    l.push_back(i < 10 ? 0 : 1);
    pid.push_back("P" + std::to_string(i / 2));  // two slides per patient
  }
  auto ci = bootstrap_ci(s, l, pid, 1000, 0.95, 42);
  CHECK(ci.low == 1.0);
  CHECK(ci.high == 1.0);
  CHECK(ci.resamples == 1000);

  Rng rng(5);
  auto noisy = [&](int patients, std::uint64_t seed) {
    std::vector<double> sc;
    std::vector<int> lb;
    std::vector<std::string> id;
    for (int p = 0; p < patients; ++p) {
      const int y = p % 2;
      sc.push_back(uniform01(rng) + 0.5 * y);
      lb.push_back(y);
      id.push_back("P" + std::to_string(p));
    }
    auto c1 = bootstrap_ci(sc, lb, id, 300, 0.95, seed);
    auto c2 = bootstrap_ci(sc, lb, id, 300, 0.95, seed, 4);
    CHECK(c1.low == c2.low);
    CHECK(c1.high == c2.high);
    CHECK(c1.low <= c1.high);
    CHECK(c1.low >= 0.0);
    CHECK(c1.high <= 1.0);
    return c1.high - c1.low;
  };
  double small = 0, large = 0;
  for (int rep = 0; rep < 5; ++rep) {
    small += noisy(20, rep);
    large += noisy(200, rep);
  }
  CHECK(large < small);

  std::vector<std::string> few{"A", "A", "B", "B"};
  std::vector<double> s4{0.1, 0.2, 0.7, 0.9};
  std::vector<int> l4{0, 0, 1, 1};
  CHECK_THROWS_AS(bootstrap_ci(s4, l4, few, 10, 0.95, 1), ConfigError);
}

TEST_CASE("ROC artefacts are written") {
  auto dir = std::filesystem::temp_directory_path() / "ssc_test_roc";
  std::filesystem::remove_all(dir);
  std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  std::vector<int> l{0, 0, 1, 1};
  RocResult r = roc_auc(s, l);
  CHECK(r.auc == 0.75);
  write_roc_csv(dir / "roc.csv", r);
  write_roc_png(dir / "roc.png", r);
  CHECK(std::filesystem::file_size(dir / "roc.png") > 100);
  std::filesystem::remove_all(dir);
}

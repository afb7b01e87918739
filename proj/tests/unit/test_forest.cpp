#include "doctest.h"

#include <cmath>

#include "fbdet/forest.hpp"
#include "fbdet/rng.hpp"
#include "support/oracles.hpp"

using namespace fbdet;

namespace {

FeatureRow row1d(double x) { return {x, 0, 0, 0, 0, 0, 0}; }

Dataset random_dataset(Rng& rng, std::size_t max_rows) {
  Dataset d;
  const std::size_t n = 2 + rng.next_below(max_rows - 1);
  for (std::size_t i = 0; i < n; ++i) {
    FeatureRow row;
    for (auto& v : row) v = rng.next_uniform(0.0, 4.0);
    // Correlate the label with feature 2 plus noise so splits exist.
    const bool rw = row[2] + rng.next_uniform(-1.0, 1.0) > 2.0;
    d.push(row, rw ? BinaryClass::Ransomware : BinaryClass::Benign);
  }
  return d;
}

std::vector<std::size_t> all_features() { return {0, 1, 2, 3, 4, 5, 6}; }

}  // namespace

TEST_CASE("gini unit values") {
  CHECK(gini({5, 5}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(gini({10, 0}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(gini({3, 1}) == doctest::Approx(0.375).epsilon(1e-12));
  CHECK_THROWS_AS(gini({0, 0}), std::invalid_argument);
}

TEST_CASE("best_split on the 1-D textbook example") {
  Dataset d;
  d.push(row1d(1), BinaryClass::Benign);
  d.push(row1d(2), BinaryClass::Benign);
  d.push(row1d(9), BinaryClass::Ransomware);
  d.push(row1d(10), BinaryClass::Ransomware);
  const auto split = best_split(d, all_features());
  REQUIRE(split.has_value());
  CHECK(split->feature_index == 0);
  CHECK(split->threshold == doctest::Approx(5.5).epsilon(1e-12));
  CHECK(split->impurity_decrease == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("best_split: pure labels and constant features give none") {
  Dataset pure;
  pure.push(row1d(1), BinaryClass::Benign);
  pure.push(row1d(2), BinaryClass::Benign);
  CHECK_FALSE(best_split(pure, all_features()).has_value());

  Dataset constant;
  constant.push(row1d(3), BinaryClass::Benign);
  constant.push(row1d(3), BinaryClass::Ransomware);
  CHECK_FALSE(best_split(constant, all_features()).has_value());
}

TEST_CASE("property: best_split matches exhaustive enumeration") {
  Rng rng(4242);
  for (int iter = 0; iter < 60; ++iter) {
    const Dataset d = random_dataset(rng, 50);
    const auto got = best_split(d, all_features());
    const auto want = testsupport::oracle_best_split(d, all_features());
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      CHECK(got->feature_index == want->feature_index);
      CHECK(got->threshold == doctest::Approx(want->threshold).epsilon(1e-12));
      CHECK(got->impurity_decrease ==
            doctest::Approx(want->impurity_decrease).epsilon(1e-12));
    }
  }
}

TEST_CASE("train_forest: separable data reaches training accuracy 1") {
  Dataset d;
  d.push(row1d(1), BinaryClass::Benign);
  d.push(row1d(2), BinaryClass::Benign);
  d.push(row1d(9), BinaryClass::Ransomware);
  d.push(row1d(10), BinaryClass::Ransomware);
  ForestParams params;
  params.n_trees = 5;
  params.max_depth = 2;
  params.min_samples_leaf = 1;
  params.seed = 3;
  const Forest f = train_forest(d, params);
  for (std::size_t i = 0; i < d.size(); ++i)
    CHECK(f.predict(d.rows[i]).cls == static_cast<BinaryClass>(d.labels[i]));
}

TEST_CASE("train_forest: determinism and error cases") {
  Rng rng(5);
  const Dataset d = random_dataset(rng, 40);
  ForestParams params;
  params.n_trees = 7;
  params.seed = 11;
  params.min_samples_leaf = 1;
  const std::string a = forest_to_json(train_forest(d, params));
  const std::string b = forest_to_json(train_forest(d, params));
  CHECK(a == b);

  Dataset single;
  single.push(row1d(1), BinaryClass::Benign);
  single.push(row1d(2), BinaryClass::Benign);
  CHECK_THROWS_AS(train_forest(single, params), std::invalid_argument);
  CHECK_THROWS_AS(train_forest(Dataset{}, params), std::invalid_argument);
}

TEST_CASE("mdi: single informative feature takes all importance") {
  Dataset d;
  Rng rng(9);
  for (int i = 0; i < 60; ++i) {
    FeatureRow row{1, 1, 1, 0, 1, 1, 1};  // all constant except feature 3
    row[3] = i < 30 ? rng.next_uniform(0.0, 0.4) : rng.next_uniform(0.6, 1.0);
    d.push(row, i < 30 ? BinaryClass::Benign : BinaryClass::Ransomware);
  }
  ForestParams params;
  params.n_trees = 20;
  params.seed = 1;
  const Forest f = train_forest(d, params);
  CHECK(f.mdi[3] == doctest::Approx(1.0).epsilon(1e-9));
  double sum = 0;
  for (double v : f.mdi) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("predict: majority with ties toward ransomware, vote recount") {
  Rng rng(13);
  const Dataset d = random_dataset(rng, 60);
  ForestParams params;
  params.n_trees = 9;
  params.seed = 21;
  params.min_samples_leaf = 1;
  const Forest f = train_forest(d, params);

  for (int iter = 0; iter < 200; ++iter) {
    FeatureRow row;
    for (auto& v : row) v = rng.next_uniform(-1.0, 5.0);
    std::uint32_t votes = 0;
    for (const Tree& tree : f.trees)
      if (tree.predict(row) == BinaryClass::Ransomware) ++votes;
    const Prediction p = f.predict(row);
    CHECK(p.votes_ransomware == votes);
    CHECK(p.cls == (2 * votes >= f.trees.size() ? BinaryClass::Ransomware
                                                : BinaryClass::Benign));
  }
}

TEST_CASE("property: monotone transform of one feature keeps predictions") {
  Rng rng(17);
  const Dataset d = random_dataset(rng, 50);
  ForestParams params;
  params.n_trees = 11;
  params.seed = 29;
  params.min_samples_leaf = 1;

  Dataset transformed = d;
  auto mono = [](double v) { return std::exp(v) + 3.0 * v; };  // strictly increasing
  for (auto& row : transformed.rows) row[2] = mono(row[2]);

  const Forest f1 = train_forest(d, params);
  const Forest f2 = train_forest(transformed, params);
  for (int iter = 0; iter < 300; ++iter) {
    FeatureRow row;
    for (auto& v : row) v = rng.next_uniform(0.0, 4.0);
    FeatureRow trow = row;
    trow[2] = mono(trow[2]);
    CHECK(f1.predict(row).cls == f2.predict(trow).cls);
  }
}

TEST_CASE("model json round-trip preserves structure and bytes") {
  Rng rng(23);
  const Dataset d = random_dataset(rng, 50);
  ForestParams params;
  params.n_trees = 6;
  params.seed = 31;
  const Forest f = train_forest(d, params);
  const std::string json = forest_to_json(f);
  const Forest back = forest_from_json(json);
  CHECK(forest_to_json(back) == json);
  CHECK(back.params == f.params);
  REQUIRE(back.trees.size() == f.trees.size());
  for (int iter = 0; iter < 100; ++iter) {
    FeatureRow row;
    for (auto& v : row) v = rng.next_uniform(0.0, 4.0);
    CHECK(back.predict(row).cls == f.predict(row).cls);
  }
  CHECK_THROWS(forest_from_json("{\"format_version\": 999}"));
}

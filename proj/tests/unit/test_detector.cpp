#include "doctest.h"

#include "fbdet/detector.hpp"
#include "fbdet/rng.hpp"

using namespace fbdet;

namespace {

// A stack whose every tier learned "high write entropy means ransomware".
TierStack entropy_stack(const TierConfig& tiers) {
  Dataset d;
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    FeatureRow row{};
    row[kAvgReadEntropy] = rng.next_uniform(3.0, 6.0);
    row[kAvgWriteEntropy] = i % 2 ? rng.next_uniform(7.8, 8.0) : rng.next_uniform(2.0, 6.0);
    row[kWriteRatio] = i % 2 ? rng.next_uniform(0.8, 1.0) : rng.next_uniform(0.0, 0.3);
    row[kNOps] = rng.next_uniform(1.0, 10.0);
    d.push(row, i % 2 ? BinaryClass::Ransomware : BinaryClass::Benign);
  }
  ForestParams params;
  params.n_trees = 15;
  params.seed = 5;
  TierStack stack;
  stack.config = tiers;
  for (std::size_t k = 0; k < tiers.size(); ++k) stack.forests.push_back(train_forest(d, params));
  return stack;
}

}  // namespace

TEST_CASE("tiers_due reproduces the shared-boundary schedule") {
  const TierConfig tiers = TierConfig::defaults();
  CHECK(tiers_due(6'000'000, tiers) == std::vector<std::size_t>{0, 1, 2});
  CHECK(tiers_due(1'000'000, tiers) == std::vector<std::size_t>{0});
  CHECK(tiers_due(96'000'000, tiers) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
  CHECK(tiers_due(500'000, tiers).empty());

  for (std::uint64_t t_s = 1; t_s <= 96; ++t_s) {
    const auto due = tiers_due(t_s * 1'000'000, tiers);
    std::vector<std::size_t> expect;
    for (std::size_t k = 0; k < tiers.windows_s.size(); ++k)
      if (t_s % tiers.windows_s[k] == 0) expect.push_back(k);
    CHECK(due == expect);
  }
}

TEST_CASE("run_detection: empty trace gives an empty report") {
  Trace t;
  t.duration_us = 1'000'000;
  t.files.emplace(0, FileMeta{0, 1000, true});
  const TierConfig tiers{{1, 3}};
  const auto report = run_detection(t, entropy_stack(tiers));
  CHECK(report.alerts.empty());
  CHECK(report.verdicts.empty());
  CHECK(report.campaigns.empty());
}

TEST_CASE("run_detection: full-rewrite window raises an alert at the boundary") {
  Trace t;
  t.duration_us = 3'000'000;
  t.files.emplace(0, FileMeta{0, 4096, true});
  t.procs.emplace(1, ProcessLabel{1, ProcClass::Benign});
  t.procs.emplace(9, ProcessLabel{9, ProcClass::Traditional});
  t.events.push_back({100'000, 9, 0, OpKind::Read, 0, 4096, 4.2});
  t.events.push_back({200'000, 9, 0, OpKind::Write, 0, 4096, 7.99});
  // A benign process co-active on the file inside the flagged window.
  t.events.push_back({300'000, 1, 0, OpKind::Read, 0, 128, 4.0});

  const TierConfig tiers{{1}};
  const TierStack stack = entropy_stack(tiers);
  const auto report = run_detection(t, stack);

  REQUIRE(!report.alerts.empty());
  const Alert& a = report.alerts.front();
  CHECK(a.alert_time_us == 1'000'000);
  CHECK(a.file_id == 0);
  CHECK(a.tier == 0);
  // Attribution covers every active pid, including the benign bystander.
  CHECK(a.attributed_pids == std::vector<std::uint32_t>{1, 9});
  CHECK(report.verdicts.at(9).has_value());
  CHECK(report.verdicts.at(1).has_value());

  REQUIRE(report.campaigns.size() == 1);
  CHECK(report.campaigns[0].first_ransomware_op_us == 100'000);
  REQUIRE(report.campaigns[0].first_alert_us.has_value());
  CHECK(*report.campaigns[0].first_alert_us == 1'000'000);

  const LatencyStats stats = detection_latency_stats(report);
  CHECK(stats.campaigns == 1);
  CHECK(stats.detected == 1);
  CHECK(stats.mean_s == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(stats.fraction_within_1s == 1.0);
}

TEST_CASE("run_detection: alert features equal the extractor's values") {
  Trace t;
  t.duration_us = 2'000'000;
  t.files.emplace(0, FileMeta{0, 4096, true});
  t.procs.emplace(9, ProcessLabel{9, ProcClass::Traditional});
  t.events.push_back({100'000, 9, 0, OpKind::Write, 0, 4096, 7.95});
  const TierConfig tiers{{1}};
  const TierStack stack = entropy_stack(tiers);
  const auto report = run_detection(t, stack);
  REQUIRE(report.alerts.size() == 1);
  const auto profiles = extract_profiles(t, tiers);
  REQUIRE(profiles.size() == 1);
  CHECK(report.alerts[0].feature_vector == profiles[0].features());
}

TEST_CASE("run_detection: clean pids stay clean; determinism") {
  Trace t;
  t.duration_us = 2'000'000;
  t.files.emplace(0, FileMeta{0, 4096, true});
  t.files.emplace(1, FileMeta{1, 4096, true});
  t.procs.emplace(1, ProcessLabel{1, ProcClass::Benign});
  t.procs.emplace(9, ProcessLabel{9, ProcClass::Traditional});
  t.events.push_back({100'000, 9, 0, OpKind::Write, 0, 4096, 7.99});
  t.events.push_back({1'500'000, 1, 1, OpKind::Read, 0, 64, 4.0});  // other file, later window

  const TierConfig tiers{{1}};
  const TierStack stack = entropy_stack(tiers);
  const auto r1 = run_detection(t, stack);
  const auto r2 = run_detection(t, stack);
  CHECK(r1.alerts == r2.alerts);
  REQUIRE(r1.verdicts.count(1));
  CHECK_FALSE(r1.verdicts.at(1).has_value());  // never co-active in a flagged window
  CHECK(r1.verdicts.at(9).has_value());
}

TEST_CASE("latency stats: multiple campaigns and the no-ransomware error") {
  DetectionReport r;
  r.campaigns.push_back({0, 1'000'000});
  r.campaigns.push_back({0, 3'000'000});
  const LatencyStats stats = detection_latency_stats(r);
  CHECK(stats.mean_s == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(stats.fraction_within_1s == doctest::Approx(0.5).epsilon(1e-12));

  DetectionReport empty;
  CHECK_THROWS(detection_latency_stats(empty));
}

TEST_CASE("stack validation catches tier mismatch") {
  TierStack stack;
  stack.config = TierConfig{{1, 3}};
  CHECK_THROWS(stack.validate());
}

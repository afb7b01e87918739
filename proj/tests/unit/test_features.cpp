#include "doctest.h"

#include <map>
#include <sstream>

#include "fbdet/features.hpp"
#include "fbdet/rng.hpp"
#include "support/oracles.hpp"

using namespace fbdet;

TEST_CASE("window_index boundaries") {
  CHECK(window_index(999'999, 1) == 0);
  CHECK(window_index(1'000'000, 1) == 1);
  CHECK(window_index(7'500'000, 3) == 2);
  CHECK(window_index(0, 96) == 0);
}

TEST_CASE("tier config validation") {
  CHECK_NOTHROW(TierConfig::defaults().validate());
  CHECK(TierConfig::defaults().windows_s == std::vector<std::uint32_t>{1, 3, 6, 12, 24, 48, 96});
  CHECK_THROWS_AS(TierConfig{{3, 1}}.validate(), TraceError);
  CHECK_THROWS_AS(TierConfig{{1, 3, 4}}.validate(), TraceError);  // 3 does not divide 4
  CHECK_THROWS_AS(TierConfig{{}}.validate(), TraceError);
  CHECK(parse_tier_list("1,3,6").windows_s == std::vector<std::uint32_t>{1, 3, 6});
}

TEST_CASE("coverage_union") {
  using Iv = std::pair<std::uint64_t, std::uint64_t>;
  CHECK(coverage_union({}, 1000) == 0.0);
  const Iv full[] = {{0, 1000}};
  CHECK(coverage_union(full, 1000) == doctest::Approx(1.0).epsilon(1e-12));
  const Iv mixed[] = {{0, 100}, {200, 100}, {50, 100}};
  CHECK(coverage_union(mixed, 1000) == doctest::Approx(0.30).epsilon(1e-12));
  const Iv beyond[] = {{900, 500}};
  CHECK(coverage_union(beyond, 1000) == doctest::Approx(0.10).epsilon(1e-12));

  Rng rng(5);
  for (int iter = 0; iter < 100; ++iter) {
    const std::uint64_t size = 1 + rng.next_below(700);
    std::vector<Iv> ivs(rng.next_below(20));
    for (auto& [off, len] : ivs) {
      off = rng.next_below(size + 40);
      len = 1 + rng.next_below(80);
    }
    CHECK(coverage_union(ivs, size) ==
          doctest::Approx(testsupport::bitmap_coverage(ivs, size)).epsilon(1e-12));
  }
}

namespace {

Trace tiny_trace() {
  Trace t;
  t.duration_us = 4'000'000;
  t.files.emplace(0, FileMeta{0, 1000, true});
  t.procs.emplace(1, ProcessLabel{1, ProcClass::Benign});
  t.procs.emplace(2, ProcessLabel{2, ProcClass::Evasive});
  return t;
}

}  // namespace

TEST_CASE("extract_profiles: single write profile") {
  Trace t = tiny_trace();
  t.events.push_back({500, 1, 0, OpKind::Write, 0, 500, 7.9});
  const auto profiles = extract_profiles(t, TierConfig{{1}});
  REQUIRE(profiles.size() == 1);
  const auto& p = profiles[0];
  CHECK(p.write_ratio == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.read_ratio == 0.0);
  CHECK(p.avg_write_entropy == doctest::Approx(7.9).epsilon(1e-12));
  CHECK(p.avg_read_entropy == 0.0);
  CHECK(p.n_writer_procs == 1);
  CHECK(p.n_reader_procs == 0);
  CHECK(p.n_ops == 1);
  CHECK(p.label == ProcClass::Benign);
  CHECK(p.active_pids == std::vector<std::uint32_t>{1});
}

TEST_CASE("extract_profiles: overlapping writes dedup in the union") {
  Trace t = tiny_trace();
  t.events.push_back({100, 1, 0, OpKind::Write, 0, 100, 4.0});
  t.events.push_back({200, 1, 0, OpKind::Write, 50, 100, 4.0});
  const auto profiles = extract_profiles(t, TierConfig{{1}});
  REQUIRE(profiles.size() == 1);
  CHECK(profiles[0].write_ratio == doctest::Approx(0.15).epsilon(1e-12));
}

TEST_CASE("extract_profiles: window label severity") {
  Trace t = tiny_trace();
  t.events.push_back({100, 1, 0, OpKind::Read, 0, 10, 4.0});
  SUBCASE("benign only") {
    const auto profiles = extract_profiles(t, TierConfig{{1}});
    CHECK(profiles[0].label == ProcClass::Benign);
  }
  SUBCASE("hostile pid taints the window") {
    t.events.push_back({200, 2, 0, OpKind::Write, 0, 10, 7.9});
    const auto profiles = extract_profiles(t, TierConfig{{1}});
    CHECK(profiles[0].label == ProcClass::Evasive);
    CHECK(profiles[0].active_pids == std::vector<std::uint32_t>{1, 2});
  }
}

TEST_CASE("extract_profiles: empty trace, non-critical skipped") {
  Trace t = tiny_trace();
  CHECK(extract_profiles(t, TierConfig::defaults()).empty());
  t.files.at(0).critical = false;
  t.events.push_back({100, 1, 0, OpKind::Read, 0, 10, 4.0});
  CHECK(extract_profiles(t, TierConfig::defaults()).empty());
}

TEST_CASE("property: extractor matches the quadratic oracle") {
  Rng rng(31337);
  testsupport::RandomTraceParams params;
  const TierConfig tiers = TierConfig::defaults();
  for (int iter = 0; iter < 40; ++iter) {
    const Trace t = testsupport::random_trace(rng, params);
    const auto got = extract_profiles(t, tiers);
    const auto want = testsupport::oracle_profiles(t, tiers);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].file_id == want[i].file_id);
      CHECK(got[i].tier == want[i].tier);
      CHECK(got[i].window_start_us == want[i].window_start_us);
      CHECK(got[i].n_ops == want[i].n_ops);
      CHECK(got[i].n_reader_procs == want[i].n_reader_procs);
      CHECK(got[i].n_writer_procs == want[i].n_writer_procs);
      CHECK(got[i].label == want[i].label);
      CHECK(got[i].active_pids == want[i].active_pids);
      CHECK(got[i].read_ratio == doctest::Approx(want[i].read_ratio).epsilon(1e-12));
      CHECK(got[i].write_ratio == doctest::Approx(want[i].write_ratio).epsilon(1e-12));
      CHECK(got[i].avg_read_entropy ==
            doctest::Approx(want[i].avg_read_entropy).epsilon(1e-12));
      CHECK(got[i].avg_write_entropy ==
            doctest::Approx(want[i].avg_write_entropy).epsilon(1e-12));
    }
  }
}

TEST_CASE("property: tier nesting sums n_ops and coverage is monotone") {
  Rng rng(77);
  testsupport::RandomTraceParams params;
  params.max_events = 300;
  const TierConfig tiers{{1, 3, 6}};
  for (int iter = 0; iter < 20; ++iter) {
    const Trace t = testsupport::random_trace(rng, params);
    const auto profiles = extract_profiles(t, tiers);

    std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint64_t>,
             const FileWindowProfile*> by_key;
    for (const auto& p : profiles) by_key[{p.file_id, p.tier, p.window_start_us}] = &p;

    for (const auto& p : profiles) {
      if (p.tier == 0) continue;
      const std::uint64_t w_us = tiers.windows_s[p.tier] * 1'000'000ULL;
      const std::uint64_t sub_us = tiers.windows_s[p.tier - 1] * 1'000'000ULL;
      std::uint64_t sum_ops = 0;
      double max_cov = 0.0;
      for (std::uint64_t s = p.window_start_us; s < p.window_start_us + w_us; s += sub_us) {
        auto it = by_key.find({p.file_id, p.tier - 1, s});
        if (it == by_key.end()) continue;
        sum_ops += it->second->n_ops;
        max_cov = std::max(max_cov, it->second->write_ratio);
      }
      CHECK(p.n_ops == sum_ops);
      CHECK(p.write_ratio >= max_cov - 1e-12);
      CHECK(static_cast<std::uint64_t>(p.active_pids.size()) <= p.n_ops);
    }
  }
}

TEST_CASE("profiles csv round-trips") {
  Rng rng(12);
  testsupport::RandomTraceParams params;
  params.max_events = 120;
  const Trace t = testsupport::random_trace(rng, params);
  auto profiles = extract_profiles(t, TierConfig{{1, 3}});
  // CSV carries 6 digits; quantize expectations accordingly.
  for (auto& p : profiles) {
    p.active_pids.clear();  // not part of the csv schema
  }
  std::ostringstream out;
  write_profiles_csv(out, profiles, "test manifest");
  std::istringstream in(out.str());
  const auto back = parse_profiles_csv(in);
  REQUIRE(back.size() == profiles.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].file_id == profiles[i].file_id);
    CHECK(back[i].tier == profiles[i].tier);
    CHECK(back[i].window_start_us == profiles[i].window_start_us);
    CHECK(back[i].n_ops == profiles[i].n_ops);
    CHECK(back[i].label == profiles[i].label);
    CHECK(back[i].read_ratio == doctest::Approx(profiles[i].read_ratio).epsilon(1e-6));
    CHECK(back[i].avg_write_entropy ==
          doctest::Approx(profiles[i].avg_write_entropy).epsilon(1e-6));
  }
}

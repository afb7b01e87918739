#include "doctest.h"

#include "fbdet/recovery.hpp"
#include "fbdet/rng.hpp"

using namespace fbdet;

namespace {

std::vector<std::uint8_t> bytes(const char* s) {
  return {reinterpret_cast<const std::uint8_t*>(s),
          reinterpret_cast<const std::uint8_t*>(s) + std::strlen(s)};
}

}  // namespace

TEST_CASE("stage_write leaves base untouched until commit") {
  FileStore store;
  store.create_file(0, std::vector<std::uint8_t>(8, 0));
  store.stage_write(0, 0, bytes("abcd"));
  CHECK(store.base_content(0) == std::vector<std::uint8_t>(8, 0));
  CHECK(store.staged_count(0) == 1);

  SUBCASE("later staged write wins on overlap in read_view") {
    store.stage_write(0, 2, bytes("XY"));
    std::vector<std::uint8_t> expect = bytes("abXY");
    expect.resize(8, 0);
    CHECK(store.read_view(0, 0, 8) == expect);
  }
}

TEST_CASE("read_view patches base with the overlay") {
  FileStore store;
  store.create_file(0, std::vector<std::uint8_t>(8, 0));
  CHECK(store.read_view(0, 0, 8) == std::vector<std::uint8_t>(8, 0));
  store.stage_write(0, 0, bytes("abcd"));
  const auto view = store.read_view(0, 0, 8);
  std::vector<std::uint8_t> expect = bytes("abcd");
  expect.resize(8, 0);
  CHECK(view == expect);
}

TEST_CASE("out-of-bounds writes and reads are rejected, overlay unchanged") {
  FileStore store;
  store.create_file(0, std::vector<std::uint8_t>(8, 0));
  CHECK_THROWS_AS(store.stage_write(0, 6, bytes("abcd")), RecoveryError);
  CHECK(store.staged_count(0) == 0);
  CHECK_THROWS_AS(store.read_view(0, 7, 2), RecoveryError);
  CHECK_THROWS_AS(store.stage_write(1, 0, bytes("a")), RecoveryError);
}

TEST_CASE("commit flushes on benign and rolls back on ransomware") {
  FileStore store;
  store.create_file(0, std::vector<std::uint8_t>(4, 0));

  SUBCASE("benign flush applies the staged content") {
    store.stage_write(0, 0, bytes("abcd"));
    const auto before_commit = store.read_view(0, 0, 4);
    store.commit_window(0, BinaryClass::Benign);
    CHECK(store.base_content(0) == bytes("abcd"));
    CHECK(store.base_content(0) == before_commit);
    CHECK(store.staged_count(0) == 0);
  }
  SUBCASE("ransomware verdict discards the overlay") {
    store.stage_write(0, 0, bytes("abcd"));
    store.commit_window(0, BinaryClass::Ransomware);
    CHECK(store.base_content(0) == std::vector<std::uint8_t>(4, 0));
    CHECK(store.staged_count(0) == 0);
  }
}

TEST_CASE("property: randomized stage/commit replay equals the oracle") {
  Rng rng(2718);
  for (int round = 0; round < 40; ++round) {
    const std::uint64_t size = 16 + rng.next_below(240);
    FileStore store;
    std::vector<std::uint8_t> oracle(size);
    for (auto& b : oracle) b = static_cast<std::uint8_t>(rng.next_below(256));
    store.create_file(0, oracle);

    std::vector<std::pair<std::uint64_t, std::vector<std::uint8_t>>> window_writes;
    for (int op = 0; op < 100; ++op) {
      const double dice = rng.next_double();
      if (dice < 0.6) {
        const std::uint64_t len = 1 + rng.next_below(24);
        if (len > size) continue;
        const std::uint64_t off = rng.next_below(size - len + 1);
        std::vector<std::uint8_t> payload(len);
        for (auto& b : payload) b = static_cast<std::uint8_t>(rng.next_below(256));
        store.stage_write(0, off, payload);
        window_writes.emplace_back(off, std::move(payload));
      } else if (dice < 0.85) {
        const std::uint64_t len = 1 + rng.next_below(size);
        const std::uint64_t off = rng.next_below(size - len + 1);
        // read-your-writes: base patched by this window's writes in order
        std::vector<std::uint8_t> expect(oracle.begin() + off, oracle.begin() + off + len);
        for (const auto& [woff, wbytes] : window_writes) {
          for (std::uint64_t i = 0; i < wbytes.size(); ++i) {
            const std::uint64_t pos = woff + i;
            if (pos >= off && pos < off + len) expect[pos - off] = wbytes[i];
          }
        }
        CHECK(store.read_view(0, off, len) == expect);
      } else {
        const bool benign = rng.next_double() < 0.5;
        const std::vector<std::uint8_t> before = store.base_content(0);
        store.commit_window(0, benign ? BinaryClass::Benign : BinaryClass::Ransomware);
        if (benign) {
          for (const auto& [woff, wbytes] : window_writes)
            std::copy(wbytes.begin(), wbytes.end(), oracle.begin() + woff);
        } else {
          CHECK(store.base_content(0) == before);  // rollback safety
        }
        window_writes.clear();
        CHECK(store.base_content(0) == oracle);
      }
    }
    store.commit_window(0, BinaryClass::Ransomware);
    CHECK(store.base_content(0) == oracle);
  }
}

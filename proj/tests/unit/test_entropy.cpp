#include "doctest.h"

#include <algorithm>
#include <vector>

#include "fbdet/entropy.hpp"
#include "fbdet/rng.hpp"

using namespace fbdet;

TEST_CASE("shannon_entropy unit vectors") {
  std::vector<std::uint8_t> zeros(4096, 0x00);
  CHECK(shannon_entropy(zeros).bits_per_byte == doctest::Approx(0.0).epsilon(1e-12));

  std::vector<std::uint8_t> uniform;
  for (int b = 0; b < 256; ++b)
    for (int k = 0; k < 16; ++k) uniform.push_back(static_cast<std::uint8_t>(b));
  CHECK(shannon_entropy(uniform).bits_per_byte == doctest::Approx(8.0).epsilon(1e-12));

  const std::uint8_t aabb[] = {'a', 'a', 'b', 'b'};
  CHECK(shannon_entropy(aabb).bits_per_byte == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(shannon_entropy({}).bits_per_byte == 0.0);
  CHECK(shannon_entropy({}).sample_len == 0);
  const std::uint8_t one[] = {0x42};
  CHECK(shannon_entropy(one).bits_per_byte == 0.0);  // sample_len <= 1
}

TEST_CASE("shannon_entropy bounds, permutation and self-concatenation") {
  Rng rng(7);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<std::uint8_t> buf(rng.next_below(2048));
    for (auto& b : buf) b = static_cast<std::uint8_t>(rng.next_below(256));

    const double h = shannon_entropy(buf).bits_per_byte;
    CHECK(h >= 0.0);
    CHECK(h <= 8.0);

    std::vector<std::uint8_t> shuffled = buf;
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[rng.next_below(i)]);
    CHECK(shannon_entropy(shuffled).bits_per_byte == doctest::Approx(h).epsilon(1e-12));

    if (buf.size() > 1) {
      std::vector<std::uint8_t> doubled = buf;
      doubled.insert(doubled.end(), buf.begin(), buf.end());
      CHECK(shannon_entropy(doubled).bits_per_byte == doctest::Approx(h).epsilon(1e-9));
    }
  }
}

TEST_CASE("mean_entropy") {
  using Op = std::pair<std::uint64_t, double>;
  const Op symmetric[] = {{100, 2.0}, {100, 6.0}};
  CHECK(mean_entropy(symmetric) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(mean_entropy({}) == 0.0);

  // Unweighted: length must not matter.
  const Op skewed[] = {{1, 2.0}, {1000000, 6.0}};
  CHECK(mean_entropy(skewed) == doctest::Approx(4.0).epsilon(1e-12));

  Rng rng(11);
  std::vector<Op> ops(50);
  double sum = 0.0;
  for (auto& [len, e] : ops) {
    len = 1 + rng.next_below(4096);
    e = rng.next_uniform(0.0, 8.0);
    sum += e;
  }
  CHECK(mean_entropy(ops) == doctest::Approx(sum / 50.0).epsilon(1e-12));

  std::vector<Op> reversed(ops.rbegin(), ops.rend());
  CHECK(mean_entropy(reversed) == doctest::Approx(mean_entropy(ops)).epsilon(1e-12));
}

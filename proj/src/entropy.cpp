#include "fbdet/entropy.hpp"

#include <array>
#include <cmath>

namespace fbdet {

EntropyEstimate shannon_entropy(std::span<const std::uint8_t> buf) {
  EntropyEstimate est;
  est.sample_len = buf.size();
  if (buf.size() <= 1) return est;

  std::array<std::uint64_t, 256> counts{};
  for (std::uint8_t b : buf) ++counts[b];

  const double n = static_cast<double>(buf.size());
  double h = 0.0;
  for (std::uint64_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  // log2 rounding can push a uniform histogram a hair past 8.
  est.bits_per_byte = std::min(h, 8.0);
  return est;
}

double mean_entropy(std::span<const std::pair<std::uint64_t, double>> ops) {
  if (ops.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [len, bpb] : ops) sum += bpb;
  return sum / static_cast<double>(ops.size());
}

}  // namespace fbdet

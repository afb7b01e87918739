#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace fbdet {

struct EntropyEstimate {
  double bits_per_byte = 0.0;  // [0, 8]
  std::uint64_t sample_len = 0;

  bool operator==(const EntropyEstimate&) const = default;
};

// Shannon entropy of the byte histogram, in bits per byte. Empty input is 0.
EntropyEstimate shannon_entropy(std::span<const std::uint8_t> buf);

// Unweighted per-operation mean of entropy values; the (length, entropy)
// pairs mirror how operations are recorded. An empty set averages to 0 so
// that read-free or write-free windows still produce a full feature vector.
double mean_entropy(std::span<const std::pair<std::uint64_t, double>> ops);

}  // namespace fbdet

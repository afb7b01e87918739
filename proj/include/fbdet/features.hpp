#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fbdet/trace.hpp"

namespace fbdet {

// Feature vector layout. The order is fixed: it is the training row layout,
// the CSV column order and the index space of the forest importances.
inline constexpr std::size_t kNumFeatures = 7;
inline constexpr std::size_t kAvgReadEntropy = 0;
inline constexpr std::size_t kAvgWriteEntropy = 1;
inline constexpr std::size_t kReadRatio = 2;
inline constexpr std::size_t kWriteRatio = 3;
inline constexpr std::size_t kNReaderProcs = 4;
inline constexpr std::size_t kNWriterProcs = 5;
inline constexpr std::size_t kNOps = 6;

using FeatureRow = std::array<double, kNumFeatures>;

const std::array<std::string, kNumFeatures>& feature_names();

// Window lengths of the classifier tiers, in seconds. Strictly increasing,
// and each length divides the next so that tier boundaries nest.
struct TierConfig {
  std::vector<std::uint32_t> windows_s;

  static TierConfig defaults();  // {1, 3, 6, 12, 24, 48, 96}
  void validate() const;
  std::size_t size() const { return windows_s.size(); }

  bool operator==(const TierConfig&) const = default;
};

TierConfig parse_tier_list(const std::string& comma_list);

// Half-open windows [k*w, (k+1)*w) aligned to the trace clock.
std::uint64_t window_index(std::uint64_t ts_us, std::uint32_t tier_window_s);

// Fraction of [0, size) covered by the union of (offset, length) intervals,
// clipped to the file. Intervals may overlap; overlap counts once.
double coverage_union(std::span<const std::pair<std::uint64_t, std::uint64_t>> intervals,
                      std::uint64_t size);

// The behavioral profile of one file over one time window.
struct FileWindowProfile {
  std::uint32_t file_id = 0;
  std::uint32_t tier = 0;  // index into TierConfig
  std::uint64_t window_start_us = 0;
  double avg_read_entropy = 0.0;
  double avg_write_entropy = 0.0;
  double read_ratio = 0.0;
  double write_ratio = 0.0;
  std::uint32_t n_reader_procs = 0;
  std::uint32_t n_writer_procs = 0;
  std::uint64_t n_ops = 0;
  ProcClass label = ProcClass::Benign;
  std::vector<std::uint32_t> active_pids;  // sorted

  FeatureRow features() const {
    return {avg_read_entropy,
            avg_write_entropy,
            read_ratio,
            write_ratio,
            static_cast<double>(n_reader_procs),
            static_cast<double>(n_writer_procs),
            static_cast<double>(n_ops)};
  }

  bool operator==(const FileWindowProfile&) const = default;
};

// Computes one profile per (critical file, tier, window) holding at least
// one operation. Windows with no activity emit nothing. A window is labeled
// Benign iff every active process is benign; otherwise it carries the most
// severe hostile class present. Output is sorted by (file_id, tier,
// window_start_us).
std::vector<FileWindowProfile> extract_profiles(const Trace& trace,
                                                const TierConfig& tiers);

// Feature dataset CSV. Lines starting with '#' before the header carry the
// run manifest and are skipped on read. Reals use 6 fractional digits.
void write_profiles_csv(std::ostream& out, std::span<const FileWindowProfile> profiles,
                        const std::string& manifest_comment = "");
std::vector<FileWindowProfile> parse_profiles_csv(std::istream& in);

}  // namespace fbdet

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "fbdet/forest.hpp"

namespace fbdet {

// One trained classifier per tier window length.
struct TierStack {
  TierConfig config;
  std::vector<Forest> forests;

  void validate() const;
};

struct Alert {
  std::uint32_t file_id = 0;
  std::uint32_t tier = 0;
  std::uint64_t window_start_us = 0;
  std::uint64_t alert_time_us = 0;  // the closing tier boundary
  std::vector<std::uint32_t> attributed_pids;  // every pid active on the file
  std::uint32_t votes_ransomware = 0;
  FeatureRow feature_vector{};

  bool operator==(const Alert&) const = default;
};

// One ransomware campaign as seen by the replay: when hostile activity
// began and when (if ever) the first alert implicated one of its processes.
struct CampaignStat {
  std::uint64_t first_ransomware_op_us = 0;
  std::optional<std::uint64_t> first_alert_us;
};

struct DetectionReport {
  std::vector<Alert> alerts;
  // pid -> boundary time of the earliest alert naming it; nullopt = clean.
  std::map<std::uint32_t, std::optional<std::uint64_t>> verdicts;
  std::vector<CampaignStat> campaigns;
};

// Tier indices whose window length divides t_us exactly. At t = 6 s with the
// default config this is tiers {1 s, 3 s, 6 s}.
std::vector<std::size_t> tiers_due(std::uint64_t t_us, const TierConfig& tiers);

// Offline replay: every tier is queried at each of its own window
// boundaries with the profile of the window that just closed; malicious
// verdicts become alerts attributing every process active on the file.
// Alerts are ordered by (boundary time, file_id, tier). The final partial
// window of each tier is closed at its nominal boundary.
DetectionReport run_detection(const Trace& trace, const TierStack& stack);

struct LatencyStats {
  double mean_s = 0.0;            // over detected campaigns
  double fraction_within_1s = 0.0;  // over all campaigns
  std::size_t campaigns = 0;
  std::size_t detected = 0;
};

// Throws if the report contains no campaigns.
LatencyStats detection_latency_stats(const DetectionReport& report);
LatencyStats detection_latency_stats(std::span<const DetectionReport> reports);

std::string report_to_json(const DetectionReport& report,
                           const std::string& manifest_json = "");

}  // namespace fbdet

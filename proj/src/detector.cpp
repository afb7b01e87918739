#include "fbdet/detector.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

#include "fbdet/version.hpp"

namespace fbdet {

namespace {
using Json = nlohmann::ordered_json;
}

void TierStack::validate() const {
  config.validate();
  if (forests.size() != config.windows_s.size())
    throw std::runtime_error("tier stack: one trained forest per tier required");
}

std::vector<std::size_t> tiers_due(std::uint64_t t_us, const TierConfig& tiers) {
  std::vector<std::size_t> due;
  for (std::size_t k = 0; k < tiers.windows_s.size(); ++k) {
    const std::uint64_t w_us = static_cast<std::uint64_t>(tiers.windows_s[k]) * 1'000'000ULL;
    if (t_us % w_us == 0) due.push_back(k);
  }
  return due;
}

DetectionReport run_detection(const Trace& trace, const TierStack& stack) {
  stack.validate();
  DetectionReport report;

  // Alerts come straight from the extractor's profiles, so the vector a
  // forest sees here is identical to the training-side computation.
  const std::vector<FileWindowProfile> profiles = extract_profiles(trace, stack.config);
  for (const FileWindowProfile& p : profiles) {
    const std::uint64_t w_us =
        static_cast<std::uint64_t>(stack.config.windows_s[p.tier]) * 1'000'000ULL;
    const Prediction pred = stack.forests[p.tier].predict(p.features());
    if (pred.cls != BinaryClass::Ransomware) continue;
    Alert a;
    a.file_id = p.file_id;
    a.tier = p.tier;
    a.window_start_us = p.window_start_us;
    a.alert_time_us = p.window_start_us + w_us;
    a.attributed_pids = p.active_pids;
    a.votes_ransomware = pred.votes_ransomware;
    a.feature_vector = p.features();
    report.alerts.push_back(std::move(a));
  }
  std::sort(report.alerts.begin(), report.alerts.end(),
            [](const Alert& a, const Alert& b) {
              return std::tie(a.alert_time_us, a.file_id, a.tier) <
                     std::tie(b.alert_time_us, b.file_id, b.tier);
            });

  for (const IoEvent& e : trace.events) report.verdicts.emplace(e.pid, std::nullopt);
  for (const Alert& a : report.alerts)
    for (std::uint32_t pid : a.attributed_pids) {
      auto& v = report.verdicts[pid];
      if (!v || *v > a.alert_time_us) v = a.alert_time_us;
    }

  // Campaign bookkeeping: all hostile pids in a trace form one campaign.
  std::optional<std::uint64_t> first_hostile_op;
  for (const IoEvent& e : trace.events) {
    if (trace.procs.at(e.pid).cls == ProcClass::Benign) continue;
    first_hostile_op = e.ts_us;
    break;
  }
  if (first_hostile_op) {
    CampaignStat c;
    c.first_ransomware_op_us = *first_hostile_op;
    for (const Alert& a : report.alerts) {
      const bool names_hostile =
          std::any_of(a.attributed_pids.begin(), a.attributed_pids.end(),
                      [&](std::uint32_t pid) {
                        return trace.procs.at(pid).cls != ProcClass::Benign;
                      });
      if (names_hostile) {
        c.first_alert_us = a.alert_time_us;
        break;
      }
    }
    report.campaigns.push_back(c);
  }
  return report;
}

LatencyStats detection_latency_stats(std::span<const DetectionReport> reports) {
  LatencyStats stats;
  double latency_sum_s = 0.0;
  std::size_t within_1s = 0;
  for (const DetectionReport& r : reports) {
    for (const CampaignStat& c : r.campaigns) {
      ++stats.campaigns;
      if (!c.first_alert_us) continue;
      ++stats.detected;
      const double latency_s =
          (static_cast<double>(*c.first_alert_us) -
           static_cast<double>(c.first_ransomware_op_us)) / 1e6;
      latency_sum_s += latency_s;
      if (latency_s <= 1.0) ++within_1s;
    }
  }
  if (stats.campaigns == 0)
    throw std::runtime_error("latency stats: no ransomware campaigns in report");
  stats.mean_s = stats.detected ? latency_sum_s / static_cast<double>(stats.detected) : 0.0;
  stats.fraction_within_1s =
      static_cast<double>(within_1s) / static_cast<double>(stats.campaigns);
  return stats;
}

LatencyStats detection_latency_stats(const DetectionReport& report) {
  return detection_latency_stats(std::span<const DetectionReport>(&report, 1));
}

std::string report_to_json(const DetectionReport& report, const std::string& manifest_json) {
  Json doc;
  doc["format_version"] = kReportFormatVersion;
  if (!manifest_json.empty()) doc["manifest"] = Json::parse(manifest_json);

  Json alerts = Json::array();
  for (const Alert& a : report.alerts) {
    alerts.push_back({{"file_id", a.file_id},
                      {"tier", a.tier},
                      {"window_start_us", a.window_start_us},
                      {"alert_time_us", a.alert_time_us},
                      {"attributed_pids", a.attributed_pids},
                      {"votes_ransomware", a.votes_ransomware},
                      {"features", a.feature_vector}});
  }
  doc["alerts"] = std::move(alerts);

  Json verdicts = Json::object();
  for (const auto& [pid, flagged_at] : report.verdicts) {
    if (flagged_at)
      verdicts[std::to_string(pid)] = {{"verdict", "flagged"}, {"flagged_at_us", *flagged_at}};
    else
      verdicts[std::to_string(pid)] = {{"verdict", "clean"}};
  }
  doc["verdicts"] = std::move(verdicts);

  Json campaigns = Json::array();
  for (const CampaignStat& c : report.campaigns) {
    Json cj = {{"first_ransomware_op_us", c.first_ransomware_op_us}};
    if (c.first_alert_us) {
      cj["first_alert_us"] = *c.first_alert_us;
      cj["latency_us"] = *c.first_alert_us - c.first_ransomware_op_us;
    }
    campaigns.push_back(std::move(cj));
  }
  doc["campaigns"] = std::move(campaigns);

  if (!report.campaigns.empty()) {
    const LatencyStats stats = detection_latency_stats(report);
    doc["latency"] = {{"mean_s", stats.mean_s},
                      {"fraction_within_1s", stats.fraction_within_1s},
                      {"campaigns", stats.campaigns},
                      {"detected", stats.detected}};
  }
  return doc.dump(1);
}

}  // namespace fbdet

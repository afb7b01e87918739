#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fbdet/detector.hpp"
#include "fbdet/forest.hpp"

namespace fbdet {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-tier training set plus per-class test sets. Splitting is by trace,
// never by row: adjacent windows of one campaign stay on the same side.
// Adaptive rows are routed to test unconditionally.
struct TierDatasets {
  Dataset train;
  std::map<ProcClass, Dataset> test;  // keyed by the row's window label
};

struct SplitDatasets {
  TierConfig tiers;
  std::vector<TierDatasets> per_tier;
};

SplitDatasets build_datasets(std::span<const Trace> traces, const TierConfig& tiers,
                             std::uint64_t split_seed, double train_fraction = 0.7);

// One forest per tier; tier i trains with RNG stream mix_seed(seed, i).
TierStack train_stack(const SplitDatasets& datasets, const ForestParams& params);

struct Confusion {
  std::uint64_t tn = 0, fp = 0, fn = 0, tp = 0;
};

struct TierMetrics {
  std::optional<double> tn;              // benign correctly kept benign
  std::optional<double> tp_traditional;
  std::optional<double> tp_evasive;
  std::optional<double> tp_adaptive;
  double accuracy = 0.0;                 // all test rows pooled
  std::optional<double> recall;          // ransomware classes pooled
  std::map<ProcClass, Confusion> confusion;  // benign vs each hostile class
};

std::vector<TierMetrics> evaluate(const TierStack& stack,
                                  const std::vector<TierDatasets>& test_sets);

struct MdiReport {
  std::vector<FeatureRow> per_tier;                      // normalized
  std::vector<std::vector<std::size_t>> ranking;        // descending importance
};

MdiReport mdi_report(const TierStack& stack);

std::string metrics_to_json(const TierConfig& tiers, std::span<const TierMetrics> metrics,
                            const std::string& manifest_json = "");
std::string confusion_to_csv(const TierConfig& tiers, std::span<const TierMetrics> metrics);
std::string mdi_to_csv(const TierConfig& tiers, const MdiReport& report);
std::string mdi_to_json(const TierConfig& tiers, const MdiReport& report,
                        const std::string& manifest_json = "");

}  // namespace fbdet

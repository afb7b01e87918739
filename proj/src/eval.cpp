#include "fbdet/eval.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "fbdet/rng.hpp"
#include "fbdet/threading.hpp"
#include "fbdet/version.hpp"

namespace fbdet {

namespace {

using Json = nlohmann::ordered_json;

double rate_or_throw(std::uint64_t correct, std::uint64_t total) {
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

SplitDatasets build_datasets(std::span<const Trace> traces, const TierConfig& tiers,
                             std::uint64_t split_seed, double train_fraction) {
  tiers.validate();
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw EvalError("train_fraction must be in (0,1)");

  std::map<ProcClass, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < traces.size(); ++i)
    by_class[traces[i].dominant_class()].push_back(i);

  const bool any_trainable = by_class.count(ProcClass::Benign) ||
                             by_class.count(ProcClass::Traditional) ||
                             by_class.count(ProcClass::Evasive);
  if (!any_trainable) throw EvalError("no trainable classes");
  for (ProcClass cls : {ProcClass::Benign, ProcClass::Traditional, ProcClass::Evasive,
                        ProcClass::Adaptive})
    if (!by_class.count(cls))
      throw EvalError(std::string("missing class: ") + to_string(cls));

  // Trace-level split. Adaptive traces are test-only: the spec of the
  // experiment is that the detector never trains on the adaptive class.
  std::vector<bool> in_train(traces.size(), false);
  for (auto& [cls, indices] : by_class) {
    if (cls == ProcClass::Adaptive) continue;
    Rng rng(mix_seed(split_seed, static_cast<std::uint64_t>(cls) + 17));
    for (std::size_t i = indices.size(); i > 1; --i)
      std::swap(indices[i - 1], indices[rng.next_below(i)]);
    std::size_t n_train = static_cast<std::size_t>(
        std::max(1.0, std::floor(train_fraction * static_cast<double>(indices.size()))));
    if (n_train == indices.size() && indices.size() > 1) --n_train;
    for (std::size_t i = 0; i < n_train; ++i) in_train[indices[i]] = true;
  }

  SplitDatasets out;
  out.tiers = tiers;
  out.per_tier.resize(tiers.size());

  std::vector<std::vector<FileWindowProfile>> profiles(traces.size());
  parallel_for(traces.size(), [&](std::size_t i) {
    profiles[i] = extract_profiles(traces[i], tiers);
  });

  for (std::size_t i = 0; i < traces.size(); ++i) {
    const bool train_side =
        in_train[i] && traces[i].dominant_class() != ProcClass::Adaptive;
    for (const FileWindowProfile& p : profiles[i]) {
      TierDatasets& td = out.per_tier[p.tier];
      const BinaryClass bin =
          p.label == ProcClass::Benign ? BinaryClass::Benign : BinaryClass::Ransomware;
      if (train_side)
        td.train.push(p.features(), bin);
      else
        td.test[p.label].push(p.features(), bin);
    }
  }

  for (std::size_t k = 0; k < out.per_tier.size(); ++k)
    if (out.per_tier[k].train.size() == 0)
      throw EvalError("empty tier dataset: no training rows for tier " + std::to_string(k));
  return out;
}

TierStack train_stack(const SplitDatasets& datasets, const ForestParams& params) {
  TierStack stack;
  stack.config = datasets.tiers;
  stack.forests.resize(datasets.per_tier.size());
  for (std::size_t k = 0; k < datasets.per_tier.size(); ++k) {
    ForestParams p = params;
    p.seed = mix_seed(params.seed, k + 1);
    stack.forests[k] = train_forest(datasets.per_tier[k].train, p);
  }
  stack.validate();
  return stack;
}

std::vector<TierMetrics> evaluate(const TierStack& stack,
                                  const std::vector<TierDatasets>& test_sets) {
  stack.validate();
  if (test_sets.size() != stack.forests.size())
    throw EvalError("test sets do not match the tier stack");

  std::vector<TierMetrics> out(test_sets.size());
  for (std::size_t k = 0; k < test_sets.size(); ++k) {
    const Forest& forest = stack.forests[k];
    TierMetrics& m = out[k];

    std::uint64_t total = 0, correct = 0;
    std::uint64_t rw_total = 0, rw_correct = 0;
    std::uint64_t benign_total = 0, benign_correct = 0;

    std::map<ProcClass, std::pair<std::uint64_t, std::uint64_t>> per_class;  // correct/total
    for (const auto& [cls, data] : test_sets[k].test) {
      auto& [cls_correct, cls_total] = per_class[cls];
      for (std::size_t i = 0; i < data.size(); ++i) {
        const BinaryClass truth = static_cast<BinaryClass>(data.labels[i]);
        const BinaryClass pred = forest.predict(data.rows[i]).cls;
        const bool ok = pred == truth;
        ++total;
        ++cls_total;
        correct += ok;
        cls_correct += ok;
        if (truth == BinaryClass::Ransomware) {
          ++rw_total;
          rw_correct += ok;
        } else {
          ++benign_total;
          benign_correct += ok;
        }
      }
    }
    if (total == 0) throw EvalError("empty test set for tier " + std::to_string(k));

    m.accuracy = rate_or_throw(correct, total);
    if (rw_total) m.recall = rate_or_throw(rw_correct, rw_total);
    if (benign_total) m.tn = rate_or_throw(benign_correct, benign_total);

    auto class_rate = [&](ProcClass cls) -> std::optional<double> {
      auto it = per_class.find(cls);
      if (it == per_class.end() || it->second.second == 0) return std::nullopt;
      return rate_or_throw(it->second.first, it->second.second);
    };
    m.tp_traditional = class_rate(ProcClass::Traditional);
    m.tp_evasive = class_rate(ProcClass::Evasive);
    m.tp_adaptive = class_rate(ProcClass::Adaptive);

    // Benign-vs-X confusion matrices, one per hostile class present.
    for (ProcClass cls : {ProcClass::Traditional, ProcClass::Evasive, ProcClass::Adaptive}) {
      auto it = test_sets[k].test.find(cls);
      if (it == test_sets[k].test.end() || it->second.size() == 0) continue;
      Confusion c;
      auto bit = test_sets[k].test.find(ProcClass::Benign);
      if (bit != test_sets[k].test.end()) {
        for (std::size_t i = 0; i < bit->second.size(); ++i) {
          const BinaryClass pred = forest.predict(bit->second.rows[i]).cls;
          if (pred == BinaryClass::Benign)
            ++c.tn;
          else
            ++c.fp;
        }
      }
      for (std::size_t i = 0; i < it->second.size(); ++i) {
        const BinaryClass pred = forest.predict(it->second.rows[i]).cls;
        if (pred == BinaryClass::Ransomware)
          ++c.tp;
        else
          ++c.fn;
      }
      m.confusion[cls] = c;
    }
  }
  return out;
}

MdiReport mdi_report(const TierStack& stack) {
  stack.validate();
  if (stack.forests.empty()) throw EvalError("untrained stack");
  MdiReport report;
  for (const Forest& forest : stack.forests) {
    if (forest.trees.empty()) throw EvalError("untrained stack");
    report.per_tier.push_back(forest.mdi);
    std::vector<std::size_t> order(kNumFeatures);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return forest.mdi[a] > forest.mdi[b];
    });
    report.ranking.push_back(std::move(order));
  }
  return report;
}

std::string metrics_to_json(const TierConfig& tiers, std::span<const TierMetrics> metrics,
                            const std::string& manifest_json) {
  Json doc;
  doc["format_version"] = kReportFormatVersion;
  if (!manifest_json.empty()) doc["manifest"] = Json::parse(manifest_json);
  Json arr = Json::array();
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    const TierMetrics& m = metrics[k];
    Json j;
    j["window_s"] = tiers.windows_s[k];
    auto put = [&](const char* key, const std::optional<double>& v) {
      if (v)
        j[key] = *v;
      else
        j[key] = nullptr;
    };
    put("tn", m.tn);
    put("tp_traditional", m.tp_traditional);
    put("tp_evasive", m.tp_evasive);
    put("tp_adaptive", m.tp_adaptive);
    j["accuracy"] = m.accuracy;
    put("recall", m.recall);
    Json conf = Json::object();
    for (const auto& [cls, c] : m.confusion)
      conf[to_string(cls)] = {{"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}, {"tp", c.tp}};
    j["confusion"] = std::move(conf);
    arr.push_back(std::move(j));
  }
  doc["tiers"] = std::move(arr);
  return doc.dump(1);
}

std::string confusion_to_csv(const TierConfig& tiers, std::span<const TierMetrics> metrics) {
  std::ostringstream out;
  out << "window_s,ransomware_class,tn,fp,fn,tp\n";
  for (std::size_t k = 0; k < metrics.size(); ++k)
    for (const auto& [cls, c] : metrics[k].confusion)
      out << tiers.windows_s[k] << ',' << to_string(cls) << ',' << c.tn << ',' << c.fp << ','
          << c.fn << ',' << c.tp << '\n';
  return out.str();
}

std::string mdi_to_csv(const TierConfig& tiers, const MdiReport& report) {
  std::ostringstream out;
  out << "window_s";
  for (const std::string& name : feature_names()) out << ',' << name;
  out << '\n';
  char buf[32];
  for (std::size_t k = 0; k < report.per_tier.size(); ++k) {
    out << tiers.windows_s[k];
    for (double v : report.per_tier[k]) {
      std::snprintf(buf, sizeof buf, "%.6f", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string mdi_to_json(const TierConfig& tiers, const MdiReport& report,
                        const std::string& manifest_json) {
  Json doc;
  doc["format_version"] = kReportFormatVersion;
  if (!manifest_json.empty()) doc["manifest"] = Json::parse(manifest_json);
  Json arr = Json::array();
  for (std::size_t k = 0; k < report.per_tier.size(); ++k) {
    Json j;
    j["window_s"] = tiers.windows_s[k];
    Json imp = Json::object();
    for (std::size_t f = 0; f < kNumFeatures; ++f)
      imp[feature_names()[f]] = report.per_tier[k][f];
    j["importance"] = std::move(imp);
    Json rank = Json::array();
    for (std::size_t f : report.ranking[k]) rank.push_back(feature_names()[f]);
    j["ranking"] = std::move(rank);
    arr.push_back(std::move(j));
  }
  doc["tiers"] = std::move(arr);
  return doc.dump(1);
}

}  // namespace fbdet

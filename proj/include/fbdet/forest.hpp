#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fbdet/features.hpp"

namespace fbdet {

enum class BinaryClass : std::uint8_t { Benign = 0, Ransomware = 1 };

struct Dataset {
  std::vector<FeatureRow> rows;
  std::vector<std::uint8_t> labels;  // 1 = ransomware

  void push(const FeatureRow& row, BinaryClass cls) {
    rows.push_back(row);
    labels.push_back(static_cast<std::uint8_t>(cls));
  }
  std::size_t size() const { return rows.size(); }
};

// Gini impurity 1 - sum((n_c/N)^2) of a binary class count pair.
double gini(const std::array<std::uint64_t, 2>& counts);

struct SplitChoice {
  std::size_t feature_index = 0;
  double threshold = 0.0;
  double impurity_decrease = 0.0;  // parent gini minus weighted child gini
};

// Scans candidate thresholds at midpoints of consecutive distinct sorted
// values per feature in the subset and returns the split maximizing the
// weighted Gini decrease. Ties break toward (lower feature, lower
// threshold). Returns nullopt when no split strictly decreases impurity.
std::optional<SplitChoice> best_split(const Dataset& data,
                                      const std::vector<std::size_t>& feature_subset);

// Flat node storage; children by index. feature < 0 marks a leaf.
struct TreeNode {
  std::int16_t feature = -1;
  double threshold = 0.0;            // rows with value <= threshold go left
  double impurity_decrease = 0.0;    // split nodes only
  std::uint64_t n_samples = 0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  BinaryClass leaf_class = BinaryClass::Benign;
  std::array<std::uint64_t, 2> class_counts{0, 0};

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // root at index 0

  BinaryClass predict(const FeatureRow& row) const;
};

struct ForestParams {
  std::uint32_t n_trees = 100;
  std::uint32_t max_depth = 16;
  std::uint32_t min_samples_leaf = 5;
  std::uint32_t features_per_split = 3;  // ceil(sqrt(7))
  std::uint64_t seed = 0;

  bool operator==(const ForestParams&) const = default;
};

struct Prediction {
  BinaryClass cls = BinaryClass::Benign;
  std::uint32_t votes_ransomware = 0;
};

struct Forest {
  ForestParams params;
  std::vector<Tree> trees;
  FeatureRow mdi{};  // normalized to sum 1 when any split exists

  // Majority vote; an exact tie is called Ransomware (missed ransomware
  // costs more than a false alarm).
  Prediction predict(const FeatureRow& row) const;
};

// Grows params.n_trees CART trees, each on a same-size bootstrap resample,
// drawing params.features_per_split candidate features per node. The tree
// at index i always uses the RNG stream mix_seed(params.seed, i), so serial
// and parallel training produce identical forests. Throws on an empty or
// single-class dataset.
Forest train_forest(const Dataset& data, const ForestParams& params);

// Versioned JSON model document {format_version, params, trees, mdi}.
// Serialization is canonical: identical forests give identical bytes.
std::string forest_to_json(const Forest& forest, const std::string& manifest_json = "");
Forest forest_from_json(const std::string& text);
void save_forest(const Forest& forest, const std::string& path,
                 const std::string& manifest_json = "");
Forest load_forest(const std::string& path);

}  // namespace fbdet

#include "fbdet/forest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "fbdet/rng.hpp"
#include "fbdet/threading.hpp"
#include "fbdet/version.hpp"

namespace fbdet {

namespace {

using Json = nlohmann::ordered_json;

struct NodeWork {
  std::vector<std::uint32_t> rows;
  std::uint32_t depth = 0;
  std::int32_t slot = -1;  // index of the node to fill
};

std::array<std::uint64_t, 2> count_classes(const Dataset& data,
                                           const std::vector<std::uint32_t>& rows) {
  std::array<std::uint64_t, 2> c{0, 0};
  for (std::uint32_t r : rows) ++c[data.labels[r]];
  return c;
}

BinaryClass majority_class(const std::array<std::uint64_t, 2>& counts) {
  // Ties go to Ransomware, same policy as forest voting.
  return counts[1] >= counts[0] ? BinaryClass::Ransomware : BinaryClass::Benign;
}

// Split search over the given rows. min_leaf constrains both sides.
std::optional<SplitChoice> find_split(const Dataset& data,
                                      const std::vector<std::uint32_t>& rows,
                                      const std::vector<std::size_t>& feature_subset,
                                      std::uint64_t min_leaf,
                                      std::vector<std::pair<double, std::uint8_t>>& scratch) {
  const std::uint64_t n = rows.size();
  if (n < 2 * min_leaf) return std::nullopt;
  const auto parent_counts = count_classes(data, rows);
  if (parent_counts[0] == 0 || parent_counts[1] == 0) return std::nullopt;
  const double parent_gini = gini(parent_counts);
  const double dn = static_cast<double>(n);

  std::optional<SplitChoice> best;
  for (std::size_t f : feature_subset) {
    scratch.clear();
    scratch.reserve(rows.size());
    for (std::uint32_t r : rows) scratch.emplace_back(data.rows[r][f], data.labels[r]);
    std::sort(scratch.begin(), scratch.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::array<std::uint64_t, 2> left{0, 0};
    for (std::uint64_t i = 1; i < n; ++i) {
      ++left[scratch[i - 1].second];
      if (scratch[i].first <= scratch[i - 1].first) continue;  // not a boundary
      if (i < min_leaf || n - i < min_leaf) continue;
      const std::array<std::uint64_t, 2> right{parent_counts[0] - left[0],
                                               parent_counts[1] - left[1]};
      const double wl = static_cast<double>(i) / dn;
      const double wr = static_cast<double>(n - i) / dn;
      const double decrease = parent_gini - wl * gini(left) - wr * gini(right);
      if (decrease <= 0.0) continue;
      const double threshold = (scratch[i - 1].first + scratch[i].first) / 2.0;
      if (!best || decrease > best->impurity_decrease ||
          (decrease == best->impurity_decrease &&
           (f < best->feature_index ||
            (f == best->feature_index && threshold < best->threshold)))) {
        best = SplitChoice{f, threshold, decrease};
      }
    }
  }
  return best;
}

void sample_feature_subset(Rng& rng, std::uint32_t k, std::vector<std::size_t>& out) {
  std::array<std::size_t, kNumFeatures> pool{0, 1, 2, 3, 4, 5, 6};
  const std::uint32_t take = std::min<std::uint32_t>(k, kNumFeatures);
  for (std::uint32_t i = 0; i < take; ++i) {
    const std::uint64_t j = i + rng.next_below(kNumFeatures - i);
    std::swap(pool[i], pool[j]);
  }
  out.assign(pool.begin(), pool.begin() + take);
  std::sort(out.begin(), out.end());  // canonical candidate order
}

Tree grow_tree(const Dataset& data, const ForestParams& params, std::uint64_t tree_seed) {
  Rng rng(tree_seed);
  const std::size_t n = data.size();

  std::vector<std::uint32_t> root_rows(n);
  for (std::size_t i = 0; i < n; ++i)
    root_rows[i] = static_cast<std::uint32_t>(rng.next_below(n));

  Tree tree;
  std::vector<std::pair<double, std::uint8_t>> scratch;
  std::vector<std::size_t> subset;

  // Depth-first, left before right, so RNG consumption is well defined.
  std::vector<NodeWork> stack;
  tree.nodes.emplace_back();
  stack.push_back({std::move(root_rows), 0, 0});

  while (!stack.empty()) {
    NodeWork work = std::move(stack.back());
    stack.pop_back();
    TreeNode& node = tree.nodes[work.slot];
    node.n_samples = work.rows.size();
    node.class_counts = count_classes(data, work.rows);

    std::optional<SplitChoice> split;
    if (work.depth < params.max_depth && node.class_counts[0] > 0 &&
        node.class_counts[1] > 0) {
      sample_feature_subset(rng, params.features_per_split, subset);
      split = find_split(data, work.rows, subset, params.min_samples_leaf, scratch);
    }
    if (!split) {
      node.feature = -1;
      node.leaf_class = majority_class(node.class_counts);
      continue;
    }

    node.feature = static_cast<std::int16_t>(split->feature_index);
    node.threshold = split->threshold;
    node.impurity_decrease = split->impurity_decrease;

    std::vector<std::uint32_t> left_rows, right_rows;
    left_rows.reserve(work.rows.size());
    right_rows.reserve(work.rows.size());
    for (std::uint32_t r : work.rows) {
      if (data.rows[r][split->feature_index] <= split->threshold)
        left_rows.push_back(r);
      else
        right_rows.push_back(r);
    }

    const std::int32_t left_slot = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    const std::int32_t right_slot = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[work.slot].left = left_slot;
    tree.nodes[work.slot].right = right_slot;

    // Right is pushed first so the left child is processed next (LIFO).
    stack.push_back({std::move(right_rows), work.depth + 1, right_slot});
    stack.push_back({std::move(left_rows), work.depth + 1, left_slot});
  }
  return tree;
}

FeatureRow tree_importances(const Tree& tree) {
  FeatureRow imp{};
  if (tree.nodes.empty()) return imp;
  const double n_root = static_cast<double>(tree.nodes[0].n_samples);
  for (const TreeNode& node : tree.nodes) {
    if (node.is_leaf()) continue;
    imp[static_cast<std::size_t>(node.feature)] +=
        (static_cast<double>(node.n_samples) / n_root) * node.impurity_decrease;
  }
  return imp;
}

Json node_to_json(const TreeNode& n) {
  Json j;
  if (n.is_leaf()) {
    j["c"] = static_cast<int>(n.leaf_class);
    j["n"] = {n.class_counts[0], n.class_counts[1]};
  } else {
    j["f"] = n.feature;
    j["t"] = n.threshold;
    j["d"] = n.impurity_decrease;
    j["s"] = n.n_samples;
    j["l"] = n.left;
    j["r"] = n.right;
    j["n"] = {n.class_counts[0], n.class_counts[1]};
  }
  return j;
}

TreeNode node_from_json(const Json& j) {
  TreeNode n;
  const auto& counts = j.at("n");
  n.class_counts = {counts.at(0).get<std::uint64_t>(), counts.at(1).get<std::uint64_t>()};
  if (j.contains("c")) {
    n.feature = -1;
    n.leaf_class = static_cast<BinaryClass>(j.at("c").get<int>());
    n.n_samples = n.class_counts[0] + n.class_counts[1];
  } else {
    n.feature = j.at("f").get<std::int16_t>();
    if (n.feature < 0 || n.feature >= static_cast<std::int16_t>(kNumFeatures))
      throw std::runtime_error("model: feature index out of range");
    n.threshold = j.at("t").get<double>();
    n.impurity_decrease = j.at("d").get<double>();
    n.n_samples = j.at("s").get<std::uint64_t>();
    n.left = j.at("l").get<std::int32_t>();
    n.right = j.at("r").get<std::int32_t>();
  }
  return n;
}

}  // namespace

double gini(const std::array<std::uint64_t, 2>& counts) {
  const std::uint64_t total = counts[0] + counts[1];
  if (total == 0) throw std::invalid_argument("gini: empty class counts");
  const double p0 = static_cast<double>(counts[0]) / static_cast<double>(total);
  const double p1 = static_cast<double>(counts[1]) / static_cast<double>(total);
  return 1.0 - (p0 * p0 + p1 * p1);
}

std::optional<SplitChoice> best_split(const Dataset& data,
                                      const std::vector<std::size_t>& feature_subset) {
  if (data.size() == 0) throw std::invalid_argument("best_split: empty dataset");
  std::vector<std::uint32_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<std::uint32_t>(i);
  std::vector<std::pair<double, std::uint8_t>> scratch;
  return find_split(data, rows, feature_subset, 1, scratch);
}

BinaryClass Tree::predict(const FeatureRow& row) const {
  std::int32_t i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[i].leaf_class;
}

Prediction Forest::predict(const FeatureRow& row) const {
  Prediction p;
  for (const Tree& tree : trees)
    if (tree.predict(row) == BinaryClass::Ransomware) ++p.votes_ransomware;
  p.cls = 2ULL * p.votes_ransomware >= trees.size() ? BinaryClass::Ransomware
                                                    : BinaryClass::Benign;
  return p;
}

Forest train_forest(const Dataset& data, const ForestParams& params) {
  if (data.size() == 0) throw std::invalid_argument("train_forest: empty dataset");
  if (data.rows.size() != data.labels.size())
    throw std::invalid_argument("train_forest: rows/labels size mismatch");
  std::array<std::uint64_t, 2> counts{0, 0};
  for (std::uint8_t l : data.labels) ++counts[l];
  if (counts[0] == 0 || counts[1] == 0)
    throw std::invalid_argument("train_forest: dataset must contain both classes");
  if (params.n_trees == 0) throw std::invalid_argument("train_forest: n_trees must be > 0");

  Forest forest;
  forest.params = params;
  forest.trees.resize(params.n_trees);

  parallel_for(params.n_trees, [&](std::size_t t) {
    forest.trees[t] = grow_tree(data, params, mix_seed(params.seed, t));
  });

  FeatureRow total{};
  for (const Tree& tree : forest.trees) {
    const FeatureRow imp = tree_importances(tree);
    for (std::size_t f = 0; f < kNumFeatures; ++f) total[f] += imp[f];
  }
  double sum = 0.0;
  for (double v : total) sum += v;
  if (sum > 0.0)
    for (double& v : total) v /= sum;
  forest.mdi = total;
  return forest;
}

std::string forest_to_json(const Forest& forest, const std::string& manifest_json) {
  Json doc;
  doc["format_version"] = kModelFormatVersion;
  if (!manifest_json.empty()) doc["manifest"] = Json::parse(manifest_json);
  doc["params"] = {{"n_trees", forest.params.n_trees},
                   {"max_depth", forest.params.max_depth},
                   {"min_samples_leaf", forest.params.min_samples_leaf},
                   {"features_per_split", forest.params.features_per_split},
                   {"seed", forest.params.seed}};
  doc["mdi"] = forest.mdi;
  Json trees = Json::array();
  for (const Tree& tree : forest.trees) {
    Json nodes = Json::array();
    for (const TreeNode& n : tree.nodes) nodes.push_back(node_to_json(n));
    trees.push_back(std::move(nodes));
  }
  doc["trees"] = std::move(trees);
  return doc.dump(1);
}

Forest forest_from_json(const std::string& text) {
  const Json doc = Json::parse(text);
  if (doc.at("format_version").get<int>() != kModelFormatVersion)
    throw std::runtime_error("model: unsupported format_version");
  Forest forest;
  const Json& p = doc.at("params");
  forest.params.n_trees = p.at("n_trees").get<std::uint32_t>();
  forest.params.max_depth = p.at("max_depth").get<std::uint32_t>();
  forest.params.min_samples_leaf = p.at("min_samples_leaf").get<std::uint32_t>();
  forest.params.features_per_split = p.at("features_per_split").get<std::uint32_t>();
  forest.params.seed = p.at("seed").get<std::uint64_t>();
  const auto& mdi = doc.at("mdi");
  if (mdi.size() != kNumFeatures) throw std::runtime_error("model: bad mdi arity");
  for (std::size_t f = 0; f < kNumFeatures; ++f) forest.mdi[f] = mdi.at(f).get<double>();
  for (const Json& tj : doc.at("trees")) {
    Tree tree;
    for (const Json& nj : tj) tree.nodes.push_back(node_from_json(nj));
    if (tree.nodes.empty()) throw std::runtime_error("model: empty tree");
    for (const TreeNode& n : tree.nodes) {
      if (n.is_leaf()) continue;
      if (n.left < 0 || n.right < 0 ||
          n.left >= static_cast<std::int32_t>(tree.nodes.size()) ||
          n.right >= static_cast<std::int32_t>(tree.nodes.size()))
        throw std::runtime_error("model: child index out of range");
    }
    forest.trees.push_back(std::move(tree));
  }
  if (forest.trees.size() != forest.params.n_trees)
    throw std::runtime_error("model: tree count disagrees with params");
  return forest;
}

void save_forest(const Forest& forest, const std::string& path,
                 const std::string& manifest_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << forest_to_json(forest, manifest_json) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Forest load_forest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return forest_from_json(ss.str());
}

}  // namespace fbdet

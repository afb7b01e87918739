#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fbdet/simulator.hpp"

namespace fbdet {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat `key = value` document with '#' comments. Unknown keys are rejected
// so typos surface instead of silently falling back to defaults.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text);
  static KeyValueFile load(const std::string& path);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback);
  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback);
  double get_real(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);

  // Throws if any key was never consumed by a getter.
  void reject_unknown_keys() const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> consumed_;
};

// Generation config document (versioned; see configs/ for examples).
GenConfig parse_gen_config(const std::string& text);
GenConfig load_gen_config(const std::string& path);
std::string gen_config_to_string(const GenConfig& cfg);

// Recipe for the default synthetic corpus: per-class trace counts plus the
// shared generator parameters. Evasive traces cycle through the three
// modes; adaptive traces cycle through the knob variants (entropy padding,
// slowdown, few-process), none of which ever enter training.
struct CorpusRecipe {
  std::uint64_t base_seed = 7;
  std::uint32_t n_benign = 40;
  std::uint32_t n_traditional = 20;
  std::uint32_t n_evasive = 20;
  std::uint32_t n_adaptive = 10;
  GenConfig base;  // benign workload + files/duration shared by all traces

  std::uint64_t traditional_op_size = 65536;
  std::uint32_t evasive_n_procs = 8;
  std::uint64_t evasive_op_size_cap = 8192;
  std::uint32_t evasive_ops_cap = 6;
  double adaptive_target_entropy = 4.5;
  double adaptive_slowdown = 4.0;

  bool operator==(const CorpusRecipe&) const = default;
};

CorpusRecipe default_corpus_recipe();
CorpusRecipe parse_corpus_recipe(const std::string& text);
CorpusRecipe load_corpus_recipe(const std::string& path);
std::string corpus_recipe_to_string(const CorpusRecipe& recipe);

// The GenConfig of trace `index` within each class block of the corpus.
GenConfig corpus_trace_config(const CorpusRecipe& recipe, ProcClass cls, std::uint32_t index);

// All corpus traces: benign block, then traditional, evasive, adaptive.
std::vector<Trace> generate_corpus(const CorpusRecipe& recipe);

// Provenance block embedded in every artifact a CLI run writes.
struct RunManifest {
  std::string subcommand;
  std::string config_path;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string tool_version;

  std::string to_json() const;
};

}  // namespace fbdet

#include "fbdet/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "fbdet/rng.hpp"
#include "fbdet/threading.hpp"
#include "fbdet/version.hpp"

namespace fbdet {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse(const std::string& text) {
  KeyValueFile f;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (!f.values_.emplace(key, value).second)
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
  }
  return f;
}

KeyValueFile KeyValueFile::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool KeyValueFile::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) {
  consumed_[key] = true;
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::int64_t KeyValueFile::get_int(const std::string& key, std::int64_t fallback) {
  consumed_[key] = true;
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::int64_t v{};
  auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc{} || p != it->second.data() + it->second.size())
    throw ConfigError("config key '" + key + "': expected integer, got '" + it->second + "'");
  return v;
}

std::uint64_t KeyValueFile::get_uint(const std::string& key, std::uint64_t fallback) {
  consumed_[key] = true;
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t v{};
  auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc{} || p != it->second.data() + it->second.size())
    throw ConfigError("config key '" + key + "': expected non-negative integer, got '" +
                      it->second + "'");
  return v;
}

double KeyValueFile::get_real(const std::string& key, double fallback) {
  consumed_[key] = true;
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  double v{};
  auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc{} || p != it->second.data() + it->second.size())
    throw ConfigError("config key '" + key + "': expected number, got '" + it->second + "'");
  return v;
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) {
  consumed_[key] = true;
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + it->second + "'");
}

void KeyValueFile::reject_unknown_keys() const {
  for (const auto& [key, value] : values_)
    if (!consumed_.count(key))
      throw ConfigError("unknown config key '" + key + "'");
}

namespace {

GenConfig gen_config_from_kv(KeyValueFile& kv) {
  const auto version = kv.get_uint("version", kConfigFormatVersion);
  if (version != static_cast<std::uint64_t>(kConfigFormatVersion))
    throw ConfigError("unsupported config version " + std::to_string(version));

  GenConfig cfg;
  cfg.seed = kv.get_uint("seed", cfg.seed);
  cfg.duration_s = kv.get_real("duration_s", cfg.duration_s);
  cfg.n_files = static_cast<std::uint32_t>(kv.get_uint("n_files", cfg.n_files));
  cfg.file_size_min = kv.get_uint("file_size_min", cfg.file_size_min);
  cfg.file_size_max = kv.get_uint("file_size_max", cfg.file_size_max);
  cfg.n_benign_procs = static_cast<std::uint32_t>(kv.get_uint("n_benign_procs", cfg.n_benign_procs));
  cfg.benign_op_rate_hz = kv.get_real("benign_op_rate_hz", cfg.benign_op_rate_hz);
  cfg.benign_entropy_mean = kv.get_real("benign_entropy_mean", cfg.benign_entropy_mean);
  cfg.benign_entropy_stddev = kv.get_real("benign_entropy_stddev", cfg.benign_entropy_stddev);
  cfg.benign_write_fraction = kv.get_real("benign_write_fraction", cfg.benign_write_fraction);
  cfg.benign_write_coverage_per_window =
      kv.get_real("benign_write_coverage_per_window", cfg.benign_write_coverage_per_window);

  const std::string cls = kv.get_string("attack_class", "");
  if (!cls.empty() && cls != "none") {
    AttackConfig atk;
    atk.cls = proc_class_from_string(cls);
    atk.start_s = kv.get_real("attack_start_s", atk.start_s);
    atk.n_procs = static_cast<std::uint32_t>(kv.get_uint("attack_n_procs", atk.n_procs));
    atk.op_size_cap = kv.get_uint("attack_op_size_cap", atk.op_size_cap);
    atk.ops_per_proc_cap_per_window = static_cast<std::uint32_t>(
        kv.get_uint("attack_ops_per_proc_cap_per_window", atk.ops_per_proc_cap_per_window));
    atk.mode = evasive_mode_from_string(kv.get_string("attack_mode", to_string(atk.mode)));
    atk.adaptive.entropy_padding =
        kv.get_bool("adaptive_entropy_padding", atk.adaptive.entropy_padding);
    atk.adaptive.target_avg_write_entropy =
        kv.get_real("adaptive_target_avg_write_entropy", atk.adaptive.target_avg_write_entropy);
    atk.adaptive.slowdown_factor =
        kv.get_real("adaptive_slowdown_factor", atk.adaptive.slowdown_factor);
    atk.adaptive.few_process = kv.get_bool("adaptive_few_process", atk.adaptive.few_process);
    cfg.attack = atk;
  } else {
    // Consume attack keys so reject_unknown_keys stays accurate for
    // templates that keep them commented in.
  }
  return cfg;
}

}  // namespace

GenConfig parse_gen_config(const std::string& text) {
  KeyValueFile kv = KeyValueFile::parse(text);
  GenConfig cfg = gen_config_from_kv(kv);
  kv.reject_unknown_keys();
  cfg.validate();
  return cfg;
}

GenConfig load_gen_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_gen_config(ss.str());
}

std::string gen_config_to_string(const GenConfig& cfg) {
  std::ostringstream out;
  out << "version = " << kConfigFormatVersion << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "duration_s = " << cfg.duration_s << '\n';
  out << "n_files = " << cfg.n_files << '\n';
  out << "file_size_min = " << cfg.file_size_min << '\n';
  out << "file_size_max = " << cfg.file_size_max << '\n';
  out << "n_benign_procs = " << cfg.n_benign_procs << '\n';
  out << "benign_op_rate_hz = " << cfg.benign_op_rate_hz << '\n';
  out << "benign_entropy_mean = " << cfg.benign_entropy_mean << '\n';
  out << "benign_entropy_stddev = " << cfg.benign_entropy_stddev << '\n';
  out << "benign_write_fraction = " << cfg.benign_write_fraction << '\n';
  out << "benign_write_coverage_per_window = " << cfg.benign_write_coverage_per_window << '\n';
  if (cfg.attack) {
    const AttackConfig& a = *cfg.attack;
    out << "attack_class = " << to_string(a.cls) << '\n';
    out << "attack_start_s = " << a.start_s << '\n';
    out << "attack_n_procs = " << a.n_procs << '\n';
    out << "attack_op_size_cap = " << a.op_size_cap << '\n';
    out << "attack_ops_per_proc_cap_per_window = " << a.ops_per_proc_cap_per_window << '\n';
    out << "attack_mode = " << to_string(a.mode) << '\n';
    if (a.cls == ProcClass::Adaptive) {
      out << "adaptive_entropy_padding = " << (a.adaptive.entropy_padding ? "true" : "false")
          << '\n';
      out << "adaptive_target_avg_write_entropy = " << a.adaptive.target_avg_write_entropy
          << '\n';
      out << "adaptive_slowdown_factor = " << a.adaptive.slowdown_factor << '\n';
      out << "adaptive_few_process = " << (a.adaptive.few_process ? "true" : "false") << '\n';
    }
  }
  return out.str();
}

CorpusRecipe default_corpus_recipe() {
  CorpusRecipe r;
  r.base.duration_s = 120.0;
  r.base.n_files = 24;
  r.base.file_size_min = 16384;
  r.base.file_size_max = 262144;
  r.base.n_benign_procs = 4;
  r.base.benign_op_rate_hz = 12.0;
  r.base.benign_entropy_mean = 4.5;
  r.base.benign_entropy_stddev = 1.2;
  r.base.benign_write_fraction = 0.45;
  r.base.benign_write_coverage_per_window = 0.15;
  return r;
}

CorpusRecipe parse_corpus_recipe(const std::string& text) {
  KeyValueFile kv = KeyValueFile::parse(text);
  const auto version = kv.get_uint("version", kConfigFormatVersion);
  if (version != static_cast<std::uint64_t>(kConfigFormatVersion))
    throw ConfigError("unsupported recipe version " + std::to_string(version));

  CorpusRecipe r = default_corpus_recipe();
  r.base_seed = kv.get_uint("base_seed", r.base_seed);
  r.n_benign = static_cast<std::uint32_t>(kv.get_uint("n_benign_traces", r.n_benign));
  r.n_traditional =
      static_cast<std::uint32_t>(kv.get_uint("n_traditional_traces", r.n_traditional));
  r.n_evasive = static_cast<std::uint32_t>(kv.get_uint("n_evasive_traces", r.n_evasive));
  r.n_adaptive = static_cast<std::uint32_t>(kv.get_uint("n_adaptive_traces", r.n_adaptive));

  r.base.duration_s = kv.get_real("duration_s", r.base.duration_s);
  r.base.n_files = static_cast<std::uint32_t>(kv.get_uint("n_files", r.base.n_files));
  r.base.file_size_min = kv.get_uint("file_size_min", r.base.file_size_min);
  r.base.file_size_max = kv.get_uint("file_size_max", r.base.file_size_max);
  r.base.n_benign_procs =
      static_cast<std::uint32_t>(kv.get_uint("n_benign_procs", r.base.n_benign_procs));
  r.base.benign_op_rate_hz = kv.get_real("benign_op_rate_hz", r.base.benign_op_rate_hz);
  r.base.benign_entropy_mean = kv.get_real("benign_entropy_mean", r.base.benign_entropy_mean);
  r.base.benign_entropy_stddev =
      kv.get_real("benign_entropy_stddev", r.base.benign_entropy_stddev);
  r.base.benign_write_fraction =
      kv.get_real("benign_write_fraction", r.base.benign_write_fraction);
  r.base.benign_write_coverage_per_window =
      kv.get_real("benign_write_coverage_per_window", r.base.benign_write_coverage_per_window);

  r.traditional_op_size = kv.get_uint("traditional_op_size", r.traditional_op_size);
  r.evasive_n_procs =
      static_cast<std::uint32_t>(kv.get_uint("evasive_n_procs", r.evasive_n_procs));
  r.evasive_op_size_cap = kv.get_uint("evasive_op_size_cap", r.evasive_op_size_cap);
  r.evasive_ops_cap = static_cast<std::uint32_t>(kv.get_uint("evasive_ops_cap", r.evasive_ops_cap));
  r.adaptive_target_entropy = kv.get_real("adaptive_target_entropy", r.adaptive_target_entropy);
  r.adaptive_slowdown = kv.get_real("adaptive_slowdown", r.adaptive_slowdown);

  kv.reject_unknown_keys();
  r.base.validate();
  return r;
}

CorpusRecipe load_corpus_recipe(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open recipe file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_corpus_recipe(ss.str());
}

std::string corpus_recipe_to_string(const CorpusRecipe& r) {
  std::ostringstream out;
  out << "version = " << kConfigFormatVersion << '\n';
  out << "base_seed = " << r.base_seed << '\n';
  out << "n_benign_traces = " << r.n_benign << '\n';
  out << "n_traditional_traces = " << r.n_traditional << '\n';
  out << "n_evasive_traces = " << r.n_evasive << '\n';
  out << "n_adaptive_traces = " << r.n_adaptive << '\n';
  out << "duration_s = " << r.base.duration_s << '\n';
  out << "n_files = " << r.base.n_files << '\n';
  out << "file_size_min = " << r.base.file_size_min << '\n';
  out << "file_size_max = " << r.base.file_size_max << '\n';
  out << "n_benign_procs = " << r.base.n_benign_procs << '\n';
  out << "benign_op_rate_hz = " << r.base.benign_op_rate_hz << '\n';
  out << "benign_entropy_mean = " << r.base.benign_entropy_mean << '\n';
  out << "benign_entropy_stddev = " << r.base.benign_entropy_stddev << '\n';
  out << "benign_write_fraction = " << r.base.benign_write_fraction << '\n';
  out << "benign_write_coverage_per_window = " << r.base.benign_write_coverage_per_window
      << '\n';
  out << "traditional_op_size = " << r.traditional_op_size << '\n';
  out << "evasive_n_procs = " << r.evasive_n_procs << '\n';
  out << "evasive_op_size_cap = " << r.evasive_op_size_cap << '\n';
  out << "evasive_ops_cap = " << r.evasive_ops_cap << '\n';
  out << "adaptive_target_entropy = " << r.adaptive_target_entropy << '\n';
  out << "adaptive_slowdown = " << r.adaptive_slowdown << '\n';
  return out.str();
}

GenConfig corpus_trace_config(const CorpusRecipe& recipe, ProcClass cls, std::uint32_t index) {
  GenConfig cfg = recipe.base;
  switch (cls) {
    case ProcClass::Benign:
      cfg.seed = mix_seed(recipe.base_seed, 100 + index);
      return cfg;
    case ProcClass::Traditional: {
      cfg.seed = mix_seed(recipe.base_seed, 200 + index);
      AttackConfig atk;
      atk.cls = ProcClass::Traditional;
      atk.start_s = 5.0 + static_cast<double>((index * 7) % 60);
      atk.n_procs = 1;
      atk.op_size_cap = recipe.traditional_op_size;
      cfg.attack = atk;
      return cfg;
    }
    case ProcClass::Evasive: {
      cfg.seed = mix_seed(recipe.base_seed, 300 + index);
      AttackConfig atk;
      atk.cls = ProcClass::Evasive;
      atk.start_s = 5.0 + static_cast<double>((index * 5) % 30);
      atk.n_procs = recipe.evasive_n_procs;
      atk.op_size_cap = recipe.evasive_op_size_cap;
      atk.ops_per_proc_cap_per_window = recipe.evasive_ops_cap;
      switch (index % 3) {
        case 0: atk.mode = EvasiveMode::FunctionalSplit; break;
        case 1: atk.mode = EvasiveMode::ProcessSplit; break;
        default: atk.mode = EvasiveMode::Mimicry; break;
      }
      cfg.attack = atk;
      return cfg;
    }
    case ProcClass::Adaptive: {
      cfg.seed = mix_seed(recipe.base_seed, 400 + index);
      AttackConfig atk;
      atk.cls = ProcClass::Adaptive;
      atk.start_s = 5.0 + static_cast<double>((index * 11) % 30);
      atk.n_procs = recipe.evasive_n_procs;
      atk.op_size_cap = recipe.evasive_op_size_cap;
      atk.ops_per_proc_cap_per_window = recipe.evasive_ops_cap;
      atk.mode = EvasiveMode::FunctionalSplit;
      switch (index % 3) {
        case 0:
          atk.adaptive.entropy_padding = true;
          atk.adaptive.target_avg_write_entropy = recipe.adaptive_target_entropy;
          break;
        case 1:
          atk.adaptive.slowdown_factor = recipe.adaptive_slowdown;
          break;
        default:
          atk.adaptive.few_process = true;
          break;
      }
      cfg.attack = atk;
      return cfg;
    }
  }
  throw ConfigError("bad corpus class");
}

std::vector<Trace> generate_corpus(const CorpusRecipe& recipe) {
  struct Item {
    ProcClass cls;
    std::uint32_t index;
  };
  std::vector<Item> items;
  for (std::uint32_t i = 0; i < recipe.n_benign; ++i) items.push_back({ProcClass::Benign, i});
  for (std::uint32_t i = 0; i < recipe.n_traditional; ++i)
    items.push_back({ProcClass::Traditional, i});
  for (std::uint32_t i = 0; i < recipe.n_evasive; ++i) items.push_back({ProcClass::Evasive, i});
  for (std::uint32_t i = 0; i < recipe.n_adaptive; ++i) items.push_back({ProcClass::Adaptive, i});

  std::vector<Trace> traces(items.size());
  parallel_for(items.size(), [&](std::size_t i) {
    traces[i] = generate_trace(corpus_trace_config(recipe, items[i].cls, items[i].index));
  });
  return traces;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["subcommand"] = subcommand;
  j["config"] = config_path;
  j["seed"] = seed;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["tool_version"] = tool_version.empty() ? kVersion : tool_version;
  return j.dump();
}

}  // namespace fbdet

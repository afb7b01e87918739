#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "fbdet/trace.hpp"

namespace fbdet {

enum class EvasiveMode : std::uint8_t { ProcessSplit, FunctionalSplit, Mimicry };

const char* to_string(EvasiveMode m);
EvasiveMode evasive_mode_from_string(const std::string& s);

struct AdaptiveKnobs {
  bool entropy_padding = false;
  double target_avg_write_entropy = 4.5;
  double slowdown_factor = 1.0;
  bool few_process = false;

  bool operator==(const AdaptiveKnobs&) const = default;
};

struct AttackConfig {
  ProcClass cls = ProcClass::Traditional;  // Traditional | Evasive | Adaptive
  double start_s = 0.0;
  std::uint32_t n_procs = 1;
  std::uint64_t op_size_cap = 16384;              // evasive/adaptive chunking
  std::uint32_t ops_per_proc_cap_per_window = 6;  // per 1-s window
  EvasiveMode mode = EvasiveMode::FunctionalSplit;
  AdaptiveKnobs adaptive;

  bool operator==(const AttackConfig&) const = default;
};

struct GenConfig {
  std::uint64_t seed = 0;
  double duration_s = 60.0;
  std::uint32_t n_files = 16;
  std::uint64_t file_size_min = 16384;
  std::uint64_t file_size_max = 262144;
  std::uint32_t n_benign_procs = 4;
  double benign_op_rate_hz = 12.0;  // per process
  double benign_entropy_mean = 4.5;
  double benign_entropy_stddev = 1.2;
  // Fraction of benign operations that are writes. The spec of the benign
  // workload needs write-free configurations, so the mix is explicit.
  double benign_write_fraction = 0.45;
  double benign_write_coverage_per_window = 0.15;
  std::optional<AttackConfig> attack;

  void validate() const;

  bool operator==(const GenConfig&) const = default;
};

class GenError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministic synthetic trace generation: a fixed GenConfig yields
// byte-identical trace files. Benign activity uses Poisson arrivals per
// process with home-file affinity; attacks overlay the benign background
// when n_benign_procs > 0. Every attack generator ends with each victim
// file fully overwritten at entropy >= 7.9 or throws GenError if the
// configuration cannot finish within the trace duration.
Trace gen_benign(const GenConfig& cfg);
Trace gen_traditional(const GenConfig& cfg);
Trace gen_evasive(const GenConfig& cfg);
Trace gen_adaptive(const GenConfig& cfg);

// Dispatches on cfg.attack (absent -> benign).
Trace generate_trace(const GenConfig& cfg);

// First pid used for attack processes; benign pids start at 1.
inline constexpr std::uint32_t kAttackPidBase = 1000;

}  // namespace fbdet

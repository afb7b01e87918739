#include "fbdet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <vector>

#include "fbdet/rng.hpp"

namespace fbdet {

namespace {

constexpr std::uint64_t kWindowUs = 1'000'000;  // staging/scheduling granularity
constexpr double kTraditionalOpRateHz = 5000.0;
constexpr double kHomeFileAffinity = 0.9;
constexpr double kBenignFullReadProb = 0.03;
constexpr double kPadEntropyMin = 0.05;
constexpr double kPadEntropyMax = 0.8;

double draw_benign_entropy(Rng& rng, const GenConfig& cfg) {
  const double v = rng.next_normal(cfg.benign_entropy_mean, cfg.benign_entropy_stddev);
  return quantize_entropy(std::min(8.0, std::max(0.0, v)));
}

double draw_cipher_entropy(Rng& rng) {
  // Integer millibits keep the value exactly representable in the format.
  return static_cast<double>(rng.next_range(7900, 8000)) / 1000.0;
}

void sort_events(std::vector<IoEvent>& events) {
  std::stable_sort(events.begin(), events.end(), [](const IoEvent& a, const IoEvent& b) {
    return std::tie(a.ts_us, a.pid, a.file_id, a.offset) <
           std::tie(b.ts_us, b.pid, b.file_id, b.offset);
  });
}

Trace make_skeleton(const GenConfig& cfg) {
  Trace t;
  t.duration_us = static_cast<std::uint64_t>(std::llround(cfg.duration_s * 1e6));
  Rng rng(mix_seed(cfg.seed, 1));
  for (std::uint32_t f = 0; f < cfg.n_files; ++f) {
    FileMeta meta;
    meta.file_id = f;
    meta.size_bytes = rng.next_range(cfg.file_size_min, cfg.file_size_max);
    meta.critical = true;
    t.files.emplace(f, meta);
  }
  for (std::uint32_t p = 0; p < cfg.n_benign_procs; ++p)
    t.procs.emplace(p + 1, ProcessLabel{p + 1, ProcClass::Benign});
  return t;
}

void gen_benign_events(const GenConfig& cfg, Trace& t) {
  if (cfg.n_benign_procs == 0 || cfg.benign_op_rate_hz <= 0.0) return;
  Rng rng(mix_seed(cfg.seed, 2));

  for (std::uint32_t p = 0; p < cfg.n_benign_procs; ++p) {
    const std::uint32_t pid = p + 1;
    std::vector<std::uint32_t> home;
    for (std::uint32_t f = p; f < cfg.n_files; f += cfg.n_benign_procs) home.push_back(f);
    if (home.empty()) home.push_back(p % cfg.n_files);

    // Expected writes per home file per 1-s window; sizes the write length
    // so the per-window coverage stays below the target in expectation
    // (0.8 margin absorbs stray accesses from other processes).
    const double writes_per_window =
        std::max(1.0, cfg.benign_op_rate_hz * cfg.benign_write_fraction /
                          static_cast<double>(home.size()));

    double now_s = 0.0;
    for (;;) {
      now_s += rng.next_exponential(cfg.benign_op_rate_hz);
      if (now_s >= cfg.duration_s) break;
      const bool stray = rng.next_double() >= kHomeFileAffinity;
      const std::uint32_t file_id =
          stray ? static_cast<std::uint32_t>(rng.next_below(cfg.n_files))
                : home[rng.next_below(home.size())];
      const std::uint64_t size = t.files.at(file_id).size_bytes;

      IoEvent e;
      e.ts_us = static_cast<std::uint64_t>(now_s * 1e6);
      e.pid = pid;
      e.file_id = file_id;
      e.entropy_bpb = draw_benign_entropy(rng, cfg);

      if (rng.next_double() < cfg.benign_write_fraction) {
        e.op = OpKind::Write;
        const double target_len = static_cast<double>(size) *
                                  cfg.benign_write_coverage_per_window * 0.8 /
                                  writes_per_window;
        const double jitter = rng.next_uniform(0.5, 1.5);
        std::uint64_t len = static_cast<std::uint64_t>(std::llround(target_len * jitter));
        len = std::max<std::uint64_t>(1, std::min(len, size));
        e.length = len;
        e.offset = rng.next_below(size - len + 1);
      } else {
        e.op = OpKind::Read;
        if (rng.next_double() < kBenignFullReadProb) {
          e.offset = 0;
          e.length = size;
        } else {
          const std::uint64_t max_len = std::min<std::uint64_t>(size, 65536);
          e.length = rng.next_range(std::min<std::uint64_t>(512, max_len), max_len);
          e.offset = rng.next_below(size - e.length + 1);
        }
      }
      t.events.push_back(e);
    }
  }
}

struct ChunkTask {
  std::uint32_t file_id;
  std::uint64_t offset;
  std::uint64_t length;
};

// Victim chunk list, round-robin across files so every window touches a
// broad slice of the file set.
std::vector<ChunkTask> make_chunks(const Trace& t, std::uint64_t chunk_size) {
  std::vector<ChunkTask> chunks;
  std::uint64_t c = 0;
  bool any = true;
  while (any) {
    any = false;
    for (const auto& [file_id, meta] : t.files) {
      const std::uint64_t off = c * chunk_size;
      if (off >= meta.size_bytes) continue;
      chunks.push_back({file_id, off, std::min(chunk_size, meta.size_bytes - off)});
      any = true;
    }
    ++c;
  }
  return chunks;
}

struct PendingWrite {
  ChunkTask chunk;
  std::uint64_t due_window;
  std::uint64_t min_ts_us;  // 0 when unconstrained
};

// Shared evasive/adaptive scheduler. Reads are assigned round-robin to
// reader pids and writes to writer pids under per-(pid, window) op budgets;
// FunctionalSplit delays each chunk's encrypted write to the next window.
struct AttackSchedule {
  std::vector<IoEvent> events;
  std::map<std::pair<std::uint64_t, std::uint32_t>, std::uint32_t> ops_used;  // (window, pid)
  std::vector<std::uint32_t> writer_pids;
  std::uint64_t last_window = 0;
};

AttackSchedule schedule_split_attack(const GenConfig& cfg, const Trace& t,
                                     std::uint32_t n_procs, std::uint64_t op_size_cap,
                                     std::uint32_t ops_cap, EvasiveMode mode,
                                     double slowdown, Rng& rng) {
  const AttackConfig& atk = *cfg.attack;
  AttackSchedule sched;

  std::vector<std::uint32_t> readers, writers;
  for (std::uint32_t i = 0; i < n_procs; ++i) {
    const std::uint32_t pid = kAttackPidBase + i;
    if (mode == EvasiveMode::FunctionalSplit) {
      if (i < (n_procs + 1) / 2)
        readers.push_back(pid);
      else
        writers.push_back(pid);
    } else {
      readers.push_back(pid);
      writers.push_back(pid);
    }
  }
  sched.writer_pids = writers;

  const std::uint32_t budget_cap = std::max<std::uint32_t>(
      1, static_cast<std::uint32_t>(std::floor(static_cast<double>(ops_cap) / slowdown)));
  const std::uint64_t first_window = static_cast<std::uint64_t>(atk.start_s);
  const std::uint64_t total_windows = static_cast<std::uint64_t>(cfg.duration_s);
  const std::uint64_t start_ts_us = static_cast<std::uint64_t>(atk.start_s * 1e6);

  std::deque<ChunkTask> read_q;
  for (const ChunkTask& c : make_chunks(t, op_size_cap)) read_q.push_back(c);
  std::deque<PendingWrite> write_q;

  const std::uint64_t write_lag = mode == EvasiveMode::FunctionalSplit ? 1 : 0;
  std::size_t reader_rr = 0, writer_rr = 0;

  auto window_ts = [&](std::uint64_t w, std::uint64_t min_ts) {
    const std::uint64_t lo = std::max(w * kWindowUs, std::max(min_ts, start_ts_us));
    const std::uint64_t hi = (w + 1) * kWindowUs - 1;
    return lo >= hi ? hi : lo + rng.next_below(hi - lo + 1);
  };
  auto take_budget = [&](std::uint64_t w, std::uint32_t pid) {
    std::uint32_t& used = sched.ops_used[{w, pid}];
    if (used >= budget_cap) return false;
    ++used;
    return true;
  };

  for (std::uint64_t w = first_window; !read_q.empty() || !write_q.empty(); ++w) {
    if (w >= total_windows)
      throw GenError("attack infeasible: op caps too tight to finish within duration");

    auto flush_writes = [&](bool final_pass) {
      std::size_t n = write_q.size();
      while (n-- > 0) {
        PendingWrite pw = write_q.front();
        write_q.pop_front();
        bool placed = false;
        if (pw.due_window <= w) {
          for (std::size_t i = 0; i < writers.size() && !placed; ++i) {
            const std::uint32_t pid = writers[(writer_rr + i) % writers.size()];
            if (!take_budget(w, pid)) continue;
            writer_rr = (writer_rr + i + 1) % writers.size();
            IoEvent e;
            e.ts_us = window_ts(w, pw.min_ts_us);
            e.pid = pid;
            e.file_id = pw.chunk.file_id;
            e.op = OpKind::Write;
            e.offset = pw.chunk.offset;
            e.length = pw.chunk.length;
            e.entropy_bpb = draw_cipher_entropy(rng);
            sched.events.push_back(e);
            sched.last_window = w;
            placed = true;
          }
        }
        if (!placed) write_q.push_back(pw);
      }
      (void)final_pass;
    };

    flush_writes(false);

    std::size_t stalled = 0;
    while (!read_q.empty() && stalled < readers.size()) {
      const std::uint32_t pid = readers[reader_rr % readers.size()];
      ++reader_rr;
      if (!take_budget(w, pid)) {
        ++stalled;
        continue;
      }
      stalled = 0;
      const ChunkTask chunk = read_q.front();
      read_q.pop_front();
      IoEvent e;
      e.ts_us = window_ts(w, 0);
      e.pid = pid;
      e.file_id = chunk.file_id;
      e.op = OpKind::Read;
      e.offset = chunk.offset;
      e.length = chunk.length;
      e.entropy_bpb = draw_benign_entropy(rng, cfg);
      sched.events.push_back(e);
      sched.last_window = w;
      write_q.push_back({chunk, w + write_lag, write_lag == 0 ? e.ts_us + 1 : 0});
    }

    if (write_lag == 0) flush_writes(true);
  }
  return sched;
}

// The mimicry caps come from the benign generator's own distributions: the
// 95th percentile of op sizes and of per-process ops per window.
void calibrate_mimicry_caps(const GenConfig& cfg, std::uint64_t& op_size_cap,
                            std::uint32_t& ops_cap) {
  Rng rng(mix_seed(cfg.seed, 5));
  const std::uint64_t mean_size = (cfg.file_size_min + cfg.file_size_max) / 2;
  const double n_home = std::max(
      1.0, static_cast<double>(cfg.n_files) / std::max<std::uint32_t>(1, cfg.n_benign_procs));
  const double writes_per_window =
      std::max(1.0, cfg.benign_op_rate_hz * cfg.benign_write_fraction / n_home);

  std::vector<std::uint64_t> sizes;
  sizes.reserve(4096);
  for (int i = 0; i < 4096; ++i) {
    if (rng.next_double() < cfg.benign_write_fraction) {
      const double target_len = static_cast<double>(mean_size) *
                                cfg.benign_write_coverage_per_window * 0.8 /
                                writes_per_window;
      sizes.push_back(std::max<std::uint64_t>(
          1, static_cast<std::uint64_t>(std::llround(target_len * rng.next_uniform(0.5, 1.5)))));
    } else {
      const std::uint64_t max_len = std::min<std::uint64_t>(mean_size, 65536);
      sizes.push_back(rng.next_range(std::min<std::uint64_t>(512, max_len), max_len));
    }
  }
  std::sort(sizes.begin(), sizes.end());
  op_size_cap = std::max<std::uint64_t>(1, sizes[sizes.size() * 95 / 100]);

  const double rate = cfg.benign_op_rate_hz;
  ops_cap = std::max<std::uint32_t>(
      1, static_cast<std::uint32_t>(std::ceil(rate + 1.645 * std::sqrt(rate))));
}

void apply_entropy_padding(const GenConfig& cfg, Trace& t, AttackSchedule& sched,
                           std::uint32_t ops_cap, double slowdown, ProcClass cls) {
  const double target = cfg.attack->adaptive.target_avg_write_entropy;
  Rng rng(mix_seed(cfg.seed, 4));
  const std::uint32_t budget_cap = std::max<std::uint32_t>(
      1, static_cast<std::uint32_t>(std::floor(static_cast<double>(ops_cap) / slowdown)));

  struct Group {
    double ent_sum = 0.0;
    std::uint64_t count = 0;
  };
  std::map<std::pair<std::uint32_t, std::uint64_t>, Group> groups;  // (file, window)
  for (const IoEvent& e : sched.events) {
    if (e.op != OpKind::Write) continue;
    Group& g = groups[{e.file_id, e.ts_us / kWindowUs}];
    g.ent_sum += e.entropy_bpb;
    ++g.count;
  }

  std::vector<std::uint32_t> pad_pids = sched.writer_pids;
  std::uint32_t next_pid = kAttackPidBase;
  for (const auto& [pid, label] : t.procs) next_pid = std::max(next_pid, pid + 1);

  for (auto& [key, g] : groups) {
    const auto& [file_id, window] = key;
    const std::uint64_t size = t.files.at(file_id).size_bytes;
    std::size_t rr = 0;
    while (g.ent_sum / static_cast<double>(g.count) > target) {
      std::uint32_t pid = 0;
      bool found = false;
      for (std::size_t i = 0; i < pad_pids.size() && !found; ++i) {
        const std::uint32_t cand = pad_pids[(rr + i) % pad_pids.size()];
        std::uint32_t& used = sched.ops_used[{window, cand}];
        if (used >= budget_cap) continue;
        ++used;
        pid = cand;
        rr = (rr + i + 1) % pad_pids.size();
        found = true;
      }
      if (!found) {
        // Every existing process is at its cap: the padding work forces
        // one more process into the window.
        pid = next_pid++;
        t.procs.emplace(pid, ProcessLabel{pid, cls});
        pad_pids.push_back(pid);
        ++sched.ops_used[{window, pid}];
      }
      IoEvent e;
      const std::uint64_t lo = window * kWindowUs;
      e.ts_us = lo + rng.next_below(kWindowUs - 1);
      e.pid = pid;
      e.file_id = file_id;
      e.op = OpKind::Write;
      e.length = 1 + rng.next_below(64);
      e.length = std::min(e.length, size);
      e.offset = rng.next_below(size - e.length + 1);
      e.entropy_bpb = quantize_entropy(rng.next_uniform(kPadEntropyMin, kPadEntropyMax));
      sched.events.push_back(e);
      g.ent_sum += e.entropy_bpb;
      ++g.count;
    }
  }
}

Trace finish(Trace t) {
  sort_events(t.events);
  t.validate();
  return t;
}

}  // namespace

const char* to_string(EvasiveMode m) {
  switch (m) {
    case EvasiveMode::ProcessSplit: return "process_split";
    case EvasiveMode::FunctionalSplit: return "functional_split";
    case EvasiveMode::Mimicry: return "mimicry";
  }
  return "?";
}

EvasiveMode evasive_mode_from_string(const std::string& s) {
  if (s == "process_split") return EvasiveMode::ProcessSplit;
  if (s == "functional_split") return EvasiveMode::FunctionalSplit;
  if (s == "mimicry") return EvasiveMode::Mimicry;
  throw GenError("unknown evasive mode '" + s + "'");
}

void GenConfig::validate() const {
  if (duration_s < 1.0) throw GenError("duration_s must be at least 1");
  if (n_files == 0) throw GenError("n_files must be positive");
  if (file_size_min == 0 || file_size_min > file_size_max)
    throw GenError("invalid file size range");
  if (n_benign_procs > 0 && benign_op_rate_hz <= 0.0)
    throw GenError("benign_op_rate_hz must be positive");
  if (benign_entropy_mean < 0.0 || benign_entropy_mean > 8.0)
    throw GenError("benign entropy mean out of [0,8]");
  if (benign_entropy_stddev < 0.0) throw GenError("benign entropy stddev negative");
  if (benign_write_fraction < 0.0 || benign_write_fraction > 1.0)
    throw GenError("benign_write_fraction out of [0,1]");
  if (benign_write_coverage_per_window < 0.0 || benign_write_coverage_per_window > 1.0)
    throw GenError("benign_write_coverage_per_window out of [0,1]");
  if (n_benign_procs > 0 && benign_op_rate_hz > 0.0 && benign_write_fraction > 0.0 &&
      benign_write_coverage_per_window == 0.0)
    throw GenError("infeasible: write coverage target 0 with a nonzero write rate");

  if (!attack) return;
  const AttackConfig& a = *attack;
  if (a.cls == ProcClass::Benign) throw GenError("attack class cannot be benign");
  if (a.start_s < 0.0 || a.start_s >= duration_s)
    throw GenError("attack start_s outside trace duration");
  if (a.n_procs == 0) throw GenError("attack n_procs must be positive");
  if (a.cls == ProcClass::Traditional && a.n_procs != 1)
    throw GenError("traditional attack uses exactly one process");
  if (a.op_size_cap == 0) throw GenError("attack op_size_cap must be positive");
  if (a.ops_per_proc_cap_per_window == 0)
    throw GenError("attack ops_per_proc_cap_per_window must be positive");
  if (a.cls != ProcClass::Traditional && a.mode == EvasiveMode::FunctionalSplit &&
      a.n_procs < 2)
    throw GenError("functional split needs at least 2 processes");
  if (a.cls == ProcClass::Adaptive) {
    const AdaptiveKnobs& k = a.adaptive;
    if (k.slowdown_factor < 1.0) throw GenError("slowdown_factor must be >= 1");
    if (k.target_avg_write_entropy < 0.0 || k.target_avg_write_entropy > 8.0)
      throw GenError("target_avg_write_entropy out of [0,8]");
    if (k.entropy_padding && k.target_avg_write_entropy < kPadEntropyMax + 0.1)
      throw GenError("contradictory knobs: entropy target below the padding floor");
  }
}

Trace gen_benign(const GenConfig& cfg) {
  cfg.validate();
  if (cfg.attack) throw GenError("gen_benign called with an attack configured");
  Trace t = make_skeleton(cfg);
  gen_benign_events(cfg, t);
  return finish(std::move(t));
}

Trace gen_traditional(const GenConfig& cfg) {
  cfg.validate();
  if (!cfg.attack || cfg.attack->cls != ProcClass::Traditional)
    throw GenError("gen_traditional requires attack class traditional");
  Trace t = make_skeleton(cfg);
  gen_benign_events(cfg, t);

  const AttackConfig& atk = *cfg.attack;
  const std::uint32_t pid = kAttackPidBase;
  t.procs.emplace(pid, ProcessLabel{pid, ProcClass::Traditional});

  Rng rng(mix_seed(cfg.seed, 3));
  const std::uint64_t chunk = std::max<std::uint64_t>(atk.op_size_cap, 65536);
  double now_s = atk.start_s;

  // One process, fastest possible: read a file fully, overwrite it fully,
  // move to the next.
  for (const auto& [file_id, meta] : t.files) {
    const std::uint64_t n_chunks = (meta.size_bytes + chunk - 1) / chunk;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::uint64_t c = 0; c < n_chunks; ++c) {
        now_s += rng.next_exponential(kTraditionalOpRateHz);
        if (now_s >= cfg.duration_s)
          throw GenError("attack infeasible: trace too short to finish encryption");
        IoEvent e;
        e.ts_us = static_cast<std::uint64_t>(now_s * 1e6);
        e.pid = pid;
        e.file_id = file_id;
        e.op = pass == 0 ? OpKind::Read : OpKind::Write;
        e.offset = c * chunk;
        e.length = std::min(chunk, meta.size_bytes - e.offset);
        e.entropy_bpb =
            pass == 0 ? draw_benign_entropy(rng, cfg) : draw_cipher_entropy(rng);
        t.events.push_back(e);
      }
    }
  }
  return finish(std::move(t));
}

Trace gen_evasive(const GenConfig& cfg) {
  cfg.validate();
  if (!cfg.attack || cfg.attack->cls != ProcClass::Evasive)
    throw GenError("gen_evasive requires attack class evasive");
  Trace t = make_skeleton(cfg);
  gen_benign_events(cfg, t);

  const AttackConfig& atk = *cfg.attack;
  for (std::uint32_t i = 0; i < atk.n_procs; ++i)
    t.procs.emplace(kAttackPidBase + i, ProcessLabel{kAttackPidBase + i, ProcClass::Evasive});

  std::uint64_t op_size_cap = atk.op_size_cap;
  std::uint32_t ops_cap = atk.ops_per_proc_cap_per_window;
  if (atk.mode == EvasiveMode::Mimicry) calibrate_mimicry_caps(cfg, op_size_cap, ops_cap);

  Rng rng(mix_seed(cfg.seed, 3));
  AttackSchedule sched =
      schedule_split_attack(cfg, t, atk.n_procs, op_size_cap, ops_cap, atk.mode, 1.0, rng);
  t.events.insert(t.events.end(), sched.events.begin(), sched.events.end());
  return finish(std::move(t));
}

Trace gen_adaptive(const GenConfig& cfg) {
  cfg.validate();
  if (!cfg.attack || cfg.attack->cls != ProcClass::Adaptive)
    throw GenError("gen_adaptive requires attack class adaptive");
  Trace t = make_skeleton(cfg);
  gen_benign_events(cfg, t);

  const AttackConfig& atk = *cfg.attack;
  const AdaptiveKnobs& knobs = atk.adaptive;

  std::uint32_t n_procs = atk.n_procs;
  std::uint64_t op_size_cap = atk.op_size_cap;
  std::uint32_t ops_cap = atk.ops_per_proc_cap_per_window;
  EvasiveMode mode = atk.mode;
  double slowdown = knobs.slowdown_factor;
  if (knobs.few_process) {
    // Concentrating into <= 2 processes reverts toward the traditional
    // shape: per-process caps no longer bind.
    n_procs = std::min<std::uint32_t>(2, n_procs);
    mode = EvasiveMode::ProcessSplit;
    ops_cap = 1'000'000;
  }
  if (mode == EvasiveMode::Mimicry) calibrate_mimicry_caps(cfg, op_size_cap, ops_cap);

  for (std::uint32_t i = 0; i < n_procs; ++i)
    t.procs.emplace(kAttackPidBase + i, ProcessLabel{kAttackPidBase + i, ProcClass::Adaptive});

  Rng rng(mix_seed(cfg.seed, 3));
  AttackSchedule sched =
      schedule_split_attack(cfg, t, n_procs, op_size_cap, ops_cap, mode, slowdown, rng);

  if (knobs.entropy_padding)
    apply_entropy_padding(cfg, t, sched, ops_cap, slowdown, ProcClass::Adaptive);

  t.events.insert(t.events.end(), sched.events.begin(), sched.events.end());
  return finish(std::move(t));
}

Trace generate_trace(const GenConfig& cfg) {
  if (!cfg.attack) return gen_benign(cfg);
  switch (cfg.attack->cls) {
    case ProcClass::Traditional: return gen_traditional(cfg);
    case ProcClass::Evasive: return gen_evasive(cfg);
    case ProcClass::Adaptive: return gen_adaptive(cfg);
    case ProcClass::Benign: break;
  }
  throw GenError("attack class cannot be benign");
}

}  // namespace fbdet

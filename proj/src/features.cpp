#include "fbdet/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace fbdet {

namespace {

struct WindowAcc {
  std::uint64_t n_ops = 0;
  double read_ent_sum = 0.0;
  std::uint64_t n_reads = 0;
  double write_ent_sum = 0.0;
  std::uint64_t n_writes = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> read_ivs;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> write_ivs;
  std::set<std::uint32_t> reader_pids;
  std::set<std::uint32_t> writer_pids;
  std::set<std::uint32_t> active_pids;
  ProcClass worst = ProcClass::Benign;
};

struct KeyHash {
  std::size_t operator()(const std::pair<std::uint32_t, std::uint64_t>& k) const {
    return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(k.first) << 44) ^
                                      (k.second * 0x9e3779b97f4a7c15ULL));
  }
};

std::string format_fixed6(double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.6f", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

}  // namespace

const std::array<std::string, kNumFeatures>& feature_names() {
  static const std::array<std::string, kNumFeatures> names = {
      "avg_read_entropy", "avg_write_entropy", "read_ratio",    "write_ratio",
      "n_reader_procs",   "n_writer_procs",    "n_ops"};
  return names;
}

TierConfig TierConfig::defaults() { return {{1, 3, 6, 12, 24, 48, 96}}; }

void TierConfig::validate() const {
  if (windows_s.empty()) throw TraceError("tier config has no windows");
  for (std::size_t i = 0; i < windows_s.size(); ++i) {
    if (windows_s[i] == 0) throw TraceError("tier window must be positive");
    if (i > 0) {
      if (windows_s[i] <= windows_s[i - 1])
        throw TraceError("tier windows must be strictly increasing");
      if (windows_s[i] % windows_s[i - 1] != 0)
        throw TraceError("each tier window must divide the next");
    }
  }
}

TierConfig parse_tier_list(const std::string& comma_list) {
  TierConfig cfg;
  std::stringstream ss(comma_list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::uint32_t v{};
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || ptr != item.data() + item.size())
      throw TraceError("malformed tier list entry '" + item + "'");
    cfg.windows_s.push_back(v);
  }
  cfg.validate();
  return cfg;
}

std::uint64_t window_index(std::uint64_t ts_us, std::uint32_t tier_window_s) {
  return ts_us / (static_cast<std::uint64_t>(tier_window_s) * 1'000'000ULL);
}

double coverage_union(std::span<const std::pair<std::uint64_t, std::uint64_t>> intervals,
                      std::uint64_t size) {
  if (size == 0) throw TraceError("coverage_union: size must be positive");
  std::vector<std::pair<std::uint64_t, std::uint64_t>> clipped;  // [begin, end)
  clipped.reserve(intervals.size());
  for (const auto& [off, len] : intervals) {
    if (off >= size || len == 0) continue;
    clipped.emplace_back(off, std::min(off + len, size));
  }
  std::sort(clipped.begin(), clipped.end());
  std::uint64_t covered = 0;
  std::uint64_t cur_begin = 0, cur_end = 0;
  bool open = false;
  for (const auto& [b, e] : clipped) {
    if (!open) {
      cur_begin = b;
      cur_end = e;
      open = true;
    } else if (b <= cur_end) {
      cur_end = std::max(cur_end, e);
    } else {
      covered += cur_end - cur_begin;
      cur_begin = b;
      cur_end = e;
    }
  }
  if (open) covered += cur_end - cur_begin;
  return static_cast<double>(covered) / static_cast<double>(size);
}

std::vector<FileWindowProfile> extract_profiles(const Trace& trace,
                                                const TierConfig& tiers) {
  tiers.validate();
  std::vector<FileWindowProfile> out;

  for (std::size_t tier = 0; tier < tiers.windows_s.size(); ++tier) {
    const std::uint32_t w_s = tiers.windows_s[tier];
    const std::uint64_t w_us = static_cast<std::uint64_t>(w_s) * 1'000'000ULL;
    std::unordered_map<std::pair<std::uint32_t, std::uint64_t>, WindowAcc, KeyHash> accs;

    for (const IoEvent& e : trace.events) {
      const auto fit = trace.files.find(e.file_id);
      if (fit == trace.files.end() || !fit->second.critical) continue;
      const std::uint64_t win = window_index(e.ts_us, w_s);
      WindowAcc& acc = accs[{e.file_id, win}];
      ++acc.n_ops;
      acc.active_pids.insert(e.pid);
      if (e.op == OpKind::Read) {
        acc.read_ent_sum += e.entropy_bpb;
        ++acc.n_reads;
        acc.read_ivs.emplace_back(e.offset, e.length);
        acc.reader_pids.insert(e.pid);
      } else {
        acc.write_ent_sum += e.entropy_bpb;
        ++acc.n_writes;
        acc.write_ivs.emplace_back(e.offset, e.length);
        acc.writer_pids.insert(e.pid);
      }
      const ProcClass cls = trace.procs.at(e.pid).cls;
      if (severity(cls) > severity(acc.worst)) acc.worst = cls;
    }

    for (const auto& [key, acc] : accs) {
      const auto& [file_id, win] = key;
      const std::uint64_t size = trace.files.at(file_id).size_bytes;
      FileWindowProfile p;
      p.file_id = file_id;
      p.tier = static_cast<std::uint32_t>(tier);
      p.window_start_us = win * w_us;
      p.avg_read_entropy =
          acc.n_reads ? acc.read_ent_sum / static_cast<double>(acc.n_reads) : 0.0;
      p.avg_write_entropy =
          acc.n_writes ? acc.write_ent_sum / static_cast<double>(acc.n_writes) : 0.0;
      p.read_ratio = coverage_union(acc.read_ivs, size);
      p.write_ratio = coverage_union(acc.write_ivs, size);
      p.n_reader_procs = static_cast<std::uint32_t>(acc.reader_pids.size());
      p.n_writer_procs = static_cast<std::uint32_t>(acc.writer_pids.size());
      p.n_ops = acc.n_ops;
      p.label = acc.worst;
      p.active_pids.assign(acc.active_pids.begin(), acc.active_pids.end());
      out.push_back(std::move(p));
    }
  }

  std::sort(out.begin(), out.end(), [](const FileWindowProfile& a, const FileWindowProfile& b) {
    return std::tie(a.file_id, a.tier, a.window_start_us) <
           std::tie(b.file_id, b.tier, b.window_start_us);
  });
  return out;
}

void write_profiles_csv(std::ostream& out, std::span<const FileWindowProfile> profiles,
                        const std::string& manifest_comment) {
  if (!manifest_comment.empty()) {
    std::istringstream lines(manifest_comment);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << '\n';
  }
  out << "file_id,tier,window_start_us,avg_read_entropy,avg_write_entropy,"
         "read_ratio,write_ratio,n_reader_procs,n_writer_procs,n_ops,label\n";
  for (const FileWindowProfile& p : profiles) {
    out << p.file_id << ',' << p.tier << ',' << p.window_start_us << ','
        << format_fixed6(p.avg_read_entropy) << ',' << format_fixed6(p.avg_write_entropy)
        << ',' << format_fixed6(p.read_ratio) << ',' << format_fixed6(p.write_ratio) << ','
        << p.n_reader_procs << ',' << p.n_writer_procs << ',' << p.n_ops << ','
        << to_string(p.label) << '\n';
  }
}

std::vector<FileWindowProfile> parse_profiles_csv(std::istream& in) {
  std::vector<FileWindowProfile> out;
  std::string line;
  bool saw_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line.rfind("file_id,", 0) != 0)
        throw TraceError("feature csv: missing header at line " + std::to_string(line_no));
      saw_header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) fields.push_back(item);
    if (fields.size() != 11)
      throw TraceError("feature csv: expected 11 fields at line " + std::to_string(line_no));
    FileWindowProfile p;
    p.file_id = static_cast<std::uint32_t>(std::stoul(fields[0]));
    p.tier = static_cast<std::uint32_t>(std::stoul(fields[1]));
    p.window_start_us = std::stoull(fields[2]);
    p.avg_read_entropy = std::stod(fields[3]);
    p.avg_write_entropy = std::stod(fields[4]);
    p.read_ratio = std::stod(fields[5]);
    p.write_ratio = std::stod(fields[6]);
    p.n_reader_procs = static_cast<std::uint32_t>(std::stoul(fields[7]));
    p.n_writer_procs = static_cast<std::uint32_t>(std::stoul(fields[8]));
    p.n_ops = std::stoull(fields[9]);
    p.label = proc_class_from_string(fields[10]);
    out.push_back(std::move(p));
  }
  if (!saw_header) throw TraceError("feature csv: empty input");
  return out;
}

}  // namespace fbdet

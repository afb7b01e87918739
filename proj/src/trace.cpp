#include "fbdet/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace fbdet {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw TraceError(msg); }

[[noreturn]] void fail_at(std::size_t line_no, const std::string& msg) {
  fail(msg + " at line " + std::to_string(line_no));
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_int(std::string_view s, std::size_t line_no, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    fail_at(line_no, std::string("malformed ") + what + " '" + std::string(s) + "'");
  return value;
}

double parse_real(std::string_view s, std::size_t line_no, const char* what) {
  double value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    fail_at(line_no, std::string("malformed ") + what + " '" + std::string(s) + "'");
  return value;
}

bool event_order_ok(const IoEvent& a, const IoEvent& b) {
  return std::tie(a.ts_us, a.pid, a.file_id, a.offset) <=
         std::tie(b.ts_us, b.pid, b.file_id, b.offset);
}

}  // namespace

const char* to_string(ProcClass c) {
  switch (c) {
    case ProcClass::Benign: return "benign";
    case ProcClass::Traditional: return "traditional";
    case ProcClass::Evasive: return "evasive";
    case ProcClass::Adaptive: return "adaptive";
  }
  return "?";
}

ProcClass proc_class_from_string(const std::string& s) {
  if (s == "benign") return ProcClass::Benign;
  if (s == "traditional") return ProcClass::Traditional;
  if (s == "evasive") return ProcClass::Evasive;
  if (s == "adaptive") return ProcClass::Adaptive;
  fail("unknown process class '" + s + "'");
}

int severity(ProcClass c) {
  switch (c) {
    case ProcClass::Benign: return 0;
    case ProcClass::Traditional: return 1;
    case ProcClass::Evasive: return 2;
    case ProcClass::Adaptive: return 3;
  }
  return 0;
}

double quantize_entropy(double bpb) {
  // llrint under the default FE_TONEAREST mode rounds half to even.
  return static_cast<double>(std::llrint(bpb * 1000.0)) / 1000.0;
}

std::string format_entropy(double bpb) {
  const long long milli = std::llrint(bpb * 1000.0);
  std::string s = std::to_string(milli / 1000);
  s += '.';
  const long long frac = milli % 1000;
  s += static_cast<char>('0' + frac / 100);
  s += static_cast<char>('0' + frac / 10 % 10);
  s += static_cast<char>('0' + frac % 10);
  return s;
}

void Trace::validate() const {
  std::uint64_t max_ts = 0;
  const IoEvent* prev = nullptr;
  for (const IoEvent& e : events) {
    if (e.entropy_bpb < 0.0 || e.entropy_bpb > 8.0)
      fail("entropy out of range for event at ts " + std::to_string(e.ts_us));
    if (e.length == 0) fail("zero-length event at ts " + std::to_string(e.ts_us));
    if (e.offset > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()) - e.length)
      fail("offset+length overflows at ts " + std::to_string(e.ts_us));
    if (!files.count(e.file_id))
      fail("unknown file_id " + std::to_string(e.file_id));
    if (!procs.count(e.pid)) fail("unknown pid " + std::to_string(e.pid));
    if (prev && !event_order_ok(*prev, e)) fail("events unsorted");
    prev = &e;
    max_ts = std::max(max_ts, e.ts_us);
  }
  for (const auto& [id, meta] : files) {
    if (meta.file_id != id) fail("file table id mismatch");
    if (meta.size_bytes == 0) fail("file " + std::to_string(id) + " has zero size");
  }
  for (const auto& [pid, label] : procs)
    if (label.pid != pid) fail("process table pid mismatch");
  if (!events.empty() && duration_us < max_ts)
    fail("duration_us smaller than last event timestamp");
}

ProcClass Trace::dominant_class() const {
  ProcClass worst = ProcClass::Benign;
  for (const auto& [pid, label] : procs)
    if (severity(label.cls) > severity(worst)) worst = label.cls;
  return worst;
}

Trace parse_trace(std::istream& in) {
  Trace trace;
  std::string line;
  std::size_t line_no = 0;
  bool saw_magic = false;
  bool saw_duration = false;
  bool in_events = false;
  const IoEvent* prev = nullptr;
  std::uint64_t max_ts = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    if (line_no == 1) {
      if (line != "#fbtrace v1") fail_at(1, "missing '#fbtrace v1' header");
      saw_magic = true;
      continue;
    }

    if (line[0] == '#') {
      if (in_events) fail_at(line_no, "directive after event lines");
      auto f = split_fields(line);
      if (f[0] == "#duration_us") {
        if (f.size() != 2) fail_at(line_no, "malformed #duration_us");
        if (saw_duration) fail_at(line_no, "duplicate #duration_us");
        trace.duration_us = parse_int<std::uint64_t>(f[1], line_no, "duration");
        saw_duration = true;
      } else if (f[0] == "#file") {
        if (f.size() != 4) fail_at(line_no, "malformed #file directive");
        FileMeta meta;
        meta.file_id = parse_int<std::uint32_t>(f[1], line_no, "file_id");
        meta.size_bytes = parse_int<std::uint64_t>(f[2], line_no, "size_bytes");
        if (meta.size_bytes == 0) fail_at(line_no, "file size must be positive");
        const auto crit = parse_int<int>(f[3], line_no, "critical flag");
        if (crit != 0 && crit != 1) fail_at(line_no, "critical flag must be 0 or 1");
        meta.critical = crit == 1;
        if (!trace.files.emplace(meta.file_id, meta).second)
          fail_at(line_no, "duplicate file_id " + std::to_string(meta.file_id));
      } else if (f[0] == "#proc") {
        if (f.size() != 3) fail_at(line_no, "malformed #proc directive");
        ProcessLabel label;
        label.pid = parse_int<std::uint32_t>(f[1], line_no, "pid");
        try {
          label.cls = proc_class_from_string(std::string(f[2]));
        } catch (const TraceError&) {
          fail_at(line_no, "unknown process class '" + std::string(f[2]) + "'");
        }
        if (!trace.procs.emplace(label.pid, label).second)
          fail_at(line_no, "duplicate pid " + std::to_string(label.pid));
      } else {
        fail_at(line_no, "unknown directive '" + std::string(f[0]) + "'");
      }
      continue;
    }

    if (!saw_duration) fail_at(line_no, "event line before #duration_us");
    in_events = true;
    auto f = split_fields(line);
    if (f.size() != 7) fail_at(line_no, "malformed event line (expected 7 fields)");
    IoEvent e;
    e.ts_us = parse_int<std::uint64_t>(f[0], line_no, "ts_us");
    e.pid = parse_int<std::uint32_t>(f[1], line_no, "pid");
    e.file_id = parse_int<std::uint32_t>(f[2], line_no, "file_id");
    if (f[3] == "R") {
      e.op = OpKind::Read;
    } else if (f[3] == "W") {
      e.op = OpKind::Write;
    } else {
      fail_at(line_no, "op must be R or W");
    }
    e.offset = parse_int<std::uint64_t>(f[4], line_no, "offset");
    e.length = parse_int<std::uint64_t>(f[5], line_no, "length");
    e.entropy_bpb = parse_real(f[6], line_no, "entropy");

    if (e.entropy_bpb < 0.0 || e.entropy_bpb > 8.0)
      fail_at(line_no, "entropy out of range");
    if (e.length == 0) fail_at(line_no, "length must be positive");
    if (e.offset > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()) - e.length)
      fail_at(line_no, "offset+length overflows");
    if (!trace.files.count(e.file_id))
      fail_at(line_no, "unknown file_id reference " + std::to_string(e.file_id));
    if (!trace.procs.count(e.pid))
      fail_at(line_no, "unknown pid reference " + std::to_string(e.pid));
    if (prev && !event_order_ok(*prev, e)) fail_at(line_no, "events unsorted");

    trace.events.push_back(e);
    prev = &trace.events.back();
    max_ts = std::max(max_ts, e.ts_us);
  }

  if (!saw_magic) fail("empty input: missing '#fbtrace v1' header");
  if (!saw_duration) fail("missing #duration_us directive");
  if (!trace.events.empty() && trace.duration_us < max_ts)
    fail("duration_us smaller than last event timestamp");
  return trace;
}

Trace parse_trace_string(const std::string& text) {
  std::istringstream in(text);
  return parse_trace(in);
}

Trace load_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open trace file '" + path + "'");
  return parse_trace(in);
}

void write_trace(const Trace& trace, std::ostream& out) {
  out << "#fbtrace v1\n";
  out << "#duration_us " << trace.duration_us << '\n';
  for (const auto& [id, meta] : trace.files)
    out << "#file " << id << ' ' << meta.size_bytes << ' ' << (meta.critical ? 1 : 0) << '\n';
  for (const auto& [pid, label] : trace.procs)
    out << "#proc " << pid << ' ' << to_string(label.cls) << '\n';
  for (const IoEvent& e : trace.events) {
    out << e.ts_us << ' ' << e.pid << ' ' << e.file_id << ' '
        << (e.op == OpKind::Read ? 'R' : 'W') << ' ' << e.offset << ' '
        << e.length << ' ' << format_entropy(e.entropy_bpb) << '\n';
  }
}

std::string write_trace_string(const Trace& trace) {
  std::ostringstream out;
  write_trace(trace, out);
  return out.str();
}

void save_trace_file(const Trace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open '" + path + "' for writing");
  write_trace(trace, out);
  if (!out) fail("write failed for '" + path + "'");
}

Trace filter_critical(const Trace& trace) {
  Trace out;
  out.files = trace.files;
  out.procs = trace.procs;
  out.duration_us = trace.duration_us;
  out.events.reserve(trace.events.size());
  for (const IoEvent& e : trace.events) {
    auto it = trace.files.find(e.file_id);
    if (it != trace.files.end() && it->second.critical) out.events.push_back(e);
  }
  return out;
}

}  // namespace fbdet

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbdet {

enum class OpKind : std::uint8_t { Read, Write };

enum class ProcClass : std::uint8_t { Benign, Traditional, Evasive, Adaptive };

const char* to_string(ProcClass c);
ProcClass proc_class_from_string(const std::string& s);

// Severity used when a window sees processes of mixed classes:
// Adaptive > Evasive > Traditional > Benign.
int severity(ProcClass c);

// One low-level file operation. Payloads are not stored; the per-operation
// Shannon entropy (bits per byte, in [0, 8]) stands in for the data type.
struct IoEvent {
  std::uint64_t ts_us = 0;   // microseconds since trace start
  std::uint32_t pid = 0;
  std::uint32_t file_id = 0;
  OpKind op = OpKind::Read;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;  // > 0
  double entropy_bpb = 0.0;  // [0, 8]

  bool operator==(const IoEvent&) const = default;
};

struct FileMeta {
  std::uint32_t file_id = 0;
  std::uint64_t size_bytes = 0;  // fixed for the trace duration
  bool critical = false;

  bool operator==(const FileMeta&) const = default;
};

struct ProcessLabel {
  std::uint32_t pid = 0;
  ProcClass cls = ProcClass::Benign;

  bool operator==(const ProcessLabel&) const = default;
};

// A labeled, time-ordered operation log. Immutable after parsing; events are
// sorted by ts_us with ties broken by (pid, file_id, offset).
struct Trace {
  std::vector<IoEvent> events;
  std::map<std::uint32_t, FileMeta> files;
  std::map<std::uint32_t, ProcessLabel> procs;
  std::uint64_t duration_us = 0;

  bool operator==(const Trace&) const = default;

  // Throws TraceError on any invariant violation.
  void validate() const;

  // The most severe class among labeled processes, Benign if none hostile.
  ProcClass dominant_class() const;
};

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quantizes an entropy value to the 3 fractional digits the trace format
// carries, rounding half to even. Generators apply this before storing so
// that serialization round-trips bit-exactly.
double quantize_entropy(double bpb);

// Formats with exactly 3 fractional digits, round-half-even.
std::string format_entropy(double bpb);

// Text trace format, one operation per line:
//
//   #fbtrace v1
//   #duration_us <int>
//   #file <file_id> <size_bytes> <0|1 critical>
//   #proc <pid> <benign|traditional|evasive|adaptive>
//   <ts_us> <pid> <file_id> <R|W> <offset> <length> <entropy_bpb>
//
// Directives precede all event lines. parse_trace validates every type
// invariant and reports the offending line; it never repairs input.
Trace parse_trace(std::istream& in);
Trace parse_trace_string(const std::string& text);
Trace load_trace_file(const std::string& path);

void write_trace(const Trace& trace, std::ostream& out);
std::string write_trace_string(const Trace& trace);
void save_trace_file(const Trace& trace, const std::string& path);

// Drops every event whose file is non-critical. Ordering is preserved and
// the file/process tables are kept as-is. Idempotent.
Trace filter_critical(const Trace& trace);

}  // namespace fbdet

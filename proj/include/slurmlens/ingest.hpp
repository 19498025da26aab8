#pragma once

// Ingestion of `sacct --parsable2` exports: scalar cell parsers, the row
// reader, the typed JobRecord view and the cleaning pass that turns a raw dump
// into an all-numeric JobTable plus an audit trail (CleaningReport).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "slurmlens/error.hpp"
#include "slurmlens/text.hpp"

namespace slurmlens {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

// ---------------------------------------------------------------------------
// Job state
// ---------------------------------------------------------------------------

enum class JobState { Completed, Failed, Cancelled, Timeout, OutOfMemory, Running, Other };

inline std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::Completed: return "COMPLETED";
    case JobState::Failed: return "FAILED";
    case JobState::Cancelled: return "CANCELLED";
    case JobState::Timeout: return "TIMEOUT";
    case JobState::OutOfMemory: return "OUT_OF_MEMORY";
    case JobState::Running: return "RUNNING";
    case JobState::Other: return "OTHER";
  }
  return "OTHER";
}

// Canonical state token: the first word, upper-cased ("CANCELLED by 42" -> "CANCELLED").
inline std::string canonical_state_token(std::string_view text) {
  text = text::trim(text);
  auto space = text.find(' ');
  if (space != std::string_view::npos) text = text.substr(0, space);
  std::string token(text);
  for (char& c : token) c = text::ascii_upper(c);
  // Non-parsable sacct output truncates long states with a trailing '+'.
  if (token == "OUT_OF_ME+" || token == "OUT_OF_MEM") token = "OUT_OF_MEMORY";
  return token;
}

inline JobState state_from_token(std::string_view token) {
  if (token == "COMPLETED") return JobState::Completed;
  if (token == "FAILED") return JobState::Failed;
  if (token == "CANCELLED") return JobState::Cancelled;
  if (token == "TIMEOUT") return JobState::Timeout;
  if (token == "OUT_OF_MEMORY") return JobState::OutOfMemory;
  if (token == "RUNNING") return JobState::Running;
  return JobState::Other;
}

inline JobState parse_state(std::string_view text) {
  auto token = canonical_state_token(text);
  if (token.empty()) throw UnparseableValue("state", std::string(text));
  return state_from_token(token);
}

// States counted as a kill by the cost model.
inline bool is_killed(JobState s) {
  return s == JobState::Failed || s == JobState::Timeout || s == JobState::OutOfMemory || s == JobState::Cancelled;
}

// ---------------------------------------------------------------------------
// Scalar parsers
// ---------------------------------------------------------------------------

struct ParsedDuration {
  std::optional<std::int64_t> seconds;
  bool unlimited = false;

  bool missing() const { return !seconds.has_value(); }
};

// Accepts [D-]HH:MM:SS, MM:SS (both with optional .fff, rounded to the nearest
// second), plain integer seconds, "UNLIMITED"/"Partition_Limit" and empty.
inline ParsedDuration parse_duration(std::string_view raw) {
  auto s = text::trim(raw);
  if (s.empty()) return {};
  if (text::iequals(s, "UNLIMITED") || text::iequals(s, "Partition_Limit")) return {std::nullopt, true};
  auto fail = [&]() -> ParsedDuration { throw UnparseableDuration(std::string(raw)); };

  if (auto plain = text::parse_uint(s)) return {*plain, false};

  std::int64_t days = 0;
  bool has_days = false;
  if (auto dash = s.find('-'); dash != std::string_view::npos) {
    auto d = text::parse_uint(s.substr(0, dash));
    if (!d) return fail();
    days = *d;
    has_days = true;
    s.remove_prefix(dash + 1);
  }

  double fraction = 0.0;
  if (auto dot = s.find('.'); dot != std::string_view::npos) {
    auto digits = s.substr(dot + 1);
    if (text::parse_uint(digits) == std::nullopt) return fail();
    auto f = text::parse_real(std::string("0.") + std::string(digits));
    if (!f) return fail();
    fraction = *f;
    s = s.substr(0, dot);
  }

  std::vector<std::int64_t> parts;
  while (true) {
    auto colon = s.find(':');
    auto part = text::parse_uint(s.substr(0, colon));
    if (!part) return fail();
    parts.push_back(*part);
    if (colon == std::string_view::npos) break;
    s.remove_prefix(colon + 1);
  }

  std::int64_t total = 0;
  if (parts.size() == 3) {
    if (parts[1] >= 60 || parts[2] >= 60 || (has_days && parts[0] >= 24)) return fail();
    total = days * 86400 + parts[0] * 3600 + parts[1] * 60 + parts[2];
  } else if (parts.size() == 2 && !has_days) {
    if (parts[1] >= 60) return fail();
    total = parts[0] * 60 + parts[1];
  } else {
    return fail();
  }
  return {total + static_cast<std::int64_t>(std::llround(fraction)), false};
}

// Inverse of parse_duration for non-negative seconds: "HH:MM:SS" or "D-HH:MM:SS".
inline std::string format_duration(std::int64_t seconds) {
  auto two = [](std::int64_t v) {
    std::string s = std::to_string(v);
    return s.size() < 2 ? "0" + s : s;
  };
  std::int64_t days = seconds / 86400;
  std::int64_t rem = seconds % 86400;
  std::string hms = two(rem / 3600) + ":" + two((rem % 3600) / 60) + ":" + two(rem % 60);
  return days > 0 ? std::to_string(days) + "-" + hms : hms;
}

enum class MemoryScope { PerNode, PerCore, Total };

inline std::string_view to_string(MemoryScope s) {
  switch (s) {
    case MemoryScope::PerNode: return "PER_NODE";
    case MemoryScope::PerCore: return "PER_CORE";
    case MemoryScope::Total: return "TOTAL";
  }
  return "TOTAL";
}

struct MemoryAmount {
  std::int64_t bytes = 0;
  MemoryScope scope = MemoryScope::Total;

  bool operator==(const MemoryAmount&) const = default;
};

// Number with optional binary suffix (K/M/G/T) and optional scope (n/c).
inline std::optional<MemoryAmount> parse_memory(std::string_view raw) {
  auto s = text::trim(raw);
  if (s.empty()) return std::nullopt;
  MemoryAmount out;
  if (s.back() == 'n' || s.back() == 'c') {
    out.scope = s.back() == 'n' ? MemoryScope::PerNode : MemoryScope::PerCore;
    s.remove_suffix(1);
  }
  double unit = 1.0;
  if (!s.empty()) {
    switch (s.back()) {
      case 'K': unit = 1024.0; break;
      case 'M': unit = 1024.0 * 1024.0; break;
      case 'G': unit = 1024.0 * 1024.0 * 1024.0; break;
      case 'T': unit = 1024.0 * 1024.0 * 1024.0 * 1024.0; break;
      default: break;
    }
    if (unit != 1.0) s.remove_suffix(1);
  }
  if (auto whole = text::parse_uint(s)) {
    out.bytes = *whole * static_cast<std::int64_t>(unit);
    return out;
  }
  auto value = text::parse_real(s);
  if (!value || *value < 0.0 || s.front() == '-') throw UnparseableMemory(std::string(raw));
  out.bytes = static_cast<std::int64_t>(std::llround(*value * unit));
  return out;
}

// YYYY-MM-DDTHH:MM:SS interpreted as UTC. Plain integers are taken as epoch
// seconds so that cleaned exports can be re-ingested.
inline std::optional<std::int64_t> parse_timestamp(std::string_view raw) {
  auto s = text::trim(raw);
  if (s.empty() || text::iequals(s, "Unknown") || text::iequals(s, "None")) return std::nullopt;
  if (auto plain = text::parse_uint(s)) return *plain;
  auto fail = [&]() -> std::optional<std::int64_t> { throw UnparseableTimestamp(std::string(raw)); };
  if (s.size() != 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':') {
    return fail();
  }
  auto y = text::parse_uint(s.substr(0, 4));
  auto mo = text::parse_uint(s.substr(5, 2));
  auto d = text::parse_uint(s.substr(8, 2));
  auto h = text::parse_uint(s.substr(11, 2));
  auto mi = text::parse_uint(s.substr(14, 2));
  auto se = text::parse_uint(s.substr(17, 2));
  if (!y || !mo || !d || !h || !mi || !se || *h > 23 || *mi > 59 || *se > 60 || *y < 1970) return fail();
  using namespace std::chrono;
  year_month_day date{year{static_cast<int>(*y)}, month{static_cast<unsigned>(*mo)}, day{static_cast<unsigned>(*d)}};
  if (!date.ok()) return fail();
  std::int64_t days = sys_days{date}.time_since_epoch().count();
  return days * 86400 + *h * 3600 + *mi * 60 + *se;
}

// Hertz; accepts SI suffixes K/M/G/T.
inline std::optional<double> parse_frequency(std::string_view raw) {
  auto s = text::trim(raw);
  if (s.empty()) return std::nullopt;
  double unit = 1.0;
  switch (s.back()) {
    case 'K': unit = 1e3; break;
    case 'M': unit = 1e6; break;
    case 'G': unit = 1e9; break;
    case 'T': unit = 1e12; break;
    default: break;
  }
  if (unit != 1.0) s.remove_suffix(1);
  auto value = text::parse_real(s);
  if (!value || *value < 0.0) throw UnparseableValue("frequency", std::string(raw));
  return *value * unit;
}

inline std::optional<std::int64_t> parse_count(std::string_view raw) {
  auto s = text::trim(raw);
  if (s.empty()) return std::nullopt;
  auto v = text::parse_uint(s);
  if (!v) throw UnparseableValue("count", std::string(raw));
  return v;
}

// ---------------------------------------------------------------------------
// Column universe
// ---------------------------------------------------------------------------

enum class ColumnKind {
  Id,           // JobID; identity, never a feature
  State,        // mandatory, categorical-coded
  Categorical,  // text coded by first appearance
  Count,        // non-negative integer (also raw seconds)
  Duration,     // [D-]HH:MM:SS
  Timelimit,    // duration, UNLIMITED -> missing
  Timestamp,    // epoch seconds
  Memory,       // bytes
  ReqMem,       // bytes with scope qualifier
  Frequency,    // hertz
  Auto,         // unknown column: numeric if every cell parses, else categorical
};

struct KnownColumn {
  std::string_view name;
  ColumnKind kind;
};

// Documented core set plus a few common sacct extras.
inline constexpr KnownColumn kKnownColumns[] = {
    {"JobID", ColumnKind::Id},
    {"Account", ColumnKind::Categorical},
    {"JobName", ColumnKind::Categorical},
    {"State", ColumnKind::State},
    {"AllocCPUS", ColumnKind::Count},
    {"AllocNodes", ColumnKind::Count},
    {"NCPUS", ColumnKind::Count},
    {"NNodes", ColumnKind::Count},
    {"NTasks", ColumnKind::Count},
    {"ReqCPUS", ColumnKind::Count},
    {"ReqNodes", ColumnKind::Count},
    {"ElapsedRaw", ColumnKind::Count},
    {"CPUTimeRaw", ColumnKind::Count},
    {"MaxDiskReadTask", ColumnKind::Count},
    {"MaxDiskWriteTask", ColumnKind::Count},
    {"MaxRSSTask", ColumnKind::Count},
    {"MaxVMSizeTask", ColumnKind::Count},
    {"AveCPU", ColumnKind::Duration},
    {"SystemCPU", ColumnKind::Duration},
    {"TotalCPU", ColumnKind::Duration},
    {"UserCPU", ColumnKind::Duration},
    {"Elapsed", ColumnKind::Duration},
    {"CPUTime", ColumnKind::Duration},
    {"Timelimit", ColumnKind::Timelimit},
    {"Submit", ColumnKind::Timestamp},
    {"Eligible", ColumnKind::Timestamp},
    {"Start", ColumnKind::Timestamp},
    {"End", ColumnKind::Timestamp},
    {"ReqMem", ColumnKind::ReqMem},
    {"MaxRSS", ColumnKind::Memory},
    {"AveRSS", ColumnKind::Memory},
    {"MaxVMSize", ColumnKind::Memory},
    {"AveVMSize", ColumnKind::Memory},
    {"MaxDiskWrite", ColumnKind::Memory},
    {"MaxDiskRead", ColumnKind::Memory},
    {"AveDiskRead", ColumnKind::Memory},
    {"AveDiskWrite", ColumnKind::Memory},
    {"AveCPUFreq", ColumnKind::Frequency},
};

// Canonical spelling and kind for a header name (case-insensitive).
inline KnownColumn classify_column(std::string_view header_name) {
  auto name = text::trim(header_name);
  for (const auto& known : kKnownColumns) {
    if (text::iequals(known.name, name)) return known;
  }
  return {name, ColumnKind::Auto};
}

// ---------------------------------------------------------------------------
// Raw rows
// ---------------------------------------------------------------------------

struct RawJobRecord {
  std::vector<std::string> cells;
  std::size_t line_number = 0;
};

struct SacctDump {
  std::vector<std::string> header;
  std::vector<RawJobRecord> records;
};

// Streaming splitter. Cells are views into an internal line buffer and stay
// valid until the next call to next().
class SacctReader {
 public:
  struct Row {
    std::size_t line_number = 0;
    std::span<const std::string_view> cells;
  };

  explicit SacctReader(std::istream& in, char delimiter = '|') : in_(in), delimiter_(delimiter) {
    while (std::getline(in_, line_)) {
      ++line_number_;
      if (line_number_ == 1 && line_.rfind("\xEF\xBB\xBF", 0) == 0) line_.erase(0, 3);
      if (!text::trim(line_).empty()) break;
    }
    if (text::trim(line_).empty()) throw EmptyInput();
    split();
    for (auto cell : cells_) header_.emplace_back(text::trim(cell));
  }

  const std::vector<std::string>& header() const { return header_; }
  char delimiter() const { return delimiter_; }

  // Returns false at end of input; throws MalformedRow on a cell-count mismatch.
  bool next(Row& row) {
    while (std::getline(in_, line_)) {
      ++line_number_;
      if (!line_.empty() && line_.back() == '\r') line_.pop_back();
      if (line_.empty()) continue;
      split();
      if (cells_.size() != header_.size()) throw MalformedRow(line_number_, header_.size(), cells_.size());
      row.line_number = line_number_;
      row.cells = cells_;
      return true;
    }
    return false;
  }

 private:
  void split() {
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    cells_.clear();
    std::string_view rest = line_;
    while (true) {
      auto pos = rest.find(delimiter_);
      cells_.push_back(rest.substr(0, pos));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
  }

  std::istream& in_;
  char delimiter_;
  std::string line_;
  std::size_t line_number_ = 0;
  std::vector<std::string_view> cells_;
  std::vector<std::string> header_;
};

inline SacctDump parse_sacct(std::istream& in, char delimiter = '|') {
  SacctReader reader(in, delimiter);
  SacctDump dump;
  dump.header = reader.header();
  SacctReader::Row row;
  while (reader.next(row)) {
    RawJobRecord rec;
    rec.line_number = row.line_number;
    rec.cells.assign(row.cells.begin(), row.cells.end());
    dump.records.push_back(std::move(rec));
  }
  return dump;
}

// '|' if the header line contains one, otherwise ','.
inline char sniff_delimiter(std::string_view header_line) {
  return header_line.find('|') != std::string_view::npos ? '|' : ',';
}

// ---------------------------------------------------------------------------
// Typed rows and the cleaned table
// ---------------------------------------------------------------------------

struct JobRecord {
  std::string job_id;
  std::string account;
  std::string job_name;
  JobState state = JobState::Other;
  std::string state_text;

  std::optional<std::int64_t> submit_epoch, eligible_epoch, end_epoch;
  std::optional<std::int64_t> elapsed_raw_s, cputime_raw_cpu_s, timelimit_s, total_cpu_s, user_cpu_s, system_cpu_s,
      ave_cpu_s;
  std::optional<std::int64_t> alloc_cpus, ncpus, req_cpus, nnodes, alloc_nodes, req_nodes, ntasks;
  std::optional<std::int64_t> req_mem_bytes;
  MemoryScope req_mem_scope = MemoryScope::Total;
  std::optional<std::int64_t> max_rss_bytes, ave_rss_bytes, max_vmsize_bytes, max_disk_write_bytes;
  std::optional<double> ave_cpu_freq_hz;
  std::optional<std::int64_t> max_disk_read_task, max_disk_write_task, max_rss_task, max_vmsize_task;
};

struct TableColumn {
  std::string name;
  ColumnKind kind = ColumnKind::Auto;
  std::vector<double> values;       // kMissing marks a missing cell
  std::vector<std::string> labels;  // categorical dictionary, indexed by code
  bool feature = false;             // survived cleaning
};

// Column-oriented, all-numeric result of clean(). Columns dropped by cleaning
// are kept (feature == false) so that request-side context such as NNodes
// stays available to label rules and the cost model.
struct JobTable {
  std::vector<TableColumn> columns;
  std::vector<std::string> job_ids;
  std::vector<JobState> states;
  std::vector<MemoryScope> req_mem_scopes;

  std::size_t rows() const { return job_ids.size(); }

  std::vector<std::string> feature_names() const {
    std::vector<std::string> names;
    for (const auto& c : columns) {
      if (c.feature) names.push_back(c.name);
    }
    return names;
  }

  const TableColumn* find(std::string_view name) const {
    for (const auto& c : columns) {
      if (text::iequals(c.name, name)) return &c;
    }
    return nullptr;
  }

  // Value of column `name` at row i, or nullopt when the column is absent or the cell missing.
  std::optional<double> value(std::string_view name, std::size_t i) const {
    const auto* c = find(name);
    if (c == nullptr || is_missing(c->values[i])) return std::nullopt;
    return c->values[i];
  }

  std::string label(std::string_view name, std::size_t i) const {
    const auto* c = find(name);
    if (c == nullptr || is_missing(c->values[i]) || c->labels.empty()) return {};
    return c->labels[static_cast<std::size_t>(c->values[i])];
  }

  JobRecord record(std::size_t i) const {
    JobRecord r;
    r.job_id = job_ids[i];
    r.account = label("Account", i);
    r.job_name = label("JobName", i);
    r.state = states[i];
    r.state_text = label("State", i);
    if (r.state_text.empty()) r.state_text = std::string(to_string(r.state));
    r.req_mem_scope = req_mem_scopes[i];
    auto as_int = [&](std::string_view name) -> std::optional<std::int64_t> {
      auto v = value(name, i);
      if (!v) return std::nullopt;
      return static_cast<std::int64_t>(std::llround(*v));
    };
    r.submit_epoch = as_int("Submit");
    r.eligible_epoch = as_int("Eligible");
    r.end_epoch = as_int("End");
    r.elapsed_raw_s = as_int("ElapsedRaw");
    r.cputime_raw_cpu_s = as_int("CPUTimeRaw");
    r.timelimit_s = as_int("Timelimit");
    r.total_cpu_s = as_int("TotalCPU");
    r.user_cpu_s = as_int("UserCPU");
    r.system_cpu_s = as_int("SystemCPU");
    r.ave_cpu_s = as_int("AveCPU");
    r.alloc_cpus = as_int("AllocCPUS");
    r.ncpus = as_int("NCPUS");
    r.req_cpus = as_int("ReqCPUS");
    r.nnodes = as_int("NNodes");
    r.alloc_nodes = as_int("AllocNodes");
    r.req_nodes = as_int("ReqNodes");
    r.ntasks = as_int("NTasks");
    r.req_mem_bytes = as_int("ReqMem");
    r.max_rss_bytes = as_int("MaxRSS");
    r.ave_rss_bytes = as_int("AveRSS");
    r.max_vmsize_bytes = as_int("MaxVMSize");
    r.max_disk_write_bytes = as_int("MaxDiskWrite");
    r.ave_cpu_freq_hz = value("AveCPUFreq", i);
    r.max_disk_read_task = as_int("MaxDiskReadTask");
    r.max_disk_write_task = as_int("MaxDiskWriteTask");
    r.max_rss_task = as_int("MaxRSSTask");
    r.max_vmsize_task = as_int("MaxVMSizeTask");
    return r;
  }
};

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

struct CleaningConfig {
  double max_missing_fraction = 0.0;
  double min_variance = 1e-12;
};

struct CoercionFailure {
  std::size_t line_number = 0;
  std::string column;
  std::string raw_text;
};

struct CleaningReport {
  std::size_t rows_in = 0;
  std::size_t rows_out = 0;
  std::size_t rows_dropped_running = 0;
  std::vector<std::string> columns_dropped_missing;
  std::vector<std::string> columns_dropped_low_variance;
  std::vector<CoercionFailure> coercion_failures;

  // Rows dropped because at least one cell failed to parse. Failures are
  // appended in line order, so distinct lines are adjacent.
  std::size_t rows_dropped_unparseable() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < coercion_failures.size(); ++i) {
      if (i == 0 || coercion_failures[i].line_number != coercion_failures[i - 1].line_number) ++n;
    }
    return n;
  }
};

inline nlohmann::json to_json(const CleaningReport& r) {
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : r.coercion_failures) {
    failures.push_back({{"line_number", f.line_number}, {"column", f.column}, {"raw_text", f.raw_text}});
  }
  return {{"rows_in", r.rows_in},
          {"rows_out", r.rows_out},
          {"rows_dropped_running", r.rows_dropped_running},
          {"columns_dropped_missing", r.columns_dropped_missing},
          {"columns_dropped_low_variance", r.columns_dropped_low_variance},
          {"coercion_failures", failures}};
}

// Mergeable per-column summary. merge() is associative, so per-chunk stats
// combine to the same drop decisions as a single serial pass.
struct ColumnStats {
  std::size_t count = 0;
  std::size_t missing = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double first = 0.0;
  bool varies = false;

  void add(double v) {
    if (is_missing(v)) {
      ++missing;
      return;
    }
    if (count == 0) {
      first = v;
    } else if (v != first) {
      varies = true;
    }
    ++count;
    double delta = v - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (v - mean);
  }

  void merge(const ColumnStats& o) {
    missing += o.missing;
    if (o.count == 0) return;
    if (count == 0) {
      auto keep_missing = missing;
      *this = o;
      missing = keep_missing;
      return;
    }
    varies = varies || o.varies || o.first != first;
    double n1 = static_cast<double>(count);
    double n2 = static_cast<double>(o.count);
    double delta = o.mean - mean;
    double n = n1 + n2;
    mean += delta * n2 / n;
    m2 += o.m2 + delta * delta * n1 * n2 / n;
    count += o.count;
  }

  // Population variance.
  double variance() const { return count == 0 ? 0.0 : std::max(0.0, m2 / static_cast<double>(count)); }
  bool at_least_two_distinct() const { return varies; }
};

inline ColumnStats column_stats(std::span<const double> values, std::size_t chunk = 65536) {
  ColumnStats total;
  for (std::size_t begin = 0; begin < values.size(); begin += chunk) {
    ColumnStats part;
    auto end = std::min(values.size(), begin + chunk);
    for (std::size_t i = begin; i < end; ++i) part.add(values[i]);
    total.merge(part);
  }
  return total;
}

// Incremental cleaner: feed rows with add(), then call finish().
class TableBuilder {
 public:
  TableBuilder(const std::vector<std::string>& header, CleaningConfig config) : config_(config) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      auto known = classify_column(header[i]);
      bool duplicate = std::any_of(slots_.begin(), slots_.end(),
                                   [&](const Slot& s) { return text::iequals(s.name, known.name); });
      if (duplicate || known.name.empty()) continue;
      if (known.kind == ColumnKind::Id) {
        if (!id_cell_) id_cell_ = i;
        continue;
      }
      if (known.kind == ColumnKind::State) state_cell_ = i;
      Slot slot;
      slot.name = std::string(known.name);
      slot.kind = known.kind;
      slot.cell = i;
      slots_.push_back(std::move(slot));
    }
    width_ = header.size();
    scratch_.resize(slots_.size());
    scratch_text_.resize(slots_.size());
  }

  void add(std::size_t line_number, std::span<const std::string_view> cells) {
    if (cells.size() != width_) throw MalformedRow(line_number, width_, cells.size());
    ++report_.rows_in;

    JobState state = JobState::Other;
    std::string state_token;
    if (state_cell_) {
      state_token = canonical_state_token(cells[*state_cell_]);
      if (state_token.empty()) {
        fail(line_number, "State", cells[*state_cell_]);
        return;
      }
      state = state_from_token(state_token);
      if (state == JobState::Running) {
        ++report_.rows_dropped_running;
        return;
      }
    }
    std::string_view job_id;
    if (id_cell_) {
      job_id = text::trim(cells[*id_cell_]);
      if (job_id.empty()) {
        fail(line_number, "JobID", cells[*id_cell_]);
        return;
      }
    }

    MemoryScope scope = MemoryScope::Total;
    bool unparseable = false;
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      auto& slot = slots_[s];
      auto cell = text::trim(cells[slot.cell]);
      scratch_[s] = kMissing;
      try {
        switch (slot.kind) {
          case ColumnKind::State:
            scratch_text_[s] = state_token;
            break;
          case ColumnKind::Categorical:
          case ColumnKind::Auto:
            scratch_text_[s] = std::string(cell);
            break;
          case ColumnKind::Count:
            if (auto v = parse_count(cell)) scratch_[s] = static_cast<double>(*v);
            break;
          case ColumnKind::Duration:
          case ColumnKind::Timelimit:
            if (auto d = parse_duration(cell); d.seconds) scratch_[s] = static_cast<double>(*d.seconds);
            break;
          case ColumnKind::Timestamp:
            if (auto t = parse_timestamp(cell)) scratch_[s] = static_cast<double>(*t);
            break;
          case ColumnKind::Memory:
            if (auto m = parse_memory(cell)) scratch_[s] = static_cast<double>(m->bytes);
            break;
          case ColumnKind::ReqMem:
            if (auto m = parse_memory(cell)) {
              scratch_[s] = static_cast<double>(m->bytes);
              scope = m->scope;
            }
            break;
          case ColumnKind::Frequency:
            if (auto f = parse_frequency(cell)) scratch_[s] = *f;
            break;
          case ColumnKind::Id:
            break;
        }
      } catch (const UnparseableValue&) {
        report_.coercion_failures.push_back({line_number, slot.name, std::string(cells[slot.cell])});
        unparseable = true;
      }
    }
    if (unparseable) return;

    // Commit.
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      auto& slot = slots_[s];
      switch (slot.kind) {
        case ColumnKind::State:
        case ColumnKind::Categorical:
          slot.values.push_back(code_of(slot, scratch_text_[s]));
          break;
        case ColumnKind::Auto:
          slot.raw.push_back(std::move(scratch_text_[s]));
          break;
        default:
          slot.values.push_back(scratch_[s]);
          break;
      }
    }
    job_ids_.emplace_back(id_cell_ ? std::string(job_id) : std::to_string(line_number));
    states_.push_back(state);
    scopes_.push_back(scope);
  }

  std::pair<JobTable, CleaningReport> finish() && {
    JobTable table;
    table.job_ids = std::move(job_ids_);
    table.states = std::move(states_);
    table.req_mem_scopes = std::move(scopes_);
    report_.rows_out = table.rows();

    for (auto& slot : slots_) {
      if (slot.kind == ColumnKind::Auto) resolve_auto(slot);
      TableColumn column;
      column.name = slot.name;
      column.kind = slot.kind;
      column.values = std::move(slot.values);
      column.labels = std::move(slot.labels);

      auto stats = column_stats(column.values);
      double missing_fraction =
          table.rows() == 0 ? 0.0 : static_cast<double>(stats.missing) / static_cast<double>(table.rows());
      if (missing_fraction > config_.max_missing_fraction) {
        report_.columns_dropped_missing.push_back(column.name);
      } else if (!stats.at_least_two_distinct() || stats.variance() < config_.min_variance) {
        report_.columns_dropped_low_variance.push_back(column.name);
      } else {
        column.feature = true;
      }
      table.columns.push_back(std::move(column));
    }
    if (table.feature_names().empty()) throw NoSurvivingColumns();
    return {std::move(table), std::move(report_)};
  }

 private:
  struct Slot {
    std::string name;
    ColumnKind kind = ColumnKind::Auto;
    std::size_t cell = 0;
    std::vector<double> values;
    std::vector<std::string> raw;  // Auto columns only
    std::vector<std::string> labels;
    std::unordered_map<std::string, double> codes;
  };

  static double code_of(Slot& slot, const std::string& text) {
    if (text.empty()) return kMissing;
    auto [it, inserted] = slot.codes.try_emplace(text, static_cast<double>(slot.labels.size()));
    if (inserted) slot.labels.push_back(text);
    return it->second;
  }

  void resolve_auto(Slot& slot) {
    bool numeric = true;
    for (const auto& cell : slot.raw) {
      if (!cell.empty() && !text::parse_real(cell)) {
        numeric = false;
        break;
      }
    }
    slot.values.reserve(slot.raw.size());
    if (numeric) {
      for (const auto& cell : slot.raw) slot.values.push_back(cell.empty() ? kMissing : *text::parse_real(cell));
      slot.kind = ColumnKind::Count;  // plain numeric
    } else {
      for (const auto& cell : slot.raw) slot.values.push_back(code_of(slot, cell));
      slot.kind = ColumnKind::Categorical;
    }
    slot.raw.clear();
    slot.raw.shrink_to_fit();
  }

  void fail(std::size_t line_number, std::string column, std::string_view raw) {
    report_.coercion_failures.push_back({line_number, std::move(column), std::string(raw)});
  }

  CleaningConfig config_;
  std::vector<Slot> slots_;
  std::optional<std::size_t> id_cell_;
  std::optional<std::size_t> state_cell_;
  std::size_t width_ = 0;
  std::vector<double> scratch_;
  std::vector<std::string> scratch_text_;
  std::vector<std::string> job_ids_;
  std::vector<JobState> states_;
  std::vector<MemoryScope> scopes_;
  CleaningReport report_;
};

inline std::pair<JobTable, CleaningReport> clean(const std::vector<RawJobRecord>& records,
                                                 const std::vector<std::string>& header,
                                                 const CleaningConfig& config = {}) {
  TableBuilder builder(header, config);
  std::vector<std::string_view> cells;
  for (const auto& rec : records) {
    cells.assign(rec.cells.begin(), rec.cells.end());
    builder.add(rec.line_number, cells);
  }
  return std::move(builder).finish();
}

// Parse and clean in one streaming pass (no intermediate RawJobRecords).
inline std::pair<JobTable, CleaningReport> clean_stream(std::istream& in, char delimiter,
                                                        const CleaningConfig& config = {}) {
  SacctReader reader(in, delimiter);
  TableBuilder builder(reader.header(), config);
  SacctReader::Row row;
  while (reader.next(row)) builder.add(row.line_number, row.cells);
  return std::move(builder).finish();
}

// Opens `path`, sniffs the delimiter from the header unless one is given, and cleans.
inline std::pair<JobTable, CleaningReport> load_table(const std::string& path,
                                                      std::optional<char> delimiter = std::nullopt,
                                                      const CleaningConfig& config = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open '" + path + "'");
  if (!delimiter) {
    std::string first;
    std::getline(in, first);
    delimiter = sniff_delimiter(first);
    in.clear();
    in.seekg(0);
  }
  return clean_stream(in, *delimiter, config);
}

// Writes the cleaned table as comma-separated text: JobID, then every
// non-missing-dropped column in header order. Categorical columns are written
// as their text and ReqMem keeps its scope suffix, so re-ingesting the file
// reproduces the same table. Columns dropped for low variance are written too
// (they are dropped again on load) because label rules need request context.
inline void write_clean_csv(const JobTable& table, std::ostream& out, const CleaningReport& report) {
  auto dropped_missing = [&](const std::string& name) {
    return std::find(report.columns_dropped_missing.begin(), report.columns_dropped_missing.end(), name) !=
           report.columns_dropped_missing.end();
  };
  std::vector<const TableColumn*> cols;
  for (const auto& c : table.columns) {
    if (!dropped_missing(c.name)) cols.push_back(&c);
  }
  out << "JobID";
  for (const auto* c : cols) out << ',' << c->name;
  out << '\n';
  std::string line;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    line = text::sanitize_cell(table.job_ids[i], ',');
    for (const auto* c : cols) {
      line += ',';
      double v = c->values[i];
      if (is_missing(v)) continue;
      if (!c->labels.empty()) {
        line += text::sanitize_cell(c->labels[static_cast<std::size_t>(v)], ',');
      } else if (c->kind == ColumnKind::ReqMem) {
        line += text::format_real(v);
        if (table.req_mem_scopes[i] == MemoryScope::PerNode) line += 'n';
        if (table.req_mem_scopes[i] == MemoryScope::PerCore) line += 'c';
      } else {
        line += text::format_real(v);
      }
    }
    line += '\n';
    out << line;
  }
}

}  // namespace slurmlens

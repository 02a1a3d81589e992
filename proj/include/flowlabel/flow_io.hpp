#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowlabel/csv.hpp"
#include "flowlabel/error.hpp"
#include "flowlabel/file_stream.hpp"
#include "flowlabel/flow_builder.hpp"
#include "flowlabel/labeler.hpp"

namespace flowlabel {

// Output columns. The first 23 are the traffic fields written by `extract`;
// the last 6 are appended by labeling.
inline constexpr std::array<std::string_view, 29> kSchemaColumns = {
    "sIP",      "dIP",      "sPort",    "dPort",   "proto",    "packets",   "bytes",
    "flags",    "sTime",    "durat",    "eTime",   "sen",      "in",        "out",
    "nhIP",     "senClass", "typeFlow", "iType",   "iCode",    "initialF",  "sessionF",
    "attribut", "appli",    "class",    "taxonomy", "label",   "heuristic", "distance",
    "nbDetectors"};
inline constexpr std::size_t kTrafficColumnCount = 23;
inline constexpr std::size_t kLabeledColumnCount = kSchemaColumns.size();

enum class Schema { Traffic, Labeled };
enum class TimeUnit { Milliseconds, Seconds };

inline std::size_t column_count(Schema s) {
  return s == Schema::Traffic ? kTrafficColumnCount : kLabeledColumnCount;
}

inline std::string header_line(Schema s) {
  std::string out;
  for (std::size_t i = 0; i < column_count(s); ++i) {
    if (i) out.push_back(',');
    out.append(kSchemaColumns[i]);
  }
  return out;
}

namespace detail {

// Milliseconds render as an integer; seconds as fixed 3 decimals.
inline void append_time(std::string& out, std::int64_t ms, TimeUnit unit) {
  if (unit == TimeUnit::Milliseconds) {
    csv::append_int(out, ms);
    return;
  }
  std::uint64_t mag = ms < 0 ? 0 - static_cast<std::uint64_t>(ms) : static_cast<std::uint64_t>(ms);
  if (ms < 0) out.push_back('-');
  csv::append_int(out, mag / 1000);
  out.push_back('.');
  const auto frac = static_cast<unsigned>(mag % 1000);
  out.push_back(static_cast<char>('0' + frac / 100));
  out.push_back(static_cast<char>('0' + frac / 10 % 10));
  out.push_back(static_cast<char>('0' + frac % 10));
}

// Inverse of append_time: a cell with a decimal point is seconds (at most
// millisecond precision), otherwise integer milliseconds.
inline std::optional<std::int64_t> parse_time(std::string_view v) {
  const auto dot = v.find('.');
  if (dot == std::string_view::npos) return csv::parse_int<std::int64_t>(v);
  bool negative = !v.empty() && v.front() == '-';
  std::string_view whole = v.substr(negative ? 1 : 0, dot - (negative ? 1 : 0));
  std::string_view frac = v.substr(dot + 1);
  if (frac.size() > 3 || whole.empty()) return std::nullopt;
  auto w = csv::parse_int<std::int64_t>(whole);
  if (!w || *w < 0) return std::nullopt;
  std::int64_t f = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const char c = i < frac.size() ? frac[i] : '0';
    if (c < '0' || c > '9') return std::nullopt;
    f = f * 10 + (c - '0');
  }
  const std::int64_t ms = *w * 1000 + f;
  return negative ? -ms : ms;
}

template <typename Int>
void append_optional(std::string& out, const std::optional<Int>& v) {
  if (v) csv::append_int(out, static_cast<unsigned>(*v));
}

inline void append_traffic(std::string& out, const FlowRecord& f, TimeUnit unit) {
  const auto sep = [&] { out.push_back(','); };
  out.append(f.key.src_ip.to_string()); sep();
  out.append(f.key.dst_ip.to_string()); sep();
  csv::append_int(out, f.key.src_port); sep();
  csv::append_int(out, f.key.dst_port); sep();
  csv::append_int(out, static_cast<unsigned>(f.key.proto)); sep();
  csv::append_int(out, f.packets); sep();
  csv::append_int(out, f.bytes); sep();
  out.append(f.flags.to_string()); sep();
  append_time(out, f.stime_ms, unit); sep();
  append_time(out, f.duration_ms(), unit); sep();
  append_time(out, f.etime_ms, unit); sep();
  csv::append_field(out, f.meta.sensor); sep();
  csv::append_field(out, f.meta.input_if); sep();
  csv::append_field(out, f.meta.output_if); sep();
  csv::append_field(out, f.meta.next_hop); sep();
  csv::append_field(out, f.meta.sensor_class); sep();
  csv::append_field(out, f.meta.flow_type); sep();
  append_optional(out, f.icmp_type); sep();
  append_optional(out, f.icmp_code); sep();
  out.append(f.initial_flags.to_string()); sep();
  out.append(f.session_flags.to_string()); sep();
  csv::append_field(out, f.meta.attributes); sep();
  csv::append_field(out, f.meta.application);
}

inline void append_label(std::string& out, const LabeledFlow& f) {
  out.push_back(',');
  out.append(to_string(f.cls));
  out.push_back(',');
  csv::append_field(out, f.taxonomy);
  out.push_back(',');
  out.append(to_string(f.label));
  out.push_back(',');
  csv::append_int(out, f.heuristic);
  out.push_back(',');
  csv::append_double(out, f.distance);
  out.push_back(',');
  csv::append_int(out, f.nb_detectors);
}

}  // namespace detail

inline std::string format_row(const FlowRecord& f, TimeUnit unit = TimeUnit::Milliseconds) {
  std::string out;
  detail::append_traffic(out, f, unit);
  return out;
}

inline std::string format_row(const LabeledFlow& f, TimeUnit unit = TimeUnit::Milliseconds) {
  std::string out;
  detail::append_traffic(out, f.flow, unit);
  detail::append_label(out, f);
  return out;
}

// Streaming CSV writer; the header is written on construction.
class FlowCsvWriter {
 public:
  FlowCsvWriter(const std::filesystem::path& path, Schema schema,
                TimeUnit unit = TimeUnit::Milliseconds)
      : out_(path), schema_(schema), unit_(unit) {
    line_ = header_line(schema);
    line_.push_back('\n');
    out_.write(line_);
  }

  void write(const LabeledFlow& f) {
    line_.clear();
    detail::append_traffic(line_, f.flow, unit_);
    if (schema_ == Schema::Labeled) detail::append_label(line_, f);
    line_.push_back('\n');
    out_.write(line_);
    ++rows_;
  }

  void write(const FlowRecord& f) {
    if (schema_ != Schema::Traffic) {
      throw Error(ErrorKind::SchemaMismatch, "unlabeled flow written to a labeled CSV");
    }
    line_.clear();
    detail::append_traffic(line_, f, unit_);
    line_.push_back('\n');
    out_.write(line_);
    ++rows_;
  }

  void close() { out_.close(); }
  std::size_t rows() const noexcept { return rows_; }

 private:
  OutputFile out_;
  Schema schema_;
  TimeUnit unit_;
  std::string line_;
  std::size_t rows_ = 0;
};

inline std::size_t write_flows(std::span<const LabeledFlow> flows, const std::filesystem::path& path,
                               TimeUnit unit = TimeUnit::Milliseconds) {
  FlowCsvWriter w(path, Schema::Labeled, unit);
  for (const auto& f : flows) w.write(f);
  w.close();
  return w.rows();
}

// Reads traffic or labeled flow CSVs. The header must list the schema columns
// in order. Traffic-only rows come back labeled normal.
class FlowCsvReader {
 public:
  explicit FlowCsvReader(const std::filesystem::path& path) : in_(path) {
    csv::Record header;
    if (!in_.next(header)) {
      throw Error(ErrorKind::SchemaMismatch, "'" + path.string() + "': missing header row");
    }
    header_raw_ = header.raw;
    const auto n = header.fields.size();
    if (n != kTrafficColumnCount && n != kLabeledColumnCount) {
      throw Error(ErrorKind::SchemaMismatch, "'" + path.string() + "': expected " +
                                                 std::to_string(kTrafficColumnCount) + " or " +
                                                 std::to_string(kLabeledColumnCount) +
                                                 " columns, found " + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (csv::trim(header.fields[i]) != kSchemaColumns[i]) {
        throw Error(ErrorKind::SchemaMismatch, "'" + path.string() + "': column " +
                                                   std::to_string(i + 1) + " is '" +
                                                   header.fields[i] + "', expected '" +
                                                   std::string(kSchemaColumns[i]) + "'");
      }
    }
    schema_ = n == kLabeledColumnCount ? Schema::Labeled : Schema::Traffic;
  }

  Schema schema() const noexcept { return schema_; }
  const std::string& header_raw() const noexcept { return header_raw_; }
  // Raw text of the last record returned by next().
  const std::string& row_raw() const noexcept { return rec_.raw; }
  std::size_t row() const noexcept { return row_; }

  bool next(LabeledFlow& out) {
    if (!in_.next(rec_)) return false;
    ++row_;
    const auto& f = rec_.fields;
    if (f.size() != column_count(schema_)) {
      throw RowError(ErrorKind::MalformedRow, row_,
                     "expected " + std::to_string(column_count(schema_)) + " fields, found " +
                         std::to_string(f.size()));
    }
    out = LabeledFlow{};
    FlowRecord& r = out.flow;
    r.key.src_ip = ip(0);
    r.key.dst_ip = ip(1);
    r.key.src_port = number<std::uint16_t>(2);
    r.key.dst_port = number<std::uint16_t>(3);
    r.key.proto = number<std::uint8_t>(4);
    r.packets = number<std::uint64_t>(5);
    r.bytes = number<std::uint64_t>(6);
    r.flags = flags(7);
    r.stime_ms = time(8);
    const std::int64_t durat = time(9);
    r.etime_ms = time(10);
    if (durat != r.etime_ms - r.stime_ms) bad(9, "durat != eTime - sTime");
    r.meta.sensor = f[11];
    r.meta.input_if = f[12];
    r.meta.output_if = f[13];
    r.meta.next_hop = f[14];
    r.meta.sensor_class = f[15];
    r.meta.flow_type = f[16];
    if (!f[17].empty()) r.icmp_type = number<std::uint8_t>(17);
    if (!f[18].empty()) r.icmp_code = number<std::uint8_t>(18);
    r.initial_flags = flags(19);
    r.session_flags = flags(20);
    r.meta.attributes = f[21];
    r.meta.application = f[22];
    if (schema_ == Schema::Traffic) return true;

    auto cls = parse_flow_class(f[23]);
    if (!cls) bad(23, "unknown class");
    out.cls = *cls;
    out.taxonomy = f[24];
    auto label = parse_mawi_label(f[25]);
    if (!label) bad(25, "unknown label");
    out.label = *label;
    out.heuristic = number<std::int64_t>(26);
    auto distance = csv::parse_double(f[27]);
    if (!distance) bad(27, "not a number");
    out.distance = *distance;
    out.nb_detectors = number<std::uint64_t>(28);
    return true;
  }

 private:
  [[noreturn]] void bad(std::size_t col, std::string_view why) const {
    throw RowError(ErrorKind::MalformedRow, row_,
                   std::string(kSchemaColumns[col]) + " '" + rec_.fields[col] + "': " +
                       std::string(why));
  }
  IpAddress ip(std::size_t col) const {
    auto v = IpAddress::parse(rec_.fields[col]);
    if (!v) bad(col, "not an IP address");
    return *v;
  }
  template <typename Int>
  Int number(std::size_t col) const {
    if constexpr (sizeof(Int) == 1) {
      auto v = csv::parse_int<unsigned>(rec_.fields[col]);
      if (!v || *v > 255) bad(col, "not an integer in range");
      return static_cast<Int>(*v);
    } else {
      auto v = csv::parse_int<Int>(rec_.fields[col]);
      if (!v) bad(col, "not an integer in range");
      return *v;
    }
  }
  TcpFlags flags(std::size_t col) const {
    auto v = TcpFlags::parse(rec_.fields[col]);
    if (!v) bad(col, "not a TCP flag string");
    return *v;
  }
  std::int64_t time(std::size_t col) const {
    auto v = detail::parse_time(rec_.fields[col]);
    if (!v) bad(col, "not a time value");
    return *v;
  }

  csv::Reader in_;
  Schema schema_ = Schema::Labeled;
  std::string header_raw_;
  csv::Record rec_;
  std::size_t row_ = 0;
};

// Reads a labeled CSV in full.
inline std::vector<LabeledFlow> read_flows(const std::filesystem::path& path) {
  FlowCsvReader reader(path);
  if (reader.schema() != Schema::Labeled) {
    throw Error(ErrorKind::SchemaMismatch, "'" + path.string() + "': expected " +
                                               std::to_string(kLabeledColumnCount) +
                                               " columns, found " +
                                               std::to_string(kTrafficColumnCount));
  }
  std::vector<LabeledFlow> out;
  LabeledFlow f;
  while (reader.next(f)) out.push_back(std::move(f));
  return out;
}

struct SplitResult {
  std::vector<std::filesystem::path> files;  // ordered by window index
  std::size_t rows = 0;
  bool empty_input = false;
};

// "<dir>/<stem>_w0007.csv"; the stem drops .gz and .csv suffixes.
inline std::filesystem::path window_file_name(const std::filesystem::path& input,
                                              const std::filesystem::path& out_dir,
                                              std::uint64_t window) {
  std::filesystem::path name = input.filename();
  if (name.extension() == ".gz") name = name.stem();
  if (name.extension() == ".csv") name = name.stem();
  char suffix[32];
  std::snprintf(suffix, sizeof(suffix), "_w%04llu.csv", static_cast<unsigned long long>(window));
  return out_dir / (name.string() + suffix);
}

inline std::uint64_t window_index(std::int64_t stime_ms, std::int64_t origin_ms, double window_s) {
  const double offset = static_cast<double>(stime_ms - origin_ms);
  return static_cast<std::uint64_t>(std::floor(offset / (window_s * 1000.0)));
}

// Partitions a flow CSV into half-open windows [k*w, (k+1)*w) measured from
// the smallest sTime in the file. Rows are copied verbatim; only non-empty
// windows produce a file.
inline SplitResult split_by_window(const std::filesystem::path& input, double window_s,
                                   const std::filesystem::path& out_dir) {
  if (!(window_s > 0) || !std::isfinite(window_s)) {
    throw Error(ErrorKind::Usage, "window must be a positive number of seconds");
  }
  SplitResult result;
  std::int64_t origin = 0;
  {
    FlowCsvReader pass1(input);
    LabeledFlow f;
    bool any = false;
    while (pass1.next(f)) {
      origin = any ? std::min(origin, f.flow.stime_ms) : f.flow.stime_ms;
      any = true;
    }
    if (!any) {
      result.empty_input = true;
      return result;
    }
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create '" + out_dir.string() + "': " + ec.message());

  constexpr std::size_t kMaxOpen = 256;
  FlowCsvReader pass2(input);
  const std::string header = pass2.header_raw() + "\n";
  std::map<std::uint64_t, OutputFile> open;
  std::set<std::uint64_t> created;
  LabeledFlow f;
  std::string line;
  while (pass2.next(f)) {
    const std::uint64_t w = window_index(f.flow.stime_ms, origin, window_s);
    auto it = open.find(w);
    if (it == open.end()) {
      if (open.size() >= kMaxOpen) {
        for (auto& [k, file] : open) file.close();
        open.clear();
      }
      const auto path = window_file_name(input, out_dir, w);
      const bool fresh = created.insert(w).second;
      it = open.emplace(w, OutputFile(path, fresh ? OutputFile::Mode::Truncate
                                                  : OutputFile::Mode::Append)).first;
      if (fresh) it->second.write(header);
    }
    line.assign(pass2.row_raw());
    line.push_back('\n');
    it->second.write(line);
    ++result.rows;
  }
  for (auto& [k, file] : open) file.close();
  for (auto w : created) result.files.push_back(window_file_name(input, out_dir, w));
  return result;
}

}  // namespace flowlabel

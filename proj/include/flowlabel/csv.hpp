#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "flowlabel/file_stream.hpp"

namespace flowlabel::csv {

struct Record {
  std::vector<std::string> fields;
  std::string raw;  // record text without the trailing line terminator
};

// RFC 4180 reader: comma separated, double-quote escaping, quoted fields may
// span lines. Accepts LF and CRLF terminators.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path) {}

  // Returns false at end of input. Blank lines are skipped.
  bool next(Record& rec) {
    while (true) {
      rec.fields.clear();
      rec.raw.clear();
      if (!read_record(rec)) return false;
      if (!(rec.fields.size() == 1 && rec.fields[0].empty() && rec.raw.empty())) return true;
    }
  }

  // Number of records returned so far, header included.
  std::size_t records_read() const noexcept { return records_; }
  const std::filesystem::path& path() const noexcept { return in_.path(); }

 private:
  int peek() {
    if (pos_ == len_) {
      len_ = in_.read(buf_);
      pos_ = 0;
      if (len_ == 0) return -1;
    }
    return buf_[pos_];
  }
  int take() {
    const int c = peek();
    if (c >= 0) ++pos_;
    return c;
  }

  bool read_record(Record& rec) {
    if (peek() < 0) return false;
    std::string field;
    bool quoted = false;
    bool field_started_quoted = false;
    while (true) {
      const int c = take();
      if (c < 0) break;
      const char ch = static_cast<char>(c);
      if (quoted) {
        rec.raw.push_back(ch);
        if (ch == '"') {
          if (peek() == '"') {
            rec.raw.push_back('"');
            take();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          field.push_back(ch);
        }
        continue;
      }
      if (ch == '\n') break;
      if (ch == '\r') {
        if (peek() == '\n') take();
        break;
      }
      rec.raw.push_back(ch);
      if (ch == ',') {
        rec.fields.push_back(std::move(field));
        field.clear();
        field_started_quoted = false;
      } else if (ch == '"' && field.empty() && !field_started_quoted) {
        quoted = true;
        field_started_quoted = true;
      } else {
        field.push_back(ch);
      }
    }
    rec.fields.push_back(std::move(field));
    ++records_;
    return true;
  }

  InputFile in_;
  std::array<std::uint8_t, 1 << 16> buf_{};
  std::size_t pos_ = 0;
  std::size_t len_ = 0;
  std::size_t records_ = 0;
};

inline bool needs_quoting(std::string_view v) {
  return v.find_first_of(",\"\r\n") != std::string_view::npos;
}

inline void append_field(std::string& out, std::string_view v) {
  if (!needs_quoting(v)) {
    out.append(v);
    return;
  }
  out.push_back('"');
  for (char c : v) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

template <typename Int>
void append_int(std::string& out, Int value) {
  char buf[24];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, end);
}

// Shortest representation that parses back to the same double.
inline void append_double(std::string& out, double value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, end);
}

template <typename Int>
std::optional<Int> parse_int(std::string_view text) {
  Int value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

inline std::optional<double> parse_double(std::string_view text) {
  double value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace flowlabel::csv

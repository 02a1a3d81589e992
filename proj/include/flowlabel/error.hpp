#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flowlabel {

enum class ErrorKind {
  Io,
  NotPcap,
  UnsupportedLinkType,
  TruncatedFile,
  MissingColumn,
  MalformedRow,
  AllNullTuple,
  SchemaMismatch,
  Usage,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "Io";
    case ErrorKind::NotPcap: return "NotPcap";
    case ErrorKind::UnsupportedLinkType: return "UnsupportedLinkType";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::AllNullTuple: return "AllNullTuple";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::Usage: return "Usage";
  }
  return "Unknown";
}

// Every failure raised by the library carries a kind so the CLI can map it
// onto an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Row-level failures also remember the 1-based data row (header excluded).
class RowError : public Error {
 public:
  RowError(ErrorKind kind, std::size_t row, const std::string& what)
      : Error(kind, "row " + std::to_string(row) + ": " + what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// CLI exit codes: 0 success, 1 usage, 2 input format, 3 I/O.
constexpr int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return 1;
    case ErrorKind::Io: return 3;
    default: return 2;
  }
}

}  // namespace flowlabel

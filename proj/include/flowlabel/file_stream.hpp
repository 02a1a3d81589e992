#pragma once

#include <zlib.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "flowlabel/error.hpp"

namespace flowlabel {

// Sequential byte reader over a plain or gzip-compressed file. zlib detects the
// 0x1f8b prefix itself and passes uncompressed input through unchanged.
class InputFile {
 public:
  InputFile() = default;

  explicit InputFile(const std::filesystem::path& path) : path_(path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
      throw Error(ErrorKind::Io, "cannot open '" + path.string() + "': no such file");
    }
    file_ = gzopen(path.c_str(), "rb");
    if (file_ == nullptr) {
      throw Error(ErrorKind::Io, "cannot open '" + path.string() + "': " + std::strerror(errno));
    }
    gzbuffer(file_, 1 << 18);
  }

  InputFile(const InputFile&) = delete;
  InputFile& operator=(const InputFile&) = delete;
  InputFile(InputFile&& other) noexcept
      : path_(std::move(other.path_)), file_(std::exchange(other.file_, nullptr)) {}
  InputFile& operator=(InputFile&& other) noexcept {
    if (this != &other) {
      close();
      path_ = std::move(other.path_);
      file_ = std::exchange(other.file_, nullptr);
    }
    return *this;
  }
  ~InputFile() { close(); }

  // Reads up to out.size() bytes; returns fewer only at end of file.
  std::size_t read(std::span<std::uint8_t> out) {
    std::size_t total = 0;
    while (total < out.size()) {
      const auto want = static_cast<unsigned>(std::min<std::size_t>(out.size() - total, 1u << 30));
      const int got = gzread(file_, out.data() + total, want);
      if (got < 0) {
        int errnum = 0;
        const char* msg = gzerror(file_, &errnum);
        throw Error(ErrorKind::Io, "read error in '" + path_.string() + "': " + msg);
      }
      if (got == 0) break;
      total += static_cast<std::size_t>(got);
    }
    return total;
  }

  // Returns the next byte or -1 at end of file.
  int get() {
    const int c = gzgetc(file_);
    if (c < 0 && !gzeof(file_)) {
      int errnum = 0;
      const char* msg = gzerror(file_, &errnum);
      throw Error(ErrorKind::Io, "read error in '" + path_.string() + "': " + msg);
    }
    return c;
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  void close() noexcept {
    if (file_ != nullptr) gzclose(file_);
    file_ = nullptr;
  }

  std::filesystem::path path_;
  gzFile file_ = nullptr;
};

// Buffered text writer; a ".gz" suffix selects gzip output.
class OutputFile {
 public:
  enum class Mode { Truncate, Append };

  OutputFile() = default;

  explicit OutputFile(const std::filesystem::path& path, Mode mode = Mode::Truncate)
      : path_(path), gzip_(path.extension() == ".gz") {
    const bool append = mode == Mode::Append;
    if (gzip_) {
      gz_ = gzopen(path.c_str(), append ? "ab" : "wb");
      if (gz_ == nullptr) fail_open();
      gzbuffer(gz_, 1 << 18);
    } else {
      plain_ = std::fopen(path.c_str(), append ? "ab" : "wb");
      if (plain_ == nullptr) fail_open();
    }
    buffer_.reserve(kFlushThreshold + 4096);
  }

  OutputFile(const OutputFile&) = delete;
  OutputFile& operator=(const OutputFile&) = delete;
  OutputFile(OutputFile&& other) noexcept
      : path_(std::move(other.path_)),
        gzip_(other.gzip_),
        plain_(std::exchange(other.plain_, nullptr)),
        gz_(std::exchange(other.gz_, nullptr)),
        buffer_(std::move(other.buffer_)) {}
  OutputFile& operator=(OutputFile&& other) noexcept {
    if (this != &other) {
      release();
      path_ = std::move(other.path_);
      gzip_ = other.gzip_;
      plain_ = std::exchange(other.plain_, nullptr);
      gz_ = std::exchange(other.gz_, nullptr);
      buffer_ = std::move(other.buffer_);
    }
    return *this;
  }
  ~OutputFile() { release(); }

  void write(std::string_view text) {
    buffer_.append(text);
    if (buffer_.size() >= kFlushThreshold) flush();
  }

  void flush() {
    if (buffer_.empty()) return;
    bool ok;
    if (gzip_) {
      ok = gzwrite(gz_, buffer_.data(), static_cast<unsigned>(buffer_.size())) ==
           static_cast<int>(buffer_.size());
    } else {
      ok = std::fwrite(buffer_.data(), 1, buffer_.size(), plain_) == buffer_.size();
    }
    buffer_.clear();
    if (!ok) throw Error(ErrorKind::Io, "write error in '" + path_.string() + "'");
  }

  // Flushes and closes, reporting failures that a destructor would swallow.
  void close() {
    flush();
    int rc = 0;
    if (gz_ != nullptr) rc = gzclose(std::exchange(gz_, nullptr)) == Z_OK ? 0 : -1;
    if (plain_ != nullptr) rc = std::fclose(std::exchange(plain_, nullptr));
    if (rc != 0) throw Error(ErrorKind::Io, "close error in '" + path_.string() + "'");
  }

  bool is_open() const noexcept { return gz_ != nullptr || plain_ != nullptr; }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  static constexpr std::size_t kFlushThreshold = 1 << 18;

  [[noreturn]] void fail_open() const {
    throw Error(ErrorKind::Io, "cannot open '" + path_.string() + "' for writing: " +
                                   std::strerror(errno));
  }

  void release() noexcept {
    try {
      if (is_open()) close();
    } catch (...) {
    }
  }

  std::filesystem::path path_;
  bool gzip_ = false;
  std::FILE* plain_ = nullptr;
  gzFile gz_ = nullptr;
  std::string buffer_;
};

}  // namespace flowlabel

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace flowlabel {

// The eight TCP flag bits in header order, rendered SiLK-style as letters.
class TcpFlags {
 public:
  static constexpr std::uint8_t FIN = 0x01;
  static constexpr std::uint8_t SYN = 0x02;
  static constexpr std::uint8_t RST = 0x04;
  static constexpr std::uint8_t PSH = 0x08;
  static constexpr std::uint8_t ACK = 0x10;
  static constexpr std::uint8_t URG = 0x20;
  static constexpr std::uint8_t ECE = 0x40;
  static constexpr std::uint8_t CWR = 0x80;

  static constexpr std::string_view kLetters = "FSRPAUEC";

  constexpr TcpFlags() = default;
  constexpr explicit TcpFlags(std::uint8_t bits) : bits_(bits) {}

  constexpr std::uint8_t bits() const noexcept { return bits_; }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr bool has(std::uint8_t mask) const noexcept { return (bits_ & mask) == mask; }

  constexpr TcpFlags& operator|=(TcpFlags other) noexcept {
    bits_ |= other.bits_;
    return *this;
  }
  friend constexpr TcpFlags operator|(TcpFlags a, TcpFlags b) noexcept {
    return TcpFlags(static_cast<std::uint8_t>(a.bits_ | b.bits_));
  }
  friend constexpr bool operator==(TcpFlags, TcpFlags) = default;

  // {SYN, ACK} -> "SA"; no flags -> "".
  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < kLetters.size(); ++i) {
      if (bits_ & (1u << i)) out.push_back(kLetters[i]);
    }
    return out;
  }

  // Accepts letters in any order, ignoring spaces ("S A" == "SA").
  static std::optional<TcpFlags> parse(std::string_view text) {
    std::uint8_t bits = 0;
    for (char c : text) {
      if (c == ' ') continue;
      const auto pos = kLetters.find(c);
      if (pos == std::string_view::npos) return std::nullopt;
      bits |= static_cast<std::uint8_t>(1u << pos);
    }
    return TcpFlags(bits);
  }

 private:
  std::uint8_t bits_ = 0;
};

}  // namespace flowlabel

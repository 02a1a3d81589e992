#pragma once

#include <arpa/inet.h>

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace flowlabel {

// IPv4 or IPv6 address held by value. IPv4 occupies the first four bytes;
// an IPv4 address never compares equal to its v4-mapped IPv6 form.
class IpAddress {
 public:
  enum class Family : std::uint8_t { V4 = 4, V6 = 6 };

  constexpr IpAddress() = default;

  static IpAddress v4(std::uint32_t host_order) {
    IpAddress a;
    a.family_ = Family::V4;
    a.bytes_[0] = static_cast<std::uint8_t>(host_order >> 24);
    a.bytes_[1] = static_cast<std::uint8_t>(host_order >> 16);
    a.bytes_[2] = static_cast<std::uint8_t>(host_order >> 8);
    a.bytes_[3] = static_cast<std::uint8_t>(host_order);
    return a;
  }

  // Network-order bytes, 4 or 16 of them.
  static IpAddress from_bytes(std::span<const std::uint8_t> raw) {
    IpAddress a;
    if (raw.size() == 4) {
      a.family_ = Family::V4;
    } else {
      a.family_ = Family::V6;
    }
    std::memcpy(a.bytes_.data(), raw.data(), raw.size() == 4 ? 4 : 16);
    return a;
  }

  static std::optional<IpAddress> parse(std::string_view text) {
    if (text.empty() || text.size() >= INET6_ADDRSTRLEN) return std::nullopt;
    char buf[INET6_ADDRSTRLEN];
    std::memcpy(buf, text.data(), text.size());
    buf[text.size()] = '\0';
    IpAddress a;
    if (text.find(':') == std::string_view::npos) {
      if (inet_pton(AF_INET, buf, a.bytes_.data()) != 1) return std::nullopt;
      a.family_ = Family::V4;
    } else {
      if (inet_pton(AF_INET6, buf, a.bytes_.data()) != 1) return std::nullopt;
      a.family_ = Family::V6;
    }
    return a;
  }

  Family family() const noexcept { return family_; }
  bool is_v4() const noexcept { return family_ == Family::V4; }
  std::span<const std::uint8_t> bytes() const noexcept {
    return {bytes_.data(), is_v4() ? std::size_t{4} : std::size_t{16}};
  }

  std::string to_string() const {
    char buf[INET6_ADDRSTRLEN];
    const int af = is_v4() ? AF_INET : AF_INET6;
    if (inet_ntop(af, bytes_.data(), buf, sizeof(buf)) == nullptr) return {};
    return buf;
  }

  std::size_t hash() const noexcept {
    // FNV-1a over family + address bytes.
    std::uint64_t h = 1469598103934665603ull;
    h = (h ^ static_cast<std::uint8_t>(family_)) * 1099511628211ull;
    for (auto b : bytes_) h = (h ^ b) * 1099511628211ull;
    return static_cast<std::size_t>(h);
  }

  friend auto operator<=>(const IpAddress&, const IpAddress&) = default;
  friend bool operator==(const IpAddress&, const IpAddress&) = default;

 private:
  Family family_ = Family::V4;
  std::array<std::uint8_t, 16> bytes_{};
};

struct IpAddressHash {
  std::size_t operator()(const IpAddress& a) const noexcept { return a.hash(); }
};

inline std::size_t hash_combine(std::size_t seed, std::size_t value) noexcept {
  return seed ^ (value + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2));
}

}  // namespace flowlabel

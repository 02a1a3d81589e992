#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "flowlabel/error.hpp"
#include "flowlabel/file_stream.hpp"
#include "flowlabel/ip_address.hpp"
#include "flowlabel/tcp_flags.hpp"

namespace flowlabel {

namespace ipproto {
constexpr std::uint8_t kIcmp = 1;
constexpr std::uint8_t kTcp = 6;
constexpr std::uint8_t kUdp = 17;
constexpr std::uint8_t kIcmpV6 = 58;
}  // namespace ipproto

inline bool is_icmp(std::uint8_t proto) {
  return proto == ipproto::kIcmp || proto == ipproto::kIcmpV6;
}

struct PacketRecord {
  std::int64_t ts_ms = 0;
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t proto = 0;
  std::uint32_t ip_len = 0;
  TcpFlags tcp_flags;
  std::optional<std::uint8_t> icmp_type;
  std::optional<std::uint8_t> icmp_code;

  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

enum class LinkType : std::uint32_t {
  Ethernet = 1,
  Raw = 101,
  LinuxSll = 113,
  Ipv4 = 228,
  Ipv6 = 229,
};

enum class SkipReason {
  NotIp,            // ARP, LLDP, ...
  Truncated,        // captured bytes end inside the link/IP/transport header
  BadIpHeader,      // version/IHL inconsistent with the link layer
};

constexpr std::string_view to_string(SkipReason r) {
  switch (r) {
    case SkipReason::NotIp: return "not-ip";
    case SkipReason::Truncated: return "truncated";
    case SkipReason::BadIpHeader: return "bad-ip-header";
  }
  return "unknown";
}

namespace detail {

// Bounds-checked big-endian cursor over one captured frame.
class ByteView {
 public:
  explicit ByteView(std::span<const std::uint8_t> data) : data_(data) {}

  bool has(std::size_t offset, std::size_t n) const noexcept {
    return offset <= data_.size() && n <= data_.size() - offset;
  }
  std::uint8_t u8(std::size_t off) const { return data_[off]; }
  std::uint16_t be16(std::size_t off) const {
    return static_cast<std::uint16_t>((data_[off] << 8) | data_[off + 1]);
  }
  std::span<const std::uint8_t> sub(std::size_t off, std::size_t n) const {
    return data_.subspan(off, n);
  }
  std::span<const std::uint8_t> from(std::size_t off) const { return data_.subspan(off); }
  std::size_t size() const noexcept { return data_.size(); }

 private:
  std::span<const std::uint8_t> data_;
};

constexpr std::uint16_t kEtherIpv4 = 0x0800;
constexpr std::uint16_t kEtherIpv6 = 0x86DD;
constexpr std::uint16_t kEtherVlan = 0x8100;
constexpr std::uint16_t kEtherQinQ = 0x88A8;

// Fills ports/flags/ICMP fields from the transport header at `l4`.
inline std::optional<SkipReason> decode_transport(ByteView l4, PacketRecord& pkt) {
  switch (pkt.proto) {
    case ipproto::kTcp:
      if (!l4.has(0, 20)) return SkipReason::Truncated;
      pkt.src_port = l4.be16(0);
      pkt.dst_port = l4.be16(2);
      pkt.tcp_flags = TcpFlags(l4.u8(13));
      return std::nullopt;
    case ipproto::kUdp:
      if (!l4.has(0, 8)) return SkipReason::Truncated;
      pkt.src_port = l4.be16(0);
      pkt.dst_port = l4.be16(2);
      return std::nullopt;
    case ipproto::kIcmp:
    case ipproto::kIcmpV6:
      if (!l4.has(0, 4)) return SkipReason::Truncated;
      pkt.icmp_type = l4.u8(0);
      pkt.icmp_code = l4.u8(1);
      return std::nullopt;
    default:
      return std::nullopt;
  }
}

inline std::variant<PacketRecord, SkipReason> decode_ipv4(ByteView ip, std::int64_t ts_ms) {
  if (!ip.has(0, 20)) return SkipReason::Truncated;
  if ((ip.u8(0) >> 4) != 4) return SkipReason::BadIpHeader;
  const std::size_t ihl = static_cast<std::size_t>(ip.u8(0) & 0x0F) * 4;
  if (ihl < 20) return SkipReason::BadIpHeader;
  if (!ip.has(0, ihl)) return SkipReason::Truncated;

  PacketRecord pkt;
  pkt.ts_ms = ts_ms;
  pkt.ip_len = ip.be16(2);
  pkt.proto = ip.u8(9);
  pkt.src_ip = IpAddress::from_bytes(ip.sub(12, 4));
  pkt.dst_ip = IpAddress::from_bytes(ip.sub(16, 4));

  const std::uint16_t frag_offset = ip.be16(6) & 0x1FFF;
  if (frag_offset != 0) return pkt;  // non-first fragment: no transport header

  if (auto skip = decode_transport(ByteView(ip.from(ihl)), pkt)) return *skip;
  return pkt;
}

inline std::variant<PacketRecord, SkipReason> decode_ipv6(ByteView ip, std::int64_t ts_ms) {
  if (!ip.has(0, 40)) return SkipReason::Truncated;
  if ((ip.u8(0) >> 4) != 6) return SkipReason::BadIpHeader;

  PacketRecord pkt;
  pkt.ts_ms = ts_ms;
  pkt.ip_len = 40u + ip.be16(4);
  pkt.src_ip = IpAddress::from_bytes(ip.sub(8, 16));
  pkt.dst_ip = IpAddress::from_bytes(ip.sub(24, 16));

  std::uint8_t next = ip.u8(6);
  std::size_t off = 40;
  while (true) {
    switch (next) {
      case 0:    // hop-by-hop
      case 43:   // routing
      case 60: {  // destination options
        if (!ip.has(off, 8)) return SkipReason::Truncated;
        const std::size_t len = (static_cast<std::size_t>(ip.u8(off + 1)) + 1) * 8;
        next = ip.u8(off);
        off += len;
        continue;
      }
      case 44: {  // fragment
        if (!ip.has(off, 8)) return SkipReason::Truncated;
        const std::uint16_t frag_offset = ip.be16(off + 2) >> 3;
        next = ip.u8(off);
        off += 8;
        if (frag_offset != 0) {
          pkt.proto = next;
          return pkt;
        }
        continue;
      }
      default:
        break;
    }
    break;
  }
  pkt.proto = next;
  if (!ip.has(off, 0)) return SkipReason::Truncated;
  if (auto skip = decode_transport(ByteView(ip.from(off)), pkt)) return *skip;
  return pkt;
}

inline std::variant<PacketRecord, SkipReason> decode_ip(ByteView ip, std::int64_t ts_ms) {
  if (!ip.has(0, 1)) return SkipReason::Truncated;
  switch (ip.u8(0) >> 4) {
    case 4: return decode_ipv4(ip, ts_ms);
    case 6: return decode_ipv6(ip, ts_ms);
    default: return SkipReason::BadIpHeader;
  }
}

inline std::variant<PacketRecord, SkipReason> decode_by_ethertype(std::uint16_t ethertype,
                                                                  ByteView payload,
                                                                  std::int64_t ts_ms) {
  switch (ethertype) {
    case kEtherIpv4: return decode_ipv4(payload, ts_ms);
    case kEtherIpv6: return decode_ipv6(payload, ts_ms);
    default: return SkipReason::NotIp;
  }
}

}  // namespace detail

// Decodes one captured frame. Pure function of its inputs; never reads outside
// `frame`.
inline std::variant<PacketRecord, SkipReason> decode_frame(LinkType link,
                                                           std::span<const std::uint8_t> frame,
                                                           std::int64_t ts_ms) {
  using namespace detail;
  const ByteView view(frame);
  switch (link) {
    case LinkType::Ethernet: {
      if (!view.has(0, 14)) return SkipReason::Truncated;
      std::size_t off = 12;
      std::uint16_t ethertype = view.be16(off);
      off += 2;
      while (ethertype == kEtherVlan || ethertype == kEtherQinQ) {
        if (!view.has(off, 4)) return SkipReason::Truncated;
        ethertype = view.be16(off + 2);
        off += 4;
      }
      return decode_by_ethertype(ethertype, ByteView(view.from(off)), ts_ms);
    }
    case LinkType::LinuxSll: {
      if (!view.has(0, 16)) return SkipReason::Truncated;
      return decode_by_ethertype(view.be16(14), ByteView(view.from(16)), ts_ms);
    }
    case LinkType::Raw: return decode_ip(view, ts_ms);
    case LinkType::Ipv4: return decode_ipv4(view, ts_ms);
    case LinkType::Ipv6: return decode_ipv6(view, ts_ms);
  }
  return SkipReason::NotIp;
}

// Streaming reader for classic libpcap files (either byte order, microsecond
// or nanosecond timestamps, optionally gzip-compressed).
class PcapReader {
 public:
  enum class Next { Packet, Skipped, End };

  static constexpr std::uint32_t kMaxRecordBytes = 16u << 20;

  explicit PcapReader(const std::filesystem::path& path) : in_(path) {
    std::array<std::uint8_t, 24> header{};
    const std::size_t got = in_.read(header);
    if (got < 4) throw Error(ErrorKind::NotPcap, "'" + path.string() + "' is not a pcap file");
    const std::uint32_t magic = le32(header.data());
    switch (magic) {
      case 0xa1b2c3d4: swapped_ = false; nanos_ = false; break;
      case 0xd4c3b2a1: swapped_ = true; nanos_ = false; break;
      case 0xa1b23c4d: swapped_ = false; nanos_ = true; break;
      case 0x4d3cb2a1: swapped_ = true; nanos_ = true; break;
      default:
        throw Error(ErrorKind::NotPcap, "'" + path.string() + "' is not a pcap file (bad magic)");
    }
    if (got < header.size()) {
      throw Error(ErrorKind::TruncatedFile, "'" + path.string() + "': truncated global header");
    }
    const std::uint32_t network = u32(header.data() + 20) & 0x0FFFFFFF;
    switch (network) {
      case 1: case 101: case 113: case 228: case 229:
        link_ = static_cast<LinkType>(network);
        break;
      default:
        throw Error(ErrorKind::UnsupportedLinkType,
                    "'" + path.string() + "': unsupported link type " + std::to_string(network));
    }
  }

  LinkType link_type() const noexcept { return link_; }
  bool nanosecond_precision() const noexcept { return nanos_; }
  bool byte_swapped() const noexcept { return swapped_; }

  // Advances one pcap record. On Packet, `out` holds the decoded packet; on
  // Skipped, last_skip_reason() says why.
  Next next(PacketRecord& out) {
    std::array<std::uint8_t, 16> rh{};
    const std::size_t got = in_.read(rh);
    if (got == 0) return Next::End;
    if (got < rh.size()) {
      throw Error(ErrorKind::TruncatedFile,
                  "'" + in_.path().string() + "': truncated record header after " +
                      std::to_string(records_) + " records");
    }
    const std::uint32_t sec = u32(rh.data());
    const std::uint32_t frac = u32(rh.data() + 4);
    const std::uint32_t incl = u32(rh.data() + 8);
    if (incl > kMaxRecordBytes) {
      throw Error(ErrorKind::TruncatedFile, "'" + in_.path().string() + "': record " +
                                                std::to_string(records_ + 1) +
                                                " claims implausible length " +
                                                std::to_string(incl));
    }
    frame_.resize(incl);
    if (in_.read(frame_) < incl) {
      throw Error(ErrorKind::TruncatedFile, "'" + in_.path().string() + "': record " +
                                                std::to_string(records_ + 1) +
                                                " extends past end of file");
    }
    ++records_;

    const std::int64_t ts_ms = static_cast<std::int64_t>(sec) * 1000 +
                               (nanos_ ? frac / 1000000u : frac / 1000u);
    auto decoded = decode_frame(link_, frame_, ts_ms);
    if (auto* pkt = std::get_if<PacketRecord>(&decoded)) {
      out = std::move(*pkt);
      return Next::Packet;
    }
    last_skip_ = std::get<SkipReason>(decoded);
    ++skipped_;
    return Next::Skipped;
  }

  std::uint64_t records() const noexcept { return records_; }
  std::uint64_t skipped() const noexcept { return skipped_; }
  SkipReason last_skip_reason() const noexcept { return last_skip_; }

 private:
  static std::uint32_t le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  std::uint32_t u32(const std::uint8_t* p) const {
    const std::uint32_t v = le32(p);
    return swapped_ ? __builtin_bswap32(v) : v;
  }

  InputFile in_;
  LinkType link_ = LinkType::Ethernet;
  bool swapped_ = false;
  bool nanos_ = false;
  std::vector<std::uint8_t> frame_;
  std::uint64_t records_ = 0;
  std::uint64_t skipped_ = 0;
  SkipReason last_skip_ = SkipReason::NotIp;
};

// Opens a capture, positioned at the first record.
inline PcapReader open_capture(const std::filesystem::path& path) { return PcapReader(path); }

}  // namespace flowlabel

#pragma once

// Test-only helpers: temporary directories and a pcap writer that lays out
// headers byte by byte from the RFC 791/793/768/792/8200 formats. Nothing
// here shares code with the library's decoder.

#include <stdlib.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace testsupport {

using Bytes = std::vector<std::uint8_t>;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "flowlabel-test-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline void write_bytes(const std::filesystem::path& p, const Bytes& data) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::size_t count_lines(const std::filesystem::path& p) {
  const auto s = read_file(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

inline void put16(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}
inline void put32(Bytes& b, std::uint32_t v) {
  put16(b, static_cast<std::uint16_t>(v >> 16));
  put16(b, static_cast<std::uint16_t>(v));
}

using V4 = std::array<std::uint8_t, 4>;
using V6 = std::array<std::uint8_t, 16>;

// --- transport headers -------------------------------------------------------

inline Bytes tcp_header(std::uint16_t sport, std::uint16_t dport, std::uint8_t flags) {
  Bytes b;
  put16(b, sport);
  put16(b, dport);
  put32(b, 1000);      // seq
  put32(b, 0);         // ack
  b.push_back(0x50);   // data offset 5 words
  b.push_back(flags);
  put16(b, 65535);     // window
  put16(b, 0);         // checksum
  put16(b, 0);         // urgent
  return b;
}

inline Bytes udp_header(std::uint16_t sport, std::uint16_t dport, std::uint16_t payload = 0) {
  Bytes b;
  put16(b, sport);
  put16(b, dport);
  put16(b, static_cast<std::uint16_t>(8 + payload));
  put16(b, 0);
  return b;
}

inline Bytes icmp_header(std::uint8_t type, std::uint8_t code) {
  Bytes b{type, code, 0, 0};
  put16(b, 0x1234);  // identifier
  put16(b, 1);       // sequence
  return b;
}

// --- IP headers ----------------------------------------------------------------

// `claimed_payload` is what the total-length field advertises beyond
// `transport`; the captured bytes stop at the transport header (payload-stripped
// as in MAWI traces).
inline Bytes ipv4_packet(V4 src, V4 dst, std::uint8_t proto, const Bytes& transport,
                         std::uint16_t claimed_payload = 0, std::uint16_t frag_offset = 0) {
  Bytes b;
  b.push_back(0x45);
  b.push_back(0);
  put16(b, static_cast<std::uint16_t>(20 + transport.size() + claimed_payload));
  put16(b, 0x0001);                       // id
  put16(b, frag_offset & 0x1FFF);         // flags + fragment offset
  b.push_back(64);                        // ttl
  b.push_back(proto);
  put16(b, 0);                            // checksum
  b.insert(b.end(), src.begin(), src.end());
  b.insert(b.end(), dst.begin(), dst.end());
  b.insert(b.end(), transport.begin(), transport.end());
  return b;
}

struct Ipv6Ext {
  std::uint8_t type;           // 0, 43, 60 or 44
  std::uint16_t frag_offset = 0;
};

inline Bytes ipv6_packet(V6 src, V6 dst, std::uint8_t proto, const Bytes& transport,
                         const std::vector<Ipv6Ext>& exts = {}, std::uint16_t claimed_payload = 0) {
  Bytes ext_bytes;
  for (std::size_t i = 0; i < exts.size(); ++i) {
    const std::uint8_t next = i + 1 < exts.size() ? exts[i + 1].type : proto;
    if (exts[i].type == 44) {
      ext_bytes.push_back(next);
      ext_bytes.push_back(0);
      put16(ext_bytes, static_cast<std::uint16_t>(exts[i].frag_offset << 3));
      put32(ext_bytes, 0xabcdef);
    } else {
      ext_bytes.push_back(next);
      ext_bytes.push_back(1);  // (1 + 1) * 8 = 16 bytes
      ext_bytes.insert(ext_bytes.end(), 14, 0);
    }
  }
  Bytes b;
  put32(b, 0x60000000);
  put16(b, static_cast<std::uint16_t>(ext_bytes.size() + transport.size() + claimed_payload));
  b.push_back(exts.empty() ? proto : exts.front().type);
  b.push_back(64);
  b.insert(b.end(), src.begin(), src.end());
  b.insert(b.end(), dst.begin(), dst.end());
  b.insert(b.end(), ext_bytes.begin(), ext_bytes.end());
  b.insert(b.end(), transport.begin(), transport.end());
  return b;
}

// --- link layers ----------------------------------------------------------------

inline Bytes ethernet(std::uint16_t ethertype, const Bytes& payload,
                      std::optional<std::uint16_t> vlan = std::nullopt) {
  Bytes b{0x00, 0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88, 0x99, 0xaa, 0xbb};
  if (vlan) {
    put16(b, 0x8100);
    put16(b, *vlan);
  }
  put16(b, ethertype);
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

inline Bytes linux_sll(std::uint16_t protocol, const Bytes& payload) {
  Bytes b;
  put16(b, 0);   // packet type
  put16(b, 1);   // ARPHRD_ETHER
  put16(b, 6);   // address length
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(i));
  put16(b, protocol);
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

inline Bytes arp_frame() {
  Bytes arp;
  put16(arp, 1);
  put16(arp, 0x0800);
  arp.push_back(6);
  arp.push_back(4);
  put16(arp, 1);
  arp.insert(arp.end(), 20, 0x01);
  return ethernet(0x0806, arp);
}

// --- pcap container -----------------------------------------------------------

class PcapWriter {
 public:
  PcapWriter(std::uint32_t linktype = 1, bool big_endian = false, bool nanos = false)
      : big_endian_(big_endian) {
    put_u32(nanos ? 0xa1b23c4d : 0xa1b2c3d4);
    put_u16(2);
    put_u16(4);
    put_u32(0);
    put_u32(0);
    put_u32(65535);
    put_u32(linktype);
  }

  void add(std::uint32_t sec, std::uint32_t frac, const Bytes& frame) {
    put_u32(sec);
    put_u32(frac);
    put_u32(static_cast<std::uint32_t>(frame.size()));
    put_u32(static_cast<std::uint32_t>(frame.size()));
    data_.insert(data_.end(), frame.begin(), frame.end());
    ++records_;
  }

  // Record whose header promises more bytes than follow.
  void add_truncated(std::uint32_t sec, const Bytes& frame, std::uint32_t claimed) {
    put_u32(sec);
    put_u32(0);
    put_u32(claimed);
    put_u32(claimed);
    data_.insert(data_.end(), frame.begin(), frame.end());
  }

  const Bytes& bytes() const { return data_; }
  std::size_t records() const { return records_; }
  void save(const std::filesystem::path& p) const { write_bytes(p, data_); }

 private:
  void put_u16(std::uint16_t v) {
    if (big_endian_) {
      put16(data_, v);
    } else {
      data_.push_back(static_cast<std::uint8_t>(v));
      data_.push_back(static_cast<std::uint8_t>(v >> 8));
    }
  }
  void put_u32(std::uint32_t v) {
    if (big_endian_) {
      put32(data_, v);
    } else {
      for (int i = 0; i < 4; ++i) data_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }

  bool big_endian_;
  Bytes data_;
  std::size_t records_ = 0;
};

}  // namespace testsupport

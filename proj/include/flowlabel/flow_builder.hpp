#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flowlabel/ip_address.hpp"
#include "flowlabel/pcap_reader.hpp"
#include "flowlabel/tcp_flags.hpp"

namespace flowlabel {

// Unidirectional five-tuple. A->B and B->A are different keys.
struct FlowKey {
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t proto = 0;

  static FlowKey of(const PacketRecord& p) {
    return {p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.proto};
  }

  friend auto operator<=>(const FlowKey&, const FlowKey&) = default;
  friend bool operator==(const FlowKey&, const FlowKey&) = default;
};

struct FlowKeyHash {
  std::size_t operator()(const FlowKey& k) const noexcept {
    std::size_t h = k.src_ip.hash();
    h = hash_combine(h, k.dst_ip.hash());
    h = hash_combine(h, (std::size_t{k.src_port} << 24) | (std::size_t{k.dst_port} << 8) | k.proto);
    return h;
  }
};

// Columns a pcap cannot supply (sensor, SNMP interfaces, next hop, ...). They
// are emitted verbatim on every flow.
struct FlowMetadata {
  std::string sensor;
  std::string input_if = "0";
  std::string output_if = "0";
  std::string next_hop = "0.0.0.0";
  std::string sensor_class;
  std::string flow_type;
  std::string attributes;
  std::string application = "0";

  friend bool operator==(const FlowMetadata&, const FlowMetadata&) = default;
};

struct FlowRecord {
  FlowKey key;
  std::uint64_t packets = 0;
  std::uint64_t bytes = 0;
  TcpFlags flags;
  TcpFlags initial_flags;
  TcpFlags session_flags;
  std::int64_t stime_ms = 0;
  std::int64_t etime_ms = 0;
  std::optional<std::uint8_t> icmp_type;
  std::optional<std::uint8_t> icmp_code;
  FlowMetadata meta;

  std::int64_t duration_ms() const noexcept { return etime_ms - stime_ms; }

  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

enum class AggregationMode { Aggregate, PerPacket };

struct AggregationConfig {
  static constexpr std::int64_t kNoTimeout = std::numeric_limits<std::int64_t>::max();

  AggregationMode mode = AggregationMode::Aggregate;
  std::int64_t idle_timeout_ms = 30'000;
  std::int64_t active_timeout_ms = 30 * 60'000;
  std::int64_t reorder_window_ms = 1'000;
  FlowMetadata metadata;
};

struct FlowBuilderStats {
  std::uint64_t packets = 0;
  std::uint64_t bytes = 0;
  std::uint64_t flows = 0;
  std::uint64_t late_packets = 0;  // arrived more than reorder_window_ms behind the clock
};

namespace detail {
inline std::int64_t saturating_add(std::int64_t a, std::int64_t b) {
  if (b > 0 && a > std::numeric_limits<std::int64_t>::max() - b)
    return std::numeric_limits<std::int64_t>::max();
  if (b < 0 && a < std::numeric_limits<std::int64_t>::min() - b)
    return std::numeric_limits<std::int64_t>::min();
  return a + b;
}
}  // namespace detail

// Streaming five-tuple aggregator. Finished flows are handed to `sink` ordered
// by (end time, first-seen order). A flow is cut when the next packet for its
// key arrives more than idle_timeout_ms after the flow's last packet, or more
// than active_timeout_ms after its first packet.
//
// Packets may arrive up to reorder_window_ms out of order without affecting
// the output: they are held until the window has passed and then aggregated
// in (timestamp, arrival) order. Later stragglers are aggregated on arrival
// and counted in late_packets; output order is then best effort.
template <typename Sink>
class FlowBuilder {
 public:
  FlowBuilder(AggregationConfig config, Sink sink)
      : config_(std::move(config)), sink_(std::move(sink)) {}

  FlowBuilder(const FlowBuilder&) = delete;
  FlowBuilder& operator=(const FlowBuilder&) = delete;

  void add(const PacketRecord& pkt) {
    ++stats_.packets;
    stats_.bytes += pkt.ip_len;
    clock_ = std::max(clock_, pkt.ts_ms);
    const std::int64_t horizon = detail::saturating_add(clock_, -config_.reorder_window_ms);
    if (pkt.ts_ms < horizon) {
      ++stats_.late_packets;
      process(pkt);
    } else {
      pending_.emplace(Order{pkt.ts_ms, arrivals_++}, pkt);
    }
    while (!pending_.empty() && pending_.begin()->first.first <= horizon) {
      process(pending_.begin()->second);
      pending_.erase(pending_.begin());
    }
    emit_ready();
  }

  // End of stream: every remaining flow is emitted.
  void finish() {
    for (const auto& [order, pkt] : pending_) process(pkt);
    pending_.clear();
    while (!active_.empty()) close(active_.begin());
    for (auto& [order, rec] : closed_) deliver(std::move(rec));
    closed_.clear();
  }

  const FlowBuilderStats& stats() const noexcept { return stats_; }
  std::size_t active_flows() const noexcept { return active_.size(); }

 private:
  using Order = std::pair<std::int64_t, std::uint64_t>;  // (time, first-seen seq)

  struct Active {
    FlowRecord rec;
    std::uint64_t seq;
    std::int64_t deadline;
  };
  using ActiveMap = std::unordered_map<FlowKey, Active, FlowKeyHash>;

  void process(const PacketRecord& pkt) {
    processed_ = std::max(processed_, pkt.ts_ms);
    if (config_.mode == AggregationMode::PerPacket) {
      FlowRecord rec = start_record(pkt);
      closed_.emplace(Order{rec.etime_ms, next_seq_++}, std::move(rec));
    } else {
      aggregate(pkt);
      expire_idle();
    }
  }

  FlowRecord start_record(const PacketRecord& pkt) const {
    FlowRecord rec;
    rec.key = FlowKey::of(pkt);
    rec.packets = 1;
    rec.bytes = pkt.ip_len;
    if (pkt.proto == ipproto::kTcp) {
      rec.flags = pkt.tcp_flags;
      rec.initial_flags = pkt.tcp_flags;
    }
    rec.stime_ms = pkt.ts_ms;
    rec.etime_ms = pkt.ts_ms;
    rec.icmp_type = pkt.icmp_type;
    rec.icmp_code = pkt.icmp_code;
    rec.meta = config_.metadata;
    return rec;
  }

  std::int64_t deadline_of(const FlowRecord& rec) const {
    return std::min(detail::saturating_add(rec.etime_ms, config_.idle_timeout_ms),
                    detail::saturating_add(rec.stime_ms, config_.active_timeout_ms));
  }

  void aggregate(const PacketRecord& pkt) {
    const FlowKey key = FlowKey::of(pkt);
    auto it = active_.find(key);
    if (it != active_.end() && pkt.ts_ms > it->second.deadline) {
      close(it);
      it = active_.end();
    }
    if (it == active_.end()) {
      FlowRecord rec = start_record(pkt);
      const std::uint64_t seq = next_seq_++;
      const std::int64_t deadline = deadline_of(rec);
      by_deadline_.emplace(Order{deadline, seq}, key);
      by_etime_.emplace(Order{rec.etime_ms, seq}, key);
      active_.emplace(key, Active{std::move(rec), seq, deadline});
      return;
    }

    Active& flow = it->second;
    FlowRecord& rec = flow.rec;
    const std::int64_t old_etime = rec.etime_ms;
    ++rec.packets;
    rec.bytes += pkt.ip_len;
    if (pkt.proto == ipproto::kTcp) {
      rec.flags |= pkt.tcp_flags;
      rec.session_flags |= pkt.tcp_flags;
    }
    rec.stime_ms = std::min(rec.stime_ms, pkt.ts_ms);
    rec.etime_ms = std::max(rec.etime_ms, pkt.ts_ms);

    if (rec.etime_ms != old_etime) {
      by_etime_.erase(Order{old_etime, flow.seq});
      by_etime_.emplace(Order{rec.etime_ms, flow.seq}, key);
    }
    const std::int64_t deadline = deadline_of(rec);
    if (deadline != flow.deadline) {
      by_deadline_.erase(Order{flow.deadline, flow.seq});
      by_deadline_.emplace(Order{deadline, flow.seq}, key);
      flow.deadline = deadline;
    }
  }

  // Packets reach process() in timestamp order, so a flow whose deadline lies
  // before the latest processed timestamp can never be extended again.
  void expire_idle() {
    while (!by_deadline_.empty() && by_deadline_.begin()->first.first < processed_) {
      close(active_.find(by_deadline_.begin()->second));
    }
  }

  void close(typename ActiveMap::iterator it) {
    Active& flow = it->second;
    by_deadline_.erase(Order{flow.deadline, flow.seq});
    by_etime_.erase(Order{flow.rec.etime_ms, flow.seq});
    closed_.emplace(Order{flow.rec.etime_ms, flow.seq}, std::move(flow.rec));
    active_.erase(it);
  }

  // Closed flows are released once no active flow, nor a flow started by a
  // later packet, can sort ahead of them.
  void emit_ready() {
    Order bound{processed_, next_seq_};
    if (!by_etime_.empty()) bound = std::min(bound, by_etime_.begin()->first);
    while (!closed_.empty() && closed_.begin()->first < bound) {
      auto node = closed_.extract(closed_.begin());
      deliver(std::move(node.mapped()));
    }
  }

  void deliver(FlowRecord&& rec) {
    ++stats_.flows;
    sink_(std::move(rec));
  }

  AggregationConfig config_;
  Sink sink_;
  ActiveMap active_;
  std::map<Order, FlowKey> by_deadline_;
  std::map<Order, FlowKey> by_etime_;
  std::map<Order, FlowRecord> closed_;
  std::map<Order, PacketRecord> pending_;  // (timestamp, arrival) -> packet
  std::uint64_t arrivals_ = 0;
  std::uint64_t next_seq_ = 0;
  std::int64_t clock_ = std::numeric_limits<std::int64_t>::min();      // latest arrival
  std::int64_t processed_ = std::numeric_limits<std::int64_t>::min();  // latest aggregated
  FlowBuilderStats stats_;
};

// Batch form: aggregates a packet sequence and returns the emitted flows.
inline std::vector<FlowRecord> build_flows(std::span<const PacketRecord> packets,
                                           const AggregationConfig& config = {}) {
  std::vector<FlowRecord> out;
  FlowBuilder builder(config, [&out](FlowRecord&& r) { out.push_back(std::move(r)); });
  for (const auto& p : packets) builder.add(p);
  builder.finish();
  return out;
}

}  // namespace flowlabel

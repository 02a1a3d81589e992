#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "flowlabel/flow_builder.hpp"
#include "flowlabel/mawilab_log.hpp"

namespace flowlabel {

enum class FlowClass : std::uint8_t { Normal, Anomaly, Unsure };

constexpr std::string_view to_string(FlowClass c) {
  switch (c) {
    case FlowClass::Normal: return "normal";
    case FlowClass::Anomaly: return "anomaly";
    case FlowClass::Unsure: return "unsure";
  }
  return "normal";
}

inline std::optional<FlowClass> parse_flow_class(std::string_view text) {
  if (text == "normal") return FlowClass::Normal;
  if (text == "anomaly") return FlowClass::Anomaly;
  if (text == "unsure") return FlowClass::Unsure;
  return std::nullopt;
}

struct LabeledFlow {
  FlowRecord flow;
  FlowClass cls = FlowClass::Normal;
  std::string taxonomy;
  MawiLabel label = MawiLabel::Normal;
  std::int64_t heuristic = 0;
  double distance = 0.0;
  std::uint64_t nb_detectors = 0;

  friend bool operator==(const LabeledFlow&, const LabeledFlow&) = default;
};

// No match -> normal; single-attribute match -> unsure; otherwise anomaly.
inline FlowClass assign_class(const IdsLogEntry* winner) {
  if (winner == nullptr) return FlowClass::Normal;
  return specificity(*winner).attributes == 1 ? FlowClass::Unsure : FlowClass::Anomaly;
}

inline LabeledFlow make_labeled(FlowRecord flow, const IdsLogEntry* winner) {
  LabeledFlow out;
  out.flow = std::move(flow);
  out.cls = assign_class(winner);
  if (winner != nullptr) {
    out.taxonomy = winner->taxonomy;
    out.label = winner->label;
    out.heuristic = winner->heuristic;
    out.distance = winner->distance;
    out.nb_detectors = winner->nb_detectors;
  }
  return out;
}

// True when every non-null attribute of `e` equals the flow's. Protocol is
// not part of the match.
inline bool entry_matches(const IdsLogEntry& e, const FlowKey& k) {
  return (!e.sip || *e.sip == k.src_ip) && (!e.dip || *e.dip == k.dst_ip) &&
         (!e.sport || *e.sport == k.src_port) && (!e.dport || *e.dport == k.dst_port);
}

// Exact-match lookup over the fifteen non-empty subsets of {dip, sip, dport,
// sport}. Each subset map holds, per attribute-value combination, the
// highest-ranked entry declaring exactly that subset. Immutable once built.
class MatchIndex {
 public:
  MatchIndex() = default;

  explicit MatchIndex(std::vector<IdsLogEntry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const IdsLogEntry& e = entries_[i];
      const std::uint8_t pattern = e.pattern();
      if (pattern == 0) continue;
      auto [it, inserted] = maps_[pattern].try_emplace(project(e), i);
      if (!inserted && outranks(e, entries_[it->second])) it->second = i;
    }
  }

  // Highest-ranked matching entry, or nullptr.
  const IdsLogEntry* match(const FlowKey& key) const {
    for (std::uint8_t pattern : kSearchOrder) {
      const auto& map = maps_[pattern];
      if (map.empty()) continue;
      auto it = map.find(project(key, pattern));
      if (it != map.end()) return &entries_[it->second];
    }
    return nullptr;
  }

  const std::vector<IdsLogEntry>& entries() const noexcept { return entries_; }
  std::size_t slots(std::uint8_t pattern) const { return maps_.at(pattern).size(); }
  // Entry index occupying the slot for `e`'s subset and values, if any.
  std::optional<std::size_t> slot_owner(const IdsLogEntry& e) const {
    const auto& map = maps_.at(e.pattern());
    auto it = map.find(project(e));
    if (it == map.end()) return std::nullopt;
    return it->second;
  }

 private:
  struct TupleKey {
    IpAddress sip;
    IpAddress dip;
    std::uint16_t sport = 0;
    std::uint16_t dport = 0;
    friend bool operator==(const TupleKey&, const TupleKey&) = default;
  };
  struct TupleKeyHash {
    std::size_t operator()(const TupleKey& k) const noexcept {
      std::size_t h = k.sip.hash();
      h = hash_combine(h, k.dip.hash());
      return hash_combine(h, (std::size_t{k.sport} << 16) | k.dport);
    }
  };

  // Non-empty patterns, most specific first: descending (L, pattern).
  static constexpr std::array<std::uint8_t, 15> kSearchOrder = [] {
    std::array<std::uint8_t, 15> order{};
    for (std::uint8_t p = 1; p < 16; ++p) order[p - 1] = p;
    std::sort(order.begin(), order.end(), [](std::uint8_t a, std::uint8_t b) {
      const int la = std::popcount(a), lb = std::popcount(b);
      return la != lb ? la > lb : a > b;
    });
    return order;
  }();

  static TupleKey project(const IdsLogEntry& e) {
    TupleKey k;
    if (e.sip) k.sip = *e.sip;
    if (e.dip) k.dip = *e.dip;
    if (e.sport) k.sport = *e.sport;
    if (e.dport) k.dport = *e.dport;
    return k;
  }
  static TupleKey project(const FlowKey& f, std::uint8_t pattern) {
    TupleKey k;
    if (pattern & attr::kSip) k.sip = f.src_ip;
    if (pattern & attr::kDip) k.dip = f.dst_ip;
    if (pattern & attr::kSport) k.sport = f.src_port;
    if (pattern & attr::kDport) k.dport = f.dst_port;
    return k;
  }

  std::vector<IdsLogEntry> entries_;
  std::array<std::unordered_map<TupleKey, std::size_t, TupleKeyHash>, 16> maps_;
};

inline MatchIndex build_index(std::vector<IdsLogEntry> entries) {
  return MatchIndex(std::move(entries));
}

inline const IdsLogEntry* match_flow(const MatchIndex& index, const FlowKey& key) {
  return index.match(key);
}

struct LabelStats {
  std::uint64_t total = 0;
  std::array<std::uint64_t, 3> per_class{};         // indexed by FlowClass
  std::array<std::uint64_t, 5> per_specificity{};   // winner's L; 0 = no match
  std::map<std::string, std::uint64_t> per_taxonomy;  // matched flows only

  void add(const LabeledFlow& f, int winner_attributes) {
    ++total;
    ++per_class[static_cast<std::size_t>(f.cls)];
    ++per_specificity[static_cast<std::size_t>(winner_attributes)];
    if (f.cls != FlowClass::Normal) ++per_taxonomy[f.taxonomy];
  }

  void remove(const LabeledFlow& f, int winner_attributes) {
    --total;
    --per_class[static_cast<std::size_t>(f.cls)];
    --per_specificity[static_cast<std::size_t>(winner_attributes)];
    if (f.cls != FlowClass::Normal) {
      auto it = per_taxonomy.find(f.taxonomy);
      if (it != per_taxonomy.end() && --it->second == 0) per_taxonomy.erase(it);
    }
  }

  void merge(const LabelStats& o) {
    total += o.total;
    for (std::size_t i = 0; i < per_class.size(); ++i) per_class[i] += o.per_class[i];
    for (std::size_t i = 0; i < per_specificity.size(); ++i)
      per_specificity[i] += o.per_specificity[i];
    for (const auto& [k, v] : o.per_taxonomy) per_taxonomy[k] += v;
  }

  std::uint64_t count(FlowClass c) const { return per_class[static_cast<std::size_t>(c)]; }
};

// Labels `flows` in input order. Work is split into contiguous chunks across
// up to `threads` workers; output is identical for any thread count.
inline std::vector<LabeledFlow> label_flows(std::span<const FlowRecord> flows,
                                            const MatchIndex& index, unsigned threads = 1,
                                            LabelStats* stats = nullptr) {
  std::vector<LabeledFlow> out(flows.size());
  const std::size_t workers =
      std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, flows.size() / 4096));
  std::vector<LabelStats> partial(workers);

  auto run = [&](std::size_t w) {
    const std::size_t begin = flows.size() * w / workers;
    const std::size_t end = flows.size() * (w + 1) / workers;
    for (std::size_t i = begin; i < end; ++i) {
      const IdsLogEntry* winner = index.match(flows[i].key);
      out[i] = make_labeled(flows[i], winner);
      partial[w].add(out[i], winner ? specificity(*winner).attributes : 0);
    }
  };

  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run, w);
    run(0);
  }
  if (stats != nullptr) {
    for (const auto& p : partial) stats->merge(p);
  }
  return out;
}

}  // namespace flowlabel

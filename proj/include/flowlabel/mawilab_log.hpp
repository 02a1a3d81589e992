#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowlabel/csv.hpp"
#include "flowlabel/error.hpp"
#include "flowlabel/ip_address.hpp"

namespace flowlabel {

// MAWILab confidence tiers, plus `Normal` for flows nothing matched.
enum class MawiLabel : std::uint8_t { Normal, Anomalous, Suspicious, Notice };

constexpr std::string_view to_string(MawiLabel l) {
  switch (l) {
    case MawiLabel::Normal: return "normal";
    case MawiLabel::Anomalous: return "anomalous";
    case MawiLabel::Suspicious: return "suspicious";
    case MawiLabel::Notice: return "notice";
  }
  return "normal";
}

inline std::optional<MawiLabel> parse_mawi_label(std::string_view text) {
  const std::string t = csv::to_lower(csv::trim(text));
  if (t == "anomalous") return MawiLabel::Anomalous;
  if (t == "suspicious") return MawiLabel::Suspicious;
  if (t == "notice") return MawiLabel::Notice;
  if (t == "normal") return MawiLabel::Normal;
  return std::nullopt;
}

class LabelSet {
 public:
  constexpr LabelSet() = default;
  constexpr LabelSet(std::initializer_list<MawiLabel> labels) {
    for (auto l : labels) insert(l);
  }
  static constexpr LabelSet defaults() { return {MawiLabel::Anomalous, MawiLabel::Suspicious}; }

  constexpr void insert(MawiLabel l) { bits_ |= bit(l); }
  constexpr bool contains(MawiLabel l) const { return (bits_ & bit(l)) != 0; }

 private:
  static constexpr std::uint8_t bit(MawiLabel l) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(l));
  }
  std::uint8_t bits_ = 0;
};

// Presence bits of the four matching attributes. Their numeric order is the
// precedence among entries of equal L: dip > sip > dport > sport.
namespace attr {
constexpr std::uint8_t kDip = 0b1000;
constexpr std::uint8_t kSip = 0b0100;
constexpr std::uint8_t kDport = 0b0010;
constexpr std::uint8_t kSport = 0b0001;
}  // namespace attr

struct Specificity {
  int attributes = 0;         // L: number of non-null attributes, 1..4
  std::uint8_t pattern = 0;   // attr:: presence bits

  friend auto operator<=>(const Specificity&, const Specificity&) = default;
};

struct IdsLogEntry {
  std::optional<IpAddress> sip;
  std::optional<IpAddress> dip;
  std::optional<std::uint16_t> sport;
  std::optional<std::uint16_t> dport;
  std::string taxonomy;
  std::int64_t heuristic = 0;
  double distance = 0.0;
  std::uint64_t nb_detectors = 0;
  MawiLabel label = MawiLabel::Anomalous;
  std::size_t file_order = 0;

  std::uint8_t pattern() const noexcept {
    std::uint8_t p = 0;
    if (dip) p |= attr::kDip;
    if (sip) p |= attr::kSip;
    if (dport) p |= attr::kDport;
    if (sport) p |= attr::kSport;
    return p;
  }

  friend bool operator==(const IdsLogEntry&, const IdsLogEntry&) = default;
};

inline Specificity specificity(const IdsLogEntry& e) {
  const std::uint8_t p = e.pattern();
  return {std::popcount(p), p};
}

// Strict total order used to pick a flow's winning entry: higher L, then
// higher presence pattern, then earlier position in the log.
inline bool outranks(const IdsLogEntry& a, const IdsLogEntry& b) {
  const auto sa = specificity(a);
  const auto sb = specificity(b);
  if (sa != sb) return sa > sb;
  return a.file_order < b.file_order;
}

struct ParsedLog {
  std::vector<IdsLogEntry> entries;
  std::size_t skipped_by_label = 0;
};

namespace detail {

enum LogColumn { kColSip, kColDip, kColSport, kColDport, kColTaxonomy, kColHeuristic,
                 kColDistance, kColNbDetectors, kColLabel, kLogColumnCount };

// Header names are matched case-insensitively; MAWILab's published CSVs use
// srcIP/dstIP/srcPort/dstPort.
inline std::optional<LogColumn> classify_log_header(std::string_view name) {
  const std::string n = csv::to_lower(csv::trim(name));
  if (n == "sip" || n == "srcip") return kColSip;
  if (n == "dip" || n == "dstip") return kColDip;
  if (n == "sport" || n == "srcport") return kColSport;
  if (n == "dport" || n == "dstport") return kColDport;
  if (n == "taxonomy") return kColTaxonomy;
  if (n == "heuristic") return kColHeuristic;
  if (n == "distance") return kColDistance;
  if (n == "nbdetectors") return kColNbDetectors;
  if (n == "label") return kColLabel;
  return std::nullopt;
}

constexpr std::array<std::string_view, kLogColumnCount> kLogColumnNames = {
    "sip", "dip", "sport", "dport", "taxonomy", "heuristic", "distance", "nbDetectors", "label"};

inline bool is_null_cell(std::string_view v) {
  v = csv::trim(v);
  return v.empty() || csv::to_lower(v) == "null";
}

}  // namespace detail

// Loads the entries whose label is in `accepted`. Null attributes are empty
// cells or the literal "null".
inline ParsedLog parse_log(const std::filesystem::path& path,
                           LabelSet accepted = LabelSet::defaults()) {
  using namespace detail;
  csv::Reader reader(path);
  csv::Record rec;
  if (!reader.next(rec)) {
    throw Error(ErrorKind::MissingColumn, "'" + path.string() + "': empty log, no header row");
  }

  std::array<std::size_t, kLogColumnCount> index;
  index.fill(SIZE_MAX);
  for (std::size_t i = 0; i < rec.fields.size(); ++i) {
    if (auto col = classify_log_header(rec.fields[i]); col && index[*col] == SIZE_MAX) {
      index[*col] = i;
    }
  }
  for (std::size_t c = 0; c < kLogColumnCount; ++c) {
    if (index[c] == SIZE_MAX) {
      throw Error(ErrorKind::MissingColumn, "'" + path.string() + "': missing column '" +
                                                std::string(kLogColumnNames[c]) + "'");
    }
  }

  ParsedLog out;
  std::size_t row = 0;
  while (reader.next(rec)) {
    ++row;
    auto cell = [&](LogColumn c) -> std::string_view {
      if (index[c] >= rec.fields.size()) {
        throw RowError(ErrorKind::MalformedRow, row,
                       "missing value for '" + std::string(kLogColumnNames[c]) + "'");
      }
      return csv::trim(rec.fields[index[c]]);
    };
    auto bad = [&](LogColumn c, std::string_view v) {
      return RowError(ErrorKind::MalformedRow, row,
                      "cannot parse " + std::string(kLogColumnNames[c]) + " '" +
                          std::string(v) + "'");
    };

    const auto label = parse_mawi_label(cell(kColLabel));
    if (!label || *label == MawiLabel::Normal) throw bad(kColLabel, cell(kColLabel));
    if (!accepted.contains(*label)) {
      ++out.skipped_by_label;
      continue;
    }

    IdsLogEntry e;
    e.label = *label;
    for (LogColumn c : {kColSip, kColDip}) {
      const auto v = cell(c);
      if (is_null_cell(v)) continue;
      auto ip = IpAddress::parse(v);
      if (!ip) throw bad(c, v);
      (c == kColSip ? e.sip : e.dip) = *ip;
    }
    for (LogColumn c : {kColSport, kColDport}) {
      const auto v = cell(c);
      if (is_null_cell(v)) continue;
      auto port = csv::parse_int<std::uint16_t>(v);
      if (!port) throw bad(c, v);
      (c == kColSport ? e.sport : e.dport) = *port;
    }
    if (e.pattern() == 0) {
      throw RowError(ErrorKind::AllNullTuple, row, "sip, dip, sport and dport are all null");
    }

    e.taxonomy = std::string(cell(kColTaxonomy));
    auto heuristic = csv::parse_int<std::int64_t>(cell(kColHeuristic));
    if (!heuristic) throw bad(kColHeuristic, cell(kColHeuristic));
    e.heuristic = *heuristic;
    auto distance = csv::parse_double(cell(kColDistance));
    if (!distance) throw bad(kColDistance, cell(kColDistance));
    e.distance = *distance;
    auto nb = csv::parse_int<std::uint64_t>(cell(kColNbDetectors));
    if (!nb) throw bad(kColNbDetectors, cell(kColNbDetectors));
    e.nb_detectors = *nb;

    e.file_order = out.entries.size();
    out.entries.push_back(std::move(e));
  }
  return out;
}

}  // namespace flowlabel

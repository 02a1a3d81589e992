#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "flowlabel/mawilab_log.hpp"
#include "support.hpp"

using namespace flowlabel;
using testsupport::TempDir;
using testsupport::write_file;

namespace {

const std::string kHeader = "sip,dip,sport,dport,taxonomy,heuristic,distance,nbDetectors,label\n";

ParsedLog parse_text(const std::string& body, LabelSet accepted = LabelSet::defaults()) {
  TempDir dir;
  write_file(dir / "log.csv", body);
  return parse_log(dir / "log.csv", accepted);
}

template <typename F>
Error capture_error(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no exception";
  return Error(ErrorKind::Io, "none");
}

IdsLogEntry entry(std::uint8_t pattern, std::size_t order) {
  IdsLogEntry e;
  if (pattern & attr::kSip) e.sip = IpAddress::v4(1);
  if (pattern & attr::kDip) e.dip = IpAddress::v4(2);
  if (pattern & attr::kSport) e.sport = 3;
  if (pattern & attr::kDport) e.dport = 4;
  e.file_order = order;
  return e;
}

}  // namespace

TEST(MawiLog, FullySpecifiedRow) {
  const auto log = parse_text(kHeader +
                              "203.0.113.5,198.51.100.7,443,51000,ptmpla,20,0.52,3,anomalous\n");
  ASSERT_EQ(log.entries.size(), 1u);
  const auto& e = log.entries[0];
  EXPECT_EQ(e.sip, IpAddress::parse("203.0.113.5"));
  EXPECT_EQ(e.dip, IpAddress::parse("198.51.100.7"));
  EXPECT_EQ(e.sport, std::optional<std::uint16_t>(443));
  EXPECT_EQ(e.dport, std::optional<std::uint16_t>(51000));
  EXPECT_EQ(e.taxonomy, "ptmpla");
  EXPECT_EQ(e.heuristic, 20);
  EXPECT_DOUBLE_EQ(e.distance, 0.52);
  EXPECT_EQ(e.nb_detectors, 3u);
  EXPECT_EQ(e.label, MawiLabel::Anomalous);
  EXPECT_EQ(specificity(e).attributes, 4);
  EXPECT_EQ(e.pattern(), 0b1111);
}

TEST(MawiLog, SinglePortRowHasOneAttribute) {
  const auto log = parse_text(kHeader + ",,443,,unk,1,0.1,1,suspicious\n");
  ASSERT_EQ(log.entries.size(), 1u);
  EXPECT_EQ(specificity(log.entries[0]).attributes, 1);
  EXPECT_EQ(log.entries[0].pattern(), attr::kSport);
  EXPECT_FALSE(log.entries[0].sip.has_value());
}

TEST(MawiLog, NoticeRowsSkippedByDefault) {
  const std::string body = kHeader + "10.0.0.1,,,,unk,1,0.1,1,notice\n" +
                           "10.0.0.2,,,,unk,1,0.1,1,anomalous\n";
  const auto log = parse_text(body);
  ASSERT_EQ(log.entries.size(), 1u);
  EXPECT_EQ(log.skipped_by_label, 1u);
  EXPECT_EQ(log.entries[0].sip, IpAddress::parse("10.0.0.2"));
  EXPECT_EQ(log.entries[0].file_order, 0u);

  const auto with_notice =
      parse_text(body, {MawiLabel::Anomalous, MawiLabel::Suspicious, MawiLabel::Notice});
  EXPECT_EQ(with_notice.entries.size(), 2u);
  EXPECT_EQ(with_notice.entries[1].file_order, 1u);
}

TEST(MawiLog, PatternBitsFollowPrecedence) {
  const auto log = parse_text(kHeader + "10.0.0.1,10.0.0.2,,,a,1,0,1,anomalous\n" +
                              ",10.0.0.2,,80,a,1,0,1,anomalous\n" +
                              "10.0.0.1,10.0.0.2,1,80,a,1,0,1,anomalous\n");
  ASSERT_EQ(log.entries.size(), 3u);
  EXPECT_EQ(log.entries[0].pattern(), 0b1100);
  EXPECT_EQ(log.entries[1].pattern(), 0b1010);
  EXPECT_EQ(log.entries[2].pattern(), 0b1111);
}

TEST(MawiLog, NullLiteralAndAliasedHeader) {
  const auto log = parse_text(
      "srcIP,dstIP,srcPort,dstPort,taxonomy,heuristic,distance,nbDetectors,label\n"
      "null,2001:db8::1,NULL,53,dns,3,1.5,2,Suspicious\n");
  ASSERT_EQ(log.entries.size(), 1u);
  EXPECT_FALSE(log.entries[0].sip);
  EXPECT_FALSE(log.entries[0].sport);
  EXPECT_EQ(log.entries[0].dip, IpAddress::parse("2001:db8::1"));
  EXPECT_EQ(log.entries[0].pattern(), 0b1010);
  EXPECT_EQ(log.entries[0].label, MawiLabel::Suspicious);
}

TEST(MawiLog, ColumnOrderIsFree) {
  const auto log = parse_text("label,nbDetectors,distance,heuristic,taxonomy,dport,sport,dip,sip\n"
                              "anomalous,4,2.5,7,alpha,80,,,10.1.1.1\n");
  ASSERT_EQ(log.entries.size(), 1u);
  EXPECT_EQ(log.entries[0].sip, IpAddress::parse("10.1.1.1"));
  EXPECT_EQ(log.entries[0].dport, std::optional<std::uint16_t>(80));
  EXPECT_EQ(log.entries[0].nb_detectors, 4u);
}

TEST(MawiLog, MissingColumnIsReported) {
  const auto err = capture_error([] {
    parse_text("sip,dip,sport,dport,taxonomy,heuristic,distance,label\n");
  });
  EXPECT_EQ(err.kind(), ErrorKind::MissingColumn);
  EXPECT_NE(std::string(err.what()).find("nbDetectors"), std::string::npos);
}

TEST(MawiLog, MalformedRowCarriesRowNumber) {
  try {
    parse_text(kHeader + "10.0.0.1,,,,a,1,0,1,anomalous\n" + "10.0.0.1,,99999,,a,1,0,1,anomalous\n");
    FAIL() << "no exception";
  } catch (const RowError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MalformedRow);
    EXPECT_EQ(e.row(), 2u);
  }
  EXPECT_EQ(capture_error([] { parse_text(kHeader + "not-an-ip,,,,a,1,0,1,anomalous\n"); }).kind(),
            ErrorKind::MalformedRow);
  EXPECT_EQ(capture_error([] { parse_text(kHeader + "10.0.0.1,,,,a,x,0,1,anomalous\n"); }).kind(),
            ErrorKind::MalformedRow);
  EXPECT_EQ(capture_error([] { parse_text(kHeader + "10.0.0.1,,,,a,1,0,1,bogus\n"); }).kind(),
            ErrorKind::MalformedRow);
}

TEST(MawiLog, AllNullTupleRejected) {
  try {
    parse_text(kHeader + ",,,,a,1,0,1,anomalous\n");
    FAIL() << "no exception";
  } catch (const RowError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AllNullTuple);
    EXPECT_EQ(e.row(), 1u);
  }
}

TEST(MawiLog, ParsingIsIdempotent) {
  const std::string body = kHeader + "10.0.0.1,10.0.0.2,1,2,a,1,0.25,1,anomalous\n" +
                           ",,,443,b,2,0.5,2,suspicious\n";
  EXPECT_EQ(parse_text(body).entries, parse_text(body).entries);
}

TEST(MawiLog, EmptyFileIsMissingHeader) {
  EXPECT_EQ(capture_error([] { parse_text(""); }).kind(), ErrorKind::MissingColumn);
}

TEST(MawiLog, HeaderOnlyLogIsEmpty) {
  EXPECT_TRUE(parse_text(kHeader).entries.empty());
}

TEST(MawiLogProperty, RankingIsStrictTotalOrder) {
  std::mt19937_64 rng(11);
  std::vector<IdsLogEntry> entries;
  for (std::size_t i = 0; i < 300; ++i) {
    entries.push_back(entry(static_cast<std::uint8_t>(1 + rng() % 15), i));
  }
  for (const auto& a : entries) {
    EXPECT_FALSE(outranks(a, a));
    for (const auto& b : entries) {
      if (&a == &b) continue;
      // Exactly one direction holds (totality + asymmetry).
      EXPECT_NE(outranks(a, b), outranks(b, a));
    }
  }
  // Transitivity via sort consistency: a sorted sequence is pairwise ordered.
  std::sort(entries.begin(), entries.end(), outranks);
  for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
    for (std::size_t j = i + 1; j < entries.size(); j += 17) {
      EXPECT_TRUE(outranks(entries[i], entries[j]));
    }
  }
}

TEST(MawiLog, RankingPrefersMoreAttributesThenPatternThenEarlier) {
  EXPECT_TRUE(outranks(entry(0b0011, 5), entry(0b1000, 0)));   // L=2 beats L=1
  EXPECT_TRUE(outranks(entry(0b1000, 5), entry(0b0100, 0)));   // dip beats sip
  EXPECT_TRUE(outranks(entry(0b0100, 5), entry(0b0010, 0)));   // sip beats dport
  EXPECT_TRUE(outranks(entry(0b0010, 5), entry(0b0001, 0)));   // dport beats sport
  EXPECT_TRUE(outranks(entry(0b1100, 5), entry(0b1010, 0)));
  EXPECT_TRUE(outranks(entry(0b1000, 1), entry(0b1000, 2)));   // earlier wins ties
}

#pragma once

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowlabel/error.hpp"
#include "flowlabel/flow_builder.hpp"
#include "flowlabel/flow_io.hpp"
#include "flowlabel/labeler.hpp"
#include "flowlabel/mawilab_log.hpp"
#include "flowlabel/pcap_reader.hpp"

namespace flowlabel {

struct PipelineConfig {
  std::vector<std::filesystem::path> pcaps;
  std::filesystem::path log;
  std::filesystem::path output;  // file for extract/label, directory for split/pipeline
  AggregationConfig aggregation;
  TimeUnit time_unit = TimeUnit::Milliseconds;
  LabelSet accepted_labels = LabelSet::defaults();
  bool drop_unsure = false;
  std::optional<double> window_s;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::filesystem::path> stats_path;
  std::ostream* progress = nullptr;  // null silences progress and summaries
  std::size_t batch_size = 1 << 16;
};

inline void require_exists(const std::filesystem::path& p) {
  std::error_code ec;
  if (!std::filesystem::exists(p, ec)) {
    throw Error(ErrorKind::Io, "input '" + p.string() + "' does not exist");
  }
}

struct ExtractSummary {
  std::uint64_t records = 0;
  std::uint64_t packets = 0;
  std::uint64_t skipped = 0;
  std::uint64_t flows = 0;
  std::uint64_t late_packets = 0;
};

struct LabelSummary {
  LabelStats stats;  // over emitted rows
  std::uint64_t rows = 0;
  std::uint64_t dropped_unsure = 0;
  std::size_t log_entries = 0;
  std::size_t log_skipped = 0;
};

namespace detail {

inline std::string strip_suffixes(std::filesystem::path name,
                                  std::initializer_list<std::string_view> exts) {
  name = name.filename();
  for (auto ext : exts) {
    if (name.extension() == ext) name = name.stem();
  }
  return name.string();
}

class StatsFile {
 public:
  explicit StatsFile(const std::optional<std::filesystem::path>& path) {
    if (path) out_.emplace(*path);
  }
  void emit(const nlohmann::json& j) {
    if (out_) out_->write(j.dump() + "\n");
  }
  void close() {
    if (out_) out_->close();
  }

 private:
  std::optional<OutputFile> out_;
};

inline void emit_extract_stats(StatsFile& stats, const ExtractSummary& s) {
  stats.emit({{"type", "extract"},
              {"records", s.records},
              {"packets", s.packets},
              {"skipped", s.skipped},
              {"flows", s.flows},
              {"late_packets", s.late_packets}});
}

inline void emit_label_stats(StatsFile& stats, const LabelSummary& s) {
  stats.emit({{"type", "label"},
              {"rows", s.rows},
              {"dropped_unsure", s.dropped_unsure},
              {"log_entries", s.log_entries},
              {"log_skipped", s.log_skipped}});
  for (auto c : {FlowClass::Normal, FlowClass::Anomaly, FlowClass::Unsure}) {
    stats.emit({{"type", "class"}, {"class", to_string(c)}, {"count", s.stats.count(c)}});
  }
  for (std::size_t l = 0; l < s.stats.per_specificity.size(); ++l) {
    stats.emit({{"type", "specificity"}, {"L", l}, {"count", s.stats.per_specificity[l]}});
  }
  for (const auto& [taxonomy, count] : s.stats.per_taxonomy) {
    stats.emit({{"type", "taxonomy"}, {"taxonomy", taxonomy}, {"count", count}});
  }
}

inline void print_label_summary(std::ostream& os, const LabelSummary& s) {
  os << "labeled " << s.rows << " flows: normal=" << s.stats.count(FlowClass::Normal)
     << " anomaly=" << s.stats.count(FlowClass::Anomaly)
     << " unsure=" << s.stats.count(FlowClass::Unsure);
  if (s.dropped_unsure) os << " (dropped unsure=" << s.dropped_unsure << ")";
  os << "; log entries used=" << s.log_entries << " skipped=" << s.log_skipped << "\n";
  for (const auto& [taxonomy, count] : s.stats.per_taxonomy) {
    os << "  taxonomy " << (taxonomy.empty() ? "<empty>" : taxonomy) << ": " << count << "\n";
  }
}

inline ExtractSummary extract_to(const PipelineConfig& cfg, const std::filesystem::path& out,
                                 TimeUnit unit) {
  for (const auto& p : cfg.pcaps) require_exists(p);
  ExtractSummary summary;
  FlowCsvWriter writer(out, Schema::Traffic, unit);
  for (const auto& path : cfg.pcaps) {
    PcapReader reader(path);
    FlowBuilder builder(cfg.aggregation, [&writer](FlowRecord&& f) { writer.write(f); });
    PacketRecord pkt;
    while (true) {
      const auto status = reader.next(pkt);
      if (status == PcapReader::Next::End) break;
      if (status == PcapReader::Next::Packet) builder.add(pkt);
      if (cfg.progress && reader.records() % 1'000'000 == 0) {
        *cfg.progress << path.filename().string() << ": " << reader.records() / 1'000'000
                      << "M packets, " << builder.active_flows() << " active flows\n";
      }
    }
    builder.finish();
    summary.records += reader.records();
    summary.skipped += reader.skipped();
    summary.packets += builder.stats().packets;
    summary.flows += builder.stats().flows;
    summary.late_packets += builder.stats().late_packets;
  }
  writer.close();
  return summary;
}

}  // namespace detail

// pcap(s) -> unlabeled flow CSV (traffic columns only).
inline ExtractSummary run_extract(const PipelineConfig& cfg) {
  detail::StatsFile stats(cfg.stats_path);
  const auto summary = detail::extract_to(cfg, cfg.output, cfg.time_unit);
  if (cfg.progress) {
    *cfg.progress << "extracted " << summary.flows << " flows from " << summary.packets
                  << " packets (" << summary.skipped << " records skipped, "
                  << summary.late_packets << " late packets)\n";
  }
  detail::emit_extract_stats(stats, summary);
  stats.close();
  return summary;
}

namespace detail {

inline LabelSummary label_to(const PipelineConfig& cfg, const std::filesystem::path& flows_csv,
                             StatsFile& stats) {
  require_exists(flows_csv);
  require_exists(cfg.log);
  ParsedLog log = parse_log(cfg.log, cfg.accepted_labels);
  LabelSummary summary;
  summary.log_entries = log.entries.size();
  summary.log_skipped = log.skipped_by_label;
  const MatchIndex index = build_index(std::move(log.entries));

  FlowCsvReader reader(flows_csv);
  FlowCsvWriter writer(cfg.output, Schema::Labeled, cfg.time_unit);
  std::vector<FlowRecord> batch;
  batch.reserve(cfg.batch_size);
  auto flush = [&] {
    LabelStats batch_stats;
    for (const auto& f : label_flows(batch, index, cfg.threads, &batch_stats)) {
      if (cfg.drop_unsure && f.cls == FlowClass::Unsure) {
        ++summary.dropped_unsure;
        batch_stats.remove(f, 1);
        continue;
      }
      writer.write(f);
    }
    summary.stats.merge(batch_stats);
    batch.clear();
  };
  LabeledFlow in;
  while (reader.next(in)) {
    batch.push_back(std::move(in.flow));
    if (batch.size() == cfg.batch_size) flush();
  }
  flush();
  writer.close();
  summary.rows = writer.rows();
  if (cfg.progress) print_label_summary(*cfg.progress, summary);
  emit_label_stats(stats, summary);
  return summary;
}

}  // namespace detail

// flow CSV + MAWILab log -> labeled CSV.
inline LabelSummary run_label(const PipelineConfig& cfg, const std::filesystem::path& flows_csv) {
  detail::StatsFile stats(cfg.stats_path);
  auto summary = detail::label_to(cfg, flows_csv, stats);
  stats.close();
  return summary;
}

inline SplitResult run_split(const PipelineConfig& cfg, const std::filesystem::path& labeled_csv) {
  require_exists(labeled_csv);
  if (!cfg.window_s) throw Error(ErrorKind::Usage, "split requires a window length");
  auto result = split_by_window(labeled_csv, *cfg.window_s, cfg.output);
  if (cfg.progress) {
    if (result.empty_input) {
      *cfg.progress << "'" << labeled_csv.string() << "' has no rows; no window files written\n";
    } else {
      *cfg.progress << "split " << result.rows << " rows into " << result.files.size()
                    << " files of " << *cfg.window_s << " s\n";
    }
  }
  return result;
}

struct PipelineResult {
  std::filesystem::path labeled_csv;
  ExtractSummary extract;
  LabelSummary label;
  std::optional<SplitResult> split;
};

// Full two-step run: extract to an intermediate flow CSV (spilled under
// FLOWLABEL_TMPDIR, default the output directory), label it into
// "<output>/<pcap stem>_labeled.csv", and optionally split that file.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  if (cfg.pcaps.empty()) throw Error(ErrorKind::Usage, "pipeline requires at least one pcap");
  for (const auto& p : cfg.pcaps) require_exists(p);
  require_exists(cfg.log);
  if (cfg.window_s && !(*cfg.window_s > 0)) {
    throw Error(ErrorKind::Usage, "window must be a positive number of seconds");
  }

  std::error_code ec;
  std::filesystem::create_directories(cfg.output, ec);
  if (ec) {
    throw Error(ErrorKind::Io, "cannot create '" + cfg.output.string() + "': " + ec.message());
  }
  std::filesystem::path tmp_dir = cfg.output;
  if (const char* env = std::getenv("FLOWLABEL_TMPDIR"); env != nullptr && *env != '\0') {
    tmp_dir = env;
  }
  const std::string stem = detail::strip_suffixes(cfg.pcaps.front(), {".gz", ".pcap", ".cap"});

  PipelineResult result;
  result.labeled_csv = cfg.output / (stem + "_labeled.csv");
  const auto tmp = tmp_dir / (stem + ".flows." + std::to_string(::getpid()) + ".csv");
  struct Cleanup {
    std::filesystem::path path;
    ~Cleanup() {
      std::error_code ignored;
      std::filesystem::remove(path, ignored);
    }
  } cleanup{tmp};

  detail::StatsFile stats(cfg.stats_path);
  result.extract = detail::extract_to(cfg, tmp, TimeUnit::Milliseconds);
  if (cfg.progress) {
    *cfg.progress << "extracted " << result.extract.flows << " flows from "
                  << result.extract.packets << " packets (" << result.extract.skipped
                  << " records skipped)\n";
  }
  detail::emit_extract_stats(stats, result.extract);

  PipelineConfig label_cfg = cfg;
  label_cfg.output = result.labeled_csv;
  result.label = detail::label_to(label_cfg, tmp, stats);
  stats.close();

  if (cfg.window_s) {
    PipelineConfig split_cfg = cfg;
    result.split = run_split(split_cfg, result.labeled_csv);
  }
  return result;
}

}  // namespace flowlabel

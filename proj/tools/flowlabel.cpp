// flowlabel: pcap -> flow CSV -> MAWILab-labeled flow CSV -> time windows.

#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowlabel/commands.hpp"

namespace {

using flowlabel::AggregationConfig;
using flowlabel::Error;
using flowlabel::ErrorKind;
using flowlabel::PipelineConfig;

std::int64_t seconds_to_ms(double s, const char* flag) {
  if (std::isinf(s) && s > 0) return AggregationConfig::kNoTimeout;
  if (!(s >= 0)) throw Error(ErrorKind::Usage, std::string(flag) + " must be >= 0");
  return static_cast<std::int64_t>(std::llround(s * 1000.0));
}

struct Options {
  std::vector<std::string> inputs;
  std::string log;
  std::string output;
  std::string mode = "aggregate";
  double idle_s = 30;
  double active_s = 30 * 60;
  double reorder_s = 1;
  bool seconds = false;
  std::vector<std::string> labels{"anomalous", "suspicious"};
  bool include_notice = false;
  bool drop_unsure = false;
  double window_s = 0;        // pipeline: 0 means no split
  double split_window_s = 5;  // split subcommand
  unsigned threads = 0;
  std::string stats;
  bool quiet = false;
  std::vector<std::string> meta;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--stats", o.stats, "Write summary counters as JSON lines to this path");
  cmd->add_flag("-q,--quiet", o.quiet, "Suppress progress and summary output on stderr");
}

void add_aggregation(CLI::App* cmd, Options& o) {
  cmd->add_option("--mode", o.mode, "Flow aggregation mode")
      ->check(CLI::IsMember({"aggregate", "per-packet"}))
      ->capture_default_str();
  cmd->add_option("--idle-timeout", o.idle_s, "Idle timeout in seconds (inf disables)")
      ->capture_default_str();
  cmd->add_option("--active-timeout", o.active_s, "Active timeout in seconds (inf disables)")
      ->capture_default_str();
  cmd->add_option("--reorder-window", o.reorder_s,
                  "Tolerated timestamp disorder in seconds")
      ->capture_default_str();
  cmd->add_option("--meta", o.meta,
                  "Constant for a metadata column, KEY=VALUE with KEY one of "
                  "sen,in,out,nhIP,senClass,typeFlow,attribut,appli");
}

void add_labeling(CLI::App* cmd, Options& o) {
  cmd->add_option("--labels", o.labels, "MAWILab labels to use for matching")
      ->delimiter(',')
      ->check(CLI::IsMember({"anomalous", "suspicious", "notice"}))
      ->capture_default_str();
  cmd->add_flag("--include-notice", o.include_notice, "Also match entries labeled notice");
  cmd->add_flag("--drop-unsure", o.drop_unsure, "Omit flows classed unsure from the output");
  cmd->add_option("--threads", o.threads, "Labeling worker threads (default: all cores)");
}

void add_time_unit(CLI::App* cmd, Options& o) {
  cmd->add_flag("--sec", o.seconds, "Write sTime/durat/eTime in seconds instead of milliseconds");
}

PipelineConfig to_config(const Options& o) {
  PipelineConfig cfg;
  for (const auto& in : o.inputs) cfg.pcaps.emplace_back(in);
  cfg.log = o.log;
  cfg.output = o.output;
  cfg.aggregation.mode = o.mode == "per-packet" ? flowlabel::AggregationMode::PerPacket
                                                : flowlabel::AggregationMode::Aggregate;
  cfg.aggregation.idle_timeout_ms = seconds_to_ms(o.idle_s, "--idle-timeout");
  cfg.aggregation.active_timeout_ms = seconds_to_ms(o.active_s, "--active-timeout");
  cfg.aggregation.reorder_window_ms = seconds_to_ms(o.reorder_s, "--reorder-window");
  for (const auto& kv : o.meta) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Usage, "--meta expects KEY=VALUE");
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    auto& m = cfg.aggregation.metadata;
    if (key == "sen") m.sensor = value;
    else if (key == "in") m.input_if = value;
    else if (key == "out") m.output_if = value;
    else if (key == "nhIP") m.next_hop = value;
    else if (key == "senClass") m.sensor_class = value;
    else if (key == "typeFlow") m.flow_type = value;
    else if (key == "attribut") m.attributes = value;
    else if (key == "appli") m.application = value;
    else throw Error(ErrorKind::Usage, "unknown --meta key '" + key + "'");
  }
  cfg.time_unit = o.seconds ? flowlabel::TimeUnit::Seconds : flowlabel::TimeUnit::Milliseconds;
  cfg.accepted_labels = {};
  for (const auto& l : o.labels) cfg.accepted_labels.insert(*flowlabel::parse_mawi_label(l));
  if (o.include_notice) cfg.accepted_labels.insert(flowlabel::MawiLabel::Notice);
  cfg.drop_unsure = o.drop_unsure;
  if (o.window_s != 0) cfg.window_s = o.window_s;
  if (o.threads != 0) cfg.threads = o.threads;
  if (!o.stats.empty()) cfg.stats_path = o.stats;
  cfg.progress = o.quiet ? nullptr : &std::cerr;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build labeled NetFlow-style datasets from pcap traces and MAWILab logs"};
  app.require_subcommand(1);
  Options o;

  auto* extract = app.add_subcommand("extract", "Aggregate pcap packets into a flow CSV");
  extract->add_option("-i,--input", o.inputs, "Input pcap file(s), optionally gzipped")
      ->required();
  extract->add_option("-o,--output", o.output, "Output flow CSV (.gz for gzip)")->required();
  add_aggregation(extract, o);
  add_time_unit(extract, o);
  add_common(extract, o);

  auto* label = app.add_subcommand("label", "Label a flow CSV with a MAWILab log");
  label->add_option("-i,--input", o.inputs, "Flow CSV produced by extract")
      ->required()
      ->expected(1);
  label->add_option("-c,--classifier,--log", o.log, "MAWILab log CSV")->required();
  label->add_option("-o,--output", o.output, "Labeled CSV (.gz for gzip)")->required();
  add_labeling(label, o);
  add_time_unit(label, o);
  add_common(label, o);

  auto* split = app.add_subcommand("split", "Split a flow CSV into fixed time windows");
  split->add_option("-i,--input", o.inputs, "Labeled (or unlabeled) flow CSV")
      ->required()
      ->expected(1);
  split->add_option("-o,--output", o.output, "Output directory")->required();
  split->add_option("-n,--window", o.split_window_s, "Window length in seconds")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_common(split, o);

  auto* pipeline = app.add_subcommand("pipeline", "extract + label (+ split) in one run");
  pipeline->add_option("-i,--input", o.inputs, "Input pcap file(s)")->required();
  pipeline->add_option("-c,--classifier,--log", o.log, "MAWILab log CSV")->required();
  pipeline->add_option("-o,--output", o.output, "Output directory")->required();
  pipeline->add_option("-n,--window", o.window_s, "Also split the result into windows of N s")
      ->check(CLI::PositiveNumber);
  add_aggregation(pipeline, o);
  add_labeling(pipeline, o);
  add_time_unit(pipeline, o);
  add_common(pipeline, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const PipelineConfig cfg = to_config(o);
    if (*extract) {
      flowlabel::run_extract(cfg);
    } else if (*label) {
      flowlabel::run_label(cfg, o.inputs.front());
    } else if (*split) {
      PipelineConfig split_cfg = cfg;
      split_cfg.window_s = o.split_window_s;
      flowlabel::run_split(split_cfg, o.inputs.front());
    } else if (*pipeline) {
      const auto result = flowlabel::run_pipeline(cfg);
      if (cfg.progress) *cfg.progress << "wrote " << result.labeled_csv.string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "flowlabel: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return flowlabel::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "flowlabel: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

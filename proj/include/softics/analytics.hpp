#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "softics/event_log.hpp"

namespace softics::analytics {

struct RateSeries {
  std::string device;  // sender host name
  std::string ip;
  Duration window = std::chrono::seconds(1);
  std::vector<double> samples;  // packets per second, one per window
  std::uint64_t total = 0;
  double mode = 0;  // most frequent raw sample value
  double mean = 0;
  double kde_peak = 0;  // argmax of the smoothed density
};

struct DensityResult {
  std::map<std::string, RateSeries> devices;  // keyed by device name
  std::uint64_t total_packets = 0;
};

struct DensityOptions {
  Duration window = std::chrono::seconds(1);
  double bandwidth = 2.0;
  // Restrict to [from, to); defaults to the run span taken from the log.
  std::optional<SimTime> from;
  std::optional<SimTime> to;
};

DensityResult packet_rate_density(const EventLog& log, const DensityOptions& options = {});

// Gaussian kernel density of `samples` evaluated at x = 0, 1, ..., max + 4 bw.
std::vector<std::pair<double, double>> kde_curve(const std::vector<double>& samples, double bandwidth);
double raw_mode(const std::vector<double>& samples);

struct LatencyStats {
  std::size_t count = 0;
  double p50_ms = 0;
  double p95_ms = 0;
  double max_ms = 0;
  bool empty() const { return count == 0; }
  json to_json() const;
};

struct TransactionFilter {
  std::optional<std::string> client;  // client host name
  std::optional<std::string> server;  // server IP
  std::optional<SimTime> from;
  std::optional<SimTime> to;
  bool successful_only = true;
};

LatencyStats latency_stats(const EventLog& log, const TransactionFilter& filter);
// Nearest-rank percentile over raw values.
LatencyStats summarize_latencies(std::vector<double> latencies_ms);

enum class Impact { normal, halted, damaged, blinded, tampered };
std::string_view to_string(Impact i);

struct ImpactReport {
  std::vector<Impact> classes;  // normal alone, or every matching class
  std::string cia;
  std::string stride;
  std::vector<std::string> artifacts;
  std::vector<std::string> attacks;
  json to_json() const;
  bool has(Impact i) const;
};

ImpactReport impact_report(const EventLog& log);

void export_density_csv(const DensityResult& result, const std::filesystem::path& path);
json density_json(const DensityResult& result);

}  // namespace softics::analytics

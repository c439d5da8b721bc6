#include "softics/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "softics/error.hpp"

namespace softics::analytics {

namespace {

// Host name to IP, taken from the topology record the testbed writes first.
std::map<std::string, std::string> topology_ips(const EventLog& log) {
  std::map<std::string, std::string> ips;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log.category_at(i) != Category::meta) continue;
    const LogRecord r = log.record(i);
    if (!r.payload.contains("topology")) continue;
    for (const auto& h : r.payload["topology"]) ips[h.value("name", "")] = h.value("ip", "");
  }
  return ips;
}

std::map<std::string, std::string> topology_roles(const EventLog& log) {
  std::map<std::string, std::string> roles;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log.category_at(i) != Category::meta) continue;
    const LogRecord r = log.record(i);
    if (!r.payload.contains("topology")) continue;
    for (const auto& h : r.payload["topology"]) roles[h.value("ip", "")] = h.value("role", "");
  }
  return roles;
}

SimTime run_end(const EventLog& log) {
  SimTime end = log.empty() ? SimTime{0} : log.time_at(log.size() - 1);
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log.category_at(i) != Category::meta) continue;
    const LogRecord r = log.record(i);
    if (r.payload.contains("ended_us")) end = std::max(end, SimTime{r.payload["ended_us"].get<std::int64_t>()});
  }
  return end;
}

double nearest_rank(const std::vector<double>& sorted, double q) {
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

}  // namespace

std::vector<std::pair<double, double>> kde_curve(const std::vector<double>& samples, double bandwidth) {
  std::vector<std::pair<double, double>> curve;
  if (samples.empty() || !(bandwidth > 0)) return curve;
  const double hi = *std::max_element(samples.begin(), samples.end()) + 4 * bandwidth;
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth * std::sqrt(2 * std::numbers::pi));
  for (double x = 0; x <= hi; x += 1.0) {
    double d = 0;
    for (double s : samples) {
      const double u = (x - s) / bandwidth;
      d += std::exp(-0.5 * u * u);
    }
    curve.emplace_back(x, d * norm);
  }
  return curve;
}

double raw_mode(const std::vector<double>& samples) {
  if (samples.empty()) return 0;
  std::map<double, std::size_t> counts;
  for (double s : samples) ++counts[s];
  double best = counts.begin()->first;
  std::size_t best_n = 0;
  for (const auto& [v, n] : counts)
    if (n > best_n) {
      best = v;
      best_n = n;
    }
  return best;
}

DensityResult packet_rate_density(const EventLog& log, const DensityOptions& options) {
  if (options.window.count() <= 0) throw ArgumentError("density window must be > 0");
  const SimTime from = options.from.value_or(SimTime{0});
  const SimTime to = options.to.value_or(run_end(log));
  DensityResult result;
  if (to <= from) return result;
  const auto windows = static_cast<std::size_t>((to - from).count() / options.window.count());
  if (windows == 0) return result;
  const SimTime limit = from + options.window * static_cast<std::int64_t>(windows);
  const double per_second = 1e6 / static_cast<double>(options.window.count());
  const auto ips = topology_ips(log);

  std::map<std::string, std::vector<std::uint64_t>> counts;
  for (const auto& [name, ip] : ips) counts[name].assign(windows, 0);
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log.category_at(i) != Category::packet) continue;
    const SimTime t = log.time_at(i);
    if (t < from || t >= limit) continue;
    const LogRecord r = log.record(i);
    auto& c = counts[r.payload.value("sender", "")];
    if (c.empty()) c.assign(windows, 0);
    ++c[static_cast<std::size_t>((t - from).count() / options.window.count())];
    ++result.total_packets;
  }
  for (auto& [name, c] : counts) {
    RateSeries s;
    s.device = name;
    if (auto it = ips.find(name); it != ips.end()) s.ip = it->second;
    s.window = options.window;
    for (auto n : c) {
      s.samples.push_back(static_cast<double>(n) * per_second);
      s.total += n;
    }
    s.mode = raw_mode(s.samples);
    double sum = 0;
    for (double v : s.samples) sum += v;
    s.mean = sum / static_cast<double>(s.samples.size());
    double best = -1;
    for (const auto& [x, d] : kde_curve(s.samples, options.bandwidth))
      if (d > best) {
        best = d;
        s.kde_peak = x;
      }
    result.devices[name] = std::move(s);
  }
  return result;
}

json LatencyStats::to_json() const {
  return json{{"count", count}, {"p50_ms", p50_ms}, {"p95_ms", p95_ms}, {"max_ms", max_ms}};
}

LatencyStats summarize_latencies(std::vector<double> latencies_ms) {
  LatencyStats s;
  s.count = latencies_ms.size();
  if (latencies_ms.empty()) return s;
  std::sort(latencies_ms.begin(), latencies_ms.end());
  s.p50_ms = nearest_rank(latencies_ms, 0.50);
  s.p95_ms = nearest_rank(latencies_ms, 0.95);
  s.max_ms = latencies_ms.back();
  return s;
}

LatencyStats latency_stats(const EventLog& log, const TransactionFilter& f) {
  std::vector<double> values;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log.category_at(i) != Category::transaction) continue;
    const SimTime t = log.time_at(i);
    if (f.from && t < *f.from) continue;
    if (f.to && t > *f.to) continue;
    const LogRecord r = log.record(i);
    if (f.client && r.payload.value("client", "") != *f.client) continue;
    if (f.server && r.payload.value("server", "") != *f.server) continue;
    if (f.successful_only && r.payload.value("status", "") != "ok") continue;
    values.push_back(static_cast<double>(r.payload.value("latency_us", std::int64_t{0})) / 1000.0);
  }
  return summarize_latencies(std::move(values));
}

std::string_view to_string(Impact i) {
  switch (i) {
    case Impact::normal:
      return "normal";
    case Impact::halted:
      return "halted";
    case Impact::damaged:
      return "damaged";
    case Impact::blinded:
      return "blinded";
    case Impact::tampered:
      return "tampered";
  }
  return "normal";
}

bool ImpactReport::has(Impact i) const { return std::find(classes.begin(), classes.end(), i) != classes.end(); }

json ImpactReport::to_json() const {
  json c = json::array();
  for (Impact i : classes) c.push_back(to_string(i));
  return json{{"classes", c}, {"cia", cia}, {"stride", stride}, {"artifacts", artifacts}, {"attacks", attacks}};
}

namespace {

// Threat letters per operation, used when an attack does not name a catalog row.
std::pair<std::string, std::string> op_letters(const std::string& op) {
  if (op == "discover" || op == "sniff") return {"C", "I"};
  if (op == "flood") return {"A", "D"};
  if (op == "physical_attack" || op == "disconnect") return {"A", "TD"};
  if (op == "unauthorized_write") return {"IA", "TD"};
  return {"CIA", "STRIDE"};
}

std::string ordered_union(const std::set<char>& letters, std::string_view order) {
  std::string out;
  for (char ch : order)
    if (letters.count(ch)) out.push_back(ch);
  return out;
}

}  // namespace

ImpactReport impact_report(const EventLog& log) {
  ImpactReport rep;
  const SimTime end = run_end(log);
  const auto roles = topology_roles(log);

  bool damaged = false;
  bool tampered = false;
  bool halted = false;
  bool blinded = false;
  std::set<char> cia;
  std::set<char> stride;

  // PLC ground truth and the HMI's displayed view.
  int truth = 0;
  SimTime error_since{-1};
  int shown = 0;
  bool shown_stale = true;
  SimTime mismatch_since{-1};
  const Duration halt_threshold = std::chrono::seconds(1);
  const Duration blind_threshold = std::chrono::seconds(2);
  auto check_mismatch = [&](SimTime now) {
    if (mismatch_since.count() >= 0 && now - mismatch_since >= blind_threshold) blinded = true;
  };
  auto update_mismatch = [&](SimTime now) {
    check_mismatch(now);
    const bool mismatch = !shown_stale && shown != truth;
    if (mismatch && mismatch_since.count() < 0) mismatch_since = now;
    if (!mismatch) mismatch_since = SimTime{-1};
  };

  std::map<std::string, std::string> arp_binding;
  bool arp_anomaly = false;
  std::map<std::string, std::string> pdus;  // flow + tid -> pdu hex
  bool discontinuity = false;
  std::uint64_t flood_packets = 0;
  std::uint64_t queue_drops = 0;
  std::uint64_t link_drops = 0;
  std::uint64_t timeouts = 0;
  std::map<std::string, std::set<std::string>> syn_targets;
  bool foreign_write = false;
  bool physical = false;
  bool offline = false;
  bool stale_view = false;

  for (std::size_t i = 0; i < log.size(); ++i) {
    const Category c = log.category_at(i);
    const SimTime t = log.time_at(i);
    switch (c) {
      case Category::alarm: {
        const LogRecord r = log.record(i);
        if (r.payload.contains("damage")) damaged = true;
        break;
      }
      case Category::tamper:
        tampered = true;
        break;
      case Category::state: {
        const LogRecord r = log.record(i);
        if (r.payload.value("device", "") != "plc") break;
        const int to = r.payload.value("to", 0);
        if (truth == 6 && error_since.count() >= 0 && t - error_since >= halt_threshold) halted = true;
        if (to == 6 && truth != 6) error_since = t;
        if (to != 6) error_since = SimTime{-1};
        truth = to;
        update_mismatch(t);
        break;
      }
      case Category::view: {
        const LogRecord r = log.record(i);
        shown = r.payload.value("plc_state", 0);
        shown_stale = r.payload.value("stale", true);
        if (shown_stale && shown != 0) stale_view = true;
        update_mismatch(t);
        break;
      }
      case Category::attack: {
        const LogRecord r = log.record(i);
        if (r.payload.value("phase", "") != "start") break;
        const std::string op = r.payload.value("op", "");
        rep.attacks.push_back(op);
        auto [a, s] = op_letters(op);
        if (r.payload.contains("params") && r.payload["params"].contains("cia")) {
          a = r.payload["params"].value("cia", a);
          s = r.payload["params"].value("stride", s);
        }
        cia.insert(a.begin(), a.end());
        stride.insert(s.begin(), s.end());
        break;
      }
      case Category::process: {
        const LogRecord r = log.record(i);
        if (r.payload.contains("physical")) physical = true;
        if (r.payload.contains("powered") && !r.payload["powered"].get<bool>()) offline = true;
        break;
      }
      case Category::drop: {
        const LogRecord r = log.record(i);
        const std::string reason = r.payload.value("reason", "");
        if (reason == "queue full") ++queue_drops;
        if (reason == "link down" || reason == "powered off") ++link_drops;
        break;
      }
      case Category::transaction: {
        const LogRecord r = log.record(i);
        if (r.payload.value("status", "") == "timeout") ++timeouts;
        break;
      }
      case Category::packet: {
        const LogRecord r = log.record(i);
        const auto& p = r.payload;
        const std::string kind = p.value("kind", "");
        if (kind == "flood") {
          ++flood_packets;
          break;
        }
        if (p.contains("arp")) {
          const auto& a = p["arp"];
          const std::string ip = p.value("src", "");
          const std::string mac = a.value("smac", "");
          auto [it, fresh] = arp_binding.emplace(ip, mac);
          if (!fresh && it->second != mac) {
            arp_anomaly = true;
            it->second = mac;
          }
          break;
        }
        const int flags = p.value("flags", 0);
        if ((flags & 0x02) && !(flags & 0x10)) syn_targets[p.value("src", "")].insert(p.value("dst", ""));
        if (p.contains("pdu")) {
          const std::string key = p.value("src", "") + ">" + p.value("dst", "") + ":" + std::to_string(p.value("sp", 0)) +
                                  ":" + std::to_string(p.value("dp", 0)) + "#" + std::to_string(p.value("tid", 0));
          const std::string pdu = p["pdu"].get<std::string>();
          auto [it, fresh] = pdus.emplace(key, pdu);
          if (!fresh && it->second != pdu) discontinuity = true;
          it->second = pdu;
          const int fc = p.value("fc", 0);
          const bool write = fc == 5 || fc == 6 || fc == 15 || fc == 16 || fc == 0x41 || fc == 0x42;
          if (write && p.value("dir", "") == "c2s" && !p.contains("relay")) {
            auto role = roles.find(p.value("src", ""));
            const bool master = role != roles.end() && (role->second == "hmi" || role->second == "scada" || role->second == "plc");
            if (!roles.empty() && !master) foreign_write = true;
          }
        }
        break;
      }
      default:
        break;
    }
  }
  if (truth == 6 && error_since.count() >= 0 && end - error_since >= halt_threshold) halted = true;
  check_mismatch(end);

  if (damaged) rep.classes.push_back(Impact::damaged);
  if (halted) rep.classes.push_back(Impact::halted);
  if (blinded) rep.classes.push_back(Impact::blinded);
  if (tampered) rep.classes.push_back(Impact::tampered);
  if (rep.classes.empty()) rep.classes.push_back(Impact::normal);
  rep.cia = ordered_union(cia, "CIA");
  rep.stride = ordered_union(stride, "STRIDE");

  if (arp_anomaly) rep.artifacts.push_back("arp binding change");
  if (discontinuity) rep.artifacts.push_back("modbus value rewritten in transit");
  if (flood_packets) rep.artifacts.push_back("flood traffic: " + std::to_string(flood_packets) + " packets");
  if (queue_drops) rep.artifacts.push_back("ingress queue drops: " + std::to_string(queue_drops));
  if (timeouts) rep.artifacts.push_back("modbus timeouts: " + std::to_string(timeouts));
  for (const auto& [src, targets] : syn_targets)
    if (targets.size() >= 10) rep.artifacts.push_back("connection sweep from " + src);
  if (foreign_write) rep.artifacts.push_back("modbus write from unexpected master");
  if (physical) rep.artifacts.push_back("physical intervention");
  if (offline) rep.artifacts.push_back("device powered off");
  if (link_drops) rep.artifacts.push_back("frames lost to link outage: " + std::to_string(link_drops));
  if (stale_view) rep.artifacts.push_back("hmi view went stale");
  if (damaged) rep.artifacts.push_back("damage alarm");
  if (tampered) rep.artifacts.push_back("historian records rewritten");
  return rep;
}

void export_density_csv(const DensityResult& result, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "device,ip,window,packets_per_s\n";
  for (const auto& [name, s] : result.devices)
    for (std::size_t i = 0; i < s.samples.size(); ++i) out << name << ',' << s.ip << ',' << i << ',' << s.samples[i] << '\n';
}

json density_json(const DensityResult& result) {
  json devices = json::object();
  for (const auto& [name, s] : result.devices)
    devices[name] = json{{"ip", s.ip},       {"total", s.total},       {"mode", s.mode},
                         {"mean", s.mean},   {"kde_peak", s.kde_peak}, {"windows", s.samples.size()},
                         {"samples", s.samples}};
  return json{{"devices", devices}, {"total_packets", result.total_packets}};
}

}  // namespace softics::analytics

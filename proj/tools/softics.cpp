#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <cstdlib>
#include <iostream>

#include "softics/analytics.hpp"
#include "softics/bridge.hpp"
#include "softics/error.hpp"
#include "softics/scenario.hpp"

namespace fs = std::filesystem;
using namespace softics;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SOFTICS_OUTPUT_DIR"); env && *env) return env;
  return "softics-out";
}

// Fills in default output names so a plain `run` leaves a log and a report.
void default_outputs(scenario::ScenarioConfig& c) {
  if (!c.outputs.log) c.outputs.log = c.name + ".log.jsonl";
  if (!c.outputs.report) c.outputs.report = c.name + ".report.json";
}

bridge::HttpBridge* g_bridge = nullptr;
void on_signal(int) {
  if (g_bridge) g_bridge->stop();
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, int bridge_port, const std::string& pcap,
            const std::string& out, double speed, bool quiet) {
  auto config = scenario::ScenarioConfig::load(path);
  if (seed) config.seed = *seed;
  if (!pcap.empty()) config.outputs.pcap = fs::absolute(pcap);
  default_outputs(config);
  const fs::path dir = output_dir(out);

  scenario::Testbed tb(config);
  tb.start();
  if (bridge_port >= 0) {
    bridge::HttpBridge br(tb, speed);
    const int port = br.listen("127.0.0.1", bridge_port);
    std::cerr << "HMI bridge listening on http://127.0.0.1:" << port << "\n";
    g_bridge = &br;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    br.run();
    g_bridge = nullptr;
  } else {
    tb.run();
  }
  tb.finish();
  tb.write_outputs(dir);
  const auto summary = tb.summary();
  if (quiet) {
    std::cout << summary.digest << "\n";
  } else {
    json brief = summary.to_json();
    brief.erase("attacks");
    brief["output_dir"] = dir.string();
    std::cout << brief.dump(2) << "\n";
  }
  return 0;
}

int cmd_replay(const std::string& path, const std::string& filter) {
  std::optional<Category> cat;
  if (!filter.empty()) {
    cat = category_from_string(filter);
    if (!cat) throw ArgumentError("unknown category '" + filter + "'");
  }
  const EventLog log = EventLog::read(path);
  for (const auto& line : scenario::replay_lines(log, cat)) std::cout << line << "\n";
  return 0;
}

int cmd_verify(const std::string& path, const std::string& digest) {
  const auto r = verify_log(path, digest);
  std::cout << (r.pass ? "PASS" : "FAIL") << " computed=" << r.computed << " expected=" << r.expected;
  if (!r.pass) std::cout << " (" << r.detail << ")";
  std::cout << "\n";
  return r.pass ? 0 : kExitValidation;
}

int cmd_report(const std::string& path) {
  const EventLog log = EventLog::read(path);
  const auto density = analytics::packet_rate_density(log);
  json latency = json::object();
  for (const auto* client : {"plc", "hmi", "scada"}) {
    analytics::TransactionFilter f;
    f.client = client;
    latency[client] = analytics::latency_stats(log, f).to_json();
  }
  json out{{"impact", analytics::impact_report(log).to_json()}, {"latency", latency}, {"density", json::object()}};
  for (const auto& [name, s] : density.devices)
    out["density"][name] = json{{"ip", s.ip}, {"mode", s.mode}, {"mean", s.mean}, {"kde_peak", s.kde_peak}, {"total", s.total}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_attack(const std::string& name, const std::string& target, const std::string& profile,
               const std::vector<std::string>& params, const std::string& url) {
  json p = json::object();
  if (!target.empty()) {
    const auto op = attacks::operation_from_string(name);
    switch (op) {
      case attacks::Operation::disconnect:
        p["device"] = target;
        break;
      case attacks::Operation::historian_tamper:
        p["scada"] = target;
        break;
      case attacks::Operation::discover:
        p["subnet"] = target;
        break;
      default:
        p["target"] = target;
    }
  }
  for (const auto& kv : params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ArgumentError("--param expects key=value, got '" + kv + "'");
    json v = json::parse(kv.substr(eq + 1), nullptr, false);
    p[kv.substr(0, eq)] = v.is_discarded() ? json(kv.substr(eq + 1)) : v;
  }
  httplib::Client client(url);
  client.set_read_timeout(10, 0);
  const json body{{"op", name}, {"profile", profile}, {"params", p}};
  auto res = client.Post("/api/attack", body.dump(), "application/json");
  if (!res) throw IoError("no bridge reachable at " + url);
  std::cout << res->body << "\n";
  return res->status == 200 ? 0 : (res->status == 400 || res->status == 403 ? kExitValidation : kExitRuntime);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Software ICS testbed: deterministic plant, network and attack simulation"};
  app.require_subcommand(1);

  std::string config_path, pcap, out, log_path, filter, digest, attack_name, target, profile = "local",
                                                                                  url = "http://127.0.0.1:8000";
  std::optional<std::uint64_t> seed;
  int bridge_port = -1;
  double speed = 1.0;
  bool quiet = false;
  std::vector<std::string> params;

  auto* run = app.add_subcommand("run", "Run a scenario");
  run->add_option("config", config_path, "Scenario JSON")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--bridge-http", bridge_port, "Serve the HMI API on this port and pace to wall clock");
  run->add_option("--pcap", pcap, "Write the switch capture here");
  run->add_option("--out", out, "Output directory (default $SOFTICS_OUTPUT_DIR or ./softics-out)");
  run->add_option("--speed", speed, "Virtual seconds per wall second with --bridge-http");
  run->add_flag("--digest-only", quiet, "Print only the log digest");

  auto* replay = app.add_subcommand("replay", "Print the timeline of a log");
  replay->add_option("log", log_path)->required();
  replay->add_option("--filter", filter, "Only records of this category");

  auto* verify = app.add_subcommand("verify", "Check a log against a digest");
  verify->add_option("log", log_path)->required();
  verify->add_option("digest", digest)->required();

  auto* report = app.add_subcommand("report", "Analyse a log");
  report->add_option("log", log_path)->required();

  auto* attack = app.add_subcommand("attack", "Launch one attack against a bridged run");
  attack->add_option("name", attack_name, "Operation name")->required();
  attack->add_option("--target", target, "Target address or subnet");
  attack->add_option("--profile", profile, "local or remote");
  attack->add_option("--param", params, "Extra parameter key=value (JSON values allowed)");
  attack->add_option("--url", url, "Bridge base URL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*run) return cmd_run(config_path, seed, bridge_port, pcap, out, speed, quiet);
    if (*replay) return cmd_replay(log_path, filter);
    if (*verify) return cmd_verify(log_path, digest);
    if (*report) return cmd_report(log_path);
    if (*attack) return cmd_attack(attack_name, target, profile, params, url);
  } catch (const ConfigError& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ArgumentError& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    std::cerr << "parse error at byte " << e.offset() << ": " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}

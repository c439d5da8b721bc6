#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "softics/analytics.hpp"
#include "softics/attacks.hpp"
#include "softics/field_devices.hpp"
#include "softics/plc.hpp"
#include "softics/process.hpp"
#include "softics/supervisory.hpp"

namespace softics::scenario {

struct DeviceSpec {
  Ipv4 ip;
  double capacity_pps = 0;
};

struct TopologyConfig {
  DeviceSpec plc{Ipv4(192, 168, 0, 30), 2000};
  DeviceSpec io1{Ipv4(192, 168, 0, 51), 1500};
  DeviceSpec io2{Ipv4(192, 168, 0, 52), 1500};
  DeviceSpec hmi{Ipv4(192, 168, 0, 10), 1000};
  DeviceSpec scada{Ipv4(192, 168, 0, 20), 1000};
  Ipv4 switch_ip{192, 168, 0, 1};
  Ipv4 gateway{192, 168, 0, 254};
  Ipv4 router_wan{10, 0, 0, 1};
  Ipv4 local_attacker{192, 168, 0, 66};
  Ipv4 remote_attacker{10, 0, 0, 66};
  std::size_t switch_ports = 8;
  Duration link_latency = std::chrono::microseconds(200);
};

struct AttackStep {
  double at_s = 0;
  attacks::Operation op = attacks::Operation::discover;
  attacks::ProfileKind profile = attacks::ProfileKind::local;
  json params = json::object();
};

struct OperatorStep {
  double at_s = 0;
  json command;
};

struct OutputConfig {
  std::optional<std::filesystem::path> log;
  std::optional<std::filesystem::path> pcap;
  std::optional<std::filesystem::path> report;
  std::optional<std::filesystem::path> historian;
  std::optional<std::filesystem::path> density;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  double duration_s = 60;
  TopologyConfig topology;
  plc::TimingConfig timing;
  process::ProcessConfig process;
  std::vector<AttackStep> attacks;
  std::vector<OperatorStep> operator_steps;
  OutputConfig outputs;
  // Ends the run this long after the plant is damaged; negative disables.
  double stop_after_damage_s = 1.0;

  // ConfigError carries the JSON path of the offending field.
  static ScenarioConfig from_json(const json& j);
  static ScenarioConfig load(const std::filesystem::path& path);
  void validate() const;
  json to_json() const;
};

struct RunSummary {
  std::string scenario;
  std::uint64_t seed = 0;
  int final_state = 0;
  std::string final_state_name;
  bool damaged = false;
  std::string damage_reason;
  int order_count = 0;
  int cycle_count = 0;
  int last_error = 0;
  double virtual_s = 0;
  double wall_s = 0;
  std::vector<int> state_sequence;  // boot state followed by every transition
  std::string digest;
  std::size_t records = 0;
  json attacks = json::array();
  json impact;
  json to_json() const;
};

// The wired plant: every device, both attackers and the network, all on one kernel.
class Testbed {
 public:
  explicit Testbed(ScenarioConfig config);
  Testbed(const Testbed&) = delete;
  Testbed& operator=(const Testbed&) = delete;
  ~Testbed();

  // Logs topology, starts the devices and schedules the scripted steps.
  void start();
  // Advances to `until` or to the damage stop, whichever is first.
  void advance(SimTime until);
  void run() { advance(end_time()); }
  bool finished() const;
  // Writes the terminal meta record; call once after the last advance.
  void finish();

  SimTime end_time() const { return from_seconds(config_.duration_s); }
  const ScenarioConfig& config() const { return config_; }
  Kernel& kernel() { return kernel_; }
  net::Fabric& fabric() { return fabric_; }
  process::Process& process() { return process_; }
  plc::Plc& plc() { return plc_; }
  devices::RemoteIo& io(int index) { return index == 0 ? io1_ : io2_; }
  supervisory::Hmi& hmi() { return hmi_; }
  supervisory::Scada& scada() { return scada_; }
  attacks::Attacker& attacker(attacks::ProfileKind kind) {
    return kind == attacks::ProfileKind::local ? local_ : remote_;
  }

  // Immediate attack on behalf of a scripted step or a bridge request.
  attacks::ReportPtr launch(attacks::Operation op, attacks::ProfileKind profile, const json& params);

  RunSummary summary() const;
  // Writes the configured outputs below `dir` for relative paths.
  void write_outputs(const std::filesystem::path& dir) const;

 private:
  ScenarioConfig config_;
  Kernel kernel_;
  net::Fabric fabric_;
  net::Router router_;
  process::Process process_;
  devices::RemoteIo io1_;
  devices::RemoteIo io2_;
  plc::Plc plc_;
  supervisory::Hmi hmi_;
  supervisory::Scada scada_;
  attacks::Attacker local_;
  attacks::Attacker remote_;
  net::Host switch_mgmt_;
  std::optional<SimTime> damaged_at_;
  std::vector<json> step_errors_;
  bool finished_ = false;
  double wall_s_ = 0;
};

struct RunResult {
  RunSummary summary;
  EventLog log;
};

// Headless run as fast as possible. Outputs go below `output_dir`.
RunResult run_scenario(const ScenarioConfig& config, std::optional<std::filesystem::path> output_dir = std::nullopt);

// Timeline of state transitions and attack, tamper and alarm events, or of one
// category when `filter` is given.
std::vector<std::string> replay_lines(const EventLog& log, std::optional<Category> filter = std::nullopt);

}  // namespace softics::scenario

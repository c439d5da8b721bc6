#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "softics/fabric.hpp"
#include "softics/modbus_endpoint.hpp"
#include "softics/plc.hpp"

namespace softics::supervisory {

struct HmiSnapshot {
  int plc_state = 0;
  process::SensorReadout sensors;
  plc::Outputs actuators;
  int order_count = 0;
  int cycle_count = 0;
  int last_error = 0;
  bool manual_mode = false;
  bool emergency_stop = false;
  bool damaged = false;
  SimTime last_update{-1};
  bool stale = true;
  bool valid = false;  // at least one full poll completed

  json to_json() const;
};

enum class Motor { conveyor, punch };
enum class MotorDir { fwd, rev, down, up, stop };
Motor motor_from_string(std::string_view s);
MotorDir motor_dir_from_string(std::string_view s);

struct HmiConfig {
  Ipv4 plc;
  Duration poll_period = std::chrono::milliseconds(500);
  Duration timeout = std::chrono::milliseconds(250);
  Duration first_poll = std::chrono::milliseconds(500);
};

class Hmi {
 public:
  Hmi(Kernel& kernel, net::Fabric& fabric, net::HostConfig host, HmiConfig config);

  void start();
  net::Host& host() { return host_; }

  // Latest published snapshot with the staleness flag evaluated for now.
  HmiSnapshot snapshot() const;
  void poll();

  // Operator commands; each becomes Modbus coil writes to the PLC.
  void place_order();
  void reset();
  void estop();
  void set_manual(bool on);
  // CommandError unless the last snapshot shows manual mode.
  void manual_motor(Motor motor, MotorDir dir);

  std::uint64_t polls() const { return polls_; }

 private:
  void write_coil(std::size_t address, bool value, const char* command);
  void complete_poll();
  void log_view();

  Kernel& kernel_;
  net::Host host_;
  HmiConfig config_;
  modbus::ModbusClient client_;
  HmiSnapshot snap_;
  HmiSnapshot building_;
  int outstanding_ = 0;
  bool poll_failed_ = false;
  std::uint64_t polls_ = 0;
  int logged_state_ = -1;
  bool logged_stale_ = false;
  bool logged_damaged_ = false;
  Timer timer_;
};

// Operator command in JSON form: {"cmd": "place_order" | "reset" | "estop" |
// "set_manual", "on": bool | "manual_motor", "motor": ..., "dir": ...}.
// Throws ArgumentError for malformed commands, CommandError when refused.
void apply_command(Hmi& hmi, const json& command);

enum class Quality { good, bad };

struct HistorianRecord {
  SimTime time{0};
  std::string point;
  double value = 0;
  Quality quality = Quality::good;
  bool operator==(const HistorianRecord&) const = default;
};

// Append-only time series with a deliberately unauthenticated rewrite path.
class Historian {
 public:
  explicit Historian(std::vector<std::string> points);

  const std::vector<std::string>& points() const { return points_; }
  bool has_point(std::string_view point) const;
  void append(HistorianRecord record);
  // ArgumentError for unknown points. Range is inclusive.
  std::vector<HistorianRecord> query(std::string_view point, SimTime from, SimTime to) const;
  std::vector<HistorianRecord> all(std::string_view point) const;
  std::size_t rewrite(std::string_view point, SimTime from, SimTime to, double value);
  std::size_t size() const;
  void export_csv(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> points_;
  std::map<std::string, std::vector<HistorianRecord>, std::less<>> series_;
};

struct ScadaConfig {
  Ipv4 plc;
  Duration poll_period = std::chrono::seconds(1);
  Duration timeout = std::chrono::milliseconds(250);
  Duration first_poll = std::chrono::seconds(1);
  std::uint16_t admin_port = 8080;
};

// Polled points, each one holding register on the PLC.
extern const std::vector<std::pair<std::string, std::size_t>> kScadaPoints;

class Scada {
 public:
  Scada(Kernel& kernel, net::Fabric& fabric, net::HostConfig host, ScadaConfig config);

  void start();
  net::Host& host() { return host_; }
  Historian& historian() { return historian_; }
  const Historian& historian() const { return historian_; }
  void poll();

  // Admin request body -> reply body. Used by the TCP endpoint.
  json handle_admin(const json& request, Ipv4 from);

 private:
  Kernel& kernel_;
  net::Host host_;
  ScadaConfig config_;
  modbus::ModbusClient client_;
  Historian historian_;
  Timer timer_;
};

}  // namespace softics::supervisory

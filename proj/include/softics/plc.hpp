#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>

#include "softics/fabric.hpp"
#include "softics/modbus_endpoint.hpp"
#include "softics/process.hpp"

namespace softics::plc {

enum class PlcState : std::uint16_t {
  initialize = 1,
  goods_to_punch = 2,
  punch_down = 3,
  punch_up = 4,
  goods_to_origin = 5,
  error = 6,
};

std::string_view to_string(PlcState s);
std::optional<PlcState> state_from_value(int value);
// The edges of the program graph, including the fault edge out of state 1.
bool is_valid_edge(PlcState from, PlcState to);

enum class ErrorCode : std::uint16_t { none = 0, estop = 1, stage_timeout = 2, io_timeout = 3, drive_fault = 4 };
std::string_view to_string(ErrorCode e);

namespace reg {
constexpr std::size_t kState = 0;
constexpr std::size_t kOrderCount = 1;
constexpr std::size_t kCycleCount = 2;
constexpr std::size_t kLastError = 3;
constexpr std::size_t kDamaged = 4;
constexpr std::size_t kHoldingCount = 5;
}  // namespace reg

namespace coil {
constexpr std::size_t kStartOrder = 0;
constexpr std::size_t kReset = 1;
constexpr std::size_t kEmergencyStop = 2;
constexpr std::size_t kManualMode = 3;
constexpr std::size_t kManConveyorFwd = 4;
constexpr std::size_t kManConveyorRev = 5;
constexpr std::size_t kManPunchDown = 6;
constexpr std::size_t kManPunchUp = 7;
constexpr std::size_t kCount = 8;
}  // namespace coil

// Discrete inputs 0..3 mirror the sensor image, 4..7 the actuator outputs.
namespace input {
constexpr std::size_t kSensorBase = 0;
constexpr std::size_t kOutputBase = 4;
constexpr std::size_t kCount = 8;
}  // namespace input

struct TimingConfig {
  Duration io_poll_period = std::chrono::milliseconds(100);
  Duration hmi_poll_period = std::chrono::milliseconds(500);
  Duration scada_poll_period = std::chrono::milliseconds(1000);
  Duration stage_timeout = std::chrono::seconds(10);
  int watchdog_misses = 3;
  Duration modbus_timeout = std::chrono::milliseconds(250);

  void validate(const std::string& prefix = "timing") const;
};

struct Commands {
  bool start_order = false;
  bool reset = false;
  bool emergency_stop = false;
  bool manual_mode = false;
  bool man_conveyor_fwd = false;
  bool man_conveyor_rev = false;
  bool man_punch_down = false;
  bool man_punch_up = false;
};

struct Faults {
  bool stage_timeout = false;
  bool io_timeout = false;
  bool drive_fault = false;
};

struct Transition {
  PlcState next;
  ErrorCode error = ErrorCode::none;
};

// Pure program step.
Transition state_transition(PlcState current, const process::SensorReadout& sensors, const Commands& commands,
                            const Faults& faults = {});

// Motor outputs: conveyor fwd, conveyor rev, punch down, punch up.
struct Outputs {
  bool conveyor_fwd = false;
  bool conveyor_rev = false;
  bool punch_down = false;
  bool punch_up = false;
  bool operator==(const Outputs&) const = default;
};

Outputs actuator_pattern(PlcState state, const Commands& commands);

struct PlcConfig {
  TimingConfig timing;
  Ipv4 io1;
  Ipv4 io2;
};

struct IoLink {
  std::unique_ptr<modbus::ModbusClient> client;
  bool busy = false;
  int misses = 0;
  std::uint64_t polls = 0;
  std::uint64_t skipped = 0;
};

class Plc {
 public:
  Plc(Kernel& kernel, net::Fabric& fabric, net::HostConfig host, PlcConfig config);

  void start();

  net::Host& host() { return host_; }
  modbus::RegisterBank& bank() { return bank_; }
  const modbus::RegisterBank& bank() const { return bank_; }
  PlcState state() const { return state_; }
  ErrorCode last_error() const { return error_; }
  process::SensorReadout sensor_image() const { return image_; }
  Outputs outputs() const { return outputs_; }
  const IoLink& link(int io) const { return links_[static_cast<std::size_t>(io)]; }
  std::uint16_t order_count() const { return bank_.holding_register(reg::kOrderCount); }
  std::uint16_t cycle_count() const { return bank_.holding_register(reg::kCycleCount); }

  // One poll of IO `io` (0 = IO1, 1 = IO2): read inputs, evaluate, write coils.
  void poll(int io);

 private:
  Commands read_commands() const;
  void evaluate();
  void enter(PlcState next, ErrorCode error);
  void record_miss(int io);
  void write_outputs(int io);
  void publish();

  Kernel& kernel_;
  net::Host host_;
  PlcConfig config_;
  modbus::RegisterBank bank_;
  modbus::ModbusServer server_;
  std::array<IoLink, 2> links_;
  PlcState state_ = PlcState::initialize;
  ErrorCode error_ = ErrorCode::none;
  SimTime stage_started_{0};
  process::SensorReadout image_;
  bool drive_fault_[2] = {false, false};
  Outputs outputs_;
  Timer timers_[2];
};

}  // namespace softics::plc

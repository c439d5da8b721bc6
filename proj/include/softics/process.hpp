#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "softics/kernel.hpp"

namespace softics::process {

struct ProcessConfig {
  double conveyor_length = 100.0;
  double belt_speed = 20.0;  // units/s
  double barrier_a_pos = 5.0;
  double barrier_b_pos = 95.0;
  double barrier_window = 2.0;
  double punch_travel = 100.0;
  double punch_speed = 50.0;  // units/s
  double upper_switch_at = 95.0;
  double lower_switch_at = 10.0;
  Duration tick = std::chrono::milliseconds(10);

  // Throws ConfigError naming the offending field below `prefix`.
  void validate(const std::string& prefix = "process") const;
};

enum class ConveyorCmd { stop, fwd, rev };
enum class PunchCmd { stop, down, up };
enum class Component { none, conveyor, punch };

std::string_view to_string(ConveyorCmd c);
std::string_view to_string(PunchCmd c);
std::string_view to_string(Component c);
// ArgumentError for unknown names.
Component component_from_string(std::string_view name);

struct ProcessState {
  double x = 5.0;
  double z = 100.0;
  ConveyorCmd conveyor_cmd = ConveyorCmd::stop;
  PunchCmd punch_cmd = PunchCmd::stop;
  bool workpiece_present = true;
  bool damaged = false;
  std::string damage_reason;
  Component damaged_component = Component::none;

  bool operator==(const ProcessState&) const = default;
};

enum class Sensor { barrier_a, barrier_b, limit_upper, limit_lower };
std::string_view to_string(Sensor s);
Sensor sensor_from_string(std::string_view name);

struct SensorReadout {
  bool barrier_a = false;
  bool barrier_b = false;
  bool limit_upper = false;
  bool limit_lower = false;

  bool get(Sensor s) const;
  void set(Sensor s, bool value);
  bool operator==(const SensorReadout&) const = default;
};

ProcessState initial_state(const ProcessConfig& config);

// Kinematic motion over any dt > 0. If the punch hits the floor inside the
// interval, every motion stops at the impact instant.
ProcessState step(const ProcessState& state, const ProcessConfig& config, Duration dt);
ProcessState step_seconds(const ProcessState& state, const ProcessConfig& config, double dt);

SensorReadout read_sensors(const ProcessState& state, const ProcessConfig& config);

struct RemoveWorkpiece {};
struct PlaceWorkpiece {};
struct ForceSensor {
  Sensor sensor = Sensor::barrier_a;
  bool value = false;
  Duration duration{0};
};
struct Destroy {
  Component component = Component::punch;
};
using PhysicalAction = std::variant<RemoveWorkpiece, PlaceWorkpiece, ForceSensor, Destroy>;

std::string describe(const PhysicalAction& action);

struct TraceRow {
  SimTime time{0};
  double x = 0;
  double z = 0;
  SensorReadout sensors;
  bool damaged = false;
};

// The live plant, stepped on every kernel tick.
class Process {
 public:
  Process(Kernel& kernel, ProcessConfig config);

  // Schedules the periodic step. Call before the device actors start so the
  // process runs first within each tick.
  void start();

  const ProcessState& state() const { return state_; }
  const ProcessConfig& config() const { return config_; }
  // Sensor view including forced overrides.
  SensorReadout sensors() const;

  void command_conveyor(ConveyorCmd cmd);
  void command_punch(PunchCmd cmd);

  void inject(const PhysicalAction& action);
  void reset_process();

  void set_trace(bool on) { trace_enabled_ = on; }
  const std::vector<TraceRow>& trace() const { return trace_; }
  void export_trace_csv(const std::filesystem::path& path) const;

 private:
  struct Override {
    bool value;
    SimTime until;
  };

  void tick();
  void publish_changes();

  Kernel& kernel_;
  ProcessConfig config_;
  ProcessState state_;
  std::optional<Override> overrides_[4];
  SensorReadout last_published_;
  bool last_damaged_ = false;
  bool trace_enabled_ = false;
  std::vector<TraceRow> trace_;
  Timer timer_;
};

}  // namespace softics::process

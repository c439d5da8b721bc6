#include "softics/process.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "softics/error.hpp"

namespace softics::process {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr Sensor kSensors[] = {Sensor::barrier_a, Sensor::barrier_b, Sensor::limit_upper, Sensor::limit_lower};

json readout_json(const SensorReadout& s) {
  return json{{"barrier_a", s.barrier_a},
              {"barrier_b", s.barrier_b},
              {"limit_upper", s.limit_upper},
              {"limit_lower", s.limit_lower}};
}

}  // namespace

void ProcessConfig::validate(const std::string& prefix) const {
  auto fail = [&](const char* field, const std::string& what) { throw ConfigError(prefix + "." + field, what); };
  if (!(conveyor_length > 0)) fail("conveyor_length", "must be > 0");
  if (!(belt_speed > 0)) fail("belt_speed", "must be > 0");
  if (!(punch_speed > 0)) fail("punch_speed", "must be > 0");
  if (!(punch_travel > 0)) fail("punch_travel", "must be > 0");
  if (!(barrier_window >= 0)) fail("barrier_window", "must be >= 0");
  if (barrier_a_pos < 0 || barrier_a_pos > conveyor_length) fail("barrier_a_pos", "outside the conveyor");
  if (barrier_b_pos < 0 || barrier_b_pos > conveyor_length) fail("barrier_b_pos", "outside the conveyor");
  if (!(barrier_a_pos < barrier_b_pos)) fail("barrier_b_pos", "must lie beyond barrier_a_pos");
  if (upper_switch_at <= 0 || upper_switch_at > punch_travel) fail("upper_switch_at", "outside punch travel");
  if (lower_switch_at < 0 || lower_switch_at >= upper_switch_at) fail("lower_switch_at", "must be below upper_switch_at");
  if (tick.count() <= 0) fail("tick_ms", "must be > 0");
}

std::string_view to_string(ConveyorCmd c) {
  switch (c) {
    case ConveyorCmd::fwd:
      return "fwd";
    case ConveyorCmd::rev:
      return "rev";
    case ConveyorCmd::stop:
      break;
  }
  return "stop";
}

std::string_view to_string(PunchCmd c) {
  switch (c) {
    case PunchCmd::down:
      return "down";
    case PunchCmd::up:
      return "up";
    case PunchCmd::stop:
      break;
  }
  return "stop";
}

std::string_view to_string(Component c) {
  switch (c) {
    case Component::conveyor:
      return "conveyor";
    case Component::punch:
      return "punch";
    case Component::none:
      break;
  }
  return "none";
}

Component component_from_string(std::string_view name) {
  if (name == "conveyor") return Component::conveyor;
  if (name == "punch") return Component::punch;
  throw ArgumentError("unknown component '" + std::string(name) + "' (expected conveyor or punch)");
}

std::string_view to_string(Sensor s) {
  switch (s) {
    case Sensor::barrier_a:
      return "barrier_a";
    case Sensor::barrier_b:
      return "barrier_b";
    case Sensor::limit_upper:
      return "limit_upper";
    case Sensor::limit_lower:
      return "limit_lower";
  }
  return "barrier_a";
}

Sensor sensor_from_string(std::string_view name) {
  for (Sensor s : kSensors)
    if (to_string(s) == name) return s;
  throw ArgumentError("unknown sensor '" + std::string(name) + "'");
}

bool SensorReadout::get(Sensor s) const {
  switch (s) {
    case Sensor::barrier_a:
      return barrier_a;
    case Sensor::barrier_b:
      return barrier_b;
    case Sensor::limit_upper:
      return limit_upper;
    case Sensor::limit_lower:
      return limit_lower;
  }
  return false;
}

void SensorReadout::set(Sensor s, bool value) {
  switch (s) {
    case Sensor::barrier_a:
      barrier_a = value;
      break;
    case Sensor::barrier_b:
      barrier_b = value;
      break;
    case Sensor::limit_upper:
      limit_upper = value;
      break;
    case Sensor::limit_lower:
      limit_lower = value;
      break;
  }
}

ProcessState initial_state(const ProcessConfig& config) {
  ProcessState s;
  s.x = config.barrier_a_pos;
  s.z = config.punch_travel;
  return s;
}

ProcessState step_seconds(const ProcessState& state, const ProcessConfig& config, double dt) {
  ProcessState next = state;
  if (state.damaged || !(dt > 0)) return next;

  double moving = dt;
  bool crash = false;
  if (state.punch_cmd == PunchCmd::down) {
    const double t_hit = state.z / config.punch_speed;
    if (t_hit <= dt) {
      moving = t_hit;
      crash = true;
    }
  }

  if (state.workpiece_present) {
    if (state.conveyor_cmd == ConveyorCmd::fwd)
      next.x = std::min(config.conveyor_length, state.x + config.belt_speed * moving);
    else if (state.conveyor_cmd == ConveyorCmd::rev)
      next.x = std::max(0.0, state.x - config.belt_speed * moving);
  }

  if (crash) {
    next.z = 0.0;
    next.damaged = true;
    next.damage_reason = "punch crash";
    next.damaged_component = Component::punch;
  } else if (state.punch_cmd == PunchCmd::down) {
    next.z = state.z - config.punch_speed * dt;
  } else if (state.punch_cmd == PunchCmd::up) {
    next.z = std::min(config.punch_travel, state.z + config.punch_speed * dt);
  }
  return next;
}

ProcessState step(const ProcessState& state, const ProcessConfig& config, Duration dt) {
  return step_seconds(state, config, to_seconds(dt));
}

SensorReadout read_sensors(const ProcessState& state, const ProcessConfig& config) {
  SensorReadout r;
  if (state.workpiece_present) {
    r.barrier_a = std::abs(state.x - config.barrier_a_pos) <= config.barrier_window;
    r.barrier_b = std::abs(state.x - config.barrier_b_pos) <= config.barrier_window;
  }
  r.limit_upper = state.z >= config.upper_switch_at;
  r.limit_lower = state.z <= config.lower_switch_at;
  return r;
}

std::string describe(const PhysicalAction& action) {
  return std::visit(overloaded{
                        [](const RemoveWorkpiece&) -> std::string { return "remove_workpiece"; },
                        [](const PlaceWorkpiece&) -> std::string { return "place_workpiece"; },
                        [](const ForceSensor& f) -> std::string {
                          return "force_sensor(" + std::string(to_string(f.sensor)) + "=" +
                                 (f.value ? "1" : "0") + ", " + std::to_string(to_seconds(f.duration)) + " s)";
                        },
                        [](const Destroy& d) -> std::string {
                          return "destroy(" + std::string(to_string(d.component)) + ")";
                        },
                    },
                    action);
}

Process::Process(Kernel& kernel, ProcessConfig config)
    : kernel_(kernel), config_(config), state_(initial_state(config_)) {
  config_.validate();
  last_published_ = read_sensors(state_, config_);
}

void Process::start() {
  timer_.cancel();
  kernel_.log().append(kernel_.now(), Category::sensor, readout_json(last_published_));
  timer_ = kernel_.every(kernel_.now() + config_.tick, config_.tick, [this] { tick(); });
}

SensorReadout Process::sensors() const {
  SensorReadout r = read_sensors(state_, config_);
  for (Sensor s : kSensors) {
    const auto& o = overrides_[static_cast<int>(s)];
    if (o && o->until > kernel_.now()) r.set(s, o->value);
  }
  return r;
}

void Process::command_conveyor(ConveyorCmd cmd) {
  if (state_.conveyor_cmd == cmd) return;
  state_.conveyor_cmd = cmd;
  kernel_.log().append(kernel_.now(), Category::process, json{{"conveyor", to_string(cmd)}});
}

void Process::command_punch(PunchCmd cmd) {
  if (state_.punch_cmd == cmd) return;
  state_.punch_cmd = cmd;
  kernel_.log().append(kernel_.now(), Category::process, json{{"punch", to_string(cmd)}});
}

void Process::inject(const PhysicalAction& action) {
  std::visit(overloaded{
                 [&](const RemoveWorkpiece&) { state_.workpiece_present = false; },
                 [&](const PlaceWorkpiece&) {
                   state_.workpiece_present = true;
                   state_.x = config_.barrier_a_pos;
                 },
                 [&](const ForceSensor& f) {
                   if (f.duration.count() <= 0) throw ArgumentError("force_sensor duration must be > 0");
                   overrides_[static_cast<int>(f.sensor)] = Override{f.value, kernel_.now() + f.duration};
                 },
                 [&](const Destroy& d) {
                   if (d.component == Component::none) throw ArgumentError("destroy needs a component");
                   if (!state_.damaged) {
                     state_.damaged = true;
                     state_.damaged_component = d.component;
                     state_.damage_reason = std::string(to_string(d.component)) + " destroyed";
                   }
                 },
             },
             action);
  kernel_.log().append(kernel_.now(), Category::process, json{{"physical", describe(action)}});
  publish_changes();
}

void Process::reset_process() {
  state_ = initial_state(config_);
  for (auto& o : overrides_) o.reset();
  kernel_.log().append(kernel_.now(), Category::process, json{{"reset", true}});
  publish_changes();
}

void Process::tick() {
  state_ = step(state_, config_, config_.tick);
  publish_changes();
  if (trace_enabled_) trace_.push_back(TraceRow{kernel_.now(), state_.x, state_.z, sensors(), state_.damaged});
}

void Process::publish_changes() {
  const SensorReadout now = sensors();
  if (now != last_published_) {
    last_published_ = now;
    json p = readout_json(now);
    p["x"] = state_.x;
    p["z"] = state_.z;
    kernel_.log().append(kernel_.now(), Category::sensor, std::move(p));
  }
  if (state_.damaged != last_damaged_) {
    last_damaged_ = state_.damaged;
    if (state_.damaged)
      kernel_.log().append(kernel_.now(), Category::alarm,
                           json{{"damage", state_.damage_reason}, {"component", to_string(state_.damaged_component)},
                                {"x", state_.x}, {"z", state_.z}});
  }
}

void Process::export_trace_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace " + path.string());
  out << "time_s,x,z,barrier_a,barrier_b,limit_upper,limit_lower,damaged\n";
  char buf[160];
  for (const auto& r : trace_) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%d,%d,%d,%d,%d\n", to_seconds(r.time), r.x, r.z, r.sensors.barrier_a,
                  r.sensors.barrier_b, r.sensors.limit_upper, r.sensors.limit_lower, r.damaged);
    out << buf;
  }
}

}  // namespace softics::process

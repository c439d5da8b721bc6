#include "softics/plc.hpp"

#include "softics/error.hpp"

namespace softics::plc {

using modbus::FunctionCode;

std::string_view to_string(PlcState s) {
  switch (s) {
    case PlcState::initialize:
      return "Initialize";
    case PlcState::goods_to_punch:
      return "Goods to punching machine";
    case PlcState::punch_down:
      return "Punching machine down";
    case PlcState::punch_up:
      return "Punching machine up";
    case PlcState::goods_to_origin:
      return "Goods to origin";
    case PlcState::error:
      return "Error";
  }
  return "Error";
}

std::optional<PlcState> state_from_value(int value) {
  if (value < 1 || value > 6) return std::nullopt;
  return static_cast<PlcState>(value);
}

bool is_valid_edge(PlcState from, PlcState to) {
  const int f = static_cast<int>(from);
  const int t = static_cast<int>(to);
  if (to == PlcState::error) return from != PlcState::error;
  if (from == PlcState::error) return to == PlcState::initialize;
  if (from == PlcState::goods_to_origin) return to == PlcState::initialize;
  return t == f + 1;
}

std::string_view to_string(ErrorCode e) {
  switch (e) {
    case ErrorCode::none:
      return "none";
    case ErrorCode::estop:
      return "emergency stop";
    case ErrorCode::stage_timeout:
      return "stage timeout";
    case ErrorCode::io_timeout:
      return "io timeout";
    case ErrorCode::drive_fault:
      return "drive fault";
  }
  return "none";
}

void TimingConfig::validate(const std::string& prefix) const {
  auto fail = [&](const char* field, const std::string& what) { throw ConfigError(prefix + "." + field, what); };
  if (io_poll_period.count() <= 0) fail("io_poll_ms", "must be > 0");
  if (hmi_poll_period.count() <= 0) fail("hmi_poll_ms", "must be > 0");
  if (scada_poll_period.count() <= 0) fail("scada_poll_ms", "must be > 0");
  if (modbus_timeout.count() <= 0) fail("modbus_timeout_ms", "must be > 0");
  if (stage_timeout <= io_poll_period) fail("stage_timeout_s", "must exceed the IO poll period");
  if (watchdog_misses < 1) fail("watchdog_misses", "must be >= 1");
}

Transition state_transition(PlcState current, const process::SensorReadout& s, const Commands& c, const Faults& f) {
  if (current == PlcState::error) return {c.reset ? PlcState::initialize : PlcState::error};
  if (c.emergency_stop) return {PlcState::error, ErrorCode::estop};
  if (f.drive_fault) return {PlcState::error, ErrorCode::drive_fault};
  if (f.io_timeout) return {PlcState::error, ErrorCode::io_timeout};
  if (c.manual_mode) return {current};
  if (f.stage_timeout && current != PlcState::initialize) return {PlcState::error, ErrorCode::stage_timeout};
  switch (current) {
    case PlcState::initialize:
      return {c.start_order && s.barrier_a && s.limit_upper ? PlcState::goods_to_punch : current};
    case PlcState::goods_to_punch:
      return {s.barrier_b ? PlcState::punch_down : current};
    case PlcState::punch_down:
      return {s.limit_lower ? PlcState::punch_up : current};
    case PlcState::punch_up:
      return {s.limit_upper ? PlcState::goods_to_origin : current};
    case PlcState::goods_to_origin:
      return {s.barrier_a ? PlcState::initialize : current};
    case PlcState::error:
      break;
  }
  return {current};
}

Outputs actuator_pattern(PlcState state, const Commands& c) {
  Outputs o;
  if (state == PlcState::error) return o;
  if (c.manual_mode) {
    o.conveyor_fwd = c.man_conveyor_fwd;
    o.conveyor_rev = c.man_conveyor_rev;
    o.punch_down = c.man_punch_down;
    o.punch_up = c.man_punch_up;
    return o;
  }
  o.conveyor_fwd = state == PlcState::goods_to_punch;
  o.punch_down = state == PlcState::punch_down;
  o.punch_up = state == PlcState::punch_up;
  o.conveyor_rev = state == PlcState::goods_to_origin;
  return o;
}

Plc::Plc(Kernel& kernel, net::Fabric& fabric, net::HostConfig host, PlcConfig config)
    : kernel_(kernel),
      host_(kernel, fabric, std::move(host)),
      config_(config),
      bank_(coil::kCount, input::kCount, reg::kHoldingCount, 0,
            modbus::DeviceIdentity{"softics", "Virtual PLC", "3.0"}),
      server_(host_, bank_) {
  config_.timing.validate();
  links_[0].client = std::make_unique<modbus::ModbusClient>(host_, config_.io1, config_.timing.modbus_timeout);
  links_[1].client = std::make_unique<modbus::ModbusClient>(host_, config_.io2, config_.timing.modbus_timeout);
  publish();
}

void Plc::start() {
  stage_started_ = kernel_.now();
  kernel_.log().append(kernel_.now(), Category::state,
                       json{{"device", "plc"}, {"to", static_cast<int>(state_)}, {"name", to_string(state_)}, {"boot", true}});
  const Duration period = config_.timing.io_poll_period;
  for (int io = 0; io < 2; ++io) {
    timers_[io].cancel();
    // IO2 runs half a period behind IO1 so the two responses never queue together.
    timers_[io] = kernel_.every(kernel_.now() + period + io * (period / 2), period, [this, io] { poll(io); });
  }
}

Commands Plc::read_commands() const {
  Commands c;
  c.start_order = bank_.coil(coil::kStartOrder);
  c.reset = bank_.coil(coil::kReset);
  c.emergency_stop = bank_.coil(coil::kEmergencyStop);
  c.manual_mode = bank_.coil(coil::kManualMode);
  c.man_conveyor_fwd = bank_.coil(coil::kManConveyorFwd);
  c.man_conveyor_rev = bank_.coil(coil::kManConveyorRev);
  c.man_punch_down = bank_.coil(coil::kManPunchDown);
  c.man_punch_up = bank_.coil(coil::kManPunchUp);
  return c;
}

void Plc::poll(int io) {
  IoLink& l = links_[static_cast<std::size_t>(io)];
  if (l.busy) {
    ++l.skipped;
    return;
  }
  l.busy = true;
  ++l.polls;
  l.client->transact(modbus::ReadRequest{FunctionCode::ReadDiscreteInputs, 0, 3},
                     [this, io](const modbus::TransactResult& r) {
                       IoLink& link = links_[static_cast<std::size_t>(io)];
                       const auto* bits = r.ok() ? std::get_if<modbus::ReadBitsResponse>(&*r.response) : nullptr;
                       if (!bits || bits->packed.empty()) {
                         link.busy = false;
                         record_miss(io);
                         return;
                       }
                       const auto v = modbus::unpack_bits(bits->packed, 3);
                       if (io == 0) {
                         image_.barrier_a = v[0];
                         image_.barrier_b = v[1];
                       } else {
                         image_.limit_upper = v[0];
                         image_.limit_lower = v[1];
                       }
                       drive_fault_[io] = v[2];
                       link.misses = 0;
                       evaluate();
                       write_outputs(io);
                     });
}

void Plc::write_outputs(int io) {
  const bool a = io == 0 ? outputs_.conveyor_fwd : outputs_.punch_down;
  const bool b = io == 0 ? outputs_.conveyor_rev : outputs_.punch_up;
  modbus::WriteMultipleCoils w{0, 2, modbus::pack_bits({a, b})};
  links_[static_cast<std::size_t>(io)].client->transact(std::move(w), [this, io](const modbus::TransactResult& r) {
    IoLink& link = links_[static_cast<std::size_t>(io)];
    link.busy = false;
    if (r.ok() && std::holds_alternative<modbus::WriteMultipleResponse>(*r.response))
      link.misses = 0;
    else
      record_miss(io);
  });
}

void Plc::record_miss(int io) {
  ++links_[static_cast<std::size_t>(io)].misses;
  evaluate();
}

void Plc::evaluate() {
  const Commands c = read_commands();
  if (c.manual_mode) stage_started_ = kernel_.now();
  Faults f;
  f.drive_fault = drive_fault_[0] || drive_fault_[1];
  f.io_timeout = links_[0].misses >= config_.timing.watchdog_misses || links_[1].misses >= config_.timing.watchdog_misses;
  f.stage_timeout = kernel_.now() - stage_started_ > config_.timing.stage_timeout;

  const Transition t = state_transition(state_, image_, c, f);
  if (state_ == PlcState::error && t.next == PlcState::initialize) {
    bank_.set_coil(coil::kReset, false);
    bank_.set_coil(coil::kEmergencyStop, false);
    bank_.set_coil(coil::kStartOrder, false);
  } else if (c.reset) {
    bank_.set_coil(coil::kReset, false);
  }
  if (t.next != state_) enter(t.next, t.error);
  outputs_ = actuator_pattern(state_, read_commands());
  publish();
}

void Plc::enter(PlcState next, ErrorCode error) {
  const PlcState from = state_;
  if (from == PlcState::initialize && next == PlcState::goods_to_punch) {
    bank_.set_holding_register(reg::kOrderCount, static_cast<std::uint16_t>(bank_.holding_register(reg::kOrderCount) + 1));
    bank_.set_coil(coil::kStartOrder, false);
  }
  if (from == PlcState::goods_to_origin && next == PlcState::initialize)
    bank_.set_holding_register(reg::kCycleCount, static_cast<std::uint16_t>(bank_.holding_register(reg::kCycleCount) + 1));
  if (next == PlcState::error) {
    error_ = error;
    bank_.set_holding_register(reg::kLastError, static_cast<std::uint16_t>(error));
  }
  state_ = next;
  stage_started_ = kernel_.now();
  json p{{"device", "plc"}, {"from", static_cast<int>(from)}, {"to", static_cast<int>(next)}, {"name", to_string(next)}};
  if (next == PlcState::error) p["error"] = to_string(error);
  kernel_.log().append(kernel_.now(), Category::state, std::move(p));
}

void Plc::publish() {
  bank_.set_holding_register(reg::kState, static_cast<std::uint16_t>(state_));
  bank_.set_holding_register(reg::kDamaged, drive_fault_[0] || drive_fault_[1]);
  bank_.set_discrete_input(input::kSensorBase + 0, image_.barrier_a);
  bank_.set_discrete_input(input::kSensorBase + 1, image_.barrier_b);
  bank_.set_discrete_input(input::kSensorBase + 2, image_.limit_upper);
  bank_.set_discrete_input(input::kSensorBase + 3, image_.limit_lower);
  bank_.set_discrete_input(input::kOutputBase + 0, outputs_.conveyor_fwd);
  bank_.set_discrete_input(input::kOutputBase + 1, outputs_.conveyor_rev);
  bank_.set_discrete_input(input::kOutputBase + 2, outputs_.punch_down);
  bank_.set_discrete_input(input::kOutputBase + 3, outputs_.punch_up);
}

}  // namespace softics::plc

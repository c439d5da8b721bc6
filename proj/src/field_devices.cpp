#include "softics/field_devices.hpp"

namespace softics::devices {

using process::Component;
using process::ConveyorCmd;
using process::PunchCmd;

RemoteIo::RemoteIo(Kernel& kernel, net::Fabric& fabric, net::HostConfig host, process::Process& plant, IoRole role)
    : kernel_(kernel),
      host_(kernel, fabric, std::move(host)),
      plant_(plant),
      role_(role),
      bank_(io_map::kCoils, io_map::kDiscreteInputs, 0, 0,
            modbus::DeviceIdentity{"softics", role == IoRole::conveyor ? "Remote IO conveyor" : "Remote IO punch",
                                   "1.0"}),
      server_(host_, bank_) {}

void RemoteIo::start() {
  timer_.cancel();
  timer_ = kernel_.every(kernel_.now() + plant_.config().tick, plant_.config().tick, [this] { io_cycle(); });
}

void RemoteIo::io_cycle() {
  if (!powered_) return;
  const auto s = plant_.sensors();
  const auto& st = plant_.state();
  const Component mine = role_ == IoRole::conveyor ? Component::conveyor : Component::punch;
  if (role_ == IoRole::conveyor) {
    bank_.set_discrete_input(0, s.barrier_a);
    bank_.set_discrete_input(1, s.barrier_b);
  } else {
    bank_.set_discrete_input(0, s.limit_upper);
    bank_.set_discrete_input(1, s.limit_lower);
  }
  bank_.set_discrete_input(io_map::kDriveFault, st.damaged && st.damaged_component == mine);

  const bool a = bank_.coil(0);
  const bool b = bank_.coil(1);
  const bool conflict = a && b;
  if (conflict && !conflict_)
    kernel_.log().append(kernel_.now(), Category::alarm,
                         json{{"device", host_.name()}, {"warning", "both direction coils set, motor stopped"}});
  conflict_ = conflict;
  if (role_ == IoRole::conveyor)
    plant_.command_conveyor(conflict ? ConveyorCmd::stop : a ? ConveyorCmd::fwd : b ? ConveyorCmd::rev : ConveyorCmd::stop);
  else
    plant_.command_punch(conflict ? PunchCmd::stop : a ? PunchCmd::down : b ? PunchCmd::up : PunchCmd::stop);
}

DisplayState RemoteIo::render_display() const {
  DisplayState d;
  for (std::size_t i = 0; i < 2; ++i) d.inputs.push_back(bank_.discrete_input(i) ? '1' : '0');
  for (std::size_t i = 0; i < io_map::kCoils; ++i) d.coils.push_back(bank_.coil(i) ? '1' : '0');
  d.requests_served = server_.requests_served();
  d.lines = {host_.name(), host_.ip().to_string(), "IN  " + d.inputs, "OUT " + d.coils,
             "REQ " + std::to_string(d.requests_served)};
  return d;
}

void RemoteIo::set_powered(bool on) {
  powered_ = on;
  host_.set_powered(on);
  if (!on) {
    if (role_ == IoRole::conveyor)
      plant_.command_conveyor(ConveyorCmd::stop);
    else
      plant_.command_punch(PunchCmd::stop);
  }
  kernel_.log().append(kernel_.now(), Category::process, json{{"device", host_.name()}, {"powered", on}});
}

}  // namespace softics::devices

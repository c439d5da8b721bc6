#pragma once

#include <string>
#include <vector>

#include "softics/fabric.hpp"
#include "softics/modbus_endpoint.hpp"
#include "softics/process.hpp"

namespace softics::devices {

// IO1 drives the conveyor, IO2 the punch.
enum class IoRole { conveyor, punch };

// Discrete inputs: 0, 1 = the two sensors of the role, 2 = drive fault.
// Coils: 0, 1 = the two motor directions (fwd/rev or down/up).
namespace io_map {
constexpr std::size_t kCoils = 2;
constexpr std::size_t kDiscreteInputs = 3;
constexpr std::size_t kDriveFault = 2;
}  // namespace io_map

struct DisplayState {
  std::vector<std::string> lines;
  std::string inputs;  // e.g. "10"
  std::string coils;
  std::uint64_t requests_served = 0;
};

class RemoteIo {
 public:
  RemoteIo(Kernel& kernel, net::Fabric& fabric, net::HostConfig host, process::Process& plant, IoRole role);

  void start();

  net::Host& host() { return host_; }
  const net::Host& host() const { return host_; }
  IoRole role() const { return role_; }
  modbus::RegisterBank& bank() { return bank_; }
  const modbus::RegisterBank& bank() const { return bank_; }
  std::uint64_t requests_served() const { return server_.requests_served(); }

  // One tick: sensors into discrete inputs, coils onto the motors.
  void io_cycle();
  DisplayState render_display() const;

  // Power loss: stops the motor and the NIC.
  void set_powered(bool on);

 private:
  Kernel& kernel_;
  net::Host host_;
  process::Process& plant_;
  IoRole role_;
  modbus::RegisterBank bank_;
  modbus::ModbusServer server_;
  bool conflict_ = false;
  bool powered_ = true;
  Timer timer_;
};

}  // namespace softics::devices

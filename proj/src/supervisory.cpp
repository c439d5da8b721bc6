#include "softics/supervisory.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "softics/error.hpp"

namespace softics::supervisory {

using modbus::FunctionCode;

const std::vector<std::pair<std::string, std::size_t>> kScadaPoints{
    {"state", plc::reg::kState},           {"order_count", plc::reg::kOrderCount},
    {"cycle_count", plc::reg::kCycleCount}, {"error_code", plc::reg::kLastError},
    {"damaged", plc::reg::kDamaged},
};

json HmiSnapshot::to_json() const {
  return json{{"plc_state", plc_state},
              {"state_name", plc::state_from_value(plc_state) ? plc::to_string(*plc::state_from_value(plc_state)) : ""},
              {"sensors",
               {{"barrier_a", sensors.barrier_a},
                {"barrier_b", sensors.barrier_b},
                {"limit_upper", sensors.limit_upper},
                {"limit_lower", sensors.limit_lower}}},
              {"actuators",
               {{"conveyor_fwd", actuators.conveyor_fwd},
                {"conveyor_rev", actuators.conveyor_rev},
                {"punch_down", actuators.punch_down},
                {"punch_up", actuators.punch_up}}},
              {"order_count", order_count},
              {"cycle_count", cycle_count},
              {"last_error", last_error},
              {"manual_mode", manual_mode},
              {"emergency_stop", emergency_stop},
              {"damaged", damaged},
              {"last_update_us", last_update.count()},
              {"stale", stale},
              {"valid", valid}};
}

Motor motor_from_string(std::string_view s) {
  if (s == "conveyor") return Motor::conveyor;
  if (s == "punch") return Motor::punch;
  throw ArgumentError("unknown motor '" + std::string(s) + "'");
}

MotorDir motor_dir_from_string(std::string_view s) {
  if (s == "fwd") return MotorDir::fwd;
  if (s == "rev") return MotorDir::rev;
  if (s == "down") return MotorDir::down;
  if (s == "up") return MotorDir::up;
  if (s == "stop") return MotorDir::stop;
  throw ArgumentError("unknown direction '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Hmi

Hmi::Hmi(Kernel& kernel, net::Fabric& fabric, net::HostConfig host, HmiConfig config)
    : kernel_(kernel), host_(kernel, fabric, std::move(host)), config_(config), client_(host_, config_.plc, config_.timeout) {}

void Hmi::start() {
  timer_.cancel();
  timer_ = kernel_.every(kernel_.now() + config_.first_poll, config_.poll_period, [this] { poll(); });
}

HmiSnapshot Hmi::snapshot() const {
  HmiSnapshot s = snap_;
  if (!s.valid || kernel_.now() - s.last_update > 2 * config_.poll_period) s.stale = true;
  return s;
}

void Hmi::poll() {
  if (outstanding_ > 0) return;
  ++polls_;
  outstanding_ = 3;
  poll_failed_ = false;
  building_ = snap_;
  client_.transact(modbus::ReadRequest{FunctionCode::ReadHoldingRegisters, 0, plc::reg::kHoldingCount},
                   [this](const modbus::TransactResult& r) {
                     const auto* p = r.ok() ? std::get_if<modbus::ReadRegistersResponse>(&*r.response) : nullptr;
                     if (p && p->values.size() >= plc::reg::kHoldingCount) {
                       building_.plc_state = p->values[plc::reg::kState];
                       building_.order_count = p->values[plc::reg::kOrderCount];
                       building_.cycle_count = p->values[plc::reg::kCycleCount];
                       building_.last_error = p->values[plc::reg::kLastError];
                       building_.damaged = p->values[plc::reg::kDamaged] != 0;
                     } else {
                       poll_failed_ = true;
                     }
                     complete_poll();
                   });
  client_.transact(modbus::ReadRequest{FunctionCode::ReadCoils, 0, plc::coil::kCount},
                   [this](const modbus::TransactResult& r) {
                     const auto* p = r.ok() ? std::get_if<modbus::ReadBitsResponse>(&*r.response) : nullptr;
                     if (p && !p->packed.empty()) {
                       const auto bits = modbus::unpack_bits(p->packed, plc::coil::kCount);
                       building_.emergency_stop = bits[plc::coil::kEmergencyStop];
                       building_.manual_mode = bits[plc::coil::kManualMode];
                     } else {
                       poll_failed_ = true;
                     }
                     complete_poll();
                   });
  client_.transact(modbus::ReadRequest{FunctionCode::ReadDiscreteInputs, 0, plc::input::kCount},
                   [this](const modbus::TransactResult& r) {
                     const auto* p = r.ok() ? std::get_if<modbus::ReadBitsResponse>(&*r.response) : nullptr;
                     if (p && !p->packed.empty()) {
                       const auto b = modbus::unpack_bits(p->packed, plc::input::kCount);
                       building_.sensors = {b[0], b[1], b[2], b[3]};
                       building_.actuators = {b[4], b[5], b[6], b[7]};
                     } else {
                       poll_failed_ = true;
                     }
                     complete_poll();
                   });
}

void Hmi::complete_poll() {
  if (--outstanding_ > 0) return;
  if (poll_failed_) {
    snap_.stale = true;
  } else {
    snap_ = building_;
    snap_.last_update = kernel_.now();
    snap_.stale = false;
    snap_.valid = true;
  }
  log_view();
}

void Hmi::log_view() {
  const HmiSnapshot s = snapshot();
  if (s.plc_state == logged_state_ && s.stale == logged_stale_ && s.damaged == logged_damaged_) return;
  logged_state_ = s.plc_state;
  logged_stale_ = s.stale;
  logged_damaged_ = s.damaged;
  kernel_.log().append(kernel_.now(), Category::view,
                       json{{"device", host_.name()}, {"plc_state", s.plc_state}, {"stale", s.stale}, {"damaged", s.damaged}});
}

void Hmi::write_coil(std::size_t address, bool value, const char* command) {
  kernel_.log().append(kernel_.now(), Category::command, json{{"device", host_.name()}, {"cmd", command}});
  client_.send(modbus::WriteSingleCoil{static_cast<std::uint16_t>(address), value ? modbus::kCoilOn : modbus::kCoilOff});
}

void Hmi::place_order() {
  if (snapshot().stale) throw CommandError("HMI is not connected to the PLC");
  write_coil(plc::coil::kStartOrder, true, "place_order");
}

void Hmi::reset() {
  if (snapshot().stale) throw CommandError("HMI is not connected to the PLC");
  write_coil(plc::coil::kReset, true, "reset");
}

void Hmi::estop() { write_coil(plc::coil::kEmergencyStop, true, "estop"); }

void Hmi::set_manual(bool on) {
  if (snapshot().stale) throw CommandError("HMI is not connected to the PLC");
  write_coil(plc::coil::kManualMode, on, on ? "manual_on" : "manual_off");
}

void Hmi::manual_motor(Motor motor, MotorDir dir) {
  const HmiSnapshot s = snapshot();
  if (s.stale) throw CommandError("HMI is not connected to the PLC");
  if (!s.manual_mode) throw CommandError("manual motor control requires manual mode");
  bool a = false;
  bool b = false;
  if (motor == Motor::conveyor) {
    if (dir == MotorDir::down || dir == MotorDir::up) throw ArgumentError("conveyor moves fwd, rev or stop");
    a = dir == MotorDir::fwd;
    b = dir == MotorDir::rev;
  } else {
    if (dir == MotorDir::fwd || dir == MotorDir::rev) throw ArgumentError("punch moves down, up or stop");
    a = dir == MotorDir::down;
    b = dir == MotorDir::up;
  }
  const auto base = static_cast<std::uint16_t>(motor == Motor::conveyor ? plc::coil::kManConveyorFwd : plc::coil::kManPunchDown);
  static constexpr const char* kDirNames[] = {"fwd", "rev", "down", "up", "stop"};
  kernel_.log().append(kernel_.now(), Category::command,
                       json{{"device", host_.name()},
                            {"cmd", "manual_motor"},
                            {"motor", motor == Motor::conveyor ? "conveyor" : "punch"},
                            {"dir", kDirNames[static_cast<int>(dir)]}});
  client_.send(modbus::WriteMultipleCoils{base, 2, modbus::pack_bits({a, b})});
}

void apply_command(Hmi& hmi, const json& command) {
  if (!command.is_object() || !command.contains("cmd") || !command["cmd"].is_string())
    throw ArgumentError("command needs a string field 'cmd'");
  const std::string cmd = command["cmd"];
  if (cmd == "place_order") {
    hmi.place_order();
  } else if (cmd == "reset") {
    hmi.reset();
  } else if (cmd == "estop") {
    hmi.estop();
  } else if (cmd == "set_manual") {
    if (!command.contains("on") || !command["on"].is_boolean()) throw ArgumentError("set_manual needs boolean 'on'");
    hmi.set_manual(command["on"].get<bool>());
  } else if (cmd == "manual_motor") {
    hmi.manual_motor(motor_from_string(command.value("motor", "")), motor_dir_from_string(command.value("dir", "")));
  } else {
    throw ArgumentError("unknown command '" + cmd + "'");
  }
}

// ---------------------------------------------------------------------------
// Historian

Historian::Historian(std::vector<std::string> points) : points_(std::move(points)) {
  for (const auto& p : points_) series_[p];
}

bool Historian::has_point(std::string_view point) const { return series_.find(point) != series_.end(); }

void Historian::append(HistorianRecord record) {
  auto it = series_.find(record.point);
  if (it == series_.end()) throw ArgumentError("unknown historian point '" + record.point + "'");
  if (!it->second.empty() && record.time < it->second.back().time)
    throw ArgumentError("historian append out of order for '" + record.point + "'");
  it->second.push_back(std::move(record));
}

std::vector<HistorianRecord> Historian::query(std::string_view point, SimTime from, SimTime to) const {
  auto it = series_.find(point);
  if (it == series_.end()) throw ArgumentError("unknown historian point '" + std::string(point) + "'");
  std::vector<HistorianRecord> out;
  for (const auto& r : it->second)
    if (r.time >= from && r.time <= to) out.push_back(r);
  return out;
}

std::vector<HistorianRecord> Historian::all(std::string_view point) const {
  return query(point, SimTime::min(), SimTime::max());
}

std::size_t Historian::rewrite(std::string_view point, SimTime from, SimTime to, double value) {
  auto it = series_.find(point);
  if (it == series_.end()) throw ArgumentError("unknown historian point '" + std::string(point) + "'");
  std::size_t n = 0;
  for (auto& r : it->second) {
    if (r.time >= from && r.time <= to) {
      r.value = value;
      ++n;
    }
  }
  return n;
}

std::size_t Historian::size() const {
  std::size_t n = 0;
  for (const auto& [k, v] : series_) n += v.size();
  return n;
}

void Historian::export_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write historian " + path.string());
  out << "time_s,point,value,quality\n";
  std::vector<HistorianRecord> rows;
  for (const auto& [k, v] : series_) rows.insert(rows.end(), v.begin(), v.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", to_seconds(r.time));
    out << buf << ',' << r.point << ',';
    std::snprintf(buf, sizeof buf, "%.6f", r.value);
    out << buf << ',' << (r.quality == Quality::good ? "good" : "bad") << '\n';
  }
}

// ---------------------------------------------------------------------------
// Scada

namespace {
std::vector<std::string> point_names() {
  std::vector<std::string> out;
  for (const auto& [name, reg] : kScadaPoints) out.push_back(name);
  return out;
}
}  // namespace

Scada::Scada(Kernel& kernel, net::Fabric& fabric, net::HostConfig host, ScadaConfig config)
    : kernel_(kernel),
      host_(kernel, fabric, std::move(host)),
      config_(config),
      client_(host_, config_.plc, config_.timeout),
      historian_(point_names()) {
  host_.listen(config_.admin_port, [this](const net::ConnectionPtr& c) {
    std::weak_ptr<net::TcpConnection> weak = c;
    c->on_data = [this, weak](ByteView data) {
      auto conn = weak.lock();
      if (!conn) return;
      json reply;
      try {
        reply = handle_admin(json::parse(data.begin(), data.end()), conn->remote_ip());
      } catch (const json::exception& e) {
        reply = json{{"ok", false}, {"error", std::string("bad request: ") + e.what()}};
      }
      const std::string body = reply.dump();
      conn->send(Bytes(body.begin(), body.end()));
    };
  });
}

void Scada::start() {
  timer_.cancel();
  timer_ = kernel_.every(kernel_.now() + config_.first_poll, config_.poll_period, [this] { poll(); });
}

void Scada::poll() {
  const SimTime t = kernel_.now();
  for (const auto& [name, address] : kScadaPoints) {
    client_.transact(modbus::ReadRequest{FunctionCode::ReadHoldingRegisters, static_cast<std::uint16_t>(address), 1},
                     [this, t, point = name](const modbus::TransactResult& r) {
                       const auto* p = r.ok() ? std::get_if<modbus::ReadRegistersResponse>(&*r.response) : nullptr;
                       if (p && p->values.size() == 1)
                         historian_.append(HistorianRecord{t, point, static_cast<double>(p->values[0]), Quality::good});
                       else
                         historian_.append(HistorianRecord{t, point, 0.0, Quality::bad});
                     });
  }
}

json Scada::handle_admin(const json& request, Ipv4 from) {
  try {
    const std::string op = request.value("op", "");
    const std::string point = request.value("point", "");
    const SimTime lo = from_seconds(request.value("from_s", 0.0));
    const SimTime hi = request.contains("to_s") ? from_seconds(request.at("to_s").get<double>()) : SimTime::max();
    if (op == "query") {
      json rows = json::array();
      for (const auto& r : historian_.query(point, lo, hi))
        rows.push_back(json{{"t", to_seconds(r.time)}, {"v", r.value}, {"q", r.quality == Quality::good ? "good" : "bad"}});
      return json{{"ok", true}, {"records", rows}};
    }
    if (op == "rewrite") {
      const double value = request.at("value").get<double>();
      const std::size_t n = historian_.rewrite(point, lo, hi, value);
      kernel_.log().append(kernel_.now(), Category::tamper,
                           json{{"target", host_.name()},
                                {"from", from.to_string()},
                                {"point", point},
                                {"value", value},
                                {"records", n}});
      return json{{"ok", true}, {"rewritten", n}};
    }
    return json{{"ok", false}, {"error", "unknown op '" + op + "'"}};
  } catch (const Error& e) {
    return json{{"ok", false}, {"error", e.what()}};
  } catch (const json::exception& e) {
    return json{{"ok", false}, {"error", e.what()}};
  }
}

}  // namespace softics::supervisory

#include "softics/scenario.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>

#include "softics/error.hpp"

namespace softics::scenario {

namespace fs = std::filesystem;
using attacks::Operation;
using attacks::ProfileKind;

namespace {

// Typed access to one JSON object with errors naming the field path.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "$" : path_, "must be an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) const { return j_.at(key); }

  double number(const char* key, double fallback) const {
    if (!j_.contains(key)) return fallback;
    if (!j_[key].is_number()) throw ConfigError(at(key), "must be a number");
    return j_[key].get<double>();
  }
  std::string string(const char* key, const std::string& fallback) const {
    if (!j_.contains(key)) return fallback;
    if (!j_[key].is_string()) throw ConfigError(at(key), "must be a string");
    return j_[key].get<std::string>();
  }
  Ipv4 ip(const char* key, Ipv4 fallback) const {
    if (!j_.contains(key)) return fallback;
    if (!j_[key].is_string()) throw ConfigError(at(key), "must be an IPv4 string");
    auto ip = Ipv4::parse(j_[key].get<std::string>());
    if (!ip) throw ConfigError(at(key), "is not a valid IPv4 address");
    return *ip;
  }
  Duration millis(const char* key, Duration fallback) const {
    if (!j_.contains(key)) return fallback;
    return from_seconds(number(key, 0) / 1000.0);
  }
  Duration seconds(const char* key, Duration fallback) const {
    if (!j_.contains(key)) return fallback;
    return from_seconds(number(key, 0));
  }
  void only(std::initializer_list<const char*> keys) const {
    for (const auto& [k, v] : j_.items()) {
      bool known = false;
      for (const char* allowed : keys) known = known || k == allowed;
      if (!known) throw ConfigError(at(k), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
};

DeviceSpec read_device(const Fields& parent, const char* key, DeviceSpec fallback) {
  if (!parent.has(key)) return fallback;
  Fields f(parent.raw(key), parent.at(key));
  f.only({"ip", "capacity_pps"});
  DeviceSpec d;
  d.ip = f.ip("ip", fallback.ip);
  d.capacity_pps = f.number("capacity_pps", fallback.capacity_pps);
  if (d.capacity_pps < 0) throw ConfigError(f.at("capacity_pps"), "must be >= 0");
  return d;
}

std::optional<fs::path> read_path(const Fields& f, const char* key) {
  if (!f.has(key) || f.raw(key).is_null()) return std::nullopt;
  const std::string s = f.string(key, "");
  if (s.empty()) throw ConfigError(f.at(key), "must not be empty");
  return fs::path(s);
}

json device_json(const DeviceSpec& d) { return json{{"ip", d.ip.to_string()}, {"capacity_pps", d.capacity_pps}}; }

double ms(Duration d) { return static_cast<double>(d.count()) / 1000.0; }

net::HostConfig host_config(const std::string& name, std::uint32_t mac_id, Ipv4 ip, Ipv4 gateway, double capacity) {
  net::HostConfig h;
  h.name = name;
  h.mac = MacAddress::local(mac_id);
  h.ip = ip;
  h.gateway = gateway;
  h.capacity_pps = capacity;
  return h;
}

const ScenarioConfig& validated(const ScenarioConfig& c) {
  c.validate();
  return c;
}

net::FabricConfig fabric_config(const ScenarioConfig& c) {
  net::FabricConfig f;
  f.ports = c.topology.switch_ports;
  f.link_latency = c.topology.link_latency;
  f.wan_latency = c.topology.link_latency;
  return f;
}

// Phase offset in [0, 0.98 period) so supervisory polls do not align with
// the PLC scan and the last poll of a whole-second run still completes.
Duration phase(Kernel& k, Duration period) {
  const auto steps = static_cast<std::uint64_t>(period.count() / 1000) * 49 / 50;
  return Duration{static_cast<std::int64_t>(k.random_below(steps == 0 ? 1 : steps)) * 1000};
}

}  // namespace

ScenarioConfig ScenarioConfig::from_json(const json& j) {
  ScenarioConfig c;
  Fields root(j, "");
  root.only({"name", "seed", "duration_s", "topology", "timing", "process", "attacks", "operator", "outputs",
             "stop_after_damage_s", "description"});
  c.name = root.string("name", c.name);
  if (root.has("seed")) {
    const auto& s = root.raw("seed");
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<std::int64_t>() < 0))
      throw ConfigError("seed", "must be a non-negative 64-bit integer");
    c.seed = s.get<std::uint64_t>();
  }
  c.duration_s = root.number("duration_s", c.duration_s);
  c.stop_after_damage_s = root.number("stop_after_damage_s", c.stop_after_damage_s);

  if (root.has("topology")) {
    Fields t(root.raw("topology"), "topology");
    t.only({"plc", "io1", "io2", "hmi", "scada", "switch_ip", "gateway", "router_wan", "local_attacker",
            "remote_attacker", "switch_ports", "link_latency_us"});
    auto& top = c.topology;
    top.plc = read_device(t, "plc", top.plc);
    top.io1 = read_device(t, "io1", top.io1);
    top.io2 = read_device(t, "io2", top.io2);
    top.hmi = read_device(t, "hmi", top.hmi);
    top.scada = read_device(t, "scada", top.scada);
    top.switch_ip = t.ip("switch_ip", top.switch_ip);
    top.gateway = t.ip("gateway", top.gateway);
    top.router_wan = t.ip("router_wan", top.router_wan);
    top.local_attacker = t.ip("local_attacker", top.local_attacker);
    top.remote_attacker = t.ip("remote_attacker", top.remote_attacker);
    const double ports = t.number("switch_ports", static_cast<double>(top.switch_ports));
    if (ports < 1 || ports > 64 || ports != std::floor(ports)) throw ConfigError("topology.switch_ports", "must be an integer in 1..64");
    top.switch_ports = static_cast<std::size_t>(ports);
    const double lat = t.number("link_latency_us", static_cast<double>(top.link_latency.count()));
    if (lat < 0) throw ConfigError("topology.link_latency_us", "must be >= 0");
    top.link_latency = Duration{static_cast<std::int64_t>(lat)};
  }

  if (root.has("timing")) {
    Fields t(root.raw("timing"), "timing");
    t.only({"io_poll_ms", "hmi_poll_ms", "scada_poll_ms", "stage_timeout_s", "watchdog_misses", "modbus_timeout_ms"});
    c.timing.io_poll_period = t.millis("io_poll_ms", c.timing.io_poll_period);
    c.timing.hmi_poll_period = t.millis("hmi_poll_ms", c.timing.hmi_poll_period);
    c.timing.scada_poll_period = t.millis("scada_poll_ms", c.timing.scada_poll_period);
    c.timing.stage_timeout = t.seconds("stage_timeout_s", c.timing.stage_timeout);
    c.timing.modbus_timeout = t.millis("modbus_timeout_ms", c.timing.modbus_timeout);
    const double wd = t.number("watchdog_misses", c.timing.watchdog_misses);
    if (wd != std::floor(wd)) throw ConfigError("timing.watchdog_misses", "must be an integer");
    c.timing.watchdog_misses = static_cast<int>(wd);
  }

  if (root.has("process")) {
    Fields p(root.raw("process"), "process");
    p.only({"conveyor_length", "belt_speed", "barrier_a_pos", "barrier_b_pos", "barrier_window", "punch_travel",
            "punch_speed", "upper_switch_at", "lower_switch_at", "tick_ms"});
    auto& pc = c.process;
    pc.conveyor_length = p.number("conveyor_length", pc.conveyor_length);
    pc.belt_speed = p.number("belt_speed", pc.belt_speed);
    pc.barrier_a_pos = p.number("barrier_a_pos", pc.barrier_a_pos);
    pc.barrier_b_pos = p.number("barrier_b_pos", pc.barrier_b_pos);
    pc.barrier_window = p.number("barrier_window", pc.barrier_window);
    pc.punch_travel = p.number("punch_travel", pc.punch_travel);
    pc.punch_speed = p.number("punch_speed", pc.punch_speed);
    pc.upper_switch_at = p.number("upper_switch_at", pc.upper_switch_at);
    pc.lower_switch_at = p.number("lower_switch_at", pc.lower_switch_at);
    pc.tick = p.millis("tick_ms", pc.tick);
  }

  if (root.has("attacks")) {
    const auto& arr = root.raw("attacks");
    if (!arr.is_array()) throw ConfigError("attacks", "must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "attacks[" + std::to_string(i) + "]";
      Fields a(arr[i], path);
      a.only({"at_s", "op", "profile", "params", "note"});
      AttackStep step;
      if (!a.has("at_s")) throw ConfigError(a.at("at_s"), "is required");
      step.at_s = a.number("at_s", 0);
      try {
        step.op = attacks::operation_from_string(a.string("op", ""));
      } catch (const ArgumentError& e) {
        throw ConfigError(a.at("op"), e.what());
      }
      try {
        step.profile = attacks::profile_from_string(a.string("profile", "local"));
      } catch (const ArgumentError& e) {
        throw ConfigError(a.at("profile"), e.what());
      }
      if (a.has("params")) {
        if (!a.raw("params").is_object()) throw ConfigError(a.at("params"), "must be an object");
        step.params = a.raw("params");
      }
      c.attacks.push_back(std::move(step));
    }
  }

  if (root.has("operator")) {
    const auto& arr = root.raw("operator");
    if (!arr.is_array()) throw ConfigError("operator", "must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "operator[" + std::to_string(i) + "]";
      Fields o(arr[i], path);
      OperatorStep step;
      if (!o.has("at_s")) throw ConfigError(o.at("at_s"), "is required");
      step.at_s = o.number("at_s", 0);
      step.command = arr[i];
      step.command.erase("at_s");
      if (!step.command.contains("cmd") || !step.command["cmd"].is_string()) throw ConfigError(o.at("cmd"), "is required");
      static const std::set<std::string> known{"place_order", "reset", "estop", "set_manual", "manual_motor"};
      if (!known.count(step.command["cmd"].get<std::string>())) throw ConfigError(o.at("cmd"), "unknown operator command");
      c.operator_steps.push_back(std::move(step));
    }
  }

  if (root.has("outputs")) {
    Fields o(root.raw("outputs"), "outputs");
    o.only({"log", "pcap", "report", "historian", "density"});
    c.outputs.log = read_path(o, "log");
    c.outputs.pcap = read_path(o, "pcap");
    c.outputs.report = read_path(o, "report");
    c.outputs.historian = read_path(o, "historian");
    c.outputs.density = read_path(o, "density");
  }
  c.validate();
  return c;
}

ScenarioConfig ScenarioConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte, "scenario " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void ScenarioConfig::validate() const {
  if (!(duration_s > 0) || duration_s > 86400) throw ConfigError("duration_s", "must be in (0, 86400]");
  timing.validate("timing");
  process.validate("process");
  const auto& t = topology;
  const std::vector<std::pair<std::string, Ipv4>> lan{{"topology.plc.ip", t.plc.ip},
                                                      {"topology.io1.ip", t.io1.ip},
                                                      {"topology.io2.ip", t.io2.ip},
                                                      {"topology.hmi.ip", t.hmi.ip},
                                                      {"topology.scada.ip", t.scada.ip},
                                                      {"topology.switch_ip", t.switch_ip},
                                                      {"topology.gateway", t.gateway},
                                                      {"topology.local_attacker", t.local_attacker}};
  std::set<std::uint32_t> seen;
  for (const auto& [path, ip] : lan) {
    if (!ip.same_subnet(t.gateway, 24)) throw ConfigError(path, ip.to_string() + " is outside the plant subnet");
    const std::uint32_t host = ip.value() & 0xff;
    if (host == 0 || host == 255) throw ConfigError(path, "network or broadcast address");
    if (!seen.insert(ip.value()).second) throw ConfigError(path, "duplicate IP " + ip.to_string());
  }
  if (t.router_wan.same_subnet(t.gateway, 24)) throw ConfigError("topology.router_wan", "must not lie in the plant subnet");
  if (!t.remote_attacker.same_subnet(t.router_wan, 24) || t.remote_attacker == t.router_wan)
    throw ConfigError("topology.remote_attacker", "must be another address in the router's WAN subnet");
  // PLC, two IOs, HMI, SCADA, router and the local attacker.
  if (t.switch_ports < 7) throw ConfigError("topology.switch_ports", "needs at least 7 ports");
  for (std::size_t i = 0; i < attacks.size(); ++i) {
    const std::string path = "attacks[" + std::to_string(i) + "]";
    const auto& a = attacks[i];
    if (a.at_s < 0 || a.at_s > duration_s) throw ConfigError(path + ".at_s", "must lie within [0, duration_s]");
    if (a.profile == ProfileKind::remote && attacks::requires_local(a.op))
      throw ConfigError(path + ".profile",
                        std::string(attacks::to_string(a.op)) + " is not available to a remote attacker");
  }
  for (std::size_t i = 0; i < operator_steps.size(); ++i) {
    const double at = operator_steps[i].at_s;
    if (at < 0 || at > duration_s)
      throw ConfigError("operator[" + std::to_string(i) + "].at_s", "must lie within [0, duration_s]");
  }
}

json ScenarioConfig::to_json() const {
  json atk = json::array();
  for (const auto& a : attacks)
    atk.push_back(json{{"at_s", a.at_s}, {"op", attacks::to_string(a.op)}, {"profile", attacks::to_string(a.profile)}, {"params", a.params}});
  json ops = json::array();
  for (const auto& o : operator_steps) {
    json s = o.command;
    s["at_s"] = o.at_s;
    ops.push_back(s);
  }
  const auto& t = topology;
  json out = json::object();
  auto put = [&](const char* key, const std::optional<fs::path>& p) {
    if (p) out[key] = p->string();
  };
  put("log", outputs.log);
  put("pcap", outputs.pcap);
  put("report", outputs.report);
  put("historian", outputs.historian);
  put("density", outputs.density);
  return json{
      {"name", name},
      {"seed", seed},
      {"duration_s", duration_s},
      {"stop_after_damage_s", stop_after_damage_s},
      {"topology",
       {{"plc", device_json(t.plc)},
        {"io1", device_json(t.io1)},
        {"io2", device_json(t.io2)},
        {"hmi", device_json(t.hmi)},
        {"scada", device_json(t.scada)},
        {"switch_ip", t.switch_ip.to_string()},
        {"gateway", t.gateway.to_string()},
        {"router_wan", t.router_wan.to_string()},
        {"local_attacker", t.local_attacker.to_string()},
        {"remote_attacker", t.remote_attacker.to_string()},
        {"switch_ports", t.switch_ports},
        {"link_latency_us", t.link_latency.count()}}},
      {"timing",
       {{"io_poll_ms", ms(timing.io_poll_period)},
        {"hmi_poll_ms", ms(timing.hmi_poll_period)},
        {"scada_poll_ms", ms(timing.scada_poll_period)},
        {"stage_timeout_s", to_seconds(timing.stage_timeout)},
        {"watchdog_misses", timing.watchdog_misses},
        {"modbus_timeout_ms", ms(timing.modbus_timeout)}}},
      {"process",
       {{"conveyor_length", process.conveyor_length},
        {"belt_speed", process.belt_speed},
        {"barrier_a_pos", process.barrier_a_pos},
        {"barrier_b_pos", process.barrier_b_pos},
        {"barrier_window", process.barrier_window},
        {"punch_travel", process.punch_travel},
        {"punch_speed", process.punch_speed},
        {"upper_switch_at", process.upper_switch_at},
        {"lower_switch_at", process.lower_switch_at},
        {"tick_ms", ms(process.tick)}}},
      {"attacks", atk},
      {"operator", ops},
      {"outputs", out},
  };
}

json RunSummary::to_json() const {
  return json{{"scenario", scenario},
              {"seed", seed},
              {"final_state", final_state},
              {"final_state_name", final_state_name},
              {"damaged", damaged},
              {"damage_reason", damage_reason},
              {"order_count", order_count},
              {"cycle_count", cycle_count},
              {"last_error", last_error},
              {"virtual_s", virtual_s},
              {"wall_s", wall_s},
              {"state_sequence", state_sequence},
              {"digest", digest},
              {"records", records},
              {"attacks", attacks},
              {"impact", impact}};
}

// ---------------------------------------------------------------------------

Testbed::Testbed(ScenarioConfig config)
    : config_(validated(config)),
      kernel_(config_.seed),
      fabric_(kernel_, fabric_config(config_)),
      router_(kernel_, fabric_, host_config("router", 0xfe00, config_.topology.gateway, Ipv4{}, 0), config_.topology.router_wan),
      process_(kernel_, config_.process),
      io1_(kernel_, fabric_,
           host_config("io1", 0x51, config_.topology.io1.ip, config_.topology.gateway, config_.topology.io1.capacity_pps),
           process_, devices::IoRole::conveyor),
      io2_(kernel_, fabric_,
           host_config("io2", 0x52, config_.topology.io2.ip, config_.topology.gateway, config_.topology.io2.capacity_pps),
           process_, devices::IoRole::punch),
      plc_(kernel_, fabric_,
           host_config("plc", 0x30, config_.topology.plc.ip, config_.topology.gateway, config_.topology.plc.capacity_pps),
           plc::PlcConfig{config_.timing, config_.topology.io1.ip, config_.topology.io2.ip}),
      hmi_(kernel_, fabric_,
           host_config("hmi", 0x10, config_.topology.hmi.ip, config_.topology.gateway, config_.topology.hmi.capacity_pps),
           supervisory::HmiConfig{config_.topology.plc.ip, config_.timing.hmi_poll_period, config_.timing.modbus_timeout,
                                  phase(kernel_, config_.timing.hmi_poll_period)}),
      scada_(kernel_, fabric_,
             host_config("scada", 0x20, config_.topology.scada.ip, config_.topology.gateway,
                         config_.topology.scada.capacity_pps),
             supervisory::ScadaConfig{config_.topology.plc.ip, config_.timing.scada_poll_period,
                                      config_.timing.modbus_timeout, phase(kernel_, config_.timing.scada_poll_period)}),
      local_(kernel_, fabric_,
             host_config("attacker-local", 0x66, config_.topology.local_attacker, config_.topology.gateway, 0),
             attacks::AttackerProfile{ProfileKind::local},
             attacks::PlantAccess{&process_, {{config_.topology.io1.ip, &io1_}, {config_.topology.io2.ip, &io2_}}, &hmi_}),
      remote_(kernel_, fabric_,
              host_config("attacker-remote", 0x67, config_.topology.remote_attacker, config_.topology.router_wan, 0),
              attacks::AttackerProfile{ProfileKind::remote}, attacks::PlantAccess{}),
      switch_mgmt_(kernel_, fabric_, host_config("switch", 0x01, config_.topology.switch_ip, config_.topology.gateway, 0)) {
  const net::AttachPoint l2{net::AttachKind::layer2_port};
  fabric_.attach(plc_.host(), l2);
  fabric_.attach(io1_.host(), l2);
  fabric_.attach(io2_.host(), l2);
  fabric_.attach(hmi_.host(), l2);
  fabric_.attach(scada_.host(), l2);
  fabric_.attach(router_.lan(), l2);
  fabric_.attach(local_.host(), l2);
  fabric_.attach(remote_.host(), net::AttachPoint{net::AttachKind::layer3_route});
  fabric_.attach_management(switch_mgmt_);
}

Testbed::~Testbed() = default;

void Testbed::start() {
  json hosts = json::array();
  auto add = [&](net::Host& h, const char* role) {
    hosts.push_back(json{{"name", h.name()}, {"ip", h.ip().to_string()}, {"mac", h.mac().to_string()}, {"role", role}});
  };
  add(plc_.host(), "plc");
  add(io1_.host(), "io");
  add(io2_.host(), "io");
  add(hmi_.host(), "hmi");
  add(scada_.host(), "scada");
  add(router_.lan(), "router");
  add(switch_mgmt_, "switch");
  add(local_.host(), "attacker");
  add(remote_.host(), "attacker");
  kernel_.log().append(kernel_.now(), Category::meta,
                       json{{"scenario", config_.name},
                            {"seed", config_.seed},
                            {"duration_us", end_time().count()},
                            {"topology", hosts}});

  process_.start();
  io1_.start();
  io2_.start();
  plc_.start();
  hmi_.start();
  scada_.start();

  for (std::size_t i = 0; i < config_.operator_steps.size(); ++i) {
    kernel_.at(from_seconds(config_.operator_steps[i].at_s), [this, i] {
      const auto& step = config_.operator_steps[i];
      try {
        supervisory::apply_command(hmi_, step.command);
      } catch (const Error& e) {
        json err{{"operator", i}, {"cmd", step.command.value("cmd", "")}, {"refused", e.what()}};
        kernel_.log().append(kernel_.now(), Category::meta, err);
        step_errors_.push_back(std::move(err));
      }
    });
  }
  for (std::size_t i = 0; i < config_.attacks.size(); ++i) {
    kernel_.at(from_seconds(config_.attacks[i].at_s), [this, i] {
      const auto& step = config_.attacks[i];
      try {
        launch(step.op, step.profile, step.params);
      } catch (const Error& e) {
        json err{{"attack", i}, {"op", attacks::to_string(step.op)}, {"error", e.what()}};
        kernel_.log().append(kernel_.now(), Category::meta, err);
        step_errors_.push_back(std::move(err));
      }
    });
  }
}

attacks::ReportPtr Testbed::launch(Operation op, ProfileKind profile, const json& params) {
  return attacker(profile).run(op, params);
}

bool Testbed::finished() const {
  if (finished_) return true;
  if (kernel_.now() >= end_time()) return true;
  return damaged_at_ && config_.stop_after_damage_s >= 0 && kernel_.now() >= *damaged_at_ + from_seconds(config_.stop_after_damage_s);
}

void Testbed::advance(SimTime until) {
  const auto wall_start = std::chrono::steady_clock::now();
  until = std::min(until, end_time());
  const Duration chunk = std::chrono::milliseconds(100);
  while (kernel_.now() < until && !finished()) {
    SimTime next = std::min(until, kernel_.now() + chunk);
    if (damaged_at_ && config_.stop_after_damage_s >= 0)
      next = std::min(next, *damaged_at_ + from_seconds(config_.stop_after_damage_s));
    kernel_.run_until(next);
    if (!damaged_at_ && process_.state().damaged) damaged_at_ = kernel_.now();
  }
  wall_s_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
}

void Testbed::finish() {
  if (finished_) return;
  local_.finalize();
  remote_.finalize();
  const bool by_damage = damaged_at_ && kernel_.now() < end_time();
  kernel_.log().append(kernel_.now(), Category::meta,
                       json{{"ended_us", kernel_.now().count()}, {"reason", by_damage ? "damage" : "duration"}});
  finished_ = true;
}

RunSummary Testbed::summary() const {
  RunSummary s;
  s.scenario = config_.name;
  s.seed = config_.seed;
  s.final_state = static_cast<int>(plc_.state());
  s.final_state_name = std::string(plc::to_string(plc_.state()));
  s.damaged = process_.state().damaged;
  s.damage_reason = process_.state().damage_reason;
  s.order_count = plc_.order_count();
  s.cycle_count = plc_.cycle_count();
  s.last_error = static_cast<int>(plc_.last_error());
  s.virtual_s = to_seconds(kernel_.now());
  s.wall_s = wall_s_;
  for (const auto& r : kernel_.log().records(Category::state))
    if (r.payload.value("device", "") == "plc") s.state_sequence.push_back(r.payload.value("to", 0));
  s.digest = kernel_.log().digest();
  s.records = kernel_.log().size();
  for (auto* a : {&local_, &remote_})
    for (const auto& r : a->reports()) {
      json j = r->data;
      j["done"] = r->done;
      s.attacks.push_back(std::move(j));
    }
  for (const auto& e : step_errors_) s.attacks.push_back(json{{"error", e}});
  s.impact = analytics::impact_report(kernel_.log()).to_json();
  return s;
}

void Testbed::write_outputs(const fs::path& dir) const {
  auto resolve = [&](const fs::path& p) { return p.is_absolute() ? p : dir / p; };
  auto prepare = [](const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
  };
  const auto& o = config_.outputs;
  if (o.log) {
    const auto p = resolve(*o.log);
    prepare(p);
    kernel_.log().write(p);
  }
  if (o.pcap) {
    const auto p = resolve(*o.pcap);
    net::export_pcap(fabric_.capture(), p);
  }
  if (o.historian) {
    const auto p = resolve(*o.historian);
    prepare(p);
    scada_.historian().export_csv(p);
  }
  const bool want_density = o.density || o.report;
  analytics::DensityResult density;
  if (want_density) density = analytics::packet_rate_density(kernel_.log());
  if (o.density) analytics::export_density_csv(density, resolve(*o.density));
  if (o.report) {
    const auto p = resolve(*o.report);
    prepare(p);
    json latency = json::object();
    for (const auto* client : {"plc", "hmi", "scada"}) {
      analytics::TransactionFilter f;
      f.client = client;
      latency[client] = analytics::latency_stats(kernel_.log(), f).to_json();
    }
    json local_capture{{"frames", local_.capture().size()}};
    json report{{"summary", summary().to_json()},
                {"density", analytics::density_json(density)},
                {"latency", latency},
                {"attacker_capture", local_capture}};
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    out << report.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + p.string());
  }
  if (o.pcap && local_.capture().size() > 0) {
    auto p = resolve(*o.pcap);
    p.replace_filename(p.stem().string() + ".attacker" + p.extension().string());
    net::export_pcap(local_.capture(), p);
  }
}

RunResult run_scenario(const ScenarioConfig& config, std::optional<fs::path> output_dir) {
  Testbed tb(config);
  tb.start();
  tb.run();
  tb.finish();
  if (output_dir) tb.write_outputs(*output_dir);
  RunResult r{tb.summary(), tb.kernel().log()};
  return r;
}

std::vector<std::string> replay_lines(const EventLog& log, std::optional<Category> filter) {
  std::vector<std::string> lines;
  char stamp[32];
  for (std::size_t i = 0; i < log.size(); ++i) {
    const Category c = log.category_at(i);
    if (filter && c != *filter) continue;
    std::snprintf(stamp, sizeof stamp, "%11.6f", to_seconds(log.time_at(i)));
    const LogRecord r = log.record(i);
    const auto& p = r.payload;
    std::string text;
    if (c == Category::state) {
      if (p.value("device", "") != "plc") continue;
      const std::string from = p.contains("from") ? std::to_string(p["from"].get<int>()) : std::string("boot");
      text = "state   " + from + " -> " + std::to_string(p.value("to", 0)) + "  " + p.value("name", "");
      if (p.contains("error")) text += "  (" + p["error"].get<std::string>() + ")";
    } else if (c == Category::attack || c == Category::tamper || c == Category::alarm) {
      text = std::string(to_string(c)) + "  " + canonical_json(p);
    } else if (filter) {
      text = std::string(to_string(c)) + "  " + canonical_json(p);
    } else {
      continue;
    }
    lines.push_back(std::string(stamp) + " s  " + text);
  }
  return lines;
}

}  // namespace softics::scenario

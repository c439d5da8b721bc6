#include "softics/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "softics/analytics.hpp"
#include "softics/error.hpp"

namespace softics::attacks {

using modbus::FunctionCode;
using net::Frame;
using net::PacketKind;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Function codes outside the public range, used to attempt writes to the
// read-only tables. Servers answer them with exception 0x01.
constexpr std::uint8_t kWriteDiscreteInputProbe = 65;
constexpr std::uint8_t kWriteInputRegisterProbe = 66;

Ipv4 ip_param(const json& p, const char* key) {
  if (!p.contains(key) || !p[key].is_string()) throw ArgumentError(std::string("parameter '") + key + "' must be an IP string");
  auto ip = Ipv4::parse(p[key].get<std::string>());
  if (!ip) throw ArgumentError(std::string("parameter '") + key + "' is not a valid IPv4 address");
  return *ip;
}

Duration duration_param(const json& p, const char* key, std::optional<double> fallback = std::nullopt) {
  if (!p.contains(key)) {
    if (fallback) return from_seconds(*fallback);
    throw ArgumentError(std::string("parameter '") + key + "' is required");
  }
  if (!p[key].is_number()) throw ArgumentError(std::string("parameter '") + key + "' must be a number");
  const double s = p[key].get<double>();
  if (s < 0) throw ArgumentError(std::string("parameter '") + key + "' must be >= 0");
  return from_seconds(s);
}

double number_param(const json& p, const char* key) {
  if (!p.contains(key) || !p[key].is_number()) throw ArgumentError(std::string("parameter '") + key + "' must be a number");
  return p[key].get<double>();
}

std::string string_param(const json& p, const char* key) {
  if (!p.contains(key) || !p[key].is_string()) throw ArgumentError(std::string("parameter '") + key + "' must be a string");
  return p[key].get<std::string>();
}

struct PduRange {
  std::uint16_t address = 0;
  std::uint16_t count = 0;
};

std::optional<PduRange> request_range(const modbus::Pdu& pdu) {
  return std::visit(overloaded{
                        [](const modbus::ReadRequest& r) -> std::optional<PduRange> { return PduRange{r.address, r.count}; },
                        [](const modbus::WriteSingleCoil& r) -> std::optional<PduRange> { return PduRange{r.address, 1}; },
                        [](const modbus::WriteSingleRegister& r) -> std::optional<PduRange> { return PduRange{r.address, 1}; },
                        [](const modbus::WriteMultipleCoils& r) -> std::optional<PduRange> { return PduRange{r.address, r.count}; },
                        [](const modbus::WriteMultipleRegisters& r) -> std::optional<PduRange> {
                          return PduRange{r.address, r.count};
                        },
                        [](const auto&) -> std::optional<PduRange> { return std::nullopt; },
                    },
                    pdu);
}

bool carries_bits(const modbus::Pdu& pdu) {
  return std::holds_alternative<modbus::ReadBitsResponse>(pdu) || std::holds_alternative<modbus::WriteSingleCoil>(pdu) ||
         std::holds_alternative<modbus::WriteMultipleCoils>(pdu);
}

bool carries_words(const modbus::Pdu& pdu) {
  return std::holds_alternative<modbus::ReadRegistersResponse>(pdu) ||
         std::holds_alternative<modbus::WriteSingleRegister>(pdu) ||
         std::holds_alternative<modbus::WriteMultipleRegisters>(pdu);
}

void set_packed_bit(std::vector<std::uint8_t>& packed, std::size_t index, bool value) {
  if (index / 8 >= packed.size()) return;
  const auto mask = static_cast<std::uint8_t>(1u << (index % 8));
  if (value)
    packed[index / 8] |= mask;
  else
    packed[index / 8] &= static_cast<std::uint8_t>(~mask);
}

}  // namespace

std::string_view to_string(ProfileKind k) { return k == ProfileKind::remote ? "remote" : "local"; }

ProfileKind profile_from_string(std::string_view s) {
  if (s == "remote") return ProfileKind::remote;
  if (s == "local") return ProfileKind::local;
  throw ArgumentError("unknown attacker profile '" + std::string(s) + "' (expected remote or local)");
}

std::string_view to_string(Operation op) {
  switch (op) {
    case Operation::discover:
      return "discover";
    case Operation::sniff:
      return "sniff";
    case Operation::flood:
      return "flood";
    case Operation::mitm_spoof:
      return "mitm_spoof";
    case Operation::unauthorized_write:
      return "unauthorized_write";
    case Operation::physical_attack:
      return "physical_attack";
    case Operation::disconnect:
      return "disconnect";
    case Operation::hmi_access:
      return "hmi_access";
    case Operation::historian_tamper:
      return "historian_tamper";
  }
  return "discover";
}

const std::vector<Operation>& all_operations() {
  static const std::vector<Operation> ops{Operation::discover,           Operation::sniff,
                                          Operation::flood,              Operation::mitm_spoof,
                                          Operation::unauthorized_write, Operation::physical_attack,
                                          Operation::disconnect,         Operation::hmi_access,
                                          Operation::historian_tamper};
  return ops;
}

bool requires_local(Operation op) {
  switch (op) {
    case Operation::discover:
    case Operation::flood:
    case Operation::unauthorized_write:
    case Operation::historian_tamper:
      return false;
    default:
      return true;
  }
}

Operation operation_from_string(std::string_view s) {
  for (Operation op : all_operations())
    if (to_string(op) == s) return op;
  throw ArgumentError("unknown attack operation '" + std::string(s) + "'");
}

const std::vector<CatalogRow>& catalog() {
  static const std::vector<CatalogRow> rows = [] {
    const json limit_lower_rule = json::array({json{{"src", "192.168.0.52"},
                                                    {"dst", "192.168.0.30"},
                                                    {"direction", "response"},
                                                    {"function", 2},
                                                    {"action", "set_bit"},
                                                    {"address", 1},
                                                    {"value", 0}}});
    const json hmi_rule = json::array({json{{"src", "192.168.0.30"},
                                            {"dst", "192.168.0.10"},
                                            {"direction", "response"},
                                            {"function", 3},
                                            {"action", "set_word"},
                                            {"address", 0},
                                            {"value", 1}}});
    const json scada_rule = json::array({json{{"src", "192.168.0.30"},
                                              {"dst", "192.168.0.20"},
                                              {"direction", "response"},
                                              {"function", 3},
                                              {"action", "set_word"},
                                              {"address", 1},
                                              {"value", 0}}});
    return std::vector<CatalogRow>{
        {0, "Manipulate", "A", "TD", false, true, "---", "low", "high", "easy", Operation::physical_attack,
         json{{"action", "remove_workpiece"}}},
        {0, "Physically Damage", "A", "TD", false, true, "---", "low", "high", "easy", Operation::physical_attack,
         json{{"action", "destroy"}, {"component", "punch"}}},
        {1, "DoS Sensor", "A", "D", true, true, "hping3", "low", "high", "easy", Operation::flood,
         json{{"target", "192.168.0.51"}, {"rate", 3000}, {"duration_s", 1}}},
        {1, "Disconnect IO power/network", "A", "TD", false, true, "---", "low", "high", "easy", Operation::disconnect,
         json{{"device", "192.168.0.51"}, {"mode", "link"}, {"duration_s", 1}}},
        {1, "Manipulate IO physical", "A", "TD", false, true, "---", "low", "high", "easy", Operation::physical_attack,
         json{{"action", "force_sensor"}, {"sensor", "limit_lower"}, {"value", false}, {"duration_s", 1}}},
        {1, "MitM spoof values IO-PLC", "CIA", "STRIDE", false, true, "script", "high", "high", "medium",
         Operation::mitm_spoof,
         json{{"a", "192.168.0.30"}, {"b", "192.168.0.52"}, {"rules", limit_lower_rule}, {"duration_s", 1}}},
        {1, "DoS PLC", "A", "D", true, true, "hping3", "low", "high", "easy", Operation::flood,
         json{{"target", "192.168.0.30"}, {"rate", 4000}, {"duration_s", 1}}},
        {1, "DoS HMI", "A", "D", true, true, "hping", "low", "medium", "easy", Operation::flood,
         json{{"target", "192.168.0.10"}, {"rate", 2000}, {"duration_s", 1}}},
        {1, "Sniffing network", "C", "I", false, true, "Tcpdump", "low", "low", "difficult", Operation::sniff,
         json{{"mode", "mirror"}, {"duration_s", 1}}},
        {1, "MitM spoof values HMI-PLC", "CIA", "STRIDE", false, true, "script", "high", "high", "medium",
         Operation::mitm_spoof, json{{"a", "192.168.0.10"}, {"b", "192.168.0.30"}, {"rules", hmi_rule}, {"duration_s", 1}}},
        {1, "Physical access HMI", "CIA", "STRIDE", false, true, "---", "low", "low", "medium", Operation::hmi_access,
         json{{"cmd", "estop"}}},
        {2, "DoS SCADA", "A", "D", true, true, "hping3", "high", "low", "easy", Operation::flood,
         json{{"target", "192.168.0.20"}, {"rate", 2000}, {"duration_s", 1}}},
        {2, "Sniffing network", "C", "I", false, true, "Tcpdump", "low", "low", "difficult", Operation::sniff,
         json{{"mode", "arp_mitm"}, {"a", "192.168.0.20"}, {"b", "192.168.0.30"}, {"duration_s", 1}}},
        {2, "MitM spoof values SCADA-PLC", "CIA", "STRIDE", false, true, "script", "high", "high", "medium",
         Operation::mitm_spoof,
         json{{"a", "192.168.0.20"}, {"b", "192.168.0.30"}, {"rules", scada_rule}, {"duration_s", 1}}},
        {2, "Attack SCADA", "CIA", "STRIDE", true, true, "script", "medium", "high", "medium",
         Operation::historian_tamper, json{{"scada", "192.168.0.20"}, {"point", "order_count"}, {"value", 0}}},
    };
  }();
  return rows;
}

const CatalogRow* find_row(std::string_view description, int level) {
  for (const auto& r : catalog())
    if (r.description == description && r.level == level) return &r;
  return nullptr;
}

SpoofRule SpoofRule::from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("spoof rule must be an object");
  SpoofRule r;
  if (j.contains("src")) r.src = Ipv4::from_string(j["src"].get<std::string>());
  if (j.contains("dst")) r.dst = Ipv4::from_string(j["dst"].get<std::string>());
  if (j.contains("function")) {
    const int f = j["function"].get<int>();
    if (f < 1 || f > 127) throw ArgumentError("spoof rule function code out of range");
    r.function = static_cast<std::uint8_t>(f);
  }
  const std::string dir = j.value("direction", "response");
  if (dir == "request")
    r.direction = RuleDirection::request;
  else if (dir == "response")
    r.direction = RuleDirection::response;
  else
    throw ArgumentError("spoof rule direction must be request or response");
  const std::string action = j.value("action", "");
  if (action == "set_bit")
    r.action = Action::set_bit;
  else if (action == "set_word")
    r.action = Action::set_word;
  else if (action == "drop")
    r.action = Action::drop;
  else if (action == "delay")
    r.action = Action::delay;
  else
    throw ArgumentError("spoof rule action must be set_bit, set_word, drop or delay");
  if (j.contains("address")) {
    const int a = j["address"].get<int>();
    if (a < 0 || a > 65535) throw ArgumentError("spoof rule address out of range");
    r.address = static_cast<std::uint16_t>(a);
  }
  if (j.contains("value")) {
    const auto& v = j["value"];
    const long long n = v.is_boolean() ? (v.get<bool>() ? 1 : 0) : v.get<long long>();
    if (n < 0 || n > 65535) throw ArgumentError("spoof rule value out of range");
    r.value = static_cast<std::uint16_t>(n);
  }
  if ((r.action == Action::set_bit || r.action == Action::set_word) && !r.address)
    throw ArgumentError("set_bit/set_word rules need an address");
  if (r.action == Action::delay) {
    const double ms = j.value("delay_ms", 0.0);
    if (ms <= 0) throw ArgumentError("delay rules need delay_ms > 0");
    r.delay = from_seconds(ms / 1000.0);
  }
  return r;
}

json SpoofRule::to_json() const {
  static constexpr const char* kActions[] = {"set_bit", "set_word", "drop", "delay"};
  json j{{"direction", direction == RuleDirection::request ? "request" : "response"},
         {"action", kActions[static_cast<int>(action)]}};
  if (src) j["src"] = src->to_string();
  if (dst) j["dst"] = dst->to_string();
  if (function) j["function"] = *function;
  if (address) j["address"] = *address;
  if (action == Action::set_bit || action == Action::set_word) j["value"] = value;
  if (action == Action::delay) j["delay_ms"] = static_cast<double>(delay.count()) / 1000.0;
  return j;
}

// ---------------------------------------------------------------------------
// Attacker

Attacker::Attacker(Kernel& kernel, net::Fabric& fabric, net::HostConfig host, AttackerProfile profile, PlantAccess plant)
    : kernel_(kernel), fabric_(fabric), host_(kernel, fabric, std::move(host)), profile_(profile), plant_(std::move(plant)) {
  host_.set_forwarder([this](const Frame& f) { relay(f); });
  host_.add_tap([this](const Frame& f) {
    if (!capturing_ || !seen_ids_.insert(f.id).second) return;
    capture_.push_back(net::CaptureRecord{kernel_.now(), net::encode_frame(f)});
  });
}

void Attacker::require_local(Operation op) const {
  if (requires_local(op) && profile_.kind != ProfileKind::local)
    throw CapabilityError(std::string(to_string(op)) + " requires a local attacker with direct access to the plant");
}

void Attacker::log_attack(Operation op, json payload) {
  payload["op"] = to_string(op);
  payload["attacker"] = host_.name();
  payload["profile"] = to_string(profile_.kind);
  kernel_.log().append(kernel_.now(), Category::attack, std::move(payload));
}

ReportPtr Attacker::begin(Operation op, json params) {
  auto r = std::make_shared<AttackReport>();
  r->op = op;
  r->data["op"] = to_string(op);
  r->data["profile"] = to_string(profile_.kind);
  r->data["start_s"] = to_seconds(kernel_.now());
  r->data["params"] = params;
  reports_.push_back(r);
  log_attack(op, json{{"phase", "start"}, {"params", std::move(params)}});
  return r;
}

modbus::ModbusClient& Attacker::client_for(Ipv4 target) {
  auto& c = clients_[target];
  if (!c) c = std::make_unique<modbus::ModbusClient>(host_, target, std::chrono::milliseconds(1500));
  return *c;
}

ReportPtr Attacker::run(Operation op, const json& p) {
  if (!p.is_object()) throw ArgumentError("attack parameters must be an object");
  switch (op) {
    case Operation::discover: {
      const std::string subnet = p.value("subnet", "192.168.0.0/24");
      const auto slash = subnet.find('/');
      const Ipv4 base = Ipv4::from_string(subnet.substr(0, slash));
      int prefix = 24;
      if (slash != std::string::npos) {
        try {
          prefix = std::stoi(subnet.substr(slash + 1));
        } catch (const std::exception&) {
          throw ArgumentError("bad subnet prefix in '" + subnet + "'");
        }
      }
      return discover(base, prefix);
    }
    case Operation::sniff: {
      std::optional<std::pair<Ipv4, Ipv4>> pair;
      if (p.contains("a")) pair = std::make_pair(ip_param(p, "a"), ip_param(p, "b"));
      return sniff(p.value("mode", "mirror"), duration_param(p, "duration_s"), pair);
    }
    case Operation::flood:
      return flood(ip_param(p, "target"), number_param(p, "rate"), duration_param(p, "duration_s"));
    case Operation::mitm_spoof: {
      std::vector<SpoofRule> rules;
      if (p.contains("rules")) {
        if (!p["rules"].is_array()) throw ArgumentError("parameter 'rules' must be an array");
        for (const auto& r : p["rules"]) rules.push_back(SpoofRule::from_json(r));
      }
      return mitm_spoof(ip_param(p, "a"), ip_param(p, "b"), std::move(rules), duration_param(p, "duration_s"));
    }
    case Operation::unauthorized_write: {
      const double address = number_param(p, "address");
      const auto& v = p.contains("value") ? p["value"] : json(0);
      const double value = v.is_boolean() ? (v.get<bool>() ? 1.0 : 0.0) : v.get<double>();
      if (address < 0 || address > 65535 || value < 0 || value > 65535)
        throw ArgumentError("address and value must be in 0..65535");
      return unauthorized_write(ip_param(p, "target"), string_param(p, "kind"), static_cast<std::uint16_t>(address),
                                static_cast<std::uint16_t>(value), duration_param(p, "repeat_s", 0.0),
                                duration_param(p, "duration_s", 0.0));
    }
    case Operation::physical_attack: {
      require_local(op);
      const std::string action = string_param(p, "action");
      process::PhysicalAction a;
      if (action == "remove_workpiece")
        a = process::RemoveWorkpiece{};
      else if (action == "place_workpiece")
        a = process::PlaceWorkpiece{};
      else if (action == "force_sensor")
        a = process::ForceSensor{process::sensor_from_string(string_param(p, "sensor")), p.value("value", false),
                                 duration_param(p, "duration_s")};
      else if (action == "destroy")
        a = process::Destroy{process::component_from_string(string_param(p, "component"))};
      else
        throw ArgumentError("unknown physical action '" + action + "'");
      return physical_attack(a);
    }
    case Operation::disconnect:
      return disconnect(ip_param(p, "device"), p.value("mode", "link"), duration_param(p, "duration_s", 0.0));
    case Operation::hmi_access:
      return hmi_access(p);
    case Operation::historian_tamper:
      return historian_tamper(p.contains("scada") ? ip_param(p, "scada") : Ipv4(192, 168, 0, 20),
                              static_cast<std::uint16_t>(p.value("port", 8080)), string_param(p, "point"),
                              p.value("from_s", 0.0), p.value("to_s", 1e12), number_param(p, "value"));
  }
  throw ArgumentError("unknown operation");
}

ReportPtr Attacker::discover(Ipv4 subnet, int prefix, Duration timeout) {
  if (prefix < 16 || prefix > 30) throw ArgumentError("discovery prefix must be within /16../30");
  const std::uint32_t mask = ~std::uint32_t{0} << (32 - prefix);
  const std::uint32_t network = subnet.value() & mask;
  const std::uint32_t hosts = ~mask - 1;
  auto report = begin(Operation::discover, json{{"subnet", Ipv4(network).to_string() + "/" + std::to_string(prefix)}});
  auto found = std::make_shared<std::vector<DiscoveredServer>>();
  auto remaining = std::make_shared<std::uint32_t>(0);
  auto finish_one = [this, report, found, remaining] {
    if (--*remaining > 0) return;
    std::sort(found->begin(), found->end(), [](const auto& a, const auto& b) { return a.ip < b.ip; });
    json servers = json::array();
    for (const auto& s : *found)
      servers.push_back(json{{"ip", s.ip.to_string()},
                             {"unit_id", s.unit_id},
                             {"identified", s.identified},
                             {"vendor", s.identity.vendor},
                             {"product", s.identity.product},
                             {"revision", s.identity.revision}});
    report->data["servers"] = servers;
    report->done = true;
    log_attack(Operation::discover, json{{"phase", "end"}, {"servers", servers.size()}});
  };
  std::vector<Ipv4> targets;
  for (std::uint32_t i = 1; i <= hosts; ++i) {
    const Ipv4 ip(network + i);
    if (ip != host_.ip()) targets.push_back(ip);
  }
  *remaining = static_cast<std::uint32_t>(targets.size());
  if (targets.empty()) {
    ++*remaining;
    finish_one();
    return report;
  }
  for (const Ipv4 ip : targets) {
    scan_clients_.push_back(std::make_unique<modbus::ModbusClient>(host_, ip, timeout));
    modbus::ModbusClient* client = scan_clients_.back().get();
    client->transact(modbus::ReadDeviceIdRequest{1, 0}, [client, ip, found, finish_one](const modbus::TransactResult& r) {
      if (!r.ok()) {
        finish_one();
        return;
      }
      if (const auto* id = std::get_if<modbus::ReadDeviceIdResponse>(&*r.response)) {
        DiscoveredServer s{ip, 1, {}, true};
        for (const auto& o : id->objects) {
          if (o.id == 0) s.identity.vendor = o.value;
          if (o.id == 1) s.identity.product = o.value;
          if (o.id == 2) s.identity.revision = o.value;
        }
        found->push_back(std::move(s));
        finish_one();
        return;
      }
      // Device identification unsupported: confirm with a plain read.
      client->transact(modbus::ReadRequest{FunctionCode::ReadCoils, 0, 1},
                       [ip, found, finish_one](const modbus::TransactResult& r2) {
                         if (r2.ok()) found->push_back(DiscoveredServer{ip, 1, {}, false});
                         finish_one();
                       });
    });
  }
  return report;
}

ReportPtr Attacker::sniff(const std::string& mode, Duration duration, std::optional<std::pair<Ipv4, Ipv4>> pair) {
  require_local(Operation::sniff);
  host_.require_layer2("sniffing");
  if (duration.count() <= 0) throw ArgumentError("sniff duration must be > 0");
  if (mode == "mirror") {
    const auto port = fabric_.port_of(host_);
    if (!port) throw CapabilityError("sniffing needs a switch port");
    std::vector<int> sources;
    for (int i = 0; i < static_cast<int>(fabric_.port_count()); ++i)
      if (i != *port) sources.push_back(i);
    fabric_.set_mirror(sources, *port);
    auto report = begin(Operation::sniff, json{{"mode", mode}, {"duration_s", to_seconds(duration)}});
    const std::size_t first = capture_.size();
    capturing_ = true;
    kernel_.after(duration, [this, report, first] {
      fabric_.clear_mirror();
      capturing_ = false;
      report->data["frames"] = capture_.size() - first;
      report->done = true;
      log_attack(Operation::sniff, json{{"phase", "end"}, {"frames", capture_.size() - first}});
    });
    return report;
  }
  if (mode == "arp_mitm") {
    if (!pair) throw ArgumentError("arp_mitm sniffing needs endpoints 'a' and 'b'");
    auto s = std::make_shared<MitmSession>();
    s->a = pair->first;
    s->b = pair->second;
    s->capture = true;
    s->report = begin(Operation::sniff, json{{"mode", mode},
                                             {"a", s->a.to_string()},
                                             {"b", s->b.to_string()},
                                             {"duration_s", to_seconds(duration)}});
    start_mitm(s, duration);
    return s->report;
  }
  throw ArgumentError("sniff mode must be mirror or arp_mitm");
}

ReportPtr Attacker::flood(Ipv4 target, double rate, Duration duration) {
  if (!(rate > 0)) throw ArgumentError("flood rate must be > 0");
  if (duration.count() <= 0) throw ArgumentError("flood duration must be > 0");
  auto s = std::make_shared<FloodSession>();
  s->target = target;
  s->rate = rate;
  s->start = kernel_.now();
  s->end = kernel_.now() + duration;
  if (auto* h = fabric_.find_host(target)) s->target_drops_before = h->stats().queue_drops;
  s->report = begin(Operation::flood,
                    json{{"target", target.to_string()}, {"rate", rate}, {"duration_s", to_seconds(duration)}});
  floods_.push_back(s);
  const auto total = static_cast<std::uint64_t>(std::floor(rate * to_seconds(duration) + 1e-9));
  auto send_next = std::make_shared<std::function<void()>>();
  *send_next = [this, s, total, send_next] {
    net::TcpSegment seg;
    seg.src_port = flood_port_;
    flood_port_ = flood_port_ == 65535 ? 1024 : static_cast<std::uint16_t>(flood_port_ + 1);
    seg.dst_port = 0;
    seg.seq = static_cast<std::uint32_t>(s->sent);
    seg.flags = 0;
    seg.window = 512;
    host_.send_segment(s->target, std::move(seg), PacketKind::flood);
    ++s->sent;
    if (s->sent < total) {
      const auto at = s->start + Duration{static_cast<std::int64_t>(std::llround(static_cast<double>(s->sent) * 1e6 / s->rate))};
      kernel_.at(at, *send_next);
    } else {
      kernel_.at(s->end, [this, s, send_next] {
        *send_next = nullptr;
        s->report->data["sent"] = s->sent;
        s->report->data["achieved_rate"] = static_cast<double>(s->sent) / to_seconds(s->end - s->start);
        if (auto* h = fabric_.find_host(s->target)) {
          s->report->data["target_queue_drops"] = h->stats().queue_drops - s->target_drops_before;
          s->report->data["target_max_queue"] = h->stats().max_queue;
        }
        s->report->done = true;
        log_attack(Operation::flood, json{{"phase", "end"}, {"sent", s->sent}});
      });
    }
  };
  if (total == 0) {
    kernel_.at(s->end, [this, s] {
      s->report->data["sent"] = 0;
      s->report->done = true;
      log_attack(Operation::flood, json{{"phase", "end"}, {"sent", 0}});
    });
  } else {
    (*send_next)();
  }
  return s->report;
}

void Attacker::send_arp_reply(MacAddress to_mac, Ipv4 to_ip, Ipv4 claimed, MacAddress claimed_mac) {
  Frame f;
  f.src = host_.mac();
  f.dst = to_mac;
  f.kind = PacketKind::arp;
  f.payload = net::ArpMessage{net::ArpMessage::kReply, claimed_mac, claimed, to_mac, to_ip};
  host_.send_frame(std::move(f));
}

void Attacker::poison_arp(Ipv4 victim, Ipv4 claimed) {
  host_.require_layer2("ARP poisoning");
  host_.resolve(victim, [this, victim, claimed](std::optional<MacAddress> mac) {
    if (!mac) return;
    send_arp_reply(*mac, victim, claimed, host_.mac());
    log_attack(Operation::mitm_spoof, json{{"phase", "poison"}, {"victim", victim.to_string()}, {"claimed", claimed.to_string()}});
  });
}

ReportPtr Attacker::mitm_spoof(Ipv4 a, Ipv4 b, std::vector<SpoofRule> rules, Duration duration) {
  require_local(Operation::mitm_spoof);
  host_.require_layer2("ARP-based man-in-the-middle");
  if (duration.count() <= 0) throw ArgumentError("mitm duration must be > 0");
  auto s = std::make_shared<MitmSession>();
  s->a = a;
  s->b = b;
  s->rules = std::move(rules);
  json rj = json::array();
  for (const auto& r : s->rules) rj.push_back(r.to_json());
  s->report = begin(Operation::mitm_spoof,
                    json{{"a", a.to_string()}, {"b", b.to_string()}, {"rules", rj}, {"duration_s", to_seconds(duration)}});
  s->report->data["altered"] = json::array();
  start_mitm(s, duration);
  return s->report;
}

void Attacker::start_mitm(std::shared_ptr<MitmSession> s, Duration duration) {
  mitm_.push_back(s);
  host_.resolve(s->a, [this, s, duration](std::optional<MacAddress> ma) {
    host_.resolve(s->b, [this, s, duration, ma](std::optional<MacAddress> mb) {
      if (!ma || !mb) {
        s->report->data["error"] = "could not resolve both endpoints";
        s->report->done = true;
        log_attack(s->report->op, json{{"phase", "end"}, {"error", "unresolved endpoints"}});
        return;
      }
      s->mac_a = *ma;
      s->mac_b = *mb;
      s->active = true;
      auto poison = [this, s] {
        if (!s->active) return;
        send_arp_reply(s->mac_a, s->a, s->b, host_.mac());
        send_arp_reply(s->mac_b, s->b, s->a, host_.mac());
      };
      poison();
      log_attack(s->report->op, json{{"phase", "poison"}, {"a", s->a.to_string()}, {"b", s->b.to_string()}});
      s->refresh = kernel_.every(kernel_.now() + std::chrono::seconds(10), std::chrono::seconds(10), poison);
      kernel_.after(duration, [this, s] {
        s->active = false;
        s->refresh.cancel();
        // Restore the true bindings.
        send_arp_reply(s->mac_a, s->a, s->b, s->mac_b);
        send_arp_reply(s->mac_b, s->b, s->a, s->mac_a);
        s->report->done = true;
        json end{{"phase", "end"}};
        if (s->report->data.contains("altered")) end["altered"] = s->report->data["altered"].size();
        if (s->capture) {
          s->report->data["frames"] = capture_.size();
          end["frames"] = capture_.size();
        }
        log_attack(s->report->op, std::move(end));
      });
    });
  });
}

void Attacker::relay(const Frame& frame) {
  const auto* ip = frame.ip();
  if (!ip) return;
  std::shared_ptr<MitmSession> session;
  for (auto& s : mitm_) {
    if ((ip->src == s->a && ip->dst == s->b) || (ip->src == s->b && ip->dst == s->a)) session = s;
  }
  MacAddress dst_mac;
  if (session && session->mac_a != MacAddress{}) {
    dst_mac = ip->dst == session->a ? session->mac_a : session->mac_b;
  } else if (auto m = host_.arp_lookup(ip->dst)) {
    dst_mac = *m;
  } else {
    return;
  }
  Frame out = frame;
  out.src = host_.mac();
  out.dst = dst_mac;
  out.relayed = true;
  std::optional<Duration> delay;
  bool drop = false;
  if (session && session->active) {
    if (session->capture) capture_.push_back(net::CaptureRecord{kernel_.now(), net::encode_frame(frame)});
    if (!session->rules.empty()) rewrite(*session, out, delay, drop);
  }
  if (drop) return;
  if (delay) {
    kernel_.after(*delay, [this, out]() mutable { host_.send_frame(std::move(out)); });
  } else {
    host_.send_frame(std::move(out));
  }
}

bool Attacker::rewrite(MitmSession& s, Frame& frame, std::optional<Duration>& delay, bool& drop) {
  auto* ip = frame.ip();
  auto& payload = ip->tcp.payload;
  if (payload.empty()) return false;
  RuleDirection dir;
  if (ip->tcp.dst_port == modbus::kPort)
    dir = RuleDirection::request;
  else if (ip->tcp.src_port == modbus::kPort)
    dir = RuleDirection::response;
  else
    return false;
  modbus::Adu adu;
  try {
    adu = modbus::decode_adu(payload, dir == RuleDirection::request ? modbus::Direction::request : modbus::Direction::response);
  } catch (const Error&) {
    return false;
  }
  const std::uint16_t tid = adu.header.transaction_id;
  std::optional<PduRange> range;
  if (dir == RuleDirection::request) {
    requests_[TidKey{ip->src.value(), ip->dst.value(), tid}] = adu.pdu;
    range = request_range(adu.pdu);
  } else {
    auto it = requests_.find(TidKey{ip->dst.value(), ip->src.value(), tid});
    if (it != requests_.end()) {
      range = request_range(it->second);
      requests_.erase(it);
    }
  }
  const std::uint8_t fc = modbus::function_byte(adu.pdu) & 0x7f;
  for (const auto& rule : s.rules) {
    if (rule.direction != dir) continue;
    if (rule.src && *rule.src != ip->src) continue;
    if (rule.dst && *rule.dst != ip->dst) continue;
    if (rule.function && *rule.function != fc) continue;
    if (rule.address) {
      if (!range || *rule.address < range->address || *rule.address >= range->address + range->count) continue;
    }
    if (rule.action == SpoofRule::Action::set_bit && !carries_bits(adu.pdu)) continue;
    if (rule.action == SpoofRule::Action::set_word && !carries_words(adu.pdu)) continue;

    const std::string before = modbus::describe(adu.pdu);
    json altered{{"t", to_seconds(kernel_.now())},
                 {"tid", tid},
                 {"fc", fc},
                 {"src", ip->src.to_string()},
                 {"dst", ip->dst.to_string()},
                 {"rule", rule.to_json()}};
    if (rule.action == SpoofRule::Action::drop) {
      drop = true;
      altered["effect"] = "dropped";
    } else if (rule.action == SpoofRule::Action::delay) {
      delay = rule.delay;
      altered["effect"] = "delayed";
    } else {
      const std::size_t index = *rule.address - (range ? range->address : 0);
      const bool bit = rule.value != 0;
      std::visit(overloaded{
                     [&](modbus::ReadBitsResponse& p) { set_packed_bit(p.packed, index, bit); },
                     [&](modbus::WriteMultipleCoils& p) { set_packed_bit(p.packed, index, bit); },
                     [&](modbus::WriteSingleCoil& p) { p.raw_value = bit ? modbus::kCoilOn : modbus::kCoilOff; },
                     [&](modbus::ReadRegistersResponse& p) {
                       if (index < p.values.size()) p.values[index] = rule.value;
                     },
                     [&](modbus::WriteMultipleRegisters& p) {
                       if (index < p.values.size()) p.values[index] = rule.value;
                     },
                     [&](modbus::WriteSingleRegister& p) { p.value = rule.value; },
                     [](auto&) {},
                 },
                 adu.pdu);
      const Bytes rewritten = modbus::encode_adu(adu.header, adu.pdu);
      if (rewritten == payload) return false;
      payload = rewritten;
      altered["effect"] = "rewritten";
      altered["before"] = before;
      altered["after"] = modbus::describe(adu.pdu);
    }
    s.report->data["altered"].push_back(altered);
    log_attack(Operation::mitm_spoof, json{{"phase", "alter"}, {"altered", std::move(altered)}});
    return true;
  }
  return false;
}

ReportPtr Attacker::unauthorized_write(Ipv4 target, const std::string& kind, std::uint16_t address, std::uint16_t value,
                                       Duration repeat, Duration duration) {
  modbus::Pdu pdu;
  if (kind == "coil") {
    pdu = modbus::WriteSingleCoil{address, value ? modbus::kCoilOn : modbus::kCoilOff};
  } else if (kind == "register") {
    pdu = modbus::WriteSingleRegister{address, value};
  } else if (kind == "discrete_input" || kind == "input_register") {
    const std::uint8_t fc = kind == "discrete_input" ? kWriteDiscreteInputProbe : kWriteInputRegisterProbe;
    pdu = modbus::OpaquePdu{fc, {static_cast<std::uint8_t>(address >> 8), static_cast<std::uint8_t>(address),
                                 static_cast<std::uint8_t>(value >> 8), static_cast<std::uint8_t>(value)}};
  } else {
    throw ArgumentError("write kind must be coil, register, discrete_input or input_register");
  }
  if (repeat.count() < 0 || duration.count() < 0) throw ArgumentError("repeat and duration must be >= 0");
  auto report = begin(Operation::unauthorized_write, json{{"target", target.to_string()},
                                                          {"kind", kind},
                                                          {"address", address},
                                                          {"value", value}});
  report->data["results"] = json::array();
  const SimTime end = kernel_.now() + duration;
  auto issue = std::make_shared<std::function<void()>>();
  *issue = [this, target, pdu, report, repeat, end, issue] {
    client_for(target).transact(pdu, [this, report, repeat, end, issue](const modbus::TransactResult& r) {
      json res{{"status", modbus::to_string(r.status)}};
      if (r.response) {
        if (const auto* e = std::get_if<modbus::ExceptionResponse>(&*r.response)) res["exception"] = static_cast<int>(e->code);
      }
      if (report->data["results"].size() < 32) report->data["results"].push_back(res);
      const bool again = repeat.count() > 0 && kernel_.now() + repeat <= end;
      if (again) {
        kernel_.after(repeat, *issue);
      } else {
        report->data["writes"] = report->data["results"].size();
        report->done = true;
        log_attack(Operation::unauthorized_write, json{{"phase", "end"}, {"last", res}});
        *issue = nullptr;
      }
    });
  };
  (*issue)();
  return report;
}

ReportPtr Attacker::physical_attack(const process::PhysicalAction& action) {
  require_local(Operation::physical_attack);
  if (!plant_.process) throw ArgumentError("no process attached");
  auto report = begin(Operation::physical_attack, json{{"action", process::describe(action)}});
  plant_.process->inject(action);
  report->data["impact"] = "high";
  report->data["detection"] = "easy";
  report->done = true;
  return report;
}

ReportPtr Attacker::disconnect(Ipv4 device, const std::string& mode, Duration duration) {
  require_local(Operation::disconnect);
  net::Host* h = fabric_.find_host(device);
  if (!h) throw ArgumentError("no device at " + device.to_string());
  if (mode == "link") {
    const auto port = fabric_.port_of(*h);
    if (!port) throw ArgumentError(device.to_string() + " has no switch port");
    auto report = begin(Operation::disconnect, json{{"device", device.to_string()}, {"mode", mode}, {"duration_s", to_seconds(duration)}});
    fabric_.set_link_up(*port, false);
    if (duration.count() > 0) {
      kernel_.after(duration, [this, report, p = *port] {
        fabric_.set_link_up(p, true);
        report->done = true;
        log_attack(Operation::disconnect, json{{"phase", "end"}});
      });
    } else {
      report->done = true;
    }
    return report;
  }
  if (mode == "power") {
    auto it = plant_.ios.find(device);
    if (it == plant_.ios.end()) throw ArgumentError("power disconnect applies to remote IOs only");
    devices::RemoteIo* io = it->second;
    auto report = begin(Operation::disconnect, json{{"device", device.to_string()}, {"mode", mode}, {"duration_s", to_seconds(duration)}});
    io->set_powered(false);
    if (duration.count() > 0) {
      kernel_.after(duration, [this, report, io] {
        io->set_powered(true);
        report->done = true;
        log_attack(Operation::disconnect, json{{"phase", "end"}});
      });
    } else {
      report->done = true;
    }
    return report;
  }
  throw ArgumentError("disconnect mode must be link or power");
}

ReportPtr Attacker::hmi_access(const json& command) {
  require_local(Operation::hmi_access);
  if (!plant_.hmi) throw ArgumentError("no HMI attached");
  auto report = begin(Operation::hmi_access, command);
  try {
    supervisory::apply_command(*plant_.hmi, command);
    report->data["accepted"] = true;
  } catch (const CommandError& e) {
    report->data["accepted"] = false;
    report->data["error"] = e.what();
  }
  report->done = true;
  return report;
}

ReportPtr Attacker::historian_tamper(Ipv4 scada, std::uint16_t port, const std::string& point, double from_s,
                                     double to_s, double value) {
  auto report = begin(Operation::historian_tamper,
                      json{{"scada", scada.to_string()}, {"point", point}, {"from_s", from_s}, {"value", value}});
  json body{{"op", "rewrite"}, {"point", point}, {"from_s", from_s}, {"value", value}};
  if (to_s < 1e11) body["to_s"] = to_s;
  const std::string text = body.dump();
  auto conn = host_.connect(scada, port);
  auto finished = std::make_shared<bool>(false);
  auto finish = [this, report, finished](json result) {
    if (*finished) return;
    *finished = true;
    report->data["result"] = result;
    report->done = true;
    log_attack(Operation::historian_tamper, json{{"phase", "end"}, {"result", std::move(result)}});
  };
  conn->on_established = [conn_w = std::weak_ptr<net::TcpConnection>(conn), text] {
    if (auto c = conn_w.lock()) c->send(Bytes(text.begin(), text.end()));
  };
  conn->on_data = [finish, conn_w = std::weak_ptr<net::TcpConnection>(conn)](ByteView data) {
    json reply = json::parse(data.begin(), data.end(), nullptr, false);
    finish(reply.is_discarded() ? json{{"ok", false}, {"error", "unparseable reply"}} : reply);
    if (auto c = conn_w.lock()) c->reset();
  };
  conn->on_closed = [finish](const std::string& reason) { finish(json{{"ok", false}, {"error", reason}}); };
  kernel_.after(std::chrono::seconds(3), [finish, conn] {
    finish(json{{"ok", false}, {"error", "timeout"}});
    conn->abandon("timeout");
  });
  return report;
}

void Attacker::finalize() {
  for (const auto& s : floods_) {
    analytics::TransactionFilter during;
    during.server = s->target.to_string();
    during.from = s->start;
    during.to = s->end;
    during.successful_only = false;
    analytics::TransactionFilter before = during;
    before.from = SimTime{0};
    before.to = s->start;
    before.successful_only = true;
    s->report->data["latency_before"] = analytics::latency_stats(kernel_.log(), before).to_json();
    s->report->data["latency_during"] = analytics::latency_stats(kernel_.log(), during).to_json();
    if (auto* h = fabric_.find_host(s->target)) {
      analytics::TransactionFilter as_client;
      as_client.client = h->name();
      as_client.from = s->start;
      as_client.to = s->end;
      s->report->data["target_client_latency"] = analytics::latency_stats(kernel_.log(), as_client).to_json();
      std::size_t failed = 0;
      std::size_t total = 0;
      json series = json::array();
      const auto& log = kernel_.log();
      for (std::size_t i = 0; i < log.size(); ++i) {
        if (log.category_at(i) != Category::transaction) continue;
        const SimTime t = log.time_at(i);
        if (t < s->start || t > s->end + std::chrono::seconds(1)) continue;
        const LogRecord r = log.record(i);
        const bool involved = r.payload.value("server", "") == s->target.to_string() || r.payload.value("client", "") == h->name();
        if (!involved) continue;
        ++total;
        const bool ok = r.payload.value("status", "") == "ok";
        failed += !ok;
        if (series.size() < 400)
          series.push_back(json{{"t", to_seconds(t)}, {"latency_ms", r.payload.value("latency_us", 0) / 1000.0}, {"ok", ok}});
      }
      s->report->data["target_transactions"] = total;
      s->report->data["target_failed_transactions"] = failed;
      s->report->data["latency_series"] = series;
    }
  }
}

}  // namespace softics::attacks

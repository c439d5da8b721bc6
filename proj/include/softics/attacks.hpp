#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "softics/fabric.hpp"
#include "softics/field_devices.hpp"
#include "softics/modbus_endpoint.hpp"
#include "softics/process.hpp"
#include "softics/supervisory.hpp"

namespace softics::attacks {

enum class ProfileKind { remote, local };
std::string_view to_string(ProfileKind k);
ProfileKind profile_from_string(std::string_view s);

struct AttackerProfile {
  ProfileKind kind = ProfileKind::local;
  net::AttachKind attach() const {
    return kind == ProfileKind::remote ? net::AttachKind::layer3_route : net::AttachKind::layer2_port;
  }
};

// Operations the toolkit exposes. Their names double as scenario `op` values.
enum class Operation {
  discover,
  sniff,
  flood,
  mitm_spoof,
  unauthorized_write,
  physical_attack,
  disconnect,
  hmi_access,
  historian_tamper,
};
std::string_view to_string(Operation op);
Operation operation_from_string(std::string_view s);
const std::vector<Operation>& all_operations();
// Operations that need direct plant or layer-2 access.
bool requires_local(Operation op);

// One row of the attack evaluation table.
struct CatalogRow {
  int level;
  std::string description;
  std::string cia;
  std::string stride;
  bool remote;
  bool local;
  std::string tool;
  std::string skill;
  std::string impact;
  std::string detection;
  Operation op;
  json params;  // representative parameters for exercising the row
};
const std::vector<CatalogRow>& catalog();
const CatalogRow* find_row(std::string_view description, int level);

enum class RuleDirection { request, response };

// First-match rewrite rule for relayed Modbus traffic.
struct SpoofRule {
  std::optional<Ipv4> src;
  std::optional<Ipv4> dst;
  std::optional<std::uint8_t> function;
  RuleDirection direction = RuleDirection::response;
  enum class Action { set_bit, set_word, drop, delay } action = Action::set_bit;
  // Bit or register address the rule targets; matches PDUs whose address
  // range covers it. Unset matches any PDU.
  std::optional<std::uint16_t> address;
  std::uint16_t value = 0;
  Duration delay{0};

  static SpoofRule from_json(const json& j);
  json to_json() const;
};

// Handles the toolkit needs beyond the network.
struct PlantAccess {
  process::Process* process = nullptr;
  std::map<Ipv4, devices::RemoteIo*> ios;
  supervisory::Hmi* hmi = nullptr;
};

struct DiscoveredServer {
  Ipv4 ip;
  std::uint8_t unit_id = 1;
  modbus::DeviceIdentity identity;
  bool identified = false;
};

// Live report of one attack; `done` flips when the operation finishes.
struct AttackReport {
  Operation op;
  json data = json::object();
  bool done = false;
};
using ReportPtr = std::shared_ptr<AttackReport>;

class Attacker {
 public:
  Attacker(Kernel& kernel, net::Fabric& fabric, net::HostConfig host, AttackerProfile profile, PlantAccess plant);

  net::Host& host() { return host_; }
  const AttackerProfile& profile() const { return profile_; }

  // Dispatch by name with JSON parameters. Throws CapabilityError or
  // ArgumentError before anything is emitted.
  ReportPtr run(Operation op, const json& params);

  ReportPtr discover(Ipv4 subnet, int prefix, Duration timeout = std::chrono::milliseconds(1500));
  ReportPtr sniff(const std::string& mode, Duration duration, std::optional<std::pair<Ipv4, Ipv4>> pair = {});
  ReportPtr flood(Ipv4 target, double rate_pps, Duration duration);
  ReportPtr mitm_spoof(Ipv4 a, Ipv4 b, std::vector<SpoofRule> rules, Duration duration);
  ReportPtr unauthorized_write(Ipv4 target, const std::string& kind, std::uint16_t address, std::uint16_t value,
                               Duration repeat = Duration{0}, Duration duration = Duration{0});
  ReportPtr physical_attack(const process::PhysicalAction& action);
  ReportPtr disconnect(Ipv4 device, const std::string& mode, Duration duration);
  ReportPtr hmi_access(const json& command);
  ReportPtr historian_tamper(Ipv4 scada, std::uint16_t port, const std::string& point, double from_s, double to_s,
                             double value);

  // Emits an ARP reply telling `victim` that `claimed` lives at our MAC.
  void poison_arp(Ipv4 victim, Ipv4 claimed);

  const std::vector<ReportPtr>& reports() const { return reports_; }
  const net::Capture& capture() const { return capture_; }

  // Completes reports that depend on the whole run (flood latency series).
  void finalize();

 private:
  struct MitmSession {
    Ipv4 a;
    Ipv4 b;
    MacAddress mac_a;
    MacAddress mac_b;
    std::vector<SpoofRule> rules;
    bool active = false;
    bool capture = false;
    ReportPtr report;
    Timer refresh;
  };
  struct FloodSession {
    Ipv4 target;
    double rate;
    SimTime start;
    SimTime end;
    std::uint64_t sent = 0;
    std::uint64_t target_drops_before = 0;
    ReportPtr report;
  };
  using TidKey = std::tuple<std::uint32_t, std::uint32_t, std::uint16_t>;

  ReportPtr begin(Operation op, json params);
  void require_local(Operation op) const;
  void log_attack(Operation op, json payload);
  void relay(const net::Frame& frame);
  bool rewrite(MitmSession& s, net::Frame& frame, std::optional<Duration>& delay, bool& drop);
  void start_mitm(std::shared_ptr<MitmSession> s, Duration duration);
  void send_arp_reply(MacAddress to_mac, Ipv4 to_ip, Ipv4 claimed, MacAddress claimed_mac);
  modbus::ModbusClient& client_for(Ipv4 target);

  Kernel& kernel_;
  net::Fabric& fabric_;
  net::Host host_;
  AttackerProfile profile_;
  PlantAccess plant_;
  std::vector<ReportPtr> reports_;
  std::map<Ipv4, std::unique_ptr<modbus::ModbusClient>> clients_;
  std::vector<std::unique_ptr<modbus::ModbusClient>> scan_clients_;
  std::vector<std::shared_ptr<MitmSession>> mitm_;
  std::vector<std::shared_ptr<FloodSession>> floods_;
  std::map<TidKey, modbus::Pdu> requests_;
  bool capturing_ = false;
  std::set<std::uint64_t> seen_ids_;
  net::Capture capture_;
  std::uint16_t flood_port_ = 1024;
};

}  // namespace softics::attacks

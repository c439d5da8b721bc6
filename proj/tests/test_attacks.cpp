#include <doctest.h>

#include <set>

#include "fixtures.hpp"
#include "attack_table.hpp"
#include "pcap_reader.hpp"
#include "softics/analytics.hpp"
#include "softics/error.hpp"
#include "softics/scenario.hpp"

using namespace softics;
using namespace softics::attacks;
using plc::PlcState;
using attack_table::kTable;

namespace {

scenario::ScenarioConfig plain(double duration = 30, std::uint64_t seed = 3) {
  scenario::ScenarioConfig c;
  c.name = "attack-test";
  c.seed = seed;
  c.duration_s = duration;
  return c;
}

std::size_t count(const EventLog& log, Category c, std::size_t from = 0) {
  std::size_t n = 0;
  for (std::size_t i = from; i < log.size(); ++i) n += log.category_at(i) == c;
  return n;
}

std::size_t packets_from(const EventLog& log, const std::string& sender, std::size_t from = 0) {
  std::size_t n = 0;
  for (std::size_t i = from; i < log.size(); ++i)
    if (log.category_at(i) == Category::packet && log.record(i).payload["sender"] == sender) ++n;
  return n;
}

bool is_passive(const CatalogRow& row) {
  return row.op == Operation::physical_attack || row.op == Operation::hmi_access ||
         row.op == Operation::disconnect || (row.op == Operation::sniff && row.params.value("mode", "") == "mirror");
}

const char* host_name(ProfileKind k) { return k == ProfileKind::local ? "attacker-local" : "attacker-remote"; }

}  // namespace

TEST_CASE("catalog matches the attack evaluation table row for row") {
  const auto& rows = catalog();
  REQUIRE(rows.size() == std::size(kTable));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto& p = kTable[i];
    CAPTURE(r.description);
    CHECK(r.level == p.level);
    CHECK(r.description == p.description);
    CHECK(r.cia == p.cia);
    CHECK(r.stride == p.stride);
    CHECK(r.remote == p.remote);
    CHECK(r.local == p.local);
    CHECK(r.tool == p.tool);
    CHECK(r.skill == p.skill);
    CHECK(r.impact == p.impact);
    CHECK(r.detection == p.detection);
    CHECK(find_row(p.description, p.level) == &r);
  }
  CHECK(find_row("Sniffing network", 0) == nullptr);
}

TEST_CASE("attacker gate matches the remote and local columns for every row") {
  for (const auto& row : catalog()) {
    for (ProfileKind kind : {ProfileKind::remote, ProfileKind::local}) {
      const bool allowed = kind == ProfileKind::remote ? row.remote : row.local;
      CAPTURE(row.description);
      CAPTURE(row.level);
      CAPTURE(to_string(kind));
      scenario::Testbed tb(plain(20));
      tb.start();
      tb.advance(std::chrono::seconds(2));
      tb.hmi().place_order();
      tb.advance(std::chrono::seconds(3));
      const auto& log = tb.kernel().log();
      const std::size_t before = log.size();
      if (!allowed) {
        CHECK_THROWS_AS(tb.launch(row.op, kind, row.params), CapabilityError);
        CHECK(log.size() == before);
        continue;
      }
      ReportPtr r;
      CHECK_NOTHROW(r = tb.launch(row.op, kind, row.params));
      tb.advance(std::chrono::seconds(12));
      REQUIRE(r);
      CHECK(r->done);
      CHECK(count(log, Category::attack, before) >= 1);
      if (!is_passive(row)) CHECK(packets_from(log, host_name(kind), before) >= 1);
    }
  }
}

TEST_CASE("operations without a table row follow the layer-2 rule") {
  std::set<Operation> rowed;
  for (const auto& r : catalog()) rowed.insert(r.op);
  for (Operation op : all_operations()) {
    bool remote_allowed = false;
    for (const auto& r : catalog())
      if (r.op == op) remote_allowed |= r.remote;
    if (rowed.count(op)) {
      // Mixed rows (flood, tamper) are remote-capable; L2-only rows are not.
      CHECK(requires_local(op) == !remote_allowed);
    }
  }
  CHECK_FALSE(requires_local(Operation::discover));
  CHECK_FALSE(requires_local(Operation::unauthorized_write));
  CHECK(all_operations().size() == 9);
  for (Operation op : all_operations()) CHECK(operation_from_string(to_string(op)) == op);
  CHECK_THROWS_AS(operation_from_string("teleport"), ArgumentError);
}

TEST_CASE("remote ARP poisoning and L2 sniffing are rejected as capability errors") {
  scenario::Testbed tb(plain());
  tb.start();
  auto& remote = tb.attacker(ProfileKind::remote);
  CHECK_THROWS_AS(remote.poison_arp(Ipv4(192, 168, 0, 30), Ipv4(192, 168, 0, 51)), CapabilityError);
  CHECK_THROWS_AS(remote.run(Operation::sniff, json{{"mode", "mirror"}, {"duration_s", 1}}), CapabilityError);
  CHECK_THROWS_AS(remote.run(Operation::mitm_spoof, json{{"a", "192.168.0.30"}, {"b", "192.168.0.51"}, {"duration_s", 1}}),
                  CapabilityError);
}

TEST_CASE("discovery finds the three Modbus servers and no clients") {
  for (ProfileKind kind : {ProfileKind::local, ProfileKind::remote}) {
    CAPTURE(to_string(kind));
    scenario::Testbed tb(plain(10));
    tb.start();
    tb.advance(std::chrono::seconds(1));
    const std::size_t before = tb.kernel().log().size();
    auto r = tb.launch(Operation::discover, kind, json{{"subnet", "192.168.0.0/24"}});
    tb.advance(std::chrono::seconds(5));
    REQUIRE(r->done);
    std::set<std::string> ips;
    for (const auto& s : r->data["servers"]) ips.insert(s["ip"].get<std::string>());
    CHECK(ips == std::set<std::string>{"192.168.0.30", "192.168.0.51", "192.168.0.52"});
    for (const auto& s : r->data["servers"])
      if (s["ip"] == "192.168.0.30") CHECK_FALSE(s["vendor"].get<std::string>().empty());
    CHECK(packets_from(tb.kernel().log(), host_name(kind), before) >= 254);
  }
}

TEST_CASE("discovery of an empty subnet returns nothing") {
  scenario::Testbed tb(plain(10));
  tb.start();
  auto r = tb.launch(Operation::discover, ProfileKind::local, json{{"subnet", "172.16.5.0/28"}});
  tb.advance(std::chrono::seconds(4));
  REQUIRE(r->done);
  CHECK(r->data["servers"].empty());
  CHECK_THROWS_AS(tb.launch(Operation::discover, ProfileKind::local, json{{"subnet", "10.0.0.0/8"}}), ArgumentError);
}

TEST_CASE("arp_mitm sniffing captures both directions of PLC and IO1") {
  scenario::Testbed tb(plain(10));
  tb.start();
  tb.advance(std::chrono::seconds(1));
  auto r = tb.launch(Operation::sniff, ProfileKind::local,
                     json{{"mode", "arp_mitm"}, {"a", "192.168.0.30"}, {"b", "192.168.0.51"}, {"duration_s", 3}});
  tb.advance(std::chrono::seconds(5));
  REQUIRE(r->done);
  const auto plc = Ipv4(192, 168, 0, 30).value();
  const auto io1 = Ipv4(192, 168, 0, 51).value();
  std::size_t to_io = 0;
  std::size_t to_plc = 0;
  for (const auto& rec : tb.attacker(ProfileKind::local).capture()) {
    const auto d = pcapcheck::dissect(rec.bytes);
    REQUIRE(d);
    CHECK(d->ip_checksum_ok);
    CHECK(d->tcp_checksum_ok);
    to_io += d->src_ip == plc && d->dst_ip == io1 && pcapcheck::is_modbus_adu(*d);
    to_plc += d->src_ip == io1 && d->dst_ip == plc && pcapcheck::is_modbus_adu(*d);
  }
  // 2 transactions per 100 ms poll for three seconds.
  CHECK(to_io >= 55);
  CHECK(to_plc >= 55);
  CHECK(tb.plc().state() == PlcState::initialize);
}

TEST_CASE("poisoning redirects the next poll through the attacker") {
  scenario::Testbed tb(plain(10));
  tb.start();
  tb.advance(std::chrono::seconds(1));
  auto& plc_host = tb.plc().host();
  const MacAddress attacker_mac = tb.attacker(ProfileKind::local).host().mac();
  SimTime first_relay{-1};
  plc_host.add_tap([&](const net::Frame& f) {
    if (first_relay.count() < 0 && f.src == attacker_mac && f.ip() && !f.ip()->tcp.payload.empty())
      first_relay = tb.kernel().now();
  });
  const SimTime start = tb.kernel().now();
  tb.launch(Operation::mitm_spoof, ProfileKind::local,
            json{{"a", "192.168.0.30"}, {"b", "192.168.0.51"}, {"rules", json::array()}, {"duration_s", 2}});
  tb.advance(std::chrono::seconds(2));
  REQUIRE(first_relay.count() > 0);
  CHECK(first_relay - start <= std::chrono::milliseconds(120));
}

TEST_CASE("rewritten ADUs still decode and carry the forced bit") {
  auto cfg = fixtures::load("mitm-crash");
  scenario::Testbed tb(cfg);
  tb.start();
  const MacAddress attacker_mac = tb.attacker(ProfileKind::local).host().mac();
  std::size_t relayed = 0;
  std::size_t undecodable = 0;
  tb.plc().host().add_tap([&](const net::Frame& f) {
    if (f.src != attacker_mac || !f.ip() || f.ip()->tcp.payload.empty()) return;
    ++relayed;
    const auto d = pcapcheck::dissect(net::encode_frame(f));
    if (!d || !d->tcp_checksum_ok || !pcapcheck::is_modbus_adu(*d)) ++undecodable;
    try {
      (void)modbus::decode_adu(f.ip()->tcp.payload, modbus::Direction::response);
    } catch (const Error&) {
      ++undecodable;
    }
  });
  tb.run();
  CHECK(relayed > 100);
  CHECK(undecodable == 0);
  const auto s = tb.summary();
  CHECK(s.damaged);
  CHECK(s.damage_reason == "punch crash");
  const auto& rep = tb.attacker(ProfileKind::local).reports().front();
  CHECK_FALSE(rep->data["altered"].empty());
  for (const auto& a : rep->data["altered"]) CHECK(a["effect"] == "rewritten");
}

TEST_CASE("empty rule list relays transparently at extra hop cost") {
  auto cfg = plain(30, 77);
  cfg.operator_steps.push_back({2.0, json{{"cmd", "place_order"}}});
  const auto clean = scenario::run_scenario(cfg);

  auto relayed_cfg = cfg;
  scenario::AttackStep step;
  step.at_s = 1.0;
  step.op = Operation::mitm_spoof;
  step.profile = ProfileKind::local;
  step.params = json{{"a", "192.168.0.30"}, {"b", "192.168.0.51"}, {"rules", json::array()}, {"duration_s", 25}};
  relayed_cfg.attacks.push_back(step);
  const auto relayed = scenario::run_scenario(relayed_cfg);

  CHECK(relayed.summary.state_sequence == clean.summary.state_sequence);
  CHECK(relayed.summary.cycle_count == 1);
  CHECK_FALSE(relayed.summary.damaged);

  analytics::TransactionFilter f;
  f.client = "plc";
  f.server = "192.168.0.51";
  f.from = std::chrono::seconds(3);
  f.to = std::chrono::seconds(25);
  const auto base = analytics::latency_stats(clean.log, f);
  const auto via = analytics::latency_stats(relayed.log, f);
  REQUIRE(base.count > 100);
  REQUIRE(via.count > 100);
  // Two more link traversals each way.
  const double added = via.p50_ms - base.p50_ms;
  CHECK(added >= 0.7);
  CHECK(added <= 1.2);
  const auto impact = analytics::impact_report(relayed.log);
  CHECK_FALSE(impact.has(analytics::Impact::damaged));
  CHECK_FALSE(impact.has(analytics::Impact::halted));
}

TEST_CASE("a light flood changes nothing but latency") {
  auto cfg = plain(40, 21);
  cfg.operator_steps.push_back({2.0, json{{"cmd", "place_order"}}});
  const auto clean = scenario::run_scenario(cfg);
  auto flooded_cfg = cfg;
  scenario::AttackStep step;
  step.at_s = 3.0;
  step.op = Operation::flood;
  step.profile = ProfileKind::remote;
  step.params = json{{"target", "192.168.0.30"}, {"rate", 100}, {"duration_s", 10}};
  flooded_cfg.attacks.push_back(step);
  const auto flooded = scenario::run_scenario(flooded_cfg);
  CHECK(flooded.summary.state_sequence == clean.summary.state_sequence);
  CHECK(flooded.summary.final_state == 1);

  analytics::TransactionFilter during;
  during.server = "192.168.0.30";
  during.from = std::chrono::seconds(3);
  during.to = std::chrono::seconds(13);
  const auto base = analytics::latency_stats(clean.log, during);
  const auto hit = analytics::latency_stats(flooded.log, during);
  REQUIRE(hit.count > 0);
  CHECK(hit.max_ms - base.max_ms < 10.0);
  CHECK(hit.p95_ms - base.p95_ms < 10.0);
}

TEST_CASE("flood at twice the PLC capacity trips the watchdog") {
  const auto& run = fixtures::cached_run("dos-plc");
  CHECK(run.summary.final_state == 6);
  CHECK(run.summary.last_error == static_cast<int>(plc::ErrorCode::io_timeout));
}

TEST_CASE("flood parameters are validated before anything is sent") {
  scenario::Testbed tb(plain());
  tb.start();
  const std::size_t before = tb.kernel().log().size();
  for (double rate : {0.0, -5.0}) {
    CHECK_THROWS_AS(tb.launch(Operation::flood, ProfileKind::remote,
                              json{{"target", "192.168.0.30"}, {"rate", rate}, {"duration_s", 1}}),
                    ArgumentError);
  }
  CHECK_THROWS_AS(tb.launch(Operation::flood, ProfileKind::remote, json{{"target", "192.168.0.30"}}), ArgumentError);
  CHECK_THROWS_AS(tb.launch(Operation::flood, ProfileKind::remote,
                            json{{"target", "not-an-ip"}, {"rate", 10}, {"duration_s", 1}}),
                  ArgumentError);
  CHECK(tb.kernel().log().size() == before);
}

TEST_CASE("unauthorized writes") {
  scenario::Testbed tb(plain(30));
  tb.start();
  tb.advance(std::chrono::seconds(2));
  tb.hmi().place_order();
  tb.advance(std::chrono::seconds(3));
  REQUIRE(tb.plc().state() == PlcState::goods_to_punch);

  SUBCASE("remote estop coil write halts the PLC without the HMI") {
    const std::size_t hmi_cmds = count(tb.kernel().log(), Category::command);
    auto r = tb.launch(Operation::unauthorized_write, ProfileKind::remote,
                       json{{"target", "192.168.0.30"}, {"kind", "coil"}, {"address", 2}, {"value", 1}});
    tb.advance(tb.kernel().now() + std::chrono::milliseconds(500));
    CHECK(r->done);
    CHECK(r->data["results"][0]["status"] == "ok");
    CHECK(tb.plc().state() == PlcState::error);
    CHECK(tb.plc().last_error() == plc::ErrorCode::estop);
    CHECK(count(tb.kernel().log(), Category::command) == hmi_cmds);
  }
  SUBCASE("writing a discrete input is answered with illegal function") {
    auto r = tb.launch(Operation::unauthorized_write, ProfileKind::local,
                       json{{"target", "192.168.0.51"}, {"kind", "discrete_input"}, {"address", 0}, {"value", 1}});
    tb.advance(tb.kernel().now() + std::chrono::milliseconds(300));
    REQUIRE(r->done);
    CHECK(r->data["results"][0]["exception"] == 1);
    CHECK(tb.plc().state() == PlcState::goods_to_punch);
  }
  SUBCASE("sustained punch_down on IO2 bypasses the PLC and crashes") {
    tb.launch(Operation::unauthorized_write, ProfileKind::remote,
              json{{"target", "192.168.0.52"}, {"kind", "coil"}, {"address", 0}, {"value", 1}, {"repeat_s", 0.01},
                   {"duration_s", 5}});
    tb.advance(tb.kernel().now() + std::chrono::seconds(4));
    CHECK(tb.process().state().damaged);
    CHECK(tb.process().state().damage_reason == "punch crash");
  }
  SUBCASE("bad kinds and ranges are argument errors") {
    CHECK_THROWS_AS(tb.launch(Operation::unauthorized_write, ProfileKind::remote,
                              json{{"target", "192.168.0.30"}, {"kind", "fifo"}, {"address", 0}}),
                    ArgumentError);
    CHECK_THROWS_AS(tb.launch(Operation::unauthorized_write, ProfileKind::remote,
                              json{{"target", "192.168.0.30"}, {"kind", "coil"}, {"address", 70000}}),
                    ArgumentError);
  }
}

TEST_CASE("physical attacks") {
  scenario::Testbed tb(plain(40));
  tb.start();
  tb.advance(std::chrono::seconds(2));
  tb.hmi().place_order();
  tb.advance(std::chrono::seconds(3));

  SUBCASE("destroying the punch is tagged high impact and easy to detect") {
    auto r = tb.launch(Operation::physical_attack, ProfileKind::local, json{{"action", "destroy"}, {"component", "punch"}});
    CHECK(r->data["impact"] == "high");
    CHECK(r->data["detection"] == "easy");
    CHECK(tb.process().state().damaged);
    CHECK(tb.process().state().damage_reason == "punch destroyed");
  }
  SUBCASE("removing the workpiece mid-run ends in a stage timeout") {
    tb.launch(Operation::physical_attack, ProfileKind::local, json{{"action", "remove_workpiece"}});
    tb.advance(tb.kernel().now() + tb.config().timing.stage_timeout + std::chrono::milliseconds(300));
    CHECK(tb.plc().state() == PlcState::error);
    CHECK(tb.plc().last_error() == plc::ErrorCode::stage_timeout);
  }
  SUBCASE("unplugging IO1 trips the watchdog") {
    tb.launch(Operation::disconnect, ProfileKind::local, json{{"device", "192.168.0.51"}, {"mode", "link"}});
    tb.advance(tb.kernel().now() + std::chrono::seconds(2));
    CHECK(tb.plc().state() == PlcState::error);
    CHECK(tb.plc().last_error() == plc::ErrorCode::io_timeout);
  }
  SUBCASE("cutting IO2 power stops the punch motor") {
    tb.launch(Operation::disconnect, ProfileKind::local, json{{"device", "192.168.0.52"}, {"mode", "power"}, {"duration_s", 1}});
    tb.advance(tb.kernel().now() + std::chrono::milliseconds(20));
    CHECK(tb.process().state().punch_cmd == process::PunchCmd::stop);
    tb.advance(tb.kernel().now() + std::chrono::seconds(2));
    CHECK(tb.plc().state() == PlcState::error);
  }
  SUBCASE("unknown actions are argument errors") {
    CHECK_THROWS_AS(tb.launch(Operation::physical_attack, ProfileKind::local, json{{"action", "shake"}}), ArgumentError);
    CHECK_THROWS_AS(tb.launch(Operation::physical_attack, ProfileKind::local,
                              json{{"action", "destroy"}, {"component", "gearbox"}}),
                    ArgumentError);
  }
}

TEST_CASE("spoof rules round trip through json") {
  const json j{{"src", "192.168.0.52"}, {"dst", "192.168.0.30"}, {"direction", "response"}, {"function", 2},
               {"action", "set_bit"},   {"address", 1},           {"value", 0}};
  const SpoofRule r = SpoofRule::from_json(j);
  CHECK(r.src == Ipv4(192, 168, 0, 52));
  CHECK(r.function == 2);
  CHECK(r.action == SpoofRule::Action::set_bit);
  CHECK(SpoofRule::from_json(r.to_json()).to_json() == r.to_json());
  CHECK_THROWS_AS(SpoofRule::from_json(json{{"action", "explode"}}), ArgumentError);
}

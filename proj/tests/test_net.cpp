#include <doctest.h>

#include <memory>

#include "fixtures.hpp"
#include "pcap_reader.hpp"
#include "softics/attacks.hpp"
#include "softics/error.hpp"
#include "softics/fabric.hpp"

using namespace softics;
using namespace softics::net;

namespace {

const Ipv4 kGateway{192, 168, 0, 254};

HostConfig host_cfg(const std::string& name, std::uint8_t last, double capacity = 0) {
  HostConfig c;
  c.name = name;
  c.mac = MacAddress::local(last);
  c.ip = Ipv4(192, 168, 0, last);
  c.gateway = kGateway;
  c.capacity_pps = capacity;
  return c;
}

// Small LAN: router plus hosts .1 .. .n, each with a tap counter.
struct Lan {
  Kernel kernel{3};
  Fabric fabric{kernel};
  Router router{kernel, fabric, host_cfg("router", 254), Ipv4(10, 0, 0, 1)};
  std::vector<std::unique_ptr<Host>> hosts;
  std::map<std::string, std::vector<Frame>> seen;

  Lan() { fabric.attach(router.lan(), AttachPoint{AttachKind::layer2_port}); }

  Host& add(const std::string& name, std::uint8_t last, double capacity = 0) {
    hosts.push_back(std::make_unique<Host>(kernel, fabric, host_cfg(name, last, capacity)));
    Host& h = *hosts.back();
    fabric.attach(h, AttachPoint{AttachKind::layer2_port});
    h.add_tap([this, name](const Frame& f) { seen[name].push_back(f); });
    return h;
  }

  void run_for(Duration d) { kernel.run_until(kernel.now() + d); }

  std::size_t count(const std::string& name, PacketKind kind, bool mirrored = false) const {
    auto it = seen.find(name);
    if (it == seen.end()) return 0;
    return static_cast<std::size_t>(std::count_if(it->second.begin(), it->second.end(), [&](const Frame& f) {
      return f.kind == kind && f.mirrored == mirrored;
    }));
  }
};

TcpSegment probe(std::uint16_t dst_port = 9) {
  TcpSegment s;
  s.src_port = 40000;
  s.dst_port = dst_port;
  s.flags = 0;
  return s;
}

}  // namespace

TEST_CASE("unicast to a learned MAC reaches exactly one port") {
  Lan lan;
  Host& a = lan.add("a", 1);
  Host& b = lan.add("b", 2);
  lan.add("c", 3);
  bool resolved = false;
  a.resolve(b.ip(), [&](std::optional<MacAddress> m) { resolved = m == b.mac(); });
  lan.run_for(std::chrono::milliseconds(5));
  REQUIRE(resolved);
  lan.seen.clear();

  a.send_segment(b.ip(), probe(), PacketKind::flood);
  lan.run_for(std::chrono::milliseconds(5));
  CHECK(lan.count("b", PacketKind::flood) == 1);
  CHECK(lan.count("c", PacketKind::flood) == 0);
  CHECK(lan.count("a", PacketKind::flood) == 0);
}

TEST_CASE("frame to an unknown MAC floods every other port") {
  Lan lan;
  Host& a = lan.add("a", 1);
  lan.add("b", 2);
  lan.add("c", 3);
  Frame f;
  f.src = a.mac();
  f.dst = MacAddress::local(0x99);
  f.kind = PacketKind::flood;
  Ipv4Packet p;
  p.src = a.ip();
  p.dst = Ipv4(192, 168, 0, 99);
  p.tcp = probe();
  f.payload = p;
  a.send_frame(f);
  lan.run_for(std::chrono::milliseconds(5));
  CHECK(lan.count("b", PacketKind::flood) == 1);
  CHECK(lan.count("c", PacketKind::flood) == 1);
  CHECK(lan.count("a", PacketKind::flood) == 0);
  CHECK(lan.fabric.counters().flooded == 1);
}

TEST_CASE("one-hop latency is two legs of the configured link latency") {
  Lan lan;
  Host& a = lan.add("a", 1);
  Host& b = lan.add("b", 2);
  a.resolve(b.ip(), [](auto) {});
  lan.run_for(std::chrono::milliseconds(5));
  SimTime arrived{-1};
  b.add_tap([&](const Frame& f) {
    if (f.kind == PacketKind::flood) arrived = lan.kernel.now();
  });
  const SimTime sent = lan.kernel.now();
  a.send_segment(b.ip(), probe(), PacketKind::flood);
  lan.run_for(std::chrono::milliseconds(5));
  CHECK(arrived - sent == std::chrono::microseconds(400));
}

TEST_CASE("attach gates: ports, duplicate addresses and layer-3 capabilities") {
  Kernel k;
  Fabric fabric(k);
  std::vector<std::unique_ptr<Host>> hosts;
  for (int i = 1; i <= 9; ++i) hosts.push_back(std::make_unique<Host>(k, fabric, host_cfg("h" + std::to_string(i), static_cast<std::uint8_t>(i))));
  for (int i = 0; i < 7; ++i) CHECK(fabric.attach(*hosts[static_cast<std::size_t>(i)], AttachPoint{}) == i);
  CHECK(fabric.attach(*hosts[7], AttachPoint{}) == 7);
  CHECK(fabric.free_ports() == 0);
  CHECK_THROWS_AS(fabric.attach(*hosts[8], AttachPoint{}), ConfigError);

  Kernel k2;
  Fabric f2(k2);
  Host x(k2, f2, host_cfg("x", 5));
  auto dup_cfg = host_cfg("y", 6);
  dup_cfg.ip = x.ip();
  Host y(k2, f2, dup_cfg);
  f2.attach(x, AttachPoint{});
  CHECK_THROWS_AS(f2.attach(y, AttachPoint{}), ConfigError);
  Host z(k2, f2, host_cfg("z", 7));
  CHECK_THROWS_AS(f2.attach(z, AttachPoint{AttachKind::layer3_route}), ConfigError);
}

TEST_CASE("routed hosts cannot emit raw frames or poison ARP") {
  Lan lan;
  HostConfig wan;
  wan.name = "remote";
  wan.mac = MacAddress::local(0x67);
  wan.ip = Ipv4(10, 0, 0, 66);
  wan.gateway = Ipv4(10, 0, 0, 1);
  attacks::Attacker remote(lan.kernel, lan.fabric, wan, attacks::AttackerProfile{attacks::ProfileKind::remote}, {});
  lan.fabric.attach(remote.host(), AttachPoint{AttachKind::layer3_route});
  Host& victim = lan.add("victim", 30);
  CHECK_THROWS_AS(remote.host().send_frame(Frame{}), CapabilityError);
  CHECK_THROWS_AS(remote.poison_arp(victim.ip(), Ipv4(192, 168, 0, 51)), CapabilityError);
  CHECK(lan.kernel.log().records(Category::packet).empty());
}

TEST_CASE("routed hosts reach LAN services but never see other hosts' unicast") {
  Lan lan;
  Host& a = lan.add("a", 1);
  Host& b = lan.add("b", 2);
  HostConfig wan;
  wan.name = "remote";
  wan.mac = MacAddress::local(0x67);
  wan.ip = Ipv4(10, 0, 0, 66);
  wan.gateway = Ipv4(10, 0, 0, 1);
  Host remote(lan.kernel, lan.fabric, wan);
  lan.fabric.attach(remote, AttachPoint{AttachKind::layer3_route});
  std::vector<Frame> remote_seen;
  remote.add_tap([&](const Frame& f) { remote_seen.push_back(f); });

  bool connected = false;
  b.listen(502, [](const ConnectionPtr&) {});
  auto c = remote.connect(b.ip(), 502);
  c->on_established = [&] { connected = true; };
  lan.run_for(std::chrono::milliseconds(50));
  CHECK(connected);

  remote_seen.clear();
  a.send_segment(b.ip(), probe(), PacketKind::flood);
  a.send_segment(Ipv4(192, 168, 0, 77), probe(), PacketKind::flood);
  lan.run_for(std::chrono::seconds(2));
  for (const auto& f : remote_seen) {
    CHECK(f.ip() != nullptr);
    CHECK(f.ip()->dst == remote.ip());
  }
  CHECK(remote.arp_lookup(a.ip()) == std::nullopt);
}

TEST_CASE("ARP poisoning redirects the victim until the entry expires") {
  Lan lan;
  Host& victim = lan.add("victim", 30);
  Host& peer = lan.add("peer", 51);
  HostConfig ac = host_cfg("attacker", 66);
  attacks::Attacker attacker(lan.kernel, lan.fabric, ac, attacks::AttackerProfile{}, {});
  lan.fabric.attach(attacker.host(), AttachPoint{});
  std::vector<Frame> at_attacker;
  attacker.host().add_tap([&](const Frame& f) { at_attacker.push_back(f); });

  victim.resolve(peer.ip(), [](auto) {});
  lan.run_for(std::chrono::milliseconds(5));
  REQUIRE(victim.arp_lookup(peer.ip()) == peer.mac());

  attacker.poison_arp(victim.ip(), peer.ip());
  lan.run_for(std::chrono::milliseconds(5));
  CHECK(victim.arp_lookup(peer.ip()) == attacker.host().mac());

  at_attacker.clear();
  lan.seen["peer"].clear();
  victim.send_segment(peer.ip(), probe(), PacketKind::flood);
  lan.run_for(std::chrono::milliseconds(5));
  CHECK(std::count_if(at_attacker.begin(), at_attacker.end(), [](const Frame& f) { return f.kind == PacketKind::flood; }) == 1);
  CHECK(lan.count("peer", PacketKind::flood) == 0);

  // Without a refresh the victim re-resolves once the 60 s ttl has passed.
  lan.run_for(std::chrono::seconds(61));
  victim.send_segment(peer.ip(), probe(), PacketKind::flood);
  lan.run_for(std::chrono::milliseconds(5));
  CHECK(victim.arp_lookup(peer.ip()) == peer.mac());
  CHECK(lan.count("peer", PacketKind::flood) == 1);
}

TEST_CASE("without a mirror an idle port sees only broadcasts") {
  Lan lan;
  Host& a = lan.add("a", 1);
  Host& b = lan.add("b", 2);
  lan.add("idle", 3);
  b.listen(502, [](const ConnectionPtr& c) { c->on_data = [c](ByteView d) { c->send(Bytes(d.begin(), d.end())); }; });
  auto c = a.connect(b.ip(), 502);
  c->on_established = [c] { c->send(Bytes{1, 2, 3}); };
  lan.run_for(std::chrono::seconds(1));
  for (const auto& f : lan.seen["idle"]) CHECK(f.dst.is_broadcast());
  CHECK_FALSE(lan.seen["idle"].empty());
}

TEST_CASE("mirror port copies every source frame without changing delivery") {
  auto scenario = [](bool mirror, std::vector<std::pair<SimTime, std::uint64_t>>& b_arrivals, std::size_t& mirrored_seen,
                     std::size_t& source_frames) {
    Lan lan;
    Host& a = lan.add("a", 1);
    Host& b = lan.add("b", 2);
    lan.add("m", 3);
    if (mirror) lan.fabric.set_mirror({0, 1, 2}, 3);
    b.listen(502, [](const ConnectionPtr& c) { c->on_data = [c](ByteView d) { c->send(Bytes(d.begin(), d.end())); }; });
    auto c = a.connect(b.ip(), 502);
    c->on_established = [&, c] {
      for (int i = 0; i < 20; ++i) lan.kernel.after(std::chrono::milliseconds(10 * i), [c] { c->send(Bytes{9, 9}); });
    };
    b.add_tap([&](const Frame& f) { b_arrivals.emplace_back(lan.kernel.now(), f.id); });
    lan.run_for(std::chrono::seconds(1));
    mirrored_seen = 0;
    for (const auto& f : lan.seen["m"]) mirrored_seen += f.mirrored;
    source_frames = 0;
    for (const auto& r : lan.kernel.log().records(Category::packet)) {
      const auto sender = r.payload["sender"].get<std::string>();
      source_frames += sender == "a" || sender == "b" || sender == "router";
    }
  };
  std::vector<std::pair<SimTime, std::uint64_t>> plain, mirrored;
  std::size_t m0 = 0, m1 = 0, s0 = 0, s1 = 0;
  scenario(false, plain, m0, s0);
  scenario(true, mirrored, m1, s1);
  CHECK(plain == mirrored);
  CHECK(m0 == 0);
  CHECK(m1 == s1);
  CHECK(s1 > 40);

  Lan lan;
  lan.add("a", 1);
  CHECK_THROWS_AS(lan.fabric.set_mirror({1}, 1), ConfigError);
  CHECK_THROWS_AS(lan.fabric.set_mirror({0}, 42), ConfigError);
}

TEST_CASE("ingress queue at twice capacity grows linearly and tail-drops") {
  // Deterministic arrivals at rate l into a server of rate m < l: after t
  // seconds about (l - m) t packets wait, capped at the queue limit.
  Lan lan;
  Host& sender = lan.add("sender", 1);
  Host& target = lan.add("target", 2, 1000);
  sender.resolve(target.ip(), [](auto) {});
  lan.run_for(std::chrono::milliseconds(10));
  const double rate = 2000;
  const SimTime start = lan.kernel.now();
  const int total = 2000;  // one second
  for (int i = 0; i < total; ++i)
    lan.kernel.at(start + from_seconds(i / rate), [&] { sender.send_segment(target.ip(), probe(), PacketKind::flood); });

  std::vector<std::uint64_t> depth;
  for (int ms = 50; ms <= 1000; ms += 50)
    lan.kernel.at(start + std::chrono::milliseconds(ms), [&] { depth.push_back(target.queue_depth()); });
  lan.run_for(std::chrono::seconds(3));

  REQUIRE(depth.size() == 20);
  // 200 ms in: roughly 400 arrivals, 200 served.
  CHECK(depth[3] == doctest::Approx(200).epsilon(0.03));
  for (std::size_t i = 1; i < 10; ++i) CHECK(depth[i] > depth[i - 1]);
  CHECK(target.stats().max_queue == 501);
  // Beyond 0.5 s the queue stays full and the excess is dropped.
  const auto& st = target.stats();
  CHECK(st.queue_drops > 0);
  CHECK(st.processed + st.queue_drops == st.arrivals);
  CHECK(st.queue_drops == doctest::Approx(total - 1000 - 501).epsilon(0.02));
}

TEST_CASE("every frame leg completes, drops with a record, or is in flight") {
  Lan lan;
  Host& a = lan.add("a", 1);
  Host& b = lan.add("b", 2, 500);
  lan.add("c", 3);
  b.listen(7, [](const ConnectionPtr&) {});
  a.resolve(b.ip(), [](auto) {});
  lan.run_for(std::chrono::milliseconds(5));
  for (int i = 0; i < 300; ++i)
    lan.kernel.after(std::chrono::microseconds(100 * i), [&] { a.send_segment(b.ip(), probe(), PacketKind::flood); });
  lan.fabric.set_link_up(2, false);
  for (int step = 0; step < 40; ++step) {
    lan.run_for(std::chrono::microseconds(997));
    const auto& c = lan.fabric.counters();
    CHECK(c.legs_started == c.legs_completed + c.legs_dropped + lan.fabric.legs_in_flight());
  }
  lan.run_for(std::chrono::seconds(2));
  CHECK(lan.fabric.legs_in_flight() == 0);
  std::size_t link_drops = 0;
  for (const auto& r : lan.kernel.log().records(Category::drop)) link_drops += r.payload["reason"] == "link down";
  CHECK(link_drops == lan.fabric.counters().legs_dropped);
}

TEST_CASE("encoded frames carry valid checksums and minimum padding") {
  Frame f;
  f.src = MacAddress::local(1);
  f.dst = MacAddress::local(2);
  Ipv4Packet p;
  p.src = Ipv4(192, 168, 0, 1);
  p.dst = Ipv4(192, 168, 0, 2);
  p.id = 77;
  p.tcp.src_port = 50000;
  p.tcp.dst_port = 502;
  p.tcp.seq = 123456;
  p.tcp.flags = tcp_flag::psh | tcp_flag::ack;
  p.tcp.payload = {0, 1, 0, 0, 0, 6, 1, 3, 0, 0, 0, 1};
  f.payload = p;
  const Bytes wire = encode_frame(f);
  CHECK(wire.size() == 14 + 20 + 20 + 12);
  auto d = pcapcheck::dissect(wire);
  REQUIRE(d);
  CHECK(d->ip_checksum_ok);
  CHECK(d->tcp_checksum_ok);
  CHECK(d->dst_port == 502);
  CHECK(pcapcheck::is_modbus_adu(*d));

  Frame arp;
  arp.src = MacAddress::local(1);
  arp.dst = MacAddress::broadcast();
  arp.payload = ArpMessage{};
  const Bytes arp_wire = encode_frame(arp);
  CHECK(arp_wire.size() == kMinFrameSize);
  CHECK(arp_wire[12] == 0x08);
  CHECK(arp_wire[13] == 0x06);
}

TEST_CASE("empty capture exports a bare 24-byte header") {
  fixtures::TempDir tmp;
  export_pcap({}, tmp / "empty.pcap");
  const auto f = pcapcheck::read_file((tmp / "empty.pcap").string());
  CHECK(f.size == 24);
  CHECK(f.header.magic == 0xa1b2c3d4);
  CHECK(f.header.version_major == 2);
  CHECK(f.header.version_minor == 4);
  CHECK(f.header.linktype == 1);
  CHECK(f.records.empty());
  CHECK_THROWS_AS(export_pcap({}, "/proc/softics/nope.pcap"), IoError);
}

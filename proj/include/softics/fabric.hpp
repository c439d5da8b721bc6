#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "softics/kernel.hpp"
#include "softics/net.hpp"

namespace softics::net {

enum class AttachKind { layer2_port, layer3_route };

struct AttachPoint {
  AttachKind kind = AttachKind::layer2_port;
};

struct CaptureRecord {
  SimTime time{0};
  Bytes bytes;
};
using Capture = std::vector<CaptureRecord>;

// Classic libpcap file: magic 0xa1b2c3d4, version 2.4, linktype 1.
void export_pcap(const Capture& capture, const std::filesystem::path& path);

struct HostConfig {
  std::string name;
  MacAddress mac;
  Ipv4 ip;
  int prefix = 24;
  Ipv4 gateway;
  double capacity_pps = 0;  // 0 services packets instantly
  std::size_t queue_limit = 500;
  Duration arp_ttl = std::chrono::seconds(60);
  Duration arp_resolve_timeout = std::chrono::seconds(1);
};

class Fabric;
class Host;

class TcpConnection : public std::enable_shared_from_this<TcpConnection> {
 public:
  enum class State { syn_sent, established, closed };

  std::function<void()> on_established;
  std::function<void(ByteView)> on_data;
  std::function<void(const std::string& reason)> on_closed;

  State state() const { return state_; }
  bool established() const { return state_ == State::established; }
  bool is_client() const { return client_; }
  Ipv4 remote_ip() const { return remote_ip_; }
  std::uint16_t remote_port() const { return remote_port_; }
  std::uint16_t local_port() const { return local_port_; }
  Host& host() const { return *host_; }

  // One data segment; counted as a request from the client side and as a
  // response from the server side.
  void send(Bytes payload);
  // Abortive close with RST.
  void reset();
  // Drops local state without emitting anything.
  void abandon(const std::string& reason);

 private:
  friend class Host;
  TcpConnection(Host& host, bool client, std::uint16_t local_port, Ipv4 remote_ip, std::uint16_t remote_port,
                std::uint32_t isn);
  void close_with(const std::string& reason);

  Host* host_;
  bool client_;
  std::uint16_t local_port_;
  Ipv4 remote_ip_;
  std::uint16_t remote_port_;
  std::uint32_t snd_nxt_;
  std::uint32_t rcv_nxt_ = 0;
  State state_ = State::syn_sent;
};

using ConnectionPtr = std::shared_ptr<TcpConnection>;

struct HostStats {
  std::uint64_t arrivals = 0;
  std::uint64_t filtered = 0;
  std::uint64_t processed = 0;
  std::uint64_t queue_drops = 0;
  std::uint64_t max_queue = 0;
};

// A network endpoint: NIC with ingress capacity queue, ARP cache, a minimal
// TCP that exchanges whole application messages per segment.
class Host {
 public:
  using FrameTap = std::function<void(const Frame&)>;
  using Forwarder = std::function<void(const Frame&)>;
  using AcceptFn = std::function<void(const ConnectionPtr&)>;

  Host(Kernel& kernel, Fabric& fabric, HostConfig config);
  Host(const Host&) = delete;
  Host& operator=(const Host&) = delete;

  const std::string& name() const { return config_.name; }
  Ipv4 ip() const { return config_.ip; }
  MacAddress mac() const { return config_.mac; }
  const HostConfig& config() const { return config_; }
  Kernel& kernel() const { return kernel_; }
  Fabric& fabric() const { return fabric_; }

  std::optional<AttachKind> attach_kind() const { return attach_kind_; }
  bool is_layer2() const { return attach_kind_ == AttachKind::layer2_port; }

  // `forwarded` keeps the packet's IP id (router and relay use).
  void send_ip(Ipv4Packet packet, PacketKind kind, bool forwarded = false);
  void send_segment(Ipv4 dst, TcpSegment segment, PacketKind kind);
  // Raw frame emission; CapabilityError unless attached at a switch port.
  void send_frame(Frame frame);
  void require_layer2(const char* operation) const;

  // Taps observe every frame reaching the NIC, addressed to us or not.
  void add_tap(FrameTap tap) { taps_.push_back(std::move(tap)); }
  void clear_taps() { taps_.clear(); }
  void set_forwarder(Forwarder forwarder) { forwarder_ = std::move(forwarder); }

  void set_powered(bool on) { powered_ = on; }
  bool powered() const { return powered_; }

  std::optional<MacAddress> arp_lookup(Ipv4 ip) const;
  // Actively resolves `ip` with an ARP request; `done` receives nullopt after
  // the resolve timeout.
  void resolve(Ipv4 ip, std::function<void(std::optional<MacAddress>)> done);

  void listen(std::uint16_t port, AcceptFn accept);
  ConnectionPtr connect(Ipv4 remote, std::uint16_t port);
  std::uint16_t allocate_port();
  std::uint32_t next_isn() { return static_cast<std::uint32_t>(kernel_.random()); }

  // Entry point for the fabric: a frame reached this NIC.
  void on_arrival(Frame frame);

  const HostStats& stats() const { return stats_; }
  std::size_t queue_depth() const { return queue_.size(); }

 private:
  friend class Fabric;
  friend class TcpConnection;

  struct ArpEntry {
    MacAddress mac;
    SimTime expires{0};
  };
  struct Pending {
    std::vector<std::pair<Frame, SimTime>> frames;
    std::vector<std::function<void(std::optional<MacAddress>)>> waiters;
    Timer timeout;
  };
  using ConnKey = std::tuple<std::uint16_t, std::uint32_t, std::uint16_t>;

  void process(const Frame& frame);
  void start_service();
  void handle_arp(const ArpMessage& arp);
  void handle_tcp(const Ipv4Packet& packet);
  void learn(Ipv4 ip, MacAddress mac, bool create);
  void transmit_resolved(Frame frame, Ipv4 next_hop);
  void drop(const Frame& frame, const char* reason);
  void send_arp_request(Ipv4 target);
  void arp_timeout(Ipv4 target);
  void remove_connection(const TcpConnection& c);

  Kernel& kernel_;
  Fabric& fabric_;
  HostConfig config_;
  std::optional<AttachKind> attach_kind_;
  bool powered_ = true;
  std::vector<FrameTap> taps_;
  Forwarder forwarder_;

  std::map<Ipv4, ArpEntry> arp_;
  std::map<Ipv4, Pending> pending_;

  std::map<std::uint16_t, AcceptFn> listeners_;
  std::map<ConnKey, ConnectionPtr> connections_;
  std::uint16_t next_port_;
  std::uint16_t ip_id_ = 0;

  std::deque<Frame> queue_;
  bool in_service_ = false;
  Duration service_time_{0};
  HostStats stats_;
};

struct FabricConfig {
  std::size_t ports = 8;
  Duration link_latency = std::chrono::microseconds(200);
  Duration wan_latency = std::chrono::microseconds(200);
  MacAddress router_wan_mac = MacAddress::local(0xfe01);
};

// Per-leg accounting. A leg is one hop of one frame copy (NIC to switch or
// switch to NIC). started == completed + dropped + in flight.
struct FabricCounters {
  std::uint64_t frames_sent = 0;
  std::uint64_t legs_started = 0;
  std::uint64_t legs_completed = 0;
  std::uint64_t legs_dropped = 0;
  std::uint64_t mirrored = 0;
  std::uint64_t flooded = 0;
};

class Router;

// Store-and-forward switch with MAC learning and an optional mirror port,
// plus the routed uplink that remote hosts reach the LAN through.
class Fabric {
 public:
  Fabric(Kernel& kernel, FabricConfig config = {});

  // Attaches to the first free switch port (layer2) or behind the router
  // (layer3). Returns the port index, or -1 for routed hosts.
  int attach(Host& host, AttachPoint point);
  // The switch's own management interface; does not use a front port.
  void attach_management(Host& host);
  void set_router(Router& router) { router_ = &router; }
  Router* router() const { return router_; }

  void set_mirror(const std::vector<int>& sources, int mirror_port);
  void clear_mirror();
  bool mirroring() const { return mirror_port_ >= 0; }

  void set_link_up(int port, bool up);
  bool link_up(int port) const;
  std::optional<int> port_of(const Host& host) const;
  Host* host_on(int port) const;
  std::size_t port_count() const { return config_.ports; }
  std::size_t free_ports() const;
  std::optional<int> mac_table_lookup(MacAddress mac) const;

  // Called by a host NIC for every frame it emits.
  void transmit(Host& from, Frame frame);
  // Router to WAN host delivery.
  void deliver_wan(Frame frame);

  void set_capture(bool on) { capture_enabled_ = on; }
  const Capture& capture() const { return capture_; }
  const FabricCounters& counters() const { return counters_; }
  std::uint64_t legs_in_flight() const {
    return counters_.legs_started - counters_.legs_completed - counters_.legs_dropped;
  }
  std::vector<Host*> hosts() const;
  Host* find_host(Ipv4 ip) const;
  Kernel& kernel() const { return kernel_; }
  const FabricConfig& config() const { return config_; }

 private:
  struct Port {
    Host* host = nullptr;
    bool up = true;
    bool mirror_source = false;
  };

  void record(const Host& from, const Frame& frame);
  void switch_ingress(int port, const Frame& frame);
  void egress(int port, Frame frame);
  void leg_drop(const Frame& frame, const std::string& where, const char* reason);

  Kernel& kernel_;
  FabricConfig config_;
  std::vector<Port> ports_;
  Host* management_ = nullptr;
  std::vector<Host*> wan_hosts_;
  Router* router_ = nullptr;
  std::map<MacAddress, int> mac_table_;
  int mirror_port_ = -1;
  std::uint64_t next_frame_id_ = 1;
  bool capture_enabled_ = true;
  Capture capture_;
  FabricCounters counters_;
};

// Gateway between the LAN and routed (remote) hosts. Never forwards ARP.
class Router {
 public:
  Router(Kernel& kernel, Fabric& fabric, HostConfig lan, Ipv4 wan_ip, int wan_prefix = 24);

  Host& lan() { return lan_; }
  Ipv4 wan_ip() const { return wan_ip_; }
  bool on_wan(Ipv4 ip) const { return ip.same_subnet(wan_ip_, wan_prefix_); }

  // A packet from a routed host heading into the LAN.
  void from_wan(const Frame& frame);

 private:
  Fabric& fabric_;
  Host lan_;
  Ipv4 wan_ip_;
  int wan_prefix_;
};

}  // namespace softics::net

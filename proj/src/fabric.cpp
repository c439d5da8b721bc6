#include "softics/fabric.hpp"

#include <algorithm>
#include <cmath>

#include "softics/error.hpp"
#include "softics/modbus.hpp"

namespace softics::net {

// ---------------------------------------------------------------------------
// TcpConnection

TcpConnection::TcpConnection(Host& host, bool client, std::uint16_t local_port, Ipv4 remote_ip,
                             std::uint16_t remote_port, std::uint32_t isn)
    : host_(&host),
      client_(client),
      local_port_(local_port),
      remote_ip_(remote_ip),
      remote_port_(remote_port),
      snd_nxt_(isn) {}

void TcpConnection::send(Bytes payload) {
  if (state_ != State::established) return;
  TcpSegment seg;
  seg.src_port = local_port_;
  seg.dst_port = remote_port_;
  seg.seq = snd_nxt_;
  seg.ack = rcv_nxt_;
  seg.flags = tcp_flag::psh | tcp_flag::ack;
  snd_nxt_ += static_cast<std::uint32_t>(payload.size());
  seg.payload = std::move(payload);
  host_->send_segment(remote_ip_, std::move(seg), client_ ? PacketKind::request : PacketKind::response);
}

void TcpConnection::reset() {
  if (state_ == State::closed) return;
  TcpSegment seg;
  seg.src_port = local_port_;
  seg.dst_port = remote_port_;
  seg.seq = snd_nxt_;
  seg.ack = rcv_nxt_;
  seg.flags = tcp_flag::rst | tcp_flag::ack;
  host_->send_segment(remote_ip_, std::move(seg), PacketKind::control);
  close_with("reset");
}

void TcpConnection::abandon(const std::string&) {
  if (state_ == State::closed) return;
  state_ = State::closed;
  auto keep = shared_from_this();
  host_->remove_connection(*this);
}

void TcpConnection::close_with(const std::string& reason) {
  if (state_ == State::closed) return;
  state_ = State::closed;
  auto keep = shared_from_this();
  host_->remove_connection(*this);
  if (on_closed) on_closed(reason);
}

// ---------------------------------------------------------------------------
// Host

Host::Host(Kernel& kernel, Fabric& fabric, HostConfig config)
    : kernel_(kernel), fabric_(fabric), config_(std::move(config)) {
  next_port_ = static_cast<std::uint16_t>(49152 + kernel_.random_below(8192));
  if (config_.capacity_pps > 0)
    service_time_ = Duration{static_cast<std::int64_t>(std::llround(1e6 / config_.capacity_pps))};
}

void Host::require_layer2(const char* operation) const {
  if (attach_kind_ != AttachKind::layer2_port)
    throw CapabilityError(std::string(operation) + " requires a layer-2 switch port; " + config_.name +
                          " is only reachable through layer-3 routing");
}

void Host::drop(const Frame& frame, const char* reason) {
  kernel_.log().append(kernel_.now(), Category::drop,
                       json{{"at", config_.name}, {"reason", reason}, {"kind", to_string(frame.kind)}, {"id", frame.id}});
}

void Host::send_frame(Frame frame) {
  require_layer2("raw frame transmission");
  fabric_.transmit(*this, std::move(frame));
}

void Host::send_segment(Ipv4 dst, TcpSegment segment, PacketKind kind) {
  Ipv4Packet p;
  p.src = config_.ip;
  p.dst = dst;
  p.tcp = std::move(segment);
  send_ip(std::move(p), kind);
}

void Host::send_ip(Ipv4Packet packet, PacketKind kind, bool forwarded) {
  if (!attach_kind_) return;
  if (!forwarded) packet.id = ++ip_id_;
  Frame f;
  f.src = config_.mac;
  f.kind = kind;
  const Ipv4 dst = packet.dst;
  f.payload = std::move(packet);
  if (*attach_kind_ == AttachKind::layer3_route) {
    f.dst = fabric_.config().router_wan_mac;
    fabric_.transmit(*this, std::move(f));
    return;
  }
  Ipv4 next_hop = dst.same_subnet(config_.ip, config_.prefix) ? dst : config_.gateway;
  if (next_hop.is_unspecified()) {
    drop(f, "no route");
    return;
  }
  transmit_resolved(std::move(f), next_hop);
}

void Host::transmit_resolved(Frame frame, Ipv4 next_hop) {
  auto it = arp_.find(next_hop);
  if (it != arp_.end() && it->second.expires > kernel_.now()) {
    frame.dst = it->second.mac;
    fabric_.transmit(*this, std::move(frame));
    return;
  }
  auto [p, created] = pending_.try_emplace(next_hop);
  p->second.frames.emplace_back(std::move(frame), kernel_.now());
  if (created) {
    send_arp_request(next_hop);
    p->second.timeout = kernel_.after(config_.arp_resolve_timeout, [this, next_hop] { arp_timeout(next_hop); });
  }
}

void Host::send_arp_request(Ipv4 target) {
  Frame f;
  f.src = config_.mac;
  f.dst = MacAddress::broadcast();
  f.kind = PacketKind::arp;
  f.payload = ArpMessage{ArpMessage::kRequest, config_.mac, config_.ip, MacAddress{}, target};
  fabric_.transmit(*this, std::move(f));
}

void Host::arp_timeout(Ipv4 target) {
  auto it = pending_.find(target);
  if (it == pending_.end()) return;
  Pending pending = std::move(it->second);
  pending_.erase(it);
  for (const auto& [frame, queued_at] : pending.frames) drop(frame, "arp unresolved");
  for (auto& w : pending.waiters) w(std::nullopt);
}

void Host::learn(Ipv4 ip, MacAddress mac, bool create) {
  if (ip == config_.ip || ip.is_unspecified()) return;
  auto it = arp_.find(ip);
  if (it == arp_.end() && !create) return;
  arp_[ip] = ArpEntry{mac, kernel_.now() + config_.arp_ttl};
  auto p = pending_.find(ip);
  if (p == pending_.end()) return;
  Pending pending = std::move(p->second);
  pending_.erase(p);
  pending.timeout.cancel();
  for (auto& [frame, queued_at] : pending.frames) {
    frame.dst = mac;
    fabric_.transmit(*this, std::move(frame));
  }
  for (auto& w : pending.waiters) w(mac);
}

std::optional<MacAddress> Host::arp_lookup(Ipv4 ip) const {
  auto it = arp_.find(ip);
  if (it == arp_.end()) return std::nullopt;
  return it->second.mac;
}

void Host::resolve(Ipv4 ip, std::function<void(std::optional<MacAddress>)> done) {
  auto it = arp_.find(ip);
  if (it != arp_.end() && it->second.expires > kernel_.now()) {
    done(it->second.mac);
    return;
  }
  auto [p, created] = pending_.try_emplace(ip);
  p->second.waiters.push_back(std::move(done));
  if (created) {
    send_arp_request(ip);
    p->second.timeout = kernel_.after(config_.arp_resolve_timeout, [this, ip] { arp_timeout(ip); });
  }
}

void Host::listen(std::uint16_t port, AcceptFn accept) { listeners_[port] = std::move(accept); }

std::uint16_t Host::allocate_port() {
  for (int attempts = 0; attempts < 16384; ++attempts) {
    const std::uint16_t port = next_port_;
    next_port_ = next_port_ >= 65535 ? 49152 : static_cast<std::uint16_t>(next_port_ + 1);
    const bool used = std::any_of(connections_.begin(), connections_.end(),
                                  [port](const auto& kv) { return std::get<0>(kv.first) == port; });
    if (!used && !listeners_.count(port)) return port;
  }
  throw Error("ephemeral ports exhausted on " + config_.name);
}

ConnectionPtr Host::connect(Ipv4 remote, std::uint16_t port) {
  const std::uint16_t local = allocate_port();
  ConnectionPtr c(new TcpConnection(*this, true, local, remote, port, next_isn()));
  connections_[ConnKey{local, remote.value(), port}] = c;
  TcpSegment syn;
  syn.src_port = local;
  syn.dst_port = port;
  syn.seq = c->snd_nxt_++;
  syn.flags = tcp_flag::syn;
  send_segment(remote, std::move(syn), PacketKind::control);
  return c;
}

void Host::remove_connection(const TcpConnection& c) {
  connections_.erase(ConnKey{c.local_port_, c.remote_ip_.value(), c.remote_port_});
}

void Host::on_arrival(Frame frame) {
  ++stats_.arrivals;
  if (!powered_) {
    drop(frame, "powered off");
    return;
  }
  for (const auto& tap : taps_) tap(frame);
  if (frame.dst != config_.mac && !frame.dst.is_broadcast()) {
    ++stats_.filtered;
    return;
  }
  if (service_time_.count() == 0) {
    process(frame);
    return;
  }
  // The head of the queue is the packet in service.
  if (queue_.size() >= config_.queue_limit + 1) {
    ++stats_.queue_drops;
    drop(frame, "queue full");
    return;
  }
  queue_.push_back(std::move(frame));
  stats_.max_queue = std::max<std::uint64_t>(stats_.max_queue, queue_.size());
  if (!in_service_) start_service();
}

void Host::start_service() {
  in_service_ = true;
  kernel_.after(service_time_, [this] {
    Frame f = std::move(queue_.front());
    queue_.pop_front();
    process(f);
    if (queue_.empty())
      in_service_ = false;
    else
      start_service();
  });
}

void Host::process(const Frame& frame) {
  ++stats_.processed;
  if (const auto* arp = frame.arp()) {
    handle_arp(*arp);
    return;
  }
  const auto& packet = *frame.ip();
  if (packet.dst == config_.ip) {
    handle_tcp(packet);
  } else if (forwarder_) {
    forwarder_(frame);
  }
}

void Host::handle_arp(const ArpMessage& arp) {
  if (arp.op == ArpMessage::kRequest) {
    if (arp.target_ip == config_.ip) {
      learn(arp.sender_ip, arp.sender_mac, true);
      Frame reply;
      reply.src = config_.mac;
      reply.dst = arp.sender_mac;
      reply.kind = PacketKind::arp;
      reply.payload = ArpMessage{ArpMessage::kReply, config_.mac, config_.ip, arp.sender_mac, arp.sender_ip};
      fabric_.transmit(*this, std::move(reply));
    } else {
      learn(arp.sender_ip, arp.sender_mac, false);
    }
  } else if (arp.op == ArpMessage::kReply) {
    // Unsolicited replies overwrite existing entries, as common stacks do.
    learn(arp.sender_ip, arp.sender_mac, pending_.count(arp.sender_ip) > 0);
  }
}

void Host::handle_tcp(const Ipv4Packet& packet) {
  const TcpSegment& seg = packet.tcp;
  const ConnKey key{seg.dst_port, packet.src.value(), seg.src_port};
  if (auto it = connections_.find(key); it != connections_.end()) {
    ConnectionPtr c = it->second;
    if (seg.has(tcp_flag::rst)) {
      c->close_with("reset by peer");
      return;
    }
    if (c->state_ == TcpConnection::State::syn_sent) {
      if (seg.has(tcp_flag::syn | tcp_flag::ack)) {
        c->rcv_nxt_ = seg.seq + 1;
        c->state_ = TcpConnection::State::established;
        TcpSegment ack;
        ack.src_port = c->local_port_;
        ack.dst_port = c->remote_port_;
        ack.seq = c->snd_nxt_;
        ack.ack = c->rcv_nxt_;
        ack.flags = tcp_flag::ack;
        send_segment(c->remote_ip_, std::move(ack), PacketKind::control);
        if (c->on_established) c->on_established();
      }
      return;
    }
    if (!seg.has(tcp_flag::syn)) {
      if (!seg.payload.empty()) {
        c->rcv_nxt_ = seg.seq + static_cast<std::uint32_t>(seg.payload.size());
        TcpSegment ack;
        ack.src_port = c->local_port_;
        ack.dst_port = c->remote_port_;
        ack.seq = c->snd_nxt_;
        ack.ack = c->rcv_nxt_;
        ack.flags = tcp_flag::ack;
        // The application sees the data first so a synchronous reply leaves
        // ahead of the bare ACK, as with a piggybacked acknowledgement.
        if (c->on_data) c->on_data(seg.payload);
        send_segment(c->remote_ip_, std::move(ack), PacketKind::ack);
      }
      return;
    }
    // A fresh SYN on a known tuple: the peer restarted.
    c->abandon("peer restarted");
  }

  if (seg.has(tcp_flag::syn) && !seg.has(tcp_flag::ack)) {
    TcpSegment reply;
    reply.src_port = seg.dst_port;
    reply.dst_port = seg.src_port;
    reply.ack = seg.seq + 1;
    auto l = listeners_.find(seg.dst_port);
    if (l == listeners_.end()) {
      reply.flags = tcp_flag::rst | tcp_flag::ack;
      send_segment(packet.src, std::move(reply), PacketKind::control);
      return;
    }
    ConnectionPtr c(new TcpConnection(*this, false, seg.dst_port, packet.src, seg.src_port, next_isn()));
    c->rcv_nxt_ = seg.seq + 1;
    c->state_ = TcpConnection::State::established;
    connections_[key] = c;
    reply.seq = c->snd_nxt_++;
    reply.flags = tcp_flag::syn | tcp_flag::ack;
    send_segment(packet.src, std::move(reply), PacketKind::control);
    l->second(c);
    return;
  }
  // Flagless probes (hping3 default mode) and stray resets are discarded.
  if (seg.flags == 0 || seg.has(tcp_flag::rst)) return;
  TcpSegment rst;
  rst.src_port = seg.dst_port;
  rst.dst_port = seg.src_port;
  rst.seq = seg.ack;
  rst.flags = tcp_flag::rst;
  send_segment(packet.src, std::move(rst), PacketKind::control);
}

// ---------------------------------------------------------------------------
// Fabric

Fabric::Fabric(Kernel& kernel, FabricConfig config) : kernel_(kernel), config_(config) {
  ports_.resize(config_.ports + 1);  // last entry is the management (CPU) port
}

std::vector<Host*> Fabric::hosts() const {
  std::vector<Host*> out;
  for (const auto& p : ports_)
    if (p.host) out.push_back(p.host);
  for (auto* h : wan_hosts_) out.push_back(h);
  return out;
}

Host* Fabric::find_host(Ipv4 ip) const {
  for (auto* h : hosts())
    if (h->ip() == ip) return h;
  return nullptr;
}

int Fabric::attach(Host& host, AttachPoint point) {
  for (auto* h : hosts()) {
    if (h == &host) throw ConfigError("topology", host.name() + " is already attached");
    if (h->ip() == host.ip()) throw ConfigError("topology", "duplicate IP " + host.ip().to_string());
    if (h->mac() == host.mac()) throw ConfigError("topology", "duplicate MAC " + host.mac().to_string());
  }
  if (point.kind == AttachKind::layer3_route) {
    if (!router_) throw ConfigError("topology", "layer-3 attach requires a router");
    wan_hosts_.push_back(&host);
    host.attach_kind_ = AttachKind::layer3_route;
    return -1;
  }
  for (std::size_t i = 0; i < config_.ports; ++i) {
    if (!ports_[i].host) {
      ports_[i].host = &host;
      host.attach_kind_ = AttachKind::layer2_port;
      return static_cast<int>(i);
    }
  }
  throw ConfigError("topology", "no free switch port for " + host.name());
}

void Fabric::attach_management(Host& host) {
  for (auto* h : hosts())
    if (h->ip() == host.ip()) throw ConfigError("topology", "duplicate IP " + host.ip().to_string());
  if (ports_.back().host) throw ConfigError("topology", "last switch port is taken; no room for management");
  ports_.back().host = &host;
  host.attach_kind_ = AttachKind::layer2_port;
}

void Fabric::set_mirror(const std::vector<int>& sources, int mirror_port) {
  const int n = static_cast<int>(config_.ports);
  if (mirror_port < 0 || mirror_port >= n) throw ConfigError("mirror", "mirror port does not exist");
  for (int s : sources) {
    if (s < 0 || s >= n) throw ConfigError("mirror", "source port " + std::to_string(s) + " does not exist");
    if (s == mirror_port) throw ConfigError("mirror", "mirror port cannot also be a source");
  }
  clear_mirror();
  for (int s : sources) ports_[static_cast<std::size_t>(s)].mirror_source = true;
  mirror_port_ = mirror_port;
}

void Fabric::clear_mirror() {
  for (auto& p : ports_) p.mirror_source = false;
  mirror_port_ = -1;
}

void Fabric::set_link_up(int port, bool up) { ports_.at(static_cast<std::size_t>(port)).up = up; }

bool Fabric::link_up(int port) const { return ports_.at(static_cast<std::size_t>(port)).up; }

std::optional<int> Fabric::port_of(const Host& host) const {
  for (std::size_t i = 0; i < config_.ports; ++i)
    if (ports_[i].host == &host) return static_cast<int>(i);
  return std::nullopt;
}

Host* Fabric::host_on(int port) const { return ports_.at(static_cast<std::size_t>(port)).host; }

std::size_t Fabric::free_ports() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < config_.ports; ++i) n += ports_[i].host == nullptr;
  return n;
}

std::optional<int> Fabric::mac_table_lookup(MacAddress mac) const {
  auto it = mac_table_.find(mac);
  if (it == mac_table_.end()) return std::nullopt;
  return it->second;
}

void Fabric::record(const Host& from, const Frame& frame) {
  json p{{"sender", from.name()}, {"kind", to_string(frame.kind)}, {"len", wire_length(frame)}, {"id", frame.id}};
  if (const auto* a = frame.arp()) {
    p["src"] = a->sender_ip.to_string();
    p["dst"] = a->target_ip.to_string();
    p["arp"] = json{{"op", a->op}, {"smac", a->sender_mac.to_string()}, {"dmac", frame.dst.to_string()}};
  } else {
    const auto& ip = *frame.ip();
    p["src"] = ip.src.to_string();
    p["dst"] = ip.dst.to_string();
    p["sp"] = ip.tcp.src_port;
    p["dp"] = ip.tcp.dst_port;
    p["flags"] = ip.tcp.flags;
    p["dir"] = ip.tcp.dst_port < ip.tcp.src_port ? "c2s" : "s2c";
    const auto& payload = ip.tcp.payload;
    if ((ip.tcp.src_port == modbus::kPort || ip.tcp.dst_port == modbus::kPort) && payload.size() >= 8) {
      p["tid"] = (payload[0] << 8) | payload[1];
      p["fc"] = payload[7];
      p["pdu"] = to_hex(ByteView(payload).subspan(7));
    }
  }
  if (frame.relayed) p["relay"] = true;
  kernel_.log().append(kernel_.now(), Category::packet, std::move(p));
  if (capture_enabled_ && from.attach_kind() == AttachKind::layer2_port)
    capture_.push_back(CaptureRecord{kernel_.now(), encode_frame(frame)});
}

void Fabric::leg_drop(const Frame& frame, const std::string& where, const char* reason) {
  ++counters_.legs_dropped;
  kernel_.log().append(kernel_.now(), Category::drop,
                       json{{"at", where}, {"reason", reason}, {"kind", to_string(frame.kind)}, {"id", frame.id}});
}

void Fabric::transmit(Host& from, Frame frame) {
  frame.id = next_frame_id_++;
  frame.mirrored = false;
  ++counters_.frames_sent;
  record(from, frame);

  if (from.attach_kind() == AttachKind::layer3_route) {
    ++counters_.legs_started;
    kernel_.after(config_.wan_latency, [this, frame = std::move(frame)] {
      ++counters_.legs_completed;
      if (router_) router_->from_wan(frame);
    });
    return;
  }

  int port = -1;
  for (std::size_t i = 0; i < ports_.size(); ++i)
    if (ports_[i].host == &from) port = static_cast<int>(i);
  if (port < 0) return;
  ++counters_.legs_started;
  if (!ports_[static_cast<std::size_t>(port)].up) {
    leg_drop(frame, from.name(), "link down");
    return;
  }
  kernel_.after(config_.link_latency, [this, port, frame = std::move(frame)] {
    ++counters_.legs_completed;
    switch_ingress(port, frame);
  });
}

void Fabric::switch_ingress(int port, const Frame& frame) {
  mac_table_[frame.src] = port;
  if (mirror_port_ >= 0 && ports_[static_cast<std::size_t>(port)].mirror_source) {
    Frame copy = frame;
    copy.mirrored = true;
    ++counters_.mirrored;
    egress(mirror_port_, std::move(copy));
  }
  const int n = static_cast<int>(ports_.size());
  if (!frame.dst.is_broadcast()) {
    if (auto it = mac_table_.find(frame.dst); it != mac_table_.end()) {
      if (it->second != port) egress(it->second, frame);
      return;
    }
    ++counters_.flooded;
  }
  for (int q = 0; q < n; ++q)
    if (q != port) egress(q, frame);
}

void Fabric::egress(int port, Frame frame) {
  auto& p = ports_[static_cast<std::size_t>(port)];
  if (!p.host) return;
  ++counters_.legs_started;
  if (!p.up) {
    leg_drop(frame, p.host->name(), "link down");
    return;
  }
  Host* host = p.host;
  kernel_.after(config_.link_latency, [this, host, frame = std::move(frame)]() mutable {
    ++counters_.legs_completed;
    host->on_arrival(std::move(frame));
  });
}

void Fabric::deliver_wan(Frame frame) {
  const Ipv4 dst = frame.ip()->dst;
  Host* target = nullptr;
  for (auto* h : wan_hosts_)
    if (h->ip() == dst) target = h;
  ++counters_.legs_started;
  if (!target) {
    leg_drop(frame, "router", "no route");
    return;
  }
  frame.dst = target->mac();
  kernel_.after(config_.wan_latency, [this, target, frame = std::move(frame)]() mutable {
    ++counters_.legs_completed;
    target->on_arrival(std::move(frame));
  });
}

// ---------------------------------------------------------------------------
// Router

Router::Router(Kernel& kernel, Fabric& fabric, HostConfig lan, Ipv4 wan_ip, int wan_prefix)
    : fabric_(fabric), lan_(kernel, fabric, std::move(lan)), wan_ip_(wan_ip), wan_prefix_(wan_prefix) {
  fabric_.set_router(*this);
  lan_.set_forwarder([this](const Frame& frame) {
    Ipv4Packet packet = *frame.ip();
    if (!on_wan(packet.dst) || packet.ttl <= 1) return;
    --packet.ttl;
    Frame out;
    out.src = fabric_.config().router_wan_mac;
    out.kind = frame.kind;
    out.id = frame.id;
    out.payload = std::move(packet);
    fabric_.deliver_wan(std::move(out));
  });
}

void Router::from_wan(const Frame& frame) {
  Ipv4Packet packet = *frame.ip();
  if (!packet.dst.same_subnet(lan_.ip(), lan_.config().prefix) || packet.ttl <= 1) return;
  --packet.ttl;
  lan_.send_ip(std::move(packet), frame.kind, true);
}

}  // namespace softics::net

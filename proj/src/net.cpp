#include "softics/net.hpp"

namespace softics::net {
namespace {

void put16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put32(Bytes& out, std::uint32_t v) {
  put16(out, static_cast<std::uint16_t>(v >> 16));
  put16(out, static_cast<std::uint16_t>(v));
}

void put_mac(Bytes& out, const MacAddress& mac) { out.insert(out.end(), mac.octets().begin(), mac.octets().end()); }

void set16(Bytes& out, std::size_t at, std::uint16_t v) {
  out[at] = static_cast<std::uint8_t>(v >> 8);
  out[at + 1] = static_cast<std::uint8_t>(v);
}

void encode_arp(Bytes& out, const ArpMessage& m) {
  put16(out, 1);       // Ethernet
  put16(out, 0x0800);  // IPv4
  out.push_back(6);
  out.push_back(4);
  put16(out, m.op);
  put_mac(out, m.sender_mac);
  put32(out, m.sender_ip.value());
  put_mac(out, m.target_mac);
  put32(out, m.target_ip.value());
}

void encode_ipv4(Bytes& out, const Ipv4Packet& p) {
  const std::size_t ip_start = out.size();
  const std::size_t tcp_len = 20 + p.tcp.payload.size();
  out.push_back(0x45);
  out.push_back(0);
  put16(out, static_cast<std::uint16_t>(20 + tcp_len));
  put16(out, p.id);
  put16(out, 0x4000);  // don't fragment
  out.push_back(p.ttl);
  out.push_back(6);
  put16(out, 0);
  put32(out, p.src.value());
  put32(out, p.dst.value());
  set16(out, ip_start + 10, internet_checksum(ByteView(out.data() + ip_start, 20)));

  const std::size_t tcp_start = out.size();
  put16(out, p.tcp.src_port);
  put16(out, p.tcp.dst_port);
  put32(out, p.tcp.seq);
  put32(out, p.tcp.ack);
  out.push_back(0x50);
  out.push_back(p.tcp.flags);
  put16(out, p.tcp.window);
  put16(out, 0);
  put16(out, 0);
  out.insert(out.end(), p.tcp.payload.begin(), p.tcp.payload.end());

  // Pseudo-header sum: addresses, protocol, TCP length.
  std::uint32_t pseudo = 0;
  pseudo += p.src.value() >> 16;
  pseudo += p.src.value() & 0xffff;
  pseudo += p.dst.value() >> 16;
  pseudo += p.dst.value() & 0xffff;
  pseudo += 6;
  pseudo += static_cast<std::uint32_t>(tcp_len);
  set16(out, tcp_start + 16, internet_checksum(ByteView(out.data() + tcp_start, tcp_len), pseudo));
}

}  // namespace

std::string_view to_string(PacketKind kind) {
  switch (kind) {
    case PacketKind::request:
      return "request";
    case PacketKind::response:
      return "response";
    case PacketKind::ack:
      return "ack";
    case PacketKind::control:
      return "control";
    case PacketKind::flood:
      return "flood";
    case PacketKind::arp:
      return "arp";
  }
  return "control";
}

std::uint16_t internet_checksum(ByteView data, std::uint32_t initial) {
  std::uint32_t sum = initial;
  for (std::size_t i = 0; i + 1 < data.size(); i += 2) sum += (std::uint32_t{data[i]} << 8) | data[i + 1];
  if (data.size() % 2) sum += std::uint32_t{data.back()} << 8;
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum);
}

Bytes encode_frame(const Frame& frame) {
  Bytes out;
  out.reserve(80);
  put_mac(out, frame.dst);
  put_mac(out, frame.src);
  put16(out, static_cast<std::uint16_t>(frame.ethertype()));
  if (const auto* a = frame.arp())
    encode_arp(out, *a);
  else
    encode_ipv4(out, *frame.ip());
  if (out.size() < kMinFrameSize) out.resize(kMinFrameSize, 0);
  return out;
}

std::size_t wire_length(const Frame& frame) {
  if (frame.arp()) return kMinFrameSize;
  const std::size_t n = 14 + 20 + 20 + frame.ip()->tcp.payload.size();
  return n < kMinFrameSize ? kMinFrameSize : n;
}

}  // namespace softics::net

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

#include "softics/types.hpp"

namespace softics::net {

enum class EtherType : std::uint16_t { ipv4 = 0x0800, arp = 0x0806 };

struct ArpMessage {
  static constexpr std::uint16_t kRequest = 1;
  static constexpr std::uint16_t kReply = 2;

  std::uint16_t op = kRequest;
  MacAddress sender_mac;
  Ipv4 sender_ip;
  MacAddress target_mac;
  Ipv4 target_ip;

  bool operator==(const ArpMessage&) const = default;
};

namespace tcp_flag {
constexpr std::uint8_t fin = 0x01;
constexpr std::uint8_t syn = 0x02;
constexpr std::uint8_t rst = 0x04;
constexpr std::uint8_t psh = 0x08;
constexpr std::uint8_t ack = 0x10;
}  // namespace tcp_flag

struct TcpSegment {
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint32_t seq = 0;
  std::uint32_t ack = 0;
  std::uint8_t flags = 0;
  std::uint16_t window = 64240;
  Bytes payload;

  bool has(std::uint8_t flag) const { return (flags & flag) == flag; }
  bool operator==(const TcpSegment&) const = default;
};

struct Ipv4Packet {
  Ipv4 src;
  Ipv4 dst;
  std::uint8_t ttl = 64;
  std::uint16_t id = 0;
  TcpSegment tcp;

  bool operator==(const Ipv4Packet&) const = default;
};

// Accounting class of a frame, assigned by the stack that originates it.
enum class PacketKind { request, response, ack, control, flood, arp };

std::string_view to_string(PacketKind kind);

struct Frame {
  MacAddress src;
  MacAddress dst;
  std::variant<ArpMessage, Ipv4Packet> payload;

  // Simulation metadata, not part of the wire image.
  PacketKind kind = PacketKind::control;
  std::uint64_t id = 0;   // shared by every copy of one transmission
  bool mirrored = false;  // copy produced by a mirror port
  bool relayed = false;   // re-emitted by a forwarding attacker

  EtherType ethertype() const { return std::holds_alternative<ArpMessage>(payload) ? EtherType::arp : EtherType::ipv4; }
  const ArpMessage* arp() const { return std::get_if<ArpMessage>(&payload); }
  const Ipv4Packet* ip() const { return std::get_if<Ipv4Packet>(&payload); }
  Ipv4Packet* ip() { return std::get_if<Ipv4Packet>(&payload); }
};

constexpr std::size_t kMinFrameSize = 60;  // Ethernet minimum without FCS

// Ethernet II + ARP or IPv4/TCP with valid checksums, padded to 60 bytes.
Bytes encode_frame(const Frame& frame);
std::size_t wire_length(const Frame& frame);

std::uint16_t internet_checksum(ByteView data, std::uint32_t initial = 0);

}  // namespace softics::net

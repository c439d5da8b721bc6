#include "softics/types.hpp"

#include <charconv>
#include <cstdio>

#include "softics/error.hpp"

namespace softics {

std::optional<Ipv4> Ipv4::parse(std::string_view text) {
  std::uint32_t value = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int i = 0; i < 4; ++i) {
    unsigned octet = 0;
    auto [next, ec] = std::from_chars(p, end, octet);
    if (ec != std::errc{} || next == p || octet > 255 || next - p > 3) return std::nullopt;
    value = (value << 8) | octet;
    p = next;
    if (i < 3) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
  }
  if (p != end) return std::nullopt;
  return Ipv4{value};
}

Ipv4 Ipv4::from_string(std::string_view text) {
  if (auto ip = parse(text)) return *ip;
  throw ArgumentError("invalid IPv4 address '" + std::string(text) + "'");
}

std::string Ipv4::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", octet(0), octet(1), octet(2), octet(3));
  return buf;
}

std::optional<MacAddress> MacAddress::parse(std::string_view text) {
  if (text.size() != 17) return std::nullopt;
  std::array<std::uint8_t, 6> octets{};
  for (int i = 0; i < 6; ++i) {
    const char* p = text.data() + 3 * i;
    unsigned v = 0;
    auto [next, ec] = std::from_chars(p, p + 2, v, 16);
    if (ec != std::errc{} || next != p + 2) return std::nullopt;
    if (i < 5 && text[3 * i + 2] != ':') return std::nullopt;
    octets[i] = static_cast<std::uint8_t>(v);
  }
  return MacAddress{octets};
}

MacAddress MacAddress::from_string(std::string_view text) {
  if (auto mac = parse(text)) return *mac;
  throw ArgumentError("invalid MAC address '" + std::string(text) + "'");
}

std::string MacAddress::to_string() const {
  char buf[18];
  std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", octets_[0], octets_[1], octets_[2], octets_[3],
                octets_[4], octets_[5]);
  return buf;
}

std::string to_hex(ByteView bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

}  // namespace softics

#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace softics {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// Virtual time since simulation start.
using SimTime = std::chrono::microseconds;
using Duration = std::chrono::microseconds;

using namespace std::chrono_literals;

constexpr double to_seconds(SimTime t) { return static_cast<double>(t.count()) / 1e6; }
constexpr SimTime from_seconds(double s) {
  return SimTime{static_cast<std::int64_t>(s * 1e6 + (s >= 0 ? 0.5 : -0.5))};
}

class Ipv4 {
 public:
  constexpr Ipv4() = default;
  constexpr explicit Ipv4(std::uint32_t value) : value_(value) {}
  constexpr Ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
      : value_((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) | d) {}

  static std::optional<Ipv4> parse(std::string_view text);
  // Throws ArgumentError on malformed input.
  static Ipv4 from_string(std::string_view text);

  constexpr std::uint32_t value() const { return value_; }
  constexpr std::uint8_t octet(int i) const { return static_cast<std::uint8_t>(value_ >> (24 - 8 * i)); }
  constexpr bool is_unspecified() const { return value_ == 0; }
  constexpr bool same_subnet(Ipv4 other, int prefix) const {
    const std::uint32_t mask = prefix == 0 ? 0 : ~std::uint32_t{0} << (32 - prefix);
    return (value_ & mask) == (other.value_ & mask);
  }

  std::string to_string() const;

  constexpr auto operator<=>(const Ipv4&) const = default;

 private:
  std::uint32_t value_ = 0;
};

class MacAddress {
 public:
  constexpr MacAddress() = default;
  constexpr explicit MacAddress(std::array<std::uint8_t, 6> octets) : octets_(octets) {}

  static constexpr MacAddress broadcast() { return MacAddress{{0xff, 0xff, 0xff, 0xff, 0xff, 0xff}}; }
  static std::optional<MacAddress> parse(std::string_view text);
  static MacAddress from_string(std::string_view text);
  // Locally administered address 02:00:00:00:hi:lo.
  static constexpr MacAddress local(std::uint16_t id) {
    return MacAddress{{0x02, 0x00, 0x00, 0x00, static_cast<std::uint8_t>(id >> 8), static_cast<std::uint8_t>(id)}};
  }

  constexpr const std::array<std::uint8_t, 6>& octets() const { return octets_; }
  constexpr bool is_broadcast() const { return *this == broadcast(); }
  std::string to_string() const;

  constexpr auto operator<=>(const MacAddress&) const = default;

 private:
  std::array<std::uint8_t, 6> octets_{};
};

std::string to_hex(ByteView bytes);

}  // namespace softics

#pragma once

#include <random>
#include <string>
#include <vector>

#include "softics/modbus.hpp"

namespace modbus_gen {

using softics::Bytes;
using namespace softics::modbus;

inline Bytes hex(std::initializer_list<int> v) {
  Bytes b;
  for (int x : v) b.push_back(static_cast<std::uint8_t>(x));
  return b;
}

// Random PDUs covering every supported function code plus opaque ones.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  unsigned below(unsigned n) { return static_cast<unsigned>(rng_() % n); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(rng_()); }
  std::uint8_t u8() { return static_cast<std::uint8_t>(rng_()); }
  std::vector<std::uint8_t> bytes(std::size_t n) {
    std::vector<std::uint8_t> v(n);
    for (auto& b : v) b = u8();
    return v;
  }
  std::vector<std::uint16_t> words(std::size_t n) {
    std::vector<std::uint16_t> v(n);
    for (auto& w : v) w = u16();
    return v;
  }
  std::string text(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<char>(32 + below(95)));
    return s;
  }

  Pdu request() {
    static const FunctionCode reads[] = {FunctionCode::ReadCoils, FunctionCode::ReadDiscreteInputs,
                                         FunctionCode::ReadHoldingRegisters, FunctionCode::ReadInputRegisters};
    switch (below(7)) {
      case 0:
        return ReadRequest{reads[below(4)], u16(), u16()};
      case 1:
        return WriteSingleCoil{u16(), below(3) == 0 ? u16() : (below(2) ? kCoilOn : kCoilOff)};
      case 2:
        return WriteSingleRegister{u16(), u16()};
      case 3: {
        const auto n = below(247);
        return WriteMultipleCoils{u16(), u16(), bytes(n)};
      }
      case 4: {
        const auto n = below(124);
        return WriteMultipleRegisters{u16(), u16(), words(n)};
      }
      case 5:
        return ReadDeviceIdRequest{u8(), u8()};
      default: {
        std::uint8_t fc;
        do fc = u8();
        while (is_supported_function(fc));
        return OpaquePdu{fc, bytes(below(200))};
      }
    }
  }

  Pdu response() {
    switch (below(6)) {
      case 0:
        return ReadBitsResponse{below(2) ? FunctionCode::ReadCoils : FunctionCode::ReadDiscreteInputs,
                                bytes(below(251))};
      case 1:
        return ReadRegistersResponse{below(2) ? FunctionCode::ReadHoldingRegisters : FunctionCode::ReadInputRegisters,
                                     words(below(126))};
      case 2:
        return WriteMultipleResponse{below(2) ? FunctionCode::WriteMultipleCoils : FunctionCode::WriteMultipleRegisters,
                                     u16(), u16()};
      case 3: {
        ReadDeviceIdResponse r;
        r.read_code = u8();
        r.conformity = u8();
        r.more_follows = u8();
        r.next_object = u8();
        std::size_t budget = 253 - 7;
        const auto n = below(4);
        for (unsigned i = 0; i < n; ++i) {
          const std::size_t len = std::min<std::size_t>(below(60), budget >= 2 ? budget - 2 : 0);
          if (budget < 2) break;
          r.objects.push_back(DeviceIdObject{u8(), text(len)});
          budget -= 2 + len;
        }
        return r;
      }
      case 4:
        return ExceptionResponse{static_cast<std::uint8_t>(below(0x7f) + 1), static_cast<ExceptionCode>(u8())};
      default: {
        std::uint8_t fc;
        do fc = static_cast<std::uint8_t>(below(0x80));
        while (is_supported_function(fc));
        return OpaquePdu{fc, bytes(below(200))};
      }
    }
  }

 private:
  std::mt19937_64 rng_;
};

struct MalformedCase {
  const char* name;
  Bytes pdu;
  ExceptionCode expected;
};

// One request per malformed class and the exception a server must answer with,
// against a bank of 16 coils, 8 discrete inputs, 4 input and 4 holding registers.
inline std::vector<MalformedCase> malformed_requests() {
  return {
      {"unknown function", hex({0x07}), ExceptionCode::IllegalFunction},
      {"user function", hex({0x41, 0x00, 0x00}), ExceptionCode::IllegalFunction},
      {"response sent as request", hex({0x83, 0x02}), ExceptionCode::IllegalFunction},
      {"address past end", hex({0x01, 0x00, 0x10, 0x00, 0x01}), ExceptionCode::IllegalDataAddress},
      {"range straddles end", hex({0x03, 0x00, 0x03, 0x00, 0x02}), ExceptionCode::IllegalDataAddress},
      {"zero count", hex({0x01, 0x00, 0x00, 0x00, 0x00}), ExceptionCode::IllegalDataValue},
      {"count above 2000", hex({0x02, 0x00, 0x00, 0x07, 0xD1}), ExceptionCode::IllegalDataValue},
      {"register count above 125", hex({0x03, 0x00, 0x00, 0x00, 0x7E}), ExceptionCode::IllegalDataValue},
      {"coil value not FF00/0000", hex({0x05, 0x00, 0x00, 0x12, 0x34}), ExceptionCode::IllegalDataValue},
      {"write single coil out of range", hex({0x05, 0x00, 0x20, 0xFF, 0x00}), ExceptionCode::IllegalDataAddress},
      {"write register out of range", hex({0x06, 0x00, 0x09, 0x00, 0x01}), ExceptionCode::IllegalDataAddress},
      {"coil byte count mismatch", hex({0x0F, 0x00, 0x00, 0x00, 0x0A, 0x01, 0xFF}), ExceptionCode::IllegalDataValue},
      {"register count mismatch", hex({0x10, 0x00, 0x00, 0x00, 0x02, 0x02, 0x00, 0x01}),
       ExceptionCode::IllegalDataValue},
      {"odd register byte count", hex({0x10, 0x00, 0x00, 0x00, 0x01, 0x01, 0x00}), ExceptionCode::IllegalDataValue},
      {"truncated read", hex({0x03, 0x00}), ExceptionCode::IllegalDataValue},
      {"trailing bytes", hex({0x03, 0x00, 0x00, 0x00, 0x01, 0xAA}), ExceptionCode::IllegalDataValue},
      {"device id bad read code", hex({0x2B, 0x0E, 0x09, 0x00}), ExceptionCode::IllegalDataValue},
      {"device id unknown object", hex({0x2B, 0x0E, 0x04, 0x50}), ExceptionCode::IllegalDataAddress},
      {"unsupported MEI type", hex({0x2B, 0x0D, 0x00}), ExceptionCode::IllegalFunction},
  };
}

}  // namespace modbus_gen

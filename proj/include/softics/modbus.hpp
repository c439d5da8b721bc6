#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "softics/types.hpp"

namespace softics::modbus {

constexpr std::size_t kMbapSize = 7;
constexpr std::size_t kMaxPduSize = 253;
constexpr std::size_t kMaxAduSize = kMbapSize + kMaxPduSize;
constexpr std::uint16_t kPort = 502;

enum class FunctionCode : std::uint8_t {
  ReadCoils = 0x01,
  ReadDiscreteInputs = 0x02,
  ReadHoldingRegisters = 0x03,
  ReadInputRegisters = 0x04,
  WriteSingleCoil = 0x05,
  WriteSingleRegister = 0x06,
  WriteMultipleCoils = 0x0F,
  WriteMultipleRegisters = 0x10,
  EncapsulatedInterface = 0x2B,
};

constexpr std::uint8_t kMeiReadDeviceId = 0x0E;
constexpr std::uint16_t kCoilOn = 0xFF00;
constexpr std::uint16_t kCoilOff = 0x0000;

enum class ExceptionCode : std::uint8_t {
  IllegalFunction = 0x01,
  IllegalDataAddress = 0x02,
  IllegalDataValue = 0x03,
  ServerDeviceFailure = 0x04,
};

enum class Direction { request, response };

struct MbapHeader {
  std::uint16_t transaction_id = 0;
  std::uint16_t protocol_id = 0;
  std::uint16_t length = 0;
  std::uint8_t unit_id = 1;

  bool operator==(const MbapHeader&) const = default;
};

// Request for function codes 0x01..0x04.
struct ReadRequest {
  FunctionCode function = FunctionCode::ReadCoils;
  std::uint16_t address = 0;
  std::uint16_t count = 0;
  bool operator==(const ReadRequest&) const = default;
};

// Response to 0x01/0x02; bits packed LSB-first as on the wire.
struct ReadBitsResponse {
  FunctionCode function = FunctionCode::ReadCoils;
  std::vector<std::uint8_t> packed;
  bool operator==(const ReadBitsResponse&) const = default;
};

// Response to 0x03/0x04.
struct ReadRegistersResponse {
  FunctionCode function = FunctionCode::ReadHoldingRegisters;
  std::vector<std::uint16_t> values;
  bool operator==(const ReadRegistersResponse&) const = default;
};

// 0x05, identical layout for request and echo. The raw value is kept so that
// non-standard values survive decoding and can be rejected by the server.
struct WriteSingleCoil {
  std::uint16_t address = 0;
  std::uint16_t raw_value = kCoilOff;
  bool on() const { return raw_value == kCoilOn; }
  bool operator==(const WriteSingleCoil&) const = default;
};

struct WriteSingleRegister {
  std::uint16_t address = 0;
  std::uint16_t value = 0;
  bool operator==(const WriteSingleRegister&) const = default;
};

// 0x0F request. `count` and the packed payload are independent on the wire.
struct WriteMultipleCoils {
  std::uint16_t address = 0;
  std::uint16_t count = 0;
  std::vector<std::uint8_t> packed;
  bool operator==(const WriteMultipleCoils&) const = default;
};

// 0x10 request.
struct WriteMultipleRegisters {
  std::uint16_t address = 0;
  std::uint16_t count = 0;
  std::vector<std::uint16_t> values;
  bool operator==(const WriteMultipleRegisters&) const = default;
};

// Response to 0x0F/0x10.
struct WriteMultipleResponse {
  FunctionCode function = FunctionCode::WriteMultipleCoils;
  std::uint16_t address = 0;
  std::uint16_t count = 0;
  bool operator==(const WriteMultipleResponse&) const = default;
};

// 0x2B / MEI 0x0E request.
struct ReadDeviceIdRequest {
  std::uint8_t read_code = 1;
  std::uint8_t object_id = 0;
  bool operator==(const ReadDeviceIdRequest&) const = default;
};

struct DeviceIdObject {
  std::uint8_t id = 0;
  std::string value;
  bool operator==(const DeviceIdObject&) const = default;
};

struct ReadDeviceIdResponse {
  std::uint8_t read_code = 1;
  std::uint8_t conformity = 0x01;
  std::uint8_t more_follows = 0;
  std::uint8_t next_object = 0;
  std::vector<DeviceIdObject> objects;
  bool operator==(const ReadDeviceIdResponse&) const = default;
};

struct ExceptionResponse {
  std::uint8_t function = 0;  // without the 0x80 flag
  ExceptionCode code = ExceptionCode::IllegalFunction;
  bool operator==(const ExceptionResponse&) const = default;
};

// Anything outside the supported function set, preserved byte for byte.
struct OpaquePdu {
  std::uint8_t function = 0;
  std::vector<std::uint8_t> data;
  bool operator==(const OpaquePdu&) const = default;
};

using Pdu = std::variant<ReadRequest, ReadBitsResponse, ReadRegistersResponse, WriteSingleCoil, WriteSingleRegister,
                         WriteMultipleCoils, WriteMultipleRegisters, WriteMultipleResponse, ReadDeviceIdRequest,
                         ReadDeviceIdResponse, ExceptionResponse, OpaquePdu>;

struct Adu {
  MbapHeader header;
  Pdu pdu;
  bool operator==(const Adu&) const = default;
};

std::uint8_t function_byte(const Pdu& pdu);
bool is_exception(const Pdu& pdu);
bool is_supported_function(std::uint8_t function);

Bytes encode_pdu(const Pdu& pdu);
// Throws ProtocolError when the bytes do not form a valid PDU of a supported
// function code. Unknown codes decode to OpaquePdu.
Pdu decode_pdu(ByteView bytes, Direction direction);

// MBAP header followed by the PDU; the length field is recomputed from the PDU.
Bytes encode_adu(const MbapHeader& header, const Pdu& pdu);
// Exactly one ADU. FramingError when `bytes` is too short, ProtocolError when
// header fields contradict the payload.
Adu decode_adu(ByteView bytes, Direction direction);
// Validates only the MBAP header and the overall length; same errors as decode_adu.
MbapHeader decode_mbap(ByteView bytes);
// Size of the first ADU in a byte stream, nullopt when the header is incomplete.
std::optional<std::size_t> adu_size(ByteView stream);

std::vector<std::uint8_t> pack_bits(const std::vector<bool>& bits);
std::vector<bool> unpack_bits(const std::vector<std::uint8_t>& packed, std::size_t count);

struct DeviceIdentity {
  std::string vendor;
  std::string product;
  std::string revision;
  bool operator==(const DeviceIdentity&) const = default;
};

class RegisterBank {
 public:
  RegisterBank() = default;
  RegisterBank(std::size_t coils, std::size_t discrete_inputs, std::size_t holding_registers,
               std::size_t input_registers, DeviceIdentity identity = {});

  std::size_t coil_count() const { return coils_.size(); }
  std::size_t discrete_input_count() const { return discrete_inputs_.size(); }
  std::size_t holding_register_count() const { return holding_.size(); }
  std::size_t input_register_count() const { return input_.size(); }

  bool coil(std::size_t address) const { return coils_.at(address); }
  bool discrete_input(std::size_t address) const { return discrete_inputs_.at(address); }
  std::uint16_t holding_register(std::size_t address) const { return holding_.at(address); }
  std::uint16_t input_register(std::size_t address) const { return input_.at(address); }

  void set_coil(std::size_t address, bool value) { coils_.at(address) = value; }
  void set_discrete_input(std::size_t address, bool value) { discrete_inputs_.at(address) = value; }
  void set_holding_register(std::size_t address, std::uint16_t value) { holding_.at(address) = value; }
  void set_input_register(std::size_t address, std::uint16_t value) { input_.at(address) = value; }

  const DeviceIdentity& identity() const { return identity_; }

  bool operator==(const RegisterBank&) const = default;

 private:
  std::vector<bool> coils_;
  std::vector<bool> discrete_inputs_;
  std::vector<std::uint16_t> holding_;
  std::vector<std::uint16_t> input_;
  DeviceIdentity identity_;
};

// Server-side semantics for one request. Never throws on malformed requests;
// they map to exception responses.
Pdu execute_request(RegisterBank& bank, const Pdu& request);

// Reply to request bytes that do not decode: IllegalDataValue for their function.
ExceptionResponse reject_malformed(ByteView request_pdu);

// Raw request bytes through decode_pdu and execute_request, as a server sees them.
Pdu serve_request(RegisterBank& bank, ByteView request_pdu);

// Human-readable and JSON-friendly descriptions used by logs and reports.
std::string describe(const Pdu& pdu);

}  // namespace softics::modbus

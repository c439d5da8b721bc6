#include "softics/modbus.hpp"

#include <cstdio>

#include "softics/error.hpp"

namespace softics::modbus {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void bytes(const std::vector<std::uint8_t>& v) { out_.insert(out_.end(), v.begin(), v.end()); }
  void byte_count(std::size_t n) {
    if (n > 0xff) throw EncodingError("byte count " + std::to_string(n) + " does not fit in one byte");
    u8(static_cast<std::uint8_t>(n));
  }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(ByteView in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::vector<std::uint8_t> bytes(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> v(in_.begin() + pos_, in_.begin() + pos_ + n);
    pos_ += n;
    return v;
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  void expect_end() const {
    if (remaining() != 0) throw ProtocolError(std::to_string(remaining()) + " trailing byte(s) in PDU");
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw ProtocolError("PDU truncated");
  }

  ByteView in_;
  std::size_t pos_ = 0;
};

bool is_bit_read(FunctionCode f) { return f == FunctionCode::ReadCoils || f == FunctionCode::ReadDiscreteInputs; }

Pdu exception(std::uint8_t function, ExceptionCode code) { return ExceptionResponse{function, code}; }

Pdu exception(FunctionCode function, ExceptionCode code) {
  return ExceptionResponse{static_cast<std::uint8_t>(function), code};
}

}  // namespace

std::uint8_t function_byte(const Pdu& pdu) {
  return std::visit(overloaded{
                        [](const ReadRequest& p) { return static_cast<std::uint8_t>(p.function); },
                        [](const ReadBitsResponse& p) { return static_cast<std::uint8_t>(p.function); },
                        [](const ReadRegistersResponse& p) { return static_cast<std::uint8_t>(p.function); },
                        [](const WriteSingleCoil&) { return std::uint8_t{0x05}; },
                        [](const WriteSingleRegister&) { return std::uint8_t{0x06}; },
                        [](const WriteMultipleCoils&) { return std::uint8_t{0x0F}; },
                        [](const WriteMultipleRegisters&) { return std::uint8_t{0x10}; },
                        [](const WriteMultipleResponse& p) { return static_cast<std::uint8_t>(p.function); },
                        [](const ReadDeviceIdRequest&) { return std::uint8_t{0x2B}; },
                        [](const ReadDeviceIdResponse&) { return std::uint8_t{0x2B}; },
                        [](const ExceptionResponse& p) { return static_cast<std::uint8_t>(p.function | 0x80); },
                        [](const OpaquePdu& p) { return p.function; },
                    },
                    pdu);
}

bool is_exception(const Pdu& pdu) { return std::holds_alternative<ExceptionResponse>(pdu); }

bool is_supported_function(std::uint8_t f) {
  switch (f) {
    case 0x01:
    case 0x02:
    case 0x03:
    case 0x04:
    case 0x05:
    case 0x06:
    case 0x0F:
    case 0x10:
    case 0x2B:
      return true;
    default:
      return false;
  }
}

std::vector<std::uint8_t> pack_bits(const std::vector<bool>& bits) {
  std::vector<std::uint8_t> packed((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  return packed;
}

std::vector<bool> unpack_bits(const std::vector<std::uint8_t>& packed, std::size_t count) {
  std::vector<bool> bits(count, false);
  for (std::size_t i = 0; i < count && i / 8 < packed.size(); ++i) bits[i] = (packed[i / 8] >> (i % 8)) & 1u;
  return bits;
}

Bytes encode_pdu(const Pdu& pdu) {
  Writer w;
  w.u8(function_byte(pdu));
  std::visit(overloaded{
                 [&](const ReadRequest& p) {
                   w.u16(p.address);
                   w.u16(p.count);
                 },
                 [&](const ReadBitsResponse& p) {
                   w.byte_count(p.packed.size());
                   w.bytes(p.packed);
                 },
                 [&](const ReadRegistersResponse& p) {
                   w.byte_count(p.values.size() * 2);
                   for (auto v : p.values) w.u16(v);
                 },
                 [&](const WriteSingleCoil& p) {
                   w.u16(p.address);
                   w.u16(p.raw_value);
                 },
                 [&](const WriteSingleRegister& p) {
                   w.u16(p.address);
                   w.u16(p.value);
                 },
                 [&](const WriteMultipleCoils& p) {
                   w.u16(p.address);
                   w.u16(p.count);
                   w.byte_count(p.packed.size());
                   w.bytes(p.packed);
                 },
                 [&](const WriteMultipleRegisters& p) {
                   w.u16(p.address);
                   w.u16(p.count);
                   w.byte_count(p.values.size() * 2);
                   for (auto v : p.values) w.u16(v);
                 },
                 [&](const WriteMultipleResponse& p) {
                   w.u16(p.address);
                   w.u16(p.count);
                 },
                 [&](const ReadDeviceIdRequest& p) {
                   w.u8(kMeiReadDeviceId);
                   w.u8(p.read_code);
                   w.u8(p.object_id);
                 },
                 [&](const ReadDeviceIdResponse& p) {
                   w.u8(kMeiReadDeviceId);
                   w.u8(p.read_code);
                   w.u8(p.conformity);
                   w.u8(p.more_follows);
                   w.u8(p.next_object);
                   w.byte_count(p.objects.size());
                   for (const auto& o : p.objects) {
                     w.u8(o.id);
                     w.byte_count(o.value.size());
                     w.bytes(std::vector<std::uint8_t>(o.value.begin(), o.value.end()));
                   }
                 },
                 [&](const ExceptionResponse& p) { w.u8(static_cast<std::uint8_t>(p.code)); },
                 [&](const OpaquePdu& p) { w.bytes(p.data); },
             },
             pdu);
  Bytes out = w.take();
  if (out.size() > kMaxPduSize)
    throw EncodingError("PDU of " + std::to_string(out.size()) + " bytes exceeds " + std::to_string(kMaxPduSize));
  return out;
}

Pdu decode_pdu(ByteView bytes, Direction direction) {
  if (bytes.empty()) throw ProtocolError("empty PDU");
  if (bytes.size() > kMaxPduSize) throw ProtocolError("PDU exceeds maximum size");
  Reader r(bytes);
  const std::uint8_t fc = r.u8();
  const bool request = direction == Direction::request;

  if (!request && (fc & 0x80)) {
    const auto code = r.u8();
    r.expect_end();
    return ExceptionResponse{static_cast<std::uint8_t>(fc & 0x7f), static_cast<ExceptionCode>(code)};
  }
  if (!is_supported_function(fc)) return OpaquePdu{fc, r.bytes(r.remaining())};

  const auto function = static_cast<FunctionCode>(fc);
  Pdu out;
  switch (function) {
    case FunctionCode::ReadCoils:
    case FunctionCode::ReadDiscreteInputs:
    case FunctionCode::ReadHoldingRegisters:
    case FunctionCode::ReadInputRegisters:
      if (request) {
        ReadRequest p{function, r.u16(), 0};
        p.count = r.u16();
        out = p;
      } else if (is_bit_read(function)) {
        const auto n = r.u8();
        out = ReadBitsResponse{function, r.bytes(n)};
      } else {
        const auto n = r.u8();
        if (n % 2) throw ProtocolError("odd register byte count");
        ReadRegistersResponse p{function, {}};
        for (int i = 0; i < n / 2; ++i) p.values.push_back(r.u16());
        out = p;
      }
      break;
    case FunctionCode::WriteSingleCoil: {
      WriteSingleCoil p;
      p.address = r.u16();
      p.raw_value = r.u16();
      out = p;
      break;
    }
    case FunctionCode::WriteSingleRegister: {
      WriteSingleRegister p;
      p.address = r.u16();
      p.value = r.u16();
      out = p;
      break;
    }
    case FunctionCode::WriteMultipleCoils:
    case FunctionCode::WriteMultipleRegisters: {
      const auto address = r.u16();
      const auto count = r.u16();
      if (!request) {
        out = WriteMultipleResponse{function, address, count};
      } else if (function == FunctionCode::WriteMultipleCoils) {
        const auto n = r.u8();
        out = WriteMultipleCoils{address, count, r.bytes(n)};
      } else {
        const auto n = r.u8();
        if (n % 2) throw ProtocolError("odd register byte count");
        WriteMultipleRegisters p{address, count, {}};
        for (int i = 0; i < n / 2; ++i) p.values.push_back(r.u16());
        out = p;
      }
      break;
    }
    case FunctionCode::EncapsulatedInterface: {
      const auto mei = r.u8();
      if (mei != kMeiReadDeviceId) {
        // Other MEI transports are outside the supported set.
        std::vector<std::uint8_t> data{mei};
        auto rest = r.bytes(r.remaining());
        data.insert(data.end(), rest.begin(), rest.end());
        return OpaquePdu{fc, std::move(data)};
      }
      if (request) {
        ReadDeviceIdRequest p;
        p.read_code = r.u8();
        p.object_id = r.u8();
        out = p;
      } else {
        ReadDeviceIdResponse p;
        p.read_code = r.u8();
        p.conformity = r.u8();
        p.more_follows = r.u8();
        p.next_object = r.u8();
        const auto n = r.u8();
        for (int i = 0; i < n; ++i) {
          DeviceIdObject o;
          o.id = r.u8();
          const auto len = r.u8();
          auto raw = r.bytes(len);
          o.value.assign(raw.begin(), raw.end());
          p.objects.push_back(std::move(o));
        }
        out = p;
      }
      break;
    }
  }
  r.expect_end();
  return out;
}

Bytes encode_adu(const MbapHeader& header, const Pdu& pdu) {
  const Bytes body = encode_pdu(pdu);
  Writer w;
  w.u16(header.transaction_id);
  w.u16(0);
  w.u16(static_cast<std::uint16_t>(body.size() + 1));
  w.u8(header.unit_id);
  w.bytes(body);
  return w.take();
}

std::optional<std::size_t> adu_size(ByteView stream) {
  if (stream.size() < 6) return std::nullopt;
  const std::size_t length = (std::size_t{stream[4]} << 8) | stream[5];
  return 6 + length;
}

MbapHeader decode_mbap(ByteView bytes) {
  if (bytes.size() < kMbapSize) throw FramingError("incomplete header");
  Reader r(bytes);
  MbapHeader h;
  h.transaction_id = r.u16();
  h.protocol_id = r.u16();
  h.length = r.u16();
  h.unit_id = r.u8();
  if (h.protocol_id != 0) throw ProtocolError("protocol id " + std::to_string(h.protocol_id) + " is not Modbus");
  if (h.length < 2 || h.length > kMaxPduSize + 1)
    throw ProtocolError("length field " + std::to_string(h.length) + " outside 2..254");
  const std::size_t total = 6 + std::size_t{h.length};
  if (bytes.size() < total) throw FramingError("incomplete ADU: have " + std::to_string(bytes.size()) + " of " +
                                               std::to_string(total) + " bytes");
  if (bytes.size() > total) throw ProtocolError("length field shorter than ADU");
  return h;
}

Adu decode_adu(ByteView bytes, Direction direction) {
  const MbapHeader h = decode_mbap(bytes);
  return Adu{h, decode_pdu(bytes.subspan(kMbapSize), direction)};
}

RegisterBank::RegisterBank(std::size_t coils, std::size_t discrete_inputs, std::size_t holding_registers,
                           std::size_t input_registers, DeviceIdentity identity)
    : coils_(coils, false),
      discrete_inputs_(discrete_inputs, false),
      holding_(holding_registers, 0),
      input_(input_registers, 0),
      identity_(std::move(identity)) {}

Pdu execute_request(RegisterBank& bank, const Pdu& request) {
  return std::visit(
      overloaded{
          [&](const ReadRequest& p) -> Pdu {
            const bool bits = is_bit_read(p.function);
            const std::uint16_t max_count = bits ? 2000 : 125;
            if (p.count < 1 || p.count > max_count) return exception(p.function, ExceptionCode::IllegalDataValue);
            std::size_t size = 0;
            switch (p.function) {
              case FunctionCode::ReadCoils:
                size = bank.coil_count();
                break;
              case FunctionCode::ReadDiscreteInputs:
                size = bank.discrete_input_count();
                break;
              case FunctionCode::ReadHoldingRegisters:
                size = bank.holding_register_count();
                break;
              default:
                size = bank.input_register_count();
                break;
            }
            if (std::size_t{p.address} + p.count > size)
              return exception(p.function, ExceptionCode::IllegalDataAddress);
            if (bits) {
              std::vector<bool> v(p.count);
              for (std::size_t i = 0; i < p.count; ++i)
                v[i] = p.function == FunctionCode::ReadCoils ? bank.coil(p.address + i)
                                                             : bank.discrete_input(p.address + i);
              return ReadBitsResponse{p.function, pack_bits(v)};
            }
            ReadRegistersResponse rsp{p.function, {}};
            for (std::size_t i = 0; i < p.count; ++i)
              rsp.values.push_back(p.function == FunctionCode::ReadHoldingRegisters
                                       ? bank.holding_register(p.address + i)
                                       : bank.input_register(p.address + i));
            return rsp;
          },
          [&](const WriteSingleCoil& p) -> Pdu {
            if (p.raw_value != kCoilOn && p.raw_value != kCoilOff)
              return exception(FunctionCode::WriteSingleCoil, ExceptionCode::IllegalDataValue);
            if (p.address >= bank.coil_count())
              return exception(FunctionCode::WriteSingleCoil, ExceptionCode::IllegalDataAddress);
            bank.set_coil(p.address, p.on());
            return p;
          },
          [&](const WriteSingleRegister& p) -> Pdu {
            if (p.address >= bank.holding_register_count())
              return exception(FunctionCode::WriteSingleRegister, ExceptionCode::IllegalDataAddress);
            bank.set_holding_register(p.address, p.value);
            return p;
          },
          [&](const WriteMultipleCoils& p) -> Pdu {
            if (p.count < 1 || p.count > 1968 || p.packed.size() != (std::size_t{p.count} + 7) / 8)
              return exception(FunctionCode::WriteMultipleCoils, ExceptionCode::IllegalDataValue);
            if (std::size_t{p.address} + p.count > bank.coil_count())
              return exception(FunctionCode::WriteMultipleCoils, ExceptionCode::IllegalDataAddress);
            const auto bits = unpack_bits(p.packed, p.count);
            for (std::size_t i = 0; i < p.count; ++i) bank.set_coil(p.address + i, bits[i]);
            return WriteMultipleResponse{FunctionCode::WriteMultipleCoils, p.address, p.count};
          },
          [&](const WriteMultipleRegisters& p) -> Pdu {
            if (p.count < 1 || p.count > 123 || p.values.size() != p.count)
              return exception(FunctionCode::WriteMultipleRegisters, ExceptionCode::IllegalDataValue);
            if (std::size_t{p.address} + p.count > bank.holding_register_count())
              return exception(FunctionCode::WriteMultipleRegisters, ExceptionCode::IllegalDataAddress);
            for (std::size_t i = 0; i < p.count; ++i) bank.set_holding_register(p.address + i, p.values[i]);
            return WriteMultipleResponse{FunctionCode::WriteMultipleRegisters, p.address, p.count};
          },
          [&](const ReadDeviceIdRequest& p) -> Pdu {
            const auto& id = bank.identity();
            const std::vector<DeviceIdObject> all{{0x00, id.vendor}, {0x01, id.product}, {0x02, id.revision}};
            ReadDeviceIdResponse rsp;
            rsp.read_code = p.read_code;
            switch (p.read_code) {
              case 1:
              case 2:
              case 3:
                // Only basic objects exist, so regular and extended return them too.
                rsp.conformity = 0x81;
                if (p.object_id > 0x02) return exception(FunctionCode::EncapsulatedInterface,
                                                         ExceptionCode::IllegalDataAddress);
                for (const auto& o : all)
                  if (o.id >= p.object_id) rsp.objects.push_back(o);
                return rsp;
              case 4:
                rsp.conformity = 0x81;
                if (p.object_id > 0x02) return exception(FunctionCode::EncapsulatedInterface,
                                                         ExceptionCode::IllegalDataAddress);
                rsp.objects.push_back(all[p.object_id]);
                return rsp;
              default:
                return exception(FunctionCode::EncapsulatedInterface, ExceptionCode::IllegalDataValue);
            }
          },
          [&](const OpaquePdu& p) -> Pdu {
            return exception(static_cast<std::uint8_t>(p.function & 0x7f), ExceptionCode::IllegalFunction);
          },
          [&](const auto& p) -> Pdu {
            // A response variant sent as a request.
            return exception(static_cast<std::uint8_t>(function_byte(Pdu{p}) & 0x7f),
                             ExceptionCode::IllegalFunction);
          },
      },
      request);
}

std::string describe(const Pdu& pdu) {
  char buf[96];
  return std::visit(
      overloaded{
          [&](const ReadRequest& p) {
            std::snprintf(buf, sizeof buf, "read fc=%u addr=%u count=%u", static_cast<unsigned>(p.function),
                          p.address, p.count);
            return std::string(buf);
          },
          [&](const ReadBitsResponse& p) {
            return "bits fc=" + std::to_string(static_cast<unsigned>(p.function)) + " data=" + to_hex(p.packed);
          },
          [&](const ReadRegistersResponse& p) {
            std::string s = "registers fc=" + std::to_string(static_cast<unsigned>(p.function)) + " values=";
            for (std::size_t i = 0; i < p.values.size(); ++i) s += (i ? "," : "") + std::to_string(p.values[i]);
            return s;
          },
          [&](const WriteSingleCoil& p) {
            return "write-coil addr=" + std::to_string(p.address) + (p.on() ? " on" : " off");
          },
          [&](const WriteSingleRegister& p) {
            return "write-register addr=" + std::to_string(p.address) + " value=" + std::to_string(p.value);
          },
          [&](const WriteMultipleCoils& p) {
            return "write-coils addr=" + std::to_string(p.address) + " count=" + std::to_string(p.count) +
                   " data=" + to_hex(p.packed);
          },
          [&](const WriteMultipleRegisters& p) {
            std::string s = "write-registers addr=" + std::to_string(p.address) + " values=";
            for (std::size_t i = 0; i < p.values.size(); ++i) s += (i ? "," : "") + std::to_string(p.values[i]);
            return s;
          },
          [&](const WriteMultipleResponse& p) {
            return "write-ack fc=" + std::to_string(static_cast<unsigned>(p.function)) +
                   " addr=" + std::to_string(p.address) + " count=" + std::to_string(p.count);
          },
          [&](const ReadDeviceIdRequest& p) {
            return "device-id read_code=" + std::to_string(p.read_code) + " object=" + std::to_string(p.object_id);
          },
          [&](const ReadDeviceIdResponse& p) {
            std::string s = "device-id";
            for (const auto& o : p.objects) s += " [" + std::to_string(o.id) + "]=" + o.value;
            return s;
          },
          [&](const ExceptionResponse& p) {
            return "exception fc=" + std::to_string(p.function) + " code=" + std::to_string(static_cast<int>(p.code));
          },
          [&](const OpaquePdu& p) { return "opaque fc=" + std::to_string(p.function) + " data=" + to_hex(p.data); },
      },
      pdu);
}

ExceptionResponse reject_malformed(ByteView request_pdu) {
  const std::uint8_t fc = request_pdu.empty() ? 0 : request_pdu[0];
  return ExceptionResponse{static_cast<std::uint8_t>(fc & 0x7f), ExceptionCode::IllegalDataValue};
}

Pdu serve_request(RegisterBank& bank, ByteView request_pdu) {
  try {
    return execute_request(bank, decode_pdu(request_pdu, Direction::request));
  } catch (const ProtocolError&) {
    return reject_malformed(request_pdu);
  }
}

}  // namespace softics::modbus

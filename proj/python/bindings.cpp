#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "softics/analytics.hpp"
#include "softics/error.hpp"
#include "softics/modbus.hpp"
#include "softics/scenario.hpp"

namespace py = pybind11;
using namespace softics;
using namespace softics::modbus;

namespace {

Bytes to_bytes(const py::bytes& b) {
  const std::string s = b;
  return Bytes(s.begin(), s.end());
}

py::bytes from_bytes(const Bytes& b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

MbapHeader header(int transaction_id, int unit_id) {
  return MbapHeader{static_cast<std::uint16_t>(transaction_id), 0, 0, static_cast<std::uint8_t>(unit_id)};
}

// Field view of a decoded PDU, serialised as JSON for the Python side.
json pdu_fields(const Pdu& pdu) {
  json j{{"function", function_byte(pdu)}, {"description", describe(pdu)}};
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ReadRequest>) {
          j["address"] = p.address;
          j["count"] = p.count;
        } else if constexpr (std::is_same_v<T, ReadBitsResponse>) {
          j["packed"] = p.packed;
        } else if constexpr (std::is_same_v<T, ReadRegistersResponse>) {
          j["values"] = p.values;
        } else if constexpr (std::is_same_v<T, WriteSingleCoil>) {
          j["address"] = p.address;
          j["value"] = p.raw_value;
        } else if constexpr (std::is_same_v<T, WriteSingleRegister>) {
          j["address"] = p.address;
          j["value"] = p.value;
        } else if constexpr (std::is_same_v<T, WriteMultipleCoils>) {
          j["address"] = p.address;
          j["count"] = p.count;
          j["packed"] = p.packed;
        } else if constexpr (std::is_same_v<T, WriteMultipleRegisters>) {
          j["address"] = p.address;
          j["count"] = p.count;
          j["values"] = p.values;
        } else if constexpr (std::is_same_v<T, WriteMultipleResponse>) {
          j["address"] = p.address;
          j["count"] = p.count;
        } else if constexpr (std::is_same_v<T, ExceptionResponse>) {
          j["exception"] = static_cast<int>(p.code);
        }
      },
      pdu);
  return j;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the software ICS testbed";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<FramingError>(m, "FramingError", PyExc_ValueError);
  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_ValueError);

  m.def(
      "encode_read_request",
      [](int function, int address, int count, int transaction_id, int unit_id) {
        const ReadRequest r{static_cast<FunctionCode>(function), static_cast<std::uint16_t>(address),
                            static_cast<std::uint16_t>(count)};
        return from_bytes(encode_adu(header(transaction_id, unit_id), r));
      },
      py::arg("function"), py::arg("address"), py::arg("count"), py::arg("transaction_id") = 1, py::arg("unit_id") = 1);
  m.def(
      "encode_write_coil",
      [](int address, bool on, int transaction_id, int unit_id) {
        const WriteSingleCoil w{static_cast<std::uint16_t>(address), on ? kCoilOn : kCoilOff};
        return from_bytes(encode_adu(header(transaction_id, unit_id), w));
      },
      py::arg("address"), py::arg("on"), py::arg("transaction_id") = 1, py::arg("unit_id") = 1);
  m.def(
      "encode_read_bits_response",
      [](int function, const std::vector<bool>& bits, int transaction_id, int unit_id) {
        const ReadBitsResponse r{static_cast<FunctionCode>(function), pack_bits(bits)};
        return from_bytes(encode_adu(header(transaction_id, unit_id), r));
      },
      py::arg("function"), py::arg("bits"), py::arg("transaction_id") = 1, py::arg("unit_id") = 1);
  m.def(
      "encode_read_registers_response",
      [](int function, const std::vector<std::uint16_t>& values, int transaction_id, int unit_id) {
        const ReadRegistersResponse r{static_cast<FunctionCode>(function), values};
        return from_bytes(encode_adu(header(transaction_id, unit_id), r));
      },
      py::arg("function"), py::arg("values"), py::arg("transaction_id") = 1, py::arg("unit_id") = 1);
  m.def(
      "decode_adu_json",
      [](const py::bytes& data, bool response) {
        const Adu adu = decode_adu(to_bytes(data), response ? Direction::response : Direction::request);
        json j = pdu_fields(adu.pdu);
        j["transaction_id"] = adu.header.transaction_id;
        j["unit_id"] = adu.header.unit_id;
        j["length"] = adu.header.length;
        return j.dump();
      },
      py::arg("data"), py::arg("response") = false);

  m.def(
      "run_scenario_json",
      [](const std::string& config_path, const std::optional<std::string>& output_dir,
         std::optional<std::uint64_t> seed) {
        auto cfg = scenario::ScenarioConfig::load(config_path);
        if (seed) cfg.seed = *seed;
        if (!output_dir) cfg.outputs = {};
        std::optional<std::filesystem::path> dir;
        if (output_dir) dir = *output_dir;
        py::gil_scoped_release release;
        return scenario::run_scenario(cfg, dir).summary.to_json().dump();
      },
      py::arg("config_path"), py::arg("output_dir") = py::none(), py::arg("seed") = py::none());
  m.def(
      "verify_log",
      [](const std::string& path, const std::string& digest) {
        const auto r = softics::verify_log(path, digest);
        return py::make_tuple(r.pass, r.computed, r.expected, r.detail);
      },
      py::arg("path"), py::arg("digest"));
  m.def(
      "replay",
      [](const std::string& path, const std::optional<std::string>& filter) {
        std::optional<Category> cat;
        if (filter) {
          cat = category_from_string(*filter);
          if (!cat) throw ArgumentError("unknown category '" + *filter + "'");
        }
        return scenario::replay_lines(EventLog::read(path), cat);
      },
      py::arg("path"), py::arg("filter") = py::none());
  m.def(
      "density_json",
      [](const std::string& path) { return analytics::density_json(analytics::packet_rate_density(EventLog::read(path))).dump(); },
      py::arg("path"));
}

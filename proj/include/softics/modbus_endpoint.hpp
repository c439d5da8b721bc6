#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "softics/fabric.hpp"
#include "softics/modbus.hpp"

namespace softics::modbus {

enum class TransactStatus { ok, timeout, refused, protocol_error };

std::string_view to_string(TransactStatus status);

struct TransactResult {
  TransactStatus status = TransactStatus::timeout;
  std::optional<Pdu> response;
  Duration latency{0};
  std::uint16_t transaction_id = 0;
  std::string detail;

  bool ok() const { return status == TransactStatus::ok; }
};

// Client side of one persistent Modbus/TCP connection. Requests may overlap;
// responses are matched by transaction id.
class ModbusClient {
 public:
  using Callback = std::function<void(const TransactResult&)>;

  ModbusClient(net::Host& host, Ipv4 server, Duration timeout = std::chrono::milliseconds(250),
               std::uint16_t port = kPort, std::uint8_t unit_id = 1);
  ~ModbusClient();
  ModbusClient(const ModbusClient&) = delete;
  ModbusClient& operator=(const ModbusClient&) = delete;

  void transact(Pdu request, Callback done);
  // Fire-and-forget variant.
  void send(Pdu request) { transact(std::move(request), nullptr); }

  Ipv4 server() const { return server_; }
  net::Host& host() const { return host_; }
  std::size_t in_flight() const { return pending_.size(); }
  std::uint64_t completed() const { return completed_; }
  bool connected() const { return conn_ && conn_->established(); }

 private:
  struct Pending {
    Pdu request;
    Bytes encoded;
    Callback done;
    SimTime issued{0};
    Timer timer;
    bool sent = false;
  };

  void ensure_connection();
  void flush();
  void on_data(ByteView data);
  void finish(std::uint16_t tid, TransactResult result);
  void fail_all(TransactStatus status, const std::string& detail);

  net::Host& host_;
  Ipv4 server_;
  Duration timeout_;
  std::uint16_t port_;
  std::uint8_t unit_id_;
  std::uint16_t next_tid_;
  net::ConnectionPtr conn_;
  std::map<std::uint16_t, Pending> pending_;
  std::deque<std::uint16_t> order_;
  std::set<std::uint16_t> expired_;
  std::deque<std::uint16_t> expired_order_;
  std::uint64_t completed_ = 0;
  std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

// Modbus/TCP server on one host. The handler defaults to execute_request
// against `bank`.
class ModbusServer {
 public:
  using Handler = std::function<Pdu(const Pdu& request, const net::TcpConnection& from)>;

  ModbusServer(net::Host& host, RegisterBank& bank, std::uint16_t port = kPort);

  void set_handler(Handler handler) { handler_ = std::move(handler); }
  std::uint64_t requests_served() const { return served_; }
  RegisterBank& bank() { return bank_; }

  // Response bytes for one request ADU, nullopt if the header is unusable.
  // Decodable headers with malformed PDUs yield exception responses.
  std::optional<Bytes> respond(ByteView adu, const net::TcpConnection& from);

 private:
  net::Host& host_;
  RegisterBank& bank_;
  Handler handler_;
  std::uint64_t served_ = 0;
};

}  // namespace softics::modbus

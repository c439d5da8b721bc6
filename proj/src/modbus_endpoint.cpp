#include "softics/modbus_endpoint.hpp"

#include "softics/error.hpp"

namespace softics::modbus {

std::string_view to_string(TransactStatus status) {
  switch (status) {
    case TransactStatus::ok:
      return "ok";
    case TransactStatus::timeout:
      return "timeout";
    case TransactStatus::refused:
      return "refused";
    case TransactStatus::protocol_error:
      return "protocol_error";
  }
  return "timeout";
}

// ---------------------------------------------------------------------------
// ModbusClient

ModbusClient::ModbusClient(net::Host& host, Ipv4 server, Duration timeout, std::uint16_t port, std::uint8_t unit_id)
    : host_(host),
      server_(server),
      timeout_(timeout),
      port_(port),
      unit_id_(unit_id),
      next_tid_(static_cast<std::uint16_t>(host.kernel().random_below(65536))) {}

ModbusClient::~ModbusClient() {
  *alive_ = false;
  for (auto& [tid, p] : pending_) p.timer.cancel();
  if (conn_) {
    conn_->on_established = nullptr;
    conn_->on_data = nullptr;
    conn_->on_closed = nullptr;
    conn_->abandon("client destroyed");
  }
}

void ModbusClient::ensure_connection() {
  if (conn_ && conn_->state() != net::TcpConnection::State::closed) return;
  conn_ = host_.connect(server_, port_);
  std::weak_ptr<bool> alive = alive_;
  conn_->on_established = [this, alive] {
    if (!alive.expired()) flush();
  };
  conn_->on_data = [this, alive](ByteView data) {
    if (!alive.expired()) on_data(data);
  };
  conn_->on_closed = [this, alive](const std::string& reason) {
    if (alive.expired()) return;
    conn_.reset();
    fail_all(TransactStatus::refused, reason);
  };
}

void ModbusClient::transact(Pdu request, Callback done) {
  const std::uint16_t tid = next_tid_++;
  MbapHeader header;
  header.transaction_id = tid;
  header.unit_id = unit_id_;
  Pending p;
  p.encoded = encode_adu(header, request);
  p.request = std::move(request);
  p.done = std::move(done);
  p.issued = host_.kernel().now();
  p.timer = host_.kernel().after(timeout_, [this, tid] {
    if (conn_ && !conn_->established()) {
      // Handshake never completed; try again with the next request.
      conn_->abandon("connect timeout");
      conn_.reset();
    }
    finish(tid, TransactResult{TransactStatus::timeout, std::nullopt, timeout_, tid, "no response"});
  });
  pending_[tid] = std::move(p);
  order_.push_back(tid);
  ensure_connection();
  flush();
}

void ModbusClient::flush() {
  if (!conn_ || !conn_->established()) return;
  for (std::uint16_t tid : order_) {
    auto it = pending_.find(tid);
    if (it == pending_.end() || it->second.sent) continue;
    it->second.sent = true;
    conn_->send(it->second.encoded);
  }
}

void ModbusClient::on_data(ByteView data) {
  std::size_t pos = 0;
  while (pos < data.size()) {
    const ByteView rest = data.subspan(pos);
    const auto size = adu_size(rest);
    MbapHeader header;
    Pdu pdu;
    try {
      if (!size || *size > rest.size()) throw FramingError("incomplete ADU");
      const ByteView one = rest.subspan(0, *size);
      header = decode_mbap(one);
      pdu = decode_pdu(one.subspan(kMbapSize), Direction::response);
      pos += *size;
    } catch (const Error& e) {
      if (!order_.empty())
        finish(order_.front(), TransactResult{TransactStatus::protocol_error, std::nullopt,
                                              host_.kernel().now() - pending_.at(order_.front()).issued,
                                              order_.front(), e.what()});
      return;
    }
    const std::uint16_t tid = header.transaction_id;
    if (pending_.count(tid)) {
      finish(tid, TransactResult{TransactStatus::ok, std::move(pdu), host_.kernel().now() - pending_.at(tid).issued,
                                 tid, ""});
    } else if (expired_.count(tid)) {
      // Late answer to a request that already timed out.
    } else if (!order_.empty()) {
      const std::uint16_t oldest = order_.front();
      finish(oldest, TransactResult{TransactStatus::protocol_error, std::nullopt,
                                    host_.kernel().now() - pending_.at(oldest).issued, oldest,
                                    "transaction id mismatch: got " + std::to_string(tid)});
    }
  }
}

void ModbusClient::finish(std::uint16_t tid, TransactResult result) {
  auto it = pending_.find(tid);
  if (it == pending_.end()) return;
  Pending p = std::move(it->second);
  pending_.erase(it);
  std::erase(order_, tid);
  p.timer.cancel();
  if (result.status == TransactStatus::timeout) {
    expired_.insert(tid);
    expired_order_.push_back(tid);
    if (expired_order_.size() > 64) {
      expired_.erase(expired_order_.front());
      expired_order_.pop_front();
    }
  }
  ++completed_;
  json payload{{"client", host_.name()},
               {"server", server_.to_string()},
               {"tid", tid},
               {"fc", function_byte(p.request)},
               {"status", to_string(result.status)},
               {"latency_us", result.latency.count()}};
  if (result.response && is_exception(*result.response)) payload["exception"] = true;
  host_.kernel().log().append(host_.kernel().now(), Category::transaction, std::move(payload));
  if (p.done) p.done(result);
}

void ModbusClient::fail_all(TransactStatus status, const std::string& detail) {
  const auto tids = order_;
  for (std::uint16_t tid : tids) {
    auto it = pending_.find(tid);
    if (it == pending_.end()) continue;
    finish(tid, TransactResult{status, std::nullopt, host_.kernel().now() - it->second.issued, tid, detail});
  }
}

// ---------------------------------------------------------------------------
// ModbusServer

ModbusServer::ModbusServer(net::Host& host, RegisterBank& bank, std::uint16_t port) : host_(host), bank_(bank) {
  handler_ = [this](const Pdu& request, const net::TcpConnection&) { return execute_request(bank_, request); };
  host_.listen(port, [this](const net::ConnectionPtr& c) {
    std::weak_ptr<net::TcpConnection> weak = c;
    c->on_data = [this, weak](ByteView data) {
      auto conn = weak.lock();
      if (!conn) return;
      std::size_t pos = 0;
      while (pos < data.size()) {
        const ByteView rest = data.subspan(pos);
        const auto size = adu_size(rest);
        if (!size || *size > rest.size()) return;
        if (auto reply = respond(rest.subspan(0, *size), *conn)) conn->send(std::move(*reply));
        pos += *size;
      }
    };
  });
}

std::optional<Bytes> ModbusServer::respond(ByteView adu, const net::TcpConnection& from) {
  MbapHeader header;
  try {
    header = decode_mbap(adu);
  } catch (const Error&) {
    return std::nullopt;
  }
  Pdu response;
  try {
    const Pdu request = decode_pdu(adu.subspan(kMbapSize), Direction::request);
    response = handler_(request, from);
  } catch (const ProtocolError&) {
    response = reject_malformed(adu.subspan(kMbapSize));
  }
  ++served_;
  return encode_adu(header, response);
}

}  // namespace softics::modbus

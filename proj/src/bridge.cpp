#include "softics/bridge.hpp"

#include <httplib.h>

#include "softics/error.hpp"

namespace softics::bridge {

namespace {

Reply ok(json body = json{{"ok", true}}) { return Reply{200, std::move(body)}; }
Reply fail(int status, const std::string& what) { return Reply{status, json{{"ok", false}, {"error", what}}}; }

void send(httplib::Response& res, const Reply& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

// Runs an HMI action and maps refusals onto HTTP statuses.
Reply guarded(const std::function<void()>& action) {
  try {
    action();
    return ok();
  } catch (const CommandError& e) {
    return fail(409, e.what());
  } catch (const ArgumentError& e) {
    return fail(400, e.what());
  } catch (const Error& e) {
    return fail(500, e.what());
  }
}

std::optional<json> parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

json display_json(const devices::DisplayState& d) {
  return json{{"lines", d.lines}, {"inputs", d.inputs}, {"coils", d.coils}, {"requests_served", d.requests_served}};
}

}  // namespace

HttpBridge::HttpBridge(scenario::Testbed& testbed, double speed)
    : tb_(testbed), speed_(speed), server_(std::make_unique<httplib::Server>()) {
  if (!(speed > 0)) throw ArgumentError("bridge speed must be > 0");
  log_cursor_ = tb_.kernel().log().size();
  publish();
  routes();
}

HttpBridge::~HttpBridge() {
  stop();
  if (http_thread_.joinable()) http_thread_.join();
}

int HttpBridge::listen(const std::string& host, int port) {
  if (port == 0)
    port_ = server_->bind_to_any_port(host);
  else if (server_->bind_to_port(host, port))
    port_ = port;
  else
    port_ = -1;
  if (port_ <= 0) throw IoError("cannot bind HTTP bridge to " + host + ":" + std::to_string(port));
  http_thread_ = std::thread([this] { server_->listen_after_bind(); });
  return port_;
}

void HttpBridge::stop() {
  stopping_ = true;
  snap_cv_.notify_all();
  if (server_) server_->stop();
}

Reply HttpBridge::submit(std::function<Reply()> fn, std::chrono::milliseconds timeout) {
  if (!running_) return fail(503, "simulation is not running");
  auto job = std::make_shared<Job>();
  job->fn = std::move(fn);
  auto result = job->done.get_future();
  {
    std::lock_guard lock(jobs_mu_);
    jobs_.push_back(job);
  }
  if (result.wait_for(timeout) != std::future_status::ready) return fail(504, "simulation did not answer in time");
  return result.get();
}

void HttpBridge::drain() {
  std::deque<std::shared_ptr<Job>> jobs;
  {
    std::lock_guard lock(jobs_mu_);
    jobs.swap(jobs_);
  }
  for (auto& job : jobs) {
    try {
      job->done.set_value(job->fn());
    } catch (const std::exception& e) {
      job->done.set_value(fail(500, e.what()));
    }
  }
}

std::string HttpBridge::state_json() const {
  std::lock_guard lock(snap_mu_);
  return state_;
}

json HttpBridge::events_since(std::size_t& cursor) const {
  json alarms = json::array();
  const auto& log = tb_.kernel().log();
  for (; cursor < log.size(); ++cursor) {
    const Category c = log.category_at(cursor);
    if (c == Category::alarm || c == Category::attack || c == Category::tamper) {
      const LogRecord r = log.record(cursor);
      alarms.push_back(json{{"t", to_seconds(r.time)}, {"category", to_string(c)}, {"payload", r.payload}});
    }
  }
  return alarms;
}

void HttpBridge::publish() {
  const json snap = tb_.hmi().snapshot().to_json();
  json ev{{"time_s", to_seconds(tb_.kernel().now())},
          {"snapshot", snap},
          {"displays", {{"io1", display_json(tb_.io(0).render_display())}, {"io2", display_json(tb_.io(1).render_display())}}},
          {"alarms", events_since(log_cursor_)}};
  {
    std::lock_guard lock(snap_mu_);
    state_ = snap.dump();
    event_ = ev.dump();
    ++version_;
  }
  snap_cv_.notify_all();
}

void HttpBridge::run() {
  using clock = std::chrono::steady_clock;
  running_ = true;
  const auto wall0 = clock::now();
  const SimTime virt0 = tb_.kernel().now();
  const auto step = std::chrono::milliseconds(10);
  for (std::uint64_t i = 0; !stopping_ && !tb_.finished(); ++i) {
    drain();
    const double elapsed = std::chrono::duration<double>(clock::now() - wall0).count();
    tb_.advance(virt0 + from_seconds(elapsed * speed_));
    // Snapshots every 50 ms of wall time are plenty for a human operator.
    if (i % 5 == 0) publish();
    std::this_thread::sleep_for(step);
  }
  publish();
  running_ = false;
  drain();
}

void HttpBridge::routes() {
  auto& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  s.Get("/api/state", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(state_json(), "application/json");
  });

  auto action = [this](const char* cmd) {
    return [this, cmd](const httplib::Request&, httplib::Response& res) {
      send(res, submit([this, cmd] { return guarded([&] { supervisory::apply_command(tb_.hmi(), json{{"cmd", cmd}}); }); }));
    };
  };
  s.Post("/api/order", action("place_order"));
  s.Post("/api/reset", action("reset"));
  s.Post("/api/estop", action("estop"));

  s.Post("/api/mode", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    if (!body || !body->contains("manual") || !(*body)["manual"].is_boolean())
      return send(res, fail(400, "body must be {\"manual\": bool}"));
    const bool manual = (*body)["manual"].get<bool>();
    send(res, submit([this, manual] { return guarded([&] { tb_.hmi().set_manual(manual); }); }));
  });

  s.Post("/api/control", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    if (!body) return send(res, fail(400, "body must be a JSON object"));
    json cmd{{"cmd", "manual_motor"}, {"motor", body->value("motor", "")}, {"dir", body->value("dir", "")}};
    send(res, submit([this, cmd] { return guarded([&] { supervisory::apply_command(tb_.hmi(), cmd); }); }));
  });

  s.Get("/api/historian", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string point = req.get_param_value("point");
    double from = 0;
    double to = 1e12;
    try {
      if (req.has_param("from")) from = std::stod(req.get_param_value("from"));
      if (req.has_param("to")) to = std::stod(req.get_param_value("to"));
    } catch (const std::exception&) {
      return send(res, fail(400, "from/to must be numbers of seconds"));
    }
    send(res, submit([this, point, from, to] {
      try {
        json rows = json::array();
        for (const auto& r : tb_.scada().historian().query(point, from_seconds(from), from_seconds(std::min(to, 9e12))))
          rows.push_back(json{{"t", to_seconds(r.time)},
                              {"value", r.value},
                              {"quality", r.quality == supervisory::Quality::good ? "good" : "bad"}});
        return ok(json{{"point", point}, {"records", rows}});
      } catch (const ArgumentError& e) {
        return fail(400, e.what());
      }
    }));
  });

  s.Post("/api/attack", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    if (!body) return send(res, fail(400, "body must be a JSON object"));
    const json b = *body;
    send(res, submit([this, b] {
      try {
        const auto op = attacks::operation_from_string(b.value("op", ""));
        const auto profile = attacks::profile_from_string(b.value("profile", "local"));
        const auto report = tb_.launch(op, profile, b.value("params", json::object()));
        return ok(json{{"ok", true}, {"report", report->data}});
      } catch (const CapabilityError& e) {
        return fail(403, e.what());
      } catch (const ArgumentError& e) {
        return fail(400, e.what());
      } catch (const Error& e) {
        return fail(500, e.what());
      }
    }));
  });

  s.Get("/api/events", [this](const httplib::Request&, httplib::Response& res) {
    auto seen = std::make_shared<std::uint64_t>(0);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [this, seen](std::size_t, httplib::DataSink& sink) {
      std::string payload;
      {
        std::unique_lock lock(snap_mu_);
        snap_cv_.wait_for(lock, std::chrono::seconds(1), [&] { return stopping_ || version_ != *seen; });
        if (stopping_) {
          sink.done();
          return false;
        }
        if (version_ != *seen) {
          *seen = version_;
          payload = "event: snapshot\ndata: " + event_ + "\n\n";
        }
      }
      if (payload.empty()) payload = ": keepalive\n\n";
      return sink.write(payload.data(), payload.size());
    });
  });
}

}  // namespace softics::bridge

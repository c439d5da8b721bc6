#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "softics/scenario.hpp"

namespace httplib {
class Server;
}

namespace softics::bridge {

// Result of a command executed on the simulation thread.
struct Reply {
  int status = 200;
  json body;
};

// Real-time HTTP front end for the HMI. The kernel runs on the thread that
// calls run(), paced to the wall clock; HTTP handlers only read the last
// published snapshot or queue commands for that thread.
class HttpBridge {
 public:
  // `speed` is virtual seconds per wall second.
  explicit HttpBridge(scenario::Testbed& testbed, double speed = 1.0);
  ~HttpBridge();
  HttpBridge(const HttpBridge&) = delete;
  HttpBridge& operator=(const HttpBridge&) = delete;

  // Binds and starts serving on a background thread. Port 0 picks a free one.
  int listen(const std::string& host, int port);
  int port() const { return port_; }

  // Paces the simulation until the testbed finishes or stop() is called.
  void run();
  void stop();
  bool running() const { return running_; }

  // Queues `fn` for the simulation thread and waits for its reply.
  Reply submit(std::function<Reply()> fn, std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));

  std::string state_json() const;

 private:
  struct Job {
    std::function<Reply()> fn;
    std::promise<Reply> done;
  };

  void routes();
  void drain();
  void publish();
  json events_since(std::size_t& cursor) const;

  scenario::Testbed& tb_;
  double speed_;
  std::unique_ptr<httplib::Server> server_;
  std::thread http_thread_;
  int port_ = 0;

  std::atomic<bool> running_{false};
  std::atomic<bool> stopping_{false};

  std::mutex jobs_mu_;
  std::deque<std::shared_ptr<Job>> jobs_;

  mutable std::mutex snap_mu_;
  std::condition_variable snap_cv_;
  std::uint64_t version_ = 0;
  std::string state_;   // HMI snapshot
  std::string event_;   // SSE payload for this version
  std::size_t log_cursor_ = 0;
};

}  // namespace softics::bridge

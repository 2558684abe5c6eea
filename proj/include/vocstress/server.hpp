#pragma once

// HTTP front end of the session service.
//
//   POST /session                  {"participant": "P01", "age": 25, "gender": "female", "confounds": {...}}
//   POST /session/{id}/advance
//   POST /session/{id}/rating      {"checkpoint": "T1", "value": 3}
//   GET  /session/{id}/state
//   GET  /session/{id}/stream      server-sent events, one "snapshot" event per period
//
// Errors answer {"error": "<ErrorCode>", "message": "..."}.

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include <json.hpp>

#include "vocstress/session.hpp"

namespace httplib {
class Server;
}

namespace vocstress {

nlohmann::json snapshot_json(const SessionSnapshot& s);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::int64_t stream_period_ms = 1000;
};

class SessionServer {
 public:
  SessionServer(SessionService& service, ServerOptions options);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  // Binds and returns the port. Throws Io.
  int bind();
  // Serves until stop(); bind() first.
  void listen();
  // bind() plus listen() on a background thread.
  int start();
  void stop();

 private:
  void routes();

  SessionService& service_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> http_;
  std::atomic<bool> stopping_{false};
  std::thread thread_;
};

}  // namespace vocstress

#include "vocstress/server.hpp"

#include <chrono>

#include <httplib.h>

#include "vocstress/error.hpp"

namespace vocstress {

namespace {

using nlohmann::json;

json real(double v) { return is_missing(v) ? json(nullptr) : json(v); }

int status_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::NoActiveSession: return 404;
    case ErrorCode::SessionActive:
    case ErrorCode::RatingGate:
    case ErrorCode::SessionComplete:
    case ErrorCode::WrongCheckpoint: return 409;
    case ErrorCode::OutOfRange: return 422;
    default: return 400;
  }
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, {{"error", std::string(to_string(code))}, {"message", message}}, status_for(code));
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    send_error(res, e.code(), e.what());
  } catch (const json::exception& e) {
    send_error(res, ErrorCode::InvalidSpec, e.what());
  }
}

ParticipantMeta meta_from(const json& j) {
  ParticipantMeta m;
  if (!j.is_object()) throw Error(ErrorCode::InvalidSpec, "body must be a JSON object");
  m.id = j.at("participant").get<std::string>();
  if (j.contains("age") && !j["age"].is_null()) m.age = j["age"].get<int>();
  if (j.contains("gender")) {
    const auto g = gender_from_name(j["gender"].get<std::string>());
    if (!g) throw Error(ErrorCode::InvalidSpec, "unknown gender");
    m.gender = *g;
  }
  if (j.contains("confounds")) {
    for (const auto& [k, v] : j["confounds"].items()) m.confounds[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  if (j.contains("stress_ratings") && !j["stress_ratings"].empty()) {
    throw Error(ErrorCode::InvalidSpec, "stress ratings are captured live, not preset");
  }
  return m;
}

}  // namespace

json snapshot_json(const SessionSnapshot& s) {
  json j;
  j["session_id"] = s.session_id;
  j["participant"] = s.meta.id;
  j["complete"] = s.state.complete;
  j["phase"] = phase_number(s.state.phase);
  j["phase_name"] = std::string(phase_name(s.state.phase));
  j["mode"] = std::string(sensor_mode_name(s.state.mode));
  const auto pending = s.state.pending();
  j["pending_rating"] = pending ? json(std::string(checkpoint_name(*pending))) : json(nullptr);
  j["elapsed_ms"] = s.elapsed_ms;
  j["phase_elapsed_ms"] = s.phase_elapsed_ms;
  if (s.nominal_s) {
    j["nominal_s"] = *s.nominal_s;
    j["remaining_s"] = *s.nominal_s - static_cast<double>(s.phase_elapsed_ms) / 1000.0;
  } else {
    j["nominal_s"] = nullptr;
    j["remaining_s"] = nullptr;
  }
  json ratings = json::object();
  for (const auto& [cp, v] : s.state.ratings) ratings[std::string(checkpoint_name(cp))] = v;
  j["ratings"] = ratings;
  json markers = json::array();
  for (const auto& m : s.markers) markers.push_back({{"t_ms", m.timestamp_ms}, {"event", m.event}});
  j["markers"] = markers;
  j["frame_count"] = s.frame_count;
  json sig;
  if (s.latest) {
    const auto& f = *s.latest;
    sig = {{"t_ms", f.timestamp_ms}, {"hr", real(f.hr)},        {"gsr", real(f.gsr_raw)},
           {"tvoc", real(f.tvoc)},   {"gas320", real(f.gas320)}, {"respiration", real(s.respiration)}};
  }
  j["signals"] = sig;
  j["archive"] = s.archive_path.empty() ? json(nullptr) : json(s.archive_path);
  return j;
}

SessionServer::SessionServer(SessionService& service, ServerOptions options)
    : service_(service), options_(std::move(options)), http_(std::make_unique<httplib::Server>()) {
  routes();
}

SessionServer::~SessionServer() { stop(); }

void SessionServer::routes() {
  http_->Post("/session", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = req.body.empty() ? json::object() : json::parse(req.body);
      const auto id = service_.start_session(meta_from(body));
      send_json(res, snapshot_json(service_.snapshot(id)), 201);
    });
  });
  http_->Post(R"(/session/([^/]+)/advance)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, snapshot_json(service_.advance_phase(req.matches[1]))); });
  });
  http_->Post(R"(/session/([^/]+)/rating)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body);
      const auto cp = checkpoint_from_name(body.at("checkpoint").get<std::string>());
      if (!cp) throw Error(ErrorCode::InvalidSpec, "checkpoint must be T1, T2 or T3");
      send_json(res, snapshot_json(service_.record_rating(req.matches[1], *cp, body.at("value").get<int>())));
    });
  });
  http_->Get(R"(/session/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, snapshot_json(service_.snapshot(req.matches[1]))); });
  });
  http_->Get(R"(/session/([^/]+)/stream)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    try {
      service_.snapshot(id);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
      return;
    }
    long limit = -1;
    if (req.has_param("limit")) limit = std::stol(req.get_param_value("limit"));
    auto sent = std::make_shared<long>(0);
    res.set_chunked_content_provider("text/event-stream", [this, id, limit, sent](size_t, httplib::DataSink& sink) {
      if (stopping_ || (limit >= 0 && *sent >= limit)) {
        sink.done();
        return true;
      }
      SessionSnapshot snap;
      try {
        snap = service_.snapshot(id);
      } catch (const Error&) {
        sink.done();
        return true;
      }
      const std::string msg = "event: snapshot\ndata: " + snapshot_json(snap).dump() + "\n\n";
      if (!sink.write(msg.data(), msg.size())) return false;
      ++*sent;
      if (snap.state.complete) {
        sink.done();
        return true;
      }
      const auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(options_.stream_period_ms);
      while (!stopping_ && std::chrono::steady_clock::now() < until) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      return true;
    });
  });
}

int SessionServer::bind() {
  int port = options_.port;
  if (port == 0) {
    port = http_->bind_to_any_port(options_.host);
  } else if (!http_->bind_to_port(options_.host, port)) {
    port = -1;
  }
  if (port < 0) throw Error(ErrorCode::Io, "cannot bind " + options_.host + ":" + std::to_string(options_.port));
  options_.port = port;
  return port;
}

void SessionServer::listen() { http_->listen_after_bind(); }

int SessionServer::start() {
  const int port = bind();
  thread_ = std::thread([this] { listen(); });
  http_->wait_until_ready();
  return port;
}

void SessionServer::stop() {
  stopping_ = true;
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace vocstress

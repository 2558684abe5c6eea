#include "vocstress/session.hpp"

#include <chrono>
#include <filesystem>
#include <istream>
#include <ostream>

#include "vocstress/archive.hpp"
#include "vocstress/error.hpp"
#include "vocstress/ingest.hpp"

namespace vocstress {

std::string_view sensor_mode_name(SensorMode m) noexcept {
  switch (m) {
    case SensorMode::Idle: return "idle";
    case SensorMode::Baseline: return "baseline";
    case SensorMode::Experiment: return "experiment";
  }
  return "?";
}

std::int64_t SteadyClock::now_ms() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::optional<Checkpoint> ProtocolState::pending() const {
  if (!started || complete) return std::nullopt;
  Checkpoint gate;
  switch (phase) {
    case Phase::Baseline: gate = Checkpoint::T1; break;
    case Phase::Stroop: gate = Checkpoint::T2; break;
    case Phase::Arithmetic: gate = Checkpoint::T3; break;
    default: return std::nullopt;
  }
  if (ratings.count(gate)) return std::nullopt;
  return gate;
}

void apply(ProtocolState& s, const Marker& m) {
  if (m.event == events::kSessionStart) {
    s = ProtocolState{};
    s.started = true;
    s.phase_entered_ms = m.timestamp_ms;
  } else if (m.event == events::kSessionEnd) {
    s.complete = true;
  } else if (m.event == events::kCmdBaseline) {
    s.mode = SensorMode::Baseline;
  } else if (m.event == events::kCmdExperiment) {
    s.mode = SensorMode::Experiment;
  } else if (m.event == events::kCmdStop) {
    s.mode = SensorMode::Idle;
  } else if (auto p = events::parse_phase_start(m.event)) {
    s.phase = *p;
    s.phase_entered_ms = m.timestamp_ms;
  } else if (auto r = events::parse_rating(m.event)) {
    s.ratings[r->checkpoint] = r->value;
  }
}

ProtocolState replay(const std::vector<Marker>& markers) {
  ProtocolState s;
  for (const auto& m : markers) apply(s, m);
  return s;
}

// --- bridges -----------------------------------------------------------------

SimulatedBridge::SimulatedBridge(ParticipantSpec spec) : spec_(std::move(spec)) { validate(spec_); }

void SimulatedBridge::start(std::function<std::int64_t()>) {
  model_ = std::make_unique<SignalModel>(spec_);
  next_ms_ = 0;
}

void SimulatedBridge::send_command(std::string_view command) { commands_.emplace_back(command); }

std::vector<SensorFrame> SimulatedBridge::poll(std::int64_t now_ms, const PhaseAt& phase_at) {
  std::vector<SensorFrame> out;
  if (!model_) return out;
  for (; next_ms_ <= now_ms; next_ms_ += 1000) out.push_back(model_->step(next_ms_, phase_at(next_ms_)));
  return out;
}

SerialBridge::SerialBridge(std::istream& in, std::ostream& out) : in_(in), out_(out) {}

SerialBridge::~SerialBridge() {
  if (worker_.joinable()) worker_.join();
}

void SerialBridge::start(std::function<std::int64_t()> session_now) {
  now_ = std::move(session_now);
  worker_ = std::thread([this] { run(); });
}

void SerialBridge::run() {
  std::string line;
  while (std::getline(in_, line)) {
    line += '\n';
    try {
      auto msg = parse_line(line);
      if (auto* f = std::get_if<SensorFrame>(&msg)) {
        std::lock_guard lock(mutex_);
        f->timestamp_ms = std::max(now_(), last_stamp_ + 1);
        last_stamp_ = f->timestamp_ms;
        queue_.push_back(std::move(*f));
      }
    } catch (const ParseError&) {
      std::lock_guard lock(mutex_);
      ++malformed_;
    }
  }
}

void SerialBridge::send_command(std::string_view command) {
  commands_.emplace_back(command);
  out_ << "C," << command << '\n';
  out_.flush();
}

std::vector<SensorFrame> SerialBridge::poll(std::int64_t now_ms, const PhaseAt&) {
  std::lock_guard lock(mutex_);
  std::vector<SensorFrame> out;
  std::size_t k = 0;
  while (k < queue_.size() && queue_[k].timestamp_ms <= now_ms) ++k;
  out.assign(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.begin() + static_cast<std::ptrdiff_t>(k)));
  queue_.erase(queue_.begin(), queue_.begin() + static_cast<std::ptrdiff_t>(k));
  return out;
}

std::size_t SerialBridge::malformed_lines() const {
  std::lock_guard lock(mutex_);
  return malformed_;
}

// --- service -----------------------------------------------------------------

struct SessionService::Live {
  std::string id;
  std::int64_t t0 = 0;
  ParticipantMeta meta;
  ProtocolState state;
  std::unique_ptr<SensorBridge> bridge;
  std::vector<Marker> markers;
  std::vector<SensorFrame> frames;
  std::string archive_path;

  Phase phase_at(std::int64_t t) const {
    Phase p = Phase::Warmup;
    for (const auto& m : markers) {
      if (m.timestamp_ms > t) break;
      if (auto q = events::parse_phase_start(m.event)) p = *q;
    }
    return p;
  }
};

SessionService::SessionService(std::shared_ptr<const Clock> clock, BridgeFactory bridges, std::string archive_dir)
    : clock_(std::move(clock)), bridges_(std::move(bridges)), archive_dir_(std::move(archive_dir)) {}

SessionService::~SessionService() = default;

std::int64_t SessionService::session_now(const Live& s) const { return clock_->now_ms() - s.t0; }

SessionService::Live& SessionService::find(const std::string& id) {
  if (!live_ || live_->id != id) throw Error(ErrorCode::NoActiveSession, "unknown session '" + id + "'");
  return *live_;
}

void SessionService::log(Live& s, std::string event) {
  std::int64_t t = session_now(s);
  if (!s.markers.empty()) t = std::max(t, s.markers.back().timestamp_ms + 1);
  if (!s.frames.empty()) t = std::max(t, s.frames.back().timestamp_ms + 1);
  s.markers.push_back({t, std::move(event)});
  apply(s.state, s.markers.back());
}

void SessionService::pull(Live& s) {
  if (s.state.complete) return;
  auto frames = s.bridge->poll(session_now(s), [&](std::int64_t t) { return s.phase_at(t); });
  for (auto& f : frames) {
    if (!s.frames.empty() && f.timestamp_ms <= s.frames.back().timestamp_ms) continue;
    f.phase = s.phase_at(f.timestamp_ms);
    s.frames.push_back(std::move(f));
  }
}

std::string SessionService::start_session(ParticipantMeta meta) {
  std::lock_guard lock(mutex_);
  if (live_ && !live_->state.complete) throw Error(ErrorCode::SessionActive, "session " + live_->id + " is active");
  if (meta.id.empty()) throw Error(ErrorCode::InvalidSpec, "participant id is required");
  if (!meta.stress_ratings.empty()) {
    throw Error(ErrorCode::InvalidSpec, "stress ratings are captured live, not preset");
  }
  auto s = std::make_unique<Live>();
  s->id = "S" + std::to_string(++counter_);
  s->meta = std::move(meta);
  s->bridge = bridges_(s->meta);
  s->t0 = clock_->now_ms();
  Live* raw = s.get();
  s->bridge->start([this, raw] { return clock_->now_ms() - raw->t0; });
  live_ = std::move(s);
  log(*live_, std::string(events::kSessionStart));
  return live_->id;
}

SessionSnapshot SessionService::advance_phase(const std::string& id) {
  std::lock_guard lock(mutex_);
  Live& s = find(id);
  if (s.state.complete) throw Error(ErrorCode::SessionComplete, "session " + id + " is complete");
  if (auto gate = s.state.pending()) {
    throw Error(ErrorCode::RatingGate, "rating " + std::string(checkpoint_name(*gate)) + " is required first");
  }
  pull(s);
  const int n = phase_number(s.state.phase);
  if (n < 7) {
    const Phase next = *phase_from_number(n + 1);
    log(s, events::phase_start(next));
    if (next == Phase::Baseline) {
      log(s, std::string(events::kCmdBaseline));
      s.bridge->send_command(commands::kBaseline);
    } else if (next == Phase::Stroop) {
      log(s, std::string(events::kCmdExperiment));
      s.bridge->send_command(commands::kExperiment);
    }
    return snap(s);
  }
  log(s, std::string(events::kCmdStop));
  s.bridge->send_command(commands::kStop);
  log(s, std::string(events::kSessionEnd));
  SessionRecord rec;
  rec.meta = s.meta;
  rec.meta.stress_ratings = s.state.ratings;
  rec.frames = s.frames;
  rec.markers = s.markers;
  rec.environment = summarize_environment(rec.frames);
  rec.channel_available = s.bridge->availability();
  if (!archive_dir_.empty()) {
    std::filesystem::create_directories(archive_dir_);
    s.archive_path = (std::filesystem::path(archive_dir_) / (s.meta.id + std::string(kArchiveExtension))).string();
    save_archive(rec, s.archive_path);
  }
  last_ = std::move(rec);
  return snap(s);
}

SessionSnapshot SessionService::record_rating(const std::string& id, Checkpoint cp, int value) {
  std::lock_guard lock(mutex_);
  Live& s = find(id);
  if (s.state.complete) throw Error(ErrorCode::SessionComplete, "session " + id + " is complete");
  if (value < 1 || value > 6) throw Error(ErrorCode::OutOfRange, "rating must be in 1..6");
  const auto pending = s.state.pending();
  if (pending != cp) {
    throw Error(ErrorCode::WrongCheckpoint,
                std::string(checkpoint_name(cp)) + " is not pending (pending: " +
                    (pending ? std::string(checkpoint_name(*pending)) : std::string("none")) + ")");
  }
  pull(s);
  log(s, events::rating(cp, value));
  s.meta.stress_ratings[cp] = value;
  return snap(s);
}

SessionSnapshot SessionService::snapshot(const std::string& id) {
  std::lock_guard lock(mutex_);
  Live& s = find(id);
  pull(s);
  return snap(s);
}

void SessionService::tick() {
  std::lock_guard lock(mutex_);
  if (live_) pull(*live_);
}

std::optional<std::string> SessionService::active_id() const {
  std::lock_guard lock(mutex_);
  if (live_ && !live_->state.complete) return live_->id;
  return std::nullopt;
}

std::optional<SessionRecord> SessionService::last_record() const {
  std::lock_guard lock(mutex_);
  return last_;
}

SessionSnapshot SessionService::snap(const Live& s) const {
  SessionSnapshot out;
  out.session_id = s.id;
  out.meta = s.meta;
  out.state = s.state;
  const std::int64_t now = s.state.complete ? s.markers.back().timestamp_ms : session_now(s);
  out.elapsed_ms = now;
  out.phase_elapsed_ms = now - s.state.phase_entered_ms;
  if (!s.state.complete) out.nominal_s = nominal_duration_s(s.state.phase);
  out.markers = s.markers;
  out.frame_count = s.frames.size();
  if (!s.frames.empty()) out.latest = s.frames.back();
  out.archive_path = s.archive_path;
  // Respiration from the last ~70 s of beats.
  std::size_t first = s.frames.size();
  while (first > 0 && s.frames[first - 1].timestamp_ms >= now - 70'000) --first;
  if (s.frames.size() - first >= 60) {
    const auto beats = beats_from_frames(std::span<const SensorFrame>(s.frames).subspan(first));
    try {
      const auto resp = derive_respiration(beats);
      for (std::size_t i = resp.values.size(); i-- > 0;) {
        if (!is_missing(resp.values[i])) {
          out.respiration = resp.values[i];
          break;
        }
      }
    } catch (const Error&) {
    }
  }
  return out;
}

}  // namespace vocstress

#pragma once

// Live session protocol: the 7-phase state machine with rating gates, the
// session clock, sensor bridges (simulated or serial) and archive output.

#include <atomic>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "vocstress/core_model.hpp"
#include "vocstress/simulator.hpp"

namespace vocstress {

enum class SensorMode { Idle, Baseline, Experiment };
std::string_view sensor_mode_name(SensorMode m) noexcept;

// Milliseconds on a monotonic clock; only differences matter.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() const = 0;
};

class SteadyClock : public Clock {
 public:
  std::int64_t now_ms() const override;
};

// Test clock advanced by hand.
class ManualClock : public Clock {
 public:
  explicit ManualClock(std::int64_t start_ms = 0) : now_(start_ms) {}
  std::int64_t now_ms() const override { return now_.load(); }
  void advance(std::int64_t ms) { now_ += ms; }
  void set(std::int64_t ms) { now_ = ms; }

 private:
  std::atomic<std::int64_t> now_;
};

// Protocol state as a pure function of the marker log.
struct ProtocolState {
  bool started = false;
  bool complete = false;
  Phase phase = Phase::Warmup;
  std::int64_t phase_entered_ms = 0;
  SensorMode mode = SensorMode::Idle;
  std::map<Checkpoint, int> ratings;

  // Checkpoint that gates leaving the current phase, if not yet recorded.
  std::optional<Checkpoint> pending() const;
  bool operator==(const ProtocolState&) const = default;
};

// Applies one marker; unknown events leave the state unchanged.
void apply(ProtocolState& state, const Marker& marker);
ProtocolState replay(const std::vector<Marker>& markers);

// Acquisition side of a session. Frames are stamped on the session clock by
// the bridge (device clocks are not trusted).
class SensorBridge {
 public:
  using PhaseAt = std::function<Phase(std::int64_t)>;
  virtual ~SensorBridge() = default;
  // Called once when the session starts; session_now reads the session clock.
  virtual void start(std::function<std::int64_t()> session_now) = 0;
  // BASELINE, EXPERIMENT or STOP; sent on the wire as "C,<command>\n".
  virtual void send_command(std::string_view command) = 0;
  // Frames acquired up to now_ms, oldest first; phase ids are set by the caller.
  virtual std::vector<SensorFrame> poll(std::int64_t now_ms, const PhaseAt& phase_at) = 0;
  virtual std::array<bool, kModalityCount> availability() const { return {true, true, true, true}; }
  const std::vector<std::string>& commands() const { return commands_; }

 protected:
  std::vector<std::string> commands_;
};

// SignalModel-backed bridge emitting one frame per session second.
class SimulatedBridge : public SensorBridge {
 public:
  explicit SimulatedBridge(ParticipantSpec spec);
  void start(std::function<std::int64_t()> session_now) override;
  void send_command(std::string_view command) override;
  std::vector<SensorFrame> poll(std::int64_t now_ms, const PhaseAt& phase_at) override;
  std::array<bool, kModalityCount> availability() const override { return spec_.available; }

 private:
  ParticipantSpec spec_;
  std::unique_ptr<SignalModel> model_;
  std::int64_t next_ms_ = 0;
};

// Line-protocol bridge over a byte stream pair (a serial device or a pipe).
// A reader thread parses F-lines and stamps them on arrival.
class SerialBridge : public SensorBridge {
 public:
  SerialBridge(std::istream& in, std::ostream& out);
  ~SerialBridge() override;
  void start(std::function<std::int64_t()> session_now) override;
  void send_command(std::string_view command) override;
  std::vector<SensorFrame> poll(std::int64_t now_ms, const PhaseAt& phase_at) override;
  std::size_t malformed_lines() const;

 private:
  void run();

  std::istream& in_;
  std::ostream& out_;
  std::function<std::int64_t()> now_;
  mutable std::mutex mutex_;
  std::vector<SensorFrame> queue_;
  std::int64_t last_stamp_ = -1;
  std::size_t malformed_ = 0;
  std::thread worker_;
};

struct SessionSnapshot {
  std::string session_id;
  ParticipantMeta meta;
  ProtocolState state;
  std::int64_t elapsed_ms = 0;        // since session start
  std::int64_t phase_elapsed_ms = 0;
  std::optional<double> nominal_s;    // advisory phase duration
  std::vector<Marker> markers;
  std::size_t frame_count = 0;
  std::optional<SensorFrame> latest;
  double respiration = kMissing;      // breaths/min over the last minute
  std::string archive_path;           // set once complete
};

using BridgeFactory = std::function<std::unique_ptr<SensorBridge>(const ParticipantMeta&)>;

// One active session at a time; all mutations are serialized and snapshots
// are copies taken under the lock.
class SessionService {
 public:
  // Archives go to archive_dir/<participant>.session; empty dir keeps them in
  // memory only.
  SessionService(std::shared_ptr<const Clock> clock, BridgeFactory bridges, std::string archive_dir = {});
  ~SessionService();

  // Throws SessionActive; InvalidSpec for a missing id or preset ratings.
  std::string start_session(ParticipantMeta meta);
  // Throws RatingGate naming the checkpoint, SessionComplete, NoActiveSession.
  SessionSnapshot advance_phase(const std::string& session_id);
  // Throws WrongCheckpoint, OutOfRange, SessionComplete, NoActiveSession.
  SessionSnapshot record_rating(const std::string& session_id, Checkpoint checkpoint, int value);
  // Throws NoActiveSession for an unknown id.
  SessionSnapshot snapshot(const std::string& session_id);
  // Pulls frames from the bridge.
  void tick();

  std::optional<std::string> active_id() const;
  // Record of the most recently completed session.
  std::optional<SessionRecord> last_record() const;

 private:
  struct Live;
  Live& find(const std::string& id);
  void log(Live& s, std::string event);
  void pull(Live& s);
  SessionSnapshot snap(const Live& s) const;
  std::int64_t session_now(const Live& s) const;

  std::shared_ptr<const Clock> clock_;
  BridgeFactory bridges_;
  std::string archive_dir_;
  mutable std::mutex mutex_;
  std::unique_ptr<Live> live_;
  std::optional<SessionRecord> last_;
  std::size_t counter_ = 0;
};

}  // namespace vocstress

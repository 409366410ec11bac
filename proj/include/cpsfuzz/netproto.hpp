#pragma once

#include "cpsfuzz/control.hpp"
#include "cpsfuzz/plant.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <thread>
#include <variant>
#include <vector>

namespace cpsfuzz {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::array<std::uint8_t, 4> kFrameMagic = {0x49, 0x43, 0x53, 0x31};
inline constexpr std::size_t kHeaderSize = 19;   // magic, type, seq, tick, payload_len
inline constexpr std::size_t kTrailerSize = 2;   // checksum

enum class MsgType : std::uint8_t { SensorReport = 1, ActuatorCommand = 2, Ack = 3, TimeSync = 4 };

struct SensorReport {
    std::uint32_t seq = 0;
    std::uint64_t tick = 0;
    std::vector<std::pair<SensorId, std::int32_t>> values;  // milli-units
    friend bool operator==(const SensorReport&, const SensorReport&) = default;
};

struct ActuatorCommand {
    std::uint32_t seq = 0;
    std::uint64_t tick = 0;
    std::vector<std::pair<ActuatorId, std::uint8_t>> entries;
    friend bool operator==(const ActuatorCommand&, const ActuatorCommand&) = default;
};

struct Ack {
    std::uint32_t seq = 0;
    std::uint64_t tick = 0;
    friend bool operator==(const Ack&, const Ack&) = default;
};

struct TimeSync {
    std::uint32_t seq = 0;
    std::uint64_t tick = 0;
    friend bool operator==(const TimeSync&, const TimeSync&) = default;
};

using Message = std::variant<SensorReport, ActuatorCommand, Ack, TimeSync>;

enum class DecodeError { BadMagic, BadChecksum, Truncated, UnknownType, RangeViolation };
std::string_view decode_error_name(DecodeError e);

class DecodeFailure : public std::runtime_error {
public:
    DecodeFailure(DecodeError code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    DecodeError code() const { return code_; }

private:
    DecodeError code_;
};

Bytes encode(const Message& msg);

// Decodes exactly one frame occupying the whole buffer. Throws DecodeFailure.
Message decode(std::span<const std::uint8_t> bytes);

// Non-throwing variant for fuzzing and validation paths.
std::variant<Message, DecodeError> try_decode(std::span<const std::uint8_t> bytes);

std::uint16_t frame_checksum(std::span<const std::uint8_t> bytes);

SensorReport make_report(std::uint32_t seq, std::uint64_t tick, const Readings& readings);
Readings report_readings(const SensorReport& report);
ActuatorCommand make_command(std::uint32_t seq, std::uint64_t tick, const CommandEntries& entries);

// Splits a byte stream into frames using the payload_len field.
class FrameAssembler {
public:
    void push(std::span<const std::uint8_t> data);
    std::optional<Bytes> pop();
    std::size_t buffered() const { return buf_.size(); }

private:
    std::deque<std::uint8_t> buf_;
};

// ---- man-in-the-middle tap ----

struct TapAction {
    enum class Kind : std::uint8_t { Pass, Block, Override };
    Kind kind = Kind::Pass;
    int value = 0;
};

struct MitmPolicy {
    std::array<TapAction, kActuatorCount> actions{};

    static MitmPolicy all_pass() { return {}; }
    void block(ActuatorId a) { actions[idx(a)] = {TapAction::Kind::Block, 0}; }
    void override_with(ActuatorId a, int value);
    void validate() const;
};

struct MonitorLogEntry {
    enum class Direction : std::uint8_t { Genuine, Delivered };
    Direction direction;
    std::uint64_t tick;
    Bytes frame;
};

class MitmTap {
public:
    explicit MitmTap(MitmPolicy policy = MitmPolicy::all_pass()) : policy_(policy) {}

    void set_policy(const MitmPolicy& policy);
    const MitmPolicy& policy() const { return policy_; }

    // Applies `policy` (or the installed one) to each genuine frame.
    // Frames left without entries are dropped entirely.
    std::vector<Bytes> apply(const std::vector<Bytes>& genuine);
    std::vector<Bytes> apply(const MitmPolicy& policy, const std::vector<Bytes>& genuine);

    const std::vector<MonitorLogEntry>& log() const { return log_; }
    void set_logging(bool on) { logging_ = on; }
    void clear_log() { log_.clear(); }

private:
    MitmPolicy policy_;
    std::vector<MonitorLogEntry> log_;
    bool logging_ = true;
};

std::vector<Bytes> tap_apply(const MitmPolicy& policy, const std::vector<Bytes>& genuine,
                             std::vector<MonitorLogEntry>* monitor_log = nullptr);

// ---- transport ----

class SessionDesync : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One framed bidirectional channel between the coordinator and a peer.
class FrameLink {
public:
    virtual ~FrameLink() = default;
    virtual void send(const Bytes& frame) = 0;
    virtual Bytes receive() = 0;  // throws SessionDesync when nothing arrives
};

// A PLC as a protocol endpoint: TimeSync gates the scan, SensorReport triggers it.
class PlcEndpoint {
public:
    PlcEndpoint(PlcProgram program, ActuatorConfig initial);
    std::vector<Bytes> handle(std::span<const std::uint8_t> frame);
    Stage stage() const { return program_.stage; }

private:
    PlcProgram program_;
    ActuatorConfig previous_;
    std::optional<std::uint64_t> synced_tick_;
    std::uint32_t seq_ = 0;
};

enum class TransportKind { InMemory, Socket };

struct TickRecord {
    std::uint64_t tick = 0;
    Readings reported{};          // as decoded from the SensorReport frame
    ActuatorConfig genuine;       // merged PLC commands before the tap
    ActuatorConfig delivered;     // merged commands after the tap
    PlantState next;              // plant state after applying `delivered`
};

// Hook consulted every tick before the tap runs; returns the policy for that tick.
using Interceptor =
    std::function<MitmPolicy(std::uint64_t tick, const Readings& reported, const ActuatorConfig& genuine)>;

// Lockstep plant/PLC/attacker session. Commands for tick t are collected until the
// barrier, then merged: attacker overrides beat genuine, genuine merges S1 < S2 < S3.
class Session {
public:
    Session(PlantConfig cfg, PlantState start, std::uint64_t seed,
            TransportKind transport = TransportKind::InMemory, std::uint16_t port = 0);
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    TickRecord advance();

    const PlantState& state() const { return state_; }
    const PlantConfig& config() const { return cfg_; }
    const ActuatorConfig& last_genuine() const { return last_genuine_; }
    MitmTap& tap() { return tap_; }
    void set_policy(const MitmPolicy& p) { tap_.set_policy(p); }
    void set_interceptor(Interceptor fn) { interceptor_ = std::move(fn); }

private:
    PlantConfig cfg_;
    PlantState state_;
    std::uint64_t seed_;
    ActuatorConfig last_genuine_;
    MitmTap tap_;
    Interceptor interceptor_;
    std::uint32_t seq_ = 0;
    std::vector<std::unique_ptr<FrameLink>> links_;  // index = stage
    std::vector<std::jthread> peers_;
    int listen_fd_ = -1;
};

}  // namespace cpsfuzz

#include "cpsfuzz/netproto.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

namespace cpsfuzz {

namespace {

void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(Bytes& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(Bytes& out, std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint64_t get_be(std::span<const std::uint8_t> b, std::size_t off, std::size_t n) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v = (v << 8) | b[off + i];
    return v;
}

[[noreturn]] void fail(DecodeError e, const std::string& what) { throw DecodeFailure(e, what); }

bool actuator_value_ok(ActuatorId a, int v) {
    return a == ActuatorId::MCV401 ? (v >= 0 && v <= kMcvMax) : (v == 0 || v == 1);
}

}  // namespace

std::string_view decode_error_name(DecodeError e) {
    switch (e) {
        case DecodeError::BadMagic: return "BadMagic";
        case DecodeError::BadChecksum: return "BadChecksum";
        case DecodeError::Truncated: return "Truncated";
        case DecodeError::UnknownType: return "UnknownType";
        case DecodeError::RangeViolation: return "RangeViolation";
    }
    return "?";
}

std::uint16_t frame_checksum(std::span<const std::uint8_t> bytes) {
    std::uint32_t sum = 0;
    for (auto b : bytes) sum += b;
    return static_cast<std::uint16_t>(sum & 0xffff);
}

Bytes encode(const Message& msg) {
    Bytes payload;
    MsgType type{};
    std::uint32_t seq = 0;
    std::uint64_t tick = 0;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            seq = m.seq;
            tick = m.tick;
            if constexpr (std::is_same_v<T, SensorReport>) {
                type = MsgType::SensorReport;
                if (m.values.size() > 255) throw ContractViolation("too many sensor values in one frame");
                payload.push_back(static_cast<std::uint8_t>(m.values.size()));
                for (auto [id, v] : m.values) {
                    payload.push_back(static_cast<std::uint8_t>(id));
                    put_u32(payload, static_cast<std::uint32_t>(v));
                }
            } else if constexpr (std::is_same_v<T, ActuatorCommand>) {
                type = MsgType::ActuatorCommand;
                if (m.entries.size() > 255) throw ContractViolation("too many actuator entries in one frame");
                payload.push_back(static_cast<std::uint8_t>(m.entries.size()));
                for (auto [id, v] : m.entries) {
                    if (!actuator_value_ok(id, v)) throw ContractViolation("actuator value out of range");
                    payload.push_back(static_cast<std::uint8_t>(id));
                    payload.push_back(v);
                }
            } else if constexpr (std::is_same_v<T, Ack>) {
                type = MsgType::Ack;
            } else {
                type = MsgType::TimeSync;
            }
        },
        msg);

    Bytes out(kFrameMagic.begin(), kFrameMagic.end());
    out.push_back(static_cast<std::uint8_t>(type));
    put_u32(out, seq);
    put_u64(out, tick);
    put_u16(out, static_cast<std::uint16_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    put_u16(out, frame_checksum(out));
    return out;
}

Message decode(std::span<const std::uint8_t> b) {
    if (b.size() < kFrameMagic.size()) fail(DecodeError::Truncated, "frame shorter than magic");
    if (!std::equal(kFrameMagic.begin(), kFrameMagic.end(), b.begin()))
        fail(DecodeError::BadMagic, "bad frame magic");
    if (b.size() < kHeaderSize) fail(DecodeError::Truncated, "frame shorter than header");
    const std::uint8_t type = b[4];
    if (type < 1 || type > 4) fail(DecodeError::UnknownType, "unknown msg_type " + std::to_string(type));
    const auto seq = static_cast<std::uint32_t>(get_be(b, 5, 4));
    const auto tick = get_be(b, 9, 8);
    const auto len = static_cast<std::size_t>(get_be(b, 17, 2));
    const std::size_t total = kHeaderSize + len + kTrailerSize;
    if (b.size() != total) fail(DecodeError::Truncated, "frame length does not match payload_len");
    const auto sum = static_cast<std::uint16_t>(get_be(b, total - 2, 2));
    if (sum != frame_checksum(b.first(total - 2))) fail(DecodeError::BadChecksum, "checksum mismatch");

    auto payload = b.subspan(kHeaderSize, len);
    switch (static_cast<MsgType>(type)) {
        case MsgType::SensorReport: {
            if (payload.empty() || payload.size() != 1 + 5 * std::size_t{payload[0]})
                fail(DecodeError::Truncated, "sensor report count disagrees with payload_len");
            SensorReport r{seq, tick, {}};
            for (std::size_t i = 0; i < payload[0]; ++i) {
                std::uint8_t id = payload[1 + 5 * i];
                if (id >= kSensorCount) fail(DecodeError::RangeViolation, "unknown sensor id");
                auto raw = static_cast<std::uint32_t>(get_be(payload, 2 + 5 * i, 4));
                r.values.emplace_back(static_cast<SensorId>(id), static_cast<std::int32_t>(raw));
            }
            return r;
        }
        case MsgType::ActuatorCommand: {
            if (payload.empty() || payload.size() != 1 + 2 * std::size_t{payload[0]})
                fail(DecodeError::Truncated, "actuator command count disagrees with payload_len");
            ActuatorCommand c{seq, tick, {}};
            for (std::size_t i = 0; i < payload[0]; ++i) {
                std::uint8_t id = payload[1 + 2 * i];
                std::uint8_t v = payload[2 + 2 * i];
                if (id >= kActuatorCount) fail(DecodeError::RangeViolation, "unknown actuator id");
                auto a = static_cast<ActuatorId>(id);
                if (!actuator_value_ok(a, v))
                    fail(DecodeError::RangeViolation,
                         std::string(actuator_name(a)) + " value " + std::to_string(v) + " out of range");
                c.entries.emplace_back(a, v);
            }
            return c;
        }
        case MsgType::Ack:
            if (len != 0) fail(DecodeError::Truncated, "Ack carries a payload");
            return Ack{seq, tick};
        case MsgType::TimeSync:
            if (len != 0) fail(DecodeError::Truncated, "TimeSync carries a payload");
            return TimeSync{seq, tick};
    }
    fail(DecodeError::UnknownType, "unknown msg_type");
}

std::variant<Message, DecodeError> try_decode(std::span<const std::uint8_t> bytes) {
    try {
        return decode(bytes);
    } catch (const DecodeFailure& e) {
        return e.code();
    }
}

SensorReport make_report(std::uint32_t seq, std::uint64_t tick, const Readings& readings) {
    SensorReport r{seq, tick, {}};
    for (auto s : all_sensors())
        r.values.emplace_back(s, static_cast<std::int32_t>(std::llround(readings[idx(s)] * 1000.0)));
    return r;
}

Readings report_readings(const SensorReport& report) {
    Readings out{};
    std::array<bool, kSensorCount> seen{};
    for (auto [id, v] : report.values) {
        out[idx(id)] = v / 1000.0;
        seen[idx(id)] = true;
    }
    for (bool s : seen)
        if (!s) throw ContractViolation("sensor report is missing a sensor");
    return out;
}

ActuatorCommand make_command(std::uint32_t seq, std::uint64_t tick, const CommandEntries& entries) {
    ActuatorCommand c{seq, tick, {}};
    for (auto [a, v] : entries) c.entries.emplace_back(a, static_cast<std::uint8_t>(v));
    return c;
}

// ---- FrameAssembler ----

void FrameAssembler::push(std::span<const std::uint8_t> data) { buf_.insert(buf_.end(), data.begin(), data.end()); }

std::optional<Bytes> FrameAssembler::pop() {
    if (buf_.size() < kHeaderSize) return std::nullopt;
    for (std::size_t i = 0; i < kFrameMagic.size(); ++i)
        if (buf_[i] != kFrameMagic[i]) fail(DecodeError::BadMagic, "stream lost frame alignment");
    std::size_t len = (std::size_t{buf_[17]} << 8) | buf_[18];
    std::size_t total = kHeaderSize + len + kTrailerSize;
    if (buf_.size() < total) return std::nullopt;
    Bytes frame(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(total));
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(total));
    return frame;
}

// ---- tap ----

void MitmPolicy::override_with(ActuatorId a, int value) {
    if (!actuator_value_ok(a, value)) throw ContractViolation("override value out of range");
    actions[idx(a)] = {TapAction::Kind::Override, value};
}

void MitmPolicy::validate() const {
    for (auto a : all_actuators()) {
        const auto& act = actions[idx(a)];
        if (act.kind == TapAction::Kind::Override && !actuator_value_ok(a, act.value))
            throw ContractViolation("override value out of range");
    }
}

std::vector<Bytes> tap_apply(const MitmPolicy& policy, const std::vector<Bytes>& genuine,
                             std::vector<MonitorLogEntry>* monitor_log) {
    policy.validate();
    std::vector<Bytes> delivered;
    for (const auto& frame : genuine) {
        Message m = decode(frame);
        auto* cmd = std::get_if<ActuatorCommand>(&m);
        if (monitor_log) monitor_log->push_back({MonitorLogEntry::Direction::Genuine,
                                                 std::visit([](const auto& x) { return x.tick; }, m), frame});
        if (!cmd) {
            delivered.push_back(frame);
            if (monitor_log) monitor_log->push_back({MonitorLogEntry::Direction::Delivered,
                                                     std::visit([](const auto& x) { return x.tick; }, m), frame});
            continue;
        }
        ActuatorCommand out{cmd->seq, cmd->tick, {}};
        for (auto [a, v] : cmd->entries) {
            const auto& act = policy.actions[idx(a)];
            switch (act.kind) {
                case TapAction::Kind::Pass: out.entries.emplace_back(a, v); break;
                case TapAction::Kind::Block: break;
                case TapAction::Kind::Override:
                    out.entries.emplace_back(a, static_cast<std::uint8_t>(act.value));
                    break;
            }
        }
        if (out.entries.empty()) continue;
        Bytes bytes = out == *cmd ? frame : encode(out);
        if (monitor_log) monitor_log->push_back({MonitorLogEntry::Direction::Delivered, out.tick, bytes});
        delivered.push_back(std::move(bytes));
    }
    return delivered;
}

void MitmTap::set_policy(const MitmPolicy& policy) {
    policy.validate();
    policy_ = policy;
}

std::vector<Bytes> MitmTap::apply(const std::vector<Bytes>& genuine) { return apply(policy_, genuine); }

std::vector<Bytes> MitmTap::apply(const MitmPolicy& policy, const std::vector<Bytes>& genuine) {
    return tap_apply(policy, genuine, logging_ ? &log_ : nullptr);
}

// ---- PLC endpoint ----

PlcEndpoint::PlcEndpoint(PlcProgram program, ActuatorConfig initial)
    : program_(program), previous_(initial) {}

std::vector<Bytes> PlcEndpoint::handle(std::span<const std::uint8_t> frame) {
    Message m = decode(frame);
    if (auto* ts = std::get_if<TimeSync>(&m)) {
        synced_tick_ = ts->tick;
        return {};
    }
    if (auto* rep = std::get_if<SensorReport>(&m)) {
        if (!synced_tick_ || *synced_tick_ != rep->tick)
            throw SessionDesync("PLC " + std::string(stage_name(program_.stage)) +
                                " missed the TimeSync for tick " + std::to_string(rep->tick));
        CommandEntries entries = plc_scan(program_, report_readings(*rep), previous_);
        for (auto [a, v] : entries) previous_.set(a, v);
        synced_tick_.reset();
        return {encode(make_command(seq_++, rep->tick, entries))};
    }
    return {};
}

// ---- links ----

namespace {

class MemoryLink final : public FrameLink {
public:
    explicit MemoryLink(PlcEndpoint ep) : ep_(std::move(ep)) {}
    void send(const Bytes& frame) override {
        for (auto& r : ep_.handle(frame)) inbox_.push_back(std::move(r));
    }
    Bytes receive() override {
        if (inbox_.empty()) throw SessionDesync("in-memory peer produced no frame");
        Bytes f = std::move(inbox_.front());
        inbox_.pop_front();
        return f;
    }

private:
    PlcEndpoint ep_;
    std::deque<Bytes> inbox_;
};

constexpr int kSocketTimeoutMs = 5000;

bool write_all(int fd, const Bytes& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        off += static_cast<std::size_t>(n);
    }
    return true;
}

// Reads until one full frame is available; nullopt on EOF, error or timeout.
std::optional<Bytes> read_frame(int fd, FrameAssembler& asm_, int timeout_ms) {
    std::uint8_t buf[4096];
    while (true) {
        if (auto f = asm_.pop()) return f;
        if (timeout_ms >= 0) {
            pollfd p{fd, POLLIN, 0};
            int r = ::poll(&p, 1, timeout_ms);
            if (r <= 0) return std::nullopt;
        }
        ssize_t n = ::recv(fd, buf, sizeof buf, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return std::nullopt;
        asm_.push(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
    }
}

class SocketLink final : public FrameLink {
public:
    explicit SocketLink(int fd) : fd_(fd) {}
    ~SocketLink() override {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
    }
    void send(const Bytes& frame) override {
        if (!write_all(fd_, frame)) throw SessionDesync("socket peer closed while sending");
    }
    Bytes receive() override {
        auto f = read_frame(fd_, asm_, kSocketTimeoutMs);
        if (!f) throw SessionDesync("socket peer did not answer before the tick barrier");
        return *f;
    }

private:
    int fd_;
    FrameAssembler asm_;
};

void run_socket_plc(std::uint16_t port, PlcEndpoint ep) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return;
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        return;
    }
    try {
        write_all(fd, encode(Ack{0, static_cast<std::uint64_t>(ep.stage())}));
        FrameAssembler asm_;
        while (auto frame = read_frame(fd, asm_, -1))
            for (auto& reply : ep.handle(*frame))
                if (!write_all(fd, reply)) break;
    } catch (const std::exception&) {
        // The coordinator notices the silence and reports a desync.
    }
    ::close(fd);
}

}  // namespace

// ---- session ----

Session::Session(PlantConfig cfg, PlantState start, std::uint64_t seed, TransportKind transport,
                 std::uint16_t port)
    : cfg_(std::move(cfg)), state_(std::move(start)), seed_(seed), last_genuine_(state_.actuators) {
    cfg_.validate();
    Controller defaults;
    const std::array<Stage, kStageCount> stages = {Stage::S1, Stage::S2, Stage::S3};
    if (transport == TransportKind::InMemory) {
        for (auto s : stages)
            links_.push_back(std::make_unique<MemoryLink>(PlcEndpoint(defaults.program(s), state_.actuators)));
        return;
    }

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(listen_fd_, 8) != 0) {
        ::close(listen_fd_);
        throw std::runtime_error("cannot listen on port " + std::to_string(port) + ": " + std::strerror(errno));
    }
    socklen_t alen = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &alen);
    const std::uint16_t bound = ntohs(addr.sin_port);

    for (auto s : stages)
        peers_.emplace_back(run_socket_plc, bound, PlcEndpoint(defaults.program(s), state_.actuators));

    std::vector<std::unique_ptr<FrameLink>> by_stage(kStageCount);
    for (std::size_t i = 0; i < kStageCount; ++i) {
        pollfd p{listen_fd_, POLLIN, 0};
        if (::poll(&p, 1, kSocketTimeoutMs) <= 0) throw SessionDesync("PLC peer failed to connect");
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) throw std::runtime_error("accept() failed");
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        auto link = std::make_unique<SocketLink>(fd);
        Message hello = decode(link->receive());
        auto* ack = std::get_if<Ack>(&hello);
        if (!ack || ack->tick >= kStageCount || by_stage[ack->tick])
            throw SessionDesync("PLC peer sent an invalid hello");
        by_stage[ack->tick] = std::move(link);
    }
    links_ = std::move(by_stage);
}

Session::~Session() {
    links_.clear();  // closing the sockets lets peer threads exit before they are joined
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

TickRecord Session::advance() {
    const std::uint64_t t = state_.tick;
    const Bytes sync = encode(TimeSync{seq_++, t});
    const Bytes report = encode(make_report(seq_++, t, state_.reported));
    for (auto& link : links_) {
        link->send(sync);
        link->send(report);
    }

    std::vector<Bytes> genuine_frames;
    ActuatorConfig genuine = last_genuine_;
    for (auto& link : links_) {
        Bytes frame = link->receive();
        Message m = decode(frame);
        auto* cmd = std::get_if<ActuatorCommand>(&m);
        if (!cmd || cmd->tick != t)
            throw SessionDesync("expected an ActuatorCommand for tick " + std::to_string(t));
        for (auto [a, v] : cmd->entries) genuine.set(a, v);
        genuine_frames.push_back(std::move(frame));
    }

    TickRecord rec;
    rec.tick = t;
    rec.reported = report_readings(std::get<SensorReport>(decode(report)));
    rec.genuine = genuine;

    MitmPolicy policy = interceptor_ ? interceptor_(t, rec.reported, genuine) : tap_.policy();
    auto delivered_frames = tap_.apply(policy, genuine_frames);
    ActuatorConfig delivered = state_.actuators;  // blocked actuators keep their position
    for (const auto& f : delivered_frames) {
        Message m = decode(f);
        if (auto* cmd = std::get_if<ActuatorCommand>(&m))
            for (auto [a, v] : cmd->entries) delivered.set(a, v);
    }
    rec.delivered = delivered;

    last_genuine_ = genuine;
    state_ = step(state_, delivered, cfg_, seed_);
    rec.next = state_;
    return rec;
}

}  // namespace cpsfuzz

#include "cpsfuzz/plant.hpp"

#include "cpsfuzz/control.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace cpsfuzz {

namespace {

constexpr std::array<std::string_view, kSensorCount> kSensorNames = {
    "LIT101", "LIT301", "LIT401", "FIT101", "FIT201", "FIT301", "FIT401", "DPIT301"};
constexpr std::array<std::string_view, kActuatorCount> kActuatorNames = {
    "MV101", "MV201", "P101", "P102", "P301", "P302", "P401", "P601", "MCV401"};

constexpr std::uint16_t kMcvMask = 0x7f;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double unit_open(std::uint64_t h) {
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& text, const std::string& key) {
    try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad number for '" + key + "': '" + text + "'");
    }
}

}  // namespace

std::string_view sensor_name(SensorId s) { return kSensorNames.at(idx(s)); }
std::string_view actuator_name(ActuatorId a) { return kActuatorNames.at(idx(a)); }

SensorId parse_sensor(std::string_view name) {
    for (std::size_t i = 0; i < kSensorCount; ++i)
        if (kSensorNames[i] == name) return static_cast<SensorId>(i);
    throw std::invalid_argument("unknown sensor '" + std::string(name) + "'");
}

ActuatorId parse_actuator(std::string_view name) {
    for (std::size_t i = 0; i < kActuatorCount; ++i)
        if (kActuatorNames[i] == name) return static_cast<ActuatorId>(i);
    throw std::invalid_argument("unknown actuator '" + std::string(name) + "'");
}

std::array<SensorId, kSensorCount> all_sensors() {
    std::array<SensorId, kSensorCount> out{};
    for (std::size_t i = 0; i < kSensorCount; ++i) out[i] = static_cast<SensorId>(i);
    return out;
}

std::array<ActuatorId, kActuatorCount> all_actuators() {
    std::array<ActuatorId, kActuatorCount> out{};
    for (std::size_t i = 0; i < kActuatorCount; ++i) out[i] = static_cast<ActuatorId>(i);
    return out;
}

std::string_view direction_name(Direction d) { return d == Direction::Low ? "low" : "high"; }

// ---- ActuatorConfig ----

bool ActuatorConfig::bits_valid(std::uint16_t bits) {
    return bits < (1u << kConfigBits) && (bits & kMcvMask) <= kMcvMax;
}

ActuatorConfig ActuatorConfig::from_bits(std::uint16_t bits) {
    if (!bits_valid(bits))
        throw ContractViolation("actuator config bits out of range: " + std::to_string(bits));
    ActuatorConfig c;
    c.bits_ = bits;
    return c;
}

ActuatorConfig ActuatorConfig::from_positions(const std::array<int, kActuatorCount>& positions) {
    ActuatorConfig c;
    for (auto a : all_actuators()) c.set(a, positions[idx(a)]);
    return c;
}

std::uint16_t ActuatorConfig::actuator_mask(ActuatorId a) {
    if (a == ActuatorId::MCV401) return kMcvMask;
    return mask_of(idx(a));
}

int ActuatorConfig::get(ActuatorId a) const {
    if (a == ActuatorId::MCV401) return bits_ & kMcvMask;
    return (bits_ & mask_of(idx(a))) ? 1 : 0;
}

void ActuatorConfig::set(ActuatorId a, int value) {
    if (a == ActuatorId::MCV401) {
        if (value < 0 || value > kMcvMax)
            throw ContractViolation("MCV401 position out of range: " + std::to_string(value));
        bits_ = static_cast<std::uint16_t>((bits_ & ~kMcvMask) | value);
        return;
    }
    if (value != 0 && value != 1)
        throw ContractViolation(std::string(actuator_name(a)) + " is binary, got " +
                                std::to_string(value));
    if (value)
        bits_ |= mask_of(idx(a));
    else
        bits_ &= static_cast<std::uint16_t>(~mask_of(idx(a)));
}

std::array<int, kActuatorCount> ActuatorConfig::positions() const {
    std::array<int, kActuatorCount> out{};
    for (auto a : all_actuators()) out[idx(a)] = get(a);
    return out;
}

std::string ActuatorConfig::to_string() const {
    std::string s;
    for (auto a : all_actuators()) {
        if (!s.empty()) s += ',';
        s += std::to_string(get(a));
    }
    return s;
}

// ---- PlantConfig ----

std::array<SafeRange, kSensorCount> PlantConfig::default_safe_ranges() {
    return {SafeRange{20, 80}, SafeRange{20, 80}, SafeRange{20, 80}, SafeRange{0.2, 1.5},
            SafeRange{0.2, 1.8}, SafeRange{0.2, 1.8}, SafeRange{0.2, 1.5}, SafeRange{1.0, 15.0}};
}

void PlantConfig::validate() const {
    if (tank_capacity_L <= 0) throw std::invalid_argument("tank_capacity_L must be > 0");
    for (double r : {inlet_rate, pump_rate, drain_capacity, return_rate, dp_gain, noise_sigma})
        if (!(r >= 0) || !std::isfinite(r)) throw std::invalid_argument("rates must be finite and >= 0");
    if (!(tick_seconds > 0)) throw std::invalid_argument("tick_seconds must be > 0");
    for (auto s : all_sensors()) {
        const auto& r = safe_ranges[idx(s)];
        if (!(r.low < r.high))
            throw std::invalid_argument("safe range for " + std::string(sensor_name(s)) +
                                        " needs L < H");
    }
}

PlantConfig parse_plant_config(std::string_view text) {
    PlantConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::string body = trim(line);
        if (body.empty()) continue;
        auto eq = body.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(std::string_view(body).substr(0, eq));
        std::string value = trim(std::string_view(body).substr(eq + 1));

        if (key.rfind("safe.", 0) == 0) {
            SensorId s = parse_sensor(key.substr(5));
            auto comma = value.find(',');
            if (comma == std::string::npos)
                throw std::runtime_error("config: '" + key + "' expects L,H");
            cfg.safe_ranges[idx(s)] = {parse_double(trim(value.substr(0, comma)), key),
                                       parse_double(trim(value.substr(comma + 1)), key)};
            continue;
        }
        double v = parse_double(value, key);
        if (key == "tank_capacity_L") cfg.tank_capacity_L = v;
        else if (key == "inlet_rate") cfg.inlet_rate = v;
        else if (key == "pump_rate") cfg.pump_rate = v;
        else if (key == "drain_capacity") cfg.drain_capacity = v;
        else if (key == "return_rate") cfg.return_rate = v;
        else if (key == "dp_gain") cfg.dp_gain = v;
        else if (key == "noise_sigma") cfg.noise_sigma = v;
        else if (key == "tick_seconds") cfg.tick_seconds = v;
        else throw std::runtime_error("config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

PlantConfig load_plant_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_plant_config(ss.str());
}

// ---- dynamics ----

ActuatorConfig equilibrium_config() {
    return ActuatorConfig::from_positions({1, 1, 1, 0, 1, 0, 1, 0, 50});
}

double quantize_milli(double value) { return std::round(value * 1000.0) / 1000.0; }

double noise_normal(std::uint64_t seed, std::uint64_t tick, std::size_t sensor) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ tick);
    h = splitmix64(h ^ (0x5851f42d4c957f2dULL * (sensor + 1)));
    double u1 = unit_open(h);
    double u2 = unit_open(splitmix64(h));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

void fill_readings(PlantState& s, double f101, double f201, double f301, double f401,
                   const PlantConfig& cfg, std::uint64_t seed) {
    auto& t = s.truth;
    t[idx(SensorId::LIT101)] = s.volumes[0] / cfg.tank_capacity_L * 100.0;
    t[idx(SensorId::LIT301)] = s.volumes[1] / cfg.tank_capacity_L * 100.0;
    t[idx(SensorId::LIT401)] = s.volumes[2] / cfg.tank_capacity_L * 100.0;
    t[idx(SensorId::FIT101)] = f101;
    t[idx(SensorId::FIT201)] = f201;
    t[idx(SensorId::FIT301)] = f301;
    t[idx(SensorId::FIT401)] = f401;
    t[idx(SensorId::DPIT301)] = cfg.dp_gain * f301;
    for (std::size_t j = 0; j < kSensorCount; ++j) {
        double noisy = t[j] * (1.0 + cfg.noise_sigma * noise_normal(seed, s.tick, j));
        s.reported[j] = quantize_milli(noisy);
    }
}

}  // namespace

PlantState equilibrium_state(const PlantConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    PlantState s;
    s.volumes.fill(cfg.tank_capacity_L / 2.0);
    s.actuators = equilibrium_config();
    const auto& a = s.actuators;
    double f101 = cfg.inlet_rate * a.get(ActuatorId::MV101);
    double f201 = cfg.pump_rate * (a.get(ActuatorId::P101) + a.get(ActuatorId::P102));
    double f301 = cfg.pump_rate * (a.get(ActuatorId::P301) + a.get(ActuatorId::P302));
    double f401 = cfg.drain_capacity * a.get(ActuatorId::MCV401) / 100.0;
    fill_readings(s, f101, f201, f301, f401, cfg, seed);
    return s;
}

PlantState step(const PlantState& state, const ActuatorConfig& commands, const PlantConfig& cfg,
                std::uint64_t rng_seed) {
    const double dt = cfg.tick_seconds;
    const double cap = cfg.tank_capacity_L;
    const auto& a = commands;
    auto v = state.volumes;
    for (double vol : v)
        if (!(vol >= 0.0 && vol <= cap)) throw ContractViolation("tank volume outside [0, capacity]");

    double f101 = cfg.inlet_rate * a.get(ActuatorId::MV101);
    double f201 = (a.get(ActuatorId::MV201) && v[0] > 0.0)
                      ? cfg.pump_rate * (a.get(ActuatorId::P101) + a.get(ActuatorId::P102))
                      : 0.0;
    double f301 = v[1] > 0.0 ? cfg.pump_rate * (a.get(ActuatorId::P301) + a.get(ActuatorId::P302))
                             : 0.0;
    double f401 = (a.get(ActuatorId::P401) && v[2] > 0.0)
                      ? cfg.drain_capacity * a.get(ActuatorId::MCV401) / 100.0
                      : 0.0;
    double f601 = (a.get(ActuatorId::P601) && v[2] > 0.0) ? cfg.return_rate : 0.0;

    // Outflows first: never draw more than the tank holds at the start of the tick.
    f201 = std::min(f201, v[0] / dt);
    f301 = std::min(f301, v[1] / dt);
    double out4 = f401 + f601;
    if (out4 * dt > v[2] && out4 > 0.0) {
        double scale = v[2] / (out4 * dt);
        f401 *= scale;
        f601 *= scale;
    }

    PlantState next;
    next.tick = state.tick + 1;
    next.actuators = commands;
    next.f601 = f601;
    std::array<double, kTankCount> delta = {(f101 + f601 - f201) * dt, (f201 - f301) * dt,
                                            (f301 - f401 - f601) * dt};
    for (std::size_t k = 0; k < kTankCount; ++k) {
        double nv = v[k] + delta[k];
        if (nv > cap) {
            next.spill += nv - cap;
            nv = cap;
        }
        next.volumes[k] = std::max(nv, 0.0);
    }
    fill_readings(next, f101, f201, f301, f401, cfg, rng_seed);
    return next;
}

std::vector<UnsafeEntry> is_unsafe(const PlantState& state,
                                   const std::array<SafeRange, kSensorCount>& ranges) {
    std::vector<UnsafeEntry> out;
    for (auto s : all_sensors()) {
        double v = state.truth[idx(s)];
        if (v < ranges[idx(s)].low) out.push_back({s, Direction::Low});
        else if (v > ranges[idx(s)].high) out.push_back({s, Direction::High});
    }
    return out;
}

PlantState reset_to_normal(const PlantConfig& cfg, std::uint64_t seed) {
    constexpr std::uint64_t kMinTicks = 60;
    constexpr std::uint64_t kMaxTicks = 10000;
    PlantState s = equilibrium_state(cfg, seed);
    Controller plc;
    ActuatorConfig prev = s.actuators;
    const double half = cfg.tank_capacity_L / 2.0;
    for (std::uint64_t t = 0; t < kMaxTicks; ++t) {
        if (t >= kMinTicks) {
            bool tanks_ok = std::all_of(s.volumes.begin(), s.volumes.end(), [&](double v) {
                return std::abs(v - half) <= 0.02 * cfg.tank_capacity_L;
            });
            bool inside = true;
            for (auto sid : all_sensors()) {
                const auto& r = cfg.safe_ranges[idx(sid)];
                double v = s.truth[idx(sid)];
                inside = inside && v > r.low && v < r.high;
            }
            if (tanks_ok && inside) return s;
        }
        prev = plc.scan(s.reported, prev);
        s = step(s, prev, cfg, seed);
    }
    throw std::runtime_error("reset_to_normal: plant did not settle within 10000 ticks");
}

}  // namespace cpsfuzz

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cpsfuzz {

enum class SensorId : std::uint8_t { LIT101, LIT301, LIT401, FIT101, FIT201, FIT301, FIT401, DPIT301 };
enum class ActuatorId : std::uint8_t { MV101, MV201, P101, P102, P301, P302, P401, P601, MCV401 };

inline constexpr std::size_t kSensorCount = 8;
inline constexpr std::size_t kActuatorCount = 9;
inline constexpr std::size_t kBinaryActuators = 8;
inline constexpr std::size_t kConfigBits = 15;
inline constexpr int kMcvMax = 100;

constexpr std::size_t idx(SensorId s) { return static_cast<std::size_t>(s); }
constexpr std::size_t idx(ActuatorId a) { return static_cast<std::size_t>(a); }

std::string_view sensor_name(SensorId s);
std::string_view actuator_name(ActuatorId a);
SensorId parse_sensor(std::string_view name);
ActuatorId parse_actuator(std::string_view name);
std::array<SensorId, kSensorCount> all_sensors();
std::array<ActuatorId, kActuatorCount> all_actuators();

using Readings = std::array<double, kSensorCount>;

// Thrown when a caller breaks an operation's precondition.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Fixed 15-bit layout: MV101 is bit 14, P601 bit 7, MCV401 occupies bits 6..0.
// Numeric order of bits() is the canonical enumeration order.
class ActuatorConfig {
public:
    ActuatorConfig() = default;

    static ActuatorConfig from_bits(std::uint16_t bits);
    static ActuatorConfig from_positions(const std::array<int, kActuatorCount>& positions);
    static bool bits_valid(std::uint16_t bits);

    std::uint16_t bits() const { return bits_; }
    int get(ActuatorId a) const;
    void set(ActuatorId a, int value);
    std::array<int, kActuatorCount> positions() const;
    std::string to_string() const;

    // Bit at layout position p (0 = MV101 ... 14 = MCV401 LSB).
    static constexpr std::uint16_t mask_of(std::size_t p) {
        return static_cast<std::uint16_t>(1u << (kConfigBits - 1 - p));
    }
    // Mask covering every bit that encodes actuator a.
    static std::uint16_t actuator_mask(ActuatorId a);

    friend bool operator==(const ActuatorConfig&, const ActuatorConfig&) = default;

private:
    std::uint16_t bits_ = 0;
};

struct SafeRange {
    double low = 0.0;
    double high = 0.0;
    double width() const { return high - low; }
};

struct PlantConfig {
    double tank_capacity_L = 1000.0;
    double inlet_rate = 1.0;
    double pump_rate = 1.0;
    double drain_capacity = 2.0;
    double return_rate = 1.0;
    double dp_gain = 10.0;
    double noise_sigma = 0.005;
    double tick_seconds = 1.0;
    std::array<SafeRange, kSensorCount> safe_ranges = default_safe_ranges();

    static std::array<SafeRange, kSensorCount> default_safe_ranges();
    void validate() const;
};

PlantConfig parse_plant_config(std::string_view text);
PlantConfig load_plant_config(const std::string& path);

enum class Tank : std::uint8_t { T101, T301, T401 };
inline constexpr std::size_t kTankCount = 3;

struct PlantState {
    std::uint64_t tick = 0;
    std::array<double, kTankCount> volumes{};
    ActuatorConfig actuators;  // positions in force over the interval ending at tick
    Readings truth{};          // pre-noise values
    Readings reported{};       // noisy, quantized to milli-units
    double spill = 0.0;        // liters discarded during the last interval
    double f601 = 0.0;         // true return flow over the last interval (no sensor)
};

enum class Direction : std::uint8_t { Low, High };
std::string_view direction_name(Direction d);

struct UnsafeEntry {
    SensorId sensor;
    Direction direction;
    friend bool operator==(const UnsafeEntry&, const UnsafeEntry&) = default;
};

// Normal operating configuration: all flows at 1.0 L/s with default rates.
ActuatorConfig equilibrium_config();

// Tanks at 50% with the equilibrium configuration in force and readings computed.
PlantState equilibrium_state(const PlantConfig& cfg, std::uint64_t seed);

// Round to the wire's milli-unit grid.
double quantize_milli(double value);

// Standard normal draw determined only by (seed, tick, sensor).
double noise_normal(std::uint64_t seed, std::uint64_t tick, std::size_t sensor);

PlantState step(const PlantState& state, const ActuatorConfig& commands, const PlantConfig& cfg,
                std::uint64_t rng_seed);

std::vector<UnsafeEntry> is_unsafe(const PlantState& state,
                                   const std::array<SafeRange, kSensorCount>& ranges);

// Runs the PLCs from the equilibrium state until every sensor sits inside its range
// and tanks are within 2% of half full; at least 60 ticks.
PlantState reset_to_normal(const PlantConfig& cfg, std::uint64_t seed);

}  // namespace cpsfuzz

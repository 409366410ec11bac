#pragma once

#include "cpsfuzz/plant.hpp"

#include <string>
#include <vector>

namespace cpsfuzz {

enum class GoalKind : std::uint8_t { SensorHigh, SensorLow, Group, Isolation };

struct FitnessSpec {
    GoalKind kind = GoalKind::SensorHigh;
    SensorId target = SensorId::LIT101;
    std::vector<SensorId> group;   // Group only
    std::vector<SensorId> peers;   // Isolation only
    double epsilon = 1e-6;

    static FitnessSpec sensor_high(SensorId s) { return {GoalKind::SensorHigh, s, {}, {}}; }
    static FitnessSpec sensor_low(SensorId s) { return {GoalKind::SensorLow, s, {}, {}}; }
    static FitnessSpec isolation(SensorId target);
    static FitnessSpec group_of(std::vector<SensorId> sensors);

    // Sensors whose predictions the score depends on.
    std::vector<SensorId> inputs() const;
    std::string name() const;
    void validate() const;
};

// Parses "<SENSOR>:high", "<SENSOR>:low", "isolation:<SENSOR>" or "group:<S1>,<S2>,...".
FitnessSpec parse_goal(std::string_view text);

double eval_sensor(const FitnessSpec& spec, const Readings& predicted);
double eval_group(const FitnessSpec& spec, const Readings& predicted,
                  const std::array<SafeRange, kSensorCount>& ranges);
double eval_isolation(const FitnessSpec& spec, const Readings& predicted);

// Distance to the nearest threshold inside [L, H], zero outside.
double threshold_distance(double v, const SafeRange& r);

double evaluate_fitness(const FitnessSpec& spec, const Readings& predicted,
                        const std::array<SafeRange, kSensorCount>& ranges);

// Whether true plant values satisfy the goal's unsafe condition.
bool goal_reached(const FitnessSpec& spec, const Readings& truth,
                  const std::array<SafeRange, kSensorCount>& ranges);

// The 16 (sensor, direction) goals followed by isolation:FIT401.
std::vector<FitnessSpec> default_goals();

}  // namespace cpsfuzz

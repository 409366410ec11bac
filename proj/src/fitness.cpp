#include "cpsfuzz/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cpsfuzz {

namespace {

constexpr std::array<SensorId, 3> kStageFlows = {SensorId::FIT201, SensorId::FIT301, SensorId::FIT401};

}  // namespace

FitnessSpec FitnessSpec::isolation(SensorId target) {
    FitnessSpec s{GoalKind::Isolation, target, {}, {}};
    for (auto f : kStageFlows)
        if (f != target) s.peers.push_back(f);
    return s;
}

FitnessSpec FitnessSpec::group_of(std::vector<SensorId> sensors) {
    FitnessSpec s{GoalKind::Group, SensorId::LIT101, std::move(sensors), {}};
    s.validate();
    return s;
}

std::vector<SensorId> FitnessSpec::inputs() const {
    switch (kind) {
        case GoalKind::SensorHigh:
        case GoalKind::SensorLow: return {target};
        case GoalKind::Group: return group;
        case GoalKind::Isolation: {
            std::vector<SensorId> v{target};
            v.insert(v.end(), peers.begin(), peers.end());
            return v;
        }
    }
    return {};
}

std::string FitnessSpec::name() const {
    switch (kind) {
        case GoalKind::SensorHigh: return std::string(sensor_name(target)) + ":high";
        case GoalKind::SensorLow: return std::string(sensor_name(target)) + ":low";
        case GoalKind::Isolation: return "isolation:" + std::string(sensor_name(target));
        case GoalKind::Group: {
            std::string s = "group:";
            for (std::size_t i = 0; i < group.size(); ++i) {
                if (i) s += ',';
                s += sensor_name(group[i]);
            }
            return s;
        }
    }
    return "?";
}

void FitnessSpec::validate() const {
    if (!(epsilon > 0)) throw ContractViolation("fitness epsilon must be > 0");
    if (kind == GoalKind::Group && group.empty()) throw ContractViolation("group fitness needs sensors");
    if (kind == GoalKind::Isolation && peers.empty()) throw ContractViolation("isolation fitness needs peers");
}

FitnessSpec parse_goal(std::string_view text) {
    auto colon = text.find(':');
    if (colon == std::string_view::npos)
        throw std::invalid_argument("goal must look like SENSOR:high|low or isolation:SENSOR");
    std::string_view head = text.substr(0, colon);
    std::string_view tail = text.substr(colon + 1);
    if (head == "isolation") return FitnessSpec::isolation(parse_sensor(tail));
    if (head == "group") {
        std::vector<SensorId> g;
        std::stringstream ss{std::string(tail)};
        std::string item;
        while (std::getline(ss, item, ',')) g.push_back(parse_sensor(item));
        return FitnessSpec::group_of(std::move(g));
    }
    SensorId s = parse_sensor(head);
    if (tail == "high") return FitnessSpec::sensor_high(s);
    if (tail == "low") return FitnessSpec::sensor_low(s);
    throw std::invalid_argument("goal direction must be high or low, got '" + std::string(tail) + "'");
}

double eval_sensor(const FitnessSpec& spec, const Readings& predicted) {
    const double v = predicted[idx(spec.target)];
    switch (spec.kind) {
        case GoalKind::SensorHigh: return v;
        case GoalKind::SensorLow: return -v;
        default: throw ContractViolation("eval_sensor needs a sensor-high/low spec");
    }
}

double threshold_distance(double v, const SafeRange& r) {
    if (v < r.low || v > r.high) return 0.0;
    return std::min(std::abs(v - r.low), std::abs(v - r.high));
}

double eval_group(const FitnessSpec& spec, const Readings& predicted,
                  const std::array<SafeRange, kSensorCount>& ranges) {
    if (spec.kind != GoalKind::Group) throw ContractViolation("eval_group needs a group spec");
    spec.validate();
    double score = 0.0;
    for (auto s : spec.group) {
        const auto& r = ranges[idx(s)];
        if (!(r.low < r.high)) throw ContractViolation("missing safe range for group sensor");
        score += r.width() / (threshold_distance(predicted[idx(s)], r) + spec.epsilon);
    }
    return score;
}

double eval_isolation(const FitnessSpec& spec, const Readings& predicted) {
    if (spec.kind != GoalKind::Isolation) throw ContractViolation("eval_isolation needs an isolation spec");
    spec.validate();
    double prod = 1.0;
    for (auto p : spec.peers) prod *= predicted[idx(p)];
    return prod / (predicted[idx(spec.target)] + spec.epsilon);
}

double evaluate_fitness(const FitnessSpec& spec, const Readings& predicted,
                        const std::array<SafeRange, kSensorCount>& ranges) {
    switch (spec.kind) {
        case GoalKind::SensorHigh:
        case GoalKind::SensorLow: return eval_sensor(spec, predicted);
        case GoalKind::Group: return eval_group(spec, predicted, ranges);
        case GoalKind::Isolation: return eval_isolation(spec, predicted);
    }
    return 0.0;
}

bool goal_reached(const FitnessSpec& spec, const Readings& truth,
                  const std::array<SafeRange, kSensorCount>& ranges) {
    auto below = [&](SensorId s) { return truth[idx(s)] < ranges[idx(s)].low; };
    auto above = [&](SensorId s) { return truth[idx(s)] > ranges[idx(s)].high; };
    switch (spec.kind) {
        case GoalKind::SensorHigh: return above(spec.target);
        case GoalKind::SensorLow: return below(spec.target);
        case GoalKind::Group:
            return std::any_of(spec.group.begin(), spec.group.end(),
                               [&](SensorId s) { return below(s) || above(s); });
        case GoalKind::Isolation:
            return below(spec.target) &&
                   std::none_of(spec.peers.begin(), spec.peers.end(), [&](SensorId s) { return below(s); });
    }
    return false;
}

std::vector<FitnessSpec> default_goals() {
    std::vector<FitnessSpec> out;
    for (auto s : all_sensors()) {
        out.push_back(FitnessSpec::sensor_high(s));
        out.push_back(FitnessSpec::sensor_low(s));
    }
    out.push_back(FitnessSpec::isolation(SensorId::FIT401));
    return out;
}

}  // namespace cpsfuzz

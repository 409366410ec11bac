#pragma once

#include "cpsfuzz/control.hpp"
#include "cpsfuzz/plant.hpp"

#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace cpsfuzz {

enum class RuleKind : std::uint8_t { StateDependent, PhysicalInvariant };
enum class MonitorMode : std::uint8_t { All, ConditionsOnly, InvariantsOnly };

std::string_view mode_name(MonitorMode m);
MonitorMode parse_mode(std::string_view name);
bool mode_enables(MonitorMode m, RuleKind k);

struct MonitorParams {
    int grace = 5;
    int window = 20;               // mass-balance window W
    std::optional<double> tau_mass;  // liters; derived from the plant config when unset
    double tau_dp = 1.0;           // kPa
    bool control_consistency = true;
    int cc_grace = 0;
};

// 3 x the standard deviation of the mass-balance residual at a full tank.
double default_tau_mass(const PlantConfig& cfg, int window);

// What a monitor sees for tick t: reported readings and the commands delivered at t.
struct MonitorEntry {
    std::uint64_t tick = 0;
    Readings readings{};
    ActuatorConfig delivered;
};

struct Alert {
    std::uint64_t tick = 0;
    std::string rule;
    std::string observed;
    friend bool operator==(const Alert&, const Alert&) = default;
};

struct RuleInfo {
    std::string id;
    RuleKind kind;
    int grace;
};

class Monitor {
public:
    Monitor(PlantConfig cfg, MonitorParams params = {}, MonitorMode mode = MonitorMode::All);

    // Commands that were in force before the first observed tick.
    void prime(const ActuatorConfig& in_force);
    std::vector<Alert> observe(const MonitorEntry& entry);

    const std::vector<RuleInfo>& rules() const { return rules_; }
    double tau_mass() const { return tau_mass_; }

private:
    std::optional<std::string> violation(std::size_t rule, const MonitorEntry& e) const;

    PlantConfig cfg_;
    MonitorParams params_;
    MonitorMode mode_;
    double tau_mass_;
    Controller plc_;
    std::vector<RuleInfo> rules_;
    std::vector<int> streak_;
    std::deque<MonitorEntry> history_;   // previous entries, newest last
    std::optional<ActuatorConfig> primed_;
};

// Replays a recorded entry stream through a fresh monitor.
std::vector<Alert> check_trace(const PlantConfig& cfg, const MonitorParams& params, MonitorMode mode,
                               const std::optional<ActuatorConfig>& in_force,
                               const std::vector<MonitorEntry>& entries);

}  // namespace cpsfuzz

#include "cpsfuzz/defence.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace cpsfuzz {

namespace {

enum Rule : std::size_t {
    SD1, SD2, SD3, SD4, SD5, SD6, SD7, SD8, SD9,
    PI1, PI2, PI3, PI4,
    CC_FIRST,
};

std::string fmt_obs(std::string_view sensor, double v, std::string_view act, int pos) {
    return fmt::format("{}={:.3f} {}={}", sensor, v, act, pos);
}

}  // namespace

std::string_view mode_name(MonitorMode m) {
    switch (m) {
        case MonitorMode::All: return "all";
        case MonitorMode::ConditionsOnly: return "conditions-only";
        case MonitorMode::InvariantsOnly: return "invariants-only";
    }
    return "?";
}

MonitorMode parse_mode(std::string_view name) {
    if (name == "all") return MonitorMode::All;
    if (name == "conditions-only" || name == "conditions") return MonitorMode::ConditionsOnly;
    if (name == "invariants-only" || name == "invariants") return MonitorMode::InvariantsOnly;
    throw std::invalid_argument("unknown monitor mode '" + std::string(name) + "'");
}

bool mode_enables(MonitorMode m, RuleKind k) {
    switch (m) {
        case MonitorMode::All: return true;
        case MonitorMode::ConditionsOnly: return k == RuleKind::StateDependent;
        case MonitorMode::InvariantsOnly: return k == RuleKind::PhysicalInvariant;
    }
    return false;
}

double default_tau_mass(const PlantConfig& cfg, int window) {
    const double s = cfg.noise_sigma;
    const double dt = cfg.tick_seconds;
    const double two_pumps = 2.0 * cfg.pump_rate;
    // Largest pair of measured flows crossing one tank boundary.
    const double flow_sq = std::max({cfg.inlet_rate * cfg.inlet_rate + two_pumps * two_pumps,
                                     2.0 * two_pumps * two_pumps,
                                     two_pumps * two_pumps + cfg.drain_capacity * cfg.drain_capacity});
    const double level_var = 2.0 * (s * cfg.tank_capacity_L) * (s * cfg.tank_capacity_L);
    const double flow_var = window * dt * dt * s * s * flow_sq;
    // Milli-unit quantization on both levels and every summed flow reading.
    const double quantum = cfg.tank_capacity_L / 100.0 * 0.001 + 2.0 * window * 0.0005 * dt;
    return 3.0 * std::sqrt(level_var + flow_var) + quantum;
}

Monitor::Monitor(PlantConfig cfg, MonitorParams params, MonitorMode mode)
    : cfg_(std::move(cfg)), params_(params), mode_(mode),
      tau_mass_(params.tau_mass.value_or(default_tau_mass(cfg_, params.window))) {
    if (params_.grace < 0 || params_.cc_grace < 0 || params_.window < 1)
        throw ContractViolation("monitor grace must be >= 0 and window >= 1");
    const auto sd = RuleKind::StateDependent;
    const auto pi = RuleKind::PhysicalInvariant;
    const int g = params_.grace;
    for (int i = 1; i <= 9; ++i) rules_.push_back({"SD" + std::to_string(i), sd, g});
    for (int i = 1; i <= 4; ++i) rules_.push_back({"PI" + std::to_string(i), pi, g});
    if (params_.control_consistency)
        for (auto a : all_actuators()) rules_.push_back({"CC_" + std::string(actuator_name(a)), sd, params_.cc_grace});
    streak_.assign(rules_.size(), 0);
}

void Monitor::prime(const ActuatorConfig& in_force) { primed_ = in_force; }

std::optional<std::string> Monitor::violation(std::size_t rule, const MonitorEntry& e) const {
    const auto& r = e.readings;
    auto reading = [&](SensorId s) { return r[idx(s)]; };
    std::optional<ActuatorConfig> in_force = history_.empty() ? primed_ : history_.back().delivered;
    if (rule >= CC_FIRST) {
        if (!in_force) return std::nullopt;
        auto a = static_cast<ActuatorId>(rule - CC_FIRST);
        ActuatorConfig expected = plc_.scan(r, *in_force);
        if (e.delivered.get(a) == expected.get(a)) return std::nullopt;
        return fmt::format("{} delivered={} expected={}", actuator_name(a), e.delivered.get(a), expected.get(a));
    }

    const auto& d = e.delivered;
    switch (rule) {
        case SD8:
            if (d.get(ActuatorId::P102) && d.get(ActuatorId::P101)) return "P101=1 P102=1";
            return std::nullopt;
        case SD9:
            if (d.get(ActuatorId::P302) && d.get(ActuatorId::P301)) return "P301=1 P302=1";
            return std::nullopt;
        case PI4: {
            double resid = reading(SensorId::DPIT301) - cfg_.dp_gain * reading(SensorId::FIT301);
            if (std::abs(resid) <= params_.tau_dp) return std::nullopt;
            return fmt::format("DPIT301={:.3f} FIT301={:.3f} residual={:.3f}", reading(SensorId::DPIT301),
                               reading(SensorId::FIT301), resid);
        }
        case PI1:
        case PI2:
        case PI3: {
            const auto w = static_cast<std::size_t>(params_.window);
            if (history_.size() < w) return std::nullopt;
            const std::size_t tank = rule - PI1;
            const SensorId level = tank == 0 ? SensorId::LIT101 : tank == 1 ? SensorId::LIT301 : SensorId::LIT401;
            const auto& old = history_[history_.size() - w];
            double measured = (reading(level) - old.readings[idx(level)]) * cfg_.tank_capacity_L / 100.0;
            double flows = 0.0;
            // Interval ending at entry k ran under the commands delivered at entry k-1.
            for (std::size_t k = history_.size() - w + 1; k <= history_.size(); ++k) {
                const Readings& rk = k == history_.size() ? r : history_[k].readings;
                double f601 = cfg_.return_rate * history_[k - 1].delivered.get(ActuatorId::P601);
                switch (tank) {
                    case 0: flows += rk[idx(SensorId::FIT101)] + f601 - rk[idx(SensorId::FIT201)]; break;
                    case 1: flows += rk[idx(SensorId::FIT201)] - rk[idx(SensorId::FIT301)]; break;
                    default: flows += rk[idx(SensorId::FIT301)] - rk[idx(SensorId::FIT401)] - f601; break;
                }
            }
            double resid = measured - flows * cfg_.tick_seconds;
            if (std::abs(resid) <= tau_mass_) return std::nullopt;
            return fmt::format("{} dV={:.3f}L flows={:.3f}L residual={:.3f}L", sensor_name(level), measured,
                               flows * cfg_.tick_seconds, resid);
        }
        default: break;
    }

    if (!in_force) return std::nullopt;
    const auto& a = *in_force;
    auto on = [&](ActuatorId x) { return a.get(x) != 0; };
    switch (rule) {
        case SD1:
            if (on(ActuatorId::MV101) && reading(SensorId::FIT101) < 0.2)
                return fmt_obs("FIT101", reading(SensorId::FIT101), "MV101", 1);
            break;
        case SD2:
            if (!on(ActuatorId::MV101) && reading(SensorId::FIT101) > 0.1)
                return fmt_obs("FIT101", reading(SensorId::FIT101), "MV101", 0);
            break;
        case SD3:
        case SD4: {
            bool feeding = (on(ActuatorId::P101) || on(ActuatorId::P102)) && on(ActuatorId::MV201);
            double f = reading(SensorId::FIT201);
            if (rule == SD3 && feeding && f < 0.2) return fmt_obs("FIT201", f, "MV201", 1);
            if (rule == SD4 && !feeding && f > 0.1) return fmt_obs("FIT201", f, "MV201", a.get(ActuatorId::MV201));
            break;
        }
        case SD5:
        case SD6: {
            bool pumping = on(ActuatorId::P301) || on(ActuatorId::P302);
            double f = reading(SensorId::FIT301);
            if (rule == SD5 && pumping && f < 0.2) return fmt_obs("FIT301", f, "P301", a.get(ActuatorId::P301));
            if (rule == SD6 && !pumping && f > 0.1) return fmt_obs("FIT301", f, "P301", 0);
            break;
        }
        case SD7:
            if (on(ActuatorId::P401) && a.get(ActuatorId::MCV401) >= 10 && reading(SensorId::FIT401) < 0.1)
                return fmt_obs("FIT401", reading(SensorId::FIT401), "MCV401", a.get(ActuatorId::MCV401));
            break;
        default: break;
    }
    return std::nullopt;
}

std::vector<Alert> Monitor::observe(const MonitorEntry& entry) {
    std::vector<Alert> out;
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        if (!mode_enables(mode_, rules_[i].kind)) continue;
        auto v = violation(i, entry);
        if (!v) {
            streak_[i] = 0;
            continue;
        }
        if (++streak_[i] == rules_[i].grace + 1) out.push_back({entry.tick, rules_[i].id, *v});
    }
    history_.push_back(entry);
    while (history_.size() > static_cast<std::size_t>(params_.window)) history_.pop_front();
    return out;
}

std::vector<Alert> check_trace(const PlantConfig& cfg, const MonitorParams& params, MonitorMode mode,
                               const std::optional<ActuatorConfig>& in_force,
                               const std::vector<MonitorEntry>& entries) {
    Monitor m(cfg, params, mode);
    if (in_force) m.prime(*in_force);
    std::vector<Alert> all;
    for (const auto& e : entries) {
        auto a = m.observe(e);
        all.insert(all.end(), a.begin(), a.end());
    }
    return all;
}

}  // namespace cpsfuzz

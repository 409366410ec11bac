#include "cpsfuzz/harness.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <random>

namespace cpsfuzz {

namespace {

// Noise-free volume change per tank for one tick under `a`, starting from `levels`.
std::array<double, kTankCount> net_change(const PlantConfig& quiet, const Readings& levels, const ActuatorConfig& a) {
    PlantState s;
    for (std::size_t k = 0; k < kTankCount; ++k)
        s.volumes[k] = std::clamp(levels[k] / 100.0 * quiet.tank_capacity_L, 0.0, quiet.tank_capacity_L);
    PlantState n = step(s, a, quiet, 0);
    return {n.volumes[0] - s.volumes[0], n.volumes[1] - s.volumes[1], n.volumes[2] - s.volumes[2]};
}

}  // namespace

TimeSeriesLog collect_log(const PlantConfig& cfg, int ticks, std::uint64_t seed, const ExploreParams& explore,
                          TransportKind transport, std::uint16_t port) {
    if (ticks < 1) throw std::invalid_argument("simulate needs ticks >= 1");
    if (explore.min_length < 1 || explore.max_length < explore.min_length)
        throw std::invalid_argument("exploration lengths out of order");

    Session session(cfg, reset_to_normal(cfg, seed), seed, transport, port);
    session.tap().set_logging(false);

    if (explore.enabled) {
        PlantConfig quiet = cfg;
        quiet.noise_sigma = 0.0;
        struct Episode {
            int remaining = 0;
            ActuatorId which = ActuatorId::MV101;
            int value = 0;
        };
        auto rng = std::make_shared<std::mt19937_64>(seed ^ 0x6a09e667f3bcc909ULL);
        auto ep = std::make_shared<Episode>();
        session.set_interceptor([=](std::uint64_t, const Readings& reported, const ActuatorConfig& genuine) {
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            if (ep->remaining == 0 && unit(*rng) < explore.start_probability) {
                int len = std::uniform_int_distribution<int>(explore.min_length, explore.max_length)(*rng);
                auto which = static_cast<ActuatorId>(std::uniform_int_distribution<int>(0, kActuatorCount - 1)(*rng));
                int value = which == ActuatorId::MCV401 ? std::uniform_int_distribution<int>(0, kMcvMax)(*rng)
                                                        : 1 - genuine.get(which);
                ActuatorConfig perturbed = genuine;
                perturbed.set(which, value);
                auto base = net_change(quiet, reported, genuine);
                auto moved = net_change(quiet, reported, perturbed);
                bool keeps_band = true;
                for (std::size_t k = 0; k < kTankCount; ++k) {
                    double offset = reported[k] - 50.0;
                    double drift = moved[k] - base[k];
                    keeps_band = keeps_band && (drift * offset <= 0.0 || std::abs(offset) < explore.band);
                }
                if (keeps_band) *ep = {len, which, value};
            }
            MitmPolicy policy;
            if (ep->remaining > 0) {
                int v = ep->which == ActuatorId::MCV401 ? ep->value : 1 - genuine.get(ep->which);
                policy.override_with(ep->which, v);
                --ep->remaining;
            }
            return policy;
        });
    }

    TimeSeriesLog log;
    log.record(session.state());
    for (int t = 1; t < ticks; ++t) log.record(session.advance().next);
    return log;
}

// ---- experiments ----

void ExperimentPlan::validate() const {
    if (goals.empty()) throw std::invalid_argument("experiment plan has no goals");
    if (engines.empty()) throw std::invalid_argument("experiment plan has no engines");
    if (reps < 1) throw std::invalid_argument("experiment reps must be >= 1");
}

ExperimentResult run_experiment(const ExperimentPlan& plan, const PlantConfig& cfg, const PredictionModel* model) {
    plan.validate();
    ExperimentResult res;
    res.plan = plan;
    for (auto engine : plan.engines) {
        if (engine != Engine::RandomNoModel && !model)
            throw std::invalid_argument("engine " + std::string(engine_name(engine)) + " needs a model");
        std::vector<RepSummary> row;
        for (const auto& goal : plan.goals) {
            FuzzerSetup setup = plan.base;
            setup.engine = engine;
            setup.goal = goal;
            RepeatOptions opts;
            opts.transport = plan.transport;
            row.push_back(reset_and_repeat(setup, cfg, model, plan.reps, plan.seed, opts));
        }
        res.cells.push_back(std::move(row));
    }
    return res;
}

int ExperimentResult::goals_reached(std::size_t engine) const {
    const auto& row = cells.at(engine);
    return static_cast<int>(std::count_if(row.begin(), row.end(), [](const RepSummary& s) { return s.majority_reached(); }));
}

std::string ExperimentResult::csv() const {
    std::string out = "engine";
    for (const auto& g : plan.goals) out += "," + g.name();
    out += '\n';
    for (std::size_t e = 0; e < cells.size(); ++e) {
        out += std::string(engine_name(plan.engines[e]));
        for (const auto& c : cells[e]) out += "," + c.cell(plan.base.budget_ticks);
        out += '\n';
    }
    return out;
}

std::string ExperimentResult::table() const {
    // Cells can hold the multi-byte dash, so pad by code points.
    auto width = [](const std::string& s) {
        return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xc0) != 0x80; }));
    };
    auto pad = [&](const std::string& s, std::size_t w) { return std::string(w - std::min(w, width(s)), ' ') + s; };
    std::string out;
    std::size_t first = std::string("random-nomodel").size();
    out += fmt::format("{:<{}}", "goal", first + 2);
    for (const auto& engine : plan.engines) out += pad(std::string(engine_name(engine)), first + 2);
    out += '\n';
    for (std::size_t g = 0; g < plan.goals.size(); ++g) {
        out += fmt::format("{:<{}}", plan.goals[g].name(), first + 2);
        for (std::size_t e = 0; e < cells.size(); ++e) out += pad(cells[e][g].cell(plan.base.budget_ticks), first + 2);
        out += '\n';
    }
    out += fmt::format("{:<{}}", "reached", first + 2);
    for (std::size_t e = 0; e < cells.size(); ++e)
        out += pad(fmt::format("{}/{}", goals_reached(e), plan.goals.size()), first + 2);
    out += '\n';
    return out;
}

// ---- defence evasion ----

std::string EvasionEntry::status() const {
    if (detected && (!reached || *detected <= *reached)) return fmt::format("detected@{}", *detected);
    if (reached) return "evaded";
    return "unreached";
}

std::vector<EvasionEntry> run_evasion(const PlantConfig& cfg, const PredictionModel& model, const EvasionOptions& opts) {
    std::vector<EvasionEntry> out;
    for (const auto& goal : opts.goals) {
        FuzzerSetup setup = opts.base;
        setup.engine = Engine::ModelGa;
        setup.goal = goal;
        if (opts.stage_constraints) setup.allowed = stage_actuators_for(goal);
        for (auto mode : opts.modes) {
            Session session(cfg, reset_to_normal(cfg, opts.seed), opts.seed);
            session.tap().set_logging(false);
            MonitorSetup ms{cfg, opts.monitor, mode, true};
            AttackTrace t = run_attack(setup, session, &model, opts.seed, ms);
            out.push_back({goal.name(), mode, t.reached, t.detected});
        }
    }
    return out;
}

std::string evasion_csv(const std::vector<EvasionEntry>& entries) {
    std::vector<std::string> goals;
    std::vector<MonitorMode> modes;
    for (const auto& e : entries) {
        if (std::find(goals.begin(), goals.end(), e.goal) == goals.end()) goals.push_back(e.goal);
        if (std::find(modes.begin(), modes.end(), e.mode) == modes.end()) modes.push_back(e.mode);
    }
    std::string out = "goal";
    for (auto m : modes) out += "," + std::string(mode_name(m));
    out += '\n';
    for (const auto& g : goals) {
        out += g;
        for (auto m : modes) {
            auto it = std::find_if(entries.begin(), entries.end(),
                                   [&](const EvasionEntry& e) { return e.goal == g && e.mode == m; });
            out += "," + (it == entries.end() ? std::string("-") : it->status());
        }
        out += '\n';
    }
    return out;
}

std::vector<MonitorEntry> monitor_entries(const AttackTrace& trace) {
    std::vector<MonitorEntry> out;
    out.reserve(trace.records.size());
    for (const auto& r : trace.records) out.push_back({trace.start_tick + r.tick, r.reported, r.injected});
    return out;
}

}  // namespace cpsfuzz

#pragma once

#include "cpsfuzz/defence.hpp"
#include "cpsfuzz/fitness.hpp"
#include "cpsfuzz/model.hpp"
#include "cpsfuzz/netproto.hpp"
#include "cpsfuzz/search.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cpsfuzz {

enum class Engine : std::uint8_t { ModelGa, ModelRandom, RandomNoModel };
std::string_view engine_name(Engine e);
Engine parse_engine(std::string_view name);

struct FuzzerSetup {
    Engine engine = Engine::ModelGa;
    FitnessSpec goal;
    int budget_ticks = 1200;
    int round_ticks = 10;
    std::vector<ActuatorId> allowed = std::vector<ActuatorId>(all_actuators().begin(), all_actuators().end());
    GaParams ga;
    int random_budget = 10000;  // model-random evaluations per round

    void validate() const;
};

struct TraceRecord {
    std::uint64_t tick = 0;        // ticks since attack start
    ActuatorConfig injected;       // configuration delivered to the plant
    Readings reported{};           // readings the attacker saw at this tick
    std::vector<UnsafeEntry> unsafe;  // true unsafe set after the tick
    std::vector<Alert> alerts;
};

struct RoundStat {
    std::uint64_t tick = 0;
    bool searched = false;
    double progress = 0.0;         // fitness of reported readings at the boundary
    double best_fitness = 0.0;     // predicted fitness of the installed config
    int evaluations = 0;
    int selection_fallbacks = 0;
    ActuatorConfig config;
};

struct AttackTrace {
    std::string goal;
    std::string engine;
    std::uint64_t start_tick = 0;  // absolute plant tick of the attack start
    ActuatorConfig start_actuators;  // positions in force when the attack began
    std::vector<TraceRecord> records;
    std::vector<RoundStat> rounds;
    std::optional<std::uint64_t> reached;   // ticks from start to first goal tick
    std::optional<std::uint64_t> detected;  // tick of the first monitor alert
    bool evaded() const { return reached && (!detected || *detected > *reached); }

    std::string serialize() const;
};

struct MonitorSetup {
    PlantConfig plant;
    MonitorParams params;
    MonitorMode mode = MonitorMode::All;
    bool stop_on_alert = true;
};

// Runs one attack against a live session. The fuzzer only ever reads reported
// readings; true state is used for the unsafe bookkeeping.
AttackTrace run_attack(const FuzzerSetup& setup, Session& session, const PredictionModel* model,
                       std::uint64_t seed, const std::optional<MonitorSetup>& monitor = std::nullopt);

struct RepOutcome {
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> reached;
    std::optional<std::uint64_t> detected;
};

struct RepSummary {
    std::vector<RepOutcome> reps;
    int reached_count() const;
    bool majority_reached() const;
    std::optional<double> median() const;  // over reached reps, when a majority reached
    std::string cell(int budget_ticks) const;
};

struct RepeatOptions {
    TransportKind transport = TransportKind::InMemory;
    std::optional<MonitorSetup> monitor;
};

RepSummary reset_and_repeat(const FuzzerSetup& setup, const PlantConfig& cfg, const PredictionModel* model,
                            int reps, std::uint64_t base_seed, const RepeatOptions& opts = {});

// Actuators an attacker restricted to the goal's relevant stages may touch.
std::vector<ActuatorId> stage_actuators_for(const FitnessSpec& goal);

}  // namespace cpsfuzz

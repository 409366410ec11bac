#pragma once

#include "cpsfuzz/defence.hpp"
#include "cpsfuzz/fuzzer.hpp"
#include "cpsfuzz/historian.hpp"
#include "cpsfuzz/model.hpp"
#include "cpsfuzz/netproto.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cpsfuzz {

// Seeded single-actuator excitation layered on top of PLC control during data
// collection, so the log spans more than the static equilibrium.
struct ExploreParams {
    bool enabled = true;
    double start_probability = 1.0 / 30.0;
    int min_length = 1;
    int max_length = 10;
    double band = 5.0;  // % of capacity around half full where drift is tolerated
};

TimeSeriesLog collect_log(const PlantConfig& cfg, int ticks, std::uint64_t seed, const ExploreParams& explore = {},
                          TransportKind transport = TransportKind::InMemory, std::uint16_t port = 0);

struct ExperimentPlan {
    std::vector<FitnessSpec> goals = default_goals();
    std::vector<Engine> engines = {Engine::ModelGa, Engine::ModelRandom, Engine::RandomNoModel};
    int reps = 10;
    std::uint64_t seed = 1;
    FuzzerSetup base;  // engine and goal are overwritten per cell
    TransportKind transport = TransportKind::InMemory;

    void validate() const;
};

struct ExperimentResult {
    ExperimentPlan plan;
    std::vector<std::vector<RepSummary>> cells;  // [engine][goal]

    int goals_reached(std::size_t engine) const;  // cells with a majority of reached reps
    std::string csv() const;
    std::string table() const;
};

ExperimentResult run_experiment(const ExperimentPlan& plan, const PlantConfig& cfg, const PredictionModel* model);

struct EvasionEntry {
    std::string goal;
    MonitorMode mode = MonitorMode::All;
    std::optional<std::uint64_t> reached;
    std::optional<std::uint64_t> detected;

    // "evaded", "detected@<tick>" or "unreached".
    std::string status() const;
};

struct EvasionOptions {
    std::vector<FitnessSpec> goals = default_goals();
    std::vector<MonitorMode> modes = {MonitorMode::All, MonitorMode::ConditionsOnly, MonitorMode::InvariantsOnly};
    std::uint64_t seed = 1;
    FuzzerSetup base;
    MonitorParams monitor;
    bool stage_constraints = true;
};

// One monitored, stage-constrained model-ga attack per (goal, mode).
std::vector<EvasionEntry> run_evasion(const PlantConfig& cfg, const PredictionModel& model,
                                      const EvasionOptions& opts);
std::string evasion_csv(const std::vector<EvasionEntry>& entries);

// Monitor entries recoverable from an attack trace, for replaying rules offline.
std::vector<MonitorEntry> monitor_entries(const AttackTrace& trace);

}  // namespace cpsfuzz

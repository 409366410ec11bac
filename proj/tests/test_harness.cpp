#include "cpsfuzz/harness.hpp"

#include <gtest/gtest.h>

using namespace cpsfuzz;

namespace {

const PredictionModel& shared_model() {
    static const PredictionModel m = train_all(collect_log(PlantConfig{}, 20000, 1), Family::Ridge).model;
    return m;
}

}  // namespace

TEST(ExperimentTest, SingleCellPlan) {
    ExperimentPlan plan;
    plan.goals = {parse_goal("FIT201:low")};
    plan.engines = {Engine::ModelGa};
    plan.reps = 3;
    auto res = run_experiment(plan, PlantConfig{}, &shared_model());
    ASSERT_EQ(res.cells.size(), 1u);
    ASSERT_EQ(res.cells[0].size(), 1u);
    EXPECT_EQ(res.cells[0][0].reps.size(), 3u);
    EXPECT_EQ(res.goals_reached(0), 1);
    const auto cell = res.cells[0][0].cell(1200);
    EXPECT_EQ(res.csv(), "engine,FIT201:low\nmodel-ga," + cell + "\n");
    auto table = res.table();
    EXPECT_EQ(table.rfind("goal", 0), 0u);
    EXPECT_NE(table.find("FIT201:low"), std::string::npos);
    EXPECT_NE(table.find("1/1"), std::string::npos);
}

TEST(ExperimentTest, TableAlignsDashCells) {
    ExperimentPlan plan;
    plan.goals = {parse_goal("FIT101:high"), parse_goal("FIT301:low")};
    plan.engines = {Engine::RandomNoModel};
    plan.reps = 1;
    auto res = run_experiment(plan, PlantConfig{}, nullptr);
    auto table = res.table();
    std::vector<std::size_t> widths;
    std::size_t start = 0;
    while (start < table.size()) {
        auto end = table.find('\n', start);
        auto line = table.substr(start, end - start);
        widths.push_back(static_cast<std::size_t>(
            std::count_if(line.begin(), line.end(), [](char c) { return (c & 0xc0) != 0x80; })));
        start = end + 1;
    }
    ASSERT_EQ(widths.size(), 4u);
    for (auto w : widths) EXPECT_EQ(w, widths.front());
    EXPECT_NE(table.find("—"), std::string::npos);
}

TEST(ExperimentTest, RejectsBadPlans) {
    ExperimentPlan plan;
    plan.goals.clear();
    EXPECT_THROW(run_experiment(plan, PlantConfig{}, &shared_model()), std::exception);
    plan = {};
    plan.reps = 0;
    EXPECT_THROW(run_experiment(plan, PlantConfig{}, &shared_model()), std::exception);
    plan = {};
    plan.engines = {Engine::ModelRandom};
    EXPECT_THROW(run_experiment(plan, PlantConfig{}, nullptr), std::invalid_argument);
}

TEST(EvasionRunTest, ControlConsistencyCatchesEveryReachedGoalEarly) {
    EvasionOptions opts;
    opts.goals = {parse_goal("LIT301:high"), parse_goal("FIT201:low")};
    opts.modes = {MonitorMode::All};
    auto entries = run_evasion(PlantConfig{}, shared_model(), opts);
    ASSERT_EQ(entries.size(), 2u);
    for (const auto& e : entries) {
        ASSERT_TRUE(e.detected) << e.goal;
        EXPECT_EQ(e.status().rfind("detected@", 0), 0u);
    }
    auto csv = evasion_csv(entries);
    EXPECT_EQ(csv.rfind("goal,all\n", 0), 0u);
    EXPECT_NE(csv.find("LIT301:high,detected@"), std::string::npos);
}

TEST(EvasionRunTest, StatusPrecedence) {
    EXPECT_EQ((EvasionEntry{"g", MonitorMode::All, 10, 10}.status()), "detected@10");
    EXPECT_EQ((EvasionEntry{"g", MonitorMode::All, 10, 11}.status()), "evaded");
    EXPECT_EQ((EvasionEntry{"g", MonitorMode::All, std::nullopt, 11}.status()), "detected@11");
    EXPECT_EQ((EvasionEntry{"g", MonitorMode::All, std::nullopt, std::nullopt}.status()), "unreached");
}

TEST(MonitorEntriesTest, UseAbsoluteTicksAndInjectedCommands) {
    AttackTrace t;
    t.start_tick = 40;
    TraceRecord r;
    r.tick = 2;
    r.injected = equilibrium_config();
    r.reported[0] = 55.5;
    t.records.push_back(r);
    auto e = monitor_entries(t);
    ASSERT_EQ(e.size(), 1u);
    EXPECT_EQ(e[0].tick, 42u);
    EXPECT_EQ(e[0].delivered, equilibrium_config());
    EXPECT_EQ(e[0].readings[0], 55.5);
}

#include "cpsfuzz/harness.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace cpsfuzz;

namespace {

// Monitor entries for a closed-loop run with an optional fixed tap policy.
std::vector<MonitorEntry> run_entries(int ticks, std::uint64_t seed, const MitmPolicy& policy = {},
                                      ActuatorConfig* start = nullptr) {
    PlantConfig cfg;
    Session s(cfg, reset_to_normal(cfg, seed), seed);
    s.tap().set_logging(false);
    s.set_policy(policy);
    if (start) *start = s.state().actuators;
    std::vector<MonitorEntry> out;
    for (int t = 0; t < ticks; ++t) {
        auto r = s.advance();
        out.push_back({r.tick, r.reported, r.delivered});
    }
    return out;
}

std::set<std::string> rule_ids(const std::vector<Alert>& alerts) {
    std::set<std::string> ids;
    for (const auto& a : alerts) ids.insert(a.rule);
    return ids;
}

}  // namespace

TEST(MonitorTest, RuleCatalogue) {
    Monitor m(PlantConfig{});
    ASSERT_EQ(m.rules().size(), 9u + 4u + kActuatorCount);
    EXPECT_EQ(m.rules().front().id, "SD1");
    EXPECT_EQ(m.rules()[9].id, "PI1");
    EXPECT_EQ(m.rules()[9].kind, RuleKind::PhysicalInvariant);
    EXPECT_EQ(m.rules()[13].id, "CC_MV101");
    EXPECT_EQ(m.rules()[13].grace, 0);
    EXPECT_EQ(m.rules()[0].grace, 5);
    MonitorParams p;
    p.control_consistency = false;
    EXPECT_EQ(Monitor(PlantConfig{}, p).rules().size(), 13u);
}

TEST(MonitorTest, DerivedMassTolerance) {
    PlantConfig cfg;
    // 3 * sqrt(2 * 5^2 + 20 * 0.005^2 * 8) + 0.01 + 0.02
    EXPECT_NEAR(default_tau_mass(cfg, 20), 3.0 * std::sqrt(50.0 + 20 * 0.000025 * 8.0) + 0.03, 1e-12);
    EXPECT_NEAR(Monitor(cfg).tau_mass(), 21.24, 0.01);
}

TEST(MonitorTest, NormalRunRaisesNothing) {
    ActuatorConfig start;
    auto entries = run_entries(1000, 3, {}, &start);
    EXPECT_TRUE(check_trace(PlantConfig{}, {}, MonitorMode::All, start, entries).empty());
}

TEST(MonitorTest, ForcedOpenInletWithFlowIsConsistentForSd1) {
    MitmPolicy p;
    p.override_with(ActuatorId::MV101, 1);
    ActuatorConfig start;
    auto entries = run_entries(300, 2, p, &start);
    auto ids = rule_ids(check_trace(PlantConfig{}, {}, MonitorMode::All, start, entries));
    EXPECT_EQ(ids.count("SD1"), 0u);
    EXPECT_EQ(ids.count("SD2"), 0u);
}

TEST(MonitorTest, StandbyPumpPairAlertsWithinGrace) {
    MitmPolicy p;
    p.override_with(ActuatorId::P302, 1);
    ActuatorConfig start;
    auto entries = run_entries(20, 2, p, &start);
    auto alerts = check_trace(PlantConfig{}, {}, MonitorMode::ConditionsOnly, start, entries);
    auto it = std::find_if(alerts.begin(), alerts.end(), [](const Alert& a) { return a.rule == "SD9"; });
    ASSERT_NE(it, alerts.end());
    EXPECT_EQ(it->tick, entries[5].tick);
    EXPECT_EQ(it->observed, "P301=1 P302=1");
}

TEST(MonitorTest, ControlConsistencyCatchesOverrideImmediately) {
    MitmPolicy p;
    p.override_with(ActuatorId::MCV401, 90);
    ActuatorConfig start;
    auto entries = run_entries(5, 2, p, &start);
    auto alerts = check_trace(PlantConfig{}, {}, MonitorMode::All, start, entries);
    ASSERT_FALSE(alerts.empty());
    EXPECT_EQ(alerts.front().rule, "CC_MCV401");
    EXPECT_EQ(alerts.front().tick, entries.front().tick);
    EXPECT_EQ(alerts.front().observed, "MCV401 delivered=90 expected=50");
}

TEST(MonitorTest, OneAlertPerViolationEpisode) {
    PlantConfig cfg;
    MonitorParams params;
    params.control_consistency = false;
    Monitor m(cfg, params, MonitorMode::ConditionsOnly);
    ActuatorConfig both = equilibrium_config();
    both.set(ActuatorId::P302, 1);
    Readings r{50, 50, 50, 1, 1, 2, 1, 20};
    int alerts = 0;
    std::uint64_t t = 0;
    for (int i = 0; i < 30; ++i) alerts += static_cast<int>(m.observe({t++, r, both}).size());
    EXPECT_EQ(alerts, 1);
    m.observe({t++, r, equilibrium_config()});
    for (int i = 0; i < 30; ++i) alerts += static_cast<int>(m.observe({t++, r, both}).size());
    EXPECT_EQ(alerts, 2);
}

TEST(MonitorTest, PressureInvariantFlagsSpoofedRelation) {
    PlantConfig cfg;
    MonitorParams params;
    params.grace = 0;
    params.control_consistency = false;
    Monitor m(cfg, params, MonitorMode::InvariantsOnly);
    Readings r{50, 50, 50, 1, 1, 1, 1, 12};
    auto a = m.observe({0, r, equilibrium_config()});
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].rule, "PI4");
}

TEST(MonitorTest, ModesPartitionRules) {
    for (auto kind : {RuleKind::StateDependent, RuleKind::PhysicalInvariant}) {
        EXPECT_TRUE(mode_enables(MonitorMode::All, kind));
        EXPECT_NE(mode_enables(MonitorMode::ConditionsOnly, kind), mode_enables(MonitorMode::InvariantsOnly, kind));
    }
    EXPECT_EQ(parse_mode("conditions-only"), MonitorMode::ConditionsOnly);
    EXPECT_EQ(parse_mode("invariants"), MonitorMode::InvariantsOnly);
    EXPECT_THROW(parse_mode("none"), std::invalid_argument);
}

TEST(MonitorPropertyTest, AllEqualsUnionOfModesAndReplayIsPure) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        MitmPolicy p;
        for (int k = 0; k < 2; ++k) {
            auto a = static_cast<ActuatorId>(rng() % kActuatorCount);
            p.override_with(a, a == ActuatorId::MCV401 ? static_cast<int>(rng() % 101) : static_cast<int>(rng() % 2));
        }
        ActuatorConfig start;
        auto entries = run_entries(200, 100 + trial, p, &start);
        PlantConfig cfg;
        auto all = check_trace(cfg, {}, MonitorMode::All, start, entries);
        auto cond = check_trace(cfg, {}, MonitorMode::ConditionsOnly, start, entries);
        auto inv = check_trace(cfg, {}, MonitorMode::InvariantsOnly, start, entries);
        std::vector<Alert> merged = cond;
        merged.insert(merged.end(), inv.begin(), inv.end());
        auto key = [](const Alert& a) { return std::make_tuple(a.tick, a.rule, a.observed); };
        std::sort(merged.begin(), merged.end(), [&](const Alert& x, const Alert& y) { return key(x) < key(y); });
        auto sorted_all = all;
        std::sort(sorted_all.begin(), sorted_all.end(), [&](const Alert& x, const Alert& y) { return key(x) < key(y); });
        EXPECT_EQ(sorted_all, merged);
        EXPECT_EQ(check_trace(cfg, {}, MonitorMode::All, start, entries), all);
    }
}

TEST(MonitoredAttackTest, StopsAtFirstAlert) {
    static const PredictionModel model = train_all(collect_log(PlantConfig{}, 20000, 1), Family::Ridge).model;
    PlantConfig cfg;
    Session s(cfg, reset_to_normal(cfg, 1), 1);
    FuzzerSetup setup;
    setup.goal = parse_goal("LIT101:high");
    MonitorSetup ms{cfg, {}, MonitorMode::All, true};
    auto t = run_attack(setup, s, &model, 1, ms);
    ASSERT_TRUE(t.detected);
    EXPECT_FALSE(t.evaded());
    EXPECT_EQ(t.records.size(), *t.detected + 1);
    EXPECT_FALSE(t.records.back().alerts.empty());
    EXPECT_NE(t.serialize().find("\nALERT\t"), std::string::npos);

    // Offline replay of the recorded entries reproduces the online alerts.
    auto replay = check_trace(cfg, {}, MonitorMode::All, t.start_actuators, monitor_entries(t));
    ASSERT_FALSE(replay.empty());
    EXPECT_EQ(replay.front().rule, t.records.back().alerts.front().rule);
    EXPECT_EQ(replay.front().tick, t.start_tick + *t.detected);
}

TEST(EvasionTest, MatrixHasOneColumnPerMode) {
    std::vector<EvasionEntry> e = {{"FIT201:low", MonitorMode::All, 2, 0},
                                   {"FIT201:low", MonitorMode::InvariantsOnly, 2, std::nullopt},
                                   {"FIT101:high", MonitorMode::All, std::nullopt, std::nullopt},
                                   {"FIT101:high", MonitorMode::InvariantsOnly, std::nullopt, 40}};
    EXPECT_EQ(evasion_csv(e),
              "goal,all,invariants-only\n"
              "FIT201:low,detected@0,evaded\n"
              "FIT101:high,unreached,detected@40\n");
}

#include "cpsfuzz/plant.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace cpsfuzz;

namespace {

PlantConfig quiet() {
    PlantConfig cfg;
    cfg.noise_sigma = 0.0;
    return cfg;
}

PlantState at_volumes(double v1, double v3, double v4) {
    PlantState s;
    s.volumes = {v1, v3, v4};
    return s;
}

ActuatorConfig only(std::initializer_list<std::pair<ActuatorId, int>> on) {
    ActuatorConfig a;
    for (auto [id, v] : on) a.set(id, v);
    return a;
}

double total(const PlantState& s) { return s.volumes[0] + s.volumes[1] + s.volumes[2]; }

}  // namespace

TEST(ActuatorConfigTest, LayoutPutsMv101OnTheHighBit) {
    EXPECT_EQ(ActuatorConfig::actuator_mask(ActuatorId::MV101), 0x4000);
    EXPECT_EQ(ActuatorConfig::actuator_mask(ActuatorId::P601), 0x0080);
    EXPECT_EQ(ActuatorConfig::actuator_mask(ActuatorId::MCV401), 0x007f);
    // 0x4000 + 0x2000 + 0x1000 + 0x0400 + 0x0100 + 50
    EXPECT_EQ(equilibrium_config().bits(), 30002);
}

TEST(ActuatorConfigTest, RoundTripsEveryValidPattern) {
    int valid = 0;
    for (std::uint32_t b = 0; b < (1u << kConfigBits); ++b) {
        auto bits = static_cast<std::uint16_t>(b);
        if (!ActuatorConfig::bits_valid(bits)) {
            EXPECT_THROW(ActuatorConfig::from_bits(bits), ContractViolation);
            continue;
        }
        ++valid;
        auto c = ActuatorConfig::from_bits(bits);
        ASSERT_EQ(ActuatorConfig::from_positions(c.positions()).bits(), bits);
    }
    EXPECT_EQ(valid, 256 * 101);
}

TEST(ActuatorConfigTest, RejectsOutOfRangePositions) {
    ActuatorConfig a;
    EXPECT_THROW(a.set(ActuatorId::MCV401, 101), ContractViolation);
    EXPECT_THROW(a.set(ActuatorId::P101, 2), ContractViolation);
    EXPECT_THROW(a.set(ActuatorId::MCV401, -1), ContractViolation);
    EXPECT_NO_THROW(a.set(ActuatorId::MCV401, 100));
}

TEST(ActuatorConfigTest, NamesParseBack) {
    for (auto s : all_sensors()) EXPECT_EQ(parse_sensor(sensor_name(s)), s);
    for (auto a : all_actuators()) EXPECT_EQ(parse_actuator(actuator_name(a)), a);
    EXPECT_THROW(parse_sensor("AIT201"), std::invalid_argument);
}

TEST(PlantStepTest, AllOffLeavesVolumesAndFlowsAtZero) {
    auto next = step(at_volumes(500, 500, 500), ActuatorConfig{}, quiet(), 1);
    EXPECT_EQ(next.volumes, (std::array<double, 3>{500, 500, 500}));
    for (auto s : {SensorId::FIT101, SensorId::FIT201, SensorId::FIT301, SensorId::FIT401, SensorId::DPIT301})
        EXPECT_EQ(next.truth[idx(s)], 0.0);
    EXPECT_EQ(next.tick, 1u);
}

TEST(PlantStepTest, SingleInflowAddsOneLitre) {
    auto next = step(at_volumes(500, 500, 500), only({{ActuatorId::MV101, 1}}), quiet(), 1);
    EXPECT_DOUBLE_EQ(next.volumes[0], 501.0);
    EXPECT_DOUBLE_EQ(next.reported[idx(SensorId::FIT101)], 1.0);
    EXPECT_DOUBLE_EQ(next.reported[idx(SensorId::LIT101)], 50.1);
}

TEST(PlantStepTest, EquilibriumIsSteady) {
    auto next = step(at_volumes(500, 500, 500), equilibrium_config(), quiet(), 1);
    EXPECT_EQ(next.volumes, (std::array<double, 3>{500, 500, 500}));
    for (auto s : {SensorId::FIT101, SensorId::FIT201, SensorId::FIT301, SensorId::FIT401})
        EXPECT_DOUBLE_EQ(next.truth[idx(s)], 1.0);
    EXPECT_DOUBLE_EQ(next.truth[idx(SensorId::DPIT301)], 10.0);
}

TEST(PlantStepTest, OutflowIsClampedToAvailableVolume) {
    auto next = step(at_volumes(0.4, 500, 500), only({{ActuatorId::MV201, 1}, {ActuatorId::P101, 1}}), quiet(), 1);
    EXPECT_DOUBLE_EQ(next.volumes[0], 0.0);
    EXPECT_DOUBLE_EQ(next.volumes[1], 500.4);
    EXPECT_DOUBLE_EQ(next.truth[idx(SensorId::FIT201)], 0.4);
}

TEST(PlantStepTest, SharedT401OutflowsScaleTogether) {
    auto cmd = only({{ActuatorId::P401, 1}, {ActuatorId::MCV401, 100}, {ActuatorId::P601, 1}});
    auto next = step(at_volumes(500, 500, 1.5), cmd, quiet(), 1);
    // Demand 2 + 1 L against 1.5 L available: both halved.
    EXPECT_DOUBLE_EQ(next.truth[idx(SensorId::FIT401)], 1.0);
    EXPECT_DOUBLE_EQ(next.f601, 0.5);
    EXPECT_DOUBLE_EQ(next.volumes[2], 0.0);
    EXPECT_DOUBLE_EQ(next.volumes[0], 500.5);
}

TEST(PlantStepTest, OverflowIsSpilled) {
    auto next = step(at_volumes(999.5, 500, 500), only({{ActuatorId::MV101, 1}}), quiet(), 1);
    EXPECT_DOUBLE_EQ(next.volumes[0], 1000.0);
    EXPECT_DOUBLE_EQ(next.spill, 0.5);
}

TEST(PlantStepTest, RejectsInvalidVolumes) {
    EXPECT_THROW(step(at_volumes(-1, 0, 0), ActuatorConfig{}, quiet(), 1), ContractViolation);
    EXPECT_THROW(step(at_volumes(0, 1001, 0), ActuatorConfig{}, quiet(), 1), ContractViolation);
}

TEST(PlantStepTest, NoiseFreeReadingsMatchClosedForm) {
    std::mt19937_64 rng(5);
    PlantConfig cfg = quiet();
    PlantState s = at_volumes(300, 600, 700);
    for (int t = 0; t < 500; ++t) {
        auto a = ActuatorConfig::from_bits(static_cast<std::uint16_t>(rng() % 256) << 7 |
                                           static_cast<std::uint16_t>(rng() % 101));
        auto n = step(s, a, cfg, 3);
        for (std::size_t k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(n.truth[k], n.volumes[k] / 10.0);
        EXPECT_DOUBLE_EQ(n.truth[idx(SensorId::DPIT301)], 10.0 * n.truth[idx(SensorId::FIT301)]);
        for (std::size_t j = 0; j < kSensorCount; ++j) EXPECT_DOUBLE_EQ(n.reported[j], quantize_milli(n.truth[j]));
        s = n;
    }
}

TEST(PlantPropertyTest, MassBalanceHoldsUnderRandomCommands) {
    std::mt19937_64 rng(11);
    PlantConfig cfg;
    PlantState s = equilibrium_state(cfg, 1);
    for (int t = 0; t < 20000; ++t) {
        auto a = ActuatorConfig::from_bits(static_cast<std::uint16_t>(rng() % 256) << 7 |
                                           static_cast<std::uint16_t>(rng() % 101));
        auto n = step(s, a, cfg, 9);
        double expected = (n.truth[idx(SensorId::FIT101)] - n.truth[idx(SensorId::FIT401)]) - n.spill;
        double actual = total(n) - total(s);
        ASSERT_NEAR(actual, expected, 1e-9 * std::max(1.0, total(s))) << "tick " << t;
        for (double v : n.volumes) ASSERT_TRUE(v >= 0.0 && v <= cfg.tank_capacity_L);
        s = n;
    }
}

TEST(PlantPropertyTest, SameInputsGiveBitIdenticalStates) {
    PlantConfig cfg;
    auto run = [&] {
        std::mt19937_64 rng(3);
        PlantState s = equilibrium_state(cfg, 4);
        std::vector<PlantState> out;
        for (int t = 0; t < 1000; ++t) {
            s = step(s, ActuatorConfig::from_bits(static_cast<std::uint16_t>((rng() % 256) << 7 | rng() % 101)), cfg, 4);
            out.push_back(s);
        }
        return out;
    };
    auto a = run(), b = run();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a[i].volumes, b[i].volumes);
        ASSERT_EQ(a[i].reported, b[i].reported);
    }
}

TEST(PlantPropertyTest, InflowAloneFillsMonotonically) {
    PlantConfig cfg;
    PlantState s = at_volumes(500, 500, 500);
    auto a = only({{ActuatorId::MV101, 1}});
    int ticks = 0;
    while (s.volumes[0] < cfg.tank_capacity_L) {
        auto n = step(s, a, cfg, 1);
        ASSERT_GT(n.volumes[0], s.volumes[0]);
        s = n;
        ++ticks;
    }
    EXPECT_EQ(ticks, 500);
}

TEST(PlantNoiseTest, DrawsAreStandardNormal) {
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double z = noise_normal(42, static_cast<std::uint64_t>(i / 8), static_cast<std::size_t>(i % 8));
        sum += z;
        sq += z * z;
    }
    double mean = sum / n;
    EXPECT_NEAR(mean, 0.0, 0.01);
    EXPECT_NEAR(sq / n - mean * mean, 1.0, 0.02);
    EXPECT_EQ(noise_normal(1, 2, 3), noise_normal(1, 2, 3));
    EXPECT_NE(noise_normal(1, 2, 3), noise_normal(1, 2, 4));
}

TEST(PlantUnsafeTest, ClassifiesThresholds) {
    PlantConfig cfg;
    PlantState s;
    for (auto id : all_sensors()) {
        const auto& r = cfg.safe_ranges[idx(id)];
        s.truth[idx(id)] = 0.5 * (r.low + r.high);
    }
    EXPECT_TRUE(is_unsafe(s, cfg.safe_ranges).empty());

    s.truth[idx(SensorId::LIT101)] = 85.0;
    EXPECT_EQ(is_unsafe(s, cfg.safe_ranges), (std::vector<UnsafeEntry>{{SensorId::LIT101, Direction::High}}));

    s.truth[idx(SensorId::LIT101)] = 50.0;
    auto both = step(at_volumes(500, 500, 500), only({{ActuatorId::MV201, 1}, {ActuatorId::P101, 1}, {ActuatorId::P102, 1}}),
                     quiet(), 1);
    EXPECT_DOUBLE_EQ(both.truth[idx(SensorId::FIT201)], 2.0);
    auto u = is_unsafe(both, cfg.safe_ranges);
    EXPECT_NE(std::find(u.begin(), u.end(), UnsafeEntry{SensorId::FIT201, Direction::High}), u.end());

    // Exactly on a threshold is still safe.
    s.truth[idx(SensorId::LIT101)] = 80.0;
    EXPECT_TRUE(is_unsafe(s, cfg.safe_ranges).empty());
}

TEST(PlantResetTest, SettlesNearHalfFull) {
    PlantConfig cfg;
    auto s = reset_to_normal(cfg, 7);
    EXPECT_GE(s.tick, 60u);
    for (double v : s.volumes) EXPECT_NEAR(v, 500.0, 20.0);
    for (auto f : {SensorId::FIT101, SensorId::FIT201, SensorId::FIT301, SensorId::FIT401})
        EXPECT_NEAR(s.truth[idx(f)], 1.0, 1e-12);
    EXPECT_TRUE(is_unsafe(s, cfg.safe_ranges).empty());
    EXPECT_EQ(s.actuators, equilibrium_config());
}

TEST(PlantResetTest, SeedsOnlyChangeNoise) {
    PlantConfig cfg;
    auto a = reset_to_normal(cfg, 1), b = reset_to_normal(cfg, 2);
    EXPECT_EQ(a.volumes, b.volumes);
    EXPECT_EQ(a.tick, b.tick);
    EXPECT_NE(a.reported, b.reported);
}

TEST(PlantResetTest, FailsWithoutWaterSource) {
    PlantConfig cfg;
    cfg.inlet_rate = 0.0;
    EXPECT_THROW(reset_to_normal(cfg, 1), std::runtime_error);
}

// Every (sensor, direction) target except FIT101:high is reachable by holding
// one constant configuration from the reset state.
TEST(PlantReachabilityTest, FifteenOfSixteenTargetsReachable) {
    PlantConfig cfg;
    cfg.noise_sigma = 0.0;
    const PlantState start = reset_to_normal(cfg, 1);
    std::set<std::pair<int, int>> reached;
    for (std::uint32_t b = 0; b < (1u << kConfigBits); ++b) {
        auto bits = static_cast<std::uint16_t>(b);
        if (!ActuatorConfig::bits_valid(bits)) continue;
        // MCV401 only matters through the drain rate; a coarse grid covers every regime.
        int mcv = bits & 0x7f;
        if (mcv % 25 != 0) continue;
        auto a = ActuatorConfig::from_bits(bits);
        PlantState s = start;
        for (int t = 0; t < 1200; ++t) {
            s = step(s, a, cfg, 1);
            for (auto u : is_unsafe(s, cfg.safe_ranges)) reached.insert({int(idx(u.sensor)), int(u.direction)});
        }
    }
    EXPECT_EQ(reached.size(), 15u);
    EXPECT_EQ(reached.count({int(idx(SensorId::FIT101)), int(Direction::High)}), 0u);
}

TEST(PlantConfigTest, ParsesKeyValueText) {
    auto cfg = parse_plant_config("# comment\ninlet_rate = 1.5\nsafe.LIT101 = 10, 90  # wide\n");
    EXPECT_DOUBLE_EQ(cfg.inlet_rate, 1.5);
    EXPECT_DOUBLE_EQ(cfg.safe_ranges[idx(SensorId::LIT101)].low, 10.0);
    EXPECT_DOUBLE_EQ(cfg.safe_ranges[idx(SensorId::LIT101)].high, 90.0);
    EXPECT_THROW(parse_plant_config("bogus = 1\n"), std::runtime_error);
    EXPECT_THROW(parse_plant_config("inlet_rate\n"), std::runtime_error);
    EXPECT_THROW(parse_plant_config("safe.LIT101 = 90, 10\n"), std::invalid_argument);
    EXPECT_THROW(parse_plant_config("tick_seconds = 0\n"), std::invalid_argument);
}

TEST(PlantConfigTest, DefaultRangesMatchDocumentation) {
    auto r = PlantConfig::default_safe_ranges();
    EXPECT_EQ(r[idx(SensorId::LIT401)].low, 20.0);
    EXPECT_EQ(r[idx(SensorId::FIT101)].high, 1.5);
    EXPECT_EQ(r[idx(SensorId::FIT301)].high, 1.8);
    EXPECT_EQ(r[idx(SensorId::DPIT301)].low, 1.0);
    EXPECT_EQ(r[idx(SensorId::DPIT301)].high, 15.0);
}

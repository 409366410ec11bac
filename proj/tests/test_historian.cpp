#include "cpsfuzz/harness.hpp"
#include "cpsfuzz/historian.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace cpsfuzz;

namespace {

TimeSeriesLog ramp_log(std::size_t n) {
    TimeSeriesLog log;
    for (std::size_t t = 0; t < n; ++t) {
        LogRow row;
        row.tick = t;
        for (std::size_t j = 0; j < kSensorCount; ++j) row.readings[j] = static_cast<double>(t * 10 + j) / 1000.0;
        row.actuators = ActuatorConfig::from_bits(static_cast<std::uint16_t>((t % 256) << 7 | t % 101));
        log.append(row);
    }
    return log;
}

}  // namespace

TEST(HistorianTest, RecordsFirstRowFromEmpty) {
    TimeSeriesLog log;
    PlantState s;
    s.tick = 0;
    log.record(s);
    EXPECT_EQ(log.size(), 1u);
}

TEST(HistorianTest, RejectsTickGap) {
    TimeSeriesLog log;
    log.append({3, {}, {}});
    EXPECT_THROW(log.append({5, {}, {}}), ContractViolation);
    EXPECT_THROW(log.append({3, {}, {}}), ContractViolation);
    EXPECT_NO_THROW(log.append({4, {}, {}}));
}

TEST(HistorianTest, CsvHeaderIsFixed) {
    EXPECT_STREQ(kCsvHeader,
                 "tick,LIT101,LIT301,LIT401,FIT101,FIT201,FIT301,FIT401,DPIT301,"
                 "MV101,MV201,P101,P102,P301,P302,P401,P601,MCV401");
    std::ostringstream out;
    ramp_log(2).write_csv(out);
    EXPECT_EQ(out.str(), std::string(kCsvHeader) +
                             "\n0,0.000,0.001,0.002,0.003,0.004,0.005,0.006,0.007,0,0,0,0,0,0,0,0,0"
                             "\n1,0.010,0.011,0.012,0.013,0.014,0.015,0.016,0.017,0,0,0,0,0,0,0,1,1\n");
}

TEST(HistorianTest, SimulatedRunRoundTripsThroughCsv) {
    auto log = collect_log(PlantConfig{}, 20000, 4);
    ASSERT_EQ(log.size(), 20000u);
    std::stringstream io;
    log.write_csv(io);
    auto back = TimeSeriesLog::read_csv(io);
    EXPECT_EQ(back, log);
}

TEST(HistorianTest, ReadRejectsMalformedInput) {
    std::istringstream bad_header("tick,LIT101\n");
    EXPECT_THROW(TimeSeriesLog::read_csv(bad_header), std::runtime_error);
    std::istringstream short_row(std::string(kCsvHeader) + "\n0,1,2\n");
    EXPECT_THROW(TimeSeriesLog::read_csv(short_row), std::runtime_error);
    std::istringstream bad_mcv(std::string(kCsvHeader) + "\n0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,101\n");
    EXPECT_THROW(TimeSeriesLog::read_csv(bad_mcv), std::runtime_error);
    std::istringstream gap(std::string(kCsvHeader) + "\n0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0\n"
                                                      "2,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0\n");
    EXPECT_ANY_THROW(TimeSeriesLog::read_csv(gap));
}

TEST(ExtractVectorsTest, BoundaryCount) {
    auto log = ramp_log(101);
    EXPECT_EQ(extract_vectors(log, SensorId::LIT101, 100).size(), 1u);
    EXPECT_EQ(extract_vectors(log, SensorId::FIT101, 1).size(), 100u);
    EXPECT_THROW(extract_vectors(log, SensorId::LIT101, 101), std::invalid_argument);
    EXPECT_THROW(extract_vectors(log, SensorId::LIT101, 0), ContractViolation);
}

TEST(ExtractVectorsTest, PairsInputTickWithTargetTick) {
    auto log = ramp_log(300);
    for (int interval : {1, 7, 100}) {
        auto v = extract_vectors(log, SensorId::FIT301, interval);
        ASSERT_EQ(v.size(), 300u - static_cast<std::size_t>(interval));
        for (std::size_t i = 0; i < v.size(); ++i) {
            EXPECT_EQ(v[i].tick, i);
            EXPECT_EQ(v[i].sensors, log[i].readings);
            // Actuators adopted right after observing t are the ones logged at t + 1.
            EXPECT_EQ(v[i].actuators, log[i + 1].actuators);
            EXPECT_EQ(v[i].target, log[i + interval].readings[idx(SensorId::FIT301)]);
        }
    }
}

TEST(ExtractVectorsTest, ConstantLogGivesConstantTargets) {
    TimeSeriesLog log;
    for (std::uint64_t t = 0; t < 50; ++t) log.append({t, {50, 50, 50, 1, 1, 1, 1, 10}, equilibrium_config()});
    for (const auto& v : extract_vectors(log, SensorId::DPIT301, 3)) EXPECT_EQ(v.target, 10.0);
}

TEST(ExtractVectorsTest, StrideThinsVectors) {
    auto v = extract_vectors(ramp_log(101), SensorId::FIT101, 1, 10);
    ASSERT_EQ(v.size(), 10u);
    EXPECT_EQ(v[3].tick, 30u);
}

TEST(SplitTest, EightyTwentyChronological) {
    auto v = extract_vectors(ramp_log(101), SensorId::FIT101, 1);
    auto [train, test] = split(v, 0.8);
    EXPECT_EQ(train.size(), 80u);
    EXPECT_EQ(test.size(), 20u);
    EXPECT_LT(train.back().tick, test.front().tick);
}

TEST(SplitTest, RejectsDegenerateSplits) {
    auto v = extract_vectors(ramp_log(11), SensorId::FIT101, 1);
    EXPECT_THROW(split(v, 0.999), std::invalid_argument);
    EXPECT_THROW(split(v, 0.0), ContractViolation);
    EXPECT_THROW(split(v, 1.0), ContractViolation);
}

TEST(CollectLogTest, SameSeedSameLog) {
    auto a = collect_log(PlantConfig{}, 3000, 9);
    auto b = collect_log(PlantConfig{}, 3000, 9);
    auto c = collect_log(PlantConfig{}, 3000, 10);
    EXPECT_EQ(a, b);
    EXPECT_FALSE(a == c);
    EXPECT_THROW(collect_log(PlantConfig{}, 0, 1), std::invalid_argument);
}

TEST(CollectLogTest, ExplorationVariesActuatorsButStaysSafe) {
    PlantConfig cfg;
    auto log = collect_log(cfg, 20000, 2);
    std::array<bool, kActuatorCount> varied{};
    for (std::size_t i = 1; i < log.size(); ++i)
        for (auto a : all_actuators())
            varied[idx(a)] = varied[idx(a)] || log[i].actuators.get(a) != log[i - 1].actuators.get(a);
    for (auto a : all_actuators()) EXPECT_TRUE(varied[idx(a)]) << actuator_name(a);
    for (const auto& row : log.rows())
        for (std::size_t k = 0; k < 3; ++k) {
            EXPECT_GT(row.readings[k], 15.0);
            EXPECT_LT(row.readings[k], 85.0);
        }

    ExploreParams off;
    off.enabled = false;
    auto plain = collect_log(cfg, 2000, 2, off);
    for (const auto& row : plain.rows()) {
        EXPECT_EQ(row.actuators.get(ActuatorId::P102), 0);
        EXPECT_EQ(row.actuators.get(ActuatorId::P601), 0);
    }
}

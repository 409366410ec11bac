#pragma once

#include "cpsfuzz/plant.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace cpsfuzz {

struct LogRow {
    std::uint64_t tick = 0;
    Readings readings{};        // reported values
    ActuatorConfig actuators;   // positions in force over the interval ending at tick
    friend bool operator==(const LogRow&, const LogRow&) = default;
};

class TimeSeriesLog {
public:
    void record(const PlantState& state);
    void append(const LogRow& row);

    const std::vector<LogRow>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    const LogRow& operator[](std::size_t i) const { return rows_[i]; }

    void write_csv(std::ostream& out) const;
    void write_csv(const std::string& path) const;
    static TimeSeriesLog read_csv(std::istream& in);
    static TimeSeriesLog read_csv(const std::string& path);

    friend bool operator==(const TimeSeriesLog&, const TimeSeriesLog&) = default;

private:
    std::vector<LogRow> rows_;
};

extern const char* const kCsvHeader;

// Raw (unnormalized) supervised pair; the model module owns normalization.
struct TrainingVector {
    std::uint64_t tick = 0;     // input tick t
    Readings sensors{};         // readings at t
    ActuatorConfig actuators;   // configuration adopted right after observing t
    double target = 0.0;        // reading of the target sensor at t + interval
};

// Exactly size - interval vectors (before striding).
std::vector<TrainingVector> extract_vectors(const TimeSeriesLog& log, SensorId target, int interval,
                                            int stride = 1);

// Chronological split: earlier vectors train, later vectors test.
std::pair<std::vector<TrainingVector>, std::vector<TrainingVector>> split(
    const std::vector<TrainingVector>& vectors, double train_fraction);

}  // namespace cpsfuzz

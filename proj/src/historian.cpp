#include "cpsfuzz/historian.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <sstream>

namespace cpsfuzz {

const char* const kCsvHeader =
    "tick,LIT101,LIT301,LIT401,FIT101,FIT201,FIT301,FIT401,DPIT301,"
    "MV101,MV201,P101,P102,P301,P302,P401,P601,MCV401";

void TimeSeriesLog::append(const LogRow& row) {
    if (!rows_.empty() && row.tick != rows_.back().tick + 1)
        throw ContractViolation("historian: tick " + std::to_string(row.tick) + " does not follow " +
                                std::to_string(rows_.back().tick));
    rows_.push_back(row);
}

void TimeSeriesLog::record(const PlantState& state) { append({state.tick, state.reported, state.actuators}); }

void TimeSeriesLog::write_csv(std::ostream& out) const {
    out << kCsvHeader << '\n';
    std::string line;
    for (const auto& r : rows_) {
        line = std::to_string(r.tick);
        for (double v : r.readings) fmt::format_to(std::back_inserter(line), ",{:.3f}", v);
        for (int p : r.actuators.positions()) fmt::format_to(std::back_inserter(line), ",{}", p);
        line += '\n';
        out << line;
    }
}

void TimeSeriesLog::write_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    write_csv(f);
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

TimeSeriesLog TimeSeriesLog::read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw std::runtime_error("historian CSV: bad header");
    TimeSeriesLog log;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) fields.push_back(cell);
        if (fields.size() != 1 + kSensorCount + kActuatorCount)
            throw std::runtime_error("historian CSV line " + std::to_string(lineno) + ": wrong field count");
        try {
            LogRow row;
            std::size_t used = 0;
            row.tick = std::stoull(fields[0], &used);
            if (used != fields[0].size()) throw std::invalid_argument("tick");
            for (std::size_t j = 0; j < kSensorCount; ++j) {
                row.readings[j] = std::stod(fields[1 + j], &used);
                if (used != fields[1 + j].size() || !std::isfinite(row.readings[j]))
                    throw std::invalid_argument("reading");
            }
            std::array<int, kActuatorCount> pos{};
            for (std::size_t k = 0; k < kActuatorCount; ++k) {
                pos[k] = std::stoi(fields[1 + kSensorCount + k], &used);
                if (used != fields[1 + kSensorCount + k].size()) throw std::invalid_argument("actuator");
            }
            row.actuators = ActuatorConfig::from_positions(pos);
            log.append(row);
        } catch (const ContractViolation& e) {
            throw std::runtime_error("historian CSV line " + std::to_string(lineno) + ": " + e.what());
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("historian CSV line " + std::to_string(lineno) + ": malformed value");
        } catch (const std::out_of_range&) {
            throw std::runtime_error("historian CSV line " + std::to_string(lineno) + ": value out of range");
        }
    }
    return log;
}

TimeSeriesLog TimeSeriesLog::read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    return read_csv(f);
}

std::vector<TrainingVector> extract_vectors(const TimeSeriesLog& log, SensorId target, int interval,
                                            int stride) {
    if (interval < 1) throw ContractViolation("interval must be >= 1");
    if (stride < 1) throw ContractViolation("stride must be >= 1");
    if (log.size() <= static_cast<std::size_t>(interval))
        throw std::invalid_argument("log too short for interval " + std::to_string(interval));
    const std::size_t count = log.size() - static_cast<std::size_t>(interval);
    std::vector<TrainingVector> out;
    out.reserve(count / static_cast<std::size_t>(stride) + 1);
    for (std::size_t t = 0; t < count; t += static_cast<std::size_t>(stride)) {
        // Row t+1 carries the configuration in force right after t was observed.
        out.push_back({log[t].tick, log[t].readings, log[t + 1].actuators,
                       log[t + static_cast<std::size_t>(interval)].readings[idx(target)]});
    }
    return out;
}

std::pair<std::vector<TrainingVector>, std::vector<TrainingVector>> split(
    const std::vector<TrainingVector>& vectors, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ContractViolation("train fraction must be in (0, 1)");
    const auto n = vectors.size();
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
    if (n_train == 0 || n_train >= n)
        throw std::invalid_argument("split of " + std::to_string(n) + " vectors leaves an empty side");
    auto mid = vectors.begin() + static_cast<std::ptrdiff_t>(n_train);
    return {std::vector<TrainingVector>(vectors.begin(), mid), std::vector<TrainingVector>(mid, vectors.end())};
}

}  // namespace cpsfuzz

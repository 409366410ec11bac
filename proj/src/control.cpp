#include "cpsfuzz/control.hpp"

#include <cmath>

namespace cpsfuzz {

namespace {

// Shared hysteresis for a transfer pump: run when the downstream tank is low and
// the upstream tank is above the guard; stop when downstream is high or upstream runs dry.
int transfer_rule(double downstream, double upstream, int held, const PlcProgram& p) {
    if (downstream < p.low_set && upstream > p.low_guard) return 1;
    if (downstream > p.high_set || upstream < p.low_guard) return 0;
    return held;
}

}  // namespace

std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::S1: return "S1";
        case Stage::S2: return "S2";
        case Stage::S3: return "S3";
    }
    return "?";
}

std::vector<ActuatorId> PlcProgram::owned() const {
    switch (stage) {
        case Stage::S1: return {ActuatorId::MV101, ActuatorId::P101, ActuatorId::P102, ActuatorId::P601};
        case Stage::S2: return {ActuatorId::MV201, ActuatorId::P301, ActuatorId::P302};
        case Stage::S3: return {ActuatorId::P401, ActuatorId::MCV401};
    }
    return {};
}

CommandEntries plc_scan(const PlcProgram& p, const Readings& r, const ActuatorConfig& previous) {
    if (!(p.low_set < p.high_set)) throw ContractViolation("PLC low_set must be below high_set");
    for (double v : r)
        if (!std::isfinite(v)) throw ContractViolation("PLC snapshot has a non-finite reading");

    const double lit101 = r[idx(SensorId::LIT101)];
    const double lit301 = r[idx(SensorId::LIT301)];
    const double lit401 = r[idx(SensorId::LIT401)];
    CommandEntries out;

    switch (p.stage) {
        case Stage::S1: {
            int mv101 = previous.get(ActuatorId::MV101);
            if (lit101 < p.low_set) mv101 = 1;
            else if (lit101 > p.high_set) mv101 = 0;
            out.emplace_back(ActuatorId::MV101, mv101);
            out.emplace_back(ActuatorId::P101,
                             transfer_rule(lit301, lit101, previous.get(ActuatorId::P101), p));
            out.emplace_back(ActuatorId::P102, 0);
            out.emplace_back(ActuatorId::P601, 0);
            break;
        }
        case Stage::S2: {
            // MV201 mirrors the P101 decision, computed from the same readings.
            out.emplace_back(ActuatorId::MV201,
                             transfer_rule(lit301, lit101, previous.get(ActuatorId::MV201), p));
            out.emplace_back(ActuatorId::P301,
                             transfer_rule(lit401, lit301, previous.get(ActuatorId::P301), p));
            out.emplace_back(ActuatorId::P302, 0);
            break;
        }
        case Stage::S3: {
            if (lit401 > p.low_guard) {
                out.emplace_back(ActuatorId::P401, 1);
                out.emplace_back(ActuatorId::MCV401, 50);
            } else {
                out.emplace_back(ActuatorId::P401, 0);
                out.emplace_back(ActuatorId::MCV401, previous.get(ActuatorId::MCV401));
            }
            break;
        }
    }
    return out;
}

Controller::Controller()
    : programs_{PlcProgram{Stage::S1}, PlcProgram{Stage::S2}, PlcProgram{Stage::S3}} {}

Controller::Controller(const std::array<PlcProgram, kStageCount>& programs) : programs_(programs) {}

ActuatorConfig Controller::scan(const Readings& readings, const ActuatorConfig& previous) const {
    ActuatorConfig out = previous;
    for (const auto& p : programs_)
        for (auto [a, v] : plc_scan(p, readings, previous)) out.set(a, v);
    return out;
}

}  // namespace cpsfuzz

#pragma once

#include "cpsfuzz/plant.hpp"

#include <utility>
#include <vector>

namespace cpsfuzz {

enum class Stage : std::uint8_t { S1, S2, S3 };
inline constexpr std::size_t kStageCount = 3;

std::string_view stage_name(Stage s);

struct PlcProgram {
    Stage stage = Stage::S1;
    double low_set = 40.0;
    double high_set = 60.0;
    double low_guard = 25.0;

    std::vector<ActuatorId> owned() const;
};

using CommandEntries = std::vector<std::pair<ActuatorId, int>>;

// One scan cycle. `previous` supplies the held commands between thresholds.
// Returns entries for the program's owned actuators only.
CommandEntries plc_scan(const PlcProgram& program, const Readings& readings,
                        const ActuatorConfig& previous);

// The three stage PLCs merged in stage order.
class Controller {
public:
    Controller();
    explicit Controller(const std::array<PlcProgram, kStageCount>& programs);

    ActuatorConfig scan(const Readings& readings, const ActuatorConfig& previous) const;
    const PlcProgram& program(Stage s) const { return programs_[static_cast<std::size_t>(s)]; }

private:
    std::array<PlcProgram, kStageCount> programs_;
};

}  // namespace cpsfuzz

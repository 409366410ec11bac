#pragma once

#include "cpsfuzz/historian.hpp"
#include "cpsfuzz/plant.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cpsfuzz {

enum class Family : std::uint8_t { Ridge = 1, Feedforward = 2 };
std::string_view family_name(Family f);
Family parse_family(std::string_view name);

// 8 min-max normalized sensors, 8 binary actuators, MCV401 / 100.
inline constexpr std::size_t kFeatureCount = kSensorCount + kActuatorCount;
using Features = std::array<double, kFeatureCount>;

struct NormStats {
    Readings min{};
    Readings scale{};  // max - min, or 1 for constant columns

    static NormStats fit(const std::vector<TrainingVector>& train);
    double normalize(std::size_t sensor, double v) const { return (v - min[sensor]) / scale[sensor]; }
    double denormalize(std::size_t sensor, double z) const { return z * scale[sensor] + min[sensor]; }
};

Features make_features(const NormStats& stats, const Readings& snapshot, const ActuatorConfig& config);

struct Hyperparams {
    double ridge_lambda = 1e-3;
    int hidden = 16;
    int epochs = 40;
    double learning_rate = 0.05;
    int batch = 64;
    std::uint64_t seed = 1;
};

// Feedforward layout inside params: W1 (hidden x features, row-major), b1, w2, b2.
std::size_t ffn_param_count(int hidden);
double ffn_forward(const std::vector<double>& params, int hidden, const Features& x);
// Mean of 0.5 (f(x) - y)^2 over the batch, with its gradient.
double ffn_loss_grad(const std::vector<double>& params, int hidden, const std::vector<Features>& xs,
                     const std::vector<double>& ys, std::vector<double>* grad);

struct ModelEntry {
    SensorId target = SensorId::LIT101;
    int interval = 1;
    Family family = Family::Ridge;
    int hidden = 0;
    std::vector<double> params;
    NormStats stats;

    // Raw-unit prediction clamped to the sensor's physical range.
    double predict(const Readings& snapshot, const ActuatorConfig& config) const;
    double predict_features(const Features& x) const;
};

ModelEntry train(const std::vector<TrainingVector>& train_set, SensorId target, int interval, Family family,
                 const Hyperparams& hp = {});

double clamp_physical(SensorId s, double v);

// 1 tick for flows and pressure, 100 ticks for tank levels.
int default_interval(SensorId s);

struct PredictionModel {
    std::vector<ModelEntry> entries;  // one per target sensor, in SensorId order

    const ModelEntry& entry(SensorId s) const;
    bool has(SensorId s) const;
    Readings predict(const Readings& snapshot, const ActuatorConfig& config) const;

    void save(const std::string& path) const;
    static PredictionModel load(const std::string& path);
};

struct AccuracyReport {
    double tol = 0.05;
    double floor = 0.05;
    std::array<std::optional<double>, kSensorCount> fraction{};
    std::array<int, kSensorCount> interval{};
};

bool within_tolerance(double predicted, double actual, double tol, double floor);
double evaluate(const ModelEntry& entry, const std::vector<TrainingVector>& test, double tol = 0.05,
                double floor = 0.05);

// Trains all eight per-sensor models on a chronological split of the log.
struct TrainOutcome {
    PredictionModel model;
    AccuracyReport report;
};
TrainOutcome train_all(const TimeSeriesLog& log, Family family, const Hyperparams& hp = {},
                       double train_fraction = 0.8, int stride = 1);

std::string summary_text(const PredictionModel& model, const AccuracyReport& report);

}  // namespace cpsfuzz

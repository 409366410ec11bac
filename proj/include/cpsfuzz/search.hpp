#pragma once

#include "cpsfuzz/fitness.hpp"
#include "cpsfuzz/model.hpp"
#include "cpsfuzz/plant.hpp"

#include <functional>
#include <vector>

namespace cpsfuzz {

using Scorer = std::function<double(const ActuatorConfig&)>;

// Bits outside free_mask are pinned to frozen_bits in every generated candidate.
struct Constraint {
    std::uint16_t free_mask = (1u << kConfigBits) - 1;
    std::uint16_t frozen_bits = 0;

    std::uint16_t apply(std::uint16_t bits) const {
        return static_cast<std::uint16_t>((bits & free_mask) | (frozen_bits & ~free_mask));
    }
    bool admits(std::uint16_t bits) const { return apply(bits) == bits && ActuatorConfig::bits_valid(bits); }
};

Constraint constrain(const std::vector<ActuatorId>& allowed, const ActuatorConfig& genuine);
std::size_t space_size(const Constraint& c);

enum class Selection : std::uint8_t { Roulette, Rank };

struct GaParams {
    int population = 100;
    int parents = 100;
    double mutation = 0.1;
    int iterations = 100;
    int budget = 10000;
    Selection selection = Selection::Roulette;

    void validate() const;
};

struct Candidate {
    ActuatorConfig config;
    double fitness = 0.0;
};

struct SearchResult {
    Candidate best;
    int evaluations = 0;
    int iterations = 0;
    int selection_fallbacks = 0;       // iterations where roulette fell back to uniform
    std::vector<double> best_history;  // population best after init and after each iteration
};

// Fitness of a candidate = f(M(snapshot, candidate)).
Scorer make_scorer(const PredictionModel& model, const Readings& snapshot, const FitnessSpec& spec,
                   const std::array<SafeRange, kSensorCount>& ranges);

SearchResult random_search(const Scorer& score, int budget, std::uint64_t seed, const Constraint& c = {},
                           bool dedup = false);
SearchResult ga_search(const Scorer& score, const GaParams& params, std::uint64_t seed, const Constraint& c = {});
SearchResult exhaustive_best(const Scorer& score, const Constraint& c = {}, bool reverse = false);

// Selection probabilities f_i / sum f_j (weights clipped at zero); empty when undefined.
std::vector<double> roulette_probabilities(const std::vector<double>& fitness);

}  // namespace cpsfuzz

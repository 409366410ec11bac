#include "cpsfuzz/search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cpsfuzz {

namespace {

constexpr std::uint16_t kAllBits = (1u << kConfigBits) - 1;
constexpr int kRetries = 8;

// Top `point` layout positions (the sub-vector left of the cut).
std::uint16_t left_mask(int point) {
    return static_cast<std::uint16_t>(kAllBits ^ ((1u << (kConfigBits - point)) - 1));
}

std::uint16_t sample_bits(std::mt19937_64& rng, const Constraint& c) {
    std::uniform_int_distribution<int> prefix(0, 255);
    std::uniform_int_distribution<int> mcv(0, kMcvMax);
    auto raw = static_cast<std::uint16_t>((prefix(rng) << 7) | mcv(rng));
    return c.apply(raw);
}

struct Evaluator {
    const Scorer& score;
    int count = 0;
    Candidate operator()(std::uint16_t bits) {
        ++count;
        auto cfg = ActuatorConfig::from_bits(bits);
        return {cfg, score(cfg)};
    }
};

}  // namespace

Constraint constrain(const std::vector<ActuatorId>& allowed, const ActuatorConfig& genuine) {
    if (allowed.empty()) throw ContractViolation("constraint needs at least one allowed actuator");
    Constraint c;
    c.free_mask = 0;
    for (auto a : allowed) c.free_mask |= ActuatorConfig::actuator_mask(a);
    c.frozen_bits = genuine.bits();
    return c;
}

std::size_t space_size(const Constraint& c) {
    std::size_t n = 0;
    for (std::uint32_t b = 0; b <= kAllBits; ++b)
        if (c.admits(static_cast<std::uint16_t>(b))) ++n;
    return n;
}

void GaParams::validate() const {
    if (population < 2) throw ContractViolation("GA population must be >= 2");
    if (parents < 1) throw ContractViolation("GA needs at least one parent");
    if (!(mutation >= 0.0 && mutation <= 1.0)) throw ContractViolation("mutation probability outside [0,1]");
    if (iterations < 0 || budget < 1) throw ContractViolation("GA iterations/budget out of range");
}

Scorer make_scorer(const PredictionModel& model, const Readings& snapshot, const FitnessSpec& spec,
                   const std::array<SafeRange, kSensorCount>& ranges) {
    spec.validate();
    std::vector<const ModelEntry*> needed;
    for (auto s : spec.inputs()) needed.push_back(&model.entry(s));
    return [needed, snapshot, spec, ranges](const ActuatorConfig& cfg) {
        Readings pred{};
        for (const auto* e : needed) pred[idx(e->target)] = e->predict(snapshot, cfg);
        return evaluate_fitness(spec, pred, ranges);
    };
}

std::vector<double> roulette_probabilities(const std::vector<double>& fitness) {
    double sum = 0.0;
    for (double f : fitness) sum += std::max(f, 0.0);
    if (!(sum > 0.0)) return {};
    std::vector<double> p;
    for (double f : fitness) p.push_back(std::max(f, 0.0) / sum);
    return p;
}

SearchResult random_search(const Scorer& score, int budget, std::uint64_t seed, const Constraint& c, bool dedup) {
    if (budget < 1) throw ContractViolation("random search budget must be >= 1");
    std::mt19937_64 rng(seed);
    Evaluator eval{score};
    SearchResult res;
    bool have = false;
    auto consider = [&](std::uint16_t bits) {
        Candidate cand = eval(bits);
        if (!have || cand.fitness > res.best.fitness) {
            res.best = cand;
            have = true;
        }
    };
    if (dedup) {
        std::vector<std::uint16_t> space;
        for (std::uint32_t b = 0; b <= kAllBits; ++b)
            if (c.admits(static_cast<std::uint16_t>(b))) space.push_back(static_cast<std::uint16_t>(b));
        const std::size_t take = std::min<std::size_t>(space.size(), static_cast<std::size_t>(budget));
        for (std::size_t i = 0; i < take; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, space.size() - 1);
            std::swap(space[i], space[pick(rng)]);
            consider(space[i]);
        }
    } else {
        for (int i = 0; i < budget; ++i) consider(sample_bits(rng, c));
    }
    res.evaluations = eval.count;
    res.best_history.push_back(res.best.fitness);
    return res;
}

SearchResult ga_search(const Scorer& score, const GaParams& params, std::uint64_t seed, const Constraint& c) {
    params.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Evaluator eval{score};
    SearchResult res;

    const auto n = static_cast<std::size_t>(params.population);
    const auto k = static_cast<std::size_t>(params.parents);
    std::vector<Candidate> pop;
    pop.reserve(n + k);
    for (std::size_t i = 0; i < n && eval.count < params.budget; ++i) pop.push_back(eval(sample_bits(rng, c)));

    auto best_of = [](const std::vector<Candidate>& v) {
        return *std::max_element(v.begin(), v.end(),
                                 [](const Candidate& a, const Candidate& b) { return a.fitness < b.fitness; });
    };
    res.best = best_of(pop);
    res.best_history.push_back(res.best.fitness);

    std::vector<double> weights(pop.size());
    std::vector<std::uint16_t> parents(k);
    std::vector<Candidate> offspring;
    for (int it = 0; it < params.iterations; ++it) {
        if (eval.count + static_cast<int>(k) > params.budget) break;

        // Selection.
        weights.resize(pop.size());
        bool uniform = false;
        if (params.selection == Selection::Rank) {
            std::vector<std::size_t> order(pop.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return pop[a].fitness < pop[b].fitness; });
            for (std::size_t r = 0; r < order.size(); ++r) weights[order[r]] = static_cast<double>(r + 1);
        } else {
            for (std::size_t i = 0; i < pop.size(); ++i) weights[i] = std::max(pop[i].fitness, 0.0);
        }
        std::vector<double> cumulative(pop.size());
        std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
        const double total = cumulative.back();
        if (!(total > 0.0) || !std::isfinite(total)) {
            uniform = true;
            ++res.selection_fallbacks;
        }
        for (auto& p : parents) {
            std::size_t pick;
            if (uniform) {
                pick = std::uniform_int_distribution<std::size_t>(0, pop.size() - 1)(rng);
            } else {
                double r = unit(rng) * total;
                pick = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), r) -
                                                cumulative.begin());
                pick = std::min(pick, pop.size() - 1);
            }
            p = pop[pick].config.bits();
        }

        // Crossover on consecutive pairs; an odd last parent is carried over.
        std::vector<std::uint16_t> children(parents);
        for (std::size_t i = 0; i + 1 < k; i += 2) {
            const std::uint16_t a = parents[i], b = parents[i + 1];
            for (int attempt = 0; attempt <= kRetries; ++attempt) {
                int point = std::uniform_int_distribution<int>(1, static_cast<int>(kConfigBits) - 1)(rng);
                const std::uint16_t left = left_mask(point);
                auto c1 = c.apply(static_cast<std::uint16_t>((a & left) | (b & ~left & kAllBits)));
                auto c2 = c.apply(static_cast<std::uint16_t>((b & left) | (a & ~left & kAllBits)));
                if (ActuatorConfig::bits_valid(c1) && ActuatorConfig::bits_valid(c2)) {
                    children[i] = c1;
                    children[i + 1] = c2;
                    break;
                }
            }
        }

        // Per-bit mutation; invalid results are resampled, then the child is kept as is.
        offspring.clear();
        for (auto child : children) {
            for (int attempt = 0; attempt <= kRetries; ++attempt) {
                std::uint16_t m = child;
                for (std::size_t p = 0; p < kConfigBits; ++p)
                    if (unit(rng) < params.mutation) m ^= ActuatorConfig::mask_of(p);
                m = c.apply(m);
                if (ActuatorConfig::bits_valid(m)) {
                    child = m;
                    break;
                }
            }
            offspring.push_back(eval(child));
            if (offspring.back().fitness > res.best.fitness) res.best = offspring.back();
        }

        // Keep the n fittest of old and new, stable so earlier candidates win ties.
        pop.insert(pop.end(), offspring.begin(), offspring.end());
        std::stable_sort(pop.begin(), pop.end(),
                         [](const Candidate& a, const Candidate& b) { return a.fitness > b.fitness; });
        pop.resize(std::min(n, pop.size()));
        ++res.iterations;
        res.best_history.push_back(pop.front().fitness);
    }
    res.evaluations = eval.count;
    return res;
}

SearchResult exhaustive_best(const Scorer& score, const Constraint& c, bool reverse) {
    Evaluator eval{score};
    SearchResult res;
    bool have = false;
    for (std::uint32_t i = 0; i <= kAllBits; ++i) {
        auto bits = static_cast<std::uint16_t>(reverse ? kAllBits - i : i);
        if (!c.admits(bits)) continue;
        Candidate cand = eval(bits);
        if (!have || cand.fitness > res.best.fitness) {
            res.best = cand;
            have = true;
        }
    }
    res.evaluations = eval.count;
    res.best_history.push_back(res.best.fitness);
    return res;
}

}  // namespace cpsfuzz

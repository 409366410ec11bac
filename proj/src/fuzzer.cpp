#include "cpsfuzz/fuzzer.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace cpsfuzz {

namespace {

std::uint64_t round_seed(std::uint64_t seed, std::uint64_t round) {
    std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (round + 1));
    x = (x ^ (x >> 33)) * 0xff51afd7ed558ccdULL;
    return x ^ (x >> 33);
}

std::string readings_csv(const Readings& r) {
    std::string s;
    for (std::size_t j = 0; j < r.size(); ++j) s += fmt::format("{}{:.3f}", j ? "," : "", r[j]);
    return s;
}

}  // namespace

std::string_view engine_name(Engine e) {
    switch (e) {
        case Engine::ModelGa: return "model-ga";
        case Engine::ModelRandom: return "model-random";
        case Engine::RandomNoModel: return "random-nomodel";
    }
    return "?";
}

Engine parse_engine(std::string_view name) {
    if (name == "model-ga") return Engine::ModelGa;
    if (name == "model-random") return Engine::ModelRandom;
    if (name == "random-nomodel") return Engine::RandomNoModel;
    throw std::invalid_argument("unknown engine '" + std::string(name) + "'");
}

void FuzzerSetup::validate() const {
    if (round_ticks < 1 || budget_ticks < round_ticks)
        throw ContractViolation("fuzzer needs budget >= round length >= 1");
    if (allowed.empty()) throw ContractViolation("fuzzer needs at least one allowed actuator");
    goal.validate();
    ga.validate();
    if (random_budget < 1) throw ContractViolation("random search budget must be >= 1");
}

AttackTrace run_attack(const FuzzerSetup& setup, Session& session, const PredictionModel* model,
                       std::uint64_t seed, const std::optional<MonitorSetup>& monitor) {
    setup.validate();
    if (setup.engine != Engine::RandomNoModel && !model)
        throw ContractViolation("model-guided engines need a prediction model");
    const auto& ranges = session.config().safe_ranges;

    AttackTrace trace;
    trace.goal = setup.goal.name();
    trace.engine = std::string(engine_name(setup.engine));
    trace.start_tick = session.state().tick;
    trace.start_actuators = session.state().actuators;

    std::optional<Monitor> mon;
    if (monitor) {
        mon.emplace(monitor->plant, monitor->params, monitor->mode);
        mon->prime(session.state().actuators);
    }

    const bool unconstrained = setup.allowed.size() == kActuatorCount;
    std::optional<double> last_progress;
    std::uint64_t round = 0;
    for (int elapsed = 0; elapsed < setup.budget_ticks; ++elapsed) {
        if (elapsed % setup.round_ticks == 0) {
            const Readings snapshot = session.state().reported;
            RoundStat rs;
            rs.tick = static_cast<std::uint64_t>(elapsed);
            rs.progress = evaluate_fitness(setup.goal, snapshot, ranges);
            const bool improving = last_progress && rs.progress > *last_progress;
            const bool search = elapsed == 0 || (setup.engine != Engine::RandomNoModel && !improving);
            if (search) {
                Constraint c = unconstrained ? Constraint{} : constrain(setup.allowed, session.last_genuine());
                const std::uint64_t rseed = round_seed(seed, round);
                SearchResult res;
                if (setup.engine == Engine::RandomNoModel) {
                    res = random_search([](const ActuatorConfig&) { return 0.0; }, 1, rseed, c);
                } else {
                    Scorer scorer = make_scorer(*model, snapshot, setup.goal, ranges);
                    res = setup.engine == Engine::ModelGa ? ga_search(scorer, setup.ga, rseed, c)
                                                          : random_search(scorer, setup.random_budget, rseed, c);
                }
                MitmPolicy policy;
                for (auto a : setup.allowed) policy.override_with(a, res.best.config.get(a));
                session.set_policy(policy);
                rs.searched = true;
                rs.best_fitness = res.best.fitness;
                rs.evaluations = res.evaluations;
                rs.selection_fallbacks = res.selection_fallbacks;
                rs.config = res.best.config;
            } else {
                rs.config = trace.rounds.back().config;
                rs.best_fitness = trace.rounds.back().best_fitness;
            }
            trace.rounds.push_back(rs);
            last_progress = rs.progress;
            ++round;
        }

        TickRecord rec = session.advance();
        TraceRecord tr;
        tr.tick = static_cast<std::uint64_t>(elapsed);
        tr.injected = rec.delivered;
        tr.reported = rec.reported;
        tr.unsafe = is_unsafe(rec.next, ranges);
        if (mon) {
            tr.alerts = mon->observe({rec.tick, rec.reported, rec.delivered});
            for (auto& a : tr.alerts) a.tick = static_cast<std::uint64_t>(elapsed);
            if (!tr.alerts.empty() && !trace.detected) trace.detected = static_cast<std::uint64_t>(elapsed);
        }
        trace.records.push_back(std::move(tr));
        if (goal_reached(setup.goal, rec.next.truth, ranges)) {
            trace.reached = static_cast<std::uint64_t>(elapsed + 1);
            break;
        }
        if (trace.detected && monitor && monitor->stop_on_alert) break;
    }
    return trace;
}

std::string AttackTrace::serialize() const {
    std::string out = "# cpsfuzz attack trace v1\n";
    out += fmt::format("# goal={} engine={} start_tick={}\n", goal, engine, start_tick);
    out += "# ROUND tick action progress best_fitness evaluations selection_fallbacks config\n";
    out += "# TICK tick injected reported unsafe\n# ALERT tick rule observed\n";
    std::size_t ri = 0;
    for (const auto& r : records) {
        while (ri < rounds.size() && rounds[ri].tick <= r.tick) {
            const auto& rs = rounds[ri++];
            out += fmt::format("ROUND\t{}\t{}\t{:.6f}\t{:.6g}\t{}\t{}\t{}\n", rs.tick, rs.searched ? "search" : "hold",
                               rs.progress, rs.best_fitness, rs.evaluations, rs.selection_fallbacks,
                               rs.config.to_string());
        }
        std::string unsafe;
        for (const auto& u : r.unsafe)
            unsafe += fmt::format("{}{}:{}", unsafe.empty() ? "" : ";", sensor_name(u.sensor), direction_name(u.direction));
        out += fmt::format("TICK\t{}\t{}\t{}\t{}\n", r.tick, r.injected.to_string(), readings_csv(r.reported),
                           unsafe.empty() ? "-" : unsafe);
        for (const auto& a : r.alerts) out += fmt::format("ALERT\t{}\t{}\t{}\n", a.tick, a.rule, a.observed);
    }
    out += "# summary\n";
    std::string outcome = reached ? (evaded() || !detected ? "reached" : "detected") : (detected ? "detected" : "exhausted");
    out += fmt::format("outcome={}\n", outcome);
    out += fmt::format("reached_tick={}\n", reached ? std::to_string(*reached) : "-");
    out += fmt::format("detected_tick={}\n", detected ? std::to_string(*detected) : "-");
    out += fmt::format("ticks={}\nrounds={}\n", records.size(), rounds.size());
    return out;
}

int RepSummary::reached_count() const {
    return static_cast<int>(std::count_if(reps.begin(), reps.end(), [](const RepOutcome& r) { return r.reached.has_value(); }));
}

bool RepSummary::majority_reached() const { return 2 * reached_count() > static_cast<int>(reps.size()); }

std::optional<double> RepSummary::median() const {
    if (!majority_reached()) return std::nullopt;
    std::vector<double> t;
    for (const auto& r : reps)
        if (r.reached) t.push_back(static_cast<double>(*r.reached));
    std::sort(t.begin(), t.end());
    const std::size_t n = t.size();
    return n % 2 ? t[n / 2] : 0.5 * (t[n / 2 - 1] + t[n / 2]);
}

std::string RepSummary::cell(int budget_ticks) const {
    if (reached_count() == 0) return "—";
    if (!majority_reached()) return fmt::format("{}+", budget_ticks);
    double m = *median();
    std::string s = m == static_cast<double>(static_cast<long long>(m)) ? fmt::format("{}", static_cast<long long>(m))
                                                                          : fmt::format("{:.1f}", m);
    if (reached_count() < static_cast<int>(reps.size())) s += "*";
    return s;
}

RepSummary reset_and_repeat(const FuzzerSetup& setup, const PlantConfig& cfg, const PredictionModel* model, int reps,
                            std::uint64_t base_seed, const RepeatOptions& opts) {
    if (reps < 1) throw ContractViolation("reps must be >= 1");
    RepSummary out;
    for (int r = 0; r < reps; ++r) {
        const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(r);
        Session session(cfg, reset_to_normal(cfg, seed), seed, opts.transport);
        session.tap().set_logging(false);
        AttackTrace t = run_attack(setup, session, model, seed, opts.monitor);
        out.reps.push_back({seed, t.reached, t.detected});
    }
    return out;
}

std::vector<ActuatorId> stage_actuators_for(const FitnessSpec& goal) {
    using A = ActuatorId;
    const std::vector<A> s1 = {A::MV101, A::P101, A::P102, A::P601};
    const std::vector<A> s2 = {A::MV201, A::P301, A::P302};
    const std::vector<A> s3 = {A::P401, A::MCV401};
    auto join = [](std::initializer_list<const std::vector<A>*> parts) {
        std::vector<A> v;
        for (auto* p : parts) v.insert(v.end(), p->begin(), p->end());
        std::sort(v.begin(), v.end());
        return v;
    };
    if (goal.kind == GoalKind::Isolation) return s3;
    if (goal.kind == GoalKind::Group) return join({&s1, &s2, &s3});
    switch (goal.target) {
        case SensorId::FIT101: return s1;
        case SensorId::LIT101:
        case SensorId::FIT201:
        case SensorId::LIT301: return join({&s1, &s2});
        case SensorId::FIT301:
        case SensorId::DPIT301: return s2;
        case SensorId::LIT401: return join({&s1, &s2, &s3});
        case SensorId::FIT401: return s3;
    }
    return join({&s1, &s2, &s3});
}

}  // namespace cpsfuzz

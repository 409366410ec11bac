// Command-line front end: simulate, train, fuzz, experiment, defend.

#include "cpsfuzz/harness.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>

namespace {

using namespace cpsfuzz;

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config;
    std::uint64_t seed = 1;
    bool networked = false;
    std::uint16_t port = 0;

    PlantConfig plant() const { return config.empty() ? PlantConfig{} : load_plant_config(config); }
    TransportKind transport() const { return networked ? TransportKind::Socket : TransportKind::InMemory; }
};

struct SearchFlags {
    GaParams ga;
    std::string selection = "roulette";
    int random_budget = 10000;
    int budget_ticks = 1200;
    int round_ticks = 10;

    void add(CLI::App* app) {
        app->add_option("--pop", ga.population, "GA population size")->capture_default_str();
        app->add_option("--parents", ga.parents, "offspring produced per GA iteration")->capture_default_str();
        app->add_option("--pm", ga.mutation, "per-bit mutation probability")->capture_default_str();
        app->add_option("--iters", ga.iterations, "GA iterations per search")->capture_default_str();
        app->add_option("--budget", ga.budget, "fitness evaluations per GA search")->capture_default_str();
        app->add_option("--selection", selection, "roulette or rank")->capture_default_str();
        app->add_option("--random-budget", random_budget, "evaluations per model-random search")
            ->capture_default_str();
        app->add_option("--attack-ticks", budget_ticks, "tick budget per attack")->capture_default_str();
        app->add_option("--round", round_ticks, "ticks between search rounds")->capture_default_str();
    }

    FuzzerSetup setup() const {
        FuzzerSetup s;
        s.ga = ga;
        if (selection == "roulette") s.ga.selection = Selection::Roulette;
        else if (selection == "rank") s.ga.selection = Selection::Rank;
        else throw UsageError("unknown selection '" + selection + "'");
        s.random_budget = random_budget;
        s.budget_ticks = budget_ticks;
        s.round_ticks = round_ticks;
        return s;
    }
};

void add_common(CLI::App* app, Common& c, bool transport) {
    app->add_option("--config", c.config, "plant configuration file (key = value)");
    app->add_option("--seed", c.seed, "base seed")->capture_default_str();
    if (transport) {
        app->add_flag("--networked", c.networked, "run PLCs as threads behind TCP loopback");
        app->add_option("--port", c.port, "loopback port for --networked (0 = any)");
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    return out;
}

template <class T, class F>
std::vector<T> parse_all(const std::vector<std::string>& names, F parse) {
    std::vector<T> out;
    for (const auto& n : names) {
        try {
            out.push_back(parse(n));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Model-guided smart fuzzing of a simulated water treatment plant"};
    app.require_subcommand(1);

    Common common;

    // simulate
    auto* sim = app.add_subcommand("simulate", "run the closed loop and write a historian CSV");
    add_common(sim, common, true);
    int ticks = 20000;
    std::string out_path;
    bool no_explore = false;
    sim->add_option("--ticks", ticks, "rows to record")->check(CLI::PositiveNumber)->capture_default_str();
    sim->add_option("--out", out_path, "output CSV")->required();
    sim->add_flag("--no-explore", no_explore, "record pure PLC control without actuator excitation");

    // train
    auto* trn = app.add_subcommand("train", "train per-sensor prediction models from a CSV");
    std::string data_path, family = "ridge";
    int stride = 1;
    trn->add_option("--data", data_path, "historian CSV")->required()->check(CLI::ExistingFile);
    trn->add_option("--family", family, "ridge or ffn")->capture_default_str();
    trn->add_option("--out", out_path, "output model file")->required();
    trn->add_option("--stride", stride, "training vector stride")->check(CLI::PositiveNumber);
    add_common(trn, common, false);

    // fuzz
    auto* fz = app.add_subcommand("fuzz", "run one attack and write its trace");
    add_common(fz, common, true);
    SearchFlags fz_search;
    fz_search.add(fz);
    std::string model_path, goal_text, engine_text = "model-ga", mode_text;
    std::vector<std::string> allowed_names;
    fz->add_option("--model", model_path, "model file (not needed for random-nomodel)");
    fz->add_option("--goal", goal_text, "goal, e.g. LIT101:high or isolation:FIT401")->required();
    fz->add_option("--engine", engine_text, "model-ga, model-random or random-nomodel")->capture_default_str();
    fz->add_option("--mode", mode_text, "attach a monitor: all, conditions-only or invariants-only");
    fz->add_option("--allow", allowed_names, "restrict the attacker to these actuators");
    fz->add_option("--out", out_path, "trace file (default: stdout summary only)");

    // experiment
    auto* ex = app.add_subcommand("experiment", "goal x engine table of median ticks to unsafe");
    add_common(ex, common, true);
    SearchFlags ex_search;
    ex_search.add(ex);
    std::vector<std::string> goal_list, engine_list;
    int reps = 10;
    ex->add_option("--model", model_path, "model file")->required();
    ex->add_option("--goal", goal_list, "goals (default: all sensor goals and isolation:FIT401)");
    ex->add_option("--engine", engine_list, "engines (default: all three)");
    ex->add_option("--reps", reps, "repetitions per cell")->check(CLI::PositiveNumber)->capture_default_str();
    ex->add_option("--out", out_path, "CSV output");

    // defend
    auto* df = app.add_subcommand("defend", "evasion matrix of stage-constrained attacks per monitor mode");
    add_common(df, common, false);
    SearchFlags df_search;
    df_search.add(df);
    std::vector<std::string> mode_list;
    bool no_cc = false, unconstrained = false;
    df->add_option("--model", model_path, "model file")->required();
    df->add_option("--goal", goal_list, "goals (default: all)");
    df->add_option("--mode", mode_list, "monitor modes (default: all three)");
    df->add_flag("--no-cc", no_cc, "disable control-consistency rules");
    df->add_flag("--unconstrained", unconstrained, "let the attacker touch every actuator");
    df->add_option("--out", out_path, "CSV output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*sim) {
            ExploreParams explore;
            explore.enabled = !no_explore;
            auto log = collect_log(common.plant(), ticks, common.seed, explore, common.transport(), common.port);
            auto out = open_out(out_path);
            log.write_csv(out);
            fmt::print("wrote {} rows to {}\n", log.size(), out_path);
        } else if (*trn) {
            Family fam;
            try {
                fam = parse_family(family);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            auto log = TimeSeriesLog::read_csv(data_path);
            Hyperparams hp;
            hp.seed = common.seed;
            auto res = train_all(log, fam, hp, 0.8, stride);
            res.model.save(out_path);
            fmt::print("{}", summary_text(res.model, res.report));
        } else if (*fz) {
            FuzzerSetup setup = fz_search.setup();
            setup.goal = parse_all<FitnessSpec>({goal_text}, parse_goal).front();
            setup.engine = parse_all<Engine>({engine_text}, parse_engine).front();
            if (!allowed_names.empty()) setup.allowed = parse_all<ActuatorId>(allowed_names, parse_actuator);
            std::optional<PredictionModel> model;
            if (setup.engine != Engine::RandomNoModel) {
                if (model_path.empty()) throw UsageError("--model is required for " + engine_text);
                model = PredictionModel::load(model_path);
            }
            const PlantConfig cfg = common.plant();
            std::optional<MonitorSetup> monitor;
            if (!mode_text.empty())
                monitor = MonitorSetup{cfg, {}, parse_all<MonitorMode>({mode_text}, parse_mode).front(), false};
            Session session(cfg, reset_to_normal(cfg, common.seed), common.seed, common.transport(), common.port);
            session.tap().set_logging(false);
            AttackTrace trace = run_attack(setup, session, model ? &*model : nullptr, common.seed, monitor);
            std::string text = trace.serialize();
            if (!out_path.empty()) open_out(out_path) << text;
            fmt::print("goal={} engine={} reached={} detected={}\n", trace.goal, trace.engine,
                       trace.reached ? std::to_string(*trace.reached) : "-",
                       trace.detected ? std::to_string(*trace.detected) : "-");
        } else if (*ex) {
            ExperimentPlan plan;
            if (!goal_list.empty()) plan.goals = parse_all<FitnessSpec>(goal_list, parse_goal);
            if (!engine_list.empty()) plan.engines = parse_all<Engine>(engine_list, parse_engine);
            plan.reps = reps;
            plan.seed = common.seed;
            plan.base = ex_search.setup();
            plan.transport = common.transport();
            auto model = PredictionModel::load(model_path);
            auto res = run_experiment(plan, common.plant(), &model);
            if (!out_path.empty()) open_out(out_path) << "# cpsfuzz experiment v1\n" << res.csv();
            fmt::print("{}", res.table());
        } else if (*df) {
            EvasionOptions opts;
            if (!goal_list.empty()) opts.goals = parse_all<FitnessSpec>(goal_list, parse_goal);
            if (!mode_list.empty()) opts.modes = parse_all<MonitorMode>(mode_list, parse_mode);
            opts.seed = common.seed;
            opts.base = df_search.setup();
            opts.monitor.control_consistency = !no_cc;
            opts.stage_constraints = !unconstrained;
            auto model = PredictionModel::load(model_path);
            auto entries = run_evasion(common.plant(), model, opts);
            std::string csv = evasion_csv(entries);
            if (!out_path.empty()) open_out(out_path) << "# cpsfuzz evasion v1\n" << csv;
            fmt::print("{}", csv);
        }
    } catch (const UsageError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitRuntime;
    }
    return 0;
}

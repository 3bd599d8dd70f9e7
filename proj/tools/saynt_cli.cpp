#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "saynt/driver.h"
#include "saynt/errors.h"
#include "saynt/fsc.h"
#include "saynt/generators.h"
#include "saynt/models.h"

using namespace saynt;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitModel = 3;

std::atomic<bool> interrupted{false};

extern "C" void on_interrupt(int) { interrupted = true; }

std::string read_file(std::string const& path) {
    std::ifstream in(path);
    if (!in) {
        throw ModelError("cannot read " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(std::string const& path, std::string const& text) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write " + path);
    }
    out << text;
    if (text.empty() || text.back() != '\n') {
        out << '\n';
    }
}

struct Options {
    std::string mode;
    std::string model_path;
    std::string generator;
    std::string spec;
    double timeout = 120.0;
    double inductive_timeout = 60.0;
    double belief_timeout = 10.0;
    std::size_t max_beliefs = 100000;
    bool posterior_aware = false;
    bool invert_restriction = false;
    bool no_early_stop = false;
    std::string export_fsc;
    std::string export_belief_fsc;
    std::string trace;
    std::string evaluate;
    std::string out;
    double p_u = 0.1;
    std::size_t lane_len = 8;
    std::size_t reps = 100;
};

models::Pomdp load_model(Options const& options) {
    if (!options.model_path.empty()) {
        return models::parse_model(read_file(options.model_path));
    }
    if (options.generator == "lanes") {
        return generators::lanes(options.p_u, options.lane_len);
    }
    return generators::by_name(options.generator, options.p_u, options.lane_len, options.reps);
}

int run(Options const& options) {
    models::Pomdp const pomdp = load_model(options);

    // Generating without a mode just writes the model.
    if (options.mode.empty() && options.evaluate.empty() && !options.generator.empty()) {
        std::string const text = models::emit_model(pomdp);
        if (options.out.empty()) {
            std::cout << text << '\n';
        } else {
            write_file(options.out, text);
        }
        return 0;
    }

    if (options.spec.empty() && options.generator.empty()) {
        throw ConfigError("--spec is required with --model");
    }
    // All built-in benchmarks ask for the fewest expected steps.
    models::Objective const objective =
        options.spec.empty() ? models::Objective::MinReward : models::parse_objective(options.spec);
    if (auto violations = models::validate(pomdp, pomdp.spec(objective)); !violations.empty()) {
        throw ConfigError("specification does not fit the model: " + violations.front().rule + " at " +
                          violations.front().location);
    }

    if (!options.evaluate.empty()) {
        fsc::Fsc const controller = fsc::import_fsc(read_file(options.evaluate));
        if (auto problems = fsc::validate(pomdp, controller); !problems.empty()) {
            throw ModelError("controller does not fit the model: " + problems.front());
        }
        double const value = fsc::evaluate_initial(pomdp, controller, objective);
        auto const size = fsc::fsc_size(pomdp, controller);
        nlohmann::json line;
        line["value"] = std::isfinite(value) ? nlohmann::json(value) : nlohmann::json(value > 0 ? "inf" : "-inf");
        line["size"] = {{"gamma", size.gamma}, {"delta", size.delta}, {"total", size.total()}};
        std::cout << line.dump() << std::endl;
        return 0;
    }

    driver::SayntConfig config;
    config.timeout = options.timeout;
    config.inductive_timeout = options.inductive_timeout;
    config.belief_timeout = options.belief_timeout;
    config.max_beliefs = options.max_beliefs;
    config.posterior_unaware = !options.posterior_aware;
    config.invert_restriction = options.invert_restriction;
    config.stop_when_optimal = !options.no_early_stop;

    std::ofstream trace_file;
    driver::RunHooks hooks;
    hooks.cancel = &interrupted;
    hooks.on_record = [](driver::IterationRecord const& record) { std::cout << record.to_json() << std::endl; };
    if (!options.trace.empty()) {
        trace_file.open(options.trace);
        if (!trace_file) {
            throw ConfigError("cannot write " + options.trace);
        }
        hooks.trace = [&trace_file](std::string const& line) { trace_file << line << '\n'; };
    }

    std::string const mode = options.mode.empty() ? "saynt" : options.mode;
    driver::RunResult result;
    if (mode == "saynt") {
        result = driver::run_saynt(pomdp, objective, config, hooks);
    } else if (mode == "belief") {
        result = driver::run_belief_only(pomdp, objective, config.timeout, std::nullopt, config.max_beliefs,
                                         config.stop_when_optimal, hooks);
    } else if (mode == "inductive") {
        result = driver::run_inductive_only(pomdp, objective, config.timeout, std::nullopt, config.posterior_unaware,
                                            config.stop_when_optimal, hooks);
    } else if (mode == "oneshot-q1") {
        result = driver::run_oneshot_q1(pomdp, objective, config, hooks);
    } else {
        result = driver::run_oneshot_q2(pomdp, objective, config, hooks);
    }

    if (!options.export_fsc.empty()) {
        // Belief-only runs have no inductive controller; export what they found instead.
        auto const& chosen = result.inductive_fsc ? result.inductive_fsc : result.belief_fsc;
        if (!chosen) {
            throw ConfigError("no controller was found to export");
        }
        write_file(options.export_fsc, fsc::export_fsc(*chosen));
    }
    if (!options.export_belief_fsc.empty()) {
        if (!result.belief_fsc) {
            throw ConfigError("no belief controller was found to export");
        }
        write_file(options.export_belief_fsc, fsc::export_fsc(*result.belief_fsc));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-state controller synthesis for POMDPs (belief exploration + inductive search)"};
    Options options;
    app.add_option("--mode", options.mode, "Synthesis mode")
        ->check(CLI::IsMember({"saynt", "belief", "inductive", "oneshot-q1", "oneshot-q2"}));
    auto* model = app.add_option("--model", options.model_path, "POMDP in the JSON model format");
    auto* gen = app.add_option("--gen", options.generator, "Built-in model")
                    ->check(CLI::IsMember({"lanes", "lanes-plus", "fig2a", "fig2b", "fig4a"}));
    model->excludes(gen);
    gen->excludes(model);
    app.add_option("--spec", options.spec, "max-prob, min-prob, max-reward or min-reward (built-in models: min-reward)")
        ->check(CLI::IsMember({"max-prob", "min-prob", "max-reward", "min-reward"}));
    app.add_option("--t", options.timeout, "Overall timeout in seconds")->capture_default_str();
    app.add_option("--ti", options.inductive_timeout, "Inductive phase timeout in seconds")->capture_default_str();
    app.add_option("--tb", options.belief_timeout, "Belief phase timeout in seconds")->capture_default_str();
    app.add_option("--max-beliefs", options.max_beliefs, "Beliefs explored per belief phase")->capture_default_str();
    app.add_flag("--posterior-aware", options.posterior_aware, "Let memory updates depend on the next observation");
    app.add_flag("--invert-restriction", options.invert_restriction,
                 "Restrict the inductive search when the inductive controller is behind, not ahead");
    app.add_flag("--no-early-stop", options.no_early_stop, "Keep running after the value is proven optimal");
    app.add_option("--export-fsc", options.export_fsc, "Write the final inductive controller (JSON)");
    app.add_option("--export-belief-fsc", options.export_belief_fsc, "Write the final belief controller (JSON)");
    app.add_option("--trace", options.trace, "Write search events as JSON lines");
    app.add_option("--evaluate", options.evaluate, "Evaluate a controller file on the model and exit");
    app.add_option("--out", options.out, "With --gen and no mode: write the model here instead of stdout");
    app.add_option("--pu", options.p_u, "Lanes: probability that an upgrade succeeds")->capture_default_str();
    app.add_option("--lane-len", options.lane_len, "Lanes: positions per lane")->capture_default_str();
    app.add_option("--reps", options.reps, "Lanes-plus: number of repeated stages")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (CLI::CallForHelp const& e) {
        return app.exit(e);
    } catch (CLI::ParseError const& e) {
        app.exit(e);
        return kExitConfig;
    }
    if (options.model_path.empty() && options.generator.empty()) {
        std::cerr << "one of --model or --gen is required\n" << app.help();
        return kExitConfig;
    }

    std::signal(SIGINT, on_interrupt);
    try {
        return run(options);
    } catch (ConfigError const& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (Error const& e) {
        std::cerr << "model error: " << e.what() << '\n';
        return kExitModel;
    }
}

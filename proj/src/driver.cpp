#include "saynt/driver.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "json.hpp"
#include "saynt/checker.h"
#include "saynt/errors.h"

namespace saynt::driver {

namespace {

using Clock = std::chrono::steady_clock;
using inductive::ActionSets;
using inductive::FamilySpace;
using inductive::MemoryModel;

Clock::time_point after(Clock::time_point from, double seconds) {
    return from + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds));
}

bool cancelled(RunHooks const& hooks) { return hooks.cancel && hooks.cancel->load(); }

bool expired(Clock::time_point deadline, RunHooks const& hooks) {
    return Clock::now() >= deadline || cancelled(hooks);
}

bool same_value(double a, double b) {
    if (a == b) {
        return true;
    }
    if (!std::isfinite(a) || !std::isfinite(b)) {
        return false;
    }
    return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b));
}

/// Strictly better, or the first value at all.
bool better(Objective objective, double candidate, std::optional<double> const& reference) {
    return !reference || models::improves(objective, candidate, *reference, 0.0);
}

nlohmann::json value_json(std::optional<double> value) {
    if (!value) {
        return nullptr;
    }
    if (std::isinf(*value)) {
        return *value > 0 ? "inf" : "-inf";
    }
    return *value;
}

double elapsed_ms(Clock::time_point started) {
    return std::chrono::duration<double, std::milli>(Clock::now() - started).count();
}

/// The inductive half: a worklist over the current family plus the memory model and k.
class InductiveSearch {
public:
    InductiveSearch(Pomdp const& pomdp, Objective objective, bool posterior_unaware, MemoryModel memory)
        : pomdp_(pomdp), objective_(objective), posterior_unaware_(posterior_unaware) {
        reset(std::move(memory));
        k_history_.push_back(k_);
    }

    void reset(MemoryModel memory) {
        memory_ = std::move(memory);
        worklist_ = {inductive::full_family(pomdp_, memory_, posterior_unaware_)};
    }

    void escalate() {
        ++k_;
        for (auto& nodes : memory_) {
            nodes = std::max(nodes, k_);
        }
        reset(memory_);
        k_history_.push_back(k_);
    }

    /// Searches until the deadline, escalating k on exhaustion. `done` is polled between searches;
    /// `changed` fires after every improvement or escalation.
    void run(Clock::time_point deadline, std::optional<ActionSets> const& restriction, RunHooks const& hooks,
             Clock::time_point started, std::function<bool()> const& done, std::function<void()> const& changed) {
        while (!expired(deadline, hooks) && !done()) {
            if (worklist_.empty()) {
                escalate();
                if (hooks.trace) {
                    nlohmann::json line;
                    line["event"] = "escalate";
                    line["k"] = k_;
                    line["memory"] = memory_;
                    line["wall_ms"] = elapsed_ms(started);
                    hooks.trace(line.dump());
                }
                if (changed) {
                    changed();
                }
            }
            inductive::SynthesisOptions options;
            options.deadline = deadline;
            options.cancel = hooks.cancel;
            options.trace = hooks.trace;
            options.started = started;
            auto result = inductive::synthesize(pomdp_, objective_, std::move(worklist_), value_, restriction, options);
            worklist_ = std::move(result.remaining);
            stats_.families_checked += result.stats.families_checked;
            stats_.members_evaluated += result.stats.members_evaluated;
            stats_.pruned += result.stats.pruned;
            stats_.splits += result.stats.splits;
            if (result.best) {
                best_ = std::move(result.best);
                value_ = result.value;
                if (changed) {
                    changed();
                }
            }
        }
    }

    std::optional<Fsc> const& best() const { return best_; }
    std::optional<double> const& value() const { return value_; }
    MemoryModel const& memory() const { return memory_; }
    std::size_t k() const { return k_; }
    inductive::SynthesisStats const& stats() const { return stats_; }
    std::vector<std::size_t> const& k_history() const { return k_history_; }

private:
    Pomdp const& pomdp_;
    Objective objective_;
    bool posterior_unaware_;
    std::size_t k_ = 1;
    MemoryModel memory_;
    std::vector<FamilySpace> worklist_;
    std::optional<Fsc> best_;
    std::optional<double> value_;
    inductive::SynthesisStats stats_;
    std::vector<std::size_t> k_history_;
};

/// The belief half: a fragment that persists across phases, and the best extracted controller.
class BeliefSearch {
public:
    BeliefSearch(Pomdp const& pomdp, Objective objective) : pomdp_(pomdp), objective_(objective), fragment_(pomdp) {}

    /// One explore/check/extract round with `cutoff` closing off the frontier.
    void phase(Fsc const& cutoff, std::size_t max_beliefs, Clock::time_point deadline, RunHooks const& hooks) {
        auto const phase_start = Clock::now();
        if (!fragment_.has_cutoff() || !(fragment_.cutoff_fsc() == cutoff)) {
            fragment_.set_cutoff(pomdp_, objective_, cutoff);
        }
        belief::Budget budget;
        budget.max_beliefs = fragment_.explored().size() + max_beliefs;
        budget.deadline = deadline;
        budget.cancel = hooks.cancel;
        fragment_.explore(pomdp_, budget);
        auto solution = belief::check_fragment(pomdp_, fragment_);
        actions_ = belief::action_sets(pomdp_, fragment_, solution);
        if (better(objective_, solution.value, value_)) {
            best_ = belief::extract_belief_fsc(pomdp_, fragment_, solution);
            value_ = solution.value;
        }
        if (hooks.trace) {
            auto line = nlohmann::json::parse(belief::fragment_stats_json(
                fragment_, solution,
                std::chrono::duration<double, std::milli>(Clock::now() - phase_start).count()));
            line["event"] = "belief_phase";
            hooks.trace(line.dump());
        }
    }

    /// The fragment is the whole reachable belief MDP, so its value is the optimum.
    bool closed() const { return fragment_.frontier().empty() && fragment_.has_cutoff(); }

    std::optional<Fsc> const& best() const { return best_; }
    std::optional<double> const& value() const { return value_; }
    ActionSets const& actions() const { return actions_; }
    belief::BeliefFragment const& fragment() const { return fragment_; }

private:
    Pomdp const& pomdp_;
    Objective objective_;
    belief::BeliefFragment fragment_;
    std::optional<Fsc> best_;
    std::optional<double> value_;
    ActionSets actions_;
};

void fill_inductive(IterationRecord& record, Pomdp const& pomdp, InductiveSearch const& search) {
    record.value_inductive = search.value();
    if (search.best()) {
        record.size_inductive = fsc::fsc_size(pomdp, *search.best());
    }
    record.k = search.k();
    record.memory = search.memory();
    record.queries = search.stats().queries();
}

void fill_belief(IterationRecord& record, Pomdp const& pomdp, BeliefSearch const& search) {
    record.value_belief = search.value();
    if (search.best()) {
        record.size_belief = fsc::fsc_size(pomdp, *search.best());
    }
    record.explored = search.fragment().explored().size();
    record.frontier = search.fragment().frontier().size();
}

void publish(RunResult& result, IterationRecord record, RunHooks const& hooks) {
    record.iteration = result.records.size() + 1;
    if (hooks.on_record) {
        hooks.on_record(record);
    }
    result.records.push_back(std::move(record));
}

/// Certifies optimality of `value` against the bound of the fully observable MDP.
class OptimalityCheck {
public:
    OptimalityCheck(Pomdp const& pomdp, Objective objective, bool enabled)
        : enabled_(enabled), bound_(enabled ? observable_bound(pomdp, objective) : 0.0) {}

    bool attains(std::optional<double> const& value) const { return enabled_ && value && same_value(*value, bound_); }
    bool enabled() const { return enabled_; }

private:
    bool enabled_;
    double bound_;
};

}  // namespace

void SayntConfig::validate() const {
    if (!(inductive_timeout > 0.0)) {
        throw ConfigError("inductive phase timeout must be positive");
    }
    if (!(belief_timeout > 0.0)) {
        throw ConfigError("belief phase timeout must be positive");
    }
    if (!(timeout >= inductive_timeout + belief_timeout)) {
        throw ConfigError("overall timeout " + std::to_string(timeout) + " is shorter than one inductive plus one belief phase");
    }
    if (max_beliefs == 0) {
        throw ConfigError("max_beliefs must be positive");
    }
}

std::string IterationRecord::to_json() const {
    nlohmann::json line;
    line["mode"] = mode;
    line["iteration"] = iteration;
    line["value_inductive"] = value_json(value_inductive);
    line["value_belief"] = value_json(value_belief);
    auto size_json = [](std::optional<fsc::FscSize> const& size) -> nlohmann::json {
        if (!size) {
            return nullptr;
        }
        return {{"gamma", size->gamma}, {"delta", size->delta}, {"total", size->total()}};
    };
    line["size_inductive"] = size_json(size_inductive);
    line["size_belief"] = size_json(size_belief);
    line["k"] = k;
    line["memory"] = memory;
    line["restricted"] = restricted;
    line["explored"] = explored;
    line["frontier"] = frontier;
    line["queries"] = queries;
    line["wall_ms"] = wall_ms;
    return line.dump();
}

double RunResult::best_value(Objective objective) const {
    double best = models::worst_value(objective);
    for (auto const& value : {inductive_value, belief_value}) {
        if (value && (models::improves(objective, *value, best, 0.0) || *value == best)) {
            best = *value;
        }
    }
    return best;
}

double observable_bound(Pomdp const& pomdp, Objective objective) {
    checker::TargetSet targets(pomdp.num_states());
    for (models::StateId s = 0; s < pomdp.num_states(); ++s) {
        targets[s] = pomdp.is_target(s);
    }
    auto checked = checker::check_mdp(pomdp.mdp(), targets, objective);
    return checked.values[pomdp.mdp().initial_state()];
}

RunResult run_saynt(Pomdp const& pomdp, Objective objective, SayntConfig const& config, RunHooks const& hooks) {
    config.validate();
    auto const started = Clock::now();
    auto const deadline = after(started, config.timeout);
    OptimalityCheck const optimal(pomdp, objective, config.stop_when_optimal);

    InductiveSearch inductive(pomdp, objective, config.posterior_unaware, MemoryModel(pomdp.num_observations(), 1));
    BeliefSearch belief(pomdp, objective);
    RunResult result;
    bool proven = false;

    auto inductive_ahead = [&] {
        // Missing controllers count as the worst value.
        double const vi = inductive.value().value_or(models::worst_value(objective));
        double const vb = belief.value().value_or(models::worst_value(objective));
        return models::improves(objective, vi, vb, 0.0);
    };

    while (!expired(deadline, hooks) && !proven) {
        std::optional<ActionSets> restriction;
        if (belief.value() && inductive_ahead() != config.invert_restriction) {
            restriction = belief.actions();
        }
        auto const phase_deadline = std::min(deadline, after(Clock::now(), config.inductive_timeout));
        inductive.run(phase_deadline, restriction, hooks, started, [&] { return optimal.attains(inductive.value()); }, {});

        Fsc cutoff = inductive.best() ? *inductive.best() : fsc::lowest_action_fsc(pomdp);
        belief.phase(cutoff, config.max_beliefs, std::min(deadline, after(Clock::now(), config.belief_timeout)), hooks);

        if (!inductive_ahead()) {
            MemoryModel const wanted = inductive::memory_model_from(belief.actions());
            bool grows = false;
            for (std::size_t z = 0; z < wanted.size(); ++z) {
                grows = grows || inductive.memory()[z] < wanted[z];
            }
            if (grows) {
                inductive.reset(wanted);
            }
        }

        proven = config.stop_when_optimal &&
                 (belief.closed() || optimal.attains(inductive.value()) || optimal.attains(belief.value()));

        IterationRecord record;
        record.mode = "saynt";
        fill_inductive(record, pomdp, inductive);
        fill_belief(record, pomdp, belief);
        record.restricted = restriction.has_value();
        record.wall_ms = elapsed_ms(started);
        publish(result, std::move(record), hooks);
    }

    result.inductive_fsc = inductive.best();
    result.inductive_value = inductive.value();
    result.belief_fsc = belief.best();
    result.belief_value = belief.value();
    result.belief_actions = belief.actions();
    result.stats = inductive.stats();
    result.k_history = inductive.k_history();
    result.proven_optimal = proven;
    return result;
}

RunResult run_belief_only(Pomdp const& pomdp, Objective objective, double timeout, std::optional<Fsc> cutoff,
                          std::size_t max_beliefs, bool stop_when_optimal, RunHooks const& hooks) {
    if (!(timeout > 0.0)) {
        throw ConfigError("timeout must be positive");
    }
    if (max_beliefs == 0) {
        throw ConfigError("max_beliefs must be positive");
    }
    auto const started = Clock::now();
    auto const deadline = after(started, timeout);
    OptimalityCheck const optimal(pomdp, objective, stop_when_optimal);
    Fsc const closing = cutoff ? *cutoff : fsc::lowest_action_fsc(pomdp);

    BeliefSearch belief(pomdp, objective);
    RunResult result;
    bool proven = false;
    do {
        belief.phase(closing, max_beliefs, deadline, hooks);
        // The fragment keeps growing until it is closed; without the early stop there is nothing left to do either.
        proven = belief.closed() || optimal.attains(belief.value());
        IterationRecord record;
        record.mode = "belief";
        fill_belief(record, pomdp, belief);
        record.wall_ms = elapsed_ms(started);
        publish(result, std::move(record), hooks);
    } while (!expired(deadline, hooks) && !proven && !belief.closed());

    result.belief_fsc = belief.best();
    result.belief_value = belief.value();
    result.belief_actions = belief.actions();
    result.proven_optimal = proven && stop_when_optimal;
    return result;
}

RunResult run_inductive_only(Pomdp const& pomdp, Objective objective, double timeout,
                             std::optional<ActionSets> reference, bool posterior_unaware, bool stop_when_optimal,
                             RunHooks const& hooks) {
    if (!(timeout > 0.0)) {
        throw ConfigError("timeout must be positive");
    }
    auto const started = Clock::now();
    auto const deadline = after(started, timeout);
    OptimalityCheck const optimal(pomdp, objective, stop_when_optimal);

    MemoryModel memory(pomdp.num_observations(), 1);
    if (reference) {
        if (reference->size() != pomdp.num_observations()) {
            throw ConfigError("reference restriction lists " + std::to_string(reference->size()) +
                              " observations, model has " + std::to_string(pomdp.num_observations()));
        }
        memory = inductive::memory_model_from(*reference);
    }
    InductiveSearch inductive(pomdp, objective, posterior_unaware, memory);
    RunResult result;

    auto record_now = [&] {
        IterationRecord record;
        record.mode = "inductive";
        fill_inductive(record, pomdp, inductive);
        record.restricted = reference.has_value();
        record.wall_ms = elapsed_ms(started);
        publish(result, std::move(record), hooks);
    };
    inductive.run(deadline, reference, hooks, started, [&] { return optimal.attains(inductive.value()); }, record_now);
    if (result.records.empty() || result.records.back().queries != inductive.stats().queries()) {
        record_now();
    }

    result.inductive_fsc = inductive.best();
    result.inductive_value = inductive.value();
    result.stats = inductive.stats();
    result.k_history = inductive.k_history();
    result.proven_optimal = optimal.attains(inductive.value());
    return result;
}

namespace {

void append(RunResult& into, RunResult&& part, std::string const& mode, double offset_ms) {
    for (auto& record : part.records) {
        record.mode = mode;
        record.iteration = into.records.size() + 1;
        record.wall_ms += offset_ms;
        into.records.push_back(std::move(record));
    }
    if (part.inductive_value) {
        into.inductive_fsc = std::move(part.inductive_fsc);
        into.inductive_value = part.inductive_value;
    }
    if (part.belief_value) {
        into.belief_fsc = std::move(part.belief_fsc);
        into.belief_value = part.belief_value;
        into.belief_actions = std::move(part.belief_actions);
    }
    into.stats.families_checked += part.stats.families_checked;
    into.stats.members_evaluated += part.stats.members_evaluated;
    into.stats.pruned += part.stats.pruned;
    into.stats.splits += part.stats.splits;
    into.k_history.insert(into.k_history.end(), part.k_history.begin(), part.k_history.end());
    into.proven_optimal = into.proven_optimal || part.proven_optimal;
}

/// Forwards records with the combined mode label and iteration numbering.
RunHooks relabel(RunHooks const& hooks, std::string mode, std::size_t const& offset, double const& offset_ms) {
    RunHooks inner = hooks;
    if (hooks.on_record) {
        inner.on_record = [&hooks, mode, &offset, &offset_ms](IterationRecord const& record) {
            IterationRecord copy = record;
            copy.mode = mode;
            copy.iteration += offset;
            copy.wall_ms += offset_ms;
            hooks.on_record(copy);
        };
    }
    return inner;
}

}  // namespace

RunResult run_oneshot_q1(Pomdp const& pomdp, Objective objective, SayntConfig const& config, RunHooks const& hooks) {
    config.validate();
    auto const started = Clock::now();
    RunResult result;
    std::size_t offset = 0;
    double offset_ms = 0.0;
    RunHooks const inner = relabel(hooks, "oneshot-q1", offset, offset_ms);

    auto first = run_inductive_only(pomdp, objective, config.inductive_timeout, std::nullopt, config.posterior_unaware,
                                    config.stop_when_optimal, inner);
    std::optional<Fsc> cutoff = first.inductive_fsc;
    append(result, std::move(first), "oneshot-q1", 0.0);

    offset = result.records.size();
    offset_ms = elapsed_ms(started);
    auto second = run_belief_only(pomdp, objective, config.belief_timeout, cutoff, config.max_beliefs,
                                  config.stop_when_optimal, inner);
    append(result, std::move(second), "oneshot-q1", offset_ms);
    return result;
}

RunResult run_oneshot_q2(Pomdp const& pomdp, Objective objective, SayntConfig const& config, RunHooks const& hooks) {
    config.validate();
    auto const started = Clock::now();
    RunResult result;
    std::size_t offset = 0;
    double offset_ms = 0.0;
    RunHooks const inner = relabel(hooks, "oneshot-q2", offset, offset_ms);

    auto first = run_belief_only(pomdp, objective, config.belief_timeout, std::nullopt, config.max_beliefs,
                                 config.stop_when_optimal, inner);
    ActionSets reference = first.belief_actions;
    append(result, std::move(first), "oneshot-q2", 0.0);

    offset = result.records.size();
    offset_ms = elapsed_ms(started);
    auto second = run_inductive_only(pomdp, objective, config.inductive_timeout, reference, config.posterior_unaware,
                                     config.stop_when_optimal, inner);
    append(result, std::move(second), "oneshot-q2", offset_ms);
    return result;
}

}  // namespace saynt::driver

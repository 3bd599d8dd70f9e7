#pragma once

#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "saynt/belief.h"
#include "saynt/fsc.h"
#include "saynt/inductive.h"
#include "saynt/models.h"

namespace saynt::driver {

using fsc::Fsc;
using models::Objective;
using models::Pomdp;

struct SayntConfig {
    double timeout = 120.0;           ///< overall wall-clock budget t (seconds)
    double inductive_timeout = 60.0;  ///< per inductive phase
    double belief_timeout = 10.0;     ///< per belief phase
    std::size_t max_beliefs = 100000;  ///< beliefs explored per belief phase
    bool posterior_unaware = true;
    /// Pass the belief action restriction when the inductive controller is behind instead of ahead.
    bool invert_restriction = false;
    /// Stop as soon as the best value is provably optimal (closed belief fragment, or the value of
    /// the fully observable MDP is attained).
    bool stop_when_optimal = true;

    /// Throws ConfigError unless both phase timeouts are positive and fit into the overall timeout.
    void validate() const;
};

/// One yield of a run: the best controllers so far and some bookkeeping.
struct IterationRecord {
    std::string mode;
    std::size_t iteration = 0;
    std::optional<double> value_inductive;
    std::optional<double> value_belief;
    std::optional<fsc::FscSize> size_inductive;
    std::optional<fsc::FscSize> size_belief;
    std::size_t k = 0;
    inductive::MemoryModel memory;
    bool restricted = false;
    std::size_t explored = 0;
    std::size_t frontier = 0;
    std::size_t queries = 0;
    double wall_ms = 0.0;

    std::string to_json() const;
};

using RecordSink = std::function<void(IterationRecord const&)>;
using TraceSink = std::function<void(std::string const&)>;

/// Hooks shared by all modes. The sink runs on the worker thread; `cancel` is polled at every deadline check.
struct RunHooks {
    RecordSink on_record;
    TraceSink trace;
    std::atomic<bool> const* cancel = nullptr;
};

struct RunResult {
    std::optional<Fsc> inductive_fsc;
    std::optional<double> inductive_value;
    std::optional<Fsc> belief_fsc;
    std::optional<double> belief_value;
    std::vector<IterationRecord> records;
    inductive::SynthesisStats stats;
    /// Actions of the latest belief policy per observation (empty without a belief phase).
    inductive::ActionSets belief_actions;
    /// Memory-node bound k at each family reset, in order.
    std::vector<std::size_t> k_history;
    bool proven_optimal = false;

    /// Best of the two values in the objective's direction (worst value when neither exists).
    double best_value(Objective objective) const;
};

/// The symbiotic loop: alternating inductive and belief phases until the overall timeout.
RunResult run_saynt(Pomdp const& pomdp, Objective objective, SayntConfig const& config, RunHooks const& hooks = {});

/// Belief exploration only. Without a cut-off controller the lowest-action memoryless controller is used.
RunResult run_belief_only(Pomdp const& pomdp, Objective objective, double timeout, std::optional<Fsc> cutoff = std::nullopt,
                          std::size_t max_beliefs = 100000, bool stop_when_optimal = true, RunHooks const& hooks = {});

/// Inductive search only, escalating the number of memory nodes whenever a family is exhausted.
/// A reference action restriction seeds the memory model and is searched first.
RunResult run_inductive_only(Pomdp const& pomdp, Objective objective, double timeout,
                             std::optional<inductive::ActionSets> reference = std::nullopt, bool posterior_unaware = true,
                             bool stop_when_optimal = true, RunHooks const& hooks = {});

/// Inductive search for `inductive_timeout`, then belief exploration with its controller as cut-off.
RunResult run_oneshot_q1(Pomdp const& pomdp, Objective objective, SayntConfig const& config, RunHooks const& hooks = {});
/// Belief exploration for `belief_timeout`, then inductive search restricted by the belief policy.
RunResult run_oneshot_q2(Pomdp const& pomdp, Objective objective, SayntConfig const& config, RunHooks const& hooks = {});

/// Optimal value of the underlying fully observable MDP at the initial state; no controller can do better.
double observable_bound(Pomdp const& pomdp, Objective objective);

}  // namespace saynt::driver

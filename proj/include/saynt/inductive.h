#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "saynt/checker.h"
#include "saynt/fsc.h"
#include "saynt/models.h"

namespace saynt::inductive {

using fsc::Fsc;
using fsc::NodeId;
using models::ActionId;
using models::ObsId;
using models::Objective;
using models::Pomdp;
using models::StateId;

/// Number of memory nodes per observation.
using MemoryModel = std::vector<std::size_t>;
/// Allowed actions per observation; an empty entry means "no restriction known".
using ActionSets = std::vector<std::vector<ActionId>>;

/// A free parameter of the controller template: the action of (obs, node) or the memory update of
/// (obs, node[, posterior]). Options are action ids or node ids respectively.
struct Hole {
    enum class Kind { Action, Update };
    Kind kind;
    ObsId obs;
    NodeId node;
    std::optional<ObsId> posterior;  ///< absent for posterior-unaware updates
    std::vector<std::uint32_t> domain;
};

/// Hole layout shared by a family and all of its subfamilies.
class DesignSpace {
public:
    DesignSpace(Pomdp const& pomdp, MemoryModel memory, bool posterior_unaware);

    MemoryModel const& memory() const { return memory_; }
    bool posterior_unaware() const { return posterior_unaware_; }
    std::size_t max_nodes() const { return max_nodes_; }
    std::vector<Hole> const& holes() const { return holes_; }
    std::size_t num_observations() const { return memory_.size(); }

    std::size_t action_hole(ObsId obs, NodeId node) const { return action_hole_[obs][node]; }
    /// Update hole of (obs, node) towards `posterior`; nullopt when the posterior cannot follow obs.
    std::optional<std::size_t> update_hole(ObsId obs, NodeId node, ObsId posterior) const;
    /// Observations that can follow `obs` under some action.
    std::vector<ObsId> const& posteriors(ObsId obs) const { return posteriors_[obs]; }

private:
    MemoryModel memory_;
    bool posterior_unaware_;
    std::size_t max_nodes_ = 1;
    std::vector<Hole> holes_;
    std::vector<std::vector<std::size_t>> action_hole_;
    std::vector<std::vector<std::vector<std::size_t>>> update_hole_;  ///< [obs][node][posterior slot]
    std::vector<std::vector<ObsId>> posteriors_;
};

/// A subfamily: per hole a nonempty sorted subset of its domain.
struct FamilySpace {
    std::shared_ptr<DesignSpace const> space;
    std::vector<std::vector<std::uint32_t>> options;

    double size() const;
    double log10_size() const;
    bool is_singleton() const;
    bool contains(std::vector<std::uint32_t> const& assignment) const;
};

/// All μ-FSCs for the given memory model, optionally with actions restricted per observation.
/// Throws ConfigError when a restriction leaves no enabled action for an observation.
FamilySpace full_family(Pomdp const& pomdp, MemoryModel const& memory, bool posterior_unaware,
                        std::optional<ActionSets> const& restriction = std::nullopt);

/// The controller selected by one option per hole.
Fsc realize(Pomdp const& pomdp, DesignSpace const& space, std::vector<std::uint32_t> const& assignment);

/// Quotient MDP over (state, node) pairs; every choice fixes an action and the relevant update holes.
struct Abstraction {
    models::Mdp mdp;
    checker::TargetSet targets;
    std::vector<std::pair<StateId, NodeId>> pairs;
    std::vector<std::size_t> hole_start;                          ///< per choice, into hole_options
    std::vector<std::pair<std::uint32_t, std::uint32_t>> hole_options;  ///< (hole, option)
};
Abstraction build_abstraction(Pomdp const& pomdp, FamilySpace const& family);

struct AbstractionResult {
    std::optional<double> lower;  ///< min over the abstraction (when requested)
    std::optional<double> upper;  ///< max over the abstraction (when requested)
    double optimistic = 0.0;      ///< bound in the objective's direction
    checker::MemorylessPolicy policy;
    /// Options used by the optimistic policy, per hole, over pairs reachable under the policy.
    std::vector<std::vector<std::uint32_t>> used;
    bool consistent = true;
};
AbstractionResult check_abstraction(Abstraction const& abstraction, Objective objective, bool both_bounds = true);

/// Assignment taking the used option where the policy fixes one and the first option elsewhere.
std::vector<std::uint32_t> assignment_from(FamilySpace const& family, AbstractionResult const& result);

/// Partitions the family along the hole with the most used options. Throws ModelError on a singleton family.
std::pair<FamilySpace, FamilySpace> split(FamilySpace const& family, AbstractionResult const& result);

/// Disjoint boxes covering `family`: the part inside `restriction` first, then the rest.
std::vector<FamilySpace> partition_by_restriction(FamilySpace const& family, ActionSets const& restriction);

struct SynthesisStats {
    std::size_t families_checked = 0;
    std::size_t members_evaluated = 0;
    std::size_t pruned = 0;
    std::size_t splits = 0;
    std::size_t queries() const { return families_checked + members_evaluated; }
};

struct SynthesisOptions {
    std::optional<std::chrono::steady_clock::time_point> deadline;
    std::atomic<bool> const* cancel = nullptr;
    double tolerance = 1e-9;
    bool lower_bounds = false;
    /// Receives one JSON object per event.
    std::function<void(std::string const&)> trace;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
};

struct SynthesisResult {
    std::optional<Fsc> best;
    double value = 0.0;                 ///< incumbent value (worst value when none)
    std::vector<FamilySpace> remaining;  ///< unexplored subfamilies (empty when exhausted)
    SynthesisStats stats;
};

/// Depth-first abstraction refinement over `worklist` (processed last to first).
/// `incumbent` is the value to beat; the returned best is only set when it was beaten.
/// With a restriction, the restricted part of every family is searched before the rest.
SynthesisResult synthesize(Pomdp const& pomdp, Objective objective, std::vector<FamilySpace> worklist,
                           std::optional<double> incumbent, std::optional<ActionSets> const& restriction,
                           SynthesisOptions const& options);

/// μ(z) = max(1, |sets[z]|).
MemoryModel memory_model_from(ActionSets const& sets);

}  // namespace saynt::inductive

#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "saynt/checker.h"
#include "saynt/fsc.h"
#include "saynt/models.h"

namespace saynt::belief {

using fsc::Fsc;
using fsc::FscValue;
using fsc::NodeId;
using models::ActionId;
using models::ObsId;
using models::Objective;
using models::Pomdp;
using models::StateId;

/// Distribution over the states of one observation class.
struct Belief {
    ObsId obs = 0;
    models::Distribution dist;  ///< sorted by state

    bool operator==(Belief const&) const = default;
};

Belief initial_belief(Pomdp const& pomdp);

/// Probability of observing `posterior` after playing `action` in `b`.
double obs_prob(Pomdp const& pomdp, Belief const& b, ActionId action, ObsId posterior);
/// Bayes update; throws ModelError when `posterior` has probability zero.
Belief belief_successor(Pomdp const& pomdp, Belief const& b, ActionId action, ObsId posterior);

struct BeliefTransition {
    double probability;
    Belief belief;
};
/// All successor beliefs of `b` under `action`, ordered by observation.
std::vector<BeliefTransition> successors(Pomdp const& pomdp, Belief const& b, ActionId action);

/// Best value over the nodes of a controller when it takes over in belief `b`, and the node attaining it
/// (maximum for maximising objectives, minimum otherwise; lowest node on ties).
struct Cutoff {
    double value;
    NodeId node;
};
Cutoff cutoff_value(Belief const& b, FscValue const& values, std::size_t num_nodes, Objective objective);

/// Exploration budget. `max_beliefs` bounds the total number of explored beliefs.
struct Budget {
    std::size_t max_beliefs = 100000;
    std::optional<std::chrono::steady_clock::time_point> deadline;
    std::atomic<bool> const* cancel = nullptr;
};

/// Explored part of the belief MDP plus the breadth-first queue of frontier beliefs.
/// Beliefs never change their id; explored beliefs are numbered in exploration order.
class BeliefFragment {
public:
    enum class Status { Explored, Frontier, Target };

    struct Choice {
        ActionId action;
        double reward;
        std::vector<std::pair<std::size_t, double>> successors;  ///< (belief id, probability)
    };

    BeliefFragment() = default;
    explicit BeliefFragment(Pomdp const& pomdp);

    std::size_t num_beliefs() const { return beliefs_.size(); }
    Belief const& belief(std::size_t id) const { return beliefs_[id]; }
    Status status(std::size_t id) const { return status_[id]; }
    std::size_t initial() const { return 0; }

    std::vector<std::size_t> const& explored() const { return explored_; }
    /// Frontier beliefs in breadth-first order.
    std::deque<std::size_t> const& frontier() const { return queue_; }
    /// Position of an explored belief in exploration order.
    std::size_t explored_index(std::size_t id) const { return explored_index_[id]; }
    std::vector<Choice> const& choices(std::size_t explored_position) const { return choices_[explored_position]; }

    std::optional<std::size_t> find(Belief const& b) const;

    /// Expands frontier beliefs breadth-first until the budget is exhausted or the frontier is empty.
    /// Returns the number of beliefs expanded by this call.
    std::size_t explore(Pomdp const& pomdp, Budget const& budget);

    /// Replaces the controller whose values close off the frontier.
    void set_cutoff(Pomdp const& pomdp, Objective objective, Fsc cutoff);
    bool has_cutoff() const { return cutoff_values_.has_value(); }
    Fsc const& cutoff_fsc() const { return cutoff_fsc_; }
    FscValue const& cutoff_values() const { return *cutoff_values_; }
    Objective objective() const { return objective_; }

private:
    std::size_t intern(Pomdp const& pomdp, Belief b);

    std::vector<Belief> beliefs_;
    std::vector<Status> status_;
    std::vector<std::size_t> explored_index_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::size_t> explored_;
    std::vector<std::vector<Choice>> choices_;
    std::deque<std::size_t> queue_;

    Objective objective_ = Objective::MaxProb;
    Fsc cutoff_fsc_;
    std::optional<FscValue> cutoff_values_;
};

/// Explores from scratch with the given cut-off controller.
BeliefFragment unfold(Pomdp const& pomdp, Objective objective, Fsc const& cutoff, Budget const& budget);

/// Finite approximation MDP: explored beliefs, frontier beliefs closed off by cut-offs,
/// and two sinks (reached / failed). Target beliefs are merged into the reached sink.
struct Approximation {
    models::Mdp mdp;
    checker::TargetSet targets;
    std::vector<std::size_t> state_of_belief;  ///< approximation state per belief id
    std::vector<Cutoff> frontier_cutoff;        ///< per frontier position (breadth-first order)
    std::size_t reached = 0;
    std::size_t failed = 0;
};
Approximation build_approximation(Pomdp const& pomdp, BeliefFragment const& fragment);

struct FragmentSolution {
    double value = 0.0;
    std::vector<ActionId> policy;  ///< action per explored belief, in exploration order
    std::vector<double> belief_values;  ///< per explored belief
    Approximation approximation;
};
FragmentSolution check_fragment(Pomdp const& pomdp, BeliefFragment const& fragment);

/// Controller whose first nodes follow the belief policy on explored beliefs and that hands over
/// to the cut-off controller at the best node once the frontier is crossed.
Fsc extract_belief_fsc(Pomdp const& pomdp, BeliefFragment const& fragment, FragmentSolution const& solution);

/// Distinct actions chosen by the belief policy per observation (empty for unexplored observations).
std::vector<std::vector<ActionId>> action_sets(Pomdp const& pomdp, BeliefFragment const& fragment,
                                               FragmentSolution const& solution);

/// {explored, frontier, value, cutoff_fsc_value, wall_ms} as a JSON object.
std::string fragment_stats_json(BeliefFragment const& fragment, FragmentSolution const& solution, double wall_ms);

}  // namespace saynt::belief

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "saynt/models.h"

namespace saynt::fsc {

using models::ActionId;
using models::Mdp;
using models::ObsId;
using models::Objective;
using models::Pomdp;
using models::StateId;

using NodeId = std::uint32_t;

/// Memory update for one (node, prior observation): explicit successors for some posterior
/// observations, `fallback` for all others. A posterior-unaware row has no explicit entries.
struct UpdateRow {
    NodeId fallback = 0;
    std::vector<std::pair<ObsId, NodeId>> by_posterior;  ///< sorted by observation

    NodeId next(ObsId posterior) const;
    bool operator==(UpdateRow const&) const = default;
};

/// Bookkeeping for controllers built from an explored belief fragment: the first `explored` nodes
/// are beliefs, the remaining ones are the nodes of the cut-off controller.
struct BeliefComposite {
    std::size_t explored = 0;
    std::vector<ObsId> explored_obs;
    std::size_t inner_size_gamma = 0;
    std::size_t inner_size_delta = 0;

    bool operator==(BeliefComposite const&) const = default;
};

/// Deterministic Mealy-machine controller: action selection per (node, observation) and
/// memory update per (node, prior observation, posterior observation).
class Fsc {
public:
    Fsc() = default;
    Fsc(std::size_t num_nodes, std::size_t num_observations, NodeId initial = 0);

    std::size_t num_nodes() const { return num_nodes_; }
    std::size_t num_observations() const { return num_obs_; }
    NodeId initial_node() const { return initial_; }
    void set_initial_node(NodeId node) { initial_ = node; }

    ActionId action(NodeId node, ObsId obs) const { return gamma_[index(node, obs)]; }
    void set_action(NodeId node, ObsId obs, ActionId action) { gamma_[index(node, obs)] = action; }

    NodeId next(NodeId node, ObsId prior, ObsId posterior) const { return delta_[index(node, prior)].next(posterior); }
    UpdateRow const& update(NodeId node, ObsId prior) const { return delta_[index(node, prior)]; }
    void set_update(NodeId node, ObsId prior, UpdateRow row);
    /// Sets the successor for a single posterior observation (makes the row posterior-aware).
    void set_next(NodeId node, ObsId prior, ObsId posterior, NodeId next);

    bool posterior_unaware() const { return posterior_unaware_; }
    void set_posterior_unaware(bool flag) { posterior_unaware_ = flag; }

    std::optional<std::vector<std::size_t>> const& memory_model() const { return memory_model_; }
    void set_memory_model(std::optional<std::vector<std::size_t>> model) { memory_model_ = std::move(model); }

    std::optional<BeliefComposite> const& composite() const { return composite_; }
    void set_composite(std::optional<BeliefComposite> composite) { composite_ = std::move(composite); }

    bool operator==(Fsc const&) const = default;

private:
    std::size_t index(NodeId node, ObsId obs) const { return static_cast<std::size_t>(node) * num_obs_ + obs; }

    std::size_t num_nodes_ = 0;
    std::size_t num_obs_ = 0;
    NodeId initial_ = 0;
    std::vector<ActionId> gamma_;
    std::vector<UpdateRow> delta_;
    bool posterior_unaware_ = false;
    std::optional<std::vector<std::size_t>> memory_model_;
    std::optional<BeliefComposite> composite_;
};

/// Memoryless controller choosing `actions[z]` on observation z.
Fsc memoryless(Pomdp const& pomdp, std::vector<ActionId> const& actions);
/// Memoryless controller choosing the lowest enabled action of every observation.
Fsc lowest_action_fsc(Pomdp const& pomdp);

/// Structural problems of `fsc` with respect to `pomdp`; empty when well formed.
std::vector<std::string> validate(Pomdp const& pomdp, Fsc const& fsc);

/// Product Markov chain restricted to the pairs reachable from (initial state, initial node).
/// State i of the result corresponds to `pairs[i]`; target pairs are absorbing.
struct InducedChain {
    Mdp chain;
    std::vector<std::pair<StateId, NodeId>> pairs;
    std::vector<bool> targets;
};
InducedChain induced_mc(Pomdp const& pomdp, Fsc const& fsc);

/// Values of every (state, node) pair of the full product.
struct FscValue {
    double value = 0.0;  ///< value at (initial state, initial node)
    std::size_t num_states = 0;
    std::vector<double> pair_values;  ///< indexed node * num_states + state

    double at(StateId state, NodeId node) const { return pair_values[static_cast<std::size_t>(node) * num_states + state]; }
};
FscValue evaluate(Pomdp const& pomdp, Fsc const& fsc, Objective objective);
/// Value at (initial state, initial node), computed on the reachable product only.
double evaluate_initial(Pomdp const& pomdp, Fsc const& fsc, Objective objective);

/// Observations that can follow prior `obs` when `node` is active.
std::vector<ObsId> post_observations(Pomdp const& pomdp, Fsc const& fsc, NodeId node, ObsId obs);

struct FscSize {
    std::size_t gamma = 0;
    std::size_t delta = 0;
    std::size_t total() const { return gamma + delta; }
    bool operator==(FscSize const&) const = default;
};
FscSize fsc_size(Pomdp const& pomdp, Fsc const& fsc);

std::string export_fsc(Fsc const& fsc);
/// Throws ParseError or SchemaError.
Fsc import_fsc(std::string_view text);
std::string to_dot(Pomdp const& pomdp, Fsc const& fsc);

}  // namespace saynt::fsc

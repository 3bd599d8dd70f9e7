#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace saynt::models {

using StateId = std::uint32_t;
using ActionId = std::uint32_t;
using ObsId = std::uint32_t;

/// Probability mass on a single successor.
struct Transition {
    StateId target;
    double probability;

    bool operator==(Transition const&) const = default;
};

/// Sparse distribution, sorted by target, no duplicate targets.
using Distribution = std::vector<Transition>;

/// Sorts by target and merges duplicate entries. Zero-mass entries are dropped.
Distribution canonical(Distribution distribution);

/// Explicit-state MDP stored as row groups: each state owns a contiguous range of choices,
/// each choice carries a global action label, an optional reward and a sparse distribution.
class Mdp {
public:
    Mdp() = default;

    std::size_t num_states() const { return group_start_.empty() ? 0 : group_start_.size() - 1; }
    std::size_t num_choices() const { return choice_action_.size(); }
    StateId initial_state() const { return initial_; }

    std::vector<std::string> const& action_labels() const { return action_labels_; }
    std::size_t num_actions() const { return action_labels_.size(); }

    std::size_t first_choice(StateId state) const { return group_start_[state]; }
    std::size_t end_choice(StateId state) const { return group_start_[state + 1]; }
    std::size_t num_choices(StateId state) const { return end_choice(state) - first_choice(state); }

    ActionId choice_action(std::size_t choice) const { return choice_action_[choice]; }
    std::span<Transition const> successors(std::size_t choice) const {
        return {entries_.data() + entry_start_[choice], entries_.data() + entry_start_[choice + 1]};
    }

    bool has_rewards() const { return has_rewards_; }
    double choice_reward(std::size_t choice) const { return has_rewards_ ? rewards_[choice] : 0.0; }

    /// Choice of `state` labelled with `action`, if the action is enabled there.
    std::optional<std::size_t> choice_of(StateId state, ActionId action) const;
    bool enabled(StateId state, ActionId action) const { return choice_of(state, action).has_value(); }

    /// True when every state has exactly one choice.
    bool is_markov_chain() const;

    bool operator==(Mdp const&) const = default;

private:
    friend class MdpBuilder;

    StateId initial_ = 0;
    std::vector<std::string> action_labels_;
    std::vector<std::size_t> group_start_;
    std::vector<ActionId> choice_action_;
    std::vector<std::size_t> entry_start_;
    std::vector<Transition> entries_;
    bool has_rewards_ = false;
    std::vector<double> rewards_;
};

/// Incremental construction of an Mdp. States are created up front or on demand;
/// choices may be added to any existing state in any order and keep insertion order per state.
class MdpBuilder {
public:
    explicit MdpBuilder(std::vector<std::string> action_labels, bool with_rewards = false);

    StateId add_state();
    void add_states(std::size_t count);
    std::size_t num_states() const { return pending_.size(); }

    /// Distribution is canonicalized; an empty distribution is rejected at build time.
    void add_choice(StateId state, ActionId action, Distribution successors, double reward = 0.0);
    void set_initial(StateId state) { initial_ = state; }

    Mdp build() &&;

private:
    struct PendingChoice {
        ActionId action;
        Distribution successors;
        double reward;
    };

    std::vector<std::string> action_labels_;
    bool with_rewards_;
    StateId initial_ = 0;
    std::vector<std::vector<PendingChoice>> pending_;
};

enum class Objective { MaxProb, MinProb, MaxReward, MinReward };

bool is_maximizing(Objective objective);
bool is_reward(Objective objective);
/// Same quantity, opposite direction (MaxProb <-> MinProb, MaxReward <-> MinReward).
Objective opposite(Objective objective);
std::string to_string(Objective objective);
/// Accepts "max-prob", "min-prob", "max-reward", "min-reward".
Objective parse_objective(std::string_view text);

/// Indefinite-horizon objective towards the states carrying observation `target`.
struct Specification {
    Objective objective;
    ObsId target;
};

/// `candidate` is strictly better than `reference` by more than `tolerance` in the objective's direction.
bool improves(Objective objective, double candidate, double reference, double tolerance = 1e-9);
/// Worst possible value for the objective (used in place of a missing controller).
double worst_value(Objective objective);

/// Partially observable MDP with a deterministic state labelling.
class Pomdp {
public:
    Pomdp() = default;
    Pomdp(Mdp mdp, std::vector<std::string> observation_labels, std::vector<ObsId> observation_of,
          ObsId target_observation);

    Mdp const& mdp() const { return mdp_; }
    std::size_t num_states() const { return mdp_.num_states(); }
    std::size_t num_observations() const { return observation_labels_.size(); }
    std::vector<std::string> const& observation_labels() const { return observation_labels_; }

    ObsId observation(StateId state) const { return observation_of_[state]; }
    std::vector<ObsId> const& observations() const { return observation_of_; }
    ObsId target_observation() const { return target_; }
    bool is_target(StateId state) const { return observation_of_[state] == target_; }

    std::vector<StateId> const& states_with(ObsId obs) const { return states_by_obs_[obs]; }
    /// Actions enabled in the states labelled `obs` (taken from the first such state).
    std::vector<ActionId> const& actions_of(ObsId obs) const { return actions_by_obs_[obs]; }

    /// The specification with this model's target observation.
    Specification spec(Objective objective) const { return {objective, target_}; }

    bool operator==(Pomdp const& other) const {
        return mdp_ == other.mdp_ && observation_labels_ == other.observation_labels_ &&
               observation_of_ == other.observation_of_ && target_ == other.target_;
    }

private:
    Mdp mdp_;
    std::vector<std::string> observation_labels_;
    std::vector<ObsId> observation_of_;
    ObsId target_ = 0;
    std::vector<std::vector<StateId>> states_by_obs_;
    std::vector<std::vector<ActionId>> actions_by_obs_;
};

struct Violation {
    std::string rule;
    std::string location;
};

/// Checks all structural invariants; an empty result means the model is well formed.
std::vector<Violation> validate(Pomdp const& model);
/// Additionally rejects reward objectives on models without rewards.
std::vector<Violation> validate(Pomdp const& model, Specification const& spec);

/// Parses the JSON model format. Throws ParseError, SchemaError or ValidationError.
Pomdp parse_model(std::string_view text);
/// Emits the JSON model format; parse_model(emit_model(m)) == m.
std::string emit_model(Pomdp const& model);

}  // namespace saynt::models

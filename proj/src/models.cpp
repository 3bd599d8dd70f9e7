#include "saynt/models.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "saynt/errors.h"

namespace saynt::models {

Distribution canonical(Distribution distribution) {
    std::sort(distribution.begin(), distribution.end(),
              [](Transition const& a, Transition const& b) { return a.target < b.target; });
    Distribution merged;
    merged.reserve(distribution.size());
    for (auto const& entry : distribution) {
        if (!merged.empty() && merged.back().target == entry.target) {
            merged.back().probability += entry.probability;
        } else {
            merged.push_back(entry);
        }
    }
    std::erase_if(merged, [](Transition const& t) { return t.probability <= 0.0; });
    return merged;
}

std::optional<std::size_t> Mdp::choice_of(StateId state, ActionId action) const {
    for (std::size_t c = first_choice(state); c < end_choice(state); ++c) {
        if (choice_action_[c] == action) {
            return c;
        }
    }
    return std::nullopt;
}

bool Mdp::is_markov_chain() const {
    for (StateId s = 0; s < num_states(); ++s) {
        if (num_choices(s) != 1) {
            return false;
        }
    }
    return true;
}

MdpBuilder::MdpBuilder(std::vector<std::string> action_labels, bool with_rewards)
    : action_labels_(std::move(action_labels)), with_rewards_(with_rewards) {}

StateId MdpBuilder::add_state() {
    pending_.emplace_back();
    return static_cast<StateId>(pending_.size() - 1);
}

void MdpBuilder::add_states(std::size_t count) {
    pending_.resize(pending_.size() + count);
}

void MdpBuilder::add_choice(StateId state, ActionId action, Distribution successors, double reward) {
    if (state >= pending_.size()) {
        throw ModelError("choice added to unknown state " + std::to_string(state));
    }
    if (action >= action_labels_.size()) {
        throw ModelError("unknown action id " + std::to_string(action) + " at state " + std::to_string(state));
    }
    pending_[state].push_back({action, canonical(std::move(successors)), reward});
}

Mdp MdpBuilder::build() && {
    Mdp mdp;
    mdp.initial_ = initial_;
    mdp.action_labels_ = std::move(action_labels_);
    mdp.has_rewards_ = with_rewards_;
    mdp.group_start_.reserve(pending_.size() + 1);
    mdp.group_start_.push_back(0);
    mdp.entry_start_.push_back(0);
    for (StateId s = 0; s < pending_.size(); ++s) {
        for (auto& choice : pending_[s]) {
            for (auto const& t : choice.successors) {
                if (t.target >= pending_.size()) {
                    throw ModelError("transition from state " + std::to_string(s) + " to unknown state " +
                                     std::to_string(t.target));
                }
            }
            mdp.choice_action_.push_back(choice.action);
            mdp.entries_.insert(mdp.entries_.end(), choice.successors.begin(), choice.successors.end());
            mdp.entry_start_.push_back(mdp.entries_.size());
            if (with_rewards_) {
                mdp.rewards_.push_back(choice.reward);
            }
        }
        mdp.group_start_.push_back(mdp.choice_action_.size());
    }
    if (!pending_.empty() && initial_ >= pending_.size()) {
        throw ModelError("initial state " + std::to_string(initial_) + " out of range");
    }
    pending_.clear();
    return mdp;
}

bool is_maximizing(Objective objective) {
    return objective == Objective::MaxProb || objective == Objective::MaxReward;
}

bool is_reward(Objective objective) {
    return objective == Objective::MaxReward || objective == Objective::MinReward;
}

Objective opposite(Objective objective) {
    switch (objective) {
        case Objective::MaxProb:
            return Objective::MinProb;
        case Objective::MinProb:
            return Objective::MaxProb;
        case Objective::MaxReward:
            return Objective::MinReward;
        case Objective::MinReward:
            return Objective::MaxReward;
    }
    return objective;
}

std::string to_string(Objective objective) {
    switch (objective) {
        case Objective::MaxProb:
            return "max-prob";
        case Objective::MinProb:
            return "min-prob";
        case Objective::MaxReward:
            return "max-reward";
        case Objective::MinReward:
            return "min-reward";
    }
    return "?";
}

Objective parse_objective(std::string_view text) {
    if (text == "max-prob") return Objective::MaxProb;
    if (text == "min-prob") return Objective::MinProb;
    if (text == "max-reward") return Objective::MaxReward;
    if (text == "min-reward") return Objective::MinReward;
    throw ConfigError("unknown objective '" + std::string(text) + "'");
}

bool improves(Objective objective, double candidate, double reference, double tolerance) {
    if (candidate == reference) {
        return false;
    }
    if (is_maximizing(objective)) {
        return candidate > reference + tolerance;
    }
    return candidate < reference - tolerance;
}

double worst_value(Objective objective) {
    double const inf = std::numeric_limits<double>::infinity();
    switch (objective) {
        case Objective::MaxProb:
            return -inf;
        case Objective::MinProb:
            return inf;
        case Objective::MaxReward:
            return -inf;
        case Objective::MinReward:
            return inf;
    }
    return inf;
}

Pomdp::Pomdp(Mdp mdp, std::vector<std::string> observation_labels, std::vector<ObsId> observation_of,
             ObsId target_observation)
    : mdp_(std::move(mdp)),
      observation_labels_(std::move(observation_labels)),
      observation_of_(std::move(observation_of)),
      target_(target_observation) {
    if (observation_of_.size() != mdp_.num_states()) {
        throw ValidationError("observation labelling has " + std::to_string(observation_of_.size()) +
                              " entries for " + std::to_string(mdp_.num_states()) + " states");
    }
    if (target_ >= observation_labels_.size()) {
        throw ValidationError("target observation out of range");
    }
    states_by_obs_.resize(observation_labels_.size());
    actions_by_obs_.resize(observation_labels_.size());
    for (StateId s = 0; s < observation_of_.size(); ++s) {
        ObsId z = observation_of_[s];
        if (z >= observation_labels_.size()) {
            throw ValidationError("state " + std::to_string(s) + " has unknown observation " + std::to_string(z));
        }
        if (states_by_obs_[z].empty()) {
            for (std::size_t c = mdp_.first_choice(s); c < mdp_.end_choice(s); ++c) {
                actions_by_obs_[z].push_back(mdp_.choice_action(c));
            }
            std::sort(actions_by_obs_[z].begin(), actions_by_obs_[z].end());
        }
        states_by_obs_[z].push_back(s);
    }
}

namespace {

std::string state_name(StateId s) {
    return "state " + std::to_string(s);
}

std::string choice_name(Mdp const& mdp, StateId s, std::size_t c) {
    return "state " + std::to_string(s) + ", action '" + mdp.action_labels()[mdp.choice_action(c)] + "'";
}

}  // namespace

std::vector<Violation> validate(Pomdp const& model) {
    std::vector<Violation> violations;
    Mdp const& mdp = model.mdp();
    std::size_t const n = mdp.num_states();
    if (n == 0) {
        violations.push_back({"model has no states", "model"});
        return violations;
    }
    if (mdp.initial_state() >= n) {
        violations.push_back({"initial state out of range", "model"});
    }
    for (StateId s = 0; s < n; ++s) {
        if (mdp.num_choices(s) == 0) {
            violations.push_back({"no enabled action", state_name(s)});
            continue;
        }
        std::set<ActionId> seen;
        for (std::size_t c = mdp.first_choice(s); c < mdp.end_choice(s); ++c) {
            if (!seen.insert(mdp.choice_action(c)).second) {
                violations.push_back({"duplicate action", choice_name(mdp, s, c)});
            }
            double mass = 0.0;
            auto row = mdp.successors(c);
            for (auto const& t : row) {
                if (!(t.probability > 0.0) || t.probability > 1.0 + 1e-9) {
                    violations.push_back({"probability outside (0,1]", choice_name(mdp, s, c)});
                }
                mass += t.probability;
            }
            if (std::abs(mass - 1.0) > 1e-9) {
                std::ostringstream rule;
                rule << "mass != 1 (" << mass << ")";
                violations.push_back({rule.str(), choice_name(mdp, s, c)});
            }
            if (mdp.has_rewards() && !(mdp.choice_reward(c) >= 0.0 && std::isfinite(mdp.choice_reward(c)))) {
                violations.push_back({"reward negative or not finite", choice_name(mdp, s, c)});
            }
            if (model.is_target(s)) {
                bool self_loop = row.size() == 1 && row[0].target == s;
                if (!self_loop) {
                    violations.push_back({"target not absorbing", choice_name(mdp, s, c)});
                }
                if (mdp.has_rewards() && mdp.choice_reward(c) != 0.0) {
                    violations.push_back({"target reward not zero", choice_name(mdp, s, c)});
                }
            }
        }
        // Observation-based controllers need the same actions in equally observed states.
        std::vector<ActionId> actions(seen.begin(), seen.end());
        if (actions != model.actions_of(model.observation(s))) {
            violations.push_back({"actions differ from other states with the same observation", state_name(s)});
        }
    }
    return violations;
}

std::vector<Violation> validate(Pomdp const& model, Specification const& spec) {
    auto violations = validate(model);
    if (spec.target != model.target_observation()) {
        violations.push_back({"specification target differs from the model's target observation", "specification"});
    }
    if (is_reward(spec.objective) && !model.mdp().has_rewards()) {
        violations.push_back({"reward objective on a model without rewards", "specification"});
    }
    return violations;
}

}  // namespace saynt::models

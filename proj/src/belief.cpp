#include "saynt/belief.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "saynt/errors.h"

namespace saynt::belief {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

std::size_t require_choice(Pomdp const& pomdp, StateId s, ActionId action) {
    auto c = pomdp.mdp().choice_of(s, action);
    if (!c) {
        throw ModelError("action '" + pomdp.mdp().action_labels().at(action) + "' is disabled in state " +
                         std::to_string(s));
    }
    return *c;
}

std::string key_of(Belief const& b) {
    std::string key;
    key.reserve(4 + b.dist.size() * 12);
    auto append = [&key](auto value) { key.append(reinterpret_cast<char const*>(&value), sizeof(value)); };
    append(b.obs);
    for (auto const& t : b.dist) {
        append(t.target);
        append(static_cast<std::int64_t>(std::llround(t.probability * 1e12)));
    }
    return key;
}

}  // namespace

Belief initial_belief(Pomdp const& pomdp) {
    StateId s0 = pomdp.mdp().initial_state();
    return {pomdp.observation(s0), {{s0, 1.0}}};
}

std::vector<BeliefTransition> successors(Pomdp const& pomdp, Belief const& b, ActionId action) {
    auto const& mdp = pomdp.mdp();
    std::map<ObsId, std::map<StateId, double>> mass;
    for (auto const& entry : b.dist) {
        std::size_t c = require_choice(pomdp, entry.target, action);
        for (auto const& t : mdp.successors(c)) {
            mass[pomdp.observation(t.target)][t.target] += entry.probability * t.probability;
        }
    }
    std::vector<BeliefTransition> result;
    for (auto const& [z, states] : mass) {
        double total = 0.0;
        for (auto const& [s, p] : states) {
            total += p;
        }
        if (total <= 0.0) {
            continue;
        }
        Belief next{z, {}};
        for (auto const& [s, p] : states) {
            next.dist.push_back({s, p / total});
        }
        result.push_back({total, std::move(next)});
    }
    return result;
}

double obs_prob(Pomdp const& pomdp, Belief const& b, ActionId action, ObsId posterior) {
    auto const& mdp = pomdp.mdp();
    double total = 0.0;
    for (auto const& entry : b.dist) {
        std::size_t c = require_choice(pomdp, entry.target, action);
        for (auto const& t : mdp.successors(c)) {
            if (pomdp.observation(t.target) == posterior) {
                total += entry.probability * t.probability;
            }
        }
    }
    return total;
}

Belief belief_successor(Pomdp const& pomdp, Belief const& b, ActionId action, ObsId posterior) {
    for (auto& transition : successors(pomdp, b, action)) {
        if (transition.belief.obs == posterior) {
            return std::move(transition.belief);
        }
    }
    throw ModelError("observation " + std::to_string(posterior) + " has probability zero; successor belief undefined");
}

Cutoff cutoff_value(Belief const& b, FscValue const& values, std::size_t num_nodes, Objective objective) {
    bool const maximize = models::is_maximizing(objective);
    Cutoff best{maximize ? -inf : inf, 0};
    for (NodeId n = 0; n < num_nodes; ++n) {
        double v = 0.0;
        for (auto const& entry : b.dist) {
            double p = values.at(entry.target, n);
            v += std::isinf(p) ? p : entry.probability * p;
        }
        // Ties (up to rounding noise) keep the lower node.
        double const margin = std::isfinite(best.value) ? 1e-12 * std::max(1.0, std::abs(best.value)) : 0.0;
        bool better = maximize ? v > best.value + margin : v < best.value - margin;
        if (better || n == 0) {
            best = {v, n};
        }
    }
    return best;
}

BeliefFragment::BeliefFragment(Pomdp const& pomdp) {
    intern(pomdp, initial_belief(pomdp));
}

std::optional<std::size_t> BeliefFragment::find(Belief const& b) const {
    auto it = index_.find(key_of(b));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t BeliefFragment::intern(Pomdp const& pomdp, Belief b) {
    std::string key = key_of(b);
    auto [it, inserted] = index_.emplace(std::move(key), beliefs_.size());
    if (!inserted) {
        return it->second;
    }
    std::size_t id = beliefs_.size();
    bool const target = b.obs == pomdp.target_observation();
    beliefs_.push_back(std::move(b));
    status_.push_back(target ? Status::Target : Status::Frontier);
    explored_index_.push_back(std::numeric_limits<std::size_t>::max());
    if (!target) {
        queue_.push_back(id);
    }
    return id;
}

std::size_t BeliefFragment::explore(Pomdp const& pomdp, Budget const& budget) {
    std::size_t expanded = 0;
    while (!queue_.empty() && explored_.size() < budget.max_beliefs) {
        if (expanded % 256 == 0 && expanded > 0) {
            if (budget.deadline && std::chrono::steady_clock::now() >= *budget.deadline) {
                break;
            }
            if (budget.cancel && budget.cancel->load()) {
                break;
            }
        }
        std::size_t id = queue_.front();
        queue_.pop_front();
        status_[id] = Status::Explored;
        explored_index_[id] = explored_.size();
        explored_.push_back(id);
        std::vector<Choice> row;
        // Copy: interning may grow beliefs_ and invalidate references.
        Belief const current = beliefs_[id];
        for (ActionId action : pomdp.actions_of(current.obs)) {
            Choice choice{action, 0.0, {}};
            if (pomdp.mdp().has_rewards()) {
                for (auto const& entry : current.dist) {
                    choice.reward += entry.probability *
                                     pomdp.mdp().choice_reward(require_choice(pomdp, entry.target, action));
                }
            }
            for (auto& transition : successors(pomdp, current, action)) {
                std::size_t next = intern(pomdp, std::move(transition.belief));
                choice.successors.push_back({next, transition.probability});
            }
            row.push_back(std::move(choice));
        }
        choices_.push_back(std::move(row));
        ++expanded;
    }
    return expanded;
}

void BeliefFragment::set_cutoff(Pomdp const& pomdp, Objective objective, Fsc cutoff) {
    objective_ = objective;
    cutoff_values_ = fsc::evaluate(pomdp, cutoff, objective);
    cutoff_fsc_ = std::move(cutoff);
}

BeliefFragment unfold(Pomdp const& pomdp, Objective objective, Fsc const& cutoff, Budget const& budget) {
    BeliefFragment fragment(pomdp);
    fragment.set_cutoff(pomdp, objective, cutoff);
    fragment.explore(pomdp, budget);
    return fragment;
}

Approximation build_approximation(Pomdp const& pomdp, BeliefFragment const& fragment) {
    Objective const objective = fragment.objective();
    bool const reward = models::is_reward(objective);
    std::size_t const explored = fragment.explored().size();
    std::size_t const frontier = fragment.frontier().size();
    if (frontier > 0 && !fragment.has_cutoff()) {
        throw ModelError("belief fragment has a frontier but no cut-off controller");
    }
    Approximation result;
    result.reached = explored + frontier;
    result.failed = explored + frontier + 1;
    result.state_of_belief.assign(fragment.num_beliefs(), result.reached);
    for (std::size_t i = 0; i < explored; ++i) {
        result.state_of_belief[fragment.explored()[i]] = i;
    }
    for (std::size_t j = 0; j < frontier; ++j) {
        result.state_of_belief[fragment.frontier()[j]] = explored + j;
    }

    models::MdpBuilder builder(pomdp.mdp().action_labels(), pomdp.mdp().has_rewards());
    builder.add_states(explored + frontier + 2);
    for (std::size_t i = 0; i < explored; ++i) {
        for (auto const& choice : fragment.choices(i)) {
            models::Distribution dist;
            for (auto const& [id, p] : choice.successors) {
                dist.push_back({static_cast<StateId>(result.state_of_belief[id]), p});
            }
            builder.add_choice(static_cast<StateId>(i), choice.action, std::move(dist), choice.reward);
        }
    }
    auto const reached = static_cast<StateId>(result.reached);
    auto const failed = static_cast<StateId>(result.failed);
    for (std::size_t j = 0; j < frontier; ++j) {
        Belief const& b = fragment.belief(fragment.frontier()[j]);
        Cutoff cut = cutoff_value(b, fragment.cutoff_values(), fragment.cutoff_fsc().num_nodes(), objective);
        result.frontier_cutoff.push_back(cut);
        ActionId label = pomdp.actions_of(b.obs).front();
        auto const self = static_cast<StateId>(explored + j);
        if (reward) {
            if (std::isfinite(cut.value)) {
                builder.add_choice(self, label, {{reached, 1.0}}, cut.value);
            } else {
                builder.add_choice(self, label, {{failed, 1.0}}, 0.0);
            }
        } else {
            double v = std::clamp(cut.value, 0.0, 1.0);
            builder.add_choice(self, label, {{reached, v}, {failed, 1.0 - v}}, 0.0);
        }
    }
    ActionId sink_label = 0;
    builder.add_choice(reached, sink_label, {{reached, 1.0}}, 0.0);
    builder.add_choice(failed, sink_label, {{failed, 1.0}}, 0.0);
    builder.set_initial(static_cast<StateId>(result.state_of_belief[fragment.initial()]));
    result.mdp = std::move(builder).build();
    result.targets.assign(result.mdp.num_states(), false);
    result.targets[result.reached] = true;
    return result;
}

FragmentSolution check_fragment(Pomdp const& pomdp, BeliefFragment const& fragment) {
    FragmentSolution solution;
    solution.approximation = build_approximation(pomdp, fragment);
    Approximation const& approx = solution.approximation;
    checker::CheckResult checked = checker::check_mdp(approx.mdp, approx.targets, fragment.objective());
    solution.value = checked.values[approx.mdp.initial_state()];
    for (std::size_t i = 0; i < fragment.explored().size(); ++i) {
        solution.policy.push_back(approx.mdp.choice_action(checked.policy.choice[i]));
        solution.belief_values.push_back(checked.values[i]);
    }
    return solution;
}

Fsc extract_belief_fsc(Pomdp const& pomdp, BeliefFragment const& fragment, FragmentSolution const& solution) {
    Fsc const& inner = fragment.cutoff_fsc();
    std::size_t const explored = fragment.explored().size();
    std::size_t const num_obs = pomdp.num_observations();
    auto const offset = static_cast<NodeId>(explored);
    // Without a frontier the cut-off controller is never entered and is left out.
    bool const closed = fragment.frontier().empty() && explored > 0;
    std::size_t const inner_nodes = closed ? 0 : inner.num_nodes();
    Fsc result(explored + inner_nodes, num_obs);
    NodeId const handover = closed ? 0 : offset + inner.initial_node();

    std::vector<std::size_t> frontier_position(fragment.num_beliefs(), 0);
    for (std::size_t j = 0; j < fragment.frontier().size(); ++j) {
        frontier_position[fragment.frontier()[j]] = j;
    }
    auto node_of = [&](std::size_t id) -> NodeId {
        switch (fragment.status(id)) {
            case BeliefFragment::Status::Explored:
                return static_cast<NodeId>(fragment.explored_index(id));
            case BeliefFragment::Status::Frontier:
                return offset + solution.approximation.frontier_cutoff[frontier_position[id]].node;
            case BeliefFragment::Status::Target:
                break;
        }
        return handover;
    };

    for (NodeId b = 0; b < explored; ++b) {
        ObsId const own = fragment.belief(fragment.explored()[b]).obs;
        for (ObsId z = 0; z < num_obs; ++z) {
            result.set_action(b, z, pomdp.actions_of(z).front());
            result.set_update(b, z, {handover, {}});
        }
        ActionId const chosen = solution.policy[b];
        result.set_action(b, own, chosen);
        for (auto const& choice : fragment.choices(b)) {
            if (choice.action != chosen) {
                continue;
            }
            for (auto const& [id, p] : choice.successors) {
                result.set_next(b, own, fragment.belief(id).obs, node_of(id));
            }
        }
    }
    for (NodeId n = 0; n < inner_nodes; ++n) {
        for (ObsId z = 0; z < num_obs; ++z) {
            result.set_action(offset + n, z, inner.action(n, z));
            fsc::UpdateRow row = inner.update(n, z);
            row.fallback += offset;
            for (auto& entry : row.by_posterior) {
                entry.second += offset;
            }
            result.set_update(offset + n, z, std::move(row));
        }
    }
    result.set_initial_node(node_of(fragment.initial()));
    if (explored == 0) {
        result.set_posterior_unaware(inner.posterior_unaware());
    }
    fsc::BeliefComposite composite;
    composite.explored = explored;
    for (std::size_t id : fragment.explored()) {
        composite.explored_obs.push_back(fragment.belief(id).obs);
    }
    if (!closed) {
        fsc::FscSize inner_size = fsc::fsc_size(pomdp, inner);
        composite.inner_size_gamma = inner_size.gamma;
        composite.inner_size_delta = inner_size.delta;
    }
    result.set_composite(std::move(composite));
    return result;
}

std::vector<std::vector<ActionId>> action_sets(Pomdp const& pomdp, BeliefFragment const& fragment,
                                               FragmentSolution const& solution) {
    std::vector<std::vector<ActionId>> sets(pomdp.num_observations());
    for (std::size_t i = 0; i < fragment.explored().size(); ++i) {
        auto& set = sets[fragment.belief(fragment.explored()[i]).obs];
        if (std::find(set.begin(), set.end(), solution.policy[i]) == set.end()) {
            set.push_back(solution.policy[i]);
        }
    }
    for (auto& set : sets) {
        std::sort(set.begin(), set.end());
    }
    return sets;
}

std::string fragment_stats_json(BeliefFragment const& fragment, FragmentSolution const& solution, double wall_ms) {
    nlohmann::json stats;
    stats["explored"] = fragment.explored().size();
    stats["frontier"] = fragment.frontier().size();
    stats["value"] = solution.value;
    stats["cutoff_fsc_value"] = fragment.has_cutoff() ? fragment.cutoff_values().value : solution.value;
    stats["wall_ms"] = wall_ms;
    return stats.dump();
}

}  // namespace saynt::belief

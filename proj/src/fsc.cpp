#include "saynt/fsc.h"

#include <algorithm>
#include <deque>
#include <set>
#include <unordered_map>

#include "saynt/checker.h"
#include "saynt/errors.h"

namespace saynt::fsc {

NodeId UpdateRow::next(ObsId posterior) const {
    auto it = std::lower_bound(by_posterior.begin(), by_posterior.end(), posterior,
                               [](auto const& entry, ObsId z) { return entry.first < z; });
    if (it != by_posterior.end() && it->first == posterior) {
        return it->second;
    }
    return fallback;
}

Fsc::Fsc(std::size_t num_nodes, std::size_t num_observations, NodeId initial)
    : num_nodes_(num_nodes),
      num_obs_(num_observations),
      initial_(initial),
      gamma_(num_nodes * num_observations, 0),
      delta_(num_nodes * num_observations) {}

void Fsc::set_update(NodeId node, ObsId prior, UpdateRow row) {
    std::sort(row.by_posterior.begin(), row.by_posterior.end());
    delta_[index(node, prior)] = std::move(row);
}

void Fsc::set_next(NodeId node, ObsId prior, ObsId posterior, NodeId next) {
    auto& entries = delta_[index(node, prior)].by_posterior;
    auto it = std::lower_bound(entries.begin(), entries.end(), posterior,
                               [](auto const& entry, ObsId z) { return entry.first < z; });
    if (it != entries.end() && it->first == posterior) {
        it->second = next;
    } else {
        entries.insert(it, {posterior, next});
    }
}

Fsc memoryless(Pomdp const& pomdp, std::vector<ActionId> const& actions) {
    Fsc fsc(1, pomdp.num_observations());
    for (ObsId z = 0; z < pomdp.num_observations(); ++z) {
        fsc.set_action(0, z, actions.at(z));
    }
    fsc.set_posterior_unaware(true);
    return fsc;
}

Fsc lowest_action_fsc(Pomdp const& pomdp) {
    std::vector<ActionId> actions(pomdp.num_observations(), 0);
    for (ObsId z = 0; z < pomdp.num_observations(); ++z) {
        if (!pomdp.actions_of(z).empty()) {
            actions[z] = pomdp.actions_of(z).front();
        }
    }
    return memoryless(pomdp, actions);
}

std::vector<std::string> validate(Pomdp const& pomdp, Fsc const& fsc) {
    std::vector<std::string> problems;
    if (fsc.num_nodes() == 0) {
        problems.push_back("controller has no nodes");
        return problems;
    }
    if (fsc.num_observations() != pomdp.num_observations()) {
        problems.push_back("controller covers " + std::to_string(fsc.num_observations()) + " observations, model has " +
                           std::to_string(pomdp.num_observations()));
        return problems;
    }
    if (fsc.initial_node() >= fsc.num_nodes()) {
        problems.push_back("initial node out of range");
    }
    for (NodeId n = 0; n < fsc.num_nodes(); ++n) {
        for (ObsId z = 0; z < fsc.num_observations(); ++z) {
            auto const& allowed = pomdp.actions_of(z);
            if (!allowed.empty() && !std::binary_search(allowed.begin(), allowed.end(), fsc.action(n, z))) {
                problems.push_back("node " + std::to_string(n) + " selects disabled action " +
                                   std::to_string(fsc.action(n, z)) + " on observation " + std::to_string(z));
            }
            UpdateRow const& row = fsc.update(n, z);
            bool in_range = row.fallback < fsc.num_nodes();
            for (auto const& [post, next] : row.by_posterior) {
                in_range = in_range && next < fsc.num_nodes() && post < fsc.num_observations();
            }
            if (!in_range) {
                problems.push_back("node " + std::to_string(n) + " has an update out of range on observation " +
                                   std::to_string(z));
            }
            if (fsc.posterior_unaware() && !row.by_posterior.empty()) {
                problems.push_back("posterior-unaware controller depends on the posterior at node " +
                                   std::to_string(n) + ", observation " + std::to_string(z));
            }
        }
    }
    if (auto const& mu = fsc.memory_model()) {
        if (mu->size() != fsc.num_observations()) {
            problems.push_back("memory model does not cover every observation");
        } else {
            NodeId const n0 = fsc.initial_node();
            for (ObsId z = 0; z < mu->size(); ++z) {
                if ((*mu)[z] == 0 || (*mu)[z] > fsc.num_nodes()) {
                    problems.push_back("memory model entry out of range for observation " + std::to_string(z));
                    continue;
                }
                for (NodeId i = static_cast<NodeId>((*mu)[z]); i < fsc.num_nodes(); ++i) {
                    if (fsc.action(i, z) != fsc.action(n0, z) || !(fsc.update(i, z) == fsc.update(n0, z))) {
                        problems.push_back("node " + std::to_string(i) + " exceeds the memory of observation " +
                                           std::to_string(z) + " but differs from the initial node");
                    }
                }
            }
        }
    }
    if (auto const& composite = fsc.composite()) {
        if (composite->explored > fsc.num_nodes() || composite->explored_obs.size() != composite->explored) {
            problems.push_back("belief composite description inconsistent with node count");
        }
    }
    return problems;
}

namespace {

std::size_t require_choice(Pomdp const& pomdp, Fsc const& fsc, StateId s, NodeId n) {
    auto c = pomdp.mdp().choice_of(s, fsc.action(n, pomdp.observation(s)));
    if (!c) {
        throw ModelError("controller selects disabled action " + std::to_string(fsc.action(n, pomdp.observation(s))) +
                         " in pair (state " + std::to_string(s) + ", node " + std::to_string(n) + ")");
    }
    return *c;
}

void check_shape(Pomdp const& pomdp, Fsc const& fsc) {
    if (fsc.num_observations() != pomdp.num_observations() || fsc.num_nodes() == 0 ||
        fsc.initial_node() >= fsc.num_nodes()) {
        throw ModelError("controller does not match the model's observations");
    }
}

}  // namespace

InducedChain induced_mc(Pomdp const& pomdp, Fsc const& fsc) {
    check_shape(pomdp, fsc);
    Mdp const& mdp = pomdp.mdp();
    InducedChain result;
    std::unordered_map<std::uint64_t, StateId> index;
    auto key = [](StateId s, NodeId n) { return (static_cast<std::uint64_t>(n) << 32) | s; };
    auto lookup = [&](StateId s, NodeId n) {
        auto [it, inserted] = index.emplace(key(s, n), static_cast<StateId>(result.pairs.size()));
        if (inserted) {
            result.pairs.push_back({s, n});
        }
        return it->second;
    };
    lookup(mdp.initial_state(), fsc.initial_node());
    struct Row {
        ActionId action;
        models::Distribution dist;
        double reward;
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < result.pairs.size(); ++i) {
        auto [s, n] = result.pairs[i];
        if (pomdp.is_target(s)) {
            rows.push_back({mdp.choice_action(mdp.first_choice(s)), {{static_cast<StateId>(i), 1.0}}, 0.0});
            continue;
        }
        std::size_t c = require_choice(pomdp, fsc, s, n);
        ObsId z = pomdp.observation(s);
        models::Distribution dist;
        for (auto const& t : mdp.successors(c)) {
            NodeId next = fsc.next(n, z, pomdp.observation(t.target));
            dist.push_back({lookup(t.target, next), t.probability});
        }
        rows.push_back({mdp.choice_action(c), std::move(dist), mdp.choice_reward(c)});
    }
    models::MdpBuilder builder(mdp.action_labels(), mdp.has_rewards());
    builder.add_states(result.pairs.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        builder.add_choice(static_cast<StateId>(i), rows[i].action, std::move(rows[i].dist), rows[i].reward);
        result.targets.push_back(pomdp.is_target(result.pairs[i].first));
    }
    builder.set_initial(0);
    result.chain = std::move(builder).build();
    return result;
}

FscValue evaluate(Pomdp const& pomdp, Fsc const& fsc, Objective objective) {
    check_shape(pomdp, fsc);
    Mdp const& mdp = pomdp.mdp();
    std::size_t const num_states = pomdp.num_states();
    std::size_t const k = fsc.num_nodes();
    models::MdpBuilder builder(mdp.action_labels(), mdp.has_rewards());
    builder.add_states(num_states * k);
    checker::TargetSet targets(num_states * k, false);
    // Under a memory model, node n >= mu(z) on prior z is the initial node; such pairs share its value.
    NodeId const n0 = fsc.initial_node();
    auto canonical = [&](StateId s, NodeId n) {
        auto const& mu = fsc.memory_model();
        ObsId z = pomdp.observation(s);
        bool folded = mu && mu->size() == fsc.num_observations() && n >= (*mu)[z] &&
                      fsc.action(n, z) == fsc.action(n0, z) && fsc.update(n, z) == fsc.update(n0, z);
        return folded ? n0 : n;
    };
    for (NodeId n = 0; n < k; ++n) {
        for (StateId s = 0; s < num_states; ++s) {
            StateId self = static_cast<StateId>(n * num_states + s);
            if (pomdp.is_target(s)) {
                targets[self] = true;
                builder.add_choice(self, mdp.choice_action(mdp.first_choice(s)), {{self, 1.0}}, 0.0);
                continue;
            }
            std::size_t c = require_choice(pomdp, fsc, s, n);
            ObsId z = pomdp.observation(s);
            models::Distribution dist;
            for (auto const& t : mdp.successors(c)) {
                NodeId next = canonical(t.target, fsc.next(n, z, pomdp.observation(t.target)));
                dist.push_back({static_cast<StateId>(next * num_states + t.target), t.probability});
            }
            builder.add_choice(self, mdp.choice_action(c), std::move(dist), mdp.choice_reward(c));
        }
    }
    builder.set_initial(static_cast<StateId>(fsc.initial_node() * num_states + mdp.initial_state()));
    Mdp product = std::move(builder).build();
    FscValue result;
    result.num_states = num_states;
    result.pair_values = checker::check_mc(product, targets, objective);
    for (NodeId n = 0; n < k; ++n) {
        for (StateId s = 0; s < num_states; ++s) {
            NodeId c = canonical(s, n);
            if (c != n) {
                result.pair_values[n * num_states + s] = result.pair_values[c * num_states + s];
            }
        }
    }
    result.value = result.at(mdp.initial_state(), fsc.initial_node());
    return result;
}

double evaluate_initial(Pomdp const& pomdp, Fsc const& fsc, Objective objective) {
    InducedChain induced = induced_mc(pomdp, fsc);
    return checker::check_mc(induced.chain, induced.targets, objective)[0];
}

std::vector<ObsId> post_observations(Pomdp const& pomdp, Fsc const& fsc, NodeId node, ObsId obs) {
    Mdp const& mdp = pomdp.mdp();
    std::set<ObsId> seen;
    for (StateId s : pomdp.states_with(obs)) {
        auto c = mdp.choice_of(s, fsc.action(node, obs));
        if (!c) {
            continue;
        }
        for (auto const& t : mdp.successors(*c)) {
            seen.insert(pomdp.observation(t.target));
        }
    }
    return {seen.begin(), seen.end()};
}

FscSize fsc_size(Pomdp const& pomdp, Fsc const& fsc) {
    std::size_t const num_obs = pomdp.num_observations();
    FscSize size;
    if (auto const& composite = fsc.composite()) {
        size.gamma = composite->inner_size_gamma + composite->explored;
        size.delta = composite->inner_size_delta;
        for (NodeId b = 0; b < composite->explored; ++b) {
            size.delta += 2 * post_observations(pomdp, fsc, b, composite->explored_obs[b]).size();
        }
        return size;
    }
    if (auto const& mu = fsc.memory_model()) {
        for (ObsId z = 0; z < num_obs; ++z) {
            size.gamma += (*mu)[z];
            if (fsc.posterior_unaware()) {
                size.delta += (*mu)[z];
            } else {
                for (NodeId i = 0; i < (*mu)[z]; ++i) {
                    size.delta += 2 * post_observations(pomdp, fsc, i, z).size();
                }
            }
        }
        return size;
    }
    size.gamma = fsc.num_nodes() * num_obs;
    if (fsc.posterior_unaware()) {
        size.delta = fsc.num_nodes() * num_obs;
        return size;
    }
    for (NodeId n = 0; n < fsc.num_nodes(); ++n) {
        for (ObsId z = 0; z < num_obs; ++z) {
            size.delta += 2 * post_observations(pomdp, fsc, n, z).size();
        }
    }
    return size;
}

std::string to_dot(Pomdp const& pomdp, Fsc const& fsc) {
    std::string out = "digraph fsc {\n";
    out += "  init [shape=point];\n  init -> n" + std::to_string(fsc.initial_node()) + ";\n";
    auto const& actions = pomdp.mdp().action_labels();
    auto const& obs = pomdp.observation_labels();
    for (NodeId n = 0; n < fsc.num_nodes(); ++n) {
        out += "  n" + std::to_string(n) + ";\n";
    }
    for (NodeId n = 0; n < fsc.num_nodes(); ++n) {
        for (ObsId z = 0; z < pomdp.num_observations(); ++z) {
            if (fsc.composite() && n < fsc.composite()->explored && fsc.composite()->explored_obs[n] != z) {
                continue;
            }
            for (ObsId post : post_observations(pomdp, fsc, n, z)) {
                out += "  n" + std::to_string(n) + " -> n" + std::to_string(fsc.next(n, z, post)) + " [label=\"" +
                       obs[z] + "/" + actions[fsc.action(n, z)] + ", " + obs[post] + "\"];\n";
            }
        }
    }
    out += "}\n";
    return out;
}

}  // namespace saynt::fsc

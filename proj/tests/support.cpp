#include "support.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <numeric>

namespace saynt::testing {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

std::size_t uniform(std::mt19937& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Solves A x = b in place by Gaussian elimination with partial pivoting.
std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
    std::size_t const n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) {
                pivot = r;
            }
        }
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col || a[r][col] == 0.0) {
                continue;
            }
            double factor = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = b[i] / a[i][i];
    }
    return x;
}

/// States with a path (positive-probability edges) into `goal`, never passing through `blocked`.
std::vector<bool> backward(std::vector<std::vector<double>> const& rows, std::vector<bool> goal,
                           std::vector<bool> const& blocked) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t s = 0; s < rows.size(); ++s) {
            if (goal[s] || blocked[s]) {
                continue;
            }
            for (std::size_t t = 0; t < rows.size(); ++t) {
                if (rows[s][t] > 0.0 && goal[t]) {
                    goal[s] = true;
                    changed = true;
                    break;
                }
            }
        }
    }
    return goal;
}

}  // namespace

bool close(double a, double b, double tolerance) {
    if (std::isinf(a) || std::isinf(b)) {
        return a == b;
    }
    return std::abs(a - b) <= tolerance;
}

models::Pomdp random_pomdp(std::mt19937& rng, RandomShape const& shape) {
    std::size_t const n = uniform(rng, shape.min_states, shape.max_states);
    std::size_t const num_obs = uniform(rng, 2, std::min(shape.max_observations, n));
    models::ObsId const target_obs = static_cast<models::ObsId>(num_obs - 1);

    std::vector<models::ObsId> obs(n);
    std::size_t const target_state = shape.acyclic ? n - 1 : uniform(rng, 1, n - 1);
    std::vector<models::StateId> others;
    for (models::StateId s = 0; s < n; ++s) {
        if (s != target_state) {
            others.push_back(s);
        }
    }
    obs[target_state] = target_obs;
    // Every non-target observation gets at least one state.
    std::vector<models::ObsId> pool;
    for (models::ObsId z = 0; z + 1 < num_obs; ++z) {
        pool.push_back(z);
    }
    while (pool.size() < others.size()) {
        pool.push_back(static_cast<models::ObsId>(uniform(rng, 0, num_obs - 2)));
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t i = 0; i < others.size(); ++i) {
        obs[others[i]] = pool[i];
    }

    std::vector<std::string> labels;
    for (std::size_t a = 0; a < shape.max_actions; ++a) {
        labels.push_back("a" + std::to_string(a));
    }
    std::vector<std::vector<models::ActionId>> enabled(num_obs);
    for (models::ObsId z = 0; z + 1 < num_obs; ++z) {
        for (models::ActionId a = 0; a < shape.max_actions; ++a) {
            if (uniform(rng, 0, 2) > 0) {
                enabled[z].push_back(a);
            }
        }
        if (enabled[z].empty()) {
            enabled[z].push_back(static_cast<models::ActionId>(uniform(rng, 0, shape.max_actions - 1)));
        }
    }
    enabled[target_obs] = {0};

    models::MdpBuilder builder(labels, shape.rewards);
    builder.add_states(n);
    for (models::StateId s = 0; s < n; ++s) {
        if (obs[s] == target_obs) {
            builder.add_choice(s, 0, {{s, 1.0}}, 0.0);
            continue;
        }
        std::vector<models::StateId> candidates;
        for (models::StateId t = shape.acyclic ? s + 1 : 0; t < n; ++t) {
            candidates.push_back(t);
        }
        for (models::ActionId a : enabled[obs[s]]) {
            std::shuffle(candidates.begin(), candidates.end(), rng);
            std::size_t k = uniform(rng, 1, std::min<std::size_t>(3, candidates.size()));
            std::vector<double> weights;
            for (std::size_t i = 0; i < k; ++i) {
                weights.push_back(static_cast<double>(uniform(rng, 1, 4)));
            }
            double total = std::accumulate(weights.begin(), weights.end(), 0.0);
            models::Distribution dist;
            for (std::size_t i = 0; i < k; ++i) {
                dist.push_back({candidates[i], weights[i] / total});
            }
            builder.add_choice(s, a, std::move(dist), static_cast<double>(uniform(rng, 0, 3)));
        }
    }
    builder.set_initial(others.front());
    std::vector<std::string> obs_labels;
    for (std::size_t z = 0; z < num_obs; ++z) {
        obs_labels.push_back(z == target_obs ? "goal" : "o" + std::to_string(z));
    }
    return models::Pomdp(std::move(builder).build(), obs_labels, obs, target_obs);
}

fsc::Fsc random_fsc(std::mt19937& rng, models::Pomdp const& pomdp, std::size_t nodes, bool posterior_unaware) {
    fsc::Fsc result(nodes, pomdp.num_observations());
    for (fsc::NodeId n = 0; n < nodes; ++n) {
        for (models::ObsId z = 0; z < pomdp.num_observations(); ++z) {
            auto const& actions = pomdp.actions_of(z);
            result.set_action(n, z, actions[uniform(rng, 0, actions.size() - 1)]);
            fsc::UpdateRow row;
            row.fallback = static_cast<fsc::NodeId>(uniform(rng, 0, nodes - 1));
            if (!posterior_unaware) {
                for (models::ObsId post = 0; post < pomdp.num_observations(); ++post) {
                    row.by_posterior.push_back({post, static_cast<fsc::NodeId>(uniform(rng, 0, nodes - 1))});
                }
            }
            result.set_update(n, z, std::move(row));
        }
    }
    result.set_posterior_unaware(posterior_unaware);
    return result;
}

std::vector<double> dense_chain_values(std::vector<std::vector<double>> const& rows, std::vector<double> const& reward,
                                       std::vector<bool> const& targets, bool with_reward) {
    std::size_t const n = rows.size();
    std::vector<bool> const none(n, false);
    std::vector<bool> can_reach = backward(rows, targets, none);
    std::vector<bool> unknown(n, false);
    std::vector<double> x(n, 0.0);
    if (!with_reward) {
        for (std::size_t s = 0; s < n; ++s) {
            if (targets[s]) {
                x[s] = 1.0;
            } else {
                unknown[s] = can_reach[s];
            }
        }
    } else {
        std::vector<bool> stuck(n);
        for (std::size_t s = 0; s < n; ++s) {
            stuck[s] = !can_reach[s];
        }
        std::vector<bool> diverging = backward(rows, stuck, targets);
        for (std::size_t s = 0; s < n; ++s) {
            if (targets[s]) {
                x[s] = 0.0;
            } else if (diverging[s]) {
                x[s] = inf;
            } else {
                unknown[s] = true;
            }
        }
    }
    std::vector<std::size_t> index;
    for (std::size_t s = 0; s < n; ++s) {
        if (unknown[s]) {
            index.push_back(s);
        }
    }
    std::size_t const m = index.size();
    std::vector<std::vector<double>> a(m, std::vector<double>(m, 0.0));
    std::vector<double> b(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t s = index[i];
        a[i][i] += 1.0;
        if (with_reward) {
            b[i] += reward[s];
        }
        for (std::size_t t = 0; t < n; ++t) {
            if (rows[s][t] == 0.0) {
                continue;
            }
            auto pos = std::find(index.begin(), index.end(), t);
            if (pos != index.end()) {
                a[i][pos - index.begin()] -= rows[s][t];
            } else {
                b[i] += rows[s][t] * x[t];
            }
        }
    }
    std::vector<double> solution = m > 0 ? solve_dense(a, b) : std::vector<double>{};
    for (std::size_t i = 0; i < m; ++i) {
        x[index[i]] = solution[i];
    }
    return x;
}

std::vector<double> policy_values(models::Mdp const& mdp, std::vector<std::size_t> const& choice,
                                  std::vector<bool> const& targets, models::Objective objective) {
    std::size_t const n = mdp.num_states();
    std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
    std::vector<double> reward(n, 0.0);
    for (models::StateId s = 0; s < n; ++s) {
        for (auto const& t : mdp.successors(choice[s])) {
            rows[s][t.target] += t.probability;
        }
        reward[s] = mdp.choice_reward(choice[s]);
    }
    return dense_chain_values(rows, reward, targets, models::is_reward(objective));
}

std::vector<double> brute_force_mdp(models::Mdp const& mdp, std::vector<bool> const& targets,
                                    models::Objective objective) {
    std::size_t const n = mdp.num_states();
    bool const maximize = models::is_maximizing(objective);
    std::vector<double> best(n, maximize ? -inf : inf);
    std::vector<std::size_t> choice(n);
    for (models::StateId s = 0; s < n; ++s) {
        choice[s] = mdp.first_choice(s);
    }
    while (true) {
        auto values = policy_values(mdp, choice, targets, objective);
        for (std::size_t s = 0; s < n; ++s) {
            best[s] = maximize ? std::max(best[s], values[s]) : std::min(best[s], values[s]);
        }
        std::size_t s = 0;
        while (s < n) {
            if (++choice[s] < mdp.end_choice(static_cast<models::StateId>(s))) {
                break;
            }
            choice[s] = mdp.first_choice(static_cast<models::StateId>(s));
            ++s;
        }
        if (s == n) {
            break;
        }
    }
    return best;
}

std::vector<double> oracle_pair_values(models::Pomdp const& pomdp, fsc::Fsc const& fsc, models::Objective objective) {
    auto const& mdp = pomdp.mdp();
    std::size_t const ns = pomdp.num_states();
    std::size_t const n = ns * fsc.num_nodes();
    std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
    std::vector<double> reward(n, 0.0);
    std::vector<bool> targets(n, false);
    for (fsc::NodeId node = 0; node < fsc.num_nodes(); ++node) {
        for (models::StateId s = 0; s < ns; ++s) {
            std::size_t self = node * ns + s;
            if (pomdp.is_target(s)) {
                targets[self] = true;
                rows[self][self] = 1.0;
                continue;
            }
            models::ObsId z = pomdp.observation(s);
            std::size_t c = *mdp.choice_of(s, fsc.action(node, z));
            reward[self] = mdp.choice_reward(c);
            for (auto const& t : mdp.successors(c)) {
                fsc::NodeId next = fsc.next(node, z, pomdp.observation(t.target));
                rows[self][next * ns + t.target] += t.probability;
            }
        }
    }
    return dense_chain_values(rows, reward, targets, models::is_reward(objective));
}

double oracle_fsc_value(models::Pomdp const& pomdp, fsc::Fsc const& fsc, models::Objective objective) {
    auto values = oracle_pair_values(pomdp, fsc, objective);
    return values[fsc.initial_node() * pomdp.num_states() + pomdp.mdp().initial_state()];
}

void enumerate_family(inductive::FamilySpace const& family,
                      std::function<void(std::vector<std::uint32_t> const&)> const& visit) {
    std::size_t const holes = family.options.size();
    std::vector<std::size_t> digit(holes, 0);
    std::vector<std::uint32_t> assignment(holes);
    while (true) {
        for (std::size_t h = 0; h < holes; ++h) {
            assignment[h] = family.options[h][digit[h]];
        }
        visit(assignment);
        std::size_t h = 0;
        while (h < holes && ++digit[h] == family.options[h].size()) {
            digit[h++] = 0;
        }
        if (h == holes) {
            return;
        }
    }
}

double brute_force_family(models::Pomdp const& pomdp, inductive::FamilySpace const& family,
                          models::Objective objective) {
    bool const maximize = models::is_maximizing(objective);
    double best = maximize ? -inf : inf;
    enumerate_family(family, [&](std::vector<std::uint32_t> const& assignment) {
        double v = oracle_fsc_value(pomdp, inductive::realize(pomdp, *family.space, assignment), objective);
        best = maximize ? std::max(best, v) : std::min(best, v);
    });
    return best;
}

double exact_belief_value(models::Pomdp const& pomdp, std::vector<std::pair<models::StateId, double>> const& belief,
                          models::Objective objective) {
    auto const& mdp = pomdp.mdp();
    models::ObsId const z = pomdp.observation(belief.front().first);
    bool const reward = models::is_reward(objective);
    if (z == pomdp.target_observation()) {
        return reward ? 0.0 : 1.0;
    }
    bool const maximize = models::is_maximizing(objective);
    double best = maximize ? -inf : inf;
    for (models::ActionId a : pomdp.actions_of(z)) {
        double value = 0.0;
        std::map<models::ObsId, std::map<models::StateId, double>> next;
        for (auto const& [s, p] : belief) {
            std::size_t c = *mdp.choice_of(s, a);
            if (reward) {
                value += p * mdp.choice_reward(c);
            }
            for (auto const& t : mdp.successors(c)) {
                next[pomdp.observation(t.target)][t.target] += p * t.probability;
            }
        }
        for (auto const& [post, states] : next) {
            double mass = 0.0;
            for (auto const& [t, p] : states) {
                mass += p;
            }
            std::vector<std::pair<models::StateId, double>> successor;
            for (auto const& [t, p] : states) {
                successor.push_back({t, p / mass});
            }
            double v = exact_belief_value(pomdp, successor, objective);
            value += std::isinf(v) ? v : mass * v;
        }
        best = maximize ? std::max(best, value) : std::min(best, value);
    }
    return best;
}

double exact_belief_value(models::Pomdp const& pomdp, models::Objective objective) {
    return exact_belief_value(pomdp, {{pomdp.mdp().initial_state(), 1.0}}, objective);
}

fsc::Fsc random_mu_fsc(std::mt19937& rng, models::Pomdp const& pomdp, std::size_t nodes, bool unaware) {
    auto controller = testing::random_fsc(rng, pomdp, nodes, unaware);
    std::vector<std::size_t> mu(pomdp.num_observations());
    for (models::ObsId z = 0; z < mu.size(); ++z) {
        mu[z] = std::uniform_int_distribution<std::size_t>(1, nodes)(rng);
        for (fsc::NodeId i = static_cast<fsc::NodeId>(mu[z]); i < nodes; ++i) {
            controller.set_action(i, z, controller.action(0, z));
            controller.set_update(i, z, controller.update(0, z));
        }
    }
    controller.set_memory_model(mu);
    return controller;
}

/// Explicit adjacency lists per (node, prior): the (posterior, next node) pairs some transition can produce.
namespace {

std::map<std::pair<fsc::NodeId, models::ObsId>, std::set<std::pair<models::ObsId, fsc::NodeId>>>
adjacency(models::Pomdp const& pomdp, fsc::Fsc const& controller) {
    std::map<std::pair<fsc::NodeId, models::ObsId>, std::set<std::pair<models::ObsId, fsc::NodeId>>> lists;
    auto const& mdp = pomdp.mdp();
    for (fsc::NodeId n = 0; n < controller.num_nodes(); ++n) {
        for (models::StateId s = 0; s < pomdp.num_states(); ++s) {
            models::ObsId z = pomdp.observation(s);
            auto& list = lists[{n, z}];
            auto c = mdp.choice_of(s, controller.action(n, z));
            for (auto const& t : mdp.successors(*c)) {
                models::ObsId post = pomdp.observation(t.target);
                list.insert({post, controller.next(n, z, post)});
            }
        }
    }
    return lists;
}

}  // namespace

fsc::FscSize oracle_size(models::Pomdp const& pomdp, fsc::Fsc const& controller) {
    auto lists = adjacency(pomdp, controller);
    std::size_t const num_obs = pomdp.num_observations();
    fsc::FscSize size;
    auto counted = [&](fsc::NodeId n, models::ObsId z) {
        auto it = lists.find({n, z});
        return it == lists.end() ? std::size_t{0} : 2 * it->second.size();
    };
    if (auto const& mu = controller.memory_model()) {
        for (models::ObsId z = 0; z < num_obs; ++z) {
            size.gamma += (*mu)[z];
            for (fsc::NodeId i = 0; i < (*mu)[z]; ++i) {
                size.delta += controller.posterior_unaware() ? 1 : counted(i, z);
            }
        }
        return size;
    }
    size.gamma = controller.num_nodes() * num_obs;
    for (fsc::NodeId n = 0; n < controller.num_nodes(); ++n) {
        for (models::ObsId z = 0; z < num_obs; ++z) {
            size.delta += controller.posterior_unaware() ? 1 : counted(n, z);
        }
    }
    return size;
}

}  // namespace saynt::testing

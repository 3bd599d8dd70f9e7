#include "saynt/checker.h"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <deque>
#include <limits>

#include "saynt/errors.h"

namespace saynt::checker {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

using StateSet = std::vector<bool>;
using ChoiceMask = std::vector<bool>;

/// For every state t the choices that can move into t, plus the owner state of every choice.
struct Graph {
    std::vector<std::size_t> start;
    std::vector<std::size_t> choices;
    std::vector<StateId> owner;
};

Graph reverse_graph(Mdp const& mdp) {
    Graph g;
    std::size_t const n = mdp.num_states();
    g.owner.resize(mdp.num_choices());
    std::vector<std::size_t> count(n + 1, 0);
    for (StateId s = 0; s < n; ++s) {
        for (std::size_t c = mdp.first_choice(s); c < mdp.end_choice(s); ++c) {
            g.owner[c] = s;
            for (auto const& t : mdp.successors(c)) {
                ++count[t.target + 1];
            }
        }
    }
    for (std::size_t i = 1; i <= n; ++i) {
        count[i] += count[i - 1];
    }
    g.start = count;
    g.choices.resize(count[n]);
    for (std::size_t c = 0; c < mdp.num_choices(); ++c) {
        for (auto const& t : mdp.successors(c)) {
            g.choices[count[t.target]++] = c;
        }
    }
    return g;
}

/// States with an allowed choice path into `goal` that never enters `avoid`.
StateSet exists_reach(Mdp const& mdp, Graph const& g, StateSet const& goal, ChoiceMask const& allowed,
                      StateSet const* avoid = nullptr) {
    StateSet result = goal;
    std::deque<StateId> queue;
    for (StateId s = 0; s < goal.size(); ++s) {
        if (goal[s]) {
            queue.push_back(s);
        }
    }
    while (!queue.empty()) {
        StateId t = queue.front();
        queue.pop_front();
        for (std::size_t i = g.start[t]; i < g.start[t + 1]; ++i) {
            std::size_t c = g.choices[i];
            StateId s = g.owner[c];
            if (result[s] || !allowed[c] || (avoid && (*avoid)[s])) {
                continue;
            }
            result[s] = true;
            queue.push_back(s);
        }
    }
    (void)mdp;
    return result;
}

/// States from which every allowed choice sequence reaches `goal` with positive probability.
StateSet forall_reach(Mdp const& mdp, Graph const& g, StateSet const& goal, ChoiceMask const& allowed) {
    std::size_t const n = mdp.num_states();
    StateSet result = goal;
    std::vector<std::size_t> remaining(n, 0);
    for (StateId s = 0; s < n; ++s) {
        for (std::size_t c = mdp.first_choice(s); c < mdp.end_choice(s); ++c) {
            remaining[s] += allowed[c] ? 1 : 0;
        }
    }
    ChoiceMask hit(mdp.num_choices(), false);
    std::deque<StateId> queue;
    for (StateId s = 0; s < n; ++s) {
        if (goal[s]) {
            queue.push_back(s);
        }
    }
    while (!queue.empty()) {
        StateId t = queue.front();
        queue.pop_front();
        for (std::size_t i = g.start[t]; i < g.start[t + 1]; ++i) {
            std::size_t c = g.choices[i];
            StateId s = g.owner[c];
            if (result[s] || !allowed[c] || hit[c]) {
                continue;
            }
            hit[c] = true;
            if (--remaining[s] == 0) {
                result[s] = true;
                queue.push_back(s);
            }
        }
    }
    return result;
}

bool support_within(Mdp const& mdp, std::size_t c, StateSet const& set) {
    for (auto const& t : mdp.successors(c)) {
        if (!set[t.target]) {
            return false;
        }
    }
    return true;
}

/// States where some policy reaches `goal` almost surely.
StateSet prob1_exists(Mdp const& mdp, Graph const& g, StateSet const& goal, ChoiceMask const& allowed) {
    std::size_t const n = mdp.num_states();
    StateSet region(n, true);
    while (true) {
        ChoiceMask inside(mdp.num_choices(), false);
        for (std::size_t c = 0; c < mdp.num_choices(); ++c) {
            inside[c] = allowed[c] && support_within(mdp, c, region);
        }
        StateSet next = exists_reach(mdp, g, goal, inside);
        for (StateId s = 0; s < n; ++s) {
            next[s] = next[s] && region[s];
        }
        if (next == region) {
            return region;
        }
        region = std::move(next);
    }
}

/// Breadth-first distance (in choices) to `goal` using allowed choices; max() where unreachable.
std::vector<std::size_t> attractor_layers(Mdp const& mdp, Graph const& g, StateSet const& goal,
                                          ChoiceMask const& allowed) {
    std::size_t const unreachable = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> layer(mdp.num_states(), unreachable);
    std::deque<StateId> queue;
    for (StateId s = 0; s < goal.size(); ++s) {
        if (goal[s]) {
            layer[s] = 0;
            queue.push_back(s);
        }
    }
    while (!queue.empty()) {
        StateId t = queue.front();
        queue.pop_front();
        for (std::size_t i = g.start[t]; i < g.start[t + 1]; ++i) {
            std::size_t c = g.choices[i];
            StateId s = g.owner[c];
            if (layer[s] != unreachable || !allowed[c]) {
                continue;
            }
            layer[s] = layer[t] + 1;
            queue.push_back(s);
        }
    }
    return layer;
}

bool progresses(Mdp const& mdp, std::size_t c, std::vector<std::size_t> const& layer, StateId s) {
    for (auto const& t : mdp.successors(c)) {
        if (layer[t.target] < layer[s]) {
            return true;
        }
    }
    return false;
}

/// Lowest allowed choice of `s` that moves one step closer to the goal of `layer`.
std::size_t progressing_choice(Mdp const& mdp, StateId s, ChoiceMask const& allowed,
                               std::vector<std::size_t> const& layer) {
    for (std::size_t c = mdp.first_choice(s); c < mdp.end_choice(s); ++c) {
        if (allowed[c] && progresses(mdp, c, layer, s)) {
            return c;
        }
    }
    return mdp.first_choice(s);
}

/// Lowest allowed choice of `s` whose support stays inside `set`.
std::size_t staying_choice(Mdp const& mdp, StateId s, ChoiceMask const& allowed, StateSet const& set) {
    for (std::size_t c = mdp.first_choice(s); c < mdp.end_choice(s); ++c) {
        if (allowed[c] && support_within(mdp, c, set)) {
            return c;
        }
    }
    return mdp.first_choice(s);
}

double q_value(Mdp const& mdp, std::size_t c, std::vector<double> const& x, bool reward) {
    double value = reward ? mdp.choice_reward(c) : 0.0;
    for (auto const& t : mdp.successors(c)) {
        value += t.probability * x[t.target];
    }
    return value;
}

double tolerance_for(double value) {
    return 1e-10 * std::max(1.0, std::abs(value));
}

/// Exact values of the Markov chain that takes `choice[s]` in every state.
std::vector<double> evaluate_chain(Mdp const& mdp, std::vector<std::size_t> const& choice, TargetSet const& targets,
                                   bool reward) {
    std::size_t const n = mdp.num_states();
    Graph g;
    {
        // Reverse graph restricted to the chosen choices.
        std::vector<std::size_t> count(n + 1, 0);
        for (StateId s = 0; s < n; ++s) {
            for (auto const& t : mdp.successors(choice[s])) {
                ++count[t.target + 1];
            }
        }
        for (std::size_t i = 1; i <= n; ++i) {
            count[i] += count[i - 1];
        }
        g.start = count;
        g.choices.resize(count[n]);
        g.owner.resize(mdp.num_choices(), 0);
        for (StateId s = 0; s < n; ++s) {
            g.owner[choice[s]] = s;
            for (auto const& t : mdp.successors(choice[s])) {
                g.choices[count[t.target]++] = choice[s];
            }
        }
    }
    ChoiceMask chosen(mdp.num_choices(), false);
    for (StateId s = 0; s < n; ++s) {
        chosen[choice[s]] = true;
    }
    StateSet can_reach = exists_reach(mdp, g, targets, chosen);

    std::vector<double> x(n, 0.0);
    StateSet unknown(n, false);
    if (!reward) {
        for (StateId s = 0; s < n; ++s) {
            if (targets[s]) {
                x[s] = 1.0;
            } else if (can_reach[s]) {
                unknown[s] = true;
            }
        }
    } else {
        StateSet stuck(n, false);
        for (StateId s = 0; s < n; ++s) {
            stuck[s] = !can_reach[s];
        }
        StateSet diverging = exists_reach(mdp, g, stuck, chosen, &targets);
        for (StateId s = 0; s < n; ++s) {
            if (targets[s]) {
                x[s] = 0.0;
            } else if (diverging[s]) {
                x[s] = inf;
            } else {
                unknown[s] = true;
            }
        }
    }

    std::vector<std::ptrdiff_t> index(n, -1);
    std::ptrdiff_t m = 0;
    for (StateId s = 0; s < n; ++s) {
        if (unknown[s]) {
            index[s] = m++;
        }
    }
    if (m == 0) {
        return x;
    }
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (StateId s = 0; s < n; ++s) {
        if (!unknown[s]) {
            continue;
        }
        std::ptrdiff_t row = index[s];
        triplets.emplace_back(row, row, 1.0);
        if (reward) {
            rhs[row] += mdp.choice_reward(choice[s]);
        }
        for (auto const& t : mdp.successors(choice[s])) {
            if (unknown[t.target]) {
                triplets.emplace_back(row, index[t.target], -t.probability);
            } else {
                rhs[row] += t.probability * x[t.target];
            }
        }
    }
    Eigen::SparseMatrix<double> system(m, m);
    system.setFromTriplets(triplets.begin(), triplets.end());
    system.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    solver.compute(system);
    if (solver.info() != Eigen::Success) {
        throw ModelError("singular linear system while evaluating a Markov chain");
    }
    Eigen::VectorXd solution = solver.solve(rhs);
    for (StateId s = 0; s < n; ++s) {
        if (unknown[s]) {
            double v = solution[index[s]];
            x[s] = reward ? std::max(0.0, v) : std::clamp(v, 0.0, 1.0);
        }
    }
    return x;
}

void check_targets(Mdp const& mdp, TargetSet const& targets, Objective objective) {
    if (targets.size() != mdp.num_states()) {
        throw ModelError("target set has " + std::to_string(targets.size()) + " entries for " +
                         std::to_string(mdp.num_states()) + " states");
    }
    if (models::is_reward(objective) && !mdp.has_rewards()) {
        throw ConfigError("reward objective on a model without rewards");
    }
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        if (mdp.num_choices(s) == 0) {
            throw ModelError("state " + std::to_string(s) + " has no enabled action");
        }
    }
}

/// Qualitative analysis: states with a fixed value and the choices allowed for the quantitative part.
struct Qualitative {
    StateSet maybe;
    std::vector<double> fixed;
    ChoiceMask allowed;
    std::vector<std::size_t> fixed_choice;
};

Qualitative qualitative(Mdp const& mdp, Graph const& g, TargetSet const& targets, Objective objective) {
    std::size_t const n = mdp.num_states();
    Qualitative q;
    q.maybe.assign(n, false);
    q.fixed.assign(n, 0.0);
    q.allowed.assign(mdp.num_choices(), true);
    q.fixed_choice.assign(n, 0);
    ChoiceMask const all(mdp.num_choices(), true);
    for (StateId s = 0; s < n; ++s) {
        q.fixed_choice[s] = mdp.first_choice(s);
    }

    switch (objective) {
        case Objective::MaxProb: {
            StateSet positive = exists_reach(mdp, g, targets, all);
            StateSet sure = prob1_exists(mdp, g, targets, all);
            ChoiceMask inside(mdp.num_choices(), false);
            for (std::size_t c = 0; c < mdp.num_choices(); ++c) {
                inside[c] = support_within(mdp, c, sure);
            }
            auto layer = attractor_layers(mdp, g, targets, inside);
            for (StateId s = 0; s < n; ++s) {
                if (targets[s] || sure[s]) {
                    q.fixed[s] = 1.0;
                    if (!targets[s]) {
                        q.fixed_choice[s] = progressing_choice(mdp, s, inside, layer);
                    }
                } else if (!positive[s]) {
                    q.fixed[s] = 0.0;
                } else {
                    q.maybe[s] = true;
                }
            }
            break;
        }
        case Objective::MinProb: {
            StateSet positive = forall_reach(mdp, g, targets, all);
            StateSet zero(n);
            for (StateId s = 0; s < n; ++s) {
                zero[s] = !positive[s];
            }
            StateSet escape = exists_reach(mdp, g, zero, all, &targets);
            for (StateId s = 0; s < n; ++s) {
                if (targets[s]) {
                    q.fixed[s] = 1.0;
                } else if (zero[s]) {
                    q.fixed[s] = 0.0;
                    q.fixed_choice[s] = staying_choice(mdp, s, all, zero);
                } else if (!escape[s]) {
                    q.fixed[s] = 1.0;
                } else {
                    q.maybe[s] = true;
                }
            }
            break;
        }
        case Objective::MaxReward: {
            StateSet positive = forall_reach(mdp, g, targets, all);
            StateSet zero(n);
            for (StateId s = 0; s < n; ++s) {
                zero[s] = !positive[s];
            }
            StateSet escape = exists_reach(mdp, g, zero, all, &targets);
            auto layer = attractor_layers(mdp, g, zero, all);
            for (StateId s = 0; s < n; ++s) {
                if (targets[s]) {
                    q.fixed[s] = 0.0;
                } else if (zero[s]) {
                    q.fixed[s] = inf;
                    q.fixed_choice[s] = staying_choice(mdp, s, all, zero);
                } else if (escape[s]) {
                    q.fixed[s] = inf;
                    q.fixed_choice[s] = progressing_choice(mdp, s, all, layer);
                } else {
                    q.maybe[s] = true;
                }
            }
            break;
        }
        case Objective::MinReward: {
            StateSet sure = prob1_exists(mdp, g, targets, all);
            for (std::size_t c = 0; c < mdp.num_choices(); ++c) {
                q.allowed[c] = support_within(mdp, c, sure);
            }
            for (StateId s = 0; s < n; ++s) {
                if (targets[s]) {
                    q.fixed[s] = 0.0;
                } else if (!sure[s]) {
                    q.fixed[s] = inf;
                } else {
                    q.maybe[s] = true;
                }
            }
            break;
        }
    }
    return q;
}

}  // namespace

std::vector<double> check_mc(Mdp const& mc, TargetSet const& targets, Objective objective) {
    check_targets(mc, targets, objective);
    if (!mc.is_markov_chain()) {
        throw ModelError("check_mc requires exactly one choice per state");
    }
    std::vector<std::size_t> choice(mc.num_states());
    for (StateId s = 0; s < mc.num_states(); ++s) {
        choice[s] = mc.first_choice(s);
    }
    return evaluate_chain(mc, choice, targets, models::is_reward(objective));
}

std::vector<double> induced_values(Mdp const& mdp, MemorylessPolicy const& policy, TargetSet const& targets,
                                   Objective objective) {
    check_targets(mdp, targets, objective);
    if (policy.choice.size() != mdp.num_states()) {
        throw ModelError("policy does not cover every state");
    }
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        if (policy.choice[s] < mdp.first_choice(s) || policy.choice[s] >= mdp.end_choice(s)) {
            throw ModelError("policy selects a choice outside state " + std::to_string(s));
        }
    }
    return evaluate_chain(mdp, policy.choice, targets, models::is_reward(objective));
}

double bellman_residual(Mdp const& mdp, TargetSet const& targets, Objective objective,
                        std::vector<double> const& values) {
    bool const maximize = models::is_maximizing(objective);
    bool const reward = models::is_reward(objective);
    double residual = 0.0;
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        if (targets[s] || !std::isfinite(values[s])) {
            continue;
        }
        double best = maximize ? -inf : inf;
        for (std::size_t c = mdp.first_choice(s); c < mdp.end_choice(s); ++c) {
            double q = q_value(mdp, c, values, reward);
            best = maximize ? std::max(best, q) : std::min(best, q);
        }
        if (std::isfinite(best)) {
            residual = std::max(residual, std::abs(best - values[s]));
        }
    }
    return residual;
}

CheckResult check_mdp(Mdp const& mdp, TargetSet const& targets, Objective objective, SolverOptions const& options) {
    check_targets(mdp, targets, objective);
    std::size_t const n = mdp.num_states();
    bool const maximize = models::is_maximizing(objective);
    bool const reward = models::is_reward(objective);
    auto better = [maximize](double a, double b) { return maximize ? a > b : a < b; };

    Graph const g = reverse_graph(mdp);
    Qualitative q = qualitative(mdp, g, targets, objective);

    CheckResult result;
    std::vector<double>& x = result.values;
    x = q.fixed;

    std::vector<StateId> maybe;
    for (StateId s = 0; s < n; ++s) {
        if (q.maybe[s]) {
            maybe.push_back(s);
        }
    }

    // Gauss-Seidel value iteration from below.
    while (result.sweeps < options.max_sweeps && !maybe.empty()) {
        ++result.sweeps;
        double delta = 0.0;
        for (StateId s : maybe) {
            double best = maximize ? -inf : inf;
            for (std::size_t c = mdp.first_choice(s); c < mdp.end_choice(s); ++c) {
                if (!q.allowed[c]) {
                    continue;
                }
                double v = q_value(mdp, c, x, reward);
                if (better(v, best)) {
                    best = v;
                }
            }
            delta = std::max(delta, std::abs(best - x[s]));
            x[s] = best;
        }
        if (delta <= options.precision) {
            break;
        }
    }

    // Greedy policy; ties go to the lowest choice. For expected-reward minimisation the greedy choice
    // is additionally required to move towards the target so that the starting policy is proper.
    std::vector<std::size_t> choice = q.fixed_choice;
    std::vector<std::size_t> layer;
    if (objective == Objective::MinReward) {
        layer = attractor_layers(mdp, g, targets, q.allowed);
    }
    for (StateId s : maybe) {
        double best = maximize ? -inf : inf;
        for (std::size_t c = mdp.first_choice(s); c < mdp.end_choice(s); ++c) {
            if (q.allowed[c]) {
                double v = q_value(mdp, c, x, reward);
                best = better(v, best) ? v : best;
            }
        }
        std::size_t picked = mdp.end_choice(s);
        for (std::size_t c = mdp.first_choice(s); c < mdp.end_choice(s) && picked == mdp.end_choice(s); ++c) {
            if (!q.allowed[c]) {
                continue;
            }
            double v = q_value(mdp, c, x, reward);
            bool near_best = std::abs(v - best) <= std::max(options.precision, tolerance_for(best)) * 10;
            if (near_best && (layer.empty() || progresses(mdp, c, layer, s))) {
                picked = c;
            }
        }
        if (picked == mdp.end_choice(s)) {
            picked = layer.empty() ? mdp.first_choice(s) : progressing_choice(mdp, s, q.allowed, layer);
        }
        choice[s] = picked;
    }

    // Policy iteration: exact evaluation, switch only on strict improvement.
    if (!maybe.empty()) {
        while (result.policy_rounds < options.max_policy_rounds) {
            ++result.policy_rounds;
            std::vector<double> evaluated = evaluate_chain(mdp, choice, targets, reward);
            for (StateId s : maybe) {
                x[s] = evaluated[s];
            }
            bool changed = false;
            for (StateId s : maybe) {
                double current = q_value(mdp, choice[s], x, reward);
                std::size_t best_choice = choice[s];
                double best = current;
                for (std::size_t c = mdp.first_choice(s); c < mdp.end_choice(s); ++c) {
                    if (!q.allowed[c]) {
                        continue;
                    }
                    double v = q_value(mdp, c, x, reward);
                    if (better(v, best) && std::abs(v - best) > tolerance_for(best)) {
                        best = v;
                        best_choice = c;
                    }
                }
                if (best_choice != choice[s] && std::abs(best - current) > tolerance_for(current)) {
                    choice[s] = best_choice;
                    changed = true;
                }
            }
            if (!changed) {
                break;
            }
        }
    }

    result.policy.choice = std::move(choice);
    result.residual = maybe.empty() ? 0.0 : bellman_residual(mdp, targets, objective, x);
    return result;
}

}  // namespace saynt::checker

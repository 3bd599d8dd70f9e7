#include "saynt/inductive.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

#include "json.hpp"
#include "saynt/errors.h"

namespace saynt::inductive {

DesignSpace::DesignSpace(Pomdp const& pomdp, MemoryModel memory, bool posterior_unaware)
    : memory_(std::move(memory)), posterior_unaware_(posterior_unaware) {
    std::size_t const num_obs = pomdp.num_observations();
    if (memory_.size() != num_obs) {
        throw ConfigError("memory model lists " + std::to_string(memory_.size()) + " observations, model has " +
                          std::to_string(num_obs));
    }
    for (ObsId z = 0; z < num_obs; ++z) {
        if (memory_[z] == 0) {
            throw ConfigError("memory model assigns no node to observation " + std::to_string(z));
        }
    }
    ObsId const target = pomdp.target_observation();
    memory_[target] = 1;
    max_nodes_ = *std::max_element(memory_.begin(), memory_.end());

    posteriors_.resize(num_obs);
    for (ObsId z = 0; z < num_obs; ++z) {
        if (z == target) {
            continue;
        }
        std::set<ObsId> seen;
        for (StateId s : pomdp.states_with(z)) {
            for (std::size_t c = pomdp.mdp().first_choice(s); c < pomdp.mdp().end_choice(s); ++c) {
                for (auto const& t : pomdp.mdp().successors(c)) {
                    seen.insert(pomdp.observation(t.target));
                }
            }
        }
        posteriors_[z].assign(seen.begin(), seen.end());
    }

    action_hole_.resize(num_obs);
    update_hole_.resize(num_obs);
    for (ObsId z = 0; z < num_obs; ++z) {
        for (NodeId n = 0; n < memory_[z]; ++n) {
            Hole action{Hole::Kind::Action, z, n, std::nullopt, {}};
            if (z == target) {
                action.domain.push_back(pomdp.actions_of(z).front());
            } else {
                action.domain.assign(pomdp.actions_of(z).begin(), pomdp.actions_of(z).end());
            }
            action_hole_[z].push_back(holes_.size());
            holes_.push_back(std::move(action));

            update_hole_[z].emplace_back();
            if (z == target || posteriors_[z].empty()) {
                continue;
            }
            if (posterior_unaware_) {
                std::size_t widest = 0;
                for (ObsId post : posteriors_[z]) {
                    widest = std::max(widest, memory_[post]);
                }
                Hole update{Hole::Kind::Update, z, n, std::nullopt, {}};
                for (std::uint32_t v = 0; v < widest; ++v) {
                    update.domain.push_back(v);
                }
                update_hole_[z][n].push_back(holes_.size());
                holes_.push_back(std::move(update));
            } else {
                for (ObsId post : posteriors_[z]) {
                    Hole update{Hole::Kind::Update, z, n, post, {}};
                    for (std::uint32_t v = 0; v < memory_[post]; ++v) {
                        update.domain.push_back(v);
                    }
                    update_hole_[z][n].push_back(holes_.size());
                    holes_.push_back(std::move(update));
                }
            }
        }
    }
}

std::optional<std::size_t> DesignSpace::update_hole(ObsId obs, NodeId node, ObsId posterior) const {
    auto const& slots = update_hole_[obs][node];
    if (slots.empty()) {
        return std::nullopt;
    }
    auto const& posts = posteriors_[obs];
    auto it = std::lower_bound(posts.begin(), posts.end(), posterior);
    if (it == posts.end() || *it != posterior) {
        return std::nullopt;
    }
    return posterior_unaware_ ? slots[0] : slots[it - posts.begin()];
}

double FamilySpace::size() const {
    double size = 1.0;
    for (auto const& o : options) {
        size *= static_cast<double>(o.size());
    }
    return size;
}

double FamilySpace::log10_size() const {
    double sum = 0.0;
    for (auto const& o : options) {
        sum += std::log10(static_cast<double>(o.size()));
    }
    return sum;
}

bool FamilySpace::is_singleton() const {
    return std::all_of(options.begin(), options.end(), [](auto const& o) { return o.size() == 1; });
}

bool FamilySpace::contains(std::vector<std::uint32_t> const& assignment) const {
    if (assignment.size() != options.size()) {
        return false;
    }
    for (std::size_t h = 0; h < options.size(); ++h) {
        if (!std::binary_search(options[h].begin(), options[h].end(), assignment[h])) {
            return false;
        }
    }
    return true;
}

FamilySpace full_family(Pomdp const& pomdp, MemoryModel const& memory, bool posterior_unaware,
                        std::optional<ActionSets> const& restriction) {
    FamilySpace family;
    auto space = std::make_shared<DesignSpace>(pomdp, memory, posterior_unaware);
    for (auto const& hole : space->holes()) {
        std::vector<std::uint32_t> options = hole.domain;
        if (restriction && hole.kind == Hole::Kind::Action && hole.obs != pomdp.target_observation()) {
            if (restriction->size() != pomdp.num_observations()) {
                throw ConfigError("action restriction does not cover every observation");
            }
            auto const& allowed = (*restriction)[hole.obs];
            if (allowed.empty()) {
                throw ConfigError("action restriction is empty for observation " + std::to_string(hole.obs));
            }
            std::erase_if(options, [&](std::uint32_t a) {
                return std::find(allowed.begin(), allowed.end(), a) == allowed.end();
            });
            if (options.empty()) {
                throw ConfigError("action restriction leaves no enabled action for observation " +
                                  std::to_string(hole.obs));
            }
        }
        family.options.push_back(std::move(options));
    }
    family.space = std::move(space);
    return family;
}

Fsc realize(Pomdp const& pomdp, DesignSpace const& space, std::vector<std::uint32_t> const& assignment) {
    std::size_t const k = space.max_nodes();
    std::size_t const num_obs = pomdp.num_observations();
    Fsc fsc(k, num_obs);
    for (ObsId z = 0; z < num_obs; ++z) {
        for (NodeId n = 0; n < k; ++n) {
            NodeId const source = n < space.memory()[z] ? n : 0;
            fsc.set_action(n, z, assignment[space.action_hole(z, source)]);
            fsc::UpdateRow row;
            if (space.posterior_unaware()) {
                if (auto h = space.posteriors(z).empty() ? std::nullopt
                                                         : space.update_hole(z, source, space.posteriors(z).front())) {
                    row.fallback = assignment[*h];
                }
            } else {
                for (ObsId post : space.posteriors(z)) {
                    row.by_posterior.push_back({post, assignment[*space.update_hole(z, source, post)]});
                }
            }
            fsc.set_update(n, z, std::move(row));
        }
    }
    fsc.set_posterior_unaware(space.posterior_unaware());
    fsc.set_memory_model(space.memory());
    return fsc;
}

Abstraction build_abstraction(Pomdp const& pomdp, FamilySpace const& family) {
    DesignSpace const& space = *family.space;
    auto const& mdp = pomdp.mdp();
    std::size_t const k = space.max_nodes();
    Abstraction result;
    std::vector<std::int64_t> index(pomdp.num_states() * k, -1);
    auto intern = [&](StateId s, NodeId n) {
        std::int64_t& slot = index[static_cast<std::size_t>(n) * pomdp.num_states() + s];
        if (slot < 0) {
            slot = static_cast<std::int64_t>(result.pairs.size());
            result.pairs.push_back({s, n});
        }
        return static_cast<StateId>(slot);
    };
    intern(mdp.initial_state(), 0);

    struct PendingChoice {
        ActionId action;
        models::Distribution dist;
        double reward;
    };
    std::vector<std::vector<PendingChoice>> rows;
    result.hole_start.push_back(0);
    for (std::size_t i = 0; i < result.pairs.size(); ++i) {
        auto const [s, n] = result.pairs[i];
        ObsId const z = pomdp.observation(s);
        rows.emplace_back();
        if (pomdp.is_target(s)) {
            rows.back().push_back({mdp.choice_action(mdp.first_choice(s)), {{static_cast<StateId>(i), 1.0}}, 0.0});
            result.hole_start.push_back(result.hole_options.size());
            continue;
        }
        std::size_t const action_hole = space.action_hole(z, n);
        for (std::uint32_t action : family.options[action_hole]) {
            std::size_t const c = *mdp.choice_of(s, action);
            auto const succ = mdp.successors(c);
            // Relevant update holes: those for posteriors reachable from s under this action.
            std::vector<std::size_t> holes;
            std::vector<std::size_t> hole_of_successor;
            for (auto const& t : succ) {
                std::size_t h = *space.update_hole(z, n, pomdp.observation(t.target));
                auto it = std::find(holes.begin(), holes.end(), h);
                hole_of_successor.push_back(static_cast<std::size_t>(it - holes.begin()));
                if (it == holes.end()) {
                    holes.push_back(h);
                }
            }
            std::vector<std::size_t> digit(holes.size(), 0);
            while (true) {
                models::Distribution dist;
                for (std::size_t j = 0; j < succ.size(); ++j) {
                    StateId t = succ[j].target;
                    std::size_t h = holes[hole_of_successor[j]];
                    NodeId next = family.options[h][digit[hole_of_successor[j]]];
                    if (next >= space.memory()[pomdp.observation(t)]) {
                        next = 0;
                    }
                    dist.push_back({intern(t, next), succ[j].probability});
                }
                rows.back().push_back({action, std::move(dist), mdp.choice_reward(c)});
                result.hole_options.push_back({static_cast<std::uint32_t>(action_hole), action});
                for (std::size_t j = 0; j < holes.size(); ++j) {
                    result.hole_options.push_back(
                        {static_cast<std::uint32_t>(holes[j]), family.options[holes[j]][digit[j]]});
                }
                result.hole_start.push_back(result.hole_options.size());
                std::size_t pos = 0;
                while (pos < holes.size() && ++digit[pos] == family.options[holes[pos]].size()) {
                    digit[pos++] = 0;
                }
                if (pos == holes.size()) {
                    break;
                }
            }
        }
    }
    models::MdpBuilder builder(mdp.action_labels(), mdp.has_rewards());
    builder.add_states(result.pairs.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (auto& row : rows[i]) {
            builder.add_choice(static_cast<StateId>(i), row.action, std::move(row.dist), row.reward);
        }
        result.targets.push_back(pomdp.is_target(result.pairs[i].first));
    }
    builder.set_initial(0);
    result.mdp = std::move(builder).build();
    return result;
}

AbstractionResult check_abstraction(Abstraction const& abstraction, Objective objective, bool both_bounds) {
    AbstractionResult result;
    auto const& mdp = abstraction.mdp;
    checker::CheckResult optimistic = checker::check_mdp(mdp, abstraction.targets, objective);
    result.optimistic = optimistic.values[mdp.initial_state()];
    bool const maximize = models::is_maximizing(objective);
    (maximize ? result.upper : result.lower) = result.optimistic;
    if (both_bounds) {
        checker::CheckResult pessimistic = checker::check_mdp(mdp, abstraction.targets, models::opposite(objective));
        (maximize ? result.lower : result.upper) = pessimistic.values[mdp.initial_state()];
    }
    result.policy = std::move(optimistic.policy);

    std::size_t num_holes = 0;
    for (auto const& [h, option] : abstraction.hole_options) {
        num_holes = std::max<std::size_t>(num_holes, h + 1);
    }
    result.used.assign(num_holes, {});
    std::vector<bool> seen(mdp.num_states(), false);
    std::deque<StateId> queue{mdp.initial_state()};
    seen[mdp.initial_state()] = true;
    while (!queue.empty()) {
        StateId s = queue.front();
        queue.pop_front();
        std::size_t c = result.policy.choice[s];
        for (std::size_t i = abstraction.hole_start[c]; i < abstraction.hole_start[c + 1]; ++i) {
            auto [h, option] = abstraction.hole_options[i];
            auto& used = result.used[h];
            auto it = std::lower_bound(used.begin(), used.end(), option);
            if (it == used.end() || *it != option) {
                used.insert(it, option);
            }
        }
        for (auto const& t : mdp.successors(c)) {
            if (!seen[t.target]) {
                seen[t.target] = true;
                queue.push_back(t.target);
            }
        }
    }
    for (auto const& used : result.used) {
        if (used.size() > 1) {
            result.consistent = false;
        }
    }
    return result;
}

std::vector<std::uint32_t> assignment_from(FamilySpace const& family, AbstractionResult const& result) {
    std::vector<std::uint32_t> assignment;
    for (std::size_t h = 0; h < family.options.size(); ++h) {
        if (h < result.used.size() && !result.used[h].empty()) {
            assignment.push_back(result.used[h].front());
        } else {
            assignment.push_back(family.options[h].front());
        }
    }
    return assignment;
}

std::pair<FamilySpace, FamilySpace> split(FamilySpace const& family, AbstractionResult const& result) {
    std::optional<std::size_t> chosen;
    auto used_count = [&](std::size_t h) { return h < result.used.size() ? result.used[h].size() : 0; };
    for (std::size_t h = 0; h < family.options.size(); ++h) {
        if (family.options[h].size() < 2) {
            continue;
        }
        if (!chosen) {
            chosen = h;
            continue;
        }
        std::size_t const best = *chosen;
        if (used_count(h) > used_count(best) ||
            (used_count(h) == used_count(best) && family.options[h].size() > family.options[best].size())) {
            chosen = h;
        }
    }
    if (!chosen) {
        throw ModelError("cannot split a family with a single member");
    }
    std::size_t const h = *chosen;
    std::vector<std::uint32_t> used;
    std::vector<std::uint32_t> unused;
    for (std::uint32_t option : family.options[h]) {
        bool is_used = h < result.used.size() &&
                       std::binary_search(result.used[h].begin(), result.used[h].end(), option);
        (is_used ? used : unused).push_back(option);
    }
    std::vector<std::uint32_t> first;
    std::vector<std::uint32_t> second;
    if (used.size() >= 2) {
        std::size_t const half = (used.size() + 1) / 2;
        first.assign(used.begin(), used.begin() + half);
        second.assign(used.begin() + half, used.end());
        std::size_t const unused_half = unused.size() / 2;
        first.insert(first.end(), unused.begin(), unused.begin() + unused_half);
        second.insert(second.end(), unused.begin() + unused_half, unused.end());
    } else {
        // At most one option is used: separate it (or the first option) from the rest.
        std::vector<std::uint32_t> all = used;
        all.insert(all.end(), unused.begin(), unused.end());
        std::size_t const half = (all.size() + 1) / 2;
        first.assign(all.begin(), all.begin() + half);
        second.assign(all.begin() + half, all.end());
    }
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    FamilySpace a = family;
    FamilySpace b = family;
    a.options[h] = std::move(first);
    b.options[h] = std::move(second);
    return {std::move(a), std::move(b)};
}

std::vector<FamilySpace> partition_by_restriction(FamilySpace const& family, ActionSets const& restriction) {
    DesignSpace const& space = *family.space;
    std::vector<std::size_t> holes;
    std::vector<std::vector<std::uint32_t>> inside;
    std::vector<std::vector<std::uint32_t>> outside;
    for (std::size_t h = 0; h < family.options.size(); ++h) {
        Hole const& hole = space.holes()[h];
        if (hole.kind != Hole::Kind::Action || hole.obs >= restriction.size() || restriction[hole.obs].empty()) {
            continue;
        }
        auto const& allowed = restriction[hole.obs];
        std::vector<std::uint32_t> in;
        std::vector<std::uint32_t> out;
        for (std::uint32_t option : family.options[h]) {
            bool ok = std::find(allowed.begin(), allowed.end(), option) != allowed.end();
            (ok ? in : out).push_back(option);
        }
        holes.push_back(h);
        inside.push_back(std::move(in));
        outside.push_back(std::move(out));
    }
    std::vector<FamilySpace> parts;
    bool const restricted_nonempty =
        std::all_of(inside.begin(), inside.end(), [](auto const& in) { return !in.empty(); });
    if (restricted_nonempty) {
        FamilySpace part = family;
        for (std::size_t i = 0; i < holes.size(); ++i) {
            part.options[holes[i]] = inside[i];
        }
        parts.push_back(std::move(part));
    }
    // Remaining members: the first hole (in order) that leaves the restriction decides the box.
    for (std::size_t i = 0; i < holes.size(); ++i) {
        if (!outside[i].empty()) {
            FamilySpace part = family;
            for (std::size_t j = 0; j < i; ++j) {
                part.options[holes[j]] = inside[j];
            }
            part.options[holes[i]] = outside[i];
            parts.push_back(std::move(part));
        }
        if (inside[i].empty()) {
            break;
        }
    }
    return parts;
}

namespace {

struct WorkItem {
    FamilySpace family;
    bool restricted;
};

nlohmann::json finite_or_null(std::optional<double> value) {
    if (!value || !std::isfinite(*value)) {
        return nullptr;
    }
    return *value;
}

}  // namespace

SynthesisResult synthesize(Pomdp const& pomdp, Objective objective, std::vector<FamilySpace> worklist,
                           std::optional<double> incumbent, std::optional<ActionSets> const& restriction,
                           SynthesisOptions const& options) {
    SynthesisResult result;
    double best = incumbent.value_or(models::worst_value(objective));
    result.value = best;

    std::vector<WorkItem> stack;
    if (restriction) {
        std::vector<WorkItem> inside;
        for (auto const& family : worklist) {
            auto parts = partition_by_restriction(family, *restriction);
            bool first_inside = !parts.empty() && [&] {
                // The first part is the restricted one exactly when every action hole keeps an allowed option.
                for (std::size_t h = 0; h < family.options.size(); ++h) {
                    Hole const& hole = family.space->holes()[h];
                    if (hole.kind != Hole::Kind::Action || hole.obs >= restriction->size() ||
                        (*restriction)[hole.obs].empty()) {
                        continue;
                    }
                    auto const& allowed = (*restriction)[hole.obs];
                    for (std::uint32_t option : parts.front().options[h]) {
                        if (std::find(allowed.begin(), allowed.end(), option) == allowed.end()) {
                            return false;
                        }
                    }
                }
                return true;
            }();
            for (std::size_t i = 0; i < parts.size(); ++i) {
                if (i == 0 && first_inside) {
                    inside.push_back({std::move(parts[i]), true});
                } else {
                    stack.push_back({std::move(parts[i]), false});
                }
            }
        }
        std::reverse(stack.begin(), stack.end());
        std::reverse(inside.begin(), inside.end());
        stack.insert(stack.end(), std::make_move_iterator(inside.begin()), std::make_move_iterator(inside.end()));
    } else {
        for (auto it = worklist.rbegin(); it != worklist.rend(); ++it) {
            stack.push_back({std::move(*it), false});
        }
    }
    // Stack top is the back; the first family of the worklist is processed first.

    auto wall_ms = [&] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - options.started).count();
    };
    auto emit = [&](char const* event, WorkItem const& item, std::optional<double> lower, std::optional<double> upper) {
        if (!options.trace) {
            return;
        }
        nlohmann::json line;
        line["event"] = event;
        line["family_size"] = item.family.size();
        line["bounds"] = {finite_or_null(lower), finite_or_null(upper)};
        line["incumbent"] = finite_or_null(std::isfinite(best) ? std::optional<double>(best) : std::nullopt);
        line["restricted"] = item.restricted;
        line["wall_ms"] = wall_ms();
        options.trace(line.dump());
    };
    auto expired = [&] {
        if (options.deadline && std::chrono::steady_clock::now() >= *options.deadline) {
            return true;
        }
        return options.cancel && options.cancel->load();
    };
    auto consider = [&](Fsc candidate, WorkItem const& item) {
        ++result.stats.members_evaluated;
        double value = fsc::evaluate_initial(pomdp, candidate, objective);
        if (models::improves(objective, value, best, options.tolerance)) {
            best = value;
            result.best = std::move(candidate);
            result.value = value;
            emit("improved", item, value, value);
        }
    };

    while (!stack.empty()) {
        if (expired()) {
            break;
        }
        WorkItem item = std::move(stack.back());
        stack.pop_back();
        Abstraction abstraction = build_abstraction(pomdp, item.family);
        AbstractionResult checked = check_abstraction(abstraction, objective, options.lower_bounds);
        ++result.stats.families_checked;
        emit("checked", item, checked.lower, checked.upper);
        if (!models::improves(objective, checked.optimistic, best, options.tolerance)) {
            ++result.stats.pruned;
            emit("pruned", item, checked.lower, checked.upper);
            continue;
        }
        std::vector<std::uint32_t> assignment = assignment_from(item.family, checked);
        consider(realize(pomdp, *item.family.space, assignment), item);
        if (checked.consistent || item.family.is_singleton()) {
            continue;
        }
        if (!models::improves(objective, checked.optimistic, best, options.tolerance)) {
            continue;
        }
        auto [first, second] = split(item.family, checked);
        ++result.stats.splits;
        emit("split", item, checked.lower, checked.upper);
        stack.push_back({std::move(second), item.restricted});
        stack.push_back({std::move(first), item.restricted});
    }
    for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
        result.remaining.push_back(std::move(it->family));
    }
    return result;
}

MemoryModel memory_model_from(ActionSets const& sets) {
    MemoryModel memory;
    for (auto const& set : sets) {
        memory.push_back(std::max<std::size_t>(1, set.size()));
    }
    return memory;
}

}  // namespace saynt::inductive

#include "saynt/generators.h"

#include <map>

#include "saynt/errors.h"

namespace saynt::generators {

using models::ActionId;
using models::Distribution;
using models::ObsId;
using models::StateId;

namespace {

/// Small helper for hand-written models: actions not set explicitly loop with the state's step cost.
class Sketch {
public:
    Sketch(std::vector<std::string> actions, std::vector<std::string> observations)
        : actions_(std::move(actions)), observations_(std::move(observations)), enabled_(observations_.size()) {}

    void enable(ObsId obs, std::vector<ActionId> actions) { enabled_[obs] = std::move(actions); }

    StateId add_state(ObsId obs, double step_cost) {
        obs_of_.push_back(obs);
        cost_.push_back(step_cost);
        rows_.emplace_back();
        return static_cast<StateId>(obs_of_.size() - 1);
    }

    void set(StateId s, ActionId a, Distribution dist) { rows_[s][a] = {std::move(dist), cost_[s]}; }
    void set(StateId s, ActionId a, Distribution dist, double reward) { rows_[s][a] = {std::move(dist), reward}; }

    Pomdp build(StateId initial, ObsId target) {
        models::MdpBuilder builder(actions_, true);
        builder.add_states(obs_of_.size());
        for (StateId s = 0; s < obs_of_.size(); ++s) {
            for (ActionId a : enabled_[obs_of_[s]]) {
                auto it = rows_[s].find(a);
                if (it != rows_[s].end()) {
                    builder.add_choice(s, a, it->second.first, it->second.second);
                } else {
                    builder.add_choice(s, a, {{s, 1.0}}, cost_[s]);
                }
            }
        }
        builder.set_initial(initial);
        return Pomdp(std::move(builder).build(), observations_, obs_of_, target);
    }

private:
    std::vector<std::string> actions_;
    std::vector<std::string> observations_;
    std::vector<std::vector<ActionId>> enabled_;
    std::vector<ObsId> obs_of_;
    std::vector<double> cost_;
    std::vector<std::map<ActionId, std::pair<Distribution, double>>> rows_;
};

void check_valid(Pomdp const& model) {
    auto violations = models::validate(model);
    if (!violations.empty()) {
        throw ModelError("generated model violates '" + violations.front().rule + "' at " + violations.front().location);
    }
}

}  // namespace

unsigned lanes_upgrade_action(std::size_t lane, std::size_t position) {
    switch (lane) {
        case 0:
            return position % 2 == 0 ? 0 : 1;
        case 1:
            return position % 4 < 2 ? 0 : 1;
        default:
            return position % 8 < 4 ? 0 : 1;
    }
}

Pomdp lanes(double p_u, std::size_t lane_len, std::array<double, 3> speeds) {
    if (!(p_u > 0.0 && p_u <= 1.0)) {
        throw ConfigError("upgrade probability must lie in (0, 1]");
    }
    if (lane_len == 0) {
        throw ConfigError("lanes need at least one state");
    }
    for (double speed : speeds) {
        if (!(speed >= 0.0)) {
            throw ConfigError("lane speeds must be non-negative");
        }
    }
    Sketch sketch({"alpha", "beta"}, {"start", "slow", "moderate", "fast", "target"});
    ObsId const target_obs = 4;
    sketch.enable(0, {0});
    for (ObsId z = 1; z <= 3; ++z) {
        sketch.enable(z, {0, 1});
    }
    sketch.enable(target_obs, {0});

    StateId start = sketch.add_state(0, 0.0);
    std::array<std::vector<StateId>, 3> lane;
    for (std::size_t l = 0; l < 3; ++l) {
        for (std::size_t i = 0; i < lane_len; ++i) {
            lane[l].push_back(sketch.add_state(static_cast<ObsId>(l + 1), speeds[l]));
        }
    }
    StateId target = sketch.add_state(target_obs, 0.0);

    sketch.set(start, 0, {{lane[0][0], 1.0 / 3}, {lane[1][0], 1.0 / 3}, {lane[2][0], 1.0 / 3}}, 0.0);
    for (std::size_t l = 0; l < 3; ++l) {
        for (std::size_t i = 0; i < lane_len; ++i) {
            std::size_t const next = (i + 1) % lane_len;
            StateId const here = lane[l][i];
            StateId const ahead = lane[l][next];
            StateId const upgraded = l < 2 ? lane[l + 1][next] : target;
            ActionId const up = lanes_upgrade_action(l, i);
            sketch.set(here, up, {{upgraded, p_u}, {ahead, 1.0 - p_u}});
            sketch.set(here, 1 - up, {{ahead, 1.0}});
        }
    }
    Pomdp model = sketch.build(start, target_obs);
    check_valid(model);
    return model;
}

Pomdp fig2a() {
    Sketch sketch({"alpha", "beta", "gamma"}, {"start", "yellow", "blue", "target"});
    for (ObsId z = 0; z < 3; ++z) {
        sketch.enable(z, {0, 1, 2});
    }
    sketch.enable(3, {0});
    StateId S = sketch.add_state(0, 1.0);
    StateId L = sketch.add_state(1, 1.0);
    StateId R = sketch.add_state(1, 1.0);
    StateId X = sketch.add_state(2, 1.0);
    StateId T = sketch.add_state(3, 0.0);
    sketch.set(S, 0, {{L, 0.5}, {R, 0.5}});
    sketch.set(L, 0, {{T, 1.0 / 3}, {L, 2.0 / 3}});
    sketch.set(R, 0, {{T, 1.0 / 3}, {R, 2.0 / 3}});
    sketch.set(R, 1, {{L, 0.5}, {R, 0.5}});
    sketch.set(L, 2, {{T, 1.0}});
    sketch.set(R, 2, {{X, 1.0}});
    for (ActionId a = 0; a < 3; ++a) {
        sketch.set(X, a, {{S, 1.0}});
    }
    Pomdp model = sketch.build(S, 3);
    check_valid(model);
    return model;
}

Pomdp fig2a_chain(std::size_t copies) {
    if (copies == 0) {
        throw ConfigError("chain needs at least one copy");
    }
    std::vector<std::pair<Pomdp, std::string>> stages(copies, {fig2a(), ""});
    return compose(stages);
}

Pomdp fig2b() {
    Sketch sketch({"alpha", "beta", "gamma", "delta"}, {"blue", "yellow", "target"});
    sketch.enable(0, {0, 1, 2, 3});
    sketch.enable(1, {0, 1, 2, 3});
    sketch.enable(2, {0});
    StateId B1 = sketch.add_state(0, 1.0);
    StateId Y = sketch.add_state(1, 1.0);
    StateId B2 = sketch.add_state(0, 1.0);
    StateId B3 = sketch.add_state(0, 1.0);
    StateId T = sketch.add_state(2, 0.0);
    sketch.set(B1, 2, {{Y, 0.5}, {B2, 0.5}});
    sketch.set(B1, 3, {{B2, 0.5}, {B3, 0.5}});
    sketch.set(Y, 1, {{B3, 1.0}});
    sketch.set(Y, 0, {{B1, 0.5}, {B3, 0.5}});
    sketch.set(B2, 0, {{T, 1.0}});
    sketch.set(B2, 1, {{B1, 1.0}});
    sketch.set(B3, 1, {{T, 1.0}});
    sketch.set(B3, 0, {{B1, 1.0}});
    Pomdp model = sketch.build(B1, 2);
    check_valid(model);
    return model;
}

Pomdp fig4a() {
    Sketch sketch({"alpha", "beta"}, {"white", "yellow", "blue", "target"});
    sketch.enable(0, {0, 1});
    sketch.enable(1, {0, 1});
    sketch.enable(2, {0, 1});
    sketch.enable(3, {0});
    StateId I = sketch.add_state(0, 1.0);
    StateId Y1 = sketch.add_state(1, 1.0);
    StateId Y2 = sketch.add_state(1, 1.0);
    StateId B1 = sketch.add_state(2, 1.0);
    StateId B2 = sketch.add_state(2, 1.0);
    StateId G = sketch.add_state(3, 0.0);
    sketch.set(I, 0, {{Y1, 0.5}, {B1, 0.5}});
    sketch.set(Y1, 0, {{Y2, 0.5}, {B2, 0.5}});
    sketch.set(Y2, 1, {{Y1, 0.5}, {B2, 0.5}});
    sketch.set(B1, 0, {{Y1, 0.5}, {G, 0.5}});
    sketch.set(B2, 1, {{Y2, 0.5}, {B1, 0.5}});
    Pomdp model = sketch.build(I, 3);
    check_valid(model);
    return model;
}

Pomdp compose(std::vector<std::pair<Pomdp, std::string>> const& stages) {
    if (stages.empty()) {
        throw ConfigError("composition needs at least one stage");
    }
    std::vector<std::string> action_labels;
    std::map<std::string, ActionId> action_index;
    std::vector<std::string> obs_labels;
    std::map<std::string, ObsId> obs_index;
    auto action_id = [&](std::string const& label) {
        auto [it, inserted] = action_index.emplace(label, static_cast<ActionId>(action_labels.size()));
        if (inserted) {
            action_labels.push_back(label);
        }
        return it->second;
    };
    auto obs_id = [&](std::string const& label) {
        auto [it, inserted] = obs_index.emplace(label, static_cast<ObsId>(obs_labels.size()));
        if (inserted) {
            obs_labels.push_back(label);
        }
        return it->second;
    };

    // Global ids: non-target states of every stage in order, then one shared target.
    std::vector<std::vector<StateId>> global(stages.size());
    StateId next_id = 0;
    bool with_rewards = false;
    for (std::size_t k = 0; k < stages.size(); ++k) {
        Pomdp const& stage = stages[k].first;
        if (stage.is_target(stage.mdp().initial_state())) {
            throw ConfigError("composed stage starts in a target state");
        }
        with_rewards = with_rewards || stage.mdp().has_rewards();
        global[k].assign(stage.num_states(), 0);
        for (StateId s = 0; s < stage.num_states(); ++s) {
            if (!stage.is_target(s)) {
                global[k][s] = next_id++;
            }
        }
    }
    StateId const target = next_id++;
    for (std::size_t k = 0; k < stages.size(); ++k) {
        Pomdp const& stage = stages[k].first;
        StateId const exit = k + 1 < stages.size() ? global[k + 1][stages[k + 1].first.mdp().initial_state()] : target;
        for (StateId s = 0; s < stage.num_states(); ++s) {
            if (stage.is_target(s)) {
                global[k][s] = exit;
            }
        }
    }

    std::vector<ObsId> obs_of(next_id, 0);
    std::vector<std::vector<std::tuple<ActionId, Distribution, double>>> rows(next_id);
    for (std::size_t k = 0; k < stages.size(); ++k) {
        Pomdp const& stage = stages[k].first;
        auto const& mdp = stage.mdp();
        for (StateId s = 0; s < stage.num_states(); ++s) {
            if (stage.is_target(s)) {
                continue;
            }
            StateId g = global[k][s];
            obs_of[g] = obs_id(stages[k].second + stage.observation_labels()[stage.observation(s)]);
            for (std::size_t c = mdp.first_choice(s); c < mdp.end_choice(s); ++c) {
                Distribution dist;
                for (auto const& t : mdp.successors(c)) {
                    dist.push_back({global[k][t.target], t.probability});
                }
                rows[g].emplace_back(action_id(mdp.action_labels()[mdp.choice_action(c)]), std::move(dist),
                                     mdp.choice_reward(c));
            }
        }
    }
    ObsId const target_obs = obs_id("target");
    obs_of[target] = target_obs;
    rows[target].emplace_back(action_id(action_labels.empty() ? "alpha" : action_labels.front()),
                              Distribution{{target, 1.0}}, 0.0);

    models::MdpBuilder builder(action_labels, with_rewards);
    builder.add_states(next_id);
    for (StateId s = 0; s < next_id; ++s) {
        for (auto& [a, dist, reward] : rows[s]) {
            builder.add_choice(s, a, std::move(dist), reward);
        }
    }
    builder.set_initial(global[0][stages[0].first.mdp().initial_state()]);
    Pomdp model(std::move(builder).build(), obs_labels, obs_of, target_obs);
    check_valid(model);
    return model;
}

namespace {

/// One non-target state with a single unit-cost action into the target.
Pomdp glue_stage(std::string const& label) {
    Sketch sketch({"alpha"}, {label, "target"});
    sketch.enable(0, {0});
    sketch.enable(1, {0});
    StateId s = sketch.add_state(0, 1.0);
    StateId t = sketch.add_state(1, 0.0);
    sketch.set(s, 0, {{t, 1.0}});
    return sketch.build(s, 1);
}

}  // namespace

Pomdp lanes_plus(std::size_t reps, double p_u, std::size_t lane_len, bool stub_tail) {
    if (reps == 0) {
        throw ConfigError("lanes-plus needs at least one lanes stage");
    }
    std::vector<std::pair<Pomdp, std::string>> stages;
    Pomdp const lane_stage = lanes(p_u, lane_len);
    for (std::size_t r = 0; r < reps; ++r) {
        stages.emplace_back(lane_stage, "");
    }
    if (stub_tail) {
        stages.emplace_back(glue_stage("glue"), "a-");
        stages.emplace_back(glue_stage("glue"), "b-");
    } else {
        stages.emplace_back(fig2a_chain(25), "a-");
        stages.emplace_back(fig2b(), "b-");
    }
    return compose(stages);
}

Pomdp by_name(std::string const& name, double p_u, std::size_t lane_len, std::size_t reps) {
    if (name == "lanes") return lanes(p_u, lane_len);
    if (name == "lanes-plus") return lanes_plus(reps, p_u, lane_len);
    if (name == "fig2a") return fig2a();
    if (name == "fig2b") return fig2b();
    if (name == "fig4a") return fig4a();
    throw ConfigError("unknown generator '" + name + "'");
}

}  // namespace saynt::generators

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "json.hpp"
#include "saynt/errors.h"
#include "saynt/models.h"

namespace saynt::models {

namespace {

using nlohmann::json;

json const& require(json const& object, char const* field) {
    auto it = object.find(field);
    if (it == object.end()) {
        throw SchemaError(std::string("missing field '") + field + "'");
    }
    return *it;
}

std::uint64_t require_index(json const& object, char const* field) {
    json const& value = require(object, field);
    if (!value.is_number_integer() || value.get<std::int64_t>() < 0) {
        throw SchemaError(std::string("field '") + field + "' must be a non-negative integer");
    }
    return value.get<std::uint64_t>();
}

std::vector<std::string> require_labels(json const& object, char const* field) {
    json const& value = require(object, field);
    if (!value.is_array()) {
        throw SchemaError(std::string("field '") + field + "' must be an array of strings");
    }
    std::vector<std::string> labels;
    for (auto const& entry : value) {
        if (!entry.is_string()) {
            throw SchemaError(std::string("field '") + field + "' must be an array of strings");
        }
        labels.push_back(entry.get<std::string>());
    }
    return labels;
}

std::uint32_t lookup(std::map<std::string, std::uint32_t> const& index, std::string const& label, char const* field) {
    auto it = index.find(label);
    if (it == index.end()) {
        throw SchemaError(std::string("field '") + field + "' refers to unknown label '" + label + "'");
    }
    return it->second;
}

double parse_decimal(std::string const& text) {
    double value = 0.0;
    auto const* begin = text.data();
    auto const* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw SchemaError("field 'prob' has malformed number '" + text + "'");
    }
    return value;
}

/// Decimal strings, fractions "p/q" and plain JSON numbers.
double parse_probability(json const& value) {
    if (value.is_number()) {
        return value.get<double>();
    }
    if (!value.is_string()) {
        throw SchemaError("field 'prob' must be a number or a decimal string");
    }
    std::string const text = value.get<std::string>();
    auto slash = text.find('/');
    if (slash == std::string::npos) {
        return parse_decimal(text);
    }
    double numerator = parse_decimal(text.substr(0, slash));
    double denominator = parse_decimal(text.substr(slash + 1));
    if (denominator == 0.0) {
        throw SchemaError("field 'prob' has zero denominator in '" + text + "'");
    }
    return numerator / denominator;
}

std::size_t line_of(std::string_view text, std::size_t offset) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
        }
    }
    return line;
}

}  // namespace

Pomdp parse_model(std::string_view text) {
    json document;
    try {
        document = json::parse(text.begin(), text.end());
    } catch (json::parse_error const& e) {
        std::ostringstream message;
        message << "malformed JSON at line " << line_of(text, e.byte) << ", offset " << e.byte << ": " << e.what();
        throw ParseError(message.str(), e.byte);
    }
    if (!document.is_object()) {
        throw SchemaError("model document must be a JSON object");
    }

    std::uint64_t const num_states = require_index(document, "states");
    std::uint64_t const initial = require_index(document, "initial");
    auto action_labels = require_labels(document, "actions");
    auto observation_labels = require_labels(document, "observations");

    std::map<std::string, std::uint32_t> action_index;
    for (std::uint32_t a = 0; a < action_labels.size(); ++a) {
        if (!action_index.emplace(action_labels[a], a).second) {
            throw SchemaError("field 'actions' contains duplicate label '" + action_labels[a] + "'");
        }
    }
    std::map<std::string, std::uint32_t> obs_index;
    for (std::uint32_t z = 0; z < observation_labels.size(); ++z) {
        if (!obs_index.emplace(observation_labels[z], z).second) {
            throw SchemaError("field 'observations' contains duplicate label '" + observation_labels[z] + "'");
        }
    }

    json const& obs = require(document, "obs");
    if (!obs.is_array() || obs.size() != num_states) {
        throw SchemaError("field 'obs' must list one observation index per state");
    }
    std::vector<ObsId> observation_of;
    for (auto const& entry : obs) {
        if (!entry.is_number_integer() || entry.get<std::int64_t>() < 0 ||
            entry.get<std::uint64_t>() >= observation_labels.size()) {
            throw SchemaError("field 'obs' contains an invalid observation index");
        }
        observation_of.push_back(entry.get<ObsId>());
    }

    json const& target_obs = require(document, "target_obs");
    if (!target_obs.is_string()) {
        throw SchemaError("field 'target_obs' must be an observation label");
    }
    ObsId const target = lookup(obs_index, target_obs.get<std::string>(), "target_obs");

    if (initial >= num_states) {
        throw SchemaError("field 'initial' is out of range");
    }

    bool const with_rewards = document.contains("rewards");
    std::map<std::pair<std::uint64_t, ActionId>, double> rewards;
    if (with_rewards) {
        json const& entries = document["rewards"];
        if (!entries.is_array()) {
            throw SchemaError("field 'rewards' must be an array");
        }
        for (auto const& entry : entries) {
            std::uint64_t from = require_index(entry, "from");
            json const& action = require(entry, "action");
            if (!action.is_string()) {
                throw SchemaError("field 'action' must be an action label");
            }
            json const& value = require(entry, "value");
            if (!value.is_number()) {
                throw SchemaError("field 'value' must be a number");
            }
            rewards[{from, lookup(action_index, action.get<std::string>(), "action")}] = value.get<double>();
        }
    }

    MdpBuilder builder(action_labels, with_rewards);
    builder.add_states(num_states);
    builder.set_initial(static_cast<StateId>(initial));

    json const& transitions = require(document, "transitions");
    if (!transitions.is_array()) {
        throw SchemaError("field 'transitions' must be an array");
    }
    for (auto const& entry : transitions) {
        std::uint64_t from = require_index(entry, "from");
        if (from >= num_states) {
            throw SchemaError("field 'from' is out of range");
        }
        json const& action = require(entry, "action");
        if (!action.is_string()) {
            throw SchemaError("field 'action' must be an action label");
        }
        ActionId a = lookup(action_index, action.get<std::string>(), "action");
        json const& to = require(entry, "to");
        if (!to.is_array()) {
            throw SchemaError("field 'to' must be an array");
        }
        Distribution row;
        double mass = 0.0;
        for (auto const& succ : to) {
            std::uint64_t target_state = require_index(succ, "state");
            if (target_state >= num_states) {
                throw SchemaError("field 'state' is out of range");
            }
            double p = parse_probability(require(succ, "prob"));
            row.push_back({static_cast<StateId>(target_state), p});
            mass += p;
        }
        // Rows within 1e-9 of unit mass are rescaled; exact-up-to-rounding rows are kept verbatim
        // so that emitting and re-parsing is the identity.
        if (std::abs(mass - 1.0) <= 1e-9 && std::abs(mass - 1.0) > 1e-12) {
            for (auto& t : row) {
                t.probability /= mass;
            }
        }
        double reward = 0.0;
        if (auto it = rewards.find({from, a}); it != rewards.end()) {
            reward = it->second;
        }
        builder.add_choice(static_cast<StateId>(from), a, std::move(row), reward);
    }
    for (auto const& [key, value] : rewards) {
        if (key.first >= num_states) {
            throw SchemaError("field 'from' in 'rewards' is out of range");
        }
    }

    Pomdp model(std::move(builder).build(), std::move(observation_labels), std::move(observation_of), target);
    auto violations = validate(model);
    if (!violations.empty()) {
        std::ostringstream message;
        message << "model violates " << violations.size() << " invariant(s):";
        for (auto const& v : violations) {
            message << "\n  " << v.rule << " at " << v.location;
        }
        throw ValidationError(message.str());
    }
    return model;
}

std::string emit_model(Pomdp const& model) {
    Mdp const& mdp = model.mdp();
    json document;
    document["states"] = mdp.num_states();
    document["initial"] = mdp.initial_state();
    document["actions"] = mdp.action_labels();
    document["observations"] = model.observation_labels();
    document["obs"] = model.observations();
    document["target_obs"] = model.observation_labels()[model.target_observation()];
    json transitions = json::array();
    json rewards = json::array();
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        for (std::size_t c = mdp.first_choice(s); c < mdp.end_choice(s); ++c) {
            json row = json::array();
            for (auto const& t : mdp.successors(c)) {
                row.push_back({{"state", t.target}, {"prob", t.probability}});
            }
            std::string const& label = mdp.action_labels()[mdp.choice_action(c)];
            transitions.push_back({{"from", s}, {"action", label}, {"to", std::move(row)}});
            if (mdp.has_rewards() && mdp.choice_reward(c) != 0.0) {
                rewards.push_back({{"from", s}, {"action", label}, {"value", mdp.choice_reward(c)}});
            }
        }
    }
    document["transitions"] = std::move(transitions);
    if (mdp.has_rewards()) {
        document["rewards"] = std::move(rewards);
    }
    return document.dump(1) + "\n";
}

}  // namespace saynt::models

#include <sstream>

#include "json.hpp"
#include "saynt/errors.h"
#include "saynt/fsc.h"

namespace saynt::fsc {

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

std::uint64_t require_below(json const& object, char const* field, std::uint64_t bound) {
    std::uint64_t value = require_index(object, field);
    if (value >= bound) {
        throw SchemaError(std::string("field '") + field + "' is out of range");
    }
    return value;
}

}  // namespace

std::string export_fsc(Fsc const& fsc) {
    json document;
    document["nodes"] = fsc.num_nodes();
    document["observations"] = fsc.num_observations();
    document["initial"] = fsc.initial_node();
    document["posterior_unaware"] = fsc.posterior_unaware();
    if (fsc.memory_model()) {
        document["memory_model"] = *fsc.memory_model();
    }
    json gamma = json::array();
    json delta = json::array();
    for (NodeId n = 0; n < fsc.num_nodes(); ++n) {
        for (ObsId z = 0; z < fsc.num_observations(); ++z) {
            gamma.push_back({{"node", n}, {"obs", z}, {"action", fsc.action(n, z)}});
            UpdateRow const& row = fsc.update(n, z);
            delta.push_back({{"node", n}, {"obs", z}, {"next", row.fallback}});
            for (auto const& [post, next] : row.by_posterior) {
                delta.push_back({{"node", n}, {"obs", z}, {"post_obs", post}, {"next", next}});
            }
        }
    }
    document["gamma"] = std::move(gamma);
    document["delta"] = std::move(delta);
    if (auto const& composite = fsc.composite()) {
        document["cutoff"] = {{"explored", composite->explored},
                              {"explored_obs", composite->explored_obs},
                              {"inner_size_gamma", composite->inner_size_gamma},
                              {"inner_size_delta", composite->inner_size_delta}};
    }
    return document.dump() + "\n";
}

Fsc import_fsc(std::string_view text) {
    json document;
    try {
        document = json::parse(text.begin(), text.end());
    } catch (json::parse_error const& e) {
        throw ParseError(std::string("malformed controller JSON: ") + e.what(), e.byte);
    }
    if (!document.is_object()) {
        throw SchemaError("controller document must be a JSON object");
    }
    std::uint64_t const nodes = require_index(document, "nodes");
    std::uint64_t const observations = require_index(document, "observations");
    if (nodes == 0) {
        throw SchemaError("field 'nodes' must be positive");
    }
    Fsc fsc(nodes, observations, static_cast<NodeId>(require_below(document, "initial", nodes)));
    json const& unaware = require(document, "posterior_unaware");
    if (!unaware.is_boolean()) {
        throw SchemaError("field 'posterior_unaware' must be a boolean");
    }
    fsc.set_posterior_unaware(unaware.get<bool>());
    if (document.contains("memory_model")) {
        json const& mu = document["memory_model"];
        if (!mu.is_array() || mu.size() != observations) {
            throw SchemaError("field 'memory_model' must list one count per observation");
        }
        std::vector<std::size_t> model;
        for (auto const& entry : mu) {
            if (!entry.is_number_integer() || entry.get<std::int64_t>() < 1) {
                throw SchemaError("field 'memory_model' must contain positive integers");
            }
            model.push_back(entry.get<std::size_t>());
        }
        fsc.set_memory_model(std::move(model));
    }
    json const& gamma = require(document, "gamma");
    if (!gamma.is_array()) {
        throw SchemaError("field 'gamma' must be an array");
    }
    for (auto const& entry : gamma) {
        auto n = static_cast<NodeId>(require_below(entry, "node", nodes));
        auto z = static_cast<ObsId>(require_below(entry, "obs", observations));
        fsc.set_action(n, z, static_cast<ActionId>(require_index(entry, "action")));
    }
    json const& delta = require(document, "delta");
    if (!delta.is_array()) {
        throw SchemaError("field 'delta' must be an array");
    }
    for (auto const& entry : delta) {
        auto n = static_cast<NodeId>(require_below(entry, "node", nodes));
        auto z = static_cast<ObsId>(require_below(entry, "obs", observations));
        auto next = static_cast<NodeId>(require_below(entry, "next", nodes));
        if (entry.contains("post_obs")) {
            fsc.set_next(n, z, static_cast<ObsId>(require_below(entry, "post_obs", observations)), next);
        } else {
            UpdateRow row = fsc.update(n, z);
            row.fallback = next;
            fsc.set_update(n, z, std::move(row));
        }
    }
    if (document.contains("cutoff")) {
        json const& cutoff = document["cutoff"];
        BeliefComposite composite;
        composite.explored = require_index(cutoff, "explored");
        composite.inner_size_gamma = require_index(cutoff, "inner_size_gamma");
        composite.inner_size_delta = require_index(cutoff, "inner_size_delta");
        json const& obs = require(cutoff, "explored_obs");
        if (!obs.is_array() || obs.size() != composite.explored) {
            throw SchemaError("field 'explored_obs' must list one observation per explored node");
        }
        for (auto const& z : obs) {
            if (!z.is_number_integer() || z.get<std::int64_t>() < 0 || z.get<std::uint64_t>() >= observations) {
                throw SchemaError("field 'explored_obs' contains an invalid observation");
            }
            composite.explored_obs.push_back(z.get<ObsId>());
        }
        fsc.set_composite(std::move(composite));
    }
    return fsc;
}

}  // namespace saynt::fsc

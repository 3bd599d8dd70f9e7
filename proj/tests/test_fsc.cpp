#include "doctest.h"


#include "saynt/checker.h"
#include "saynt/errors.h"
#include "saynt/fsc.h"
#include "saynt/generators.h"
#include "support.h"

using namespace saynt;
using models::Objective;

namespace {

constexpr Objective all_objectives[] = {Objective::MaxProb, Objective::MinProb, Objective::MaxReward,
                                        Objective::MinReward};

}  // namespace

TEST_CASE("always-alpha on the two-corridor example takes four steps") {
    auto model = generators::fig2a();
    std::vector<models::ActionId> alpha(model.num_observations(), 0);
    auto value = fsc::evaluate(model, fsc::memoryless(model, alpha), Objective::MinReward);
    CHECK(value.value == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(testing::oracle_fsc_value(model, fsc::memoryless(model, alpha), Objective::MinReward) ==
          doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("one-node controllers are memoryless observation-based policies") {
    std::mt19937 rng(51);
    for (int round = 0; round < 100; ++round) {
        auto pomdp = testing::random_pomdp(rng);
        auto controller = testing::random_fsc(rng, pomdp, 1, round % 2 == 0);
        checker::MemorylessPolicy policy;
        checker::TargetSet targets;
        for (models::StateId s = 0; s < pomdp.num_states(); ++s) {
            policy.choice.push_back(*pomdp.mdp().choice_of(s, controller.action(0, pomdp.observation(s))));
            targets.push_back(pomdp.is_target(s));
        }
        for (Objective objective : all_objectives) {
            auto values = fsc::evaluate(pomdp, controller, objective);
            auto expected = checker::induced_values(pomdp.mdp(), policy, targets, objective);
            for (models::StateId s = 0; s < pomdp.num_states(); ++s) {
                CHECK(testing::close(values.at(s, 0), expected[s], 1e-9));
            }
        }
    }
}

TEST_CASE("pair values match the dense product oracle") {
    std::mt19937 rng(53);
    for (int round = 0; round < 150; ++round) {
        auto pomdp = testing::random_pomdp(rng);
        std::size_t nodes = 1 + round % 3;
        auto controller = testing::random_fsc(rng, pomdp, nodes, round % 2 == 1);
        controller.set_initial_node(static_cast<fsc::NodeId>(round % nodes));
        REQUIRE(fsc::validate(pomdp, controller).empty());
        for (Objective objective : all_objectives) {
            auto values = fsc::evaluate(pomdp, controller, objective);
            auto expected = testing::oracle_pair_values(pomdp, controller, objective);
            REQUIRE(values.pair_values.size() == expected.size());
            for (std::size_t i = 0; i < expected.size(); ++i) {
                CHECK(testing::close(values.pair_values[i], expected[i], 1e-9));
            }
            double initial = testing::oracle_fsc_value(pomdp, controller, objective);
            CHECK(testing::close(values.value, initial, 1e-9));
            CHECK(testing::close(fsc::evaluate_initial(pomdp, controller, objective), initial, 1e-9));
        }
    }
}

TEST_CASE("induced chain is a reachable stochastic product") {
    std::mt19937 rng(57);
    for (int round = 0; round < 100; ++round) {
        auto pomdp = testing::random_pomdp(rng);
        std::size_t nodes = 1 + round % 3;
        auto controller = testing::random_fsc(rng, pomdp, nodes, false);
        auto induced = fsc::induced_mc(pomdp, controller);
        auto const& chain = induced.chain;
        CHECK(chain.is_markov_chain());
        CHECK(chain.num_states() <= pomdp.num_states() * nodes);
        CHECK(induced.pairs[chain.initial_state()] ==
              std::pair<models::StateId, fsc::NodeId>{pomdp.mdp().initial_state(), controller.initial_node()});
        std::vector<bool> seen(chain.num_states(), false);
        std::vector<models::StateId> stack{chain.initial_state()};
        seen[chain.initial_state()] = true;
        while (!stack.empty()) {
            auto s = stack.back();
            stack.pop_back();
            double mass = 0.0;
            for (auto const& t : chain.successors(chain.first_choice(s))) {
                mass += t.probability;
                if (!seen[t.target]) {
                    seen[t.target] = true;
                    stack.push_back(t.target);
                }
            }
            CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
        }
        for (bool reached : seen) {
            CHECK(reached);
        }
    }
}

TEST_CASE("a disabled action names the offending pair") {
    models::MdpBuilder builder({"a", "b"});
    builder.add_states(2);
    builder.add_choice(0, 0, {{1, 1.0}});
    builder.add_choice(1, 0, {{1, 1.0}});
    models::Pomdp pomdp(std::move(builder).build(), {"o", "goal"}, {0, 1}, 1);
    fsc::Fsc controller(1, 2);
    controller.set_action(0, 0, 1);
    CHECK(!fsc::validate(pomdp, controller).empty());
    CHECK_THROWS_WITH_AS(fsc::induced_mc(pomdp, controller), doctest::Contains("state 0"), ModelError);
}

TEST_CASE("unreachable target gives probability zero") {
    models::MdpBuilder builder({"a"});
    builder.add_states(2);
    builder.add_choice(0, 0, {{0, 1.0}});
    builder.add_choice(1, 0, {{1, 1.0}});
    models::Pomdp pomdp(std::move(builder).build(), {"o", "goal"}, {0, 1}, 1);
    CHECK(fsc::evaluate(pomdp, fsc::lowest_action_fsc(pomdp), Objective::MaxProb).value == 0.0);
}

TEST_CASE("no controller beats the belief optimum") {
    std::mt19937 rng(59);
    for (int round = 0; round < 60; ++round) {
        testing::RandomShape shape;
        shape.acyclic = true;
        auto pomdp = testing::random_pomdp(rng, shape);
        for (Objective objective : all_objectives) {
            double optimum = testing::exact_belief_value(pomdp, objective);
            for (int trial = 0; trial < 10; ++trial) {
                auto controller = testing::random_fsc(rng, pomdp, 1 + trial % 3, trial % 2 == 0);
                double v = fsc::evaluate(pomdp, controller, objective).value;
                if (models::is_maximizing(objective)) {
                    CHECK(v <= optimum + 1e-9);
                } else {
                    CHECK(v >= optimum - 1e-9);
                }
            }
        }
    }
}

TEST_CASE("nodes beyond the memory of an observation act like the initial node") {
    std::mt19937 rng(61);
    for (int round = 0; round < 80; ++round) {
        auto pomdp = testing::random_pomdp(rng);
        auto controller = testing::random_mu_fsc(rng, pomdp, 3, round % 2 == 0);
        REQUIRE(fsc::validate(pomdp, controller).empty());
        for (Objective objective : all_objectives) {
            auto values = fsc::evaluate(pomdp, controller, objective);
            for (models::StateId s = 0; s < pomdp.num_states(); ++s) {
                auto mu = (*controller.memory_model())[pomdp.observation(s)];
                for (fsc::NodeId i = static_cast<fsc::NodeId>(mu); i < 3; ++i) {
                    CHECK(values.at(s, i) == values.at(s, 0));
                }
            }
        }
    }
}

TEST_CASE("controller invariants are validated") {
    auto pomdp = generators::fig4a();
    auto controller = fsc::lowest_action_fsc(pomdp);
    CHECK(fsc::validate(pomdp, controller).empty());
    auto aware_row = controller;
    aware_row.set_next(0, 0, 1, 0);
    aware_row.set_posterior_unaware(true);
    CHECK(!fsc::validate(pomdp, aware_row).empty());

    fsc::Fsc two(2, pomdp.num_observations());
    two.set_memory_model(std::vector<std::size_t>(pomdp.num_observations(), 1));
    CHECK(fsc::validate(pomdp, two).empty());
    two.set_action(1, 1, 1);
    CHECK(!fsc::validate(pomdp, two).empty());
}

TEST_CASE("sizes follow the explicit adjacency lists") {
    std::mt19937 rng(67);
    for (int round = 0; round < 100; ++round) {
        auto pomdp = testing::random_pomdp(rng);
        bool unaware = round % 2 == 0;
        auto controller = round % 4 < 2 ? testing::random_fsc(rng, pomdp, 1 + round % 3, unaware)
                                        : testing::random_mu_fsc(rng, pomdp, 1 + round % 3, unaware);
        CHECK(fsc::fsc_size(pomdp, controller) == testing::oracle_size(pomdp, controller));
    }
}

TEST_CASE("size formulas are ordered from general to posterior-unaware") {
    std::mt19937 rng(71);
    for (int round = 0; round < 60; ++round) {
        auto pomdp = testing::random_pomdp(rng);
        auto mu_aware = testing::random_mu_fsc(rng, pomdp, 3, false);
        auto general = mu_aware;
        general.set_memory_model(std::nullopt);
        auto mu_unaware = mu_aware;
        for (fsc::NodeId n = 0; n < 3; ++n) {
            for (models::ObsId z = 0; z < pomdp.num_observations(); ++z) {
                mu_unaware.set_update(n, z, fsc::UpdateRow{mu_aware.update(n, z).fallback, {}});
            }
        }
        mu_unaware.set_posterior_unaware(true);
        auto const a = fsc::fsc_size(pomdp, general);
        auto const b = fsc::fsc_size(pomdp, mu_aware);
        auto const c = fsc::fsc_size(pomdp, mu_unaware);
        CHECK(a.gamma >= b.gamma);
        CHECK(a.delta >= b.delta);
        CHECK(b.gamma == c.gamma);
        CHECK(b.delta >= c.delta);
    }
}

TEST_CASE("memoryless posterior-unaware controller on lanes has size five plus five") {
    auto pomdp = generators::lanes();
    REQUIRE(pomdp.num_observations() == 5);
    auto controller = fsc::lowest_action_fsc(pomdp);
    controller.set_memory_model(std::vector<std::size_t>(5, 1));
    auto size = fsc::fsc_size(pomdp, controller);
    CHECK(size == fsc::FscSize{5, 5});
    CHECK(size.total() == 10);
}

TEST_CASE("controllers where every pair reaches every posterior") {
    // Two observations; each state's only action moves uniformly to both states.
    models::MdpBuilder builder({"a"});
    builder.add_states(3);
    builder.add_choice(0, 0, {{0, 0.5}, {1, 0.5}});
    builder.add_choice(1, 0, {{0, 0.5}, {1, 0.5}});
    builder.add_choice(2, 0, {{2, 1.0}});
    models::Pomdp pomdp(std::move(builder).build(), {"x", "y", "goal"}, {0, 1, 2}, 2);
    fsc::Fsc controller(3, 3);
    // Posterior x and y both possible from x and y; goal loops to itself.
    auto size = fsc::fsc_size(pomdp, controller);
    CHECK(size.gamma == 3 * 3);
    CHECK(size.delta == 2 * 3 * (2 + 2 + 1));
}

TEST_CASE("JSON export round-trip") {
    std::mt19937 rng(73);
    for (int round = 0; round < 100; ++round) {
        auto pomdp = testing::random_pomdp(rng);
        auto controller = round % 2 == 0 ? testing::random_fsc(rng, pomdp, 1 + round % 4, round % 4 == 0)
                                         : testing::random_mu_fsc(rng, pomdp, 2, round % 3 == 0);
        auto again = fsc::import_fsc(fsc::export_fsc(controller));
        CHECK(again == controller);
        CHECK(again.posterior_unaware() == controller.posterior_unaware());
        CHECK(fsc::evaluate(pomdp, again, Objective::MaxProb).value ==
              fsc::evaluate(pomdp, controller, Objective::MaxProb).value);
    }
}

TEST_CASE("malformed controller documents") {
    CHECK_THROWS_AS(fsc::import_fsc("{"), ParseError);
    CHECK_THROWS_WITH_AS(fsc::import_fsc(R"({"nodes": 1})"), doctest::Contains("observations"), SchemaError);
    CHECK_THROWS_AS(fsc::import_fsc(R"({"nodes": 1, "observations": 1, "initial": 0, "posterior_unaware": true,
        "gamma": [{"node": 3, "obs": 0, "action": 0}], "delta": []})"),
                    SchemaError);
}

TEST_CASE("DOT output lists nodes and labelled edges") {
    auto pomdp = generators::fig2b();
    auto dot = fsc::to_dot(pomdp, fsc::lowest_action_fsc(pomdp));
    CHECK(dot.find("digraph") == 0);
    CHECK(dot.find("blue/alpha") != std::string::npos);
}

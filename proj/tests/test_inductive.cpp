#include "doctest.h"

#include <cmath>
#include <set>

#include "saynt/errors.h"
#include "saynt/fsc.h"
#include "saynt/generators.h"
#include "saynt/inductive.h"
#include "support.h"

using namespace saynt;
using models::Objective;

namespace {

constexpr Objective all_objectives[] = {Objective::MaxProb, Objective::MinProb, Objective::MaxReward,
                                        Objective::MinReward};

inductive::MemoryModel random_memory(std::mt19937& rng, models::Pomdp const& pomdp, std::size_t max_nodes) {
    inductive::MemoryModel memory(pomdp.num_observations());
    for (auto& m : memory) {
        m = std::uniform_int_distribution<std::size_t>(1, max_nodes)(rng);
    }
    return memory;
}

/// Random small family, retried until it has at most `limit` members.
inductive::FamilySpace small_family(std::mt19937& rng, models::Pomdp const& pomdp, double limit) {
    while (true) {
        bool unaware = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
        auto family = inductive::full_family(pomdp, random_memory(rng, pomdp, 2), unaware);
        if (family.size() <= limit) {
            return family;
        }
    }
}

}  // namespace

TEST_CASE("the target observation gets a single node and a single action") {
    auto pomdp = generators::fig2b();
    inductive::DesignSpace space(pomdp, inductive::MemoryModel(pomdp.num_observations(), 3), false);
    CHECK(space.memory()[pomdp.target_observation()] == 1);
    auto const& target_hole = space.holes()[space.action_hole(pomdp.target_observation(), 0)];
    CHECK(target_hole.domain.size() == 1);
}

TEST_CASE("posterior-aware family of the lanes model with eight nodes per lane observation") {
    // Counting only the holes of the three lane observations; the start observation adds its own.
    auto pomdp = generators::lanes();
    inductive::MemoryModel memory(pomdp.num_observations(), 8);
    auto family = inductive::full_family(pomdp, memory, false);
    double lane_log = 0.0;
    auto const& labels = pomdp.observation_labels();
    for (std::size_t h = 0; h < family.options.size(); ++h) {
        auto const& label = labels[family.space->holes()[h].obs];
        if (label == "slow" || label == "moderate" || label == "fast") {
            lane_log += std::log10(static_cast<double>(family.options[h].size()));
        }
    }
    // Per lane observation: 8 action holes of 2 options, and per node 8 choices for each of the
    // posterior observations reachable from that lane.
    CHECK(lane_log >= 40.0);
    CHECK(lane_log <= 46.0);
}

TEST_CASE("realized members are well-formed controllers") {
    std::mt19937 rng(5);
    for (int round = 0; round < 50; ++round) {
        auto pomdp = testing::random_pomdp(rng);
        auto family = small_family(rng, pomdp, 300);
        testing::enumerate_family(family, [&](std::vector<std::uint32_t> const& assignment) {
            auto controller = inductive::realize(pomdp, *family.space, assignment);
            CHECK(fsc::validate(pomdp, controller).empty());
            CHECK(controller.posterior_unaware() == family.space->posterior_unaware());
        });
    }
}

TEST_CASE("abstraction bounds sandwich every member") {
    std::mt19937 rng(17);
    for (int round = 0; round < 60; ++round) {
        auto pomdp = testing::random_pomdp(rng);
        auto family = small_family(rng, pomdp, 200);
        auto abstraction = inductive::build_abstraction(pomdp, family);
        for (Objective objective : all_objectives) {
            auto result = inductive::check_abstraction(abstraction, objective, true);
            REQUIRE(result.lower.has_value());
            REQUIRE(result.upper.has_value());
            testing::enumerate_family(family, [&](std::vector<std::uint32_t> const& assignment) {
                double v = testing::oracle_fsc_value(pomdp, inductive::realize(pomdp, *family.space, assignment),
                                                     objective);
                CHECK((v >= *result.lower - 1e-7 || (std::isinf(v) && std::isinf(*result.lower))));
                CHECK((v <= *result.upper + 1e-7 || std::isinf(*result.upper)));
            });
        }
    }
}

TEST_CASE("splitting partitions a family") {
    std::mt19937 rng(23);
    for (int round = 0; round < 60; ++round) {
        auto pomdp = testing::random_pomdp(rng);
        auto family = small_family(rng, pomdp, 400);
        if (family.is_singleton()) {
            CHECK_THROWS_AS(inductive::split(family, inductive::AbstractionResult{}), ModelError);
            continue;
        }
        auto result = inductive::check_abstraction(inductive::build_abstraction(pomdp, family), Objective::MaxProb);
        auto [left, right] = inductive::split(family, result);
        CHECK(left.size() + right.size() == doctest::Approx(family.size()));
        testing::enumerate_family(family, [&](std::vector<std::uint32_t> const& assignment) {
            CHECK(left.contains(assignment) != right.contains(assignment));
        });
    }
}

TEST_CASE("restriction partitions cover the family without overlap") {
    std::mt19937 rng(29);
    for (int round = 0; round < 40; ++round) {
        auto pomdp = testing::random_pomdp(rng);
        auto family = small_family(rng, pomdp, 400);
        inductive::ActionSets restriction(pomdp.num_observations());
        for (models::ObsId z = 0; z < pomdp.num_observations(); ++z) {
            restriction[z] = {pomdp.actions_of(z).front()};
        }
        auto parts = inductive::partition_by_restriction(family, restriction);
        REQUIRE(!parts.empty());
        double total = 0.0;
        for (auto const& part : parts) {
            total += part.size();
        }
        CHECK(total == doctest::Approx(family.size()));
        testing::enumerate_family(family, [&](std::vector<std::uint32_t> const& assignment) {
            int owners = 0;
            for (auto const& part : parts) {
                owners += part.contains(assignment) ? 1 : 0;
            }
            CHECK(owners == 1);
        });
        // Every member of the first part plays only restricted actions.
        auto const& space = *parts.front().space;
        for (std::size_t h = 0; h < space.holes().size(); ++h) {
            if (space.holes()[h].kind == inductive::Hole::Kind::Action) {
                for (auto option : parts.front().options[h]) {
                    CHECK(option == restriction[space.holes()[h].obs].front());
                }
            }
        }
    }
}

TEST_CASE("an empty restriction intersection is a configuration error") {
    auto pomdp = generators::fig2b();
    inductive::ActionSets restriction(pomdp.num_observations());
    restriction[pomdp.observation(pomdp.mdp().initial_state())] = {99};
    CHECK_THROWS_AS(inductive::full_family(pomdp, inductive::MemoryModel(pomdp.num_observations(), 1), false,
                                           restriction),
                    ConfigError);
}

TEST_CASE("exhaustive search finds the family optimum") {
    std::mt19937 rng(31);
    for (int round = 0; round < 80; ++round) {
        auto pomdp = testing::random_pomdp(rng);
        auto family = small_family(rng, pomdp, 500);
        for (Objective objective : all_objectives) {
            CAPTURE(round);
            CAPTURE(models::to_string(objective));
            double expected = testing::brute_force_family(pomdp, family, objective);
            auto result = inductive::synthesize(pomdp, objective, {family}, std::nullopt, std::nullopt, {});
            CHECK(result.remaining.empty());
            if (std::isinf(expected) && expected == models::worst_value(objective)) {
                // Nothing beats the worst value; a found controller must attain it.
                if (result.best) {
                    CHECK(testing::close(testing::oracle_fsc_value(pomdp, *result.best, objective), expected, 1e-7));
                }
                continue;
            }
            REQUIRE(result.best.has_value());
            CHECK(testing::close(result.value, expected, 1e-7));
            CHECK(testing::close(testing::oracle_fsc_value(pomdp, *result.best, objective), expected, 1e-7));
            CHECK(result.stats.queries() >= 1);

            // With the optimum as incumbent nothing strictly better exists.
            auto again = inductive::synthesize(pomdp, objective, {family}, expected, std::nullopt, {});
            CHECK(!again.best.has_value());
        }
    }
}

TEST_CASE("search stops at the deadline and hands back the unexplored part") {
    auto pomdp = generators::lanes();
    auto family = inductive::full_family(pomdp, inductive::MemoryModel(pomdp.num_observations(), 2), false);
    inductive::SynthesisOptions options;
    options.deadline = std::chrono::steady_clock::now();
    auto result = inductive::synthesize(pomdp, Objective::MinReward, {family}, std::nullopt, std::nullopt, options);
    CHECK(!result.remaining.empty());
}

TEST_CASE("memory model from action sets") {
    inductive::ActionSets sets{{0, 1, 2}, {}, {1}};
    CHECK(inductive::memory_model_from(sets) == inductive::MemoryModel{3, 1, 1});
}

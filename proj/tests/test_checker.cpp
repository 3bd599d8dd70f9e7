#include "doctest.h"

#include <cmath>
#include <limits>

#include "saynt/checker.h"
#include "saynt/errors.h"
#include "support.h"

using namespace saynt;
using models::Objective;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

/// Symmetric random walk on 0..n, both ends absorbing; only n is a target.
models::Mdp random_walk(std::size_t n, bool rewards) {
    models::MdpBuilder builder({"step"}, rewards);
    builder.add_states(n + 1);
    for (models::StateId s = 0; s <= n; ++s) {
        if (s == 0 || s == n) {
            builder.add_choice(s, 0, {{s, 1.0}}, 0.0);
        } else {
            builder.add_choice(s, 0, {{s - 1, 0.5}, {s + 1, 0.5}}, 1.0);
        }
    }
    return std::move(builder).build();
}

checker::TargetSet targets_of(models::Pomdp const& pomdp) {
    checker::TargetSet targets(pomdp.num_states());
    for (models::StateId s = 0; s < pomdp.num_states(); ++s) {
        targets[s] = pomdp.is_target(s);
    }
    return targets;
}

constexpr Objective all_objectives[] = {Objective::MaxProb, Objective::MinProb, Objective::MaxReward,
                                        Objective::MinReward};

}  // namespace

TEST_CASE("random walk reachability matches the gambler's ruin formula") {
    std::size_t const n = 6;
    auto mc = random_walk(n, false);
    checker::TargetSet targets(n + 1, false);
    targets[n] = true;
    auto values = checker::check_mc(mc, targets, Objective::MaxProb);
    for (std::size_t i = 0; i <= n; ++i) {
        CHECK(values[i] == doctest::Approx(static_cast<double>(i) / n).epsilon(1e-12));
    }
}

TEST_CASE("expected steps of a walk absorbed at both ends") {
    std::size_t const n = 6;
    auto mc = random_walk(n, true);
    checker::TargetSet both(n + 1, false);
    both[0] = both[n] = true;
    auto steps = checker::check_mc(mc, both, Objective::MinReward);
    for (std::size_t i = 0; i <= n; ++i) {
        CHECK(steps[i] == doctest::Approx(static_cast<double>(i * (n - i))).epsilon(1e-12));
    }
    // With only the right end as target, the walk gets stuck at 0 with positive probability.
    checker::TargetSet right(n + 1, false);
    right[n] = true;
    auto diverging = checker::check_mc(mc, right, Objective::MinReward);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::isinf(diverging[i]));
    }
    CHECK(diverging[n] == 0.0);
}

TEST_CASE("check_mc rejects models with nondeterminism") {
    models::MdpBuilder builder({"a", "b"});
    builder.add_states(2);
    builder.add_choice(0, 0, {{1, 1.0}});
    builder.add_choice(0, 1, {{0, 1.0}});
    builder.add_choice(1, 0, {{1, 1.0}});
    auto mdp = std::move(builder).build();
    CHECK_THROWS_AS(checker::check_mc(mdp, {false, true}, Objective::MaxProb), ModelError);
}

TEST_CASE("reward objectives need a reward structure") {
    auto mdp = random_walk(3, false);
    CHECK_THROWS_AS(checker::check_mdp(mdp, {false, false, false, true}, Objective::MinReward), ConfigError);
}

TEST_CASE("zero-reward cycles do not fake a finite minimum") {
    // s0 can loop for free (never reaching the target) or pay 5 to reach it.
    models::MdpBuilder builder({"loop", "go"}, true);
    builder.add_states(2);
    builder.add_choice(0, 0, {{0, 1.0}}, 0.0);
    builder.add_choice(0, 1, {{1, 1.0}}, 5.0);
    builder.add_choice(1, 0, {{1, 1.0}}, 0.0);
    auto mdp = std::move(builder).build();
    auto min = checker::check_mdp(mdp, {false, true}, Objective::MinReward);
    CHECK(min.values[0] == doctest::Approx(5.0));
    CHECK(mdp.choice_action(min.policy.choice[0]) == 1);
    auto max = checker::check_mdp(mdp, {false, true}, Objective::MaxReward);
    CHECK(max.values[0] == inf);
}

TEST_CASE("optimal values agree with exhaustive policy enumeration") {
    std::mt19937 rng(7);
    for (int round = 0; round < 300; ++round) {
        testing::RandomShape shape;
        shape.max_actions = 3;
        shape.max_states = 7;
        auto pomdp = testing::random_pomdp(rng, shape);
        auto const& mdp = pomdp.mdp();
        auto targets = targets_of(pomdp);
        for (Objective objective : all_objectives) {
            CAPTURE(round);
            CAPTURE(models::to_string(objective));
            auto result = checker::check_mdp(mdp, targets, objective);
            auto expected = testing::brute_force_mdp(mdp, targets, objective);
            auto achieved = testing::policy_values(mdp, result.policy.choice, targets, objective);
            for (models::StateId s = 0; s < mdp.num_states(); ++s) {
                CAPTURE(s);
                CHECK(testing::close(result.values[s], expected[s], 1e-7));
                CHECK(testing::close(achieved[s], expected[s], 1e-7));
                CHECK(mdp.first_choice(s) <= result.policy.choice[s]);
                CHECK(result.policy.choice[s] < mdp.end_choice(s));
            }
            CHECK(checker::bellman_residual(mdp, targets, objective, result.values) < 1e-7);
        }
    }
}

TEST_CASE("induced values match the dense oracle for arbitrary policies") {
    std::mt19937 rng(11);
    for (int round = 0; round < 200; ++round) {
        auto pomdp = testing::random_pomdp(rng);
        auto const& mdp = pomdp.mdp();
        auto targets = targets_of(pomdp);
        checker::MemorylessPolicy policy;
        for (models::StateId s = 0; s < mdp.num_states(); ++s) {
            std::uniform_int_distribution<std::size_t> pick(mdp.first_choice(s), mdp.end_choice(s) - 1);
            policy.choice.push_back(pick(rng));
        }
        for (Objective objective : all_objectives) {
            auto values = checker::induced_values(mdp, policy, targets, objective);
            auto expected = testing::policy_values(mdp, policy.choice, targets, objective);
            for (models::StateId s = 0; s < mdp.num_states(); ++s) {
                CHECK(testing::close(values[s], expected[s], 1e-9));
            }
        }
    }
}

TEST_CASE("probabilities stay in the unit interval and targets have fixed values") {
    std::mt19937 rng(3);
    for (int round = 0; round < 100; ++round) {
        auto pomdp = testing::random_pomdp(rng);
        auto targets = targets_of(pomdp);
        for (Objective objective : all_objectives) {
            auto result = checker::check_mdp(pomdp.mdp(), targets, objective);
            for (models::StateId s = 0; s < pomdp.num_states(); ++s) {
                if (targets[s]) {
                    CHECK(result.values[s] == (models::is_reward(objective) ? 0.0 : 1.0));
                } else if (!models::is_reward(objective)) {
                    CHECK(result.values[s] >= 0.0);
                    CHECK(result.values[s] <= 1.0);
                } else {
                    CHECK(result.values[s] >= 0.0);
                }
            }
        }
    }
}

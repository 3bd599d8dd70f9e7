#pragma once

// Independent reference implementations used as test oracles. None of them calls the library's
// checker, belief or inductive code; they work on dense matrices and plain recursion.

#include <functional>
#include <random>
#include <vector>

#include "saynt/fsc.h"
#include "saynt/inductive.h"
#include "saynt/models.h"

namespace saynt::testing {

struct RandomShape {
    std::size_t min_states = 3;
    std::size_t max_states = 6;
    std::size_t max_observations = 3;  ///< including the target observation
    std::size_t max_actions = 2;
    bool acyclic = false;
    bool rewards = true;
};

models::Pomdp random_pomdp(std::mt19937& rng, RandomShape const& shape = {});
fsc::Fsc random_fsc(std::mt19937& rng, models::Pomdp const& pomdp, std::size_t nodes, bool posterior_unaware);

/// Values of a Markov chain given as dense rows; reward[i] is the one-step reward.
std::vector<double> dense_chain_values(std::vector<std::vector<double>> const& rows, std::vector<double> const& reward,
                                       std::vector<bool> const& targets, bool with_reward);

/// Value of every state of `mdp` under every memoryless policy, best per state.
std::vector<double> brute_force_mdp(models::Mdp const& mdp, std::vector<bool> const& targets,
                                    models::Objective objective);

/// Values of a memoryless policy (one choice index per state).
std::vector<double> policy_values(models::Mdp const& mdp, std::vector<std::size_t> const& choice,
                                  std::vector<bool> const& targets, models::Objective objective);

/// Value of an FSC at (initial state, initial node), from an explicitly built dense product.
double oracle_fsc_value(models::Pomdp const& pomdp, fsc::Fsc const& fsc, models::Objective objective);
/// Value of every (state, node) pair, indexed node * |S| + state.
std::vector<double> oracle_pair_values(models::Pomdp const& pomdp, fsc::Fsc const& fsc, models::Objective objective);

/// Calls `visit` with every assignment of the family.
void enumerate_family(inductive::FamilySpace const& family,
                      std::function<void(std::vector<std::uint32_t> const&)> const& visit);

/// Optimal value over the family, by evaluating every member with the dense oracle.
double brute_force_family(models::Pomdp const& pomdp, inductive::FamilySpace const& family,
                          models::Objective objective);

/// Exact optimal belief value of an acyclic POMDP from a given belief (state -> probability).
double exact_belief_value(models::Pomdp const& pomdp, std::vector<std::pair<models::StateId, double>> const& belief,
                          models::Objective objective);
double exact_belief_value(models::Pomdp const& pomdp, models::Objective objective);

/// Random controller with a random memory model; nodes beyond mu(z) copy the initial node on prior z.
fsc::Fsc random_mu_fsc(std::mt19937& rng, models::Pomdp const& pomdp, std::size_t nodes, bool posterior_unaware);
/// Controller size counted from explicit (node, prior) -> {(posterior, next node)} adjacency lists.
fsc::FscSize oracle_size(models::Pomdp const& pomdp, fsc::Fsc const& controller);

bool close(double a, double b, double tolerance);

}  // namespace saynt::testing

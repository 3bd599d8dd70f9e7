#pragma once

#include <cstddef>
#include <vector>

#include "saynt/models.h"

namespace saynt::checker {

using models::Mdp;
using models::Objective;
using models::StateId;

/// Per-state membership in the target set. Targets must be absorbing.
using TargetSet = std::vector<bool>;

/// Selected choice (global choice index into the Mdp) per state.
struct MemorylessPolicy {
    std::vector<std::size_t> choice;

    bool operator==(MemorylessPolicy const&) const = default;
};

struct SolverOptions {
    double precision = 1e-8;          ///< sup-norm Bellman residual that ends value iteration
    std::size_t max_sweeps = 1'000'000;
    std::size_t max_policy_rounds = 1000;
};

struct CheckResult {
    /// Probability in [0,1], or expected total reward (+inf where the target is not almost surely reached).
    std::vector<double> values;
    MemorylessPolicy policy;
    double residual = 0.0;
    std::size_t sweeps = 0;
    std::size_t policy_rounds = 0;
};

/// Reachability probability or expected total reward until the targets, for a Markov chain.
std::vector<double> check_mc(Mdp const& mc, TargetSet const& targets, Objective objective);

/// Optimal values and an optimal memoryless policy.
/// Value iteration (Gauss-Seidel) gives a warm start; policy iteration with exact sparse
/// evaluation then settles the policy, so the values are those of the returned policy.
CheckResult check_mdp(Mdp const& mdp, TargetSet const& targets, Objective objective,
                      SolverOptions const& options = {});

/// Values of the Markov chain induced by `policy`.
std::vector<double> induced_values(Mdp const& mdp, MemorylessPolicy const& policy, TargetSet const& targets,
                                   Objective objective);

/// sup-norm of (Bellman operator applied to `values`) - `values` over states with finite value.
double bellman_residual(Mdp const& mdp, TargetSet const& targets, Objective objective,
                        std::vector<double> const& values);

}  // namespace saynt::checker

#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "saynt/models.h"

namespace saynt::generators {

using models::Pomdp;

/// Three circular lanes (slow, moderate, fast) of `lane_len` states each.
/// A start state with its own observation moves uniformly to the first state of every lane.
/// In every lane state one of {alpha, beta} upgrades: with probability `p_u` it moves to the next
/// position of the next lane (the target from the fast lane), otherwise to the next position of the
/// same lane; the other action stalls and moves to the next position. Positions wrap around.
/// Upgrading actions (0-based position i): slow alpha iff i even; moderate alpha iff i mod 4 < 2;
/// fast alpha iff i mod 8 < 4. Each step costs the lane's speed; the start step is free.
Pomdp lanes(double p_u = 0.1, std::size_t lane_len = 8, std::array<double, 3> speeds = {5.0, 3.0, 1.0});

/// Upgrading action (0 = alpha, 1 = beta) of lane 0..2 at 0-based position i.
unsigned lanes_upgrade_action(std::size_t lane, std::size_t position);

/// The example with four expected steps under always-alpha: S --alpha--> {L, R} uniformly (yellow),
/// alpha in L or R reaches T with probability 1/3 and stays otherwise, beta keeps L and mixes R
/// uniformly over {L, R}, gamma moves L to T and R to the blue state X, and every action in X
/// returns to S. Remaining actions loop. Every step costs 1.
Pomdp fig2a();

/// `copies` instances of fig2a in sequence (the target of one copy is the start of the next),
/// sharing observations.
Pomdp fig2a_chain(std::size_t copies);

/// Blue B1 (initial), yellow Y, blue B2 and B3, target T; actions alpha, beta, gamma, delta.
/// gamma: B1 -> {Y, B2}; delta: B1 -> {B2, B3}; beta: Y -> B3, B3 -> T, B2 -> B1;
/// alpha: B2 -> T, B3 -> B1, Y -> {B1, B3}. Remaining actions loop. Every step costs 1.
/// The reachable belief MDP has nine beliefs (including the target belief).
/// The optimal controller plays gamma, alpha, beta in the three blue situations.
Pomdp fig2b();

/// White I, yellow Y1/Y2, blue B1/B2, target G. In each state one action moves to two successors
/// with different observations (probability 1/2 each); the other action loops. Every step costs 1.
/// I --alpha--> {Y1, B1}; Y1 --alpha--> {Y2, B2}; Y2 --beta--> {Y1, B2}; B1 --alpha--> {Y1, G};
/// B2 --beta--> {Y2, B1}. Best posterior-aware 2-FSC: 12 steps; best posterior-unaware 2-FSC: 14;
/// posterior-unaware controllers need four nodes to reach 12.
Pomdp fig4a();

/// Sequential composition: the target states of stage i are replaced by the initial state of
/// stage i+1; the last stage keeps its target. Observation labels get the stage's prefix
/// (the target observation is shared); equal labels denote the same observation.
Pomdp compose(std::vector<std::pair<Pomdp, std::string>> const& stages);

/// `reps` Lanes stages, then fig2a_chain(25), then fig2b. With `stub_tail` the two tail stages are
/// replaced by single glue states with one unit-cost action.
Pomdp lanes_plus(std::size_t reps, double p_u = 0.1, std::size_t lane_len = 8, bool stub_tail = false);

/// Names accepted by `by_name`: lanes, lanes-plus, fig2a, fig2b, fig4a.
Pomdp by_name(std::string const& name, double p_u = 0.1, std::size_t lane_len = 8, std::size_t reps = 100);

}  // namespace saynt::generators

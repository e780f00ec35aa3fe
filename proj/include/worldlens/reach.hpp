#pragma once

#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "worldlens/world.hpp"

namespace worldlens {

/// Deterministic stationary policy that, from every start state of a
/// communicating world, reaches some target state with probability 1 and
/// plays the designated action there.
///
/// Construction: breadth-first distances to the target set in the positive
/// graph; every non-target state picks the action with a positive-probability
/// successor strictly closer to the target (smallest action index on ties).
/// States listed in `target` play their paired action. Under the induced
/// chain every state has a positive path to the target, so the target set is
/// hit almost surely.
inline StationaryPolicy almost_sure_reach_policy(
    const World& w, const std::vector<std::pair<int, int>>& target) {
    if (target.empty()) throw std::invalid_argument("empty target set");
    const int S = w.num_states(), A = w.num_actions();
    for (auto [s, a] : target) {
        w.check_state(s);
        w.check_action(a);
    }

    constexpr int kInf = std::numeric_limits<int>::max();
    std::vector<int> dist(S, kInf);
    std::queue<int> frontier;
    std::vector<int> chosen(S, -1);
    for (auto [s, a] : target)
        if (dist[s] != 0) {
            dist[s] = 0;
            chosen[s] = a; // first listed action wins for duplicated states
            frontier.push(s);
        }

    // backward BFS over positive-probability edges
    std::vector<std::vector<std::pair<int, int>>> preds(S); // s2 -> (s, a)
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            auto row = w.row(s, a);
            for (int s2 = 0; s2 < S; ++s2)
                if (row[s2] > 0.0) preds[s2].push_back({s, a});
        }
    while (!frontier.empty()) {
        int s2 = frontier.front();
        frontier.pop();
        for (auto [s, a] : preds[s2])
            if (dist[s] == kInf) {
                dist[s] = dist[s2] + 1;
                frontier.push(s);
            }
    }
    for (int s = 0; s < S; ++s)
        if (dist[s] == kInf)
            throw WorldError("world is not communicating: target unreachable from state " +
                             w.state_name(s));

    for (int s = 0; s < S; ++s) {
        if (chosen[s] >= 0) continue;
        for (int a = 0; a < A && chosen[s] < 0; ++a) {
            auto row = w.row(s, a);
            for (int s2 = 0; s2 < S; ++s2)
                if (row[s2] > 0.0 && dist[s2] == dist[s] - 1) {
                    chosen[s] = a;
                    break;
                }
        }
    }
    return StationaryPolicy::deterministic(w, chosen);
}

} // namespace worldlens

#pragma once

#include "worldlens/agents.hpp"
#include "worldlens/prob.hpp"

namespace worldlens {

/// Demonstration sampler: drives a rollout by sampling the agent's answer
/// distribution at each step. Extraction never uses this (it consumes the
/// distributions directly); it exists to watch an agent act.
inline SuccessProbability simulate_agent(const World& world, const Agent& agent,
                                         const Goal& goal, int s0, int horizon, int samples,
                                         std::uint64_t seed) {
    return monte_carlo_prob(
        world,
        [&](const FiniteHistory& h, Rng& rng) {
            std::vector<double> dist = agent.query(goal, h);
            return rng.categorical(dist);
        },
        goal, s0, horizon, samples, seed);
}

} // namespace worldlens

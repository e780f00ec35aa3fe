#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "worldlens/reach.hpp"
#include "worldlens/world.hpp"

using namespace worldlens;

namespace {
constexpr int L = 0, R = 1;

bool is_deterministic(const StationaryPolicy& p) {
    for (int s = 0; s < p.num_states; ++s) {
        int ones = 0;
        for (int a = 0; a < p.num_actions; ++a) {
            double v = p.prob(s, a);
            if (v == 1.0) ++ones;
            else if (v != 0.0) return false;
        }
        if (ones != 1) return false;
    }
    return true;
}
} // namespace

TEST_CASE("reach policy on the chain world") {
    World w = make_chain_world(0.3, 0.6);
    StationaryPolicy pol = almost_sure_reach_policy(w, {{2, R}});
    CHECK(is_deterministic(pol));
    CHECK(pol.prob(2, R) == 1.0); // plays the target action at the target state
    auto hit = oracles::absorbing_hit_probability(w, pol, {2});
    for (int s = 0; s < 5; ++s) CHECK(hit[s] >= 1.0 - 1e-10);
}

TEST_CASE("target containing all states") {
    World w = make_chain_world(0.5, 0.5);
    std::vector<std::pair<int, int>> target;
    for (int s = 0; s < 5; ++s) target.push_back({s, L});
    StationaryPolicy pol = almost_sure_reach_policy(w, target);
    auto hit = oracles::absorbing_hit_probability(w, pol, {0, 1, 2, 3, 4});
    for (int s = 0; s < 5; ++s) CHECK(hit[s] == 1.0);
}

TEST_CASE("random communicating worlds reach any target almost surely") {
    int checked = 0;
    for (std::uint64_t seed = 0; checked < 100; ++seed) {
        int S = 2 + static_cast<int>(seed % 7);
        int A = 1 + static_cast<int>(seed % 3);
        World w = make_random_world(seed, S, A);
        REQUIRE(w.communicating());
        int target_state = static_cast<int>(seed) % S;
        int target_action = static_cast<int>(seed / 3) % A;
        StationaryPolicy pol = almost_sure_reach_policy(w, {{target_state, target_action}});
        CHECK(is_deterministic(pol));
        auto hit = oracles::absorbing_hit_probability(w, pol, {target_state});
        for (int s = 0; s < S; ++s) {
            INFO("seed " << seed << " state " << s);
            CHECK(hit[s] >= 1.0 - 1e-10);
        }
        ++checked;
    }
}

TEST_CASE("reach policy preconditions") {
    World w = make_chain_world(0.5, 0.5);
    CHECK_THROWS_AS(almost_sure_reach_policy(w, {}), std::invalid_argument);

    World frozen = make_chain_world(0.0, 0.0);
    CHECK_THROWS_AS(almost_sure_reach_policy(frozen, {{0, L}}), WorldError);
}

TEST_CASE("reach policy is reproducible") {
    World w = make_random_world(9, 6, 3);
    StationaryPolicy a = almost_sure_reach_policy(w, {{4, 1}});
    StationaryPolicy b = almost_sure_reach_policy(w, {{4, 1}});
    CHECK(a.probs == b.probs);
}

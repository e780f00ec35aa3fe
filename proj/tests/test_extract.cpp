#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "worldlens/extract.hpp"
#include "worldlens/world.hpp"

using namespace worldlens;

namespace {
constexpr int L = 0, R = 1;
constexpr int S0 = 2, S1 = 3;
const TripleEvent kEv{S0, R, S1};
} // namespace

TEST_CASE("deterministic tail extraction") {
    SECTION("optimal agent at an even coin") {
        World w = make_chain_world(0.5, 0.5);
        FamilyOptimalAgent agent(w, S0);
        Estimate e = extract_deterministic(agent, w, S0, kEv, 40, 0.0);
        CHECK(std::abs(e.p_hat - 0.5) <= std::sqrt(2 * 0.25 / 39.0));
        CHECK(e.crossover_x == 19);
        CHECK(e.transcript.size() == 42u); // one probe per threshold, n+2 of them
        CHECK(e.bound_at(0.5) == Catch::Approx(std::sqrt(2 * 0.25 / 39.0)));
    }

    SECTION("impossible event pins the estimate at zero") {
        World w = make_chain_world(0.0, 0.5);
        FamilyOptimalAgent agent(w, S0);
        Estimate e = extract_deterministic(agent, w, S0, kEv, 10, 0.0);
        CHECK(e.crossover_x == -1);
        CHECK(e.p_hat == 0.0);
    }

    SECTION("sure event lands one grid cell short") {
        // the threshold-n answer is always the cdf branch, so the crossover
        // cannot exceed n-1 and the estimate is 1 - 1/n
        World w = make_chain_world(1.0, 0.5);
        FamilyOptimalAgent agent(w, S0);
        Estimate e = extract_deterministic(agent, w, S0, kEv, 10, 0.0);
        CHECK(e.crossover_x == 9);
        CHECK(e.p_hat == Catch::Approx(0.9));
    }

    SECTION("interior probabilities respect the stated bound") {
        for (double p : {0.05, 0.3, 0.7, 0.95}) {
            World w = make_chain_world(p, 0.5);
            FamilyOptimalAgent agent(w, S0);
            for (int n : {10, 40, 160}) {
                Estimate e = extract_deterministic(agent, w, S0, kEv, n, 0.0);
                CHECK(std::abs(e.p_hat - p) <= e.bound_at(p));
            }
        }
    }

    SECTION("stochastic answers are refused") {
        World w = make_chain_world(0.35, 0.5);
        DeltaAgent agent(w, S0, {0.2, AgentMode::Adversarial, 1});
        CHECK_THROWS_AS(extract_deterministic(agent, w, S0, kEv, 20, 0.2), DiagnosticError);
    }

    SECTION("n below two is refused") {
        World w = make_chain_world(0.5, 0.5);
        FamilyOptimalAgent agent(w, S0);
        CHECK_THROWS_AS(extract_deterministic(agent, w, S0, kEv, 1, 0.0), PreconditionError);
    }
}

TEST_CASE("stochastic tail extraction") {
    const double p = 0.35, delta = 0.2;
    const int n = 20;
    World w = make_chain_world(p, 0.5);

    SECTION("the profiled scenario keeps the crossover in the ambiguity band") {
        int count6 = 0;
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            DeltaAgent agent(w, S0, {delta, AgentMode::RandomFeasible, seed});
            Estimate e = extract_stochastic(agent, w, S0, kEv, n, delta);
            CHECK(e.crossover_x >= 5);
            CHECK(e.crossover_x <= 7);
            if (e.crossover_x == 6) ++count6;
            CHECK(std::abs(e.p_hat - p) <= e.bound_at(p));
        }
        CHECK(count6 > 0);
        DeltaAgent adv(w, S0, {delta, AgentMode::Adversarial, 0});
        Estimate e = extract_stochastic(adv, w, S0, kEv, n, delta);
        CHECK(e.crossover_x >= 5);
        CHECK(e.crossover_x <= 7);
    }

    SECTION("bound arithmetic at the profiled parameters") {
        DeltaAgent agent(w, S0, {delta, AgentMode::Adversarial, 0});
        Estimate e = extract_stochastic(agent, w, S0, kEv, n, delta);
        double Lconst = std::log(2 * (1 - delta) / (1 - 2 * delta));
        CHECK(Lconst == Catch::Approx(0.9808293));
        CHECK(e.bound_at(p) ==
              Catch::Approx(std::sqrt(2 * p * (1 - p) * Lconst / n) +
                            2 * Lconst / (3 * n) + 1.0 / n));
        CHECK(e.bound_at(p) == Catch::Approx(0.232073).margin(1e-4));
        CHECK(e.transcript.size() == static_cast<std::size_t>(n) + 2);
    }

    SECTION("delta zero reduces to the deterministic crossover") {
        World w2 = make_chain_world(0.62, 0.5);
        FamilyOptimalAgent det(w2, S0);
        DeltaAgent opt(w2, S0, {0.0, AgentMode::Optimal, 0});
        Estimate e1 = extract_deterministic(det, w2, S0, kEv, 30, 0.0);
        Estimate e2 = extract_stochastic(opt, w2, S0, kEv, 30, 0.0);
        CHECK(std::abs(e1.p_hat - e2.p_hat) <= 1.0 / 30 + 1e-12);
    }

    SECTION("half-optimal agents are refused with the stated reason") {
        DeltaAgent agent(w, S0, {0.49, AgentMode::Adversarial, 0});
        CHECK_THROWS_AS(extract_stochastic(agent, w, S0, kEv, 10, 0.5), PreconditionError);
        CHECK_THROWS_AS(extract_stochastic(agent, w, S0, kEv, 10, 0.7), PreconditionError);
        CHECK_NOTHROW(extract_stochastic(agent, w, S0, kEv, 10, 0.49));
    }

    SECTION("bound soundness across a small grid") {
        for (double pp : {0.05, 0.5, 0.95})
            for (double dd : {0.1, 0.4})
                for (int nn : {25, 100}) {
                    World ww = make_chain_world(pp, 0.5);
                    for (std::uint64_t seed = 0; seed < 5; ++seed) {
                        DeltaAgent agent(ww, S0, {dd, AgentMode::RandomFeasible, seed});
                        Estimate e = extract_stochastic(agent, ww, S0, kEv, nn, dd);
                        CHECK(std::abs(e.p_hat - pp) <= e.bound_at(pp));
                    }
                    DeltaAgent adv(ww, S0, {dd, AgentMode::Adversarial, 0});
                    Estimate e = extract_stochastic(adv, ww, S0, kEv, nn, dd);
                    CHECK(std::abs(e.p_hat - pp) <= e.bound_at(pp));
                }
    }

    SECTION("reflection consistency") {
        // extracting the event and its complement gives estimates that sum to
        // one up to twice the bound
        TripleEvent complement = kEv;
        complement.negate_outcome = true;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            DeltaAgent agent(w, S0, {delta, AgentMode::RandomFeasible, seed});
            Estimate direct = extract_stochastic(agent, w, S0, kEv, n, delta);
            Estimate mirror = extract_stochastic(agent, w, S0, complement, n, delta);
            CHECK(std::abs(direct.p_hat + mirror.p_hat - 1.0) <=
                  2 * direct.bound_at(p) + 1e-12);
        }
    }
}

TEST_CASE("observation-based tail extraction") {
    const double p_R = 0.5, delta = 0.2;
    const int n = 40;

    SECTION("transcripts are identical across failure rates") {
        std::vector<Estimate> runs;
        for (double p_F : {0.0, 0.3, 0.9}) {
            ObservableWorld w = make_fail_world(p_F, p_R, 0.5);
            RandomWalkAgent agent(w, S0, {delta, AgentMode::RandomFeasible, 7});
            runs.push_back(extract_pomdp(agent, w, S0, kEv, n, delta));
        }
        for (std::size_t i = 1; i < runs.size(); ++i) {
            CHECK(runs[i].p_hat == runs[0].p_hat);
            CHECK(runs[i].crossover_x == runs[0].crossover_x);
            REQUIRE(runs[i].transcript.size() == runs[0].transcript.size());
            for (std::size_t k = 0; k < runs[0].transcript.size(); ++k) {
                CHECK(runs[i].transcript[k].p_a == runs[0].transcript[k].p_a);
                CHECK(runs[i].transcript[k].p_b == runs[0].transcript[k].p_b);
            }
        }
        CHECK(std::abs(runs[0].p_hat - p_R) <= runs[0].bound_at(p_R));
    }

    SECTION("deterministic kernel entries come out one grid cell short of one") {
        ObservableWorld w = make_three_state_world();
        RandomWalkAgent agent(w, 1, {0.0, AgentMode::Optimal, 0});
        // P(s3 | s2, b) = 1
        Estimate e = extract_pomdp(agent, w, 1, TripleEvent{1, 1, 2}, 25, 0.0);
        CHECK(e.crossover_x == 24);
        CHECK(e.p_hat == Catch::Approx(24.0 / 25));
        CHECK(std::abs(e.p_hat - 1.0) <= e.bound_at(1.0));
    }

    SECTION("adversarial observation agent respects the bound") {
        ObservableWorld w = make_fail_world(0.3, 0.5, 0.5);
        RandomWalkAgent agent(w, S0, {0.2, AgentMode::Adversarial, 0});
        Estimate e = extract_pomdp(agent, w, S0, kEv, 100, 0.2);
        CHECK(std::abs(e.p_hat - 0.5) <= e.bound_at(0.5));
        CHECK(e.method == ExtractMethod::T3Pomdp);
    }
}

TEST_CASE("width-2 extraction from an optimal agent") {
    SECTION("even coin is a fixed point") {
        World w = make_chain_world(0.5, 0.5);
        FamilyOptimalAgent agent(w, S0);
        Estimate e = extract_width2_exact(agent, w, S0, kEv, 50);
        CHECK(e.p_hat == Catch::Approx(0.5).margin(1e-9));
    }

    SECTION("near-zero events exit through the zero branch") {
        const int n = 100;
        double p = 1.0 / (2 * n);
        World w = make_chain_world(p, 0.5);
        FamilyOptimalAgent agent(w, S0);
        Estimate e = extract_width2_exact(agent, w, S0, kEv, n);
        CHECK(e.zero_branch);
        CHECK(e.p_hat == 0.0);
        CHECK(std::abs(e.p_hat - p) <= (std::log(n) - std::log(std::log(n)) + 1.0) / n);
        CHECK(e.transcript.size() <= 3u);
    }

    SECTION("interior estimate at the stated rate") {
        const int n = 200;
        World w = make_chain_world(0.3, 0.5);
        FamilyOptimalAgent agent(w, S0);
        Estimate e = extract_width2_exact(agent, w, S0, kEv, n);
        CHECK_FALSE(e.zero_branch);
        CHECK(std::abs(e.p_hat - 0.3) <= 2 * std::log(n + 1.0) / n);
        CHECK(e.bound_at(0.3) == Catch::Approx(2 * std::log(201.0) / 200));
        CHECK(e.transcript.size() <= static_cast<std::size_t>(n) + 3);
    }

    SECTION("probabilities above one half reflect") {
        const int n = 200;
        World w = make_chain_world(0.85, 0.5);
        FamilyOptimalAgent agent(w, S0);
        Estimate e = extract_width2_exact(agent, w, S0, kEv, n);
        CHECK(e.reflected);
        CHECK(std::abs(e.p_hat - 0.85) <= 2 * std::log(n + 1.0) / n);
    }

    SECTION("grid sweep stays within the bound") {
        for (double p : {0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99})
            for (int n : {50, 200}) {
                World w = make_chain_world(p, 0.5);
                FamilyOptimalAgent agent(w, S0);
                Estimate e = extract_width2_exact(agent, w, S0, kEv, n);
                CHECK(std::abs(e.p_hat - p) <= e.bound_at(p));
            }
    }
}

TEST_CASE("width-2 extraction from delta-optimal agents") {
    SECTION("delta zero degenerates to the exact protocol within a grid cell") {
        const int n = 100;
        World w = make_chain_world(0.3, 0.5);
        FamilyOptimalAgent det(w, S0);
        DeltaAgent opt(w, S0, {0.0, AgentMode::Optimal, 0});
        Estimate exact = extract_width2_exact(det, w, S0, kEv, n);
        Estimate relaxed = extract_width2_delta(opt, w, S0, kEv, n, 0.0);
        // both land within one alpha-grid cell mapped through the inverse
        CHECK(std::abs(exact.p_hat - relaxed.p_hat) <= 2 * std::log(n + 1.0) / n);
    }

    SECTION("bound arithmetic at the stated parameters") {
        const int n = 200;
        const double delta = 0.2;
        World w = make_chain_world(0.3, 0.5);
        DeltaAgent agent(w, S0, {delta, AgentMode::Adversarial, 0});
        Estimate e = extract_width2_delta(agent, w, S0, kEv, n, delta);
        double expect = 3 * std::log((1 + n * (1 - delta)) / (1 - delta)) *
                        (1 + std::abs(std::log(1 - delta)) / n) / n;
        CHECK(e.bound_at(0.3) == Catch::Approx(expect));
        CHECK(expect == Catch::Approx(0.0797).margin(5e-4));
        CHECK(std::abs(e.p_hat - 0.3) <= expect);
        CHECK(e.transcript.size() <= 3u * n + 3);
    }

    SECTION("reflected case carries the same bound") {
        const int n = 200;
        const double delta = 0.2;
        World w = make_chain_world(0.9, 0.5);
        DeltaAgent agent(w, S0, {delta, AgentMode::Adversarial, 0});
        Estimate e = extract_width2_delta(agent, w, S0, kEv, n, delta);
        CHECK(e.reflected);
        CHECK(std::abs(e.p_hat - 0.9) <= e.bound_at(0.9));
    }

    SECTION("grid sweep across modes stays within the bound") {
        for (double p : {0.01, 0.1, 0.3, 0.5, 0.7, 0.9})
            for (double delta : {0.1, 0.2, 0.4})
                for (AgentMode mode :
                     {AgentMode::Optimal, AgentMode::RandomFeasible, AgentMode::Adversarial}) {
                    World w = make_chain_world(p, 0.5);
                    DeltaAgent agent(w, S0, {delta, mode, 11});
                    Estimate e = extract_width2_delta(agent, w, S0, kEv, 50, delta);
                    INFO("p=" << p << " delta=" << delta << " mode=" << static_cast<int>(mode));
                    CHECK(std::abs(e.p_hat - p) <= e.bound_at(p));
                }
    }

    SECTION("refusal at one half") {
        World w = make_chain_world(0.3, 0.5);
        DeltaAgent agent(w, S0, {0.49, AgentMode::Optimal, 0});
        CHECK_THROWS_AS(extract_width2_delta(agent, w, S0, kEv, 50, 0.5), PreconditionError);
    }
}

TEST_CASE("whole-kernel reconstruction") {
    SECTION("deterministic kernels reconstruct exactly through the width-2 protocol") {
        World w = make_chain_world(1.0, 1.0);
        FamilyOptimalAgent agent(w, S0);
        KernelEstimate ke = reconstruct_world(agent, w, S0, 50, 0.0, ExtractMethod::T4Width2Det);
        for (int s = 0; s < 5; ++s)
            for (int a = 0; a < 2; ++a)
                for (int s2 = 0; s2 < 5; ++s2)
                    CHECK(ke.normalized_at(s, a, s2) == w.prob(s, a, s2));
    }

    SECTION("stochastic reconstruction: per-entry bounds and row sums") {
        const int n = 100;
        const double delta = 0.1;
        World w = make_chain_world(0.35, 0.6);
        DeltaAgent agent(w, S0, {delta, AgentMode::RandomFeasible, 5});
        KernelEstimate ke = reconstruct_world(agent, w, S0, n, delta, ExtractMethod::T2Stoch);
        for (int s = 0; s < 5; ++s)
            for (int a = 0; a < 2; ++a) {
                double raw_sum = 0.0, bound_sum = 0.0, norm_sum = 0.0;
                for (int s2 = 0; s2 < 5; ++s2) {
                    const Estimate& e = ke.at(s, a, s2);
                    double p_true = w.prob(s, a, s2);
                    CHECK(std::abs(e.p_hat - p_true) <= e.bound_at(p_true));
                    raw_sum += e.p_hat;
                    bound_sum += e.bound_at(p_true);
                    norm_sum += ke.normalized_at(s, a, s2);
                }
                CHECK(std::abs(raw_sum - 1.0) <= bound_sum);
                CHECK(norm_sum == Catch::Approx(1.0).margin(1e-12));
            }
    }
}

namespace {
/// Deliberately inconsistent deterministic agent: answers like the optimal
/// one except at one threshold, breaking the single-switch shape.
class GlitchyAgent : public Agent {
public:
    GlitchyAgent(const World& w, int glitch_k) : inner_(w, 2), glitch_k_(glitch_k), world_(&w) {}
    std::vector<double> query(const Goal& goal, const FiniteHistory& h) const override {
        std::vector<double> dist = inner_.query(goal, h);
        const GoalFamily& f = goal.family();
        if (h.length() == 0 && f.tag == FamilyTag::XiK && f.k == glitch_k_) {
            std::fill(dist.begin(), dist.end(), 0.0);
            dist[f.marker_b] = 1.0; // claim the survival branch out of order
        }
        if (h.length() == 0 && f.tag == FamilyTag::XiRs && f.r == glitch_k_ && !f.reflected) {
            std::fill(dist.begin(), dist.end(), 0.0);
            dist[f.marker_a] = 1.0; // resume the run branch after quitting it
        }
        return dist;
    }

private:
    FamilyOptimalAgent inner_;
    int glitch_k_;
    const World* world_;
};
} // namespace

TEST_CASE("inconsistent deterministic answers raise diagnostics") {
    World w = make_chain_world(0.3, 0.5);

    SECTION("tail protocol rejects a second switch") {
        // optimal crossover at p=0.3, n=10 sits near k=2; a stray survival
        // answer at k=8 breaks the b-then-a shape
        GlitchyAgent agent(w, 8);
        CHECK_THROWS_AS(extract_deterministic(agent, w, 2, kEv, 10, 0.0), DiagnosticError);
    }

    SECTION("width-2 scan rejects resumed run answers") {
        // alpha(0.3) ~ 0.296: the optimal first b-answer at n=20 comes at
        // r = 6; answering a again at r = 9 is non-monotone
        GlitchyAgent agent(w, 9);
        CHECK_THROWS_AS(extract_width2_exact(agent, w, 2, kEv, 20), DiagnosticError);
    }
}

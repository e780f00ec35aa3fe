#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "worldlens/binomial.hpp"
#include "worldlens/goal.hpp"
#include "worldlens/reach.hpp"
#include "worldlens/world.hpp"

namespace worldlens {

struct AgentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Black-box query surface probed by the extraction procedures: a goal plus a
/// history (of states or of observations) maps to an action distribution.
/// Agents are policies, not samplers — identical inputs give identical
/// distributions.
class Agent {
public:
    virtual ~Agent() = default;
    virtual bool observation_based() const { return false; }
    virtual std::vector<double> query(const Goal& goal, const FiniteHistory& h) const {
        (void)goal;
        (void)h;
        throw AgentError("agent does not accept state histories");
    }
    virtual std::vector<double> query(const Goal& goal, const ObservationHistory& h) const {
        (void)goal;
        (void)h;
        throw AgentError("agent does not accept observation histories");
    }
};

enum class AgentMode { Optimal, RandomFeasible, Adversarial };

struct DeltaConfig {
    double delta = 0.0;
    AgentMode mode = AgentMode::Optimal;
    std::uint64_t seed = 0;
    // Off by default: every dichotomy answer puts all mass on the two marker
    // actions. When set (and a third action exists), part of the surplus over
    // the optimality constraint leaks to another action.
    bool allow_remainder = false;
};

/// First-action probabilities an agent put on a family's two marker actions.
struct QueryRecord {
    GoalFamily family;
    double p_a = 0.0;
    double p_b = 0.0;
    double remainder = 0.0;
};

namespace detail {

/// Feasible range of p_a for a dichotomy with branch values (v_a, v_b):
/// all p_a in [0,1] with p_a v_a + (1-p_a) v_b >= (1-delta) max(v_a, v_b).
struct FeasibleInterval {
    double lo = 0.0;
    double hi = 1.0;
};

inline FeasibleInterval feasible_pa(double v_a, double v_b, double delta) {
    FeasibleInterval f;
    if (v_a > v_b) {
        f.lo = std::clamp(((1.0 - delta) * v_a - v_b) / (v_a - v_b), 0.0, 1.0);
    } else if (v_b > v_a) {
        double lo_b = std::clamp(((1.0 - delta) * v_b - v_a) / (v_b - v_a), 0.0, 1.0);
        f.hi = 1.0 - lo_b;
    }
    return f;
}

/// Shared first-action rule for the synthesized goal-conditioned agents.
/// Dichotomy tail goals get a (p_a, p_b) pair; width-2 run goals and
/// single-branch families get a deterministic answer.
inline std::vector<double> family_first_action(const GoalFamily& f, const BranchValues& v,
                                               const DeltaConfig& cfg, int num_actions) {
    std::vector<double> dist(num_actions, 0.0);
    auto point_mass = [&](int action) { dist[action] = 1.0; };
    switch (f.tag) {
    case FamilyTag::PhiW:
    case FamilyTag::Rho:
    case FamilyTag::PsiLe:
    case FamilyTag::ChiGt:
        point_mass(f.marker_b);
        return dist;
    case FamilyTag::XiK: {
        if (cfg.mode == AgentMode::Optimal && cfg.delta == 0.0) {
            if (v.v_a > v.v_b) point_mass(f.marker_a);
            else if (v.v_b > v.v_a) point_mass(f.marker_b);
            else dist[f.marker_a] = dist[f.marker_b] = 0.5;
            return dist;
        }
        FeasibleInterval fi = feasible_pa(v.v_a, v.v_b, cfg.delta);
        double p_a;
        switch (cfg.mode) {
        case AgentMode::Optimal:
            p_a = v.v_a > v.v_b ? 1.0 : (v.v_b > v.v_a ? 0.0 : 0.5);
            break;
        case AgentMode::Adversarial:
            p_a = std::clamp(0.5, fi.lo, fi.hi);
            break;
        case AgentMode::RandomFeasible:
        default: {
            Rng stream(hash_key({cfg.seed, f.param_hash(), 0x5eedull}));
            p_a = fi.lo + (fi.hi - fi.lo) * stream.uniform01();
            break;
        }
        }
        double p_b = 1.0 - p_a;
        if (cfg.allow_remainder && num_actions > 2 && (v.v_a > 0.0 || v.v_b > 0.0)) {
            double achieved = p_a * v.v_a + p_b * v.v_b;
            double target = (1.0 - cfg.delta) * std::max(v.v_a, v.v_b);
            if (achieved > 0.0) {
                double slack = std::max(0.0, 1.0 - target / achieved);
                Rng stream(hash_key({cfg.seed, f.param_hash(), 0x3a11ull}));
                double gamma = 0.9 * slack * stream.uniform01();
                int other = 0;
                while (other == f.marker_a || other == f.marker_b) ++other;
                dist[other] = gamma;
                p_a *= (1.0 - gamma);
                p_b *= (1.0 - gamma);
            }
        }
        dist[f.marker_a] = p_a;
        dist[f.marker_b] = p_b;
        return dist;
    }
    case FamilyTag::XiRs: {
        bool a_feasible = v.v_a >= (1.0 - cfg.delta) * std::max(v.v_a, v.v_b);
        bool b_feasible = v.v_b >= (1.0 - cfg.delta) * std::max(v.v_a, v.v_b);
        // run-goal ties resolve to the a-branch: the reflection convention of
        // the width-2 protocols then makes an even coin an exact fixed point
        int argmax = v.v_b > v.v_a ? f.marker_b : f.marker_a;
        int suboptimal = v.v_a > v.v_b ? f.marker_b : f.marker_a;
        switch (cfg.mode) {
        case AgentMode::Optimal:
            point_mass(argmax);
            break;
        case AgentMode::Adversarial:
            point_mass((v.v_a != v.v_b && a_feasible && b_feasible) ? suboptimal : argmax);
            break;
        case AgentMode::RandomFeasible:
        default:
            if (a_feasible && b_feasible) {
                Rng stream(hash_key({cfg.seed, f.param_hash(), 0xab12ull}));
                point_mass(stream.uniform01() < 0.5 ? f.marker_a : f.marker_b);
            } else {
                point_mass(argmax);
            }
            break;
        }
        return dist;
    }
    }
    throw AgentError("unknown family tag");
}

} // namespace detail

/// Optimal (delta = 0) deterministic agent for the extraction goal families:
/// evaluates each branch's optimal value in closed form, answers with the
/// argmax branch's marker action (smallest action index on ties), then
/// follows the stationary return-loop policy toward the family's (s, a)
/// target. Rejects non-family goals.
class FamilyOptimalAgent : public Agent {
public:
    FamilyOptimalAgent(const World& world, int s0) : world_(&world), s0_(s0) {
        world.check_state(s0);
    }

    std::vector<double> query(const Goal& goal, const FiniteHistory& h) const override {
        const GoalFamily& f = family_of(goal);
        if (h.length() == 0) return first_action(f);
        StationaryPolicy loop = almost_sure_reach_policy(*world_, {{f.ev.s, f.ev.a}});
        std::vector<double> dist(world_->num_actions());
        for (int a = 0; a < world_->num_actions(); ++a)
            dist[a] = loop.prob(h.current_state(), a);
        return dist;
    }

protected:
    const GoalFamily& family_of(const Goal& goal) const {
        if (!goal.is_family())
            throw AgentError("this agent only answers the extraction goal families");
        return goal.family();
    }

    std::vector<double> first_action(const GoalFamily& f) const {
        double p = world_->prob(f.ev.s, f.ev.a, f.ev.s_prime);
        BranchValues v = family_branch_values(f, p);
        std::vector<double> dist(world_->num_actions(), 0.0);
        switch (f.tag) {
        case FamilyTag::XiK: {
            int pick;
            if (v.v_a > v.v_b) pick = f.marker_a;
            else if (v.v_b > v.v_a) pick = f.marker_b;
            else pick = std::min(f.marker_a, f.marker_b);
            dist[pick] = 1.0;
            break;
        }
        case FamilyTag::XiRs:
            // ties resolve to the a-branch (see family_first_action)
            dist[v.v_b > v.v_a ? f.marker_b : f.marker_a] = 1.0;
            break;
        default:
            dist[f.marker_b] = 1.0;
            break;
        }
        return dist;
    }

    const World* world_;
    int s0_;
};

/// delta-optimal agent over the extraction goal families. On dichotomy tail
/// goals it emits any (p_a, p_b) first-action pair satisfying
/// (1-delta) max(V_a, V_b) <= p_a V_a + p_b V_b, chosen per mode; on width-2
/// run goals the answer is a deterministic branch pick per mode. After the
/// first step it follows the return-loop policy toward the family target.
/// Random draws are keyed by goal parameters, so repeated probes of the same
/// goal within a run are stable.
class DeltaAgent : public Agent {
public:
    DeltaAgent(const World& world, int s0, DeltaConfig config)
        : world_(&world), s0_(s0), config_(config) {
        if (config.delta < 0.0 || config.delta >= 1.0)
            throw AgentError("delta must lie in [0, 1)");
        world.check_state(s0);
    }

    const DeltaConfig& config() const { return config_; }

    std::vector<double> query(const Goal& goal, const FiniteHistory& h) const override {
        if (!goal.is_family())
            throw AgentError("this agent only answers the extraction goal families");
        const GoalFamily& f = goal.family();
        if (h.length() == 0) {
            double p = world_->prob(f.ev.s, f.ev.a, f.ev.s_prime);
            return detail::family_first_action(f, family_branch_values(f, p), config_,
                                               world_->num_actions());
        }
        StationaryPolicy loop = almost_sure_reach_policy(*world_, {{f.ev.s, f.ev.a}});
        std::vector<double> dist(world_->num_actions());
        for (int a = 0; a < world_->num_actions(); ++a)
            dist[a] = loop.prob(h.current_state(), a);
        return dist;
    }

private:
    const World* world_;
    int s0_;
    DeltaConfig config_;
};

/// Observation-based agent: answers the family's first action from the goal
/// alone (same branch rule as DeltaAgent), then moves uniformly at random
/// forever, ignoring observations entirely. Uniform play keeps every family
/// branch at its optimal value on a communicating world, so the agent is
/// delta-optimal on the families for its configured delta.
class RandomWalkAgent : public Agent {
public:
    RandomWalkAgent(const ObservableWorld& world, int s0, DeltaConfig config = {})
        : world_(&world), s0_(s0), config_(config) {
        if (config.delta < 0.0 || config.delta >= 1.0)
            throw AgentError("delta must lie in [0, 1)");
        world.check_state(s0);
    }

    bool observation_based() const override { return true; }

    std::vector<double> query(const Goal& goal, const ObservationHistory& h) const override {
        if (!goal.is_family())
            throw AgentError("this agent only answers the extraction goal families");
        const GoalFamily& f = goal.family();
        if (h.length() == 0) {
            double p = world_->prob(f.ev.s, f.ev.a, f.ev.s_prime);
            return detail::family_first_action(f, family_branch_values(f, p), config_,
                                               world_->num_actions());
        }
        return std::vector<double>(world_->num_actions(), 1.0 / world_->num_actions());
    }

private:
    const ObservableWorld* world_;
    int s0_;
    DeltaConfig config_;
};

/// First-action probe at the length-0 history from s0.
inline QueryRecord probe_first_action(const Agent& agent, const Goal& goal, const World& world,
                                      int s0) {
    const GoalFamily& f = goal.family();
    std::vector<double> dist = agent.query(goal, FiniteHistory::start(s0));
    QueryRecord rec;
    rec.family = f;
    rec.p_a = f.marker_a >= 0 ? dist[f.marker_a] : 0.0;
    rec.p_b = dist[f.marker_b];
    double total = 0.0;
    for (double d : dist) total += d;
    rec.remainder = total - rec.p_a - rec.p_b;
    (void)world;
    return rec;
}

/// Probe for observation-based agents: the initial observation is the
/// smallest one emitted with positive probability at s0 (synthesized agents'
/// first answers are observation-independent).
inline QueryRecord probe_first_action(const Agent& agent, const Goal& goal,
                                      const ObservableWorld& world, int s0) {
    const GoalFamily& f = goal.family();
    int o0 = 0;
    while (o0 < world.num_observations() && world.obs_prob(s0, o0) == 0.0) ++o0;
    std::vector<double> dist = agent.query(goal, ObservationHistory::start(o0));
    QueryRecord rec;
    rec.family = f;
    rec.p_a = f.marker_a >= 0 ? dist[f.marker_a] : 0.0;
    rec.p_b = dist[f.marker_b];
    double total = 0.0;
    for (double d : dist) total += d;
    rec.remainder = total - rec.p_a - rec.p_b;
    return rec;
}

} // namespace worldlens

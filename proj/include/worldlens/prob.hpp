#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "worldlens/binomial.hpp"
#include "worldlens/goal.hpp"
#include "worldlens/monitor.hpp"
#include "worldlens/world.hpp"

namespace worldlens {

struct SuccessProbability {
    enum class Method { ClosedForm, LinearSolve, ValueIteration, MonteCarlo };
    double value = 0.0;
    Method method = Method::LinearSolve;
    // Monte Carlo only: 99% interval half-width and unresolved mass at the
    // horizon. The true value lies in [value, value + pending].
    double mc_halfwidth = 0.0;
    double pending = 0.0;
};

inline constexpr double kSolveTolerance = 1e-12;
inline constexpr std::size_t kMaxProductNodes = 400000;

/// Product of the world with a goal monitor. Nodes are (state, joint monitor
/// state) pairs reachable from the start under any action sequence; taking
/// action a at a node advances the monitor on the pair (s, a) and then moves
/// in the world. Acceptance and rejection act as absorbing sinks.
class ProductChain {
public:
    struct ActionOut {
        double accept = 0.0;                        // mass absorbed on acceptance
        std::vector<std::pair<int, double>> succ;   // surviving transitions
    };

    ProductChain(const World& world, const Goal& goal, int start_state)
        : world_(&world), goal_(goal.materialize()) {
        world.check_state(start_state);
        GoalMonitor m0(goal_);
        initial_verdict_ = m0.verdict();
        if (initial_verdict_ != Verdict::Pending) return;
        start_ = intern(start_state, m0.states());
        for (std::size_t i = 0; i < node_states_.size(); ++i) expand(static_cast<int>(i));
    }

    Verdict initial_verdict() const { return initial_verdict_; }
    int start_node() const { return start_; }
    int num_nodes() const { return static_cast<int>(node_states_.size()); }
    int node_world_state(int node) const { return node_states_[node].first; }
    const std::vector<SeqMonitor>& node_monitor(int node) const {
        return node_states_[node].second;
    }
    const ActionOut& out(int node, int action) const {
        return act_[static_cast<std::size_t>(node) * world_->num_actions() + action];
    }
    const World& world() const { return *world_; }
    const Goal& goal() const { return goal_; }

    /// Advance the joint monitor on one pair; returns resulting states and
    /// whether the joint verdict accepted / rejected / is still pending.
    std::pair<std::vector<SeqMonitor>, Verdict> advance(const std::vector<SeqMonitor>& ms,
                                                        int s, int a) const {
        std::vector<SeqMonitor> next = ms;
        bool all_rejected = true;
        Verdict v = Verdict::Pending;
        for (std::size_t i = 0; i < next.size(); ++i) {
            next[i] = seq_monitor_step(goal_.disjuncts()[i], next[i], s, a);
            if (next[i].verdict == Verdict::Accepted) v = Verdict::Accepted;
            if (next[i].verdict != Verdict::Rejected) all_rejected = false;
        }
        if (v != Verdict::Accepted && all_rejected) v = Verdict::Rejected;
        return {std::move(next), v};
    }

    /// Accept-absorption probabilities under a per-node action distribution.
    /// Nodes from which acceptance is unreachable get exactly 0 (pending
    /// forever counts as failure); the remaining linear system is strictly
    /// substochastic, so the pivoted dense solve cannot be singular.
    std::vector<double> absorption(
        const std::function<const double*(int node)>& action_dist) const {
        const int N = num_nodes(), A = world_->num_actions();
        std::vector<double> direct(N, 0.0);
        std::vector<std::vector<std::pair<int, double>>> edges(N);
        for (int i = 0; i < N; ++i) {
            const double* dist = action_dist(i);
            std::unordered_map<int, double> merged;
            for (int a = 0; a < A; ++a) {
                if (dist[a] == 0.0) continue;
                const ActionOut& o = out(i, a);
                direct[i] += dist[a] * o.accept;
                for (auto [j, p] : o.succ) merged[j] += dist[a] * p;
            }
            edges[i].assign(merged.begin(), merged.end());
        }
        // reverse reachability from nodes with direct accept mass
        std::vector<std::vector<int>> rev(N);
        for (int i = 0; i < N; ++i)
            for (auto [j, p] : edges[i])
                if (p > 0.0) rev[j].push_back(i);
        std::vector<char> live(N, 0);
        std::vector<int> stack;
        for (int i = 0; i < N; ++i)
            if (direct[i] > 0.0) {
                live[i] = 1;
                stack.push_back(i);
            }
        while (!stack.empty()) {
            int j = stack.back();
            stack.pop_back();
            for (int i : rev[j])
                if (!live[i]) {
                    live[i] = 1;
                    stack.push_back(i);
                }
        }
        std::vector<int> dense_index(N, -1);
        std::vector<int> members;
        for (int i = 0; i < N; ++i)
            if (live[i]) {
                dense_index[i] = static_cast<int>(members.size());
                members.push_back(i);
            }
        std::vector<double> x(N, 0.0);
        const int M = static_cast<int>(members.size());
        if (M == 0) return x;
        Eigen::MatrixXd A_mat = Eigen::MatrixXd::Identity(M, M);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(M);
        for (int mi = 0; mi < M; ++mi) {
            int i = members[mi];
            b(mi) = direct[i];
            for (auto [j, p] : edges[i])
                if (dense_index[j] >= 0) A_mat(mi, dense_index[j]) -= p;
        }
        Eigen::VectorXd sol = A_mat.partialPivLu().solve(b);
        for (int mi = 0; mi < M; ++mi) x[members[mi]] = sol(mi);
        return x;
    }

private:
    int intern(int state, const std::vector<SeqMonitor>& ms) {
        std::string key;
        key.reserve(4 + ms.size() * 3);
        key.push_back(static_cast<char>(state & 0xff));
        key.push_back(static_cast<char>((state >> 8) & 0xff));
        key += detail::encode_monitor(ms);
        auto [it, inserted] = index_.try_emplace(std::move(key),
                                                 static_cast<int>(node_states_.size()));
        if (inserted) {
            node_states_.push_back({state, ms});
            if (node_states_.size() > kMaxProductNodes)
                throw GoalError("product chain too large");
        }
        return it->second;
    }

    void expand(int node) {
        const int A = world_->num_actions();
        if (act_.size() < (static_cast<std::size_t>(node) + 1) * A)
            act_.resize((static_cast<std::size_t>(node) + 1) * A);
        auto [s, ms] = node_states_[node];
        for (int a = 0; a < A; ++a) {
            ActionOut o;
            auto [next_ms, verdict] = advance(ms, s, a);
            if (verdict == Verdict::Accepted) {
                o.accept = 1.0;
            } else if (verdict == Verdict::Pending) {
                auto row = world_->row(s, a);
                for (int s2 = 0; s2 < world_->num_states(); ++s2)
                    if (row[s2] > 0.0) o.succ.push_back({intern(s2, next_ms), row[s2]});
            }
            act_[static_cast<std::size_t>(node) * A + a] = std::move(o);
        }
    }

    const World* world_;
    Goal goal_;
    Verdict initial_verdict_ = Verdict::Pending;
    int start_ = 0;
    std::vector<std::pair<int, std::vector<SeqMonitor>>> node_states_;
    std::unordered_map<std::string, int> index_;
    std::vector<ActionOut> act_;
};

/// Exact goal-success probability of a stationary (possibly stochastic)
/// policy from s0, by absorption analysis of the product chain.
inline SuccessProbability exact_success_prob(const World& world, const StationaryPolicy& policy,
                                             const Goal& goal, int s0) {
    ProductChain pc(world, goal, s0);
    if (pc.initial_verdict() == Verdict::Accepted)
        return {1.0, SuccessProbability::Method::LinearSolve, 0, 0};
    if (pc.initial_verdict() == Verdict::Rejected)
        return {0.0, SuccessProbability::Method::LinearSolve, 0, 0};
    std::vector<double> x = pc.absorption([&](int node) {
        return policy.probs.data() +
               static_cast<std::size_t>(pc.node_world_state(node)) * policy.num_actions;
    });
    return {x[pc.start_node()], SuccessProbability::Method::LinearSolve, 0, 0};
}

/// Exact success probability of the policy that plays `first_dist` on its
/// very first step and the stationary `continuation` afterwards.
inline SuccessProbability success_prob_first_action_then(
    const World& world, const Goal& goal, int s0, std::span<const double> first_dist,
    const StationaryPolicy& continuation) {
    ProductChain pc(world, goal, s0);
    if (pc.initial_verdict() == Verdict::Accepted)
        return {1.0, SuccessProbability::Method::LinearSolve, 0, 0};
    if (pc.initial_verdict() == Verdict::Rejected)
        return {0.0, SuccessProbability::Method::LinearSolve, 0, 0};
    std::vector<double> x = pc.absorption([&](int node) {
        return continuation.probs.data() +
               static_cast<std::size_t>(pc.node_world_state(node)) * continuation.num_actions;
    });
    double value = 0.0;
    for (int c = 0; c < world.num_actions(); ++c) {
        if (first_dist[c] == 0.0) continue;
        const ProductChain::ActionOut& o = pc.out(pc.start_node(), c);
        double v = o.accept;
        for (auto [j, p] : o.succ) v += p * x[j];
        value += first_dist[c] * v;
    }
    return {value, SuccessProbability::Method::LinearSolve, 0, 0};
}

/// Deterministic finite-memory policy over (world state, monitor state),
/// produced as the witness of optimal_success_prob.
struct FiniteMemoryWitness {
    std::shared_ptr<const ProductChain> chain;
    std::vector<int> actions; // per node

    int action_at(int node) const { return actions[node]; }
};

struct OptimalSuccess {
    SuccessProbability prob;
    FiniteMemoryWitness witness;
};

/// max over policies of the goal-success probability, computed by value
/// iteration over the product chain. Iteration alternates sweeps with an
/// exact re-solve of the greedy policy; the re-solved value is returned once
/// it satisfies the optimality condition, which certifies it as the true
/// optimum (the greedy policy's value never exceeds the optimum, and a
/// fixpoint of the backup never undershoots it). Falls back to a sup-norm
/// stop with 0/1 snapping if certification stalls.
inline OptimalSuccess optimal_success_prob(const World& world, const Goal& goal, int s0) {
    auto pc = std::make_shared<ProductChain>(world, goal, s0);
    const int A = world.num_actions();
    if (pc->initial_verdict() != Verdict::Pending) {
        double v = pc->initial_verdict() == Verdict::Accepted ? 1.0 : 0.0;
        return {{v, SuccessProbability::Method::ValueIteration, 0, 0},
                {std::move(pc), {}}};
    }
    const int N = pc->num_nodes();
    std::vector<double> value(N, 0.0);
    std::vector<int> greedy(N, 0);

    auto backup = [&](int node, int a) {
        const ProductChain::ActionOut& o = pc->out(node, a);
        double v = o.accept;
        for (auto [j, p] : o.succ) v += p * value[j];
        return v;
    };
    auto sweep = [&] {
        double change = 0.0;
        for (int i = 0; i < N; ++i) {
            double best = 0.0;
            int best_a = 0;
            for (int a = 0; a < A; ++a) {
                double v = backup(i, a);
                if (v > best + kSolveTolerance) {
                    best = v;
                    best_a = a;
                }
            }
            change = std::max(change, std::abs(best - value[i]));
            value[i] = best;
            greedy[i] = best_a;
        }
        return change;
    };

    const int kMaxRounds = 400;
    double last_change = 1.0;
    for (int round = 0; round < kMaxRounds; ++round) {
        for (int it = 0; it < 25; ++it) last_change = sweep();
        // exact value of the greedy policy
        std::vector<double> dist(static_cast<std::size_t>(N) * A, 0.0);
        for (int i = 0; i < N; ++i) dist[static_cast<std::size_t>(i) * A + greedy[i]] = 1.0;
        std::vector<double> resolved =
            pc->absorption([&](int node) { return dist.data() + static_cast<std::size_t>(node) * A; });
        // optimality: no single-action improvement over the resolved value
        std::swap(value, resolved);
        double residual = 0.0;
        for (int i = 0; i < N; ++i) {
            double best = 0.0;
            for (int a = 0; a < A; ++a) best = std::max(best, backup(i, a));
            residual = std::max(residual, best - value[i]);
        }
        if (residual <= 1e-11) {
            return {{value[pc->start_node()], SuccessProbability::Method::ValueIteration, 0, 0},
                    {pc, std::move(greedy)}};
        }
        // keep the pointwise-larger lower bound and continue iterating
        for (int i = 0; i < N; ++i) value[i] = std::max(value[i], resolved[i]);
        if (last_change < kSolveTolerance) break;
    }
    // asymptotic stop: snap values that converged onto the absorbing levels
    for (int i = 0; i < N; ++i) {
        if (value[i] > 1.0 - 1e-9) value[i] = 1.0;
        if (value[i] < 1e-9) value[i] = 0.0;
    }
    double v = value[pc->start_node()];
    return {{v, SuccessProbability::Method::ValueIteration, 0, 0}, {pc, std::move(greedy)}};
}

/// Monte Carlo estimate with explicit bracketing: trajectories still pending
/// at the horizon are reported separately, never counted as successes.
template <typename NextAction>
    requires std::is_invocable_r_v<int, NextAction, const FiniteHistory&, Rng&>
SuccessProbability monte_carlo_prob(const World& world, NextAction&& next_action,
                                    const Goal& goal, int s0, int horizon, int samples,
                                    std::uint64_t seed) {
    Rng rng(seed);
    const Goal expanded = goal.materialize();
    int accepted = 0, pending = 0;
    for (int i = 0; i < samples; ++i) {
        GoalMonitor monitor(expanded);
        FiniteHistory h = FiniteHistory::start(s0);
        Verdict v = monitor.verdict();
        for (int t = 0; t < horizon && v == Verdict::Pending; ++t) {
            int a = next_action(h, rng);
            v = monitor.step(h.current_state(), a);
            int s2 = step(world, h.current_state(), a, rng);
            h.push(a, s2);
        }
        if (v == Verdict::Accepted) ++accepted;
        else if (v == Verdict::Pending) ++pending;
    }
    SuccessProbability out;
    out.method = SuccessProbability::Method::MonteCarlo;
    out.value = static_cast<double>(accepted) / samples;
    out.pending = static_cast<double>(pending) / samples;
    out.mc_halfwidth = 2.5758 * std::sqrt(out.value * (1.0 - out.value) / samples);
    return out;
}

inline int default_mc_horizon(const World& world, const Goal& goal) {
    return 50 * world.num_states() * (goal.depth() + 1);
}

inline SuccessProbability monte_carlo_prob(const World& world, const StationaryPolicy& policy,
                                           const Goal& goal, int s0, int horizon, int samples,
                                           std::uint64_t seed) {
    return monte_carlo_prob(
        world,
        [&](const FiniteHistory& h, Rng& rng) { return policy.sample(h.current_state(), rng); },
        goal, s0, horizon, samples, seed);
}

// --- partially observable computations -----------------------------------

/// Policy over observation histories with finite internal memory. Memory
/// updates may depend on the observation and action; the action distribution
/// depends on (memory, current observation).
class ObservationPolicy {
public:
    virtual ~ObservationPolicy() = default;
    virtual int memory_count() const { return 1; }
    virtual int initial_memory() const { return 0; }
    virtual void action_dist(int mem, int obs, double* out) const = 0;
    virtual int next_memory(int mem, int obs, int action) const {
        (void)obs;
        (void)action;
        return mem;
    }
};

/// Memoryless observation policy given by a table obs -> action distribution.
class MarkovObservationPolicy final : public ObservationPolicy {
public:
    MarkovObservationPolicy(int num_obs, int num_actions, std::vector<double> probs)
        : num_obs_(num_obs), num_actions_(num_actions), probs_(std::move(probs)) {}

    static MarkovObservationPolicy deterministic(const ObservableWorld& w,
                                                 std::span<const int> action_per_obs) {
        std::vector<double> probs(static_cast<std::size_t>(w.num_observations()) *
                                      w.num_actions(),
                                  0.0);
        for (int o = 0; o < w.num_observations(); ++o)
            probs[static_cast<std::size_t>(o) * w.num_actions() + action_per_obs[o]] = 1.0;
        return {w.num_observations(), w.num_actions(), std::move(probs)};
    }

    static MarkovObservationPolicy uniform(const ObservableWorld& w) {
        std::vector<double> probs(static_cast<std::size_t>(w.num_observations()) *
                                      w.num_actions(),
                                  1.0 / w.num_actions());
        return {w.num_observations(), w.num_actions(), std::move(probs)};
    }

    void action_dist(int mem, int obs, double* out) const override {
        (void)mem;
        for (int a = 0; a < num_actions_; ++a)
            out[a] = probs_[static_cast<std::size_t>(obs) * num_actions_ + a];
    }

private:
    int num_obs_;
    int num_actions_;
    std::vector<double> probs_;
};

/// Exact goal-success probability of a finite-memory observation-based policy
/// on a partially observable world, by absorption analysis of the product of
/// (state, policy memory, goal monitor). Observations are marginalized per
/// step: they affect the action and memory but not the state transition.
inline SuccessProbability pomdp_policy_success_prob(const ObservableWorld& world,
                                                    const ObservationPolicy& policy,
                                                    const Goal& goal, int s0) {
    const Goal expanded = goal.materialize();
    GoalMonitor m0(expanded);
    if (m0.verdict() == Verdict::Accepted)
        return {1.0, SuccessProbability::Method::LinearSolve, 0, 0};
    if (m0.verdict() == Verdict::Rejected)
        return {0.0, SuccessProbability::Method::LinearSolve, 0, 0};

    const int A = world.num_actions(), S = world.num_states(), O = world.num_observations();
    struct NodeRef {
        int state;
        int mem;
        std::vector<SeqMonitor> ms;
    };
    std::vector<NodeRef> nodes;
    std::unordered_map<std::string, int> index;
    auto intern = [&](int s, int mem, const std::vector<SeqMonitor>& ms) {
        std::string key;
        key.push_back(static_cast<char>(s & 0xff));
        key.push_back(static_cast<char>(mem & 0xff));
        key.push_back(static_cast<char>((mem >> 8) & 0xff));
        key += detail::encode_monitor(ms);
        auto [it, inserted] = index.try_emplace(std::move(key), static_cast<int>(nodes.size()));
        if (inserted) {
            nodes.push_back({s, mem, ms});
            if (nodes.size() > kMaxProductNodes) throw GoalError("product chain too large");
        }
        return it->second;
    };

    auto advance = [&](const std::vector<SeqMonitor>& ms, int s, int a) {
        std::vector<SeqMonitor> next = ms;
        bool all_rejected = true;
        Verdict v = Verdict::Pending;
        for (std::size_t i = 0; i < next.size(); ++i) {
            next[i] = seq_monitor_step(expanded.disjuncts()[i], next[i], s, a);
            if (next[i].verdict == Verdict::Accepted) v = Verdict::Accepted;
            if (next[i].verdict != Verdict::Rejected) all_rejected = false;
        }
        if (v != Verdict::Accepted && all_rejected) v = Verdict::Rejected;
        return std::make_pair(std::move(next), v);
    };

    int start = intern(s0, policy.initial_memory(), m0.states());
    std::vector<double> direct;
    std::vector<std::vector<std::pair<int, double>>> edges;
    std::vector<double> dist(A);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        NodeRef node = nodes[i]; // copy: interning may reallocate the vector
        std::unordered_map<int, double> merged;
        double acc = 0.0;
        for (int o = 0; o < O; ++o) {
            double w_o = world.obs_prob(node.state, o);
            if (w_o == 0.0) continue;
            policy.action_dist(node.mem, o, dist.data());
            for (int a = 0; a < A; ++a) {
                double w = w_o * dist[a];
                if (w == 0.0) continue;
                auto [next_ms, verdict] = advance(node.ms, node.state, a);
                if (verdict == Verdict::Accepted) {
                    acc += w;
                    continue;
                }
                if (verdict == Verdict::Rejected) continue;
                int mem2 = policy.next_memory(node.mem, o, a);
                auto row = world.row(node.state, a);
                for (int s2 = 0; s2 < S; ++s2)
                    if (row[s2] > 0.0) merged[intern(s2, mem2, next_ms)] += w * row[s2];
            }
        }
        direct.resize(nodes.size(), 0.0);
        edges.resize(nodes.size());
        direct[i] = acc;
        edges[i].assign(merged.begin(), merged.end());
    }

    const int N = static_cast<int>(nodes.size());
    std::vector<std::vector<int>> rev(N);
    for (int i = 0; i < N; ++i)
        for (auto [j, p] : edges[i])
            if (p > 0.0) rev[j].push_back(i);
    std::vector<char> live(N, 0);
    std::vector<int> stack;
    for (int i = 0; i < N; ++i)
        if (direct[i] > 0.0) {
            live[i] = 1;
            stack.push_back(i);
        }
    while (!stack.empty()) {
        int j = stack.back();
        stack.pop_back();
        for (int i : rev[j])
            if (!live[i]) {
                live[i] = 1;
                stack.push_back(i);
            }
    }
    std::vector<int> dense_index(N, -1);
    std::vector<int> members;
    for (int i = 0; i < N; ++i)
        if (live[i]) {
            dense_index[i] = static_cast<int>(members.size());
            members.push_back(i);
        }
    if (members.empty()) return {0.0, SuccessProbability::Method::LinearSolve, 0, 0};
    const int M = static_cast<int>(members.size());
    Eigen::MatrixXd A_mat = Eigen::MatrixXd::Identity(M, M);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(M);
    for (int mi = 0; mi < M; ++mi) {
        int i = members[mi];
        b(mi) = direct[i];
        for (auto [j, p] : edges[i])
            if (dense_index[j] >= 0) A_mat(mi, dense_index[j]) -= p;
    }
    Eigen::VectorXd sol = A_mat.partialPivLu().solve(b);
    double value = dense_index[start] >= 0 ? sol(dense_index[start]) : 0.0;
    return {value, SuccessProbability::Method::LinearSolve, 0, 0};
}

/// Success probability of an observation-independent policy on a partially
/// observable world: the observation kernel drops out of the computation, so
/// this is exactly the base-world value.
inline SuccessProbability pomdp_success_prob_obs_independent(const ObservableWorld& world,
                                                             const StationaryPolicy& policy,
                                                             const Goal& goal, int s0) {
    SuccessProbability sp = exact_success_prob(world.base(), policy, goal, s0);
    return sp;
}

} // namespace worldlens

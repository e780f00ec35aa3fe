#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "worldlens/rng.hpp"

namespace worldlens {

inline constexpr double kRowSumTolerance = 1e-12;

struct WorldError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Unvalidated raw model as read from a file or assembled by hand.
/// `kernel[(s*A + a)*S + s2]`, `obs_kernel[s*O + o]`.
struct WorldData {
    int num_states = 0;
    int num_actions = 0;
    int num_observations = 0; // 0 = fully observable
    std::vector<double> kernel;
    std::vector<double> obs_kernel;
    std::vector<std::string> state_names;
    std::vector<std::string> action_names;
    std::vector<std::string> observation_names;
};

struct ValidationReport {
    struct RowDefect {
        int state = 0;
        int action = -1; // -1 for observation rows
        double sum = 0.0;
        std::string describe(const WorldData& d) const;
    };
    bool rows_ok = false;
    bool communicating = false;
    std::vector<RowDefect> defects;
    bool ok() const { return rows_ok && communicating; }
};

namespace detail {

/// Strong connectivity of the positive-probability graph
/// (edge s -> s2 iff some action reaches s2 with positive probability).
inline bool positive_graph_strongly_connected(const WorldData& d) {
    const int S = d.num_states, A = d.num_actions;
    if (S <= 0) return false;
    std::vector<std::vector<int>> fwd(S), bwd(S);
    for (int s = 0; s < S; ++s) {
        std::vector<char> seen(S, 0);
        for (int a = 0; a < A; ++a)
            for (int s2 = 0; s2 < S; ++s2)
                if (d.kernel[(static_cast<std::size_t>(s) * A + a) * S + s2] > 0.0) seen[s2] = 1;
        for (int s2 = 0; s2 < S; ++s2)
            if (seen[s2]) {
                fwd[s].push_back(s2);
                bwd[s2].push_back(s);
            }
    }
    auto covers_all = [S](const std::vector<std::vector<int>>& g) {
        std::vector<char> vis(S, 0);
        std::vector<int> stack{0};
        vis[0] = 1;
        int count = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v : g[u])
                if (!vis[v]) {
                    vis[v] = 1;
                    ++count;
                    stack.push_back(v);
                }
        }
        return count == S;
    };
    return covers_all(fwd) && covers_all(bwd);
}

} // namespace detail

/// Checks row normalization (within kRowSumTolerance) and strong connectivity
/// of the positive graph. Reports, never throws.
inline ValidationReport validate_world(const WorldData& d) {
    ValidationReport rep;
    const int S = d.num_states, A = d.num_actions, O = d.num_observations;
    if (S <= 0 || A <= 0 ||
        d.kernel.size() != static_cast<std::size_t>(S) * A * S ||
        (O > 0 && d.obs_kernel.size() != static_cast<std::size_t>(S) * O)) {
        rep.rows_ok = false;
        rep.defects.push_back({-1, -1, 0.0});
        return rep;
    }
    rep.rows_ok = true;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            double sum = 0.0;
            bool negative = false;
            for (int s2 = 0; s2 < S; ++s2) {
                double p = d.kernel[(static_cast<std::size_t>(s) * A + a) * S + s2];
                if (p < 0.0 || !std::isfinite(p)) negative = true;
                sum += p;
            }
            if (negative || std::abs(sum - 1.0) > kRowSumTolerance) {
                rep.rows_ok = false;
                rep.defects.push_back({s, a, sum});
            }
        }
    for (int s = 0; s < S && O > 0; ++s) {
        double sum = 0.0;
        bool negative = false;
        for (int o = 0; o < O; ++o) {
            double p = d.obs_kernel[static_cast<std::size_t>(s) * O + o];
            if (p < 0.0 || !std::isfinite(p)) negative = true;
            sum += p;
        }
        if (negative || std::abs(sum - 1.0) > kRowSumTolerance) {
            rep.rows_ok = false;
            rep.defects.push_back({s, -1, sum});
        }
    }
    rep.communicating = rep.rows_ok && detail::positive_graph_strongly_connected(d);
    return rep;
}

inline std::string ValidationReport::RowDefect::describe(const WorldData& d) const {
    std::ostringstream os;
    if (state < 0) {
        os << "malformed model dimensions";
    } else if (action >= 0) {
        os << "kernel row (" << (state < static_cast<int>(d.state_names.size()) ? d.state_names[state] : std::to_string(state))
           << ", " << (action < static_cast<int>(d.action_names.size()) ? d.action_names[action] : std::to_string(action))
           << ") sums to " << sum;
    } else {
        os << "observation row "
           << (state < static_cast<int>(d.state_names.size()) ? d.state_names[state] : std::to_string(state))
           << " sums to " << sum;
    }
    return os.str();
}

/// Finite controlled Markov process (states, actions, transition kernel).
/// Immutable after construction; rows renormalized if their defect is within
/// kRowSumTolerance, rejected otherwise.
class World {
public:
    static World create(WorldData d) {
        ValidationReport rep = validate_world_rows(d);
        if (!rep.rows_ok) {
            std::string msg = "invalid world:";
            for (const auto& def : rep.defects) msg += " " + def.describe(d);
            throw WorldError(msg);
        }
        renormalize(d);
        return World(std::move(d));
    }

    int num_states() const { return data_.num_states; }
    int num_actions() const { return data_.num_actions; }

    double prob(int s, int a, int s2) const {
        check_state(s);
        check_action(a);
        check_state(s2);
        return data_.kernel[(static_cast<std::size_t>(s) * num_actions() + a) * num_states() + s2];
    }

    std::span<const double> row(int s, int a) const {
        check_state(s);
        check_action(a);
        return {data_.kernel.data() +
                    (static_cast<std::size_t>(s) * num_actions() + a) * num_states(),
                static_cast<std::size_t>(num_states())};
    }

    const WorldData& data() const { return data_; }

    const std::string& state_name(int s) const { check_state(s); return data_.state_names[s]; }
    const std::string& action_name(int a) const { check_action(a); return data_.action_names[a]; }

    std::optional<int> state_index(const std::string& name) const {
        return find_name(data_.state_names, name);
    }
    std::optional<int> action_index(const std::string& name) const {
        return find_name(data_.action_names, name);
    }

    bool communicating() const {
        return detail::positive_graph_strongly_connected(data_);
    }

    void check_state(int s) const {
        if (s < 0 || s >= data_.num_states) throw std::out_of_range("state index " + std::to_string(s));
    }
    void check_action(int a) const {
        if (a < 0 || a >= data_.num_actions) throw std::out_of_range("action index " + std::to_string(a));
    }

    static ValidationReport validate_world_rows(const WorldData& d) {
        ValidationReport rep = validate_world(d);
        rep.communicating = true; // row check only; connectivity is a separate property
        return rep;
    }

protected:
    explicit World(WorldData d) : data_(std::move(d)) {
        if (data_.state_names.size() != static_cast<std::size_t>(data_.num_states)) {
            data_.state_names.resize(data_.num_states);
            for (int s = 0; s < data_.num_states; ++s)
                if (data_.state_names[s].empty()) data_.state_names[s] = "s" + std::to_string(s);
        }
        if (data_.action_names.size() != static_cast<std::size_t>(data_.num_actions)) {
            data_.action_names.resize(data_.num_actions);
            for (int a = 0; a < data_.num_actions; ++a)
                if (data_.action_names[a].empty()) data_.action_names[a] = "a" + std::to_string(a);
        }
    }

    static void renormalize(WorldData& d) {
        const int S = d.num_states, A = d.num_actions, O = d.num_observations;
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                double sum = 0.0;
                auto* row = d.kernel.data() + (static_cast<std::size_t>(s) * A + a) * S;
                for (int s2 = 0; s2 < S; ++s2) sum += row[s2];
                for (int s2 = 0; s2 < S; ++s2) row[s2] /= sum;
            }
        for (int s = 0; s < S && O > 0; ++s) {
            double sum = 0.0;
            auto* row = d.obs_kernel.data() + static_cast<std::size_t>(s) * O;
            for (int o = 0; o < O; ++o) sum += row[o];
            for (int o = 0; o < O; ++o) row[o] /= sum;
        }
    }

    static std::optional<int> find_name(const std::vector<std::string>& names,
                                        const std::string& name) {
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) return std::nullopt;
        return static_cast<int>(it - names.begin());
    }

    WorldData data_;
};

/// World extended with an observation alphabet and per-state observation
/// kernel. Policies over it see observations only.
class ObservableWorld : public World {
public:
    static ObservableWorld create(WorldData d) {
        if (d.num_observations <= 0)
            throw WorldError("observable world requires a non-empty observation set");
        ValidationReport rep = validate_world_rows(d);
        if (!rep.rows_ok) {
            std::string msg = "invalid observable world:";
            for (const auto& def : rep.defects) msg += " " + def.describe(d);
            throw WorldError(msg);
        }
        renormalize(d);
        return ObservableWorld(std::move(d));
    }

    int num_observations() const { return data_.num_observations; }

    double obs_prob(int s, int o) const {
        check_state(s);
        check_observation(o);
        return data_.obs_kernel[static_cast<std::size_t>(s) * num_observations() + o];
    }

    std::span<const double> obs_row(int s) const {
        check_state(s);
        return {data_.obs_kernel.data() + static_cast<std::size_t>(s) * num_observations(),
                static_cast<std::size_t>(num_observations())};
    }

    const World& base() const { return *this; }

    const std::string& observation_name(int o) const {
        check_observation(o);
        return data_.observation_names[o];
    }
    std::optional<int> observation_index(const std::string& name) const {
        return find_name(data_.observation_names, name);
    }

    void check_observation(int o) const {
        if (o < 0 || o >= data_.num_observations)
            throw std::out_of_range("observation index " + std::to_string(o));
    }

private:
    explicit ObservableWorld(WorldData d) : World(std::move(d)) {
        if (data_.observation_names.size() != static_cast<std::size_t>(data_.num_observations)) {
            data_.observation_names.resize(data_.num_observations);
            for (int o = 0; o < data_.num_observations; ++o)
                if (data_.observation_names[o].empty())
                    data_.observation_names[o] = "o" + std::to_string(o);
        }
    }
};

/// Alternating sequence s0 a0 s1 a1 ... sk; starts and ends with a state.
struct FiniteHistory {
    std::vector<int> states;  // length k+1
    std::vector<int> actions; // length k

    static FiniteHistory start(int s0) { return {{s0}, {}}; }

    std::size_t length() const { return actions.size(); }
    int current_state() const { return states.back(); }

    void push(int action, int next_state) {
        actions.push_back(action);
        states.push_back(next_state);
    }

    bool well_formed() const { return states.size() == actions.size() + 1 && !states.empty(); }
};

/// Alternating sequence o0 a0 o1 a1 ... ok of observation-action pairs ending
/// with an observation.
struct ObservationHistory {
    std::vector<int> observations;
    std::vector<int> actions;

    static ObservationHistory start(int o0) { return {{o0}, {}}; }

    std::size_t length() const { return actions.size(); }
    int current_observation() const { return observations.back(); }

    void push(int action, int next_obs) {
        actions.push_back(action);
        observations.push_back(next_obs);
    }
};

/// Markov policy: one action distribution per state. `probs[s*A + a]`.
struct StationaryPolicy {
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> probs;

    static StationaryPolicy deterministic(const World& w, std::span<const int> actions) {
        StationaryPolicy p;
        p.num_states = w.num_states();
        p.num_actions = w.num_actions();
        p.probs.assign(static_cast<std::size_t>(p.num_states) * p.num_actions, 0.0);
        for (int s = 0; s < p.num_states; ++s) {
            w.check_action(actions[s]);
            p.probs[static_cast<std::size_t>(s) * p.num_actions + actions[s]] = 1.0;
        }
        return p;
    }

    static StationaryPolicy uniform(const World& w) {
        StationaryPolicy p;
        p.num_states = w.num_states();
        p.num_actions = w.num_actions();
        p.probs.assign(static_cast<std::size_t>(p.num_states) * p.num_actions,
                       1.0 / p.num_actions);
        return p;
    }

    double prob(int s, int a) const {
        return probs[static_cast<std::size_t>(s) * num_actions + a];
    }

    int sample(int s, Rng& rng) const {
        return rng.categorical(
            {probs.data() + static_cast<std::size_t>(s) * num_actions,
             static_cast<std::size_t>(num_actions)});
    }

    bool rows_normalized(double tol = kRowSumTolerance) const {
        for (int s = 0; s < num_states; ++s) {
            double sum = 0.0;
            for (int a = 0; a < num_actions; ++a) sum += prob(s, a);
            if (std::abs(sum - 1.0) > tol) return false;
        }
        return true;
    }
};

/// One transition sample s -> s' under action a.
inline int step(const World& w, int s, int a, Rng& rng) {
    return rng.categorical(w.row(s, a));
}

/// One observation sample at state s.
inline int observe(const ObservableWorld& w, int s, Rng& rng) {
    return rng.categorical(w.obs_row(s));
}

/// Probability of a finite history under a history-dependent policy,
/// Pr(h) = prod_i pi(a_i | h_i) P(s_{i+1} | s_i, a_i); zero when the history
/// does not start at `s0`.
template <typename PolicyFn>
    requires std::is_invocable_r_v<std::vector<double>, PolicyFn, const FiniteHistory&>
double history_probability(const World& w, PolicyFn&& policy, const FiniteHistory& h, int s0) {
    if (!h.well_formed()) throw std::invalid_argument("malformed history");
    if (h.states.front() != s0) return 0.0;
    double p = 1.0;
    FiniteHistory prefix = FiniteHistory::start(h.states.front());
    for (std::size_t i = 0; i < h.actions.size(); ++i) {
        int a = h.actions[i];
        std::vector<double> dist = policy(prefix);
        w.check_action(a);
        p *= dist[a] * w.prob(h.states[i], a, h.states[i + 1]);
        if (p == 0.0) return 0.0;
        prefix.push(a, h.states[i + 1]);
    }
    return p;
}

inline double history_probability(const World& w, const StationaryPolicy& policy,
                                  const FiniteHistory& h, int s0) {
    return history_probability(
        w,
        [&](const FiniteHistory& prefix) {
            std::vector<double> dist(w.num_actions());
            for (int a = 0; a < w.num_actions(); ++a)
                dist[a] = policy.prob(prefix.current_state(), a);
            return dist;
        },
        h, s0);
}

// --- built-in worlds ----------------------------------------------------

/// Five-state line {s-2..s2} with actions L/R. R moves right with probability
/// p_R (from s2 it jumps to s0), L mirrors with p_L, and failed moves
/// self-loop.
inline World make_chain_world(double p_R, double p_L) {
    if (p_R < 0 || p_R > 1 || p_L < 0 || p_L > 1)
        throw std::invalid_argument("chain world probabilities must lie in [0,1]");
    WorldData d;
    d.num_states = 5;
    d.num_actions = 2;
    d.state_names = {"s-2", "s-1", "s0", "s1", "s2"};
    d.action_names = {"L", "R"};
    d.kernel.assign(5 * 2 * 5, 0.0);
    auto at = [&](int s, int a, int s2) -> double& {
        return d.kernel[(static_cast<std::size_t>(s) * 2 + a) * 5 + s2];
    };
    const int L = 0, R = 1;
    for (int s = 0; s < 5; ++s) {
        int right = (s == 4) ? 2 : s + 1; // rightmost wraps to s0
        int left = (s == 0) ? 2 : s - 1;  // leftmost wraps to s0
        at(s, R, right) += p_R;
        at(s, R, s) += 1.0 - p_R;
        at(s, L, left) += p_L;
        at(s, L, s) += 1.0 - p_L;
    }
    return World::create(std::move(d));
}

/// Chain world plus a noisy identity observation channel: each state is seen
/// as itself with probability 1-p_F and as FAIL otherwise.
inline ObservableWorld make_fail_world(double p_F, double p_R, double p_L) {
    if (p_F < 0 || p_F > 1)
        throw std::invalid_argument("failure probability must lie in [0,1]");
    World chain = make_chain_world(p_R, p_L);
    WorldData d = chain.data();
    d.num_observations = 6;
    d.observation_names = {"s-2", "s-1", "s0", "s1", "s2", "FAIL"};
    d.obs_kernel.assign(5 * 6, 0.0);
    for (int s = 0; s < 5; ++s) {
        d.obs_kernel[static_cast<std::size_t>(s) * 6 + s] = 1.0 - p_F;
        d.obs_kernel[static_cast<std::size_t>(s) * 6 + 5] = p_F;
    }
    return ObservableWorld::create(std::move(d));
}

/// Three states, two actions, deterministic moves: a swaps s1<->s2 and sends
/// s3 to s1; b self-loops on s1 and s3 and sends s2 to s3. States s1 and s2
/// share observation o1; s3 has its own observation o2.
inline ObservableWorld make_three_state_world() {
    WorldData d;
    d.num_states = 3;
    d.num_actions = 2;
    d.num_observations = 2;
    d.state_names = {"s1", "s2", "s3"};
    d.action_names = {"a", "b"};
    d.observation_names = {"o1", "o2"};
    d.kernel.assign(3 * 2 * 3, 0.0);
    auto at = [&](int s, int a, int s2) -> double& {
        return d.kernel[(static_cast<std::size_t>(s) * 2 + a) * 3 + s2];
    };
    const int A = 0, B = 1;
    at(0, A, 1) = 1.0; // s1 -a-> s2
    at(1, A, 0) = 1.0; // s2 -a-> s1
    at(2, A, 0) = 1.0; // s3 -a-> s1
    at(0, B, 0) = 1.0; // s1 -b-> s1
    at(1, B, 2) = 1.0; // s2 -b-> s3
    at(2, B, 2) = 1.0; // s3 -b-> s3
    d.obs_kernel.assign(3 * 2, 0.0);
    d.obs_kernel[0 * 2 + 0] = 1.0;
    d.obs_kernel[1 * 2 + 0] = 1.0;
    d.obs_kernel[2 * 2 + 1] = 1.0;
    return ObservableWorld::create(std::move(d));
}

/// Random row-stochastic kernel plus a forced positive cycle through all
/// states, so the result is always communicating.
inline WorldData random_world_data(std::uint64_t seed, int num_states, int num_actions,
                                   int num_observations = 0) {
    if (num_states < 1 || num_actions < 1)
        throw std::invalid_argument("world sizes must be positive");
    Rng rng(seed);
    WorldData d;
    d.num_states = num_states;
    d.num_actions = num_actions;
    d.num_observations = num_observations;
    d.kernel.assign(static_cast<std::size_t>(num_states) * num_actions * num_states, 0.0);
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a) {
            auto* row = d.kernel.data() +
                        (static_cast<std::size_t>(s) * num_actions + a) * num_states;
            double sum = 0.0;
            for (int s2 = 0; s2 < num_states; ++s2) {
                // exponential draws normalize to a uniform point on the simplex
                double e = -std::log(1.0 - rng.uniform01());
                // sparsify so positive-support structure varies across rows
                if (rng.uniform01() < 0.35 && num_states > 1) e = 0.0;
                row[s2] = e;
                sum += e;
            }
            if (sum == 0.0) {
                row[rng.next_u64() % static_cast<std::uint64_t>(num_states)] = 1.0;
                sum = 1.0;
            }
            for (int s2 = 0; s2 < num_states; ++s2) row[s2] /= sum;
            // forced cycle edge s -> s+1 (mod N) under action s mod A
            if (a == s % num_actions) {
                int nxt = (s + 1) % num_states;
                for (int s2 = 0; s2 < num_states; ++s2) row[s2] *= 0.8;
                row[nxt] += 0.2;
            }
        }
    if (num_observations > 0)
        d.obs_kernel.assign(static_cast<std::size_t>(num_states) * num_observations, 0.0);
    for (int s = 0; s < num_states && num_observations > 0; ++s) {
        auto* row = d.obs_kernel.data() + static_cast<std::size_t>(s) * num_observations;
        double sum = 0.0;
        for (int o = 0; o < num_observations; ++o) {
            row[o] = -std::log(1.0 - rng.uniform01());
            sum += row[o];
        }
        for (int o = 0; o < num_observations; ++o) row[o] /= sum;
    }
    return d;
}

inline ValidationReport validate_world(const World& w) { return validate_world(w.data()); }

inline ValidationReport validate_world(const ObservableWorld& w) {
    return validate_world(w.data());
}

inline World make_random_world(std::uint64_t seed, int num_states, int num_actions) {
    return World::create(random_world_data(seed, num_states, num_actions));
}

} // namespace worldlens

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "worldlens/agents.hpp"
#include "worldlens/binomial.hpp"
#include "worldlens/goal.hpp"
#include "worldlens/world.hpp"

namespace worldlens {

/// Raised when a caller violates a method's stated precondition (the CLI maps
/// it to exit code 2).
struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when probed answers are inconsistent with the agent class a method
/// assumes (e.g. a stochastic record fed to the deterministic protocol).
struct DiagnosticError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- scalar utilities ------------------------------------------------------

/// f(x) = log(1-x) / log(x); strictly increasing on (0, 1).
inline double f_log_ratio(double x) {
    if (x <= 0.0 || x >= 1.0) throw std::domain_error("f_log_ratio requires x in (0,1)");
    return std::log1p(-x) / std::log(x);
}

/// Lower bound f'(x) >= 1 / (-2 log x), valid on (0, 1/2].
inline double f_derivative_lower(double x) { return 1.0 / (-2.0 * std::log(x)); }

/// Inverse of f_log_ratio on [lo, hi] by bisection; y is clamped into
/// [f(lo), f(hi)] first (grid effects may push interval estimates marginally
/// out of range).
inline double f_inverse(double y, double lo, double hi, double tol = 1e-13) {
    if (!(0.0 < lo && lo < hi && hi < 1.0))
        throw std::domain_error("f_inverse requires 0 < lo < hi < 1");
    double flo = f_log_ratio(lo), fhi = f_log_ratio(hi);
    y = std::clamp(y, flo, fhi);
    double a = lo, b = hi;
    while (b - a > tol) {
        double mid = 0.5 * (a + b);
        if (f_log_ratio(mid) < y) a = mid;
        else b = mid;
    }
    return 0.5 * (a + b);
}

/// Certified upper bound on the Lambert W function (the inverse of w e^w) for
/// v >= 0: Newton iteration from log v, then a residual-based bump so that
/// w_up e^{w_up} >= v always holds; log(1+v) for small v.
inline double lambert_w_upper(double v) {
    if (v < 0.0) throw std::domain_error("lambert_w_upper requires v >= 0");
    const double e = std::exp(1.0);
    if (v < e) return std::log1p(v);
    double w = std::log(v);
    for (int it = 0; it < 100; ++it) {
        double ew = std::exp(w);
        double residual = w * ew - v;
        if (std::abs(residual) < 1e-12 * std::max(1.0, v)) break;
        w -= residual / (ew * (w + 1.0));
    }
    // bump upward until the defining inequality is certain
    double up = w;
    while (up * std::exp(up) < v) up += 1e-12 * std::max(1.0, up);
    return up;
}

/// t* = sqrt(2 sigma^2 L) + (2/3) L; satisfies t*^2 / (2 sigma^2 + 2 t*/3) > L
/// for all positive sigma^2, L.
inline double bernstein_t_star(double sigma2, double L) {
    return std::sqrt(2.0 * sigma2 * L) + (2.0 / 3.0) * L;
}

// --- estimates --------------------------------------------------------------

enum class ExtractMethod { T1Det, T2Stoch, T3Pomdp, T4Width2Det, T4Width2Delta };

inline const char* method_name(ExtractMethod m) {
    switch (m) {
    case ExtractMethod::T1Det: return "t1";
    case ExtractMethod::T2Stoch: return "t2";
    case ExtractMethod::T3Pomdp: return "t3";
    case ExtractMethod::T4Width2Det: return "t4";
    case ExtractMethod::T4Width2Delta: return "t4d";
    }
    return "?";
}

/// Recovered probability with its method-specific guaranteed error bound and
/// the full query transcript.
struct Estimate {
    double p_hat = 0.0;
    double bound = 0.0; // user-facing: evaluated at p_hat, inflated by 1.1 where p-dependent
    ExtractMethod method = ExtractMethod::T2Stoch;
    int n = 0;
    double delta = 0.0;
    int crossover_x = 0;      // tail-dichotomy methods
    int r0 = -1;              // width-2 delta scan index
    bool zero_branch = false; // width-2 near-zero exit
    bool reflected = false;   // width-2 complement handling
    std::vector<QueryRecord> transcript;

    /// Guaranteed error evaluated at the true probability.
    double bound_at(double p_true) const {
        switch (method) {
        case ExtractMethod::T1Det:
            return std::sqrt(2.0 * p_true * (1.0 - p_true) / ((n - 1) * (1.0 - delta)));
        case ExtractMethod::T2Stoch:
        case ExtractMethod::T3Pomdp: {
            double L = std::log(2.0 * (1.0 - delta) / (1.0 - 2.0 * delta));
            return std::sqrt(2.0 * p_true * (1.0 - p_true) * L / n) + 2.0 * L / (3.0 * n) +
                   1.0 / n;
        }
        case ExtractMethod::T4Width2Det:
            if (zero_branch) return (std::log(n) - std::log(std::log(n)) + 1.0) / n;
            return 2.0 * std::log(n + 1.0) / n;
        case ExtractMethod::T4Width2Delta:
            if (zero_branch) return lambert_w_upper(n / (1.0 - delta)) / n;
            return 3.0 * std::log((1.0 + n * (1.0 - delta)) / (1.0 - delta)) *
                   (1.0 + std::abs(std::log(1.0 - delta)) / n) / n;
        }
        return 0.0;
    }

    void finish_bound() {
        switch (method) {
        case ExtractMethod::T1Det:
        case ExtractMethod::T2Stoch:
        case ExtractMethod::T3Pomdp:
            bound = 1.1 * bound_at(p_hat); // heuristic: the guarantee needs the true p
            break;
        default:
            bound = bound_at(p_hat); // width-2 bounds are p-free
            break;
        }
    }
};

namespace detail {

inline int pick_other_action(int num_actions, int avoid) {
    if (num_actions < 2)
        throw PreconditionError("dichotomy extraction requires at least two actions");
    return avoid == 0 ? 1 : 0;
}

using Prober = std::function<QueryRecord(const Goal&)>;

inline bool record_is_point_mass(const QueryRecord& rec) {
    auto near = [](double x, double y) { return std::abs(x - y) < 1e-9; };
    return (near(rec.p_a, 1.0) && near(rec.p_b, 0.0) && near(rec.remainder, 0.0)) ||
           (near(rec.p_b, 1.0) && near(rec.p_a, 0.0) && near(rec.remainder, 0.0));
}

/// Shared tail-dichotomy protocol: probe the threshold goals for
/// k = -1 .. n, take the crossover x = max{k : p_b >= p_a}, estimate x/n.
inline Estimate extract_tail_crossover(const Prober& probe, const TripleEvent& ev,
                                       int num_actions, int n, double delta,
                                       ExtractMethod method, bool require_deterministic) {
    if (method == ExtractMethod::T1Det) {
        if (n < 2) throw PreconditionError("deterministic extraction requires n >= 2");
        if (delta < 0.0 || delta >= 1.0)
            throw PreconditionError("deterministic extraction requires delta in [0, 1)");
    } else {
        if (n < 1) throw PreconditionError("extraction requires n >= 1");
        if (delta < 0.0 || delta >= 0.5)
            throw PreconditionError(
                "stochastic extraction requires delta < 1/2: at delta = 1/2 the agent may "
                "split every dichotomy evenly and reveal nothing");
    }
    int marker_a = ev.a;
    int marker_b = pick_other_action(num_actions, marker_a);
    Estimate est;
    est.method = method;
    est.n = n;
    est.delta = delta;
    int x = -1;
    int last_b = -2; // for the deterministic single-switch check
    for (int k = -1; k <= n; ++k) {
        QueryRecord rec = probe(make_xi_k(ev, marker_a, marker_b, n, k));
        if (require_deterministic && !record_is_point_mass(rec))
            throw DiagnosticError(
                "agent answered stochastically; use the stochastic protocol");
        if (rec.p_b >= rec.p_a) {
            if (require_deterministic && last_b != k - 1)
                throw DiagnosticError("deterministic answers are not a single b-then-a switch");
            last_b = k;
            x = k;
        }
        est.transcript.push_back(std::move(rec));
    }
    est.crossover_x = x;
    est.p_hat = std::clamp(static_cast<double>(x) / n, 0.0, 1.0);
    est.finish_bound();
    return est;
}

} // namespace detail

/// Tail-dichotomy extraction from a deterministic optimal or near-optimal
/// agent. Point-mass answers required; the crossover must be a single
/// b-then-a switch.
inline Estimate extract_deterministic(const Agent& agent, const World& world, int s0,
                                      const TripleEvent& ev, int n, double delta) {
    return detail::extract_tail_crossover(
        [&](const Goal& g) { return probe_first_action(agent, g, world, s0); }, ev,
        world.num_actions(), n, delta, ExtractMethod::T1Det, true);
}

/// Tail-dichotomy extraction from a stochastic delta-optimal agent
/// (delta < 1/2). Ties p_b = p_a count toward b.
inline Estimate extract_stochastic(const Agent& agent, const World& world, int s0,
                                   const TripleEvent& ev, int n, double delta) {
    return detail::extract_tail_crossover(
        [&](const Goal& g) { return probe_first_action(agent, g, world, s0); }, ev,
        world.num_actions(), n, delta, ExtractMethod::T2Stoch, false);
}

/// Same protocol against an observation-based agent on a partially observable
/// world; the first probe happens at the length-0 observation history.
inline Estimate extract_pomdp(const Agent& agent, const ObservableWorld& world, int s0,
                              const TripleEvent& ev, int n, double delta) {
    return detail::extract_tail_crossover(
        [&](const Goal& g) { return probe_first_action(agent, g, world, s0); }, ev,
        world.num_actions(), n, delta, ExtractMethod::T3Pomdp, false);
}

namespace detail {

inline Estimate extract_width2_core(const Prober& probe, const TripleEvent& ev,
                                    int num_actions, int n, double delta,
                                    ExtractMethod method) {
    const bool with_delta = method == ExtractMethod::T4Width2Delta;
    if (n < 2) throw PreconditionError("width-2 extraction requires n >= 2");
    if (with_delta && (delta < 0.0 || delta >= 0.5))
        throw PreconditionError("width-2 delta extraction requires delta < 1/2");
    int marker_a = ev.a;
    int marker_b = pick_other_action(num_actions, marker_a);
    Estimate est;
    est.method = method;
    est.n = n;
    est.delta = with_delta ? delta : 0.0;

    auto answer_a = [&](int r, int s, bool refl) {
        QueryRecord rec = probe(make_xi_rs(ev, marker_a, marker_b, r, s, refl));
        if (!record_is_point_mass(rec))
            throw DiagnosticError("width-2 protocols require deterministic answers");
        bool is_a = rec.p_a > rec.p_b;
        est.transcript.push_back(std::move(rec));
        return is_a;
    };

    // orientation: the a-answer at (1,1) says the success probability is the
    // larger side, so continue on the complement
    bool reflect = answer_a(1, 1, false);
    est.reflected = reflect;

    auto finish = [&](double q_hat) {
        est.p_hat = reflect ? 1.0 - q_hat : q_hat;
        est.finish_bound();
        return est;
    };

    // near-zero test
    if (!answer_a(1, n, reflect)) {
        est.zero_branch = true;
        return finish(0.0);
    }

    if (!with_delta) {
        // scan r at fixed run length n: answers flip from a to b when
        // q^r drops below (1-q)^n, bracketing log(1-q)/log(q) within 1/n
        int first_b = n + 1;
        for (int r = 0; r <= n; ++r) {
            bool a = answer_a(r, n, reflect);
            if (!a && first_b > n) first_b = r;
            if (a && first_b <= n)
                throw DiagnosticError("width-2 answers are not monotone; agent not optimal");
        }
        double alpha_mid = (first_b - 0.5) / n;
        double lo = 1.0 / (n + 1.0), hi = 0.5;
        return finish(f_inverse(alpha_mid, lo, hi));
    }

    // delta variant: scan r = 0..3n at run length n; the first b answer
    // certifies (1-delta) q^r <= (1-q)^n
    int r0 = -1;
    for (int r = 0; r <= 3 * n; ++r) {
        if (!answer_a(r, n, reflect)) {
            r0 = r;
            break;
        }
    }
    est.r0 = r0;
    double alpha_hat = r0 >= 0 ? static_cast<double>(r0) / n : 3.0;
    double lo = (1.0 - delta) / (1.0 + n * (1.0 - delta));
    double hi = 2.0 / 3.0;
    return finish(f_inverse(alpha_hat, lo, hi));
}

} // namespace detail

/// Width-2 extraction from a deterministic optimal agent; error O(log n / n).
inline Estimate extract_width2_exact(const Agent& agent, const World& world, int s0,
                                     const TripleEvent& ev, int n) {
    return detail::extract_width2_core(
        [&](const Goal& g) { return probe_first_action(agent, g, world, s0); }, ev,
        world.num_actions(), n, 0.0, ExtractMethod::T4Width2Det);
}

/// Width-2 extraction from a deterministic delta-optimal agent (delta < 1/2).
inline Estimate extract_width2_delta(const Agent& agent, const World& world, int s0,
                                     const TripleEvent& ev, int n, double delta) {
    return detail::extract_width2_core(
        [&](const Goal& g) { return probe_first_action(agent, g, world, s0); }, ev,
        world.num_actions(), n, delta, ExtractMethod::T4Width2Delta);
}

// --- whole-kernel reconstruction -------------------------------------------

/// Per-triple estimates plus a per-row copy projected onto the probability
/// simplex (raw values kept untouched).
struct KernelEstimate {
    int num_states = 0;
    int num_actions = 0;
    std::vector<Estimate> entries;    // (s*A + a)*S + s'
    std::vector<double> normalized;   // same layout, rows sum to 1

    const Estimate& at(int s, int a, int s2) const {
        return entries[(static_cast<std::size_t>(s) * num_actions + a) * num_states + s2];
    }
    double normalized_at(int s, int a, int s2) const {
        return normalized[(static_cast<std::size_t>(s) * num_actions + a) * num_states + s2];
    }
};

/// Runs one extraction per (s, a, s') triple and assembles the kernel.
template <typename ExtractFn>
KernelEstimate reconstruct_world_with(const World& world, ExtractFn&& extract_one) {
    KernelEstimate ke;
    ke.num_states = world.num_states();
    ke.num_actions = world.num_actions();
    ke.entries.resize(static_cast<std::size_t>(ke.num_states) * ke.num_actions *
                      ke.num_states);
    ke.normalized.resize(ke.entries.size());
    for (int s = 0; s < ke.num_states; ++s)
        for (int a = 0; a < ke.num_actions; ++a) {
            std::vector<double> row(ke.num_states);
            for (int s2 = 0; s2 < ke.num_states; ++s2) {
                Estimate e = extract_one(TripleEvent{s, a, s2, false});
                row[s2] = e.p_hat;
                ke.entries[(static_cast<std::size_t>(s) * ke.num_actions + a) * ke.num_states +
                           s2] = std::move(e);
            }
            std::vector<double> proj = project_to_simplex(row);
            for (int s2 = 0; s2 < ke.num_states; ++s2)
                ke.normalized[(static_cast<std::size_t>(s) * ke.num_actions + a) *
                                  ke.num_states +
                              s2] = proj[s2];
        }
    return ke;
}

inline KernelEstimate reconstruct_world(const Agent& agent, const World& world, int s0, int n,
                                        double delta, ExtractMethod method) {
    return reconstruct_world_with(world, [&](const TripleEvent& ev) {
        switch (method) {
        case ExtractMethod::T1Det: return extract_deterministic(agent, world, s0, ev, n, delta);
        case ExtractMethod::T2Stoch: return extract_stochastic(agent, world, s0, ev, n, delta);
        case ExtractMethod::T4Width2Det: return extract_width2_exact(agent, world, s0, ev, n);
        case ExtractMethod::T4Width2Delta:
            return extract_width2_delta(agent, world, s0, ev, n, delta);
        case ExtractMethod::T3Pomdp:
            throw PreconditionError("observation-based reconstruction needs the observable world");
        }
        throw PreconditionError("unknown method");
    });
}

inline KernelEstimate reconstruct_world(const Agent& agent, const ObservableWorld& world,
                                        int s0, int n, double delta) {
    return reconstruct_world_with(world.base(), [&](const TripleEvent& ev) {
        return extract_pomdp(agent, world, s0, ev, n, delta);
    });
}

} // namespace worldlens

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "worldlens/rng.hpp"

namespace worldlens {

struct GoalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class TemporalOp : std::uint8_t { Now, Next, Eventually };

/// Predicate over state-action pairs, kept in its syntactic form so that
/// formatting reproduces the source text: either a conjunction of atoms
/// (S=x, S!=x, A=y, A!=y; empty conjunction = the full set) or an explicit
/// pair set.
struct PairPred {
    struct Atom {
        bool on_state = true;
        bool negate = false;
        int id = 0;
        bool operator==(const Atom&) const = default;
    };
    std::vector<Atom> atoms;
    std::vector<std::pair<int, int>> pairs;
    bool explicit_set = false;

    bool contains(int s, int a) const {
        if (explicit_set) {
            for (auto [ps, pa] : pairs)
                if (ps == s && pa == a) return true;
            return false;
        }
        for (const Atom& at : atoms) {
            int value = at.on_state ? s : a;
            if ((value == at.id) == at.negate) return false;
        }
        return true;
    }

    static PairPred any() { return {}; }
    static PairPred state_is(int s) { return {{{true, false, s}}, {}, false}; }
    static PairPred state_not(int s) { return {{{true, true, s}}, {}, false}; }
    static PairPred action_is(int a) { return {{{false, false, a}}, {}, false}; }
    static PairPred pair_is(int s, int a) {
        PairPred p;
        p.explicit_set = true;
        p.pairs = {{s, a}};
        return p;
    }

    bool operator==(const PairPred&) const = default;
};

struct BasicGoal {
    TemporalOp op = TemporalOp::Now;
    PairPred pred;
    bool operator==(const BasicGoal&) const = default;
};

struct SequentialGoal {
    std::vector<BasicGoal> parts;
    int depth() const { return static_cast<int>(parts.size()); }
    bool operator==(const SequentialGoal&) const = default;
};

/// Binomial event behind the extraction goal families: "after playing `a` at
/// `s`, the next state is s_prime" (complemented when negate_outcome).
struct TripleEvent {
    int s = 0;
    int a = 0;
    int s_prime = 0;
    bool negate_outcome = false;
    bool operator==(const TripleEvent&) const = default;
};

enum class FamilyTag : std::uint8_t { PhiW, Rho, PsiLe, ChiGt, XiK, XiRs };

/// Compact description of the counted goal families. Widths are binomial in
/// n, so families stay symbolic; materialize() expands the disjuncts when the
/// count is small enough.
struct GoalFamily {
    FamilyTag tag = FamilyTag::PhiW;
    TripleEvent ev;
    int marker_b = -1;            // first action of the (single or second) branch
    int marker_a = -1;            // first action of the a-branch (dichotomies)
    std::vector<std::uint8_t> word; // PhiW
    int n = 0;                    // word length for Rho/PsiLe/ChiGt/XiK
    int r = 0;                    // Rho; XiRs a-branch run length
    int k = 0;                    // PsiLe/ChiGt/XiK threshold
    int s_len = 0;                // XiRs b-branch run length
    bool reflected = false;       // XiRs: swap which branch carries the success run

    std::uint64_t param_hash() const {
        std::uint64_t packed_word = 1;
        for (auto b : word) packed_word = packed_word * 2 + (b != 0);
        return hash_key({static_cast<std::uint64_t>(tag),
                         static_cast<std::uint64_t>(ev.s), static_cast<std::uint64_t>(ev.a),
                         static_cast<std::uint64_t>(ev.s_prime),
                         static_cast<std::uint64_t>(ev.negate_outcome),
                         static_cast<std::uint64_t>(marker_b + 1),
                         static_cast<std::uint64_t>(marker_a + 1),
                         static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r + 1),
                         static_cast<std::uint64_t>(k + 1),
                         static_cast<std::uint64_t>(s_len),
                         static_cast<std::uint64_t>(reflected), packed_word});
    }
};

/// A goal: an explicit finite disjunction of sequential goals, or a symbolic
/// counted family. An empty explicit disjunction is the always-rejected goal
/// (it arises at the family index extremes and has success probability 0).
class Goal {
public:
    Goal() = default;
    explicit Goal(SequentialGoal seq) { disjuncts_.push_back(std::move(seq)); }
    explicit Goal(std::vector<SequentialGoal> disjuncts) : disjuncts_(std::move(disjuncts)) {}
    explicit Goal(GoalFamily family) : family_(family) {}

    bool is_family() const { return family_.has_value(); }
    const GoalFamily& family() const {
        if (!family_) throw GoalError("goal is not a counted family");
        return *family_;
    }
    const std::vector<SequentialGoal>& disjuncts() const {
        if (family_) throw GoalError("counted family must be materialized first");
        return disjuncts_;
    }

    bool operator==(const Goal& other) const {
        if (family_.has_value() != other.family_.has_value()) return false;
        if (family_) {
            // families compare by materializing; only used in tests on small n
            return materialize().disjuncts_ == other.materialize().disjuncts_;
        }
        return disjuncts_ == other.disjuncts_;
    }

    int depth() const;
    double width() const;
    Goal materialize(int max_disjuncts = 8192) const;

private:
    std::vector<SequentialGoal> disjuncts_;
    std::optional<GoalFamily> family_;
};

namespace detail {

inline double binomial_coefficient(int n, int r) {
    if (r < 0 || r > n) return 0.0;
    r = std::min(r, n - r);
    double c = 1.0;
    for (int i = 1; i <= r; ++i) c = c * (n - r + i) / i;
    return c;
}

/// First-action marker, then n rounds of "visit (s,a), check next state".
inline SequentialGoal word_goal(const TripleEvent& ev, int marker,
                                const std::vector<std::uint8_t>& word) {
    SequentialGoal g;
    g.parts.reserve(1 + 2 * word.size());
    g.parts.push_back({TemporalOp::Now, PairPred::action_is(marker)});
    for (std::uint8_t bit : word) {
        g.parts.push_back({TemporalOp::Eventually, PairPred::pair_is(ev.s, ev.a)});
        bool want_hit = (bit != 0) != ev.negate_outcome;
        g.parts.push_back({TemporalOp::Next, want_hit ? PairPred::state_is(ev.s_prime)
                                                      : PairPred::state_not(ev.s_prime)});
    }
    return g;
}

inline void append_words_with_ones(const TripleEvent& ev, int marker, int n, int ones,
                                   std::vector<SequentialGoal>& out) {
    std::vector<std::uint8_t> word(n, 0);
    // lexicographically enumerate all n-bit words with the given popcount
    std::vector<int> pos(ones);
    for (int i = 0; i < ones; ++i) pos[i] = i;
    auto emit = [&] {
        std::fill(word.begin(), word.end(), 0);
        for (int p : pos) word[p] = 1;
        out.push_back(word_goal(ev, marker, word));
    };
    if (ones == 0) {
        out.push_back(word_goal(ev, marker, word));
        return;
    }
    if (ones > n) return;
    while (true) {
        emit();
        int i = ones - 1;
        while (i >= 0 && pos[i] == n - ones + i) --i;
        if (i < 0) break;
        ++pos[i];
        for (int j = i + 1; j < ones; ++j) pos[j] = pos[j - 1] + 1;
    }
}

} // namespace detail

inline int Goal::depth() const {
    if (family_) {
        const GoalFamily& f = *family_;
        switch (f.tag) {
        case FamilyTag::PhiW: return 1 + 2 * static_cast<int>(f.word.size());
        case FamilyTag::Rho:
        case FamilyTag::PsiLe:
        case FamilyTag::ChiGt:
        case FamilyTag::XiK: return 1 + 2 * f.n;
        case FamilyTag::XiRs: return 1 + 2 * std::max(f.r, f.s_len);
        }
    }
    int d = 0;
    for (const auto& seq : disjuncts_) d = std::max(d, seq.depth());
    return d;
}

inline double Goal::width() const {
    if (family_) {
        const GoalFamily& f = *family_;
        switch (f.tag) {
        case FamilyTag::PhiW: return 1.0;
        case FamilyTag::Rho: return detail::binomial_coefficient(f.n, f.r);
        case FamilyTag::PsiLe: {
            double w = 0.0;
            for (int r = 0; r <= f.k; ++r) w += detail::binomial_coefficient(f.n, r);
            return w;
        }
        case FamilyTag::ChiGt: {
            double w = 0.0;
            for (int r = std::max(0, f.k + 1); r <= f.n; ++r)
                w += detail::binomial_coefficient(f.n, r);
            return w;
        }
        case FamilyTag::XiK: return std::pow(2.0, f.n);
        case FamilyTag::XiRs: return 2.0;
        }
    }
    return static_cast<double>(disjuncts_.size());
}

inline Goal Goal::materialize(int max_disjuncts) const {
    if (!family_) return *this;
    const GoalFamily& f = *family_;
    if (f.n > 12 || static_cast<int>(width()) > max_disjuncts)
        throw GoalError("counted family too wide to materialize (n > 12 guard)");
    std::vector<SequentialGoal> out;
    switch (f.tag) {
    case FamilyTag::PhiW:
        out.push_back(detail::word_goal(f.ev, f.marker_b, f.word));
        break;
    case FamilyTag::Rho:
        detail::append_words_with_ones(f.ev, f.marker_b, f.n, f.r, out);
        break;
    case FamilyTag::PsiLe:
        for (int r = 0; r <= f.k; ++r)
            detail::append_words_with_ones(f.ev, f.marker_b, f.n, r, out);
        break;
    case FamilyTag::ChiGt:
        for (int r = std::max(0, f.k + 1); r <= f.n; ++r)
            detail::append_words_with_ones(f.ev, f.marker_b, f.n, r, out);
        break;
    case FamilyTag::XiK:
        for (int r = 0; r <= f.k; ++r)
            detail::append_words_with_ones(f.ev, f.marker_a, f.n, r, out);
        for (int r = std::max(0, f.k + 1); r <= f.n; ++r)
            detail::append_words_with_ones(f.ev, f.marker_b, f.n, r, out);
        break;
    case FamilyTag::XiRs: {
        std::vector<std::uint8_t> run_a(f.r, f.reflected ? 0 : 1);
        std::vector<std::uint8_t> run_b(f.s_len, f.reflected ? 1 : 0);
        out.push_back(detail::word_goal(f.ev, f.marker_a, run_a));
        out.push_back(detail::word_goal(f.ev, f.marker_b, run_b));
        break;
    }
    }
    return Goal(std::move(out));
}

// --- family constructors --------------------------------------------------

inline Goal make_phi_w(const TripleEvent& ev, int marker_b, std::vector<std::uint8_t> word) {
    GoalFamily f;
    f.tag = FamilyTag::PhiW;
    f.ev = ev;
    f.marker_b = marker_b;
    f.word = std::move(word);
    return Goal(f);
}

inline Goal make_rho(const TripleEvent& ev, int marker_b, int n, int r) {
    if (n < 0 || r < 0 || r > n) throw GoalError("rho family requires 0 <= r <= n");
    GoalFamily f;
    f.tag = FamilyTag::Rho;
    f.ev = ev;
    f.marker_b = marker_b;
    f.n = n;
    f.r = r;
    return Goal(f);
}

inline Goal make_psi_le(const TripleEvent& ev, int marker_b, int n, int k) {
    if (k < -1 || k > n) throw GoalError("psi family requires k in [-1, n]");
    GoalFamily f;
    f.tag = FamilyTag::PsiLe;
    f.ev = ev;
    f.marker_b = marker_b;
    f.n = n;
    f.k = k;
    return Goal(f);
}

inline Goal make_chi_gt(const TripleEvent& ev, int marker_b, int n, int k) {
    if (k < -1 || k > n) throw GoalError("chi family requires k in [-1, n]");
    GoalFamily f;
    f.tag = FamilyTag::ChiGt;
    f.ev = ev;
    f.marker_b = marker_b;
    f.n = n;
    f.k = k;
    return Goal(f);
}

/// Dichotomy goal: "count <= k" branch marked by first action `marker_a`,
/// "count > k" branch by `marker_b`. Requires two distinct actions.
inline Goal make_xi_k(const TripleEvent& ev, int marker_a, int marker_b, int n, int k) {
    if (marker_a == marker_b)
        throw GoalError("dichotomy family requires two distinct marker actions");
    if (k < -1 || k > n) throw GoalError("xi_k requires k in [-1, n]");
    GoalFamily f;
    f.tag = FamilyTag::XiK;
    f.ev = ev;
    f.marker_a = marker_a;
    f.marker_b = marker_b;
    f.n = n;
    f.k = k;
    return Goal(f);
}

/// Width-2 run goal: a-branch asks for r consecutive successes, b-branch for
/// s consecutive failures (roles swapped when reflected).
inline Goal make_xi_rs(const TripleEvent& ev, int marker_a, int marker_b, int r, int s,
                       bool reflected = false) {
    if (marker_a == marker_b)
        throw GoalError("dichotomy family requires two distinct marker actions");
    if (r < 0 || s < 0) throw GoalError("xi_rs requires non-negative run lengths");
    GoalFamily f;
    f.tag = FamilyTag::XiRs;
    f.ev = ev;
    f.marker_a = marker_a;
    f.marker_b = marker_b;
    f.r = r;
    f.s_len = s;
    f.reflected = reflected;
    return Goal(f);
}

} // namespace worldlens

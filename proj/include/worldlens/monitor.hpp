#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "worldlens/goal.hpp"
#include "worldlens/world.hpp"

namespace worldlens {

enum class Verdict : std::uint8_t { Pending, Accepted, Rejected };

/// Progress tracker for one sequential goal over a stream of state-action
/// pairs. `pos` indexes the next unresolved part; `pending_next` marks a
/// deferred check that must pass on the incoming pair. Accepted/Rejected are
/// absorbing.
struct SeqMonitor {
    std::uint16_t pos = 0;
    std::int16_t pending_next = -1;
    Verdict verdict = Verdict::Pending;
};

inline SeqMonitor seq_monitor_init(const SequentialGoal& goal) {
    SeqMonitor m;
    if (goal.parts.empty()) m.verdict = Verdict::Accepted;
    return m;
}

/// Advance on one pair. Rules, in order:
///  - a deferred next-step check tests the incoming pair and rejects on miss;
///  - leading now-goals test the current pair without consuming it;
///  - a leading eventually-goal waits for a hit, then the remaining goals are
///    evaluated from that same pair;
///  - a leading next-goal defers its check to the following pair;
///  - an exhausted part list accepts.
inline SeqMonitor seq_monitor_step(const SequentialGoal& goal, SeqMonitor m, int s, int a) {
    if (m.verdict != Verdict::Pending) return m;
    if (m.pending_next >= 0) {
        if (!goal.parts[m.pending_next].pred.contains(s, a)) {
            m.verdict = Verdict::Rejected;
            return m;
        }
        m.pending_next = -1;
    }
    while (true) {
        if (m.pos == goal.parts.size()) {
            m.verdict = Verdict::Accepted;
            return m;
        }
        const BasicGoal& g = goal.parts[m.pos];
        switch (g.op) {
        case TemporalOp::Now:
            if (!g.pred.contains(s, a)) {
                m.verdict = Verdict::Rejected;
                return m;
            }
            ++m.pos;
            break;
        case TemporalOp::Eventually:
            if (!g.pred.contains(s, a)) return m; // keep waiting
            ++m.pos;
            break;
        case TemporalOp::Next:
            m.pending_next = static_cast<std::int16_t>(m.pos);
            ++m.pos;
            return m;
        }
    }
}

/// Monitor for a whole goal: one SeqMonitor per disjunct. Accepted as soon as
/// any disjunct accepts, rejected once all have rejected.
class GoalMonitor {
public:
    explicit GoalMonitor(const Goal& goal) : goal_(goal.materialize()) {
        states_.reserve(goal_.disjuncts().size());
        for (const auto& seq : goal_.disjuncts()) states_.push_back(seq_monitor_init(seq));
    }

    Verdict verdict() const {
        bool all_rejected = true;
        for (const SeqMonitor& m : states_) {
            if (m.verdict == Verdict::Accepted) return Verdict::Accepted;
            if (m.verdict != Verdict::Rejected) all_rejected = false;
        }
        return all_rejected ? Verdict::Rejected : Verdict::Pending;
    }

    Verdict step(int s, int a) {
        for (std::size_t i = 0; i < states_.size(); ++i)
            states_[i] = seq_monitor_step(goal_.disjuncts()[i], states_[i], s, a);
        return verdict();
    }

    const Goal& materialized_goal() const { return goal_; }
    const std::vector<SeqMonitor>& states() const { return states_; }

private:
    Goal goal_;
    std::vector<SeqMonitor> states_;
};

/// Three-valued satisfaction of a goal on a finite history prefix:
/// Accepted/Rejected once the verdict can no longer change, Pending otherwise.
inline Verdict satisfies_prefix(const Goal& goal, const FiniteHistory& h) {
    GoalMonitor monitor(goal);
    Verdict v = monitor.verdict();
    for (std::size_t i = 0; i < h.actions.size() && v == Verdict::Pending; ++i)
        v = monitor.step(h.states[i], h.actions[i]);
    return v;
}

namespace detail {

/// Canonical byte encoding of a joint monitor state, for product-chain node
/// identity. Rejected disjuncts normalize to a fixed pattern; an accepted
/// disjunct makes the whole key the accept sink, handled by the caller.
inline std::string encode_monitor(const std::vector<SeqMonitor>& states) {
    std::string key;
    key.reserve(states.size() * 3);
    for (const SeqMonitor& m : states) {
        if (m.verdict == Verdict::Rejected) {
            key.push_back('\xff');
            key.push_back('\xff');
            key.push_back('\xff');
        } else {
            key.push_back(static_cast<char>(m.pos & 0xff));
            key.push_back(static_cast<char>((m.pos >> 8) & 0xff));
            key.push_back(static_cast<char>(m.pending_next + 1));
        }
    }
    return key;
}

} // namespace detail

} // namespace worldlens

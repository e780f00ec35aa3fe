#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "worldlens/goal.hpp"

namespace worldlens {

namespace detail {

inline double log_binomial_coefficient(int n, int r) {
    return std::lgamma(n + 1.0) - std::lgamma(r + 1.0) - std::lgamma(n - r + 1.0);
}

/// p^e with the 0^0 = 1 convention used throughout the closed forms.
inline double pow_count(double p, int e) {
    if (e == 0) return 1.0;
    return std::pow(p, e);
}

} // namespace detail

/// Success probability of one word goal: p^{|w|_1} (1-p)^{n-|w|_1}.
inline double closed_form_phi(double p, std::span<const std::uint8_t> word) {
    int ones = 0;
    for (auto b : word)
        if (b) ++ones;
    int n = static_cast<int>(word.size());
    return detail::pow_count(p, ones) * detail::pow_count(1.0 - p, n - ones);
}

/// Binomial pmf C(n,r) p^r (1-p)^{n-r}; log-space above n = 30 to keep deep
/// tails from underflowing.
inline double closed_form_rho(double p, int n, int r) {
    if (r < 0 || r > n) throw std::out_of_range("rho requires 0 <= r <= n");
    if (p == 0.0) return r == 0 ? 1.0 : 0.0;
    if (p == 1.0) return r == n ? 1.0 : 0.0;
    if (n <= 30) {
        return detail::binomial_coefficient(n, r) * detail::pow_count(p, r) *
               detail::pow_count(1.0 - p, n - r);
    }
    double lg = detail::log_binomial_coefficient(n, r) + r * std::log(p) +
                (n - r) * std::log1p(-p);
    return std::exp(lg);
}

/// P(X <= k) for X ~ Bin(n, p); k = -1 is the empty-disjunction convention.
inline double closed_form_tail_le(double p, int n, int k) {
    if (k < -1 || k > n) throw std::out_of_range("tail_le requires k in [-1, n]");
    if (k == -1) return 0.0;
    if (k == n) return 1.0;
    double sum = 0.0;
    // sum the smaller tail for accuracy
    if (k <= n / 2) {
        for (int r = 0; r <= k; ++r) sum += closed_form_rho(p, n, r);
        return std::min(sum, 1.0);
    }
    for (int r = k + 1; r <= n; ++r) sum += closed_form_rho(p, n, r);
    return std::max(0.0, 1.0 - sum);
}

/// P(X > k); k = n is the empty-disjunction convention.
inline double closed_form_tail_gt(double p, int n, int k) {
    if (k < -1 || k > n) throw std::out_of_range("tail_gt requires k in [-1, n]");
    if (k == n) return 0.0;
    if (k == -1) return 1.0;
    if (k <= n / 2) {
        double sum = 0.0;
        for (int r = 0; r <= k; ++r) sum += closed_form_rho(p, n, r);
        return std::max(0.0, 1.0 - sum);
    }
    double sum = 0.0;
    for (int r = k + 1; r <= n; ++r) sum += closed_form_rho(p, n, r);
    return std::min(sum, 1.0);
}

struct BranchValues {
    double v_a = 0.0; // branch answered by the a-marker first action
    double v_b = 0.0; // branch answered by the b-marker first action
};

/// Optimal success probabilities of a family goal's branches as functions of
/// the event probability p (single-branch families fill v_b only).
inline BranchValues family_branch_values(const GoalFamily& f, double p_raw) {
    double p = f.ev.negate_outcome ? 1.0 - p_raw : p_raw;
    BranchValues v;
    switch (f.tag) {
    case FamilyTag::PhiW:
        v.v_b = closed_form_phi(p, f.word);
        break;
    case FamilyTag::Rho:
        v.v_b = closed_form_rho(p, f.n, f.r);
        break;
    case FamilyTag::PsiLe:
        v.v_b = closed_form_tail_le(p, f.n, f.k);
        break;
    case FamilyTag::ChiGt:
        v.v_b = closed_form_tail_gt(p, f.n, f.k);
        break;
    case FamilyTag::XiK:
        v.v_a = closed_form_tail_le(p, f.n, f.k);
        v.v_b = closed_form_tail_gt(p, f.n, f.k);
        break;
    case FamilyTag::XiRs: {
        double q = f.reflected ? 1.0 - p : p;
        v.v_a = detail::pow_count(q, f.r);
        v.v_b = detail::pow_count(1.0 - q, f.s_len);
        break;
    }
    }
    return v;
}

/// Euclidean projection of a vector onto the probability simplex.
inline std::vector<double> project_to_simplex(std::span<const double> v) {
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0, theta = 0.0;
    for (int i = 0; i < static_cast<int>(sorted.size()); ++i) {
        cumulative += sorted[i];
        double t = (cumulative - 1.0) / (i + 1);
        if (sorted[i] - t > 0.0) theta = t;
    }
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(0.0, v[i] - theta);
    return out;
}

} // namespace worldlens

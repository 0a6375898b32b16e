#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "cone.hpp"
#include "errors.hpp"
#include "induction.hpp"

namespace iet {

/**
 * Coefficients of the area functional: Area(lambda, pi, delta) = l . delta with
 * l_i = -sum_{r>i} lambda_r + sum_{r>pi(i)} lambda_{pi^{-1} r}.
 */
inline std::vector<double> area_functional(std::span<const double> lam, const Permutation& pi) {
    const int m = pi.size();
    std::vector<double> tail(m + 2, 0.0), tail_pi(m + 2, 0.0);
    for (int r = m; r >= 1; --r) {
        tail[r] = tail[r + 1] + lam[r - 1];
        tail_pi[r] = tail_pi[r + 1] + lam[pi.inv(r) - 1];
    }
    std::vector<double> ell(m);
    for (int i = 1; i <= m; ++i) ell[i - 1] = -tail[i + 1] + tail_pi[pi(i) + 1];
    return ell;
}

inline std::vector<BigRational> area_functional_exact(const std::vector<BigRational>& lam, const Permutation& pi) {
    const int m = pi.size();
    std::vector<BigRational> tail(m + 2, 0), tail_pi(m + 2, 0);
    for (int r = m; r >= 1; --r) {
        tail[r] = tail[r + 1] + lam[r - 1];
        tail_pi[r] = tail_pi[r + 1] + lam[pi.inv(r) - 1];
    }
    std::vector<BigRational> ell(m);
    for (int i = 1; i <= m; ++i) ell[i - 1] = -tail[i + 1] + tail_pi[pi(i) + 1];
    return ell;
}

/// vol{delta in K_pi (or its half) : Area(lambda, pi, delta) <= 1}; homogeneous of degree -m in lambda.
inline double cone_volume(std::span<const double> lam, const Permutation& pi, ConeVariant v) {
    for (double x : lam)
        if (!(x > 0.0)) throw validation_error("cone volume: lengths must be positive");
    const auto data = cached_cone(pi, v);
    return truncated_volume(data->cone, data->triangulation, area_functional(lam, pi)).value;
}

inline double r(std::span<const double> lam, const Permutation& pi) { return cone_volume(lam, pi, ConeVariant::full); }
inline double r_plus(std::span<const double> lam, const Permutation& pi) { return cone_volume(lam, pi, ConeVariant::plus); }
inline double r_minus(std::span<const double> lam, const Permutation& pi) { return cone_volume(lam, pi, ConeVariant::minus); }

inline double r(const IETState& s) { return r(s.lengths().span(), s.perm()); }
inline double r_plus(const IETState& s) { return r_plus(s.lengths().span(), s.perm()); }
inline double r_minus(const IETState& s) { return r_minus(s.lengths().span(), s.perm()); }

/**
 * The invariant density of G up to one constant per Rauzy class: r_minus on
 * the plus set and r_plus on the minus set.
 */
inline double density(std::span<const double> lam, const Permutation& pi) {
    const Sign s = sign_of(lam, pi);
    if (s == Sign::boundary) throw boundary_error("density: state on the boundary");
    return s == Sign::plus ? r_minus(lam, pi) : r_plus(lam, pi);
}

inline double density(const IETState& s) { return density(s.lengths().span(), s.perm()); }

namespace detail {

/// Unnormalized T_{c^{-n}}: the start of the letter that ends at s.
inline std::pair<std::vector<double>, Letter> backward_letter(const IETState& s, std::int64_t n) {
    const Sign sg = sign_set(s);
    if (sg == Sign::boundary) throw boundary_error("transition: state on the boundary");
    if (n < 0) throw validation_error("transition: n must be >= 0");
    const Op c = sg == Sign::minus ? Op::a : Op::b;
    const Letter l{c, n, apply_power(c, s.perm(), -n)};
    if (n == 0) return {s.lengths().values(), l};
    return {letter_matrix<double>(l).apply(s.lengths().span()), l};
}

}  // namespace detail

/// p_n(s): probability that the letter leading into s has count n.
inline double transition_p(const IETState& s, std::int64_t n) {
    if (n < 1) throw validation_error("transition_p: n must be >= 1");
    const auto [lam, l] = detail::backward_letter(s, n);
    const double here = density(s);
    // the letter starts on the set where its operation applies
    const double there = l.op == Op::a ? r_minus(lam, l.perm) : r_plus(lam, l.perm);
    return there / here;
}

/// sum_{n > N} p_n(s) in closed form.
inline double tail(const IETState& s, std::int64_t N) {
    const auto [lam, l] = detail::backward_letter(s, N);
    const double here = density(s);
    const double there = l.op == Op::a ? r_plus(lam, l.perm) : r_minus(lam, l.perm);
    return there / here;
}

/// Prob(w | s) = rho(T_w s) / rho(s) for a word compatible with s.
inline double prob_word(const Word& w, const IETState& s) {
    if (w.empty()) return 1.0;
    if (!is_compatible(w, s)) throw validation_error("prob_word: word is not compatible with the state");
    const auto lam = word_matrix_big(w).apply(s.lengths().span());
    const Letter& first = w.front();
    const double there = first.op == Op::a ? r_minus(lam, first.perm) : r_plus(lam, first.perm);
    return there / density(s);
}

struct LowerBoundReport {
    double probability = 0.0;
    double matrix_norm = 0.0;  // |A(w)|
    double ratio = 0.0;        // Prob(w|s) |A(w)|^m
    double min_length = 0.0;   // min_i lambda_i, the eps with s in Delta_eps
};

inline LowerBoundReport lower_bounds_check(const Word& w, const IETState& s) {
    LowerBoundReport rep;
    rep.probability = prob_word(w, s);
    rep.matrix_norm = w.empty() ? static_cast<double>(s.size()) : word_matrix_big(w).total();
    rep.ratio = rep.probability * std::pow(rep.matrix_norm, s.size());
    rep.min_length = s.lengths().normalized().min();
    return rep;
}

/// CSV rows lambda_1..lambda_m, r_plus, r_minus over the given grid.
inline void write_density_csv(std::ostream& os, const Permutation& pi,
                              const std::vector<std::vector<double>>& grid) {
    const int m = pi.size();
    for (int i = 1; i <= m; ++i) os << "lambda_" << i << ',';
    os << "r_plus,r_minus\n";
    const auto old = os.precision(17);
    for (const auto& lam : grid) {
        for (double x : lam) os << x << ',';
        os << r_plus(lam, pi) << ',' << r_minus(lam, pi) << '\n';
    }
    os.precision(old);
}

}  // namespace iet

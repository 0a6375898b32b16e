#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "errors.hpp"
#include "iet.hpp"
#include "matrix.hpp"
#include "random.hpp"

namespace iet {

/// log(max_i u_i/v_i / min_i u_i/v_i); projective, so scale-free in u and v.
inline double hilbert_distance(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size() || u.empty()) throw validation_error("hilbert_distance: size mismatch");
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!(u[i] > 0.0) || !(v[i] > 0.0))
            throw validation_error("hilbert_distance: coordinates must be positive");
        const double r = u[i] / v[i];
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    return std::log(hi / lo);
}

inline double hilbert_distance(const LengthVector& u, const LengthVector& v) {
    return hilbert_distance(u.span(), v.span());
}

/// Metric on the disjoint union of simplices: 2 is added across permutations.
inline double hilbert_distance(const IETState& x, const IETState& y) {
    const double d = hilbert_distance(x.lengths(), y.lengths());
    return x.perm() == y.perm() ? d : d + 2.0;
}

/// J_A(u) = Au / |Au|.
template <class Int>
std::vector<double> project(const IntMatrix<Int>& A, std::span<const double> u) {
    std::vector<double> w = A.apply(u);
    double t = 0.0;
    for (double x : w) t += x;
    if (!(t > 0.0)) throw validation_error("project: image vector is zero");
    for (double& x : w) x /= t;
    return w;
}

template <class Int>
LengthVector project(const IntMatrix<Int>& A, const LengthVector& u) {
    return LengthVector(project(A, u.span()));
}

/// det DJ_A(u) = 1/|Au|^m for unimodular A and u on the simplex.
template <class Int>
double jacobian_det(const IntMatrix<Int>& A, std::span<const double> u) {
    const std::vector<double> w = A.apply(u);
    double t = 0.0;
    for (double x : w) t += x;
    return std::pow(t, -static_cast<double>(A.size()));
}

struct MatrixQuantities {
    double total = 0.0;
    double row = 1.0;  // max_{i,j,k} A_ij / A_ik
    double col = 1.0;  // max_{i,j,k} A_ij / A_kj
};

template <class Int>
MatrixQuantities quantities(const IntMatrix<Int>& A) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const int m = A.size();
    MatrixQuantities q;
    q.total = A.total();
    for (int i = 1; i <= m; ++i) {
        double rmax = 0.0, rmin = inf, cmax = 0.0, cmin = inf;
        for (int j = 1; j <= m; ++j) {
            rmax = std::max(rmax, A.entry(i, j));
            rmin = std::min(rmin, A.entry(i, j));
            cmax = std::max(cmax, A.entry(j, i));
            cmin = std::min(cmin, A.entry(j, i));
        }
        if (rmax > 0.0) q.row = std::max(q.row, rmin > 0.0 ? rmax / rmin : inf);
        if (cmax > 0.0) q.col = std::max(q.col, cmin > 0.0 ? cmax / cmin : inf);
    }
    return q;
}

/// A sub-simplex of the standard simplex given by its vertices.
using SimplexRegion = std::vector<std::vector<double>>;

struct DistortionReport {
    double ratio = 0.0;  // [m(J_A C1)/m(J_A C2)] / [m(C1)/m(C2)]
    double lower = 0.0;  // row(A)^{-m}
    double upper = 0.0;  // row(A)^{m}
    bool within = false;
};

namespace detail {

/// Mean of det DJ_A over uniform samples of the sub-simplex.
template <class Int>
double mean_jacobian(const IntMatrix<Int>& A, const SimplexRegion& C, int samples, RngStream& rng) {
    const int m = A.size();
    const int k = static_cast<int>(C.size());
    double acc = 0.0;
    std::vector<double> x(m);
    for (int s = 0; s < samples; ++s) {
        const auto w = rng.simplex_point(k);
        std::fill(x.begin(), x.end(), 0.0);
        for (int v = 0; v < k; ++v)
            for (int i = 0; i < m; ++i) x[i] += w[v] * C[v][i];
        acc += jacobian_det(A, std::span<const double>(x));
    }
    return acc / samples;
}

}  // namespace detail

/**
 * Bounded distortion: m(J_A C) = integral of the Jacobian over C, estimated
 * by sampling, so the measured ratio is a ratio of Jacobian means.
 */
template <class Int>
DistortionReport distortion_bounds(const IntMatrix<Int>& A, const SimplexRegion& C1,
                                   const SimplexRegion& C2, int samples, RngStream& rng) {
    if (!A.is_positive()) throw validation_error("distortion_bounds: matrix must be positive");
    DistortionReport rep;
    rep.ratio = detail::mean_jacobian(A, C1, samples, rng) / detail::mean_jacobian(A, C2, samples, rng);
    const double row = quantities(A).row;
    const double m = A.size();
    rep.lower = std::pow(row, -m);
    rep.upper = std::pow(row, m);
    rep.within = rep.ratio >= rep.lower && rep.ratio <= rep.upper;
    return rep;
}

/// Sampled max of d(J_A u, J_A v) / d(u, v) over uniform pairs.
template <class Int>
double contraction_factor(const IntMatrix<Int>& A, int trials, RngStream& rng) {
    if (!A.is_positive()) throw validation_error("contraction_factor: matrix must be positive");
    const int m = A.size();
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const auto u = rng.simplex_point(m), v = rng.simplex_point(m);
        const double d = hilbert_distance(u, v);
        if (!(d > 0.0)) continue;
        worst = std::max(worst, hilbert_distance(project(A, u), project(A, v)) / d);
    }
    return worst;
}

/// Birkhoff's bound tanh(D/4), D the Hilbert diameter of the image of the orthant.
template <class Int>
double birkhoff_bound(const IntMatrix<Int>& A) {
    if (!A.is_positive()) throw validation_error("birkhoff_bound: matrix must be positive");
    const int m = A.size();
    std::vector<std::vector<double>> cols(m, std::vector<double>(m));
    for (int i = 1; i <= m; ++i)
        for (int j = 1; j <= m; ++j) cols[j - 1][i - 1] = A.entry(i, j);
    double diam = 0.0;
    for (int j = 0; j < m; ++j)
        for (int k = j + 1; k < m; ++k) diam = std::max(diam, hilbert_distance(cols[j], cols[k]));
    return std::tanh(diam / 4.0);
}

}  // namespace iet

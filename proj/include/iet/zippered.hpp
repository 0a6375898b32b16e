#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cone.hpp"
#include "errors.hpp"
#include "induction.hpp"
#include "matrix.hpp"
#include "permutation.hpp"
#include "projective.hpp"
#include "random.hpp"

namespace iet {

/// A zippered rectangle (lambda, h, a, pi); vectors are 0-based, symbols 1-based.
struct ZipperedRectangle {
    std::vector<double> lambda;
    std::vector<double> h;
    std::vector<double> a;
    Permutation perm;

    int size() const { return perm.size(); }
    friend bool operator==(const ZipperedRectangle&, const ZipperedRectangle&) = default;
};

/// The same object in coordinates delta_i = a_{i-1} - a_i (a_0 = 0).
struct DeltaCoords {
    std::vector<double> lambda;
    Permutation perm;
    std::vector<double> delta;

    friend bool operator==(const DeltaCoords&, const DeltaCoords&) = default;
};

struct ValidationReport {
    bool valid = true;
    std::vector<std::string> violations;
};

namespace detail {

inline void check_sizes(const std::vector<double>& lambda, const Permutation& pi, std::size_t k) {
    if (lambda.size() != static_cast<std::size_t>(pi.size()) || k != lambda.size())
        throw validation_error("zippered rectangle: vector sizes differ from the permutation");
}

/// h_r = -sum_{i<r} delta_i + sum_{l<pi(r)} delta_{pi^{-1} l}.
inline std::vector<double> heights_from_delta(const Permutation& pi, const std::vector<double>& d) {
    const int m = pi.size();
    std::vector<double> prefix(m + 1, 0.0), prefix_pi(m + 1, 0.0);
    for (int i = 1; i <= m; ++i) {
        prefix[i] = prefix[i - 1] + d[i - 1];
        prefix_pi[i] = prefix_pi[i - 1] + d[pi.inv(i) - 1];
    }
    std::vector<double> h(m);
    for (int r = 1; r <= m; ++r) h[r - 1] = -prefix[r - 1] + prefix_pi[pi(r) - 1];
    return h;
}

/// a_i = -(delta_1 + ... + delta_i).
inline std::vector<double> zips_from_delta(const std::vector<double>& d) {
    std::vector<double> a(d.size());
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) a[i] = -(s += d[i]);
    return a;
}

inline std::vector<double> delta_from_zips(const std::vector<double>& a) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = (i ? a[i - 1] : 0.0) - a[i];
    return d;
}

/**
 * Carries (delta, h) along an in-place run on lambda: delta transforms like
 * lambda (by A^{-1}) and h by A^t.
 */
struct LiftVisitor {
    double* delta;
    double* h;
    int m;

    void step(Op op, int p, const int*) {
        if (op == Op::a) {
            delta[p - 1] -= delta[m - 1];
            const double dm = delta[m - 1], hm = h[m - 1];
            for (int j = m; j > p + 1; --j) {
                delta[j - 1] = delta[j - 2];
                h[j - 1] = h[j - 2];
            }
            delta[p] = dm;
            h[p] = hm + h[p - 1];
        } else {
            delta[m - 1] -= delta[p - 1];
            h[p - 1] += h[m - 1];
        }
    }
    void skip_a(int p, double c) {
        double s = 0.0;
        for (int j = p + 1; j <= m; ++j) {
            s += delta[j - 1];
            h[j - 1] += c * h[p - 1];
        }
        delta[p - 1] -= c * s;
    }
    void skip_b(const int* img, int q, double c) {
        double s = 0.0;
        for (int j = 1; j <= m; ++j)
            if (img[j - 1] > q) {
                s += delta[j - 1];
                h[j - 1] += c * h[m - 1];
            }
        delta[m - 1] -= c * s;
    }
};

}  // namespace detail

/// Violations of delta in K_pi; empty when the cone conditions hold.
inline std::vector<std::string> cone_violations(const Permutation& pi, const std::vector<double>& d,
                                                double slack = 1e-12) {
    const int m = pi.size();
    std::vector<std::string> out;
    double s = 0.0, s_pi = 0.0;
    for (int i = 1; i < m; ++i) {
        s += d[i - 1];
        s_pi += d[pi.inv(i) - 1];
        if (s > slack) out.push_back("delta_1+...+delta_" + std::to_string(i) + " <= 0");
        if (s_pi < -slack) out.push_back("delta_pi^-1(1)+...+delta_pi^-1(" + std::to_string(i) + ") >= 0");
    }
    return out;
}

inline bool in_cone(const Permutation& pi, const std::vector<double>& d, double slack = 1e-12) {
    return cone_violations(pi, d, slack).empty();
}

/**
 * Checks the defining equations (to 1e-10) and inequalities (to -1e-12) of a
 * zippered rectangle, both relative to max(1, max |h_i|). Equation i pairs rectangle i with the one whose image
 * follows it, with h_0 = a_0 = h_{m+1} = a_{m+1} = 0 and pi(0) = 0.
 */
inline ValidationReport validate(const ZipperedRectangle& z) {
    ValidationReport rep;
    const int m = z.perm.size();
    if (static_cast<int>(z.lambda.size()) != m || static_cast<int>(z.h.size()) != m ||
        static_cast<int>(z.a.size()) != m) {
        rep.valid = false;
        rep.violations.push_back("sizes differ from the permutation");
        return rep;
    }
    auto H = [&](int i) { return i >= 1 && i <= m ? z.h[i - 1] : 0.0; };
    auto A = [&](int i) { return i >= 1 && i <= m ? z.a[i - 1] : 0.0; };
    auto pi = [&](int i) { return i == 0 ? 0 : z.perm(i); };
    auto pinv = [&](int k) { return k == m + 1 ? m + 1 : z.perm.inv(k); };
    auto fail = [&](std::string what) {
        rep.valid = false;
        rep.violations.push_back(std::move(what));
    };
    double scale = 1.0;
    for (double x : z.h) scale = std::max(scale, std::abs(x));
    const double eq_tol = 1e-10 * scale, slack = 1e-12 * scale;

    for (int i = 1; i <= m; ++i)
        if (!(z.lambda[i - 1] > 0.0)) fail("lambda_" + std::to_string(i) + " > 0");
    for (int i = 0; i <= m; ++i) {
        const int j = pinv(pi(i) + 1);
        const double lhs = H(i) - A(i), rhs = H(j) - A(j - 1);
        if (std::abs(lhs - rhs) > eq_tol) fail("equation i=" + std::to_string(i));
    }
    const int p = z.perm.inv(m);
    for (int i = 1; i <= m; ++i) {
        const auto si = std::to_string(i);
        if (H(i) < -slack) fail("h_" + si + " >= 0");
        if (i <= m - 1 && A(i) < -slack) fail("a_" + si + " >= 0");
        if (i != m && i != p && A(i) > std::min(H(i), H(i + 1)) + slack)
            fail("a_" + si + " <= min(h_" + si + ", h_" + std::to_string(i + 1) + ")");
    }
    if (A(m) > H(m) + slack) fail("a_m <= h_m");
    if (A(m) < -H(p) - slack) fail("a_m >= -h_pi^-1(m)");
    if (A(p) > H(p + 1) + slack) fail("a_pi^-1(m) <= h_pi^-1(m)+1");
    return rep;
}

inline DeltaCoords to_delta(const ZipperedRectangle& z) {
    detail::check_sizes(z.lambda, z.perm, z.a.size());
    return {z.lambda, z.perm, detail::delta_from_zips(z.a)};
}

inline ZipperedRectangle from_delta(const DeltaCoords& dc) {
    detail::check_sizes(dc.lambda, dc.perm, dc.delta.size());
    double scale = 0.0;
    for (double x : dc.delta) scale = std::max(scale, std::abs(x));
    const auto bad = cone_violations(dc.perm, dc.delta, 1e-12 * std::max(1.0, scale));
    if (!bad.empty()) throw validation_error("from_delta: delta outside K_pi (" + bad.front() + ")");
    return {dc.lambda, detail::heights_from_delta(dc.perm, dc.delta), detail::zips_from_delta(dc.delta),
            dc.perm};
}

/// sum_i delta_i (-sum_{r>i} lambda_r + sum_{r>pi(i)} lambda_{pi^{-1} r}).
inline double area(const DeltaCoords& dc) {
    const int m = dc.perm.size();
    std::vector<double> tail(m + 2, 0.0), tail_pi(m + 2, 0.0);
    for (int r = m; r >= 1; --r) {
        tail[r] = tail[r + 1] + dc.lambda[r - 1];
        tail_pi[r] = tail_pi[r + 1] + dc.lambda[dc.perm.inv(r) - 1];
    }
    double s = 0.0;
    for (int i = 1; i <= m; ++i) s += dc.delta[i - 1] * (-tail[i + 1] + tail_pi[dc.perm(i) + 1]);
    return s;
}

/// sum_r lambda_r h_r.
inline double area(const ZipperedRectangle& z) {
    double s = 0.0;
    for (std::size_t r = 0; r < z.lambda.size(); ++r) s += z.lambda[r] * z.h[r];
    return s;
}

inline double total_length(const ZipperedRectangle& z) {
    double s = 0.0;
    for (double x : z.lambda) s += x;
    return s;
}

inline Sign sign_set(const ZipperedRectangle& z) { return sign_of(z.lambda, z.perm); }

/// P^t: lambda e^t, h e^{-t}, a e^{-t}.
inline ZipperedRectangle flow(const ZipperedRectangle& z, double t) {
    ZipperedRectangle out = z;
    const double up = std::exp(t), down = std::exp(-t);
    for (double& x : out.lambda) x *= up;
    for (double& x : out.h) x *= down;
    for (double& x : out.a) x *= down;
    return out;
}

namespace detail {

inline ZipperedRectangle lifted(const ZipperedRectangle& z, bool full_letter, RunResult* run = nullptr) {
    const int m = z.size();
    std::vector<double> lam = z.lambda, h = z.h, d = delta_from_zips(z.a);
    std::vector<int> img = z.perm.image();
    LiftVisitor vis{d.data(), h.data(), m};
    if (full_letter) {
        const auto r = zorich_run_inplace(lam.data(), img.data(), m, vis);
        if (run) *run = r;
    } else {
        const Op op = rauzy_step_inplace(lam.data(), img.data(), m, vis);
        if (run) *run = {op, 1};
    }
    return {std::move(lam), std::move(h), zips_from_delta(d), Permutation(std::move(img))};
}

}  // namespace detail

/// U: the lift of one Rauzy step, lambda' = A^{-1} lambda, h' = A^t h, delta' = A^{-1} delta.
inline ZipperedRectangle map_u(const ZipperedRectangle& z) {
    if (sign_set(z) == Sign::boundary) throw boundary_error("map_u: state on the boundary");
    return detail::lifted(z, false);
}

inline void require_section(const ZipperedRectangle& z) {
    if (std::abs(total_length(z) - 1.0) > 1e-9) throw validation_error("not on the section |lambda| = 1");
}

/// Time for P^t to bring the induced base back to unit length.
inline double roof(const ZipperedRectangle& z) {
    require_section(z);
    const int m = z.size();
    const double cut = std::min(z.lambda[m - 1], z.lambda[z.perm.inv(m) - 1]);
    return -std::log(total_length(z) - cut);
}

namespace detail {

/// Rescales onto |lambda| = 1 exactly, compensating in h and a.
inline void renormalize(ZipperedRectangle& z) {
    const double s = total_length(z);
    for (double& x : z.lambda) x /= s;
    for (double& x : z.h) x *= s;
    for (double& x : z.a) x *= s;
}

}  // namespace detail

/// S = U P^tau.
inline ZipperedRectangle section_map_s(const ZipperedRectangle& z) {
    if (sign_set(z) == Sign::boundary) throw boundary_error("section_map_s: state on the boundary");
    ZipperedRectangle out = map_u(flow(z, roof(z)));
    detail::renormalize(out);
    return out;
}

/// Y^+ = {plus set, a_m <= 0}, Y^- = {minus set, a_m >= 0}.
inline bool in_y_plus(const ZipperedRectangle& z) {
    return sign_set(z) == Sign::plus && z.a.back() <= 0.0;
}
inline bool in_y_minus(const ZipperedRectangle& z) {
    return sign_set(z) == Sign::minus && z.a.back() >= 0.0;
}

struct LiftStep {
    ZipperedRectangle state;
    Letter letter;
    double flow_time;  // total roof time spent, -log |A^{-1} lambda|
};

/**
 * F = S^{n(lambda, pi)}. Since U and P^t commute this is U^n followed by one
 * flow, so whole letters are applied at once.
 */
inline LiftStep zorich_lift_step(const ZipperedRectangle& z) {
    require_section(z);
    const Sign sg = sign_set(z);
    if (sg == Sign::boundary) throw boundary_error("zorich_lift_f: state on the boundary");
    if (!in_y_plus(z) && !in_y_minus(z)) throw validation_error("zorich_lift_f: state outside Y+ and Y-");
    detail::RunResult run{};
    ZipperedRectangle out = detail::lifted(z, true, &run);
    const double t = -std::log(total_length(out));
    detail::renormalize(out);
    return {std::move(out), Letter{run.op, run.n, z.perm}, t};
}

inline ZipperedRectangle zorich_lift_f(const ZipperedRectangle& z) { return zorich_lift_step(z).state; }

/**
 * A random unit-area point of Y+ or Y-: lambda uniform on the simplex, delta a
 * random positive combination of the rays of the half cone matching the
 * sign set (a_m = -sum delta).
 */
inline ZipperedRectangle random_section_point(const Permutation& pi, RngStream& rng) {
    const int m = pi.size();
    while (true) {
        std::vector<double> lam = rng.simplex_point(m);
        const Sign sg = sign_of(lam, pi);
        if (sg == Sign::boundary) continue;
        const auto data = cached_cone(pi, sg == Sign::plus ? ConeVariant::minus : ConeVariant::plus);
        std::vector<double> d(m, 0.0);
        for (const auto& ray : data->cone.rays) {
            const double w = rng.exponential();
            for (int i = 0; i < m; ++i) d[i] += w * ray[i].convert_to<double>();
        }
        DeltaCoords dc{lam, pi, d};
        const double ar = area(dc);
        for (double& x : dc.delta) x /= ar;
        return from_delta(dc);
    }
}

/**
 * Log-ratio span over lambda_i, h_i, |a_i| and |h_i - a_i|; plus 2 when the
 * permutations differ or a_m changes sign.
 */
inline double zr_distance(const ZipperedRectangle& x, const ZipperedRectangle& y) {
    const int m = x.size();
    if (y.size() != m) throw validation_error("zr_distance: size mismatch");
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    auto take = [&](double u, double v) {
        if (u == 0.0 || v == 0.0) throw validation_error("zr_distance: undefined at a zero component");
        const double r = u / v;
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    };
    for (int i = 0; i < m; ++i) {
        take(x.lambda[i], y.lambda[i]);
        take(x.h[i], y.h[i]);
        take(std::abs(x.a[i]), std::abs(y.a[i]));
        take(std::abs(x.h[i] - x.a[i]), std::abs(y.h[i] - y.a[i]));
    }
    const double d = std::log(hi / lo);
    const bool same = x.perm == y.perm && x.a.back() / y.a.back() > 0.0;
    return same ? d : d + 2.0;
}

struct HeightReconstruction {
    std::vector<double> h;               // normalized so that <lambda, h> = 1
    std::vector<std::vector<double>> generators;  // rays of A(w)^t R^m_+, same normalization
    double diameter = 0.0;               // Hilbert diameter of the cone
    bool wide = false;                   // no positive matrix in the past
};

/**
 * Heights compatible with a past itinerary: after the letters of w the height
 * vector lies in A(w)^t R^m_+, a cone that shrinks to a line as w grows. The
 * estimate is the normalized barycentre of the cone's generators.
 */
inline HeightReconstruction reconstruct_height(const Word& past, const IETState& current) {
    const int m = current.size();
    HeightReconstruction out;
    if (!past.empty() && !(past.back().end_perm() == current.perm()))
        throw validation_error("reconstruct_height: past does not end at the current permutation");
    const BigMatrix A = word_matrix_big(past, m);
    out.wide = !A.is_positive();
    const auto& lam = current.lengths();
    for (int j = 1; j <= m; ++j) {
        // column j of A^t is row j of A; scale by the row maximum to stay in range
        BigInt mx = 0;
        for (int i = 1; i <= m; ++i) mx = std::max(mx, A(j, i));
        std::vector<double> g(m);
        for (int i = 1; i <= m; ++i) g[i - 1] = BigRational(A(j, i), mx).convert_to<double>();
        double dot = 0.0;
        for (int i = 0; i < m; ++i) dot += lam[i] * g[i];
        for (double& x : g) x /= dot;
        out.generators.push_back(std::move(g));
    }
    out.h.assign(m, 0.0);
    for (const auto& g : out.generators)
        for (int i = 0; i < m; ++i) out.h[i] += g[i] / m;
    if (out.wide) {
        out.diameter = std::numeric_limits<double>::infinity();
    } else {
        for (int j = 0; j < m; ++j)
            for (int k = j + 1; k < m; ++k)
                out.diameter = std::max(out.diameter, hilbert_distance(out.generators[j], out.generators[k]));
    }
    return out;
}

/// Angle between two vectors, in radians.
inline double angle_between(const std::vector<double>& u, const std::vector<double>& v) {
    double uv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) uv += u[i] * v[i];
    // atan2 of |u ^ v| and u.v stays accurate for tiny angles
    double wedge = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = i + 1; j < u.size(); ++j) {
            const double c = u[i] * v[j] - u[j] * v[i];
            wedge += c * c;
        }
    return std::atan2(std::sqrt(wedge), uv);
}

}  // namespace iet

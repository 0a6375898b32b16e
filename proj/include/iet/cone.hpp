#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <vector>

#include <boost/math/special_functions/factorials.hpp>

#include "errors.hpp"
#include "matrix.hpp"
#include "permutation.hpp"

namespace iet {

using IntVector = std::vector<BigInt>;

/// Homogeneous constraint coef . x <= 0 (leq) or coef . x >= 0.
struct Inequality {
    IntVector coef;
    bool leq = true;

    /// Sign-normalized form g with the constraint reading g . x >= 0.
    IntVector geq_form() const {
        IntVector g = coef;
        if (leq)
            for (auto& c : g) c = -c;
        return g;
    }
};

/// A polyhedral cone {x : all inequalities} with its extreme rays.
struct ConeDescription {
    int m = 0;
    std::vector<Inequality> inequalities;
    std::vector<IntVector> rays;  // primitive integer generators, lexicographic
};

enum class ConeVariant { full, plus, minus };

inline const char* to_string(ConeVariant v) {
    switch (v) {
        case ConeVariant::plus: return "plus";
        case ConeVariant::minus: return "minus";
        default: return "full";
    }
}

namespace detail {

inline BigInt dot(const IntVector& u, const IntVector& v) {
    BigInt s = 0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

inline IntVector primitive(IntVector v) {
    BigInt g = 0;
    for (const auto& x : v) g = gcd(g, abs(x));
    if (g > 1)
        for (auto& x : v) x /= g;
    return v;
}

/// Rank by fraction-free elimination.
inline int rank(std::vector<IntVector> rows, int m) {
    int r = 0;
    for (int c = 0; c < m && r < static_cast<int>(rows.size()); ++c) {
        int piv = -1;
        for (int i = r; i < static_cast<int>(rows.size()); ++i)
            if (rows[i][c] != 0) { piv = i; break; }
        if (piv < 0) continue;
        std::swap(rows[r], rows[piv]);
        for (int i = r + 1; i < static_cast<int>(rows.size()); ++i) {
            if (rows[i][c] == 0) continue;
            const BigInt f = rows[i][c], p = rows[r][c];
            for (int j = 0; j < m; ++j) rows[i][j] = rows[i][j] * p - rows[r][j] * f;
            rows[i] = primitive(std::move(rows[i]));
        }
        ++r;
    }
    return r;
}

/// Exact inverse of a square integer matrix, scaled to an integer matrix (columns primitive).
inline std::vector<IntVector> inverse_columns(const std::vector<IntVector>& rows, int m) {
    std::vector<std::vector<BigRational>> a(m, std::vector<BigRational>(2 * m));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) a[i][j] = BigRational(rows[i][j]);
        a[i][m + i] = 1;
    }
    for (int k = 0; k < m; ++k) {
        int piv = -1;
        for (int r = k; r < m; ++r)
            if (a[r][k] != 0) { piv = r; break; }
        if (piv < 0) throw validation_error("cone: singular initial system");
        std::swap(a[k], a[piv]);
        const BigRational p = a[k][k];
        for (auto& x : a[k]) x /= p;
        for (int i = 0; i < m; ++i) {
            if (i == k || a[i][k] == 0) continue;
            const BigRational f = a[i][k];
            for (int j = 0; j < 2 * m; ++j) a[i][j] -= f * a[k][j];
        }
    }
    std::vector<IntVector> cols(m, IntVector(m));
    for (int j = 0; j < m; ++j) {
        BigInt l = 1;
        for (int i = 0; i < m; ++i) l = lcm(l, denominator(a[i][m + j]));
        for (int i = 0; i < m; ++i) cols[j][i] = numerator(a[i][m + j]) * (l / denominator(a[i][m + j]));
        cols[j] = primitive(cols[j]);
    }
    return cols;
}

}  // namespace detail

/**
 * Extreme rays of a pointed cone by the double description method, in exact
 * integer arithmetic. Two rays are combined only when they are adjacent
 * (their common tight constraints have rank m - 2).
 */
inline std::vector<IntVector> extreme_rays(const std::vector<Inequality>& ineqs, int m) {
    std::vector<IntVector> G;
    for (const auto& q : ineqs) {
        if (static_cast<int>(q.coef.size()) != m) throw validation_error("cone: coefficient size mismatch");
        G.push_back(q.geq_form());
    }
    // pick m independent rows for the initial simplicial cone
    std::vector<int> basis;
    std::vector<IntVector> chosen;
    for (int i = 0; i < static_cast<int>(G.size()) && static_cast<int>(basis.size()) < m; ++i) {
        chosen.push_back(G[i]);
        if (detail::rank(chosen, m) == static_cast<int>(chosen.size())) basis.push_back(i);
        else chosen.pop_back();
    }
    if (static_cast<int>(basis.size()) < m) throw validation_error("cone: not pointed");
    // {x : G_B x >= 0} is generated by the columns of G_B^{-1}
    std::vector<IntVector> rays = detail::inverse_columns(chosen, m);
    std::vector<int> processed = basis;

    for (int i = 0; i < static_cast<int>(G.size()); ++i) {
        if (std::find(basis.begin(), basis.end(), i) != basis.end()) continue;
        const IntVector& g = G[i];
        std::vector<BigInt> val(rays.size());
        for (std::size_t r = 0; r < rays.size(); ++r) val[r] = detail::dot(g, rays[r]);
        std::vector<IntVector> next;
        for (std::size_t r = 0; r < rays.size(); ++r)
            if (val[r] >= 0) next.push_back(rays[r]);
        for (std::size_t u = 0; u < rays.size(); ++u) {
            if (val[u] <= 0) continue;
            for (std::size_t w = 0; w < rays.size(); ++w) {
                if (val[w] >= 0) continue;
                // adjacency: common tight constraints among those processed
                std::vector<IntVector> tight;
                for (int k : processed)
                    if (detail::dot(G[k], rays[u]) == 0 && detail::dot(G[k], rays[w]) == 0) tight.push_back(G[k]);
                if (static_cast<int>(tight.size()) < m - 2 || detail::rank(tight, m) != m - 2) continue;
                IntVector c(m);
                for (int j = 0; j < m; ++j) c[j] = val[u] * rays[w][j] - val[w] * rays[u][j];
                next.push_back(detail::primitive(std::move(c)));
            }
        }
        std::sort(next.begin(), next.end());
        next.erase(std::unique(next.begin(), next.end()), next.end());
        rays = std::move(next);
        processed.push_back(i);
    }
    std::sort(rays.begin(), rays.end());
    return rays;
}

inline constexpr int max_cone_dimension = 8;

/**
 * K_pi = {partial sums delta_1 + ... + delta_i <= 0 and
 * delta_{pi^{-1} 1} + ... + delta_{pi^{-1} i} >= 0 for i < m};
 * the plus (minus) variant adds sum delta <= 0 (>= 0).
 */
inline ConeDescription cone(const Permutation& pi, ConeVariant variant = ConeVariant::full) {
    require_irreducible(pi);
    const int m = pi.size();
    if (m > max_cone_dimension)
        throw validation_error("cone: exact volumes are limited to m <= " + std::to_string(max_cone_dimension));
    ConeDescription c;
    c.m = m;
    for (int i = 1; i < m; ++i) {
        IntVector u(m, 0), v(m, 0);
        for (int j = 1; j <= i; ++j) {
            u[j - 1] = 1;
            v[pi.inv(j) - 1] = 1;
        }
        c.inequalities.push_back({u, true});
        c.inequalities.push_back({v, false});
    }
    if (variant != ConeVariant::full) c.inequalities.push_back({IntVector(m, 1), variant == ConeVariant::plus});
    c.rays = extreme_rays(c.inequalities, m);
    return c;
}

inline bool satisfies(const ConeDescription& c, const IntVector& x) {
    for (const auto& q : c.inequalities) {
        const BigInt v = detail::dot(q.coef, x);
        if (q.leq ? v > 0 : v < 0) return false;
    }
    return true;
}

/// Simplicial cones given as indices into the ray list.
struct Triangulation {
    std::vector<std::vector<int>> simplices;
    std::vector<BigInt> abs_det;
};

namespace detail {

inline BigInt det_of(const std::vector<IntVector>& cols) {
    const int m = static_cast<int>(cols.size());
    BigMatrix M(m);
    for (int i = 1; i <= m; ++i)
        for (int j = 1; j <= m; ++j) M(i, j) = cols[j - 1][i - 1];
    return M.determinant();
}

inline void fan(const ConeDescription& c, const std::vector<IntVector>& G, const std::vector<int>& face,
                int dim, std::vector<std::vector<int>>& out) {
    if (static_cast<int>(face.size()) == dim) {
        out.push_back(face);
        return;
    }
    const int apex = face.front();  // face indices are sorted, rays lexicographic
    std::vector<std::vector<int>> facets;
    for (const auto& g : G) {
        std::vector<int> sub;
        for (int r : face)
            if (detail::dot(g, c.rays[r]) == 0) sub.push_back(r);
        if (sub.empty() || static_cast<int>(sub.size()) == static_cast<int>(face.size())) continue;
        if (std::find(sub.begin(), sub.end(), apex) != sub.end()) continue;
        std::vector<IntVector> vecs;
        for (int r : sub) vecs.push_back(c.rays[r]);
        if (rank(vecs, c.m) != dim - 1) continue;
        facets.push_back(std::move(sub));
    }
    std::sort(facets.begin(), facets.end());
    facets.erase(std::unique(facets.begin(), facets.end()), facets.end());
    for (const auto& f : facets) {
        std::vector<std::vector<int>> part;
        fan(c, G, f, dim - 1, part);
        for (auto& s : part) {
            s.insert(s.begin(), apex);
            out.push_back(std::move(s));
        }
    }
}

}  // namespace detail

/// Fan triangulation placed at the lexicographically least ray, recursively on facets.
inline Triangulation triangulate(const ConeDescription& c) {
    std::vector<IntVector> G;
    for (const auto& q : c.inequalities) G.push_back(q.geq_form());
    std::vector<int> all(c.rays.size());
    std::iota(all.begin(), all.end(), 0);
    Triangulation t;
    detail::fan(c, G, all, c.m, t.simplices);
    for (auto& s : t.simplices) {
        std::sort(s.begin(), s.end());
        std::vector<IntVector> cols;
        for (int r : s) cols.push_back(c.rays[r]);
        t.abs_det.push_back(abs(detail::det_of(cols)));
    }
    return t;
}

struct SimplexTerm {
    std::vector<int> rays;
    BigInt abs_det;
};

/// Truncated volume vol{x in cone : l(x) <= 1}.
struct VolumeValue {
    double value = 0.0;
    bool infinite = false;
    std::vector<SimplexTerm> decomposition;
};

/// sum over simplices |det(v_1..v_m)| / (m! prod_k l(v_k)).
inline VolumeValue truncated_volume(const ConeDescription& c, const Triangulation& t,
                                    const std::vector<double>& ell) {
    VolumeValue out;
    std::vector<double> lv(c.rays.size());
    for (std::size_t r = 0; r < c.rays.size(); ++r) {
        double s = 0.0;
        for (int i = 0; i < c.m; ++i) s += ell[i] * c.rays[r][i].convert_to<double>();
        lv[r] = s;
    }
    const double mfact = boost::math::factorial<double>(static_cast<unsigned>(c.m));
    for (std::size_t k = 0; k < t.simplices.size(); ++k) {
        double denom = mfact;
        for (int r : t.simplices[k]) {
            if (!(lv[r] > 0.0)) out.infinite = true;
            denom *= lv[r];
        }
        if (!out.infinite) out.value += t.abs_det[k].convert_to<double>() / denom;
        out.decomposition.push_back({t.simplices[k], t.abs_det[k]});
    }
    if (out.infinite) out.value = std::numeric_limits<double>::infinity();
    return out;
}

inline VolumeValue truncated_volume(const ConeDescription& c, const std::vector<double>& ell) {
    return truncated_volume(c, triangulate(c), ell);
}

/// Exact variant for a rational functional; throws if l vanishes on a ray.
inline BigRational truncated_volume_exact(const ConeDescription& c, const Triangulation& t,
                                          const std::vector<BigRational>& ell) {
    BigRational total = 0;
    BigInt mfact = 1;
    for (int k = 2; k <= c.m; ++k) mfact *= k;
    for (std::size_t k = 0; k < t.simplices.size(); ++k) {
        BigRational denom = BigRational(mfact);
        for (int r : t.simplices[k]) {
            BigRational l = 0;
            for (int i = 0; i < c.m; ++i) l += ell[i] * BigRational(c.rays[r][i]);
            if (l <= 0) throw boundary_error("truncated volume: functional not positive on a ray");
            denom *= l;
        }
        total += BigRational(t.abs_det[k]) / denom;
    }
    return total;
}

/// Cone and triangulation for (pi, variant), computed once per process.
struct ConeData {
    ConeDescription cone;
    Triangulation triangulation;
};

inline std::shared_ptr<const ConeData> cached_cone(const Permutation& pi, ConeVariant v) {
    static std::mutex mu;
    static std::map<std::pair<Permutation, int>, std::shared_ptr<const ConeData>> cache;
    const auto key = std::make_pair(pi, static_cast<int>(v));
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    auto data = std::make_shared<ConeData>();
    data->cone = cone(pi, v);
    data->triangulation = triangulate(data->cone);
    std::lock_guard<std::mutex> lock(mu);
    return cache.emplace(key, std::move(data)).first->second;
}

}  // namespace iet

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "permutation.hpp"

namespace iet {

/// Strictly positive length vector lambda in R^m_+.
class LengthVector {
public:
    LengthVector() = default;

    explicit LengthVector(std::vector<double> entries) : entries_(std::move(entries)) {
        if (entries_.empty()) throw validation_error("length vector: empty");
        for (double v : entries_)
            if (!(v > 0.0) || !std::isfinite(v))
                throw validation_error("length vector: entries must be finite and > 0");
    }

    int size() const { return static_cast<int>(entries_.size()); }
    /// lambda_i, 1-based.
    double operator()(int i) const { return entries_[i - 1]; }
    double operator[](std::size_t k) const { return entries_[k]; }

    double total() const { return std::accumulate(entries_.begin(), entries_.end(), 0.0); }
    double min() const { return *std::min_element(entries_.begin(), entries_.end()); }

    LengthVector normalized() const {
        const double t = total();
        std::vector<double> out(entries_);
        for (double& v : out) v /= t;
        return LengthVector(std::move(out));
    }

    const std::vector<double>& values() const { return entries_; }
    std::span<const double> span() const { return entries_; }

    friend bool operator==(const LengthVector&, const LengthVector&) = default;

private:
    std::vector<double> entries_;
};

/**
 * An interval exchange transformation (lambda, pi) on [0, |lambda|).
 *
 * Break points: beta_i = sum_{j<i} lambda_j and beta^pi_i = sum_{j<i} lambda_{pi^{-1} j};
 * the subinterval I_i = [beta_i, beta_{i+1}) is translated onto I^pi_{pi(i)}.
 */
class IETState {
public:
    IETState(LengthVector lengths, Permutation perm)
        : lengths_(std::move(lengths)), perm_(std::move(perm)) {
        if (lengths_.size() != perm_.size())
            throw validation_error("iet: length vector and permutation sizes differ");
        if (!perm_.is_irreducible())
            throw validation_error("iet: permutation " + perm_.to_string() + " is reducible");
        const int m = perm_.size();
        beta_.assign(m + 1, 0.0);
        beta_pi_.assign(m + 1, 0.0);
        for (int i = 1; i <= m; ++i) {
            beta_[i] = beta_[i - 1] + lengths_(i);
            beta_pi_[i] = beta_pi_[i - 1] + lengths_(perm_.inv(i));
        }
    }

    int size() const { return perm_.size(); }
    const LengthVector& lengths() const { return lengths_; }
    const Permutation& perm() const { return perm_; }
    double total() const { return beta_.back(); }

    /// beta_i for i = 1..m+1 (beta_{m+1} = |lambda|).
    double beta(int i) const { return beta_[i - 1]; }
    double beta_pi(int i) const { return beta_pi_[i - 1]; }

    /// Index i with x in I_i; half-open cells, no snapping at break points.
    int cell(double x) const {
        auto it = std::upper_bound(beta_.begin(), beta_.end(), x);
        return static_cast<int>(it - beta_.begin());
    }

    double evaluate(double x) const {
        if (!(x >= 0.0 && x < total()))
            throw validation_error("iet: point outside [0, |lambda|)");
        const int i = cell(x);
        return x + beta_pi(perm_(i)) - beta(i);
    }

    /// Constant increment of the map on I_i.
    double translation(int i) const { return beta_pi(perm_(i)) - beta(i); }

private:
    LengthVector lengths_;
    Permutation perm_;
    std::vector<double> beta_;
    std::vector<double> beta_pi_;
};

inline IETState new_iet(LengthVector lengths, Permutation perm) {
    return IETState(std::move(lengths), std::move(perm));
}

inline double evaluate(const IETState& t, double x) { return t.evaluate(x); }

/// (x, Tx, ..., T^{n-1} x).
inline std::vector<double> orbit(const IETState& t, double x, std::size_t n) {
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        out.push_back(x);
        if (k + 1 < n) x = t.evaluate(x);
    }
    return out;
}

inline bool is_irreducible(const Permutation& p) { return p.is_irreducible(); }

struct KeaneReport {
    double max_gap = 0.0;
    bool eps_dense = false;
};

/**
 * Largest gap between consecutive orbit points of 0 on the circle [0, |lambda|),
 * wrap-around gap included; with a single point the gap is |lambda|.
 */
inline KeaneReport keane_density_report(const IETState& t, std::size_t n, double eps) {
    KeaneReport rep;
    if (n == 0) {
        rep.max_gap = t.total();
        rep.eps_dense = rep.max_gap < eps;
        return rep;
    }
    auto pts = orbit(t, 0.0, n);
    std::sort(pts.begin(), pts.end());
    double gap = pts.front() + t.total() - pts.back();
    for (std::size_t k = 1; k < pts.size(); ++k) gap = std::max(gap, pts[k] - pts[k - 1]);
    rep.max_gap = gap;
    rep.eps_dense = gap < eps;
    return rep;
}

}  // namespace iet

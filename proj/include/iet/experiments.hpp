#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "density.hpp"
#include "errors.hpp"
#include "induction.hpp"
#include "projective.hpp"
#include "random.hpp"
#include "rauzy.hpp"
#include "zippered.hpp"

namespace iet {

// ---------------------------------------------------------------------------
// Observables

/**
 * A test function. on_state acts on normalized IET states; on_zr on zippered
 * rectangles anywhere along a flow line. fiber_integral, when present, gives
 * int_{s0}^{s1} phi(P^s z) ds in closed form for a section point z.
 */
struct Observable {
    std::string name;
    std::function<double(const IETState&)> on_state;
    std::function<double(const ZipperedRectangle&)> on_zr;
    std::function<double(const ZipperedRectangle&, double, double)> fiber_integral;
    double holder_alpha = 1.0;
    double holder_constant = std::numeric_limits<double>::quiet_NaN();  // NaN until estimated
};

namespace observables {

/// lambda_i / |lambda|; Lipschitz for the Hilbert metric with constant <= 1.
inline Observable coordinate(int i) {
    Observable o;
    o.name = "lambda_" + std::to_string(i);
    o.on_state = [i](const IETState& s) { return s.lengths()(i) / s.total(); };
    o.on_zr = [i](const ZipperedRectangle& z) { return z.lambda[i - 1] / total_length(z); };
    // projective, hence constant along P^s
    o.fiber_integral = [i](const ZipperedRectangle& z, double s0, double s1) {
        return (s1 - s0) * z.lambda[i - 1] / total_length(z);
    };
    o.holder_constant = 1.0;
    return o;
}

/// log(lambda_1 / |lambda|); Lipschitz with constant 1 but unbounded near the boundary.
inline Observable log_coordinate(int i) {
    Observable o;
    o.name = "log_lambda_" + std::to_string(i);
    o.on_state = [i](const IETState& s) { return std::log(s.lengths()(i) / s.total()); };
    o.on_zr = [i](const ZipperedRectangle& z) { return std::log(z.lambda[i - 1] / total_length(z)); };
    o.fiber_integral = [i](const ZipperedRectangle& z, double s0, double s1) {
        return (s1 - s0) * std::log(z.lambda[i - 1] / total_length(z));
    };
    o.holder_constant = 1.0;
    return o;
}

/// Hat function max(0, 1 - d(x, centre)/radius) around a point of a cylinder; Lipschitz 1/radius.
inline Observable bump(const IETState& centre, double radius) {
    if (!(radius > 0.0)) throw validation_error("bump: radius must be positive");
    Observable o;
    o.name = "bump";
    auto value = [centre, radius](std::span<const double> lam, const Permutation& pi) {
        if (!(pi == centre.perm())) return 0.0;
        return std::max(0.0, 1.0 - hilbert_distance(lam, centre.lengths().span()) / radius);
    };
    o.on_state = [value](const IETState& s) { return value(s.lengths().span(), s.perm()); };
    o.on_zr = [value](const ZipperedRectangle& z) { return value(z.lambda, z.perm); };
    o.fiber_integral = [value](const ZipperedRectangle& z, double s0, double s1) {
        return (s1 - s0) * value(z.lambda, z.perm);
    };
    o.holder_constant = 1.0 / radius;
    return o;
}

/// Unnormalized lambda_i; grows like e^s along the flow.
inline Observable raw_length(int i) {
    Observable o;
    o.name = "raw_lambda_" + std::to_string(i);
    o.on_zr = [i](const ZipperedRectangle& z) { return z.lambda[i - 1]; };
    o.fiber_integral = [i](const ZipperedRectangle& z, double s0, double s1) {
        return z.lambda[i - 1] * (std::exp(s1) - std::exp(s0));
    };
    return o;
}

/// Height h_i; evaluated pointwise only, so flow integrals use Simpson's rule.
inline Observable height(int i) {
    Observable o;
    o.name = "h_" + std::to_string(i);
    o.on_zr = [i](const ZipperedRectangle& z) { return z.h[i - 1]; };
    return o;
}

inline Observable zero() {
    Observable o;
    o.name = "zero";
    o.on_state = [](const IETState&) { return 0.0; };
    o.on_zr = [](const ZipperedRectangle&) { return 0.0; };
    o.fiber_integral = [](const ZipperedRectangle&, double, double) { return 0.0; };
    o.holder_constant = 0.0;
    return o;
}

inline Observable by_name(const std::string& name) {
    auto index = [&](const std::string& prefix) {
        const std::string rest = name.substr(prefix.size());
        if (rest.empty() || rest.find_first_not_of("0123456789") != std::string::npos)
            throw validation_error("unknown observable '" + name + "'");
        return std::stoi(rest);
    };
    if (name == "zero") return zero();
    if (name.rfind("log_lambda_", 0) == 0) return log_coordinate(index("log_lambda_"));
    if (name.rfind("raw_lambda_", 0) == 0) return raw_length(index("raw_lambda_"));
    if (name.rfind("lambda_", 0) == 0) return coordinate(index("lambda_"));
    if (name.rfind("h_", 0) == 0) return height(index("h_"));
    throw validation_error("unknown observable '" + name + "'");
}

}  // namespace observables

/**
 * Largest |phi(x) - phi(y)| / d(x, y)^alpha over random pairs on one simplex
 * at Hilbert distance <= 1.
 */
inline double estimate_holder_constant(const Observable& o, const Permutation& pi, int pairs, RngStream& rng) {
    if (!o.on_state) throw validation_error("estimate_holder_constant: observable has no state evaluator");
    const int m = pi.size();
    double best = 0.0;
    for (int k = 0; k < pairs; ++k) {
        const auto x = rng.simplex_point(m);
        std::vector<double> y(m);
        const double spread = rng.uniform_pos() / 2.0;
        for (int i = 0; i < m; ++i) y[i] = x[i] * std::exp(spread * (rng.uniform() - 0.5));
        const double d = hilbert_distance(x, y);
        if (!(d > 0.0) || d > 1.0) continue;
        const IETState sx(LengthVector(x), pi), sy(LengthVector(y), pi);
        best = std::max(best, std::abs(o.on_state(sx) - o.on_state(sy)) / std::pow(d, o.holder_alpha));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Run plumbing

/// A finished experiment: everything needed to reproduce and plot it.
struct RunResult {
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> series;
    double wall_seconds = 0.0;
    std::string rng_algorithm = iet::rng_algorithm;
    int rng_version = iet::rng_version;
};

/// Runs fn(0..count-1) on at most `threads` workers (0 = hardware concurrency).
template <class Fn>
void parallel_replicas(int count, int threads, Fn&& fn) {
    int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (int r = 0; r < count; ++r) fn(r);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int r; (r = next++) < count;) {
                try {
                    fn(r);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Common knobs of the Monte Carlo runs. Replica r draws from stream r.
struct ChainOptions {
    std::uint64_t seed = 0;
    std::int64_t burn_in = 10000;
    int replicas = 32;
    int threads = 0;
};

/**
 * A G-orbit held in flat arrays. Starts Lebesgue-random on the simplex of the
 * root permutation, burns in, and restarts the same way after a boundary hit.
 */
class ZorichChain {
public:
    ZorichChain(const Permutation& root, RngStream& rng, std::int64_t burn_in)
        : root_(root), rng_(&rng), burn_in_(burn_in), m_(root.size()), lam_(m_), img_(m_) {
        require_irreducible(root);
        restart();
    }

    int size() const { return m_; }
    const double* lengths() const { return lam_.data(); }
    const int* image() const { return img_.data(); }
    Sign sign() const { return sign_of(std::span<const double>(lam_), Permutation(img_)); }
    bool plus() const { return lam_[index_of_m() - 1] > lam_[m_ - 1]; }
    std::int64_t restarts() const { return restarts_; }
    /// |lambda| before normalizing in the last step.
    double last_scale() const { return last_scale_; }

    IETState state() const { return IETState(LengthVector(lam_), Permutation(img_)); }

    /// One normalized G step. A boundary hit restarts the chain; the result then has n = 0.
    detail::RunResult step() {
        try {
            const auto run = detail::zorich_run_inplace(lam_.data(), img_.data(), m_);
            double t = 0.0;
            for (double x : lam_) t += x;
            for (double& x : lam_) x /= t;
            last_scale_ = t;
            if (!(t > 0.0) || !std::isfinite(t)) throw boundary_error("degenerate lengths");
            return run;
        } catch (const boundary_error&) {
            ++restarts_;
            restart();
            return {Op::a, 0};
        }
    }

    /// Steps until the chain sits in the plus set (at most one step off boundary).
    void align_plus() {
        while (!plus()) step();
    }

private:
    int index_of_m() const { return detail::index_of_value(img_.data(), m_, m_); }

    void restart() {
        while (true) {
            const auto x = rng_->simplex_point(m_);
            std::copy(x.begin(), x.end(), lam_.begin());
            const auto& im = root_.image();
            std::copy(im.begin(), im.end(), img_.begin());
            try {
                for (std::int64_t k = 0; k < burn_in_; ++k) {
                    detail::zorich_run_inplace(lam_.data(), img_.data(), m_);
                    double t = 0.0;
                    for (double v : lam_) t += v;
                    for (double& v : lam_) v /= t;
                }
                return;
            } catch (const boundary_error&) {
                ++restarts_;
            }
        }
    }

    Permutation root_;
    RngStream* rng_;
    std::int64_t burn_in_;
    int m_;
    std::vector<double> lam_;
    std::vector<int> img_;
    double last_scale_ = 1.0;
    std::int64_t restarts_ = 0;
};

/// Least squares y = slope x + intercept with coefficient of determination.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw validation_error("linear_fit: need at least two points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sx += x[i], sy += y[i];
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

namespace detail {

inline std::uint64_t perm_code(const int* img, int m) {
    std::uint64_t c = 0;
    for (int j = 0; j < m; ++j) c = c * 16 + static_cast<std::uint64_t>(img[j]);
    return c;
}

inline std::int64_t per_replica(std::int64_t total, int replicas, int r) {
    return total / replicas + (r < total % replicas ? 1 : 0);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Invariant histogram

struct Histogram {
    std::vector<double> edges;      // bins + 1 edges on [0, 1]
    std::vector<double> empirical;  // mass per bin, sums to 1
    std::vector<double> exact;      // normalized density mass per bin
    double sup_relative_deviation = 0.0;
    std::string reference;          // "quadrature" (m = 2) or "monte-carlo"
    std::int64_t samples = 0;
    std::int64_t restarts = 0;
};

namespace detail {

/// Mass of each bin of the lambda_1 marginal of rho, m = 2, by adaptive Gauss-Kronrod.
inline std::vector<double> exact_marginal_two(const Permutation& pi, const std::vector<double>& edges) {
    auto rho = [&](double x) {
        const std::vector<double> lam{x, 1.0 - x};
        return density(lam, pi);
    };
    std::vector<double> mass;
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
        double lo = edges[b], hi = edges[b + 1], s = 0.0;
        // the density jumps across the boundary lambda_1 = lambda_2
        std::vector<double> cuts{lo};
        if (lo < 0.5 && hi > 0.5) cuts.push_back(0.5);
        cuts.push_back(hi);
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
            s += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(rho, cuts[k], cuts[k + 1], 15, 1e-13);
        mass.push_back(s);
    }
    return mass;
}

/**
 * Same marginal for m >= 3 by weighting Lebesgue-uniform points of every
 * simplex of the class with rho (one constant for the whole class).
 */
inline std::vector<double> sampled_marginal(const Permutation& root, const std::vector<double>& edges,
                                            std::int64_t samples, RngStream& rng) {
    const auto cls = rauzy_class(root);
    std::vector<double> mass(edges.size() - 1, 0.0);
    const int bins = static_cast<int>(mass.size());
    const int m = root.size();
    for (std::int64_t k = 0; k < samples; ++k) {
        const auto& pi = cls[rng.below(cls.size())];
        const auto lam = rng.simplex_point(m);
        if (sign_of(lam, pi) == Sign::boundary) continue;
        const int b = std::min(bins - 1, static_cast<int>(lam[0] * bins));
        mass[b] += density(lam, pi);
    }
    return mass;
}

}  // namespace detail

/**
 * Marginal of lambda_1 along G-orbits against the normalized density profile
 * on the same bins. opts.replicas chains share the N samples.
 */
inline Histogram sample_invariant(const Permutation& root, std::int64_t N, int bins, const ChainOptions& opts) {
    if (bins < 1) throw validation_error("sample_invariant: bins must be >= 1");
    if (N < 1) throw validation_error("sample_invariant: N must be >= 1");
    Histogram h;
    for (int b = 0; b <= bins; ++b) h.edges.push_back(static_cast<double>(b) / bins);
    std::vector<std::vector<std::int64_t>> counts(opts.replicas, std::vector<std::int64_t>(bins, 0));
    std::vector<std::int64_t> restarts(opts.replicas, 0);
    parallel_replicas(opts.replicas, opts.threads, [&](int r) {
        auto rng = rng_stream(opts.seed, static_cast<std::uint64_t>(r));
        ZorichChain chain(root, rng, opts.burn_in);
        const std::int64_t n = detail::per_replica(N, opts.replicas, r);
        for (std::int64_t k = 0; k < n; ++k) {
            chain.step();
            const int b = std::min(bins - 1, static_cast<int>(chain.lengths()[0] * bins));
            ++counts[r][b];
        }
        restarts[r] = chain.restarts();
    });
    std::vector<double> total(bins, 0.0);
    for (int r = 0; r < opts.replicas; ++r) {
        for (int b = 0; b < bins; ++b) total[b] += static_cast<double>(counts[r][b]);
        h.restarts += restarts[r];
    }
    h.samples = N;
    for (double c : total) h.empirical.push_back(c / static_cast<double>(N));
    if (root.size() == 2) {
        h.exact = detail::exact_marginal_two(root, h.edges);
        h.reference = "quadrature";
    } else {
        auto rng = rng_stream(opts.seed, static_cast<std::uint64_t>(opts.replicas));
        h.exact = detail::sampled_marginal(root, h.edges, N, rng);
        h.reference = "monte-carlo";
    }
    double z = 0.0;
    for (double x : h.exact) z += x;
    for (double& x : h.exact) x /= z;
    for (int b = 0; b < bins; ++b)
        if (h.exact[b] > 0.0)
            h.sup_relative_deviation = std::max(h.sup_relative_deviation, std::abs(h.empirical[b] - h.exact[b]) / h.exact[b]);
    return h;
}

// ---------------------------------------------------------------------------
// Correlation decay under G^2 on the plus set

struct CorrelationSeries {
    std::vector<double> covariance;   // n -> mean over replicas
    std::vector<double> cov_stderr;
    std::vector<double> correlation;  // covariance / sqrt(var phi var psi), per replica then averaged
    std::vector<double> corr_stderr;
    std::int64_t restarts = 0;
};

/**
 * n -> int phi . psi o G^{2n} - int phi int psi, from time averages along
 * opts.replicas independent orbits of G^2 started in the plus set; the
 * standard error is the spread across replicas over sqrt(replicas).
 */
inline CorrelationSeries correlation_decay(const Observable& phi, const Observable& psi, const Permutation& root,
                                           int n_max, std::int64_t N, const ChainOptions& opts) {
    if (!phi.on_state || !psi.on_state) throw validation_error("correlation_decay: observables need a state evaluator");
    if (n_max < 0) throw validation_error("correlation_decay: n_max must be >= 0");
    const int R = opts.replicas;
    std::vector<std::vector<double>> cov(R), corr(R);
    std::vector<std::int64_t> restarts(R, 0);
    parallel_replicas(R, opts.threads, [&](int r) {
        auto rng = rng_stream(opts.seed, static_cast<std::uint64_t>(r));
        ZorichChain chain(root, rng, opts.burn_in);
        const std::int64_t L = detail::per_replica(N, R, r);
        if (L <= n_max + 1) throw validation_error("correlation_decay: N too small for n_max and replicas");
        std::vector<double> f(L), g(L);
        chain.align_plus();
        for (std::int64_t k = 0; k < L; ++k) {
            const auto s = chain.state();
            f[k] = phi.on_state(s);
            g[k] = psi.on_state(s);
            chain.step();
            chain.step();
            chain.align_plus();
        }
        double mf = 0, mg = 0;
        for (std::int64_t k = 0; k < L; ++k) mf += f[k], mg += g[k];
        mf /= L, mg /= L;
        double vf = 0, vg = 0;
        for (std::int64_t k = 0; k < L; ++k) vf += (f[k] - mf) * (f[k] - mf), vg += (g[k] - mg) * (g[k] - mg);
        vf /= L, vg /= L;
        for (int n = 0; n <= n_max; ++n) {
            double s = 0.0;
            for (std::int64_t k = 0; k + n < L; ++k) s += (f[k] - mf) * (g[k + n] - mg);
            const double c = s / static_cast<double>(L - n);
            cov[r].push_back(c);
            corr[r].push_back(vf > 0 && vg > 0 ? c / std::sqrt(vf * vg) : 0.0);
        }
        restarts[r] = chain.restarts();
    });
    CorrelationSeries out;
    for (int r = 0; r < R; ++r) out.restarts += restarts[r];
    auto summarize = [&](const std::vector<std::vector<double>>& v, std::vector<double>& mean, std::vector<double>& se) {
        for (int n = 0; n <= n_max; ++n) {
            double s = 0, ss = 0;
            for (int r = 0; r < R; ++r) s += v[r][n];
            const double mu = s / R;
            for (int r = 0; r < R; ++r) ss += (v[r][n] - mu) * (v[r][n] - mu);
            mean.push_back(mu);
            se.push_back(R > 1 ? std::sqrt(ss / (R - 1) / R) : std::numeric_limits<double>::infinity());
        }
    };
    summarize(cov, out.covariance, out.cov_stderr);
    summarize(corr, out.correlation, out.corr_stderr);
    return out;
}

/// First n0 with |corr(n)| <= k stderr(n) for every n >= n0; size() if none.
inline std::size_t dominated_from(const CorrelationSeries& c, double k = 3.0) {
    std::size_t n0 = c.correlation.size();
    for (std::size_t n = c.correlation.size(); n-- > 0;) {
        if (std::abs(c.correlation[n]) > k * c.corr_stderr[n]) break;
        n0 = n;
    }
    return n0;
}

// ---------------------------------------------------------------------------
// Return times of G^2 to a cylinder

struct ReturnTimes {
    std::vector<double> survival;  // n -> P(no visit of G^{2k} to Delta(q) for k <= n)
    double cylinder_mass = 0.0;    // 1 - survival[0]
    double tau_mean = 0.0;         // mean flow time log|Lambda(-n_q)| spent before the first visit
    double tau_exp_moment = 0.0;   // mean exp(eps tau)
    double eps = 0.0;
    std::int64_t starts = 0;
    std::int64_t restarts = 0;
};

/**
 * Survival of the first visit time of G^{2k} to Delta(q) from plus-set points
 * of stationary orbits, with the flow time (sum of -log of the G scale
 * factors) accumulated before the visit. The orbit runs n_max + 1 positions
 * past the last start so every start is classified.
 */
inline ReturnTimes return_time_tail(const Word& q, const Permutation& root, int n_max, std::int64_t N, double eps,
                                    const ChainOptions& opts) {
    if (q.empty()) throw validation_error("return_time_tail: empty word");
    require_admissible(q);
    {
        const auto A = word_matrix_big(q);
        for (int i = 1; i <= A.size(); ++i)
            for (int j = 1; j <= A.size(); ++j)
                if (A(i, j) <= 0) throw validation_error("return_time_tail: A(q) is not positive");
    }
    if (q.front().op != Op::a) throw validation_error("return_time_tail: Delta(q) must lie in the plus set");
    const int m = root.size();
    const std::size_t l = q.size();
    struct Code {
        Op op;
        std::int64_t n;
        std::uint64_t perm;
        bool operator==(const Code&) const = default;
    };
    std::vector<Code> qc;
    for (const auto& letter : q) qc.push_back({letter.op, letter.n, detail::perm_code(letter.perm.image().data(), m)});

    const int R = opts.replicas;
    std::vector<std::vector<std::int64_t>> hist(R, std::vector<std::int64_t>(n_max + 2, 0));
    std::vector<double> tau_sum(R, 0.0), exp_sum(R, 0.0);
    std::vector<std::int64_t> starts(R, 0), restarts(R, 0);
    parallel_replicas(R, opts.threads, [&](int r) {
        auto rng = rng_stream(opts.seed, static_cast<std::uint64_t>(r));
        ZorichChain chain(root, rng, opts.burn_in);
        const std::int64_t S = detail::per_replica(N, R, r);
        // G^2 positions 0..P-1; each needs l letters of look-ahead
        const std::int64_t P = S + n_max + 1;
        std::vector<std::uint8_t> hit(P, 0);
        std::vector<double> flow(P + 1, 0.0);  // flow time from position 0 to position j
        chain.align_plus();
        std::vector<Code> letters;
        std::vector<double> logs;
        const std::size_t need = static_cast<std::size_t>(2 * P) + l;
        letters.reserve(need);
        logs.reserve(need);
        std::int64_t restarts_seen = 0;
        while (letters.size() < need) {
            const auto img = chain.image();
            Code c{Op::a, 0, detail::perm_code(img, m)};
            const auto run = chain.step();
            if (chain.restarts() != restarts_seen) {
                // a restart breaks the orbit: start over
                restarts_seen = chain.restarts();
                letters.clear();
                logs.clear();
                chain.align_plus();
                continue;
            }
            c.op = run.op;
            c.n = run.n;
            letters.push_back(c);
            logs.push_back(std::log(chain.last_scale()));
        }
        for (std::int64_t j = 0; j < P; ++j) {
            bool match = true;
            for (std::size_t t = 0; t < l && match; ++t) match = letters[2 * j + t] == qc[t];
            hit[j] = match;
            flow[j + 1] = flow[j] - logs[2 * j] - logs[2 * j + 1];
        }
        // distance to the next visit, capped at n_max + 1
        std::vector<int> next(P);
        next[P - 1] = hit[P - 1] ? 0 : n_max + 1;
        for (std::int64_t j = P - 2; j >= 0; --j) next[j] = hit[j] ? 0 : std::min(n_max + 1, next[j + 1] + 1);
        for (std::int64_t j = 0; j < S; ++j) {
            ++hist[r][next[j]];
            if (next[j] <= n_max) {
                const double tau = flow[j + next[j]] - flow[j];
                tau_sum[r] += tau;
                exp_sum[r] += std::exp(eps * tau);
            }
        }
        starts[r] = S;
        restarts[r] = chain.restarts();
    });
    ReturnTimes out;
    out.eps = eps;
    std::vector<double> h(n_max + 2, 0.0);
    std::int64_t visits = 0;
    double ts = 0, es = 0;
    for (int r = 0; r < R; ++r) {
        for (int d = 0; d <= n_max + 1; ++d) h[d] += static_cast<double>(hist[r][d]);
        out.starts += starts[r];
        out.restarts += restarts[r];
        ts += tau_sum[r];
        es += exp_sum[r];
    }
    for (int d = 0; d <= n_max; ++d) visits += static_cast<std::int64_t>(h[d]);
    double alive = static_cast<double>(out.starts);
    for (int n = 0; n <= n_max; ++n) {
        alive -= h[n];
        out.survival.push_back(alive / static_cast<double>(out.starts));
    }
    out.cylinder_mass = 1.0 - out.survival[0];
    out.tau_mean = visits ? ts / static_cast<double>(visits) : 0.0;
    out.tau_exp_moment = visits ? es / static_cast<double>(visits) : 0.0;
    return out;
}

/// Fit of -log P(n) against sqrt(n) over n in [lo, hi] with P(n) > 0.
inline LinearFit stretched_exponential_fit(const std::vector<double>& survival, int lo, int hi) {
    std::vector<double> x, y;
    for (int n = lo; n <= hi && n < static_cast<int>(survival.size()); ++n)
        if (survival[n] > 0.0) {
            x.push_back(std::sqrt(static_cast<double>(n)));
            y.push_back(-std::log(survival[n]));
        }
    return linear_fit(x, y);
}

// ---------------------------------------------------------------------------
// Mass of thin simplices

struct ThinMass {
    std::vector<double> eps;
    std::vector<double> mass;  // empirical nu(min_i lambda_i < eps)
    LinearFit loglog;          // log mass against log eps
    std::int64_t restarts = 0;
};

inline ThinMass delta_eps_mass(const Permutation& root, const std::vector<double>& eps, std::int64_t N,
                               const ChainOptions& opts) {
    if (eps.size() < 2) throw validation_error("delta_eps_mass: need at least two eps values");
    for (double e : eps)
        if (!(e > 0.0 && e < 1.0)) throw validation_error("delta_eps_mass: eps must lie in (0, 1)");
    const int R = opts.replicas;
    std::vector<std::vector<std::int64_t>> below(R, std::vector<std::int64_t>(eps.size(), 0));
    std::vector<std::int64_t> restarts(R, 0);
    parallel_replicas(R, opts.threads, [&](int r) {
        auto rng = rng_stream(opts.seed, static_cast<std::uint64_t>(r));
        ZorichChain chain(root, rng, opts.burn_in);
        const std::int64_t n = detail::per_replica(N, R, r);
        const int m = chain.size();
        for (std::int64_t k = 0; k < n; ++k) {
            chain.step();
            const double* lam = chain.lengths();
            const double lo = *std::min_element(lam, lam + m);
            for (std::size_t e = 0; e < eps.size(); ++e) below[r][e] += lo < eps[e];
        }
        restarts[r] = chain.restarts();
    });
    ThinMass out;
    out.eps = eps;
    std::vector<double> lx, ly;
    for (std::size_t e = 0; e < eps.size(); ++e) {
        std::int64_t c = 0;
        for (int r = 0; r < R; ++r) c += below[r][e];
        out.mass.push_back(static_cast<double>(c) / static_cast<double>(N));
        if (c > 0) {
            lx.push_back(std::log(eps[e]));
            ly.push_back(std::log(out.mass.back()));
        }
    }
    for (int r = 0; r < R; ++r) out.restarts += restarts[r];
    if (lx.size() >= 2) out.loglog = linear_fit(lx, ly);
    return out;
}

// ---------------------------------------------------------------------------
// Good words

/**
 * Anchor q with positive A(q), prefix length k, exponent theta and block
 * length r. r = 0 selects r = 2(K + 1)k + 2M with M the connecting diameter
 * of the Rauzy class of q.
 */
struct GoodWordParams {
    Word q;
    int k = 0;
    double theta = 0.5;
    int r = 0;
    int K = 1;

    int block_length() const {
        if (r > 0) return r;
        const int M = connecting_diameter(rauzy_class(q.front().perm));
        return 2 * (K + 1) * k + 2 * M;
    }
};

inline void check(const GoodWordParams& p) {
    if (p.q.empty()) throw validation_error("good words: empty anchor");
    require_admissible(p.q);
    const auto A = word_matrix_big(p.q);
    for (int i = 1; i <= A.size(); ++i)
        for (int j = 1; j <= A.size(); ++j)
            if (A(i, j) <= 0) throw validation_error("good words: A(q) is not positive");
    if (p.k < 1) throw validation_error("good words: k must be >= 1");
    if (!(p.theta > 0.0 && p.theta < 1.0)) throw validation_error("good words: theta must lie in (0, 1)");
    if (p.r != 0 && p.r < p.k) throw validation_error("good words: block length r must be >= k");
}

/// Disjoint occurrences of q in w, counted greedily from the left.
inline int disjoint_occurrences(const Word& w, const Word& q) {
    int count = 0;
    for (std::size_t i = 0; i + q.size() <= w.size();) {
        if (std::equal(q.begin(), q.end(), w.begin() + static_cast<std::ptrdiff_t>(i))) {
            ++count;
            i += q.size();
        } else {
            ++i;
        }
    }
    return count;
}

struct GoodWordReport {
    bool good = true;
    int block_length = 0;
    int blocks_checked = 0;
    int failed_block = -1;         // first failing block start / r, -1 if none
    double min_coordinate = 1.0;   // over the checked k-prefixes
    int min_occurrences = std::numeric_limits<int>::max();
    double required_occurrences = 0.0;  // k^theta / |q|
    std::string reason;
};

/// The two conditions on a single word of length k.
inline GoodWordReport classify_prefix(const Word& w, const GoodWordParams& p) {
    GoodWordReport rep;
    rep.block_length = p.block_length();
    rep.required_occurrences = std::pow(static_cast<double>(p.k), p.theta) / static_cast<double>(p.q.size());
    if (static_cast<int>(w.size()) != p.k) throw validation_error("good words: prefix must have length k");
    rep.blocks_checked = 1;
    rep.min_coordinate = min_coordinate(cylinder(w));
    rep.min_occurrences = disjoint_occurrences(w, p.q);
    if (!(rep.min_coordinate >= std::exp(-static_cast<double>(p.k)))) {
        rep.good = false;
        rep.reason = "cylinder leaves Delta_exp(-k)";
    } else if (rep.min_occurrences < rep.required_occurrences) {
        rep.good = false;
        rep.reason = "too few occurrences of q";
    }
    if (!rep.good) rep.failed_block = 0;
    return rep;
}

/**
 * Block rule for |w| = N r + L: the k-prefix of every full block is good, and
 * the k-prefix of the tail is good when L >= k.
 */
inline GoodWordReport classify_good(const Word& w, const GoodWordParams& p) {
    check(p);
    require_admissible(w);
    GoodWordReport rep;
    rep.block_length = p.block_length();
    rep.required_occurrences = std::pow(static_cast<double>(p.k), p.theta) / static_cast<double>(p.q.size());
    const int r = rep.block_length;
    const int n = static_cast<int>(w.size());
    for (int start = 0; start < n; start += r) {
        const int len = std::min(r, n - start);
        if (len < p.k) break;
        const Word prefix(w.begin() + start, w.begin() + start + p.k);
        const auto b = classify_prefix(prefix, p);
        ++rep.blocks_checked;
        rep.min_coordinate = std::min(rep.min_coordinate, b.min_coordinate);
        rep.min_occurrences = std::min(rep.min_occurrences, b.min_occurrences);
        if (!b.good && rep.good) {
            rep.good = false;
            rep.failed_block = start / r;
            rep.reason = b.reason;
        }
    }
    if (rep.blocks_checked == 0) rep.min_occurrences = 0;
    return rep;
}

struct BadWordMass {
    int block_length = 0;
    double bad_fraction = 0.0;
    double stderr_ = 0.0;
    std::int64_t samples = 0;
};

/// Empirical nu-mass of bad words of length `length` read off stationary orbits from plus-set points.
inline BadWordMass bad_word_mass(const GoodWordParams& p, const Permutation& root, int length, std::int64_t N,
                                 const ChainOptions& opts) {
    check(p);
    if (length < 1) throw validation_error("bad_word_mass: length must be >= 1");
    const int R = opts.replicas;
    std::vector<std::int64_t> bad(R, 0), seen(R, 0);
    parallel_replicas(R, opts.threads, [&](int r) {
        auto rng = rng_stream(opts.seed, static_cast<std::uint64_t>(r));
        ZorichChain chain(root, rng, opts.burn_in);
        const std::int64_t n = detail::per_replica(N, R, r);
        for (std::int64_t s = 0; s < n; ++s) {
            chain.align_plus();
            Word w;
            const auto before = chain.restarts();
            for (int t = 0; t < length; ++t) {
                Permutation start(std::vector<int>(chain.image(), chain.image() + chain.size()));
                const auto run = chain.step();
                w.push_back({run.op, run.n, std::move(start)});
            }
            if (chain.restarts() != before) continue;
            ++seen[r];
            bad[r] += !classify_good(w, p).good;
        }
    });
    BadWordMass out;
    out.block_length = p.block_length();
    std::int64_t b = 0;
    for (int r = 0; r < R; ++r) b += bad[r], out.samples += seen[r];
    if (out.samples > 0) {
        out.bad_fraction = static_cast<double>(b) / static_cast<double>(out.samples);
        out.stderr_ = std::sqrt(out.bad_fraction * (1 - out.bad_fraction) / static_cast<double>(out.samples));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Central limit theorem for the special flow over F

struct CltReport {
    std::vector<double> samples;  // T^{-1/2} int_0^T phi o P^t, centred by the grand mean
    double ks_statistic = 0.0;
    double sigma_hat = 0.0;
    double mean = 0.0;            // grand time average of phi
    double roof_exp_moment = 0.0; // mean exp(eps * F-roof)
    double eps = 0.1;
    bool degenerate = false;
    std::int64_t restarts = 0;
};

namespace detail {

/// int_{s0}^{s1} phi(P^s z): closed form when available, else Simpson on 64 panels.
inline double fiber_integral(const Observable& phi, const ZipperedRectangle& z, double s0, double s1) {
    if (s1 <= s0) return 0.0;
    if (phi.fiber_integral) return phi.fiber_integral(z, s0, s1);
    const int panels = 64;
    const double h = (s1 - s0) / panels;
    double s = phi.on_zr(flow(z, s0)) + phi.on_zr(flow(z, s1));
    for (int k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * phi.on_zr(flow(z, s0 + k * h));
    return s * h / 3.0;
}

/// Kolmogorov-Smirnov distance of the sample to N(0, sigma).
inline double ks_centered_normal(std::vector<double> x, double sigma) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double F = 0.5 * std::erfc(-x[i] / (sigma * std::sqrt(2.0)));
        d = std::max({d, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
    }
    return d;
}

}  // namespace detail

/**
 * N windows of length T cut from stationary flow orbits (opts.replicas
 * orbits, consecutive windows on each). Whole fibers are integrated exactly
 * and the window edges by the partial fiber integral.
 */
inline CltReport clt_flow(const Observable& phi, const Permutation& root, double T, std::int64_t N,
                          const ChainOptions& opts, double eps = 0.1) {
    if (!phi.on_zr) throw validation_error("clt_flow: observable has no zippered-rectangle evaluator");
    if (!(T > 0.0)) throw validation_error("clt_flow: T must be positive");
    if (N < 2) throw validation_error("clt_flow: N must be >= 2");
    const int R = opts.replicas;
    std::vector<std::vector<double>> integrals(R);
    std::vector<double> roof_exp(R, 0.0);
    std::vector<std::int64_t> roofs(R, 0), restarts(R, 0);
    parallel_replicas(R, opts.threads, [&](int r) {
        auto rng = rng_stream(opts.seed, static_cast<std::uint64_t>(r));
        const std::int64_t n = detail::per_replica(N, R, r);
        auto fresh = [&] {
            while (true) {
                try {
                    auto z = random_section_point(root, rng);
                    for (std::int64_t k = 0; k < opts.burn_in; ++k) z = zorich_lift_step(z).state;
                    return z;
                } catch (const boundary_error&) {
                    ++restarts[r];
                }
            }
        };
        auto cur = fresh();
        double acc = 0.0, t = 0.0;  // integral and time so far in the open window
        while (static_cast<std::int64_t>(integrals[r].size()) < n) {
            try {
                const auto step = zorich_lift_step(cur);
                const double tau = step.flow_time;
                roof_exp[r] += std::exp(eps * tau);
                ++roofs[r];
                double s = 0.0;  // position inside the current fiber
                // windows that close inside this fiber
                while (t + (tau - s) >= T && static_cast<std::int64_t>(integrals[r].size()) < n) {
                    const double u = T - t;
                    acc += detail::fiber_integral(phi, cur, s, s + u);
                    integrals[r].push_back(acc);
                    acc = 0.0;
                    t = 0.0;
                    s += u;
                }
                acc += detail::fiber_integral(phi, cur, s, tau);
                t += tau - s;
                cur = step.state;
            } catch (const boundary_error&) {
                // the open window is discarded with the orbit
                ++restarts[r];
                cur = fresh();
                acc = 0.0;
                t = 0.0;
            }
        }
        integrals[r].resize(n);
    });
    CltReport out;
    out.eps = eps;
    std::vector<double> all;
    double re = 0.0;
    std::int64_t rc = 0;
    for (int r = 0; r < R; ++r) {
        all.insert(all.end(), integrals[r].begin(), integrals[r].end());
        re += roof_exp[r];
        rc += roofs[r];
        out.restarts += restarts[r];
    }
    out.roof_exp_moment = rc ? re / static_cast<double>(rc) : 0.0;
    double s = 0.0;
    for (double v : all) s += v;
    out.mean = s / (static_cast<double>(all.size()) * T);
    double ss = 0.0;
    for (double v : all) {
        const double c = (v - out.mean * T) / std::sqrt(T);
        out.samples.push_back(c);
        ss += c * c;
    }
    out.sigma_hat = std::sqrt(ss / static_cast<double>(all.size()));
    const double scale = std::max(1.0, std::abs(out.mean) * std::sqrt(T));
    if (!(out.sigma_hat > 1e-12 * scale)) {
        out.degenerate = true;
        out.ks_statistic = 0.0;
        return out;
    }
    out.ks_statistic = detail::ks_centered_normal(out.samples, out.sigma_hat);
    return out;
}

}  // namespace iet

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <iet/density.hpp>
#include <iet/random.hpp>
#include <iet/zippered.hpp>

#include "oracles.hpp"

using namespace iet;

namespace {

Permutation P(const char* s) { return Permutation::parse(s); }

std::vector<std::vector<long long>> as_ll(const std::vector<IntVector>& rays) {
    std::vector<std::vector<long long>> out;
    for (const auto& r : rays) {
        std::vector<long long> v;
        for (const auto& x : r) v.push_back(x.convert_to<long long>());
        out.push_back(v);
    }
    return out;
}

std::vector<double> random_lengths(int m, RngStream& rng) {
    std::vector<double> lam(m);
    for (double& x : lam) x = 0.05 + rng.uniform();
    return lam;
}

/// Start of the single op step ending at (lam, pi), unnormalized.
std::pair<std::vector<double>, Permutation> step_back(Op op, const std::vector<double>& lam, const Permutation& pi) {
    const Permutation start = apply_inv(op, pi);
    return {matrix(start, op).apply(std::span<const double>(lam)), start};
}

const char* roots[] = {"21", "321", "4321", "4213", "54321", "53421", "615243"};

}  // namespace

TEST(Cone, TwoDimensionalRays) {
    EXPECT_EQ(as_ll(cone(P("21")).rays), (std::vector<std::vector<long long>>{{-1, 0}, {0, 1}}));
    EXPECT_EQ(as_ll(cone(P("21"), ConeVariant::minus).rays), (std::vector<std::vector<long long>>{{-1, 1}, {0, 1}}));
    EXPECT_EQ(as_ll(cone(P("21"), ConeVariant::plus).rays), (std::vector<std::vector<long long>>{{-1, 0}, {-1, 1}}));
}

TEST(Cone, RaysMatchEnumeration) {
    for (const char* root : roots)
        for (const auto& pi : rauzy_class(P(root)))
            for (auto [v, code] : {std::pair{ConeVariant::full, 0}, {ConeVariant::plus, 1}, {ConeVariant::minus, -1}}) {
                const auto c = cone(pi, v);
                EXPECT_EQ(as_ll(c.rays), oracle::brute_force_rays(pi, code)) << pi.to_string() << ' ' << to_string(v);
                for (const auto& r : c.rays) EXPECT_TRUE(satisfies(c, r));
            }
}

TEST(Cone, DimensionLimit) {
    EXPECT_NO_THROW(cone(P("87654321")));
    EXPECT_THROW(cone(P("987654321")), validation_error);
    EXPECT_THROW(cone(P("12")), validation_error);
}

TEST(Cone, TriangulationCoversTheCone) {
    // Monte Carlo in a box around the truncated cone, the hull of 0 and the rays / l(ray)
    auto rng = rng_stream(41, 0);
    for (const auto& pi : rauzy_class(P("321")))
        for (auto v : {ConeVariant::full, ConeVariant::plus, ConeVariant::minus}) {
            const auto lam = random_lengths(3, rng);
            const auto ell = area_functional(lam, pi);
            const auto c = cone(pi, v);
            const double vol = cone_volume(lam, pi, v);
            double box[3] = {0, 0, 0}, lo[3] = {0, 0, 0};
            for (const auto& r : c.rays) {
                double l = 0.0;
                for (int i = 0; i < 3; ++i) l += ell[i] * r[i].convert_to<double>();
                std::vector<double> p(3);
                for (int i = 0; i < 3; ++i) {
                    p[i] = r[i].convert_to<double>() / l;
                    box[i] = std::max(box[i], p[i]);
                    lo[i] = std::min(lo[i], p[i]);
                }
            }
            const int N = 400000;
            int hits = 0;
            const auto rows = oracle::cone_rows(pi, v == ConeVariant::full ? 0 : v == ConeVariant::plus ? 1 : -1);
            for (int k = 0; k < N; ++k) {
                double x[3];
                for (int i = 0; i < 3; ++i) x[i] = lo[i] + (box[i] - lo[i]) * rng.uniform();
                bool in = ell[0] * x[0] + ell[1] * x[1] + ell[2] * x[2] <= 1.0;
                for (const auto& g : rows) in = in && g[0] * x[0] + g[1] * x[1] + g[2] * x[2] >= 0.0;
                hits += in;
            }
            const double mc = hits * (box[0] - lo[0]) * (box[1] - lo[1]) * (box[2] - lo[2]) / N;
            EXPECT_NEAR(vol, mc, 0.02 * vol + 4.0 * std::sqrt(hits) / N * (box[0] - lo[0]) * (box[1] - lo[1]) * (box[2] - lo[2]))
                << pi.to_string() << ' ' << to_string(v);
        }
}

TEST(Volume, ExactTwoDimensionalValues) {
    const std::vector<BigRational> lam{BigRational(3, 5), BigRational(2, 5)};
    const auto ell = area_functional_exact(lam, P("21"));
    auto exact = [&](ConeVariant v) {
        const auto d = cached_cone(P("21"), v);
        return truncated_volume_exact(d->cone, d->triangulation, ell);
    };
    EXPECT_EQ(exact(ConeVariant::full), BigRational(25, 12));
    EXPECT_EQ(exact(ConeVariant::minus), BigRational(5, 6));
    EXPECT_EQ(exact(ConeVariant::plus), BigRational(5, 4));
    const std::vector<double> l{0.6, 0.4};
    EXPECT_NEAR(r(l, P("21")), 25.0 / 12.0, 1e-14);
    EXPECT_NEAR(r_minus(l, P("21")), 5.0 / 6.0, 1e-14);
    EXPECT_NEAR(r_plus(l, P("21")), 5.0 / 4.0, 1e-14);
}

TEST(Volume, PolygonOracleInTwoDimensions) {
    auto rng = rng_stream(42, 0);
    for (int k = 0; k < 1000; ++k) {
        const std::vector<double> lam{0.01 + rng.uniform(), 0.01 + rng.uniform()};
        const auto ell = area_functional(lam, P("21"));
        for (auto [v, code] : {std::pair{ConeVariant::full, 0}, {ConeVariant::plus, 1}, {ConeVariant::minus, -1}}) {
            std::vector<std::pair<double, double>> poly{{0.0, 0.0}};
            for (const auto& ray : oracle::brute_force_rays(P("21"), code)) {
                const double l = ell[0] * ray[0] + ell[1] * ray[1];
                poly.emplace_back(ray[0] / l, ray[1] / l);
            }
            const double want = oracle::polygon_area(poly);
            EXPECT_NEAR(cone_volume(lam, P("21"), v), want, 1e-12 * want);
        }
    }
}

TEST(Volume, HomogeneousAndAdditive) {
    auto rng = rng_stream(43, 0);
    for (const char* root : roots)
        for (const auto& pi : rauzy_class(P(root))) {
            const int m = pi.size();
            const auto lam = random_lengths(m, rng);
            auto scaled = lam;
            for (double& x : scaled) x *= 2.5;
            EXPECT_NEAR(r(scaled, pi), std::pow(2.5, -m) * r(lam, pi), 1e-12 * r(lam, pi));
            EXPECT_NEAR(r(lam, pi), r_plus(lam, pi) + r_minus(lam, pi), 1e-12 * r(lam, pi));
            EXPECT_GT(r_plus(lam, pi), 0.0);
            EXPECT_GT(r_minus(lam, pi), 0.0);
        }
    EXPECT_THROW(r(std::vector<double>{0.5, 0.0}, P("21")), validation_error);
}

TEST(Volume, HalfConesArePulledBackFullCones) {
    auto rng = rng_stream(44, 0);
    for (const char* root : roots)
        for (const auto& pi : rauzy_class(P(root))) {
            const auto lam = random_lengths(pi.size(), rng);
            const auto [lb, pb] = step_back(Op::b, lam, pi);
            const auto [la, pa] = step_back(Op::a, lam, pi);
            EXPECT_NEAR(r_minus(lam, pi), r(lb, pb), 1e-12 * r(lb, pb)) << pi.to_string();
            EXPECT_NEAR(r_plus(lam, pi), r(la, pa), 1e-12 * r(la, pa)) << pi.to_string();
        }
}

TEST(Volume, MinusConeBijection) {
    // with sigma = b^{-1} pi, delta -> (delta_1, ..., delta_{m-1}, delta_m + delta_{sigma^{-1} m})
    // maps K^-(pi) into K(sigma) and carries the area functional over
    auto rng = rng_stream(45, 0);
    for (const char* root : roots)
        for (const auto& pi : rauzy_class(P(root))) {
            const int m = pi.size();
            const auto c = cone(pi, ConeVariant::minus);
            const auto lam = random_lengths(m, rng);
            const auto [lb, pb] = step_back(Op::b, lam, pi);
            const auto ell = area_functional(lam, pi), ell_b = area_functional(lb, pb);
            const auto target = cone(pb);
            for (int k = 0; k < 50; ++k) {
                IntVector d(m, 0);
                for (const auto& ray : c.rays) {
                    const BigInt w = rng.below(5);
                    for (int i = 0; i < m; ++i) d[i] += w * ray[i];
                }
                IntVector t = d;
                t[m - 1] += d[pb.inv(m) - 1];
                EXPECT_TRUE(satisfies(target, t));
                double a1 = 0.0, a2 = 0.0;
                for (int i = 0; i < m; ++i) {
                    a1 += ell[i] * d[i].convert_to<double>();
                    a2 += ell_b[i] * t[i].convert_to<double>();
                }
                EXPECT_NEAR(a1, a2, 1e-9 * (1 + std::abs(a1)));
            }
        }
}

TEST(Density, SeriesOverPreimages) {
    // r_plus(x) = sum_{n >= 1} r_minus(T_{a^{-n}} x) in m = 2, summed until the residual is below 1e-6
    const std::vector<double> lam{0.3, 0.7};
    const auto pi = P("21");
    double sum = 0.0;
    std::int64_t n = 0;
    double residual = 1.0;
    while (residual > 1e-6) {
        ++n;
        const Letter l{Op::a, n, apply_power(Op::a, pi, -n)};
        sum += r_minus(letter_matrix<double>(l).apply(std::span<const double>(lam)), l.perm);
        residual = std::abs(r_plus(lam, pi) - sum) / r_plus(lam, pi);
        ASSERT_LT(n, 10000000);
    }
    EXPECT_LT(residual, 1e-6);
    // in higher m, partial sums plus the remaining half cone reproduce r_plus exactly
    auto rng = rng_stream(46, 0);
    for (const char* root : {"4321", "54321", "53421"}) {
        const auto q = P(root);
        const auto l = random_lengths(q.size(), rng);
        double s = 0.0;
        for (std::int64_t k = 1; k <= 40; ++k) {
            const Letter w{Op::a, k, apply_power(Op::a, q, -k)};
            const auto start = letter_matrix<double>(w).apply(std::span<const double>(l));
            s += r_minus(start, w.perm);
            EXPECT_NEAR(s + r_plus(start, w.perm), r_plus(l, q), 1e-10 * r_plus(l, q));
        }
    }
}

TEST(Density, ClosedFormTwoIntervals) {
    const IETState s(LengthVector({0.25, 0.75}), P("21"));
    EXPECT_NEAR(transition_p(s, 1), 3.0 / 7.0, 1e-14);
    auto rng = rng_stream(47, 0);
    for (int k = 0; k < 200; ++k) {
        const double l1 = 0.01 + rng.uniform(), l2 = 0.01 + rng.uniform();
        const IETState x(LengthVector({l1, l2}), P("21"));
        if (sign_set(x) == Sign::boundary) continue;
        const bool minus = sign_set(x) == Sign::minus;
        const double lead = minus ? l1 : l2, step = minus ? l2 : l1;
        for (int n = 1; n <= 20; ++n) {
            const double xn = lead + n * step, xn1 = xn + step;
            EXPECT_NEAR(transition_p(x, n), step * (l1 + l2) / (xn * xn1), 1e-12);
        }
    }
}

TEST(Density, TransitionsSumToOne) {
    auto rng = rng_stream(48, 0);
    for (const char* root : roots) {
        for (int rep = 0; rep < 20; ++rep) {
            const auto pi = P(root);
            const IETState s(LengthVector(random_lengths(pi.size(), rng)), pi);
            if (sign_set(s) == Sign::boundary) continue;
            EXPECT_NEAR(tail(s, 0), 1.0, 1e-12);
            double sum = 0.0;
            for (int n = 1; n <= 30; ++n) {
                const double p = transition_p(s, n);
                EXPECT_GE(p, 0.0);
                sum += p;
                EXPECT_NEAR(sum + tail(s, n), 1.0, 1e-8) << root << " n=" << n;
            }
        }
    }
}

TEST(Density, WordProbabilityChainRule) {
    auto rng = rng_stream(49, 0);
    int checked = 0;
    for (const char* root : {"321", "4321", "4213", "54321"}) {
        for (int rep = 0; rep < 30; ++rep) {
            const auto pi = P(root);
            IETState s(LengthVector(random_lengths(pi.size(), rng)), pi);
            if (sign_set(s) == Sign::boundary) continue;
            s = zorich_step(IETState(s.lengths().normalized(), s.perm())).state;
            // walk backwards through the density-weighted chain to build a past word
            Word w;
            IETState cur = s;
            double chain = 1.0;
            for (int k = 0; k < 3; ++k) {
                const std::int64_t n = 1 + static_cast<std::int64_t>(rng.below(3));
                const double p = transition_p(cur, n);
                const auto prev = preimage(cur, n);
                chain *= p;
                w.insert(w.begin(), zorich_step(prev).letter);
                cur = prev;
                ASSERT_TRUE(is_compatible(w, s));
                EXPECT_NEAR(prob_word(w, s), chain, 1e-9 * chain);
                ++checked;
            }
            EXPECT_NEAR(prob_word(Word{w.back()}, s), transition_p(s, w.back().n), 1e-12);
        }
    }
    EXPECT_GT(checked, 100);
    const IETState s(LengthVector({0.25, 0.75}), P("21"));
    EXPECT_EQ(prob_word({}, s), 1.0);
    EXPECT_THROW(prob_word(parse_word("b:1@21"), s), validation_error);
}

TEST(Density, LowerBoundsOnTwoIntervals) {
    auto rng = rng_stream(50, 0);
    for (int k = 0; k < 300; ++k) {
        const double l1 = 0.05 + rng.uniform(), l2 = 0.05 + rng.uniform();
        IETState s(LengthVector({l1, l2}), P("21"));
        if (sign_set(s) == Sign::boundary) continue;
        s = IETState(s.lengths().normalized(), s.perm());
        const Letter l = zorich_step(preimage(s, 1 + rng.below(50))).letter;
        const auto rep = lower_bounds_check(Word{l}, s);
        EXPECT_GT(rep.probability, 0.0);
        EXPECT_GE(rep.ratio, rep.min_length * rep.min_length / 8.0);
    }
}

TEST(Density, CsvExport) {
    std::ostringstream os;
    write_density_csv(os, P("21"), {{0.6, 0.4}});
    const auto text = os.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "lambda_1,lambda_2,r_plus,r_minus");
    EXPECT_NE(text.find("1.25,0.83333333333333337"), std::string::npos) << text;
}

TEST(Density, BranchBySign) {
    const std::vector<double> lp{0.6, 0.4}, lm{0.4, 0.6};
    EXPECT_EQ(density(lp, P("21")), r_minus(lp, P("21")));
    EXPECT_EQ(density(lm, P("21")), r_plus(lm, P("21")));
    EXPECT_THROW(density(std::vector<double>{0.5, 0.5}, P("21")), boundary_error);
}

#include <gtest/gtest.h>

#include <cmath>

#include <iet/experiments.hpp>

using namespace iet;

namespace {

Permutation P(const char* s) { return Permutation::parse(s); }

ChainOptions small(std::uint64_t seed, int threads = 1) {
    ChainOptions o;
    o.seed = seed;
    o.burn_in = 1000;
    o.replicas = 8;
    o.threads = threads;
    return o;
}

GoodWordParams golden(int k, double theta = 0.5) {
    GoodWordParams p;
    p.q = parse_word("a:1@21/b:1@21");
    p.k = k;
    p.theta = theta;
    return p;
}

}  // namespace

TEST(Fit, Linear) {
    const auto f = linear_fit({0, 1, 2, 3}, {1, 3, 5, 7});
    EXPECT_NEAR(f.slope, 2.0, 1e-15);
    EXPECT_NEAR(f.intercept, 1.0, 1e-15);
    EXPECT_NEAR(f.r2, 1.0, 1e-15);
    EXPECT_THROW(linear_fit({1}, {1}), validation_error);
}

TEST(Histogram, MassAndReference) {
    const auto h = sample_invariant(P("21"), 200000, 20, small(1));
    double e = 0, x = 0;
    for (double v : h.empirical) e += v;
    for (double v : h.exact) x += v;
    EXPECT_NEAR(e, 1.0, 1e-12);
    EXPECT_NEAR(x, 1.0, 1e-12);
    EXPECT_EQ(h.reference, "quadrature");
    // closed form: the lambda_1 marginal has density 1/(2 max(lambda_1, lambda_2)) / log 2
    for (int b = 0; b < 20; ++b) {
        const double lo = h.edges[b], hi = h.edges[b + 1];
        const double want = lo >= 0.5 ? std::log(hi / lo) / (2 * std::log(2.0))
                                      : std::log((1 - lo) / (1 - hi)) / (2 * std::log(2.0));
        EXPECT_NEAR(h.exact[b], want, 1e-12);
    }
    EXPECT_LT(h.sup_relative_deviation, 0.05);
}

TEST(Histogram, DeviationShrinksWithN) {
    // average over seeds to see the Monte Carlo rate as a trend
    double d1 = 0, d4 = 0;
    for (std::uint64_t s = 1; s <= 6; ++s) {
        d1 += sample_invariant(P("21"), 100000, 10, small(s)).sup_relative_deviation;
        d4 += sample_invariant(P("21"), 400000, 10, small(s + 100)).sup_relative_deviation;
    }
    EXPECT_LT(d4, 0.75 * d1);
}

TEST(Histogram, HigherGenusUsesSampledReference) {
    const auto h = sample_invariant(P("321"), 100000, 10, small(2));
    EXPECT_EQ(h.reference, "monte-carlo");
    EXPECT_LT(h.sup_relative_deviation, 0.15);
}

TEST(Histogram, StationaryAcrossSegments) {
    // disjoint seeds stand in for disjoint orbit segments
    const auto a = sample_invariant(P("21"), 400000, 10, small(7));
    const auto b = sample_invariant(P("21"), 400000, 10, small(8));
    for (int i = 0; i < 10; ++i) EXPECT_NEAR(a.empirical[i], b.empirical[i], 0.01);
}

TEST(Experiments, DeterministicAndThreadIndependent) {
    const auto a = sample_invariant(P("321"), 50000, 10, small(5, 1));
    const auto b = sample_invariant(P("321"), 50000, 10, small(5, 4));
    EXPECT_EQ(a.empirical, b.empirical);
    const auto phi = observables::coordinate(1);
    const auto c1 = correlation_decay(phi, phi, P("21"), 5, 40000, small(5, 1));
    const auto c2 = correlation_decay(phi, phi, P("21"), 5, 40000, small(5, 3));
    EXPECT_EQ(c1.covariance, c2.covariance);
    const auto t1 = clt_flow(phi, P("21"), 10, 200, small(5, 1));
    const auto t2 = clt_flow(phi, P("21"), 10, 200, small(5, 2));
    EXPECT_EQ(t1.samples, t2.samples);
}

TEST(Correlation, LagZeroIsVariance) {
    const auto phi = observables::coordinate(1);
    const auto c = correlation_decay(phi, phi, P("21"), 3, 80000, small(9));
    EXPECT_NEAR(c.correlation[0], 1.0, 1e-12);
    // on the plus set lambda_1 = 1/(1 + x) with x Gauss distributed; its variance is small but positive
    EXPECT_GT(c.covariance[0], 0.0);
    EXPECT_LT(c.covariance[0], 1.0 / 16.0);
    EXPECT_LT(std::abs(c.correlation[3]), 0.05);
    EXPECT_THROW(correlation_decay(phi, phi, P("21"), 10, 40, small(9)), validation_error);
}

TEST(Correlation, CovarianceMatchesDirectSample) {
    // one replica, lag 0: the direct population covariance of the recorded values
    ChainOptions o = small(10);
    o.replicas = 1;
    const auto phi = observables::coordinate(1), psi = observables::coordinate(2);
    const auto c = correlation_decay(phi, psi, P("21"), 0, 5000, o);
    auto rng = rng_stream(10, 0);
    ZorichChain chain(P("21"), rng, o.burn_in);
    chain.align_plus();
    std::vector<double> f, g;
    for (int k = 0; k < 5000; ++k) {
        const auto s = chain.state();
        f.push_back(phi.on_state(s));
        g.push_back(psi.on_state(s));
        chain.step();
        chain.step();
        chain.align_plus();
    }
    double mf = 0, mg = 0, s = 0;
    for (int k = 0; k < 5000; ++k) mf += f[k] / 5000, mg += g[k] / 5000;
    for (int k = 0; k < 5000; ++k) s += (f[k] - mf) * (g[k] - mg) / 5000;
    EXPECT_NEAR(c.covariance[0], s, 1e-12);
    // lambda_2 = 1 - lambda_1 on the section
    EXPECT_NEAR(c.correlation[0], -1.0, 1e-9);
}

TEST(ReturnTimes, SurvivalShape) {
    const auto q = parse_word("a:1@21/b:1@21");
    const auto rt = return_time_tail(q, P("21"), 20, 200000, 0.1, small(11));
    ASSERT_EQ(rt.survival.size(), 21u);
    for (std::size_t n = 1; n < rt.survival.size(); ++n) EXPECT_LE(rt.survival[n], rt.survival[n - 1]);
    // Gauss measure of the digit pair (1, 1): log2(10/9)
    EXPECT_NEAR(rt.cylinder_mass, std::log2(10.0 / 9.0), 0.01);
    EXPECT_GT(rt.tau_mean, 0.0);
    EXPECT_GE(rt.tau_exp_moment, 1.0);
    EXPECT_THROW(return_time_tail(parse_word("a:1@21"), P("21"), 5, 100, 0.1, small(1)), validation_error);
    EXPECT_THROW(return_time_tail(parse_word("b:1@21/a:1@21"), P("21"), 5, 100, 0.1, small(1)), validation_error);
}

TEST(ThinSimplices, LinearInEps) {
    const auto t = delta_eps_mass(P("21"), {1e-2, 3e-2, 1e-1}, 400000, small(12));
    // m = 2 oracle: nu(min < eps) = -log(1 - eps) / log 2
    for (std::size_t i = 0; i < t.eps.size(); ++i)
        EXPECT_NEAR(t.mass[i], -std::log(1 - t.eps[i]) / std::log(2.0), 0.1 * t.mass[i]);
    EXPECT_NEAR(t.loglog.slope, 1.0, 0.1);
    EXPECT_THROW(delta_eps_mass(P("21"), {0.1}, 10, small(1)), validation_error);
}

TEST(GoodWords, Definition) {
    const auto p = golden(4);
    EXPECT_EQ(p.block_length(), 18);  // 2(K + 1)k + 2M with K = 1, M = 1
    const auto good = classify_good(parse_word("a:1@21/b:1@21/a:1@21/b:1@21"), p);
    EXPECT_TRUE(good.good);
    EXPECT_EQ(good.min_occurrences, 2);
    EXPECT_NEAR(good.min_coordinate, 3.0 / 8.0, 1e-15);

    const auto none = classify_good(parse_word("a:1@21/b:2@21/a:1@21/b:2@21"), p);
    EXPECT_FALSE(none.good);
    EXPECT_EQ(none.min_occurrences, 0);

    const auto thin = classify_good(parse_word("a:100@21/b:1@21/a:1@21/b:1@21"), p);
    EXPECT_FALSE(thin.good);
    EXPECT_NEAR(thin.min_coordinate, 3.0 / 305.0, 1e-15);
    EXPECT_EQ(thin.reason, "cylinder leaves Delta_exp(-k)");

    // block rule: a tail shorter than k is not inspected
    auto q = golden(4);
    q.r = 6;
    const auto w = parse_word("a:1@21/b:1@21/a:1@21/b:1@21/a:1@21/b:1@21/a:1@21/b:2@21");
    EXPECT_TRUE(classify_good(w, q).good);
    const auto w2 = parse_word("a:1@21/b:1@21/a:1@21/b:1@21/a:1@21/b:1@21/a:1@21/b:2@21/a:1@21/b:2@21");
    EXPECT_FALSE(classify_good(w2, q).good);
    EXPECT_EQ(classify_good(w2, q).failed_block, 1);

    auto bad = golden(4);
    bad.q = parse_word("a:1@21");
    EXPECT_THROW(classify_good(w, bad), validation_error);
    bad = golden(4, 1.5);
    EXPECT_THROW(classify_good(w, bad), validation_error);
}

TEST(GoodWords, BadMassDecreasesWithBlockLength) {
    double prev = 1.0;
    for (int k : {8, 32, 128}) {
        const auto p = golden(k);
        const auto b = bad_word_mass(p, P("21"), k, 4000, small(13));
        EXPECT_LT(b.bad_fraction, prev + 2 * b.stderr_) << "k=" << k;
        prev = b.bad_fraction;
    }
    EXPECT_LT(prev, 0.2);
}

TEST(Clt, ZeroObservableIsDegenerate) {
    const auto r = clt_flow(observables::zero(), P("21"), 10, 100, small(14));
    EXPECT_TRUE(r.degenerate);
    for (double v : r.samples) EXPECT_EQ(v, 0.0);
}

TEST(Clt, SimpsonMatchesClosedForm) {
    auto rng = rng_stream(15, 0);
    const auto z = random_section_point(P("321"), rng);
    auto raw = observables::raw_length(2);
    auto numeric = raw;
    numeric.fiber_integral = nullptr;
    EXPECT_NEAR(detail::fiber_integral(numeric, z, 0.1, 0.9), detail::fiber_integral(raw, z, 0.1, 0.9), 1e-10);
}

TEST(Clt, RoofIntegrable) {
    const auto r = clt_flow(observables::coordinate(1), P("21"), 20, 500, small(16), 0.05);
    EXPECT_TRUE(std::isfinite(r.roof_exp_moment));
    EXPECT_GT(r.roof_exp_moment, 1.0);
    EXPECT_LT(r.roof_exp_moment, 2.0);
    EXPECT_NEAR(r.mean, 0.5, 0.02);
}

TEST(Observables, HolderEstimates) {
    auto rng = rng_stream(17, 0);
    for (int i = 1; i <= 3; ++i) {
        const auto o = observables::coordinate(i);
        EXPECT_LE(estimate_holder_constant(o, P("321"), 5000, rng), o.holder_constant + 1e-12);
    }
    const IETState centre(LengthVector({0.2, 0.3, 0.5}), P("321"));
    const auto b = observables::bump(centre, 0.5);
    EXPECT_LE(estimate_holder_constant(b, P("321"), 5000, rng), b.holder_constant + 1e-12);
    EXPECT_EQ(b.on_state(centre), 1.0);
    EXPECT_EQ(observables::by_name("lambda_2").name, "lambda_2");
    EXPECT_THROW(observables::by_name("lambda_x"), validation_error);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include <iet/random.hpp>

using namespace iet;

TEST(Rng, ReproducibleAndIndependentStreams) {
    auto a = rng_stream(7, 3), b = rng_stream(7, 3);
    for (int k = 0; k < 100; ++k) EXPECT_EQ(a.next(), b.next());

    const int n = 200000;
    for (std::uint64_t id = 0; id < 4; ++id) {
        auto x = rng_stream(7, id), y = rng_stream(7, id + 1);
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (int k = 0; k < n; ++k) {
            const double u = x.uniform(), v = y.uniform();
            sx += u, sy += v, sxx += u * u, syy += v * v, sxy += u * v;
        }
        const double cov = sxy / n - sx / n * sy / n;
        const double corr = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
        EXPECT_LT(std::abs(corr), 1e-2);
    }
    EXPECT_NE(rng_stream(7, 0).next(), rng_stream(8, 0).next());
}

TEST(Rng, Distributions) {
    auto r = rng_stream(1, 0);
    const int n = 200000;
    double su = 0, se = 0, sn = 0, snn = 0;
    for (int k = 0; k < n; ++k) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        se += r.exponential();
        const double z = r.normal();
        sn += z, snn += z * z;
        ASSERT_LT(r.below(7), 7u);
    }
    EXPECT_NEAR(su / n, 0.5, 0.005);
    EXPECT_NEAR(se / n, 1.0, 0.01);
    EXPECT_NEAR(sn / n, 0.0, 0.01);
    EXPECT_NEAR(snn / n, 1.0, 0.02);
    const auto p = r.simplex_point(5);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-15);
    for (double x : p) EXPECT_GT(x, 0.0);
}

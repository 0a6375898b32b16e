#include <gtest/gtest.h>

#include <cmath>

#include <iet/induction.hpp>
#include <iet/projective.hpp>
#include <iet/random.hpp>

#include "oracles.hpp"

using namespace iet;

namespace {

RauzyMatrix M(std::vector<std::vector<std::int64_t>> rows) { return RauzyMatrix::from_rows(rows); }

// Random product of elementary Rauzy matrices along the graph of pi.
RauzyMatrix random_cocycle(RngStream& rng, int m, int steps) {
    auto pi = oracle::random_irreducible(m, rng);
    RauzyMatrix A = RauzyMatrix::identity(m);
    for (int k = 0; k < steps; ++k) {
        const Op op = rng.below(2) ? Op::a : Op::b;
        A = A * matrix(pi, op);
        pi = apply(op, pi);
    }
    return A;
}

// det of the (m-1)x(m-1) chart Jacobian by central differences, chart drops
// the last coordinate.
double fd_jacobian(const RauzyMatrix& A, const std::vector<double>& u) {
    const int m = A.size(), k = m - 1;
    const double h = 1e-6;
    auto chart_image = [&](std::vector<double> x) {
        double s = 0.0;
        for (int i = 0; i < k; ++i) s += x[i];
        x[k] = 1.0 - s;
        auto y = project(A, std::span<const double>(x));
        y.pop_back();
        return y;
    };
    std::vector<std::vector<double>> J(k, std::vector<double>(k));
    for (int j = 0; j < k; ++j) {
        auto xp = u, xm = u;
        xp[j] += h;
        xm[j] -= h;
        const auto yp = chart_image(xp), ym = chart_image(xm);
        for (int i = 0; i < k; ++i) J[i][j] = (yp[i] - ym[i]) / (2 * h);
    }
    // Gaussian elimination with partial pivoting
    double det = 1.0;
    for (int c = 0; c < k; ++c) {
        int piv = c;
        for (int r = c + 1; r < k; ++r)
            if (std::abs(J[r][c]) > std::abs(J[piv][c])) piv = r;
        if (piv != c) {
            std::swap(J[piv], J[c]);
            det = -det;
        }
        det *= J[c][c];
        for (int r = c + 1; r < k; ++r) {
            const double f = J[r][c] / J[c][c];
            for (int j = c; j < k; ++j) J[r][j] -= f * J[c][j];
        }
    }
    return det;
}

}  // namespace

TEST(Hilbert, Examples) {
    const std::vector<double> u{0.7, 0.3}, v{0.3, 0.7};
    EXPECT_EQ(hilbert_distance(u, u), 0.0);
    EXPECT_NEAR(hilbert_distance(u, v), std::log(49.0 / 9.0), 1e-14);
    EXPECT_NEAR(std::log(49.0 / 9.0), 1.694596, 1e-6);
    EXPECT_NEAR(hilbert_distance(std::vector<double>{2.1, 0.9}, v), hilbert_distance(u, v), 1e-14);
    EXPECT_THROW(hilbert_distance(std::vector<double>{1.0, 0.0}, v), validation_error);

    const IETState x(LengthVector({0.2, 0.3, 0.5}), Permutation::parse("321"));
    const IETState y(LengthVector({0.2, 0.3, 0.5}), Permutation::parse("312"));
    EXPECT_EQ(hilbert_distance(x, y), 2.0);
}

TEST(Hilbert, MetricAxioms) {
    auto rng = rng_stream(21, 0);
    for (int k = 0; k < 10000; ++k) {
        const int m = 2 + static_cast<int>(rng.below(5));
        const auto a = rng.simplex_point(m), b = rng.simplex_point(m), c = rng.simplex_point(m);
        const double ab = hilbert_distance(a, b), ba = hilbert_distance(b, a);
        EXPECT_NEAR(ab, ba, 1e-12);
        EXPECT_LE(hilbert_distance(a, c), ab + hilbert_distance(b, c) + 1e-12);
    }
}

TEST(Project, Examples) {
    const std::vector<double> u{0.5, 0.5};
    EXPECT_EQ(project(RauzyMatrix::identity(2), std::span<const double>(u)), u);
    const auto p = project(M({{1, 1}, {0, 1}}), std::span<const double>(u));
    EXPECT_NEAR(p[0], 2.0 / 3, 1e-15);
    EXPECT_NEAR(p[1], 1.0 / 3, 1e-15);

    auto rng = rng_stream(22, 0);
    for (int k = 0; k < 200; ++k) {
        const int m = 2 + static_cast<int>(rng.below(4));
        const auto A = random_cocycle(rng, m, 5), B = random_cocycle(rng, m, 5);
        const auto x = rng.simplex_point(m);
        const auto lhs = project(A * B, std::span<const double>(x));
        const auto rhs = project(A, std::span<const double>(project(B, std::span<const double>(x))));
        for (int i = 0; i < m; ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-12);
    }
}

TEST(Jacobian, ClosedFormAgainstFiniteDifferences) {
    const std::vector<double> u{0.5, 0.5};
    EXPECT_EQ(jacobian_det(RauzyMatrix::identity(2), std::span<const double>(u)), 1.0);
    EXPECT_NEAR(jacobian_det(M({{1, 1}, {0, 1}}), std::span<const double>(u)), 4.0 / 9, 1e-15);
    EXPECT_NEAR(fd_jacobian(M({{1, 1}, {0, 1}}), u), 4.0 / 9, 1e-8);

    auto rng = rng_stream(23, 0);
    for (int k = 0; k < 100; ++k) {
        const int m = 2 + static_cast<int>(rng.below(4));
        const auto A = random_cocycle(rng, m, 1 + static_cast<int>(rng.below(6)));
        auto x = rng.simplex_point(m);
        const double exact = jacobian_det(A, std::span<const double>(x));
        EXPECT_NEAR(std::abs(fd_jacobian(A, x)) / exact, 1.0, 1e-5);
    }
}

TEST(Jacobian, Multiplicative) {
    auto rng = rng_stream(24, 0);
    for (int k = 0; k < 200; ++k) {
        const int m = 2 + static_cast<int>(rng.below(4));
        const auto A = random_cocycle(rng, m, 4), B = random_cocycle(rng, m, 4);
        const auto x = rng.simplex_point(m);
        const auto Bx = project(B, std::span<const double>(x));
        const double lhs = jacobian_det(A * B, std::span<const double>(x));
        const double rhs = jacobian_det(A, std::span<const double>(Bx)) * jacobian_det(B, std::span<const double>(x));
        EXPECT_NEAR(lhs / rhs, 1.0, 1e-10);
    }
}

TEST(Quantities, Examples) {
    const auto ones = quantities(M({{1, 1}, {1, 1}}));
    EXPECT_EQ(ones.row, 1.0);
    EXPECT_EQ(ones.col, 1.0);
    const auto q = quantities(M({{2, 1}, {1, 1}}));
    EXPECT_EQ(q.row, 2.0);
    EXPECT_EQ(q.col, 2.0);
    EXPECT_EQ(q.total, 5.0);
    EXPECT_TRUE(std::isinf(quantities(M({{1, 1}, {0, 1}})).row));
}

TEST(Quantities, RowAndColumnMonotonicity) {
    auto rng = rng_stream(25, 0);
    for (int k = 0; k < 10000; ++k) {
        const int m = 2 + static_cast<int>(rng.below(4));
        RauzyMatrix Q(m), A(m);
        for (int i = 1; i <= m; ++i)
            for (int j = 1; j <= m; ++j) {
                Q(i, j) = 1 + static_cast<std::int64_t>(rng.below(20));
                A(i, j) = rng.below(3) == 0 ? 0 : static_cast<std::int64_t>(rng.below(5));
            }
        for (int i = 1; i <= m; ++i) A(i, i) += 1;  // no zero rows or columns
        EXPECT_LE(quantities(A * Q).row, quantities(Q).row * (1 + 1e-12));
        EXPECT_LE(quantities(Q * A).col, quantities(Q).col * (1 + 1e-12));
    }
}

TEST(Contraction, Examples) {
    auto rng = rng_stream(26, 0);
    using BigOnes = IntMatrix<std::int64_t>;
    EXPECT_EQ(contraction_factor(BigOnes::from_rows({{1, 1}, {1, 1}}), 100, rng), 0.0);
    const auto A = M({{2, 1}, {1, 1}});
    const double f = contraction_factor(A, 10000, rng);
    EXPECT_LT(f, 1.0);
    EXPECT_LE(f, birkhoff_bound(A) + 1e-9);
    EXPECT_THROW(contraction_factor(RauzyMatrix::identity(2), 10, rng), validation_error);
}

TEST(Distortion, RatioWithinRowBounds) {
    auto rng = rng_stream(27, 0);
    for (int k = 0; k < 20; ++k) {
        const int m = 2 + static_cast<int>(rng.below(3));
        RauzyMatrix A = random_cocycle(rng, m, 12);
        if (!A.is_positive()) continue;
        SimplexRegion c1, c2;
        for (int v = 0; v < m; ++v) {
            c1.push_back(rng.simplex_point(m));
            c2.push_back(rng.simplex_point(m));
        }
        const auto rep = distortion_bounds(A, c1, c2, 2000, rng);
        EXPECT_TRUE(rep.within) << rep.ratio << " not in [" << rep.lower << ", " << rep.upper << "]";
    }
}

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "errors.hpp"

namespace iet {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

namespace detail {

template <class Int>
Int checked_add(const Int& x, const Int& y) {
    if constexpr (std::is_integral_v<Int>) {
        Int out;
        if (__builtin_add_overflow(x, y, &out))
            throw std::overflow_error("integer matrix: addition overflow");
        return out;
    } else {
        return x + y;
    }
}

template <class Int>
Int checked_mul(const Int& x, const Int& y) {
    if constexpr (std::is_integral_v<Int>) {
        Int out;
        if (__builtin_mul_overflow(x, y, &out))
            throw std::overflow_error("integer matrix: multiplication overflow");
        return out;
    } else {
        return x * y;
    }
}

template <class Int>
double to_double(const Int& x) {
    if constexpr (std::is_arithmetic_v<Int>) {
        return static_cast<double>(x);
    } else {
        return x.template convert_to<double>();
    }
}

}  // namespace detail

/**
 * Dense square integer matrix with 1-based (row, column) access.
 *
 * Used for the renormalization cocycle. With Int = int64_t every product is
 * overflow-checked and throws std::overflow_error; switch to BigInt for long
 * words.
 */
template <class Int>
class IntMatrix {
public:
    IntMatrix() = default;
    explicit IntMatrix(int n) : n_(n), a_(static_cast<std::size_t>(n) * n, Int(0)) {}

    static IntMatrix identity(int n) {
        IntMatrix I(n);
        for (int i = 1; i <= n; ++i) I(i, i) = 1;
        return I;
    }

    /// E_ij: a single 1 at (i, j).
    static IntMatrix unit(int n, int i, int j) {
        IntMatrix E(n);
        E(i, j) = 1;
        return E;
    }

    static IntMatrix from_rows(const std::vector<std::vector<Int>>& rows) {
        IntMatrix M(static_cast<int>(rows.size()));
        for (int i = 1; i <= M.n_; ++i) {
            if (static_cast<int>(rows[i - 1].size()) != M.n_)
                throw validation_error("matrix: ragged rows");
            for (int j = 1; j <= M.n_; ++j) M(i, j) = rows[i - 1][j - 1];
        }
        return M;
    }

    int size() const { return n_; }

    Int& operator()(int i, int j) { return a_[static_cast<std::size_t>(i - 1) * n_ + (j - 1)]; }
    const Int& operator()(int i, int j) const {
        return a_[static_cast<std::size_t>(i - 1) * n_ + (j - 1)];
    }

    friend IntMatrix operator*(const IntMatrix& A, const IntMatrix& B) {
        if (A.n_ != B.n_) throw validation_error("matrix: size mismatch");
        IntMatrix C(A.n_);
        for (int i = 1; i <= A.n_; ++i)
            for (int k = 1; k <= A.n_; ++k) {
                const Int& aik = A(i, k);
                if (aik == 0) continue;
                for (int j = 1; j <= A.n_; ++j)
                    if (B(k, j) != 0)
                        C(i, j) = detail::checked_add(C(i, j), detail::checked_mul(aik, B(k, j)));
            }
        return C;
    }

    friend IntMatrix operator+(const IntMatrix& A, const IntMatrix& B) {
        IntMatrix C(A.n_);
        for (std::size_t k = 0; k < A.a_.size(); ++k) C.a_[k] = detail::checked_add(A.a_[k], B.a_[k]);
        return C;
    }

    friend bool operator==(const IntMatrix&, const IntMatrix&) = default;

    IntMatrix transpose() const {
        IntMatrix T(n_);
        for (int i = 1; i <= n_; ++i)
            for (int j = 1; j <= n_; ++j) T(j, i) = (*this)(i, j);
        return T;
    }

    /// A * v in floating point.
    std::vector<double> apply(std::span<const double> v) const {
        std::vector<double> out(n_, 0.0);
        for (int i = 1; i <= n_; ++i) {
            double s = 0.0;
            for (int j = 1; j <= n_; ++j) {
                const Int& x = (*this)(i, j);
                if (x != 0) s += detail::to_double(x) * v[j - 1];
            }
            out[i - 1] = s;
        }
        return out;
    }

    double entry(int i, int j) const { return detail::to_double((*this)(i, j)); }

    /// |A| = sum of entries.
    double total() const {
        double s = 0.0;
        for (const Int& x : a_) s += detail::to_double(x);
        return s;
    }

    double column_sum(int j) const {
        double s = 0.0;
        for (int i = 1; i <= n_; ++i) s += entry(i, j);
        return s;
    }

    bool is_nonnegative() const {
        for (const Int& x : a_)
            if (x < 0) return false;
        return true;
    }

    bool is_positive() const {
        for (const Int& x : a_)
            if (x <= 0) return false;
        return true;
    }

    bool has_zero_row_or_column() const {
        for (int i = 1; i <= n_; ++i) {
            bool row = true, col = true;
            for (int j = 1; j <= n_; ++j) {
                if ((*this)(i, j) != 0) row = false;
                if ((*this)(j, i) != 0) col = false;
            }
            if (row || col) return true;
        }
        return false;
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    BigInt determinant() const {
        std::vector<BigInt> m(a_.size());
        for (std::size_t k = 0; k < a_.size(); ++k) m[k] = BigInt(a_[k]);
        auto at = [&](int i, int j) -> BigInt& { return m[static_cast<std::size_t>(i) * n_ + j]; };
        BigInt sign = 1, prev = 1;
        for (int k = 0; k < n_; ++k) {
            if (at(k, k) == 0) {
                int swap = -1;
                for (int r = k + 1; r < n_; ++r)
                    if (at(r, k) != 0) { swap = r; break; }
                if (swap < 0) return 0;
                for (int j = 0; j < n_; ++j) std::swap(at(k, j), at(swap, j));
                sign = -sign;
            }
            for (int i = k + 1; i < n_; ++i)
                for (int j = k + 1; j < n_; ++j)
                    at(i, j) = (at(i, j) * at(k, k) - at(i, k) * at(k, j)) / prev;
            prev = at(k, k);
        }
        return n_ == 0 ? BigInt(1) : sign * at(n_ - 1, n_ - 1);
    }

    /// Exact inverse; requires |det| = 1 so that the result is integral.
    IntMatrix inverse_unimodular() const {
        const int n = n_;
        std::vector<BigRational> m(static_cast<std::size_t>(n) * 2 * n);
        auto at = [&](int i, int j) -> BigRational& { return m[static_cast<std::size_t>(i) * 2 * n + j]; };
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) at(i, j) = BigRational(BigInt((*this)(i + 1, j + 1)));
            at(i, n + i) = 1;
        }
        for (int k = 0; k < n; ++k) {
            int piv = -1;
            for (int r = k; r < n; ++r)
                if (at(r, k) != 0) { piv = r; break; }
            if (piv < 0) throw validation_error("matrix: singular");
            if (piv != k)
                for (int j = 0; j < 2 * n; ++j) std::swap(at(k, j), at(piv, j));
            const BigRational p = at(k, k);
            for (int j = 0; j < 2 * n; ++j) at(k, j) /= p;
            for (int i = 0; i < n; ++i) {
                if (i == k || at(i, k) == 0) continue;
                const BigRational f = at(i, k);
                for (int j = 0; j < 2 * n; ++j) at(i, j) -= f * at(k, j);
            }
        }
        IntMatrix inv(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const BigRational& q = at(i, n + j);
                if (denominator(q) != 1) throw validation_error("matrix: not unimodular");
                const BigInt num = numerator(q);
                if constexpr (std::is_integral_v<Int>) {
                    if (num > std::numeric_limits<Int>::max() || num < std::numeric_limits<Int>::min())
                        throw std::overflow_error("matrix inverse: entry overflow");
                    inv(i + 1, j + 1) = static_cast<Int>(num);
                } else {
                    inv(i + 1, j + 1) = Int(num);
                }
            }
        return inv;
    }

    template <class Other>
    IntMatrix<Other> cast() const {
        IntMatrix<Other> out(n_);
        for (int i = 1; i <= n_; ++i)
            for (int j = 1; j <= n_; ++j) out(i, j) = Other((*this)(i, j));
        return out;
    }

    std::string to_string() const {
        std::string s = "[";
        for (int i = 1; i <= n_; ++i) {
            s += i > 1 ? ",[" : "[";
            for (int j = 1; j <= n_; ++j) {
                if (j > 1) s += ',';
                if constexpr (std::is_integral_v<Int>) s += std::to_string((*this)(i, j));
                else s += (*this)(i, j).str();
            }
            s += ']';
        }
        return s + "]";
    }

private:
    int n_ = 0;
    std::vector<Int> a_;
};

/// Renormalization cocycle value; fixed width, overflow-checked.
using RauzyMatrix = IntMatrix<std::int64_t>;
/// Arbitrary precision variant for long cocycle products.
using BigMatrix = IntMatrix<BigInt>;

}  // namespace iet

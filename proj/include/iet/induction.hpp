#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "iet.hpp"
#include "matrix.hpp"
#include "rauzy.hpp"

namespace iet {

/// Position of lambda relative to the hyperplane lambda_{pi^{-1} m} = lambda_m.
enum class Sign { plus, minus, boundary };

inline const char* to_string(Sign s) {
    switch (s) {
        case Sign::plus: return "plus";
        case Sign::minus: return "minus";
        default: return "boundary";
    }
}

inline Sign sign_of(std::span<const double> lam, const Permutation& pi) {
    const int m = pi.size();
    const double winner = lam[pi.inv(m) - 1], last = lam[m - 1];
    if (winner > last) return Sign::plus;
    if (winner < last) return Sign::minus;
    return Sign::boundary;
}

inline Sign sign_set(const IETState& s) { return sign_of(s.lengths().span(), s.perm()); }

/// The operation T applies on each sign set.
inline Op op_for(Sign s) {
    if (s == Sign::boundary) throw boundary_error("induction undefined on the boundary");
    return s == Sign::plus ? Op::a : Op::b;
}

namespace detail {

inline int index_of_value(const int* img, int m, int v) {
    for (int j = 1; j <= m; ++j)
        if (img[j - 1] == v) return j;
    return 0;
}

/// Receives every linear move of an in-place run, so companion vectors can follow.
struct NoVisitor {
    void step(Op, int, const int*) {}
    void skip_a(int, double) {}
    void skip_b(const int*, int, double) {}
};

/**
 * One unnormalized Rauzy step in place. lam and img are 0-based arrays of
 * size m; the visitor sees the step before img changes.
 */
template <class V = NoVisitor>
Op rauzy_step_inplace(double* lam, int* img, int m, V&& vis = V{}) {
    const int p = index_of_value(img, m, m);
    const double w = lam[p - 1], l = lam[m - 1];
    if (w > l) {
        vis.step(Op::a, p, img);
        lam[p - 1] = w - l;
        // rotate positions p+1..m right by one
        const double lm = lam[m - 1];
        const int im = img[m - 1];
        for (int j = m; j > p + 1; --j) {
            lam[j - 1] = lam[j - 2];
            img[j - 1] = img[j - 2];
        }
        lam[p] = lm;
        img[p] = im;
        return Op::a;
    }
    if (l > w) {
        vis.step(Op::b, p, img);
        lam[m - 1] = l - w;
        const int q = img[m - 1];
        for (int j = 1; j <= m; ++j) {
            const int v = img[j - 1];
            if (v > q) img[j - 1] = v < m ? v + 1 : q + 1;
        }
        return Op::b;
    }
    throw boundary_error("rauzy step: tie between competing intervals");
}

struct RunResult {
    Op op;
    std::int64_t n;
};

/**
 * One Zorich step in place (unnormalized): repeats the Rauzy operation applied
 * first until the sign set flips. Whole a-cycles (resp. b-cycles) are skipped
 * in one subtraction: over a full cycle the winner loses the sum of the
 * lengths it beats and everything else returns to its place.
 */
template <class V = NoVisitor>
RunResult zorich_run_inplace(double* lam, int* img, int m, V&& vis = V{}) {
    const int p = index_of_value(img, m, m);
    const double w0 = lam[p - 1], l0 = lam[m - 1];
    if (w0 == l0) throw boundary_error("zorich step: start state on the boundary");
    std::int64_t n = 0;
    if (w0 > l0) {
        // a-run: p = pi^{-1}(m) is invariant, positions p+1..m rotate.
        const int cyc = m - p;
        double s = 0.0;
        for (int j = p + 1; j <= m; ++j) s += lam[j - 1];
        const double ratio = lam[p - 1] / s;
        if (ratio > 4.0) {
            if (ratio > 1e18) throw boundary_error("zorich step: numeric degeneration");
            const double c = std::floor(ratio) - 2.0;
            vis.skip_a(p, c);
            lam[p - 1] -= c * s;
            n += static_cast<std::int64_t>(c) * cyc;
        }
        while (true) {
            const double w = lam[p - 1], l = lam[m - 1];
            if (w > l) {
                rauzy_step_inplace(lam, img, m, vis);
                ++n;
            } else if (w < l) {
                break;
            } else {
                throw boundary_error("zorich step: tie reached mid-step");
            }
        }
        return {Op::a, n};
    }
    // b-run: q = pi(m) is invariant, the values above q rotate.
    const int q = img[m - 1];
    const int cyc = m - q;
    double s = 0.0;
    for (int j = 1; j <= m; ++j)
        if (img[j - 1] > q) s += lam[j - 1];
    const double ratio = lam[m - 1] / s;
    if (ratio > 4.0) {
        if (ratio > 1e18) throw boundary_error("zorich step: numeric degeneration");
        const double c = std::floor(ratio) - 2.0;
        vis.skip_b(img, q, c);
        lam[m - 1] -= c * s;
        n += static_cast<std::int64_t>(c) * cyc;
    }
    while (true) {
        const int pc = index_of_value(img, m, m);
        const double w = lam[pc - 1], l = lam[m - 1];
        if (l > w) {
            rauzy_step_inplace(lam, img, m, vis);
            ++n;
        } else if (l < w) {
            break;
        } else {
            throw boundary_error("zorich step: tie reached mid-step");
        }
    }
    return {Op::b, n};
}

inline std::vector<double> normalized(std::vector<double> v) {
    double t = 0.0;
    for (double x : v) t += x;
    for (double& x : v) x /= t;
    return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Rauzy-Veech map T

struct RauzyStep {
    IETState state;
    Op op;
    RauzyMatrix matrix;  // matrix * (unnormalized output lengths) = input lengths
};

inline RauzyStep rauzy_step(const IETState& s, bool normalize = true) {
    const Sign sg = sign_set(s);
    if (sg == Sign::boundary) throw boundary_error("rauzy step: state on the boundary");
    std::vector<double> lam = s.lengths().values();
    std::vector<int> img = s.perm().image();
    const Op op = detail::rauzy_step_inplace(lam.data(), img.data(), s.size());
    if (normalize) lam = detail::normalized(std::move(lam));
    return {IETState(LengthVector(std::move(lam)), Permutation(std::move(img))), op,
            matrix(s.perm(), op)};
}

// ---------------------------------------------------------------------------
// Letters and words

/// One Zorich step: n consecutive applications of op starting at perm.
struct Letter {
    Op op;
    std::int64_t n;
    Permutation perm;

    Permutation end_perm() const { return apply_power(op, perm, n); }
    friend bool operator==(const Letter&, const Letter&) = default;
};

using Word = std::vector<Letter>;

inline std::string to_string(const Letter& l) {
    return std::string(1, to_char(l.op)) + ":" + std::to_string(l.n) + "@" + l.perm.to_string();
}

inline std::string to_string(const Word& w) {
    std::string out;
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (k) out += '/';
        out += to_string(w[k]);
    }
    return out;
}

inline Letter parse_letter(std::string_view text) {
    const auto colon = text.find(':');
    const auto at = text.find('@');
    if (colon != 1 || at == std::string_view::npos || at < colon + 2)
        throw validation_error("letter: expected 'c:n@perm', got '" + std::string(text) + "'");
    const Op op = parse_op(text[0]);
    std::int64_t n = 0;
    const auto digits = text.substr(colon + 1, at - colon - 1);
    if (digits.size() > 18) throw validation_error("letter: count too large");
    for (char c : digits) {
        if (c < '0' || c > '9') throw validation_error("letter: bad count in '" + std::string(text) + "'");
        n = 10 * n + (c - '0');
    }
    if (n < 1) throw validation_error("letter: count must be >= 1");
    return {op, n, require_irreducible(Permutation::parse(text.substr(at + 1)))};
}

/// B(w1, w2) = 1 iff c1^{n1} pi1 = pi2 and c1 != c2.
inline bool admissible_pair(const Letter& w1, const Letter& w2) {
    return w1.op != w2.op && w1.end_perm() == w2.perm;
}

inline bool is_admissible(const Word& w) {
    for (std::size_t k = 0; k + 1 < w.size(); ++k)
        if (!admissible_pair(w[k], w[k + 1])) return false;
    return true;
}

inline void require_admissible(const Word& w) {
    if (!is_admissible(w)) throw validation_error("word " + to_string(w) + " is not admissible");
}

/// Inverse of to_string(Word); also checks admissibility.
inline Word parse_word(std::string_view text) {
    Word w;
    if (text.empty()) return w;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t next = text.find('/', pos);
        if (next == std::string_view::npos) next = text.size();
        w.push_back(parse_letter(text.substr(pos, next - pos)));
        pos = next + 1;
    }
    require_admissible(w);
    return w;
}

/**
 * A(letter) = A(pi, c) A(c pi, c) ... A(c^{n-1} pi, c), so that the lengths at
 * the start of the letter are A(letter) times the lengths at its end.
 * Full c-cycles contribute E + k * (row of the winner over the beaten block).
 */
template <class Int = std::int64_t>
IntMatrix<Int> letter_matrix(const Letter& l) {
    const Permutation& pi = l.perm;
    const int m = pi.size();
    const int cyc = l.op == Op::a ? m - pi.inv(m) : m - pi(m);
    const std::int64_t full = l.n / cyc, rest = l.n % cyc;
    IntMatrix<Int> M = IntMatrix<Int>::identity(m);
    if (full > 0) {
        if (l.op == Op::a) {
            const int p = pi.inv(m);
            for (int j = p + 1; j <= m; ++j) M(p, j) = Int(full);
        } else {
            const int q = pi(m);
            for (int j = 1; j <= m; ++j)
                if (pi(j) > q) M(m, j) = Int(full);
        }
    }
    Permutation cur = pi;
    for (std::int64_t k = 0; k < rest; ++k) {
        M = M * matrix(cur, l.op).template cast<Int>();
        cur = apply(l.op, cur);
    }
    return M;
}

/// A(w) = A(w_1) ... A(w_n); throws std::overflow_error beyond int64.
inline RauzyMatrix word_matrix(const Word& w, int m = 0) {
    require_admissible(w);
    if (w.empty()) {
        if (m <= 0) throw validation_error("word_matrix: empty word needs a dimension");
        return RauzyMatrix::identity(m);
    }
    RauzyMatrix M = RauzyMatrix::identity(w.front().perm.size());
    for (const auto& l : w) M = M * letter_matrix<std::int64_t>(l);
    return M;
}

inline BigMatrix word_matrix_big(const Word& w, int m = 0) {
    require_admissible(w);
    if (w.empty()) {
        if (m <= 0) throw validation_error("word_matrix: empty word needs a dimension");
        return BigMatrix::identity(m);
    }
    BigMatrix M = BigMatrix::identity(w.front().perm.size());
    for (const auto& l : w) M = M * letter_matrix<BigInt>(l);
    return M;
}

// ---------------------------------------------------------------------------
// Zorich map G

struct ZorichStep {
    IETState state;
    Letter letter;
    double scale;  // |lambda| after the unnormalized step, before normalizing
};

inline ZorichStep zorich_step(const IETState& s) {
    std::vector<double> lam = s.lengths().values();
    std::vector<int> img = s.perm().image();
    const auto run = detail::zorich_run_inplace(lam.data(), img.data(), s.size());
    double t = 0.0;
    for (double x : lam) t += x;
    for (double& x : lam) x /= t;
    return {IETState(LengthVector(std::move(lam)), Permutation(std::move(img))),
            Letter{run.op, run.n, s.perm()}, t};
}

/**
 * t_{c^{-n}}: the G-preimage of s whose letter has count n. Points in the
 * minus set are reached by a-letters, points in the plus set by b-letters.
 */
inline IETState preimage(const IETState& s, std::int64_t n, bool normalize = true) {
    if (n < 1) throw validation_error("preimage: n must be >= 1");
    const Sign sg = sign_set(s);
    if (sg == Sign::boundary) throw boundary_error("preimage: state on the boundary");
    const Op c = sg == Sign::minus ? Op::a : Op::b;
    const Letter l{c, n, apply_power(c, s.perm(), -n)};
    std::vector<double> lam = letter_matrix<double>(l).apply(s.lengths().span());
    if (normalize) lam = detail::normalized(std::move(lam));
    return IETState(LengthVector(std::move(lam)), l.perm);
}

/// t_w (normalized) or T_w pull-back of s along w; no compatibility check.
inline IETState pull_back(const Word& w, const IETState& s, bool normalize = true) {
    if (w.empty()) return s;
    BigMatrix A = word_matrix_big(w);
    std::vector<double> lam = A.apply(s.lengths().span());
    if (normalize) lam = detail::normalized(std::move(lam));
    return IETState(LengthVector(std::move(lam)), w.front().perm);
}

struct Encoding {
    Word word;
    bool complete = true;
    std::string failure;  // set when a boundary was hit
};

/// The first N letters of the symbolic coding of s.
inline Encoding encode(const IETState& s, std::size_t n_letters) {
    Encoding out;
    std::vector<double> lam = s.lengths().values();
    std::vector<int> img = s.perm().image();
    const int m = s.size();
    for (std::size_t k = 0; k < n_letters; ++k) {
        Permutation start(img);
        try {
            const auto run = detail::zorich_run_inplace(lam.data(), img.data(), m);
            out.word.push_back({run.op, run.n, std::move(start)});
        } catch (const boundary_error& e) {
            out.complete = false;
            out.failure = "letter " + std::to_string(k + 1) + ": " + e.what();
            break;
        }
        double t = 0.0;
        for (double x : lam) t += x;
        for (double& x : lam) x /= t;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cylinders

/**
 * Delta(w): states whose coding starts with w. Its closure lies inside the
 * simplex spanned by the normalized columns of A(w).
 */
struct Cylinder {
    Word word;
    BigMatrix matrix;
    std::optional<Permutation> start_perm;   // perm of the first letter
    std::optional<Permutation> target_perm;  // perm after the last letter
    std::vector<std::vector<double>> vertex_images;
};

inline Cylinder cylinder(const Word& w, int m = 0) {
    Cylinder c;
    c.word = w;
    c.matrix = word_matrix_big(w, m);
    if (!w.empty()) {
        c.start_perm = w.front().perm;
        c.target_perm = w.back().end_perm();
    }
    const int dim = c.matrix.size();
    for (int j = 1; j <= dim; ++j) {
        std::vector<double> col(dim);
        const double cs = c.matrix.column_sum(j);
        for (int i = 1; i <= dim; ++i) col[i - 1] = c.matrix.entry(i, j) / cs;
        c.vertex_images.push_back(std::move(col));
    }
    return c;
}

inline bool member(const Cylinder& c, const IETState& s) {
    if (c.word.empty()) return true;
    if (!(s.perm() == *c.start_perm)) return false;
    const auto enc = encode(s, c.word.size());
    return enc.complete && enc.word == c.word;
}

/// min over coordinates i and columns j of A(w)_{ij} / (column sum j).
inline double min_coordinate(const Cylinder& c) {
    double best = 1.0;
    for (const auto& v : c.vertex_images)
        for (double x : v) best = std::min(best, x);
    return best;
}

// ---------------------------------------------------------------------------
// Compatibility and critical index

namespace detail {

inline bool close_rel(std::span<const double> u, std::span<const double> v, double tol) {
    for (std::size_t k = 0; k < u.size(); ++k)
        if (std::abs(u[k] - v[k]) > tol * std::max(1.0, std::abs(v[k]))) return false;
    return true;
}

}  // namespace detail

/**
 * w is compatible with s when pulling s back along w is a genuine backward
 * itinerary: the last letter ends at s's permutation on the sign set it
 * produces, and running G forward from t_w(s) reproduces w and lands on s.
 */
inline bool is_compatible(const Word& w, const IETState& s) {
    if (w.empty()) return true;
    if (!is_admissible(w)) return false;
    const Letter& last = w.back();
    if (!(last.end_perm() == s.perm())) return false;
    const Sign sg = sign_set(s);
    if (sg == Sign::boundary) return false;
    // a-letters end on the minus set, b-letters on the plus set
    if ((last.op == Op::a) != (sg == Sign::minus)) return false;
    const BigMatrix A = word_matrix_big(w);
    std::vector<double> lam = A.apply(s.lengths().span());
    const IETState start(LengthVector(detail::normalized(std::move(lam))), w.front().perm);
    const auto enc = encode(start, w.size());
    if (!enc.complete || !(enc.word == w)) return false;
    IETState cur = start;
    for (std::size_t k = 0; k < w.size(); ++k) cur = zorich_step(cur).state;
    // forward iteration expands rounding errors by at most |A(w)|^2
    const double total = A.total();
    return cur.perm() == s.perm() &&
           detail::close_rel(cur.lengths().span(), s.lengths().normalized().span(),
                             1e-9 + 1e-12 * total * total);
}

inline bool is_compatible(const Letter& l, const IETState& s) { return is_compatible(Word{l}, s); }

/// pi^{-1}(m) on the plus set (a-critical), m on the minus set (b-critical).
inline int critical_index(const IETState& s) {
    const Sign sg = sign_set(s);
    if (sg == Sign::boundary) throw boundary_error("critical_index: state on the boundary");
    const int m = s.size();
    return sg == Sign::plus ? s.perm().inv(m) : m;
}

}  // namespace iet

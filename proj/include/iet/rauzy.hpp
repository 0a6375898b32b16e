#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "permutation.hpp"

namespace iet {

/// The two Rauzy operations.
enum class Op : char { a = 'a', b = 'b' };

inline char to_char(Op op) { return static_cast<char>(op); }
inline Op other(Op op) { return op == Op::a ? Op::b : Op::a; }

inline Op parse_op(char c) {
    if (c == 'a') return Op::a;
    if (c == 'b') return Op::b;
    throw validation_error(std::string("unknown Rauzy operation '") + c + "'");
}

// a: the image-last interval pi^{-1}(m) beats the domain-last interval m.
inline Permutation apply_a(const Permutation& pi) {
    const int m = pi.size();
    const int p = pi.inv(m);
    std::vector<int> out(m);
    for (int j = 1; j <= m; ++j) {
        if (j <= p) out[j - 1] = pi(j);
        else if (j == p + 1) out[j - 1] = pi(m);
        else out[j - 1] = pi(j - 1);
    }
    return Permutation(std::move(out));
}

// b: the domain-last interval m beats the image-last interval.
inline Permutation apply_b(const Permutation& pi) {
    const int m = pi.size();
    const int pm = pi(m);
    std::vector<int> out(m);
    for (int j = 1; j <= m; ++j) {
        const int v = pi(j);
        if (v <= pm) out[j - 1] = v;
        else if (v < m) out[j - 1] = v + 1;
        else out[j - 1] = pm + 1;
    }
    return Permutation(std::move(out));
}

inline Permutation apply_a_inv(const Permutation& sigma) {
    const int m = sigma.size();
    const int p = sigma.inv(m);  // a preserves pi^{-1}(m)
    if (p == m) return sigma;
    std::vector<int> out(m);
    for (int j = 1; j <= m; ++j) {
        if (j <= p) out[j - 1] = sigma(j);
        else if (j < m) out[j - 1] = sigma(j + 1);
        else out[j - 1] = sigma(p + 1);
    }
    return Permutation(std::move(out));
}

inline Permutation apply_b_inv(const Permutation& sigma) {
    const int m = sigma.size();
    const int q = sigma(m);  // b preserves pi(m)
    std::vector<int> out(m);
    for (int j = 1; j <= m; ++j) {
        const int v = sigma(j);
        if (v <= q) out[j - 1] = v;
        else if (v == q + 1) out[j - 1] = m;
        else out[j - 1] = v - 1;
    }
    return Permutation(std::move(out));
}

inline Permutation apply(Op op, const Permutation& pi) {
    return op == Op::a ? apply_a(pi) : apply_b(pi);
}

inline Permutation apply_inv(Op op, const Permutation& pi) {
    return op == Op::a ? apply_a_inv(pi) : apply_b_inv(pi);
}

/// c^n(pi); negative n applies the inverse operation. The a-orbit of pi has
/// length m - pi^{-1}(m), the b-orbit m - pi(m), so n is reduced first.
inline Permutation apply_power(Op op, const Permutation& pi, long long n) {
    const int m = pi.size();
    const long long cyc = op == Op::a ? m - pi.inv(m) : m - pi(m);
    Permutation out = pi;
    if (cyc == 0) return out;
    long long r = n % cyc;
    if (r < 0) r += cyc;
    for (long long k = 0; k < r; ++k) out = apply(op, out);
    return out;
}

/**
 * The matrix A(pi, op) with lambda = A * lambda', lambda' the (unnormalized)
 * lengths of the induced exchange.
 *
 * With p = pi^{-1}(m):
 *   A(pi, a) = sum_{i<=p} E_ii + E_{p,p+1} + sum_{p<i<m} E_{i,i+1} + E_{m,p+1}
 *   A(pi, b) = E + E_{m,p}
 */
inline RauzyMatrix matrix(const Permutation& pi, Op op) {
    const int m = pi.size();
    const int p = pi.inv(m);
    RauzyMatrix A(m);
    if (op == Op::a) {
        for (int i = 1; i <= p; ++i) A(i, i) = 1;
        A(p, p + 1) += 1;
        for (int i = p + 1; i <= m - 1; ++i) A(i, i + 1) = 1;
        A(m, p + 1) += 1;
    } else {
        A = RauzyMatrix::identity(m);
        A(m, p) += 1;
    }
    return A;
}

/// Breadth-first closure of {pi} under a and b, sorted lexicographically.
inline std::vector<Permutation> rauzy_class(const Permutation& pi) {
    require_irreducible(pi);
    std::set<Permutation> seen{pi};
    std::deque<Permutation> queue{pi};
    while (!queue.empty()) {
        Permutation cur = queue.front();
        queue.pop_front();
        for (Op op : {Op::a, Op::b}) {
            Permutation nxt = apply(op, cur);
            if (seen.insert(nxt).second) queue.push_back(nxt);
        }
    }
    return {seen.begin(), seen.end()};
}

struct RauzyEdge {
    Permutation from;
    Permutation to;
    Op label;
    friend bool operator==(const RauzyEdge&, const RauzyEdge&) = default;
};

/// Rauzy graph: an edge pi -> c(pi) labelled c for every vertex and c in {a, b}.
struct RauzyGraph {
    std::vector<Permutation> vertices;  // lexicographic
    std::vector<RauzyEdge> edges;       // by source, a before b

    int index_of(const Permutation& p) const {
        auto it = std::lower_bound(vertices.begin(), vertices.end(), p);
        if (it == vertices.end() || !(*it == p)) return -1;
        return static_cast<int>(it - vertices.begin());
    }

    friend bool operator==(const RauzyGraph&, const RauzyGraph&) = default;
};

inline RauzyGraph rauzy_graph(const Permutation& pi) {
    RauzyGraph g;
    g.vertices = rauzy_class(pi);
    for (const auto& v : g.vertices)
        for (Op op : {Op::a, Op::b}) g.edges.push_back({v, apply(op, v), op});
    return g;
}

inline std::string to_dot(const RauzyGraph& g) {
    std::ostringstream os;
    os << "digraph rauzy {\n";
    for (const auto& v : g.vertices) os << "  \"" << v.to_string() << "\";\n";
    for (const auto& e : g.edges)
        os << "  \"" << e.from.to_string() << "\" -> \"" << e.to.to_string() << "\" [label=\""
           << to_char(e.label) << "\"];\n";
    os << "}\n";
    return os.str();
}

/// Reads the subset of DOT produced by to_dot.
inline RauzyGraph parse_dot(const std::string& text) {
    static const std::regex node_re(R"re(^\s*"([0-9,]+)"\s*;\s*$)re");
    static const std::regex edge_re(
        R"re(^\s*"([0-9,]+)"\s*->\s*"([0-9,]+)"\s*\[\s*label\s*=\s*"([ab])"\s*\]\s*;\s*$)re");
    RauzyGraph g;
    std::set<Permutation> verts;
    std::istringstream is(text);
    std::string line;
    bool opened = false;
    while (std::getline(is, line)) {
        std::smatch mt;
        if (line.find("digraph") != std::string::npos) { opened = true; continue; }
        if (line.find('}') != std::string::npos) break;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (std::regex_match(line, mt, edge_re)) {
            RauzyEdge e{Permutation::parse(mt[1].str()), Permutation::parse(mt[2].str()),
                        parse_op(mt[3].str()[0])};
            verts.insert(e.from);
            verts.insert(e.to);
            g.edges.push_back(std::move(e));
        } else if (std::regex_match(line, mt, node_re)) {
            verts.insert(Permutation::parse(mt[1].str()));
        } else {
            throw validation_error("dot: cannot parse line '" + line + "'");
        }
    }
    if (!opened) throw validation_error("dot: missing digraph header");
    g.vertices.assign(verts.begin(), verts.end());
    return g;
}

/// Least l >= 1 with op^l(pi) = pi.
inline int cycle_length(const Permutation& pi, Op op) {
    Permutation cur = apply(op, pi);
    int l = 1;
    while (!(cur == pi)) {
        cur = apply(op, cur);
        ++l;
    }
    return l;
}

/**
 * Least M such that every ordered pair of vertices is joined by a directed
 * path of length exactly n, for every n >= M (the exponent of the adjacency
 * matrix). Throws if the graph is not primitive.
 */
inline int connecting_diameter(const std::vector<Permutation>& cls) {
    const int n = static_cast<int>(cls.size());
    std::map<Permutation, int> idx;
    for (int i = 0; i < n; ++i) idx[cls[i]] = i;
    std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
    for (int i = 0; i < n; ++i)
        for (Op op : {Op::a, Op::b}) {
            auto it = idx.find(apply(op, cls[i]));
            if (it == idx.end()) throw validation_error("connecting_diameter: set not closed");
            adj[i][it->second] = 1;
        }
    // Out-degree >= 1 everywhere, so once the power is all-positive it stays so.
    auto power = adj;
    const int bound = (n - 1) * (n - 1) + 1;  // Wielandt
    for (int k = 1; k <= bound; ++k) {
        bool full = true;
        for (int i = 0; i < n && full; ++i)
            for (int j = 0; j < n; ++j)
                if (!power[i][j]) { full = false; break; }
        if (full) return k;
        std::vector<std::vector<char>> next(n, std::vector<char>(n, 0));
        for (int i = 0; i < n; ++i)
            for (int l = 0; l < n; ++l)
                if (power[i][l])
                    for (int j = 0; j < n; ++j)
                        if (adj[l][j]) next[i][j] = 1;
        power = std::move(next);
    }
    throw validation_error("connecting_diameter: graph is not primitive");
}

}  // namespace iet

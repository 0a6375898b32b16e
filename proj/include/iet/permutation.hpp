#pragma once

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace iet {

/**
 * A permutation of {1..m} in one-line notation: image()[j-1] = pi(j).
 *
 * Symbols are 1-based throughout the library so that formulas read the same
 * way as the combinatorics of Rauzy induction. Construction checks that the
 * images form a bijection; irreducibility is a separate predicate since the
 * Rauzy operations are also meaningful on reducible inputs.
 */
class Permutation {
public:
    Permutation() = default;

    explicit Permutation(std::vector<int> image) : image_(std::move(image)) {
        const int m = static_cast<int>(image_.size());
        if (m == 0) throw validation_error("permutation: empty");
        inverse_.assign(m, 0);
        for (int j = 1; j <= m; ++j) {
            const int v = image_[j - 1];
            if (v < 1 || v > m || inverse_[v - 1] != 0)
                throw validation_error("permutation: not a bijection of {1.." +
                                       std::to_string(m) + "}");
            inverse_[v - 1] = j;
        }
    }

    /// Parses "4321" (m < 10) or a comma separated list "10,1,2,...".
    static Permutation parse(std::string_view text) {
        std::vector<int> image;
        const bool commas = text.find(',') != std::string_view::npos;
        if (commas) {
            std::size_t pos = 0;
            while (pos <= text.size()) {
                std::size_t next = text.find(',', pos);
                if (next == std::string_view::npos) next = text.size();
                auto token = text.substr(pos, next - pos);
                if (token.empty()) throw validation_error("permutation: empty field");
                int v = 0;
                for (char c : token) {
                    if (!std::isdigit(static_cast<unsigned char>(c)))
                        throw validation_error("permutation: bad character in '" +
                                               std::string(text) + "'");
                    v = 10 * v + (c - '0');
                }
                image.push_back(v);
                pos = next + 1;
            }
        } else {
            for (char c : text) {
                if (c < '1' || c > '9')
                    throw validation_error("permutation: bad character in '" +
                                           std::string(text) + "'");
                image.push_back(c - '0');
            }
        }
        return Permutation(std::move(image));
    }

    static Permutation identity(int m) {
        std::vector<int> image(m);
        for (int j = 0; j < m; ++j) image[j] = j + 1;
        return Permutation(std::move(image));
    }

    /// The reversal (m m-1 ... 1), the standard root of a hyperelliptic class.
    static Permutation reversal(int m) {
        std::vector<int> image(m);
        for (int j = 0; j < m; ++j) image[j] = m - j;
        return Permutation(std::move(image));
    }

    int size() const { return static_cast<int>(image_.size()); }

    /// pi(j), 1-based.
    int operator()(int j) const { return image_[j - 1]; }
    /// pi^{-1}(k), 1-based.
    int inv(int k) const { return inverse_[k - 1]; }

    const std::vector<int>& image() const { return image_; }

    /// True iff pi{1..k} = {1..k} only for k = m.
    bool is_irreducible() const {
        int running_max = 0;
        const int m = size();
        for (int k = 1; k < m; ++k) {
            running_max = std::max(running_max, image_[k - 1]);
            if (running_max == k) return false;
        }
        return true;
    }

    std::string to_string() const {
        std::string out;
        const bool wide = size() >= 10;
        for (int j = 0; j < size(); ++j) {
            if (wide && j > 0) out += ',';
            out += std::to_string(image_[j]);
        }
        return out;
    }

    friend bool operator==(const Permutation& a, const Permutation& b) {
        return a.image_ == b.image_;
    }
    friend auto operator<=>(const Permutation& a, const Permutation& b) {
        return a.image_ <=> b.image_;
    }

private:
    std::vector<int> image_;
    std::vector<int> inverse_;
};

inline Permutation require_irreducible(Permutation p) {
    if (!p.is_irreducible())
        throw validation_error("permutation " + p.to_string() + " is reducible");
    return p;
}

}  // namespace iet

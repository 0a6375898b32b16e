#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "zippered.hpp"

namespace iet {

/// 17 significant digits: enough for every double to read back bit-identical.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Shorter form for human-facing summaries.
inline std::string format_short(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", x);
    return buf;
}

inline std::string format_vector(const std::vector<double>& v, bool full = false) {
    std::string s = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += full ? format_double(v[i]) : format_short(v[i]);
    }
    return s + ")";
}

/// Comma-separated reals, e.g. "0.7,0.3".
inline std::vector<double> parse_reals(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw validation_error("not a number: '" + item + "'");
        }
        while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
        if (used != item.size()) throw validation_error("not a number: '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw validation_error("empty number list");
    return out;
}

/// CSV writer with a header row and 17-digit numbers.
inline void write_csv(std::ostream& os, const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows) {
    for (std::size_t j = 0; j < columns.size(); ++j) os << (j ? "," : "") << columns[j];
    os << '\n';
    for (const auto& row : rows) {
        for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << format_double(row[j]);
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Zippered rectangle records

/**
 * {"lambda": [...], "h": [...], "a": [...], "perm": "4321", "area": x}.
 * Doubles are written in shortest round-trip form (at most 17 digits), so a
 * record reads back bit-identical.
 */
inline nlohmann::json to_json(const ZipperedRectangle& z) {
    nlohmann::json j;
    j["lambda"] = z.lambda;
    j["h"] = z.h;
    j["a"] = z.a;
    j["perm"] = z.perm.to_string();
    j["area"] = area(z);
    return j;
}

inline ZipperedRectangle zr_from_json(const nlohmann::json& j) {
    try {
        ZipperedRectangle z;
        z.lambda = j.at("lambda").get<std::vector<double>>();
        z.h = j.at("h").get<std::vector<double>>();
        z.a = j.at("a").get<std::vector<double>>();
        z.perm = Permutation::parse(j.at("perm").get<std::string>());
        const int m = z.perm.size();
        if (static_cast<int>(z.lambda.size()) != m || static_cast<int>(z.h.size()) != m ||
            static_cast<int>(z.a.size()) != m)
            throw validation_error("zippered record: vector sizes differ from the permutation");
        for (double x : z.lambda)
            if (!(x > 0.0) || !std::isfinite(x)) throw validation_error("zippered record: lengths must be positive");
        return z;
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("zippered record: ") + e.what());
    }
}

inline std::string dump_record(const ZipperedRectangle& z) { return to_json(z).dump(); }

inline ZipperedRectangle parse_record(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("zippered record: ") + e.what());
    }
    return zr_from_json(j);
}

// ---------------------------------------------------------------------------
// Config files

/**
 * One `key = value` per line; `#` starts a comment; blank lines ignored.
 * Keys must be unique.
 */
inline std::map<std::string, std::string> parse_config(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw validation_error("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) throw validation_error("config line " + std::to_string(lineno) + ": empty key");
        if (!out.emplace(key, value).second)
            throw validation_error("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return out;
}

}  // namespace iet

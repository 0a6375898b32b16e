// Command-line front end. Exit codes: 0 success, 2 invalid input, 3 boundary hit.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <iet/density.hpp>
#include <iet/experiments.hpp>
#include <iet/induction.hpp>
#include <iet/io.hpp>
#include <iet/rauzy.hpp>
#include <iet/zippered.hpp>

namespace {

using namespace iet;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Option registry: every bound value can be echoed back as text.

std::string text_of(const std::string& v) { return v; }
std::string text_of(double v) { return format_double(v); }
std::string text_of(std::int64_t v) { return std::to_string(v); }
std::string text_of(int v) { return std::to_string(v); }
std::string text_of(std::uint64_t v) { return std::to_string(v); }
std::string text_of(bool v) { return v ? "true" : "false"; }

struct Command {
    CLI::App* app = nullptr;
    std::vector<std::pair<std::string, std::function<std::string()>>> echo;
    std::function<int()> run;

    template <class T>
    CLI::Option* option(const std::string& name, T& var, const std::string& help) {
        auto* o = app->add_option("--" + name, var, help)->capture_default_str();
        echo.emplace_back(name, [&var] { return text_of(var); });
        return o;
    }

    CLI::Option* flag(const std::string& name, bool& var, const std::string& help, const std::string& extra = "") {
        auto* o = app->add_flag("--" + name + extra, var, help);
        echo.emplace_back(name, [&var] { return text_of(var); });
        return o;
    }

    /// Resolved configuration, defaults included; the config path itself is not echoed.
    std::map<std::string, std::string> resolved() const {
        std::map<std::string, std::string> out;
        for (const auto& [k, get] : echo)
            if (k != "config") out[k] = get();
        return out;
    }
};

// ---------------------------------------------------------------------------
// Shared values

struct Common {
    std::string config;
    std::string out;
    std::string manifest;
    int threads = 0;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot write '" + path + "'");
    out << text;
}

/// Git blob id: sha1("blob <size>\0" + content).
std::string git_hash(const std::string& content) {
    const std::string data = "blob " + std::to_string(content.size()) + '\0' + content;
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
        s += hex[md[i] >> 4];
        s += hex[md[i] & 15];
    }
    return s;
}

std::string canonical(const std::map<std::string, std::string>& cfg) {
    std::string s;
    for (const auto& [k, v] : cfg)
        if (k != "threads" && k != "out" && k != "manifest") s += k + " = " + v + "\n";
    return s;
}

ChainOptions chain_options(std::uint64_t seed, std::int64_t burn_in, int replicas, int threads) {
    if (replicas < 1) throw validation_error("replicas must be >= 1");
    if (burn_in < 0) throw validation_error("burn-in must be >= 0");
    ChainOptions o;
    o.seed = seed;
    o.burn_in = burn_in;
    o.replicas = replicas;
    o.threads = threads;
    return o;
}

IETState make_state(const std::string& perm, const std::string& lambda) {
    const auto pi = Permutation::parse(perm);
    return IETState(LengthVector(parse_reals(lambda)), pi);
}

/// Rows of preformatted cells.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string csv() const {
        std::string s;
        for (std::size_t j = 0; j < header.size(); ++j) s += (j ? "," : "") + header[j];
        s += '\n';
        for (const auto& r : rows) {
            for (std::size_t j = 0; j < r.size(); ++j) s += (j ? "," : "") + r[j];
            s += '\n';
        }
        return s;
    }
};

// ---------------------------------------------------------------------------
// Output bookkeeping for one run

struct Run {
    Run(const Command* c, const Common* k) : cmd(c), common(k) {}

    const Command* cmd;
    const Common* common;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    std::vector<std::string> outputs;
    json summary = json::object();
    std::optional<std::uint64_t> seed;

    void write_output(const std::string& path, const std::string& text) {
        write_file(path, text);
        outputs.push_back(path);
    }

    void emit_csv(const Table& t) {
        if (common->out.empty()) return;
        write_output(common->out, t.csv());
    }

    /// Written when an output file exists or a manifest path was given.
    void finish() {
        std::string path = common->manifest;
        if (path.empty() && !common->out.empty()) path = common->out + ".manifest.json";
        if (path.empty()) return;
        const auto cfg = cmd->resolved();
        json j;
        j["command"] = cmd->app->get_name();
        j["config"] = cfg;
        j["inputs_sha1"] = git_hash(canonical(cfg));
        if (seed) j["seed"] = *seed;
        j["rng"] = {{"algorithm", rng_algorithm}, {"version", rng_version}};
        j["outputs"] = outputs;
        j["summary"] = summary;
        j["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_file(path, j.dump(2) + "\n");
    }
};

// ---------------------------------------------------------------------------
// Commands

struct Cli {
    CLI::App app{"Interval exchange transformations: Rauzy-Veech and Zorich induction, zippered rectangles,\n"
                 "invariant densities and Monte Carlo experiments.",
                 "iet"};
    std::map<std::string, Command> commands;
    std::map<std::string, Common> commons;

    Command& add(const std::string& name, const std::string& help) {
        Command& c = commands[name];
        c.app = app.add_subcommand(name, help);
        Common& k = commons[name];
        c.option("config", k.config, "key = value file (or a run manifest); flags given on the command line win");
        c.option("out", k.out, "output file (CSV unless stated otherwise)");
        c.option("manifest", k.manifest, "run manifest path (default: <out>.manifest.json)");
        c.option("threads", k.threads, "worker cap for replica runs (0 = all cores)")->check(CLI::NonNegativeNumber);
        return c;
    }

    // values bound to options
    std::string perm = "21", lambda, word, q = "a:1@21/b:1@21", delta, record, record_out, map = "F", phi = "lambda_1",
                psi = "lambda_1", lengths;
    std::int64_t steps = 1, N = 1000000, burn_in = 10000, transitions = 0, grid = 0, n_max = 30;
    int bins = 50, replicas = 32, k = 8, r = 0, K = 1;
    double x = 0.0, eps = 0.1, T = 100.0, theta = 0.5, time = 0.0;
    std::uint64_t seed = 0;
    bool normalize = true, raw = false;

    Cli() {
        app.require_subcommand(1);
        app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

        {
            auto& c = add("rauzy-class", "list the Rauzy class of a permutation");
            c.option("perm", perm, "irreducible permutation, one-line notation")->required();
            c.run = [this, &c] {
                Run run(&c, &commons["rauzy-class"]);
                Table t{{"perm"}, {}};
                for (const auto& p : rauzy_class(Permutation::parse(perm))) {
                    std::cout << p.to_string() << '\n';
                    t.rows.push_back({p.to_string()});
                }
                run.summary["size"] = t.rows.size();
                run.emit_csv(t);
                run.finish();
                return 0;
            };
        }
        {
            auto& c = add("rauzy-graph", "Rauzy graph of a class, optionally as a DOT file");
            static std::string dot;
            c.option("perm", perm, "irreducible permutation")->required();
            c.option("dot", dot, "write the graph in DOT format to this file");
            c.run = [this, &c] {
                Run run(&c, &commons["rauzy-graph"]);
                const auto g = rauzy_graph(Permutation::parse(perm));
                Table t{{"from", "op", "to"}, {}};
                for (const auto& e : g.edges) {
                    std::cout << e.from.to_string() << " -" << to_char(e.label) << "-> " << e.to.to_string() << '\n';
                    t.rows.push_back({e.from.to_string(), std::string(1, to_char(e.label)), e.to.to_string()});
                }
                std::cout << "vertices=" << g.vertices.size() << " edges=" << g.edges.size() << '\n';
                if (!dot.empty()) run.write_output(dot, to_dot(g));
                run.summary["vertices"] = g.vertices.size();
                run.summary["edges"] = g.edges.size();
                run.emit_csv(t);
                run.finish();
                return 0;
            };
        }
        {
            auto& c = add("orbit", "orbit of a point under an IET");
            c.option("perm", perm, "irreducible permutation")->required();
            c.option("lambda", lambda, "lengths, comma separated")->required();
            c.option("x", x, "starting point in [0, |lambda|)");
            c.option("steps", steps, "number of iterates")->check(CLI::NonNegativeNumber);
            c.run = [this, &c] {
                Run run(&c, &commons["orbit"]);
                const auto s = make_state(perm, lambda);
                Table t{{"k", "x"}, {}};
                const auto pts = orbit(s, x, static_cast<std::size_t>(steps));
                for (std::size_t i = 0; i < pts.size(); ++i) {
                    std::cout << i << ' ' << format_short(pts[i]) << '\n';
                    t.rows.push_back({std::to_string(i), format_double(pts[i])});
                }
                run.emit_csv(t);
                run.finish();
                return 0;
            };
        }
        {
            auto& c = add("induce", "Rauzy-Veech steps (map T)");
            c.option("perm", perm, "irreducible permutation")->required();
            c.option("lambda", lambda, "lengths, comma separated")->required();
            c.option("steps", steps, "number of steps")->check(CLI::NonNegativeNumber);
            c.flag("normalize", normalize, "renormalize to |lambda| = 1 after each step", ",!--no-normalize");
            c.run = [this, &c] {
                Run run(&c, &commons["induce"]);
                auto s = make_state(perm, lambda);
                Table t{{"step", "op", "perm"}, {}};
                for (int i = 1; i <= s.size(); ++i) t.header.push_back("lambda_" + std::to_string(i));
                for (std::int64_t k = 1; k <= steps; ++k) {
                    const auto st = rauzy_step(s, normalize);
                    s = st.state;
                    std::cout << format_vector(s.lengths().values()) << " perm=" << s.perm().to_string()
                              << " op=" << to_char(st.op) << '\n';
                    std::vector<std::string> row{std::to_string(k), std::string(1, to_char(st.op)), s.perm().to_string()};
                    for (double v : s.lengths().values()) row.push_back(format_double(v));
                    t.rows.push_back(std::move(row));
                }
                run.emit_csv(t);
                run.finish();
                return 0;
            };
        }
        {
            auto& c = add("zorich", "Zorich steps (map G) with their letters");
            c.option("perm", perm, "irreducible permutation")->required();
            c.option("lambda", lambda, "lengths, comma separated")->required();
            c.option("steps", steps, "number of steps")->check(CLI::NonNegativeNumber);
            c.run = [this, &c] {
                Run run(&c, &commons["zorich"]);
                auto s = make_state(perm, lambda);
                s = IETState(s.lengths().normalized(), s.perm());
                Table t{{"step", "letter", "perm", "scale"}, {}};
                for (int i = 1; i <= s.size(); ++i) t.header.push_back("lambda_" + std::to_string(i));
                for (std::int64_t k = 1; k <= steps; ++k) {
                    const auto st = zorich_step(s);
                    s = st.state;
                    std::cout << format_vector(s.lengths().values()) << " letter=" << to_string(st.letter) << '\n';
                    std::vector<std::string> row{std::to_string(k), to_string(st.letter), s.perm().to_string(),
                                                 format_double(st.scale)};
                    for (double v : s.lengths().values()) row.push_back(format_double(v));
                    t.rows.push_back(std::move(row));
                }
                run.emit_csv(t);
                run.finish();
                return 0;
            };
        }
        {
            auto& c = add("cylinder", "matrix and vertices of a cylinder; membership of a state");
            c.option("word", word, "word such as a:2@21/b:1@21")->required();
            c.option("perm", perm, "permutation of a state to test");
            c.option("lambda", lambda, "lengths of a state to test");
            c.run = [this, &c] {
                Run run(&c, &commons["cylinder"]);
                const auto w = parse_word(word);
                const auto cyl = cylinder(w);
                std::cout << "matrix:\n";
                const int m = cyl.matrix.size();
                for (int i = 1; i <= m; ++i) {
                    for (int j = 1; j <= m; ++j) std::cout << (j > 1 ? " " : "  ") << cyl.matrix(i, j);
                    std::cout << '\n';
                }
                Table t{{"vertex"}, {}};
                for (int i = 1; i <= m; ++i) t.header.push_back("lambda_" + std::to_string(i));
                for (int j = 0; j < m; ++j) {
                    std::cout << "vertex " << j + 1 << ' ' << format_vector(cyl.vertex_images[j]) << '\n';
                    std::vector<std::string> row{std::to_string(j + 1)};
                    for (double v : cyl.vertex_images[j]) row.push_back(format_double(v));
                    t.rows.push_back(std::move(row));
                }
                std::cout << "start=" << cyl.start_perm->to_string() << " target=" << cyl.target_perm->to_string()
                          << " min_coordinate=" << format_short(min_coordinate(cyl)) << '\n';
                run.summary["min_coordinate"] = min_coordinate(cyl);
                if (!lambda.empty()) {
                    const auto s = make_state(perm, lambda);
                    const bool in = member(cyl, IETState(s.lengths().normalized(), s.perm()));
                    const bool comp = is_compatible(w, s);
                    std::cout << "member=" << (in ? "yes" : "no") << " compatible=" << (comp ? "yes" : "no") << '\n';
                    run.summary["member"] = in;
                    run.summary["compatible"] = comp;
                }
                run.emit_csv(t);
                run.finish();
                return 0;
            };
        }
        {
            auto& c = add("density", "cone volumes r, r+, r-, the density and transition probabilities");
            c.option("perm", perm, "irreducible permutation")->required();
            c.option("lambda", lambda, "lengths of the state to evaluate");
            c.option("transitions", transitions, "print p_n for n = 1..N and the tail past N")
                ->check(CLI::NonNegativeNumber);
            c.option("grid", grid, "with --out: CSV of r+ and r- on a grid of this resolution")
                ->check(CLI::NonNegativeNumber);
            c.run = [this, &c] {
                Run run(&c, &commons["density"]);
                const auto pi = Permutation::parse(perm);
                if (!lambda.empty()) {
                    const auto s = make_state(perm, lambda);
                    const double rr = iet::r(s), rp = r_plus(s), rm = r_minus(s);
                    std::cout << "sign=" << to_string(sign_set(s)) << " r=" << format_short(rr)
                              << " r_plus=" << format_short(rp) << " r_minus=" << format_short(rm);
                    run.summary["r"] = rr;
                    run.summary["r_plus"] = rp;
                    run.summary["r_minus"] = rm;
                    if (sign_set(s) != Sign::boundary) {
                        std::cout << " rho=" << format_short(density(s));
                        run.summary["rho"] = density(s);
                    }
                    std::cout << '\n';
                    if (transitions > 0) {
                        double sum = 0.0;
                        for (std::int64_t n = 1; n <= transitions; ++n) {
                            const double p = transition_p(s, n);
                            sum += p;
                            std::cout << "p_" << n << '=' << format_short(p) << '\n';
                        }
                        const double tl = tail(s, transitions);
                        std::cout << "tail=" << format_short(tl) << " sum+tail=" << format_short(sum + tl) << '\n';
                        run.summary["tail"] = tl;
                    }
                } else if (transitions > 0) {
                    throw validation_error("--transitions needs --lambda");
                }
                if (grid > 0) {
                    if (common().out.empty()) throw validation_error("--grid needs --out");
                    std::vector<std::vector<double>> pts;
                    const int m = pi.size();
                    // interior points of the simplex with denominator grid
                    std::vector<int> idx(m, 1);
                    std::function<void(int, int)> rec = [&](int pos, int left) {
                        if (pos == m - 1) {
                            if (left < 1) return;
                            idx[pos] = left;
                            std::vector<double> lam(m);
                            for (int i = 0; i < m; ++i) lam[i] = static_cast<double>(idx[i]) / static_cast<double>(grid);
                            pts.push_back(std::move(lam));
                            return;
                        }
                        for (int v = 1; v <= left - (m - 1 - pos); ++v) {
                            idx[pos] = v;
                            rec(pos + 1, left - v);
                        }
                    };
                    rec(0, static_cast<int>(grid));
                    std::ostringstream os;
                    write_density_csv(os, pi, pts);
                    run.write_output(common().out, os.str());
                    run.summary["grid_points"] = pts.size();
                }
                run.finish();
                return 0;
            };
        }
        {
            auto& c = add("zr-validate", "check the equations and inequalities of a zippered rectangle");
            c.option("record", record, "JSON record with lambda, h, a, perm");
            c.option("perm", perm, "permutation (with --lambda and --delta)");
            c.option("lambda", lambda, "lengths");
            c.option("delta", delta, "delta coordinates, comma separated");
            c.run = [this, &c] {
                Run run(&c, &commons["zr-validate"]);
                const auto z = load_zr(false);
                const auto rep = validate(z);
                std::cout << (rep.valid ? "valid" : "invalid") << " area=" << format_short(area(z)) << '\n';
                for (const auto& v : rep.violations) std::cout << "violation: " << v << '\n';
                run.summary["valid"] = rep.valid;
                run.summary["violations"] = rep.violations;
                if (!common().out.empty()) run.write_output(common().out, dump_record(z) + "\n");
                run.finish();
                return rep.valid ? 0 : 2;
            };
        }
        {
            auto& c = add("zr-flow", "iterate U, S, F or the flow P^t on a zippered rectangle");
            c.option("record", record, "JSON record to start from");
            c.option("perm", perm, "permutation (random start with --seed, or with --lambda and --delta)");
            c.option("lambda", lambda, "lengths");
            c.option("delta", delta, "delta coordinates");
            c.option("seed", seed, "seed for a random unit-area start");
            c.option("map", map, "U, S, F or P")->check(CLI::IsMember({"U", "S", "F", "P"}));
            c.option("time", time, "flow time for --map P");
            c.option("steps", steps, "number of iterations")->check(CLI::NonNegativeNumber);
            c.option("record-out", record_out, "write the final state as a JSON record");
            c.run = [this, &c] {
                Run run(&c, &commons["zr-flow"]);
                auto z = load_zr(true);
                if (c.app->get_option("--seed")->count() > 0) run.seed = seed;
                Table t{{"step", "perm", "flow_time", "area", "lambda_dot_h", "valid"}, {}};
                const int m = z.size();
                for (const char* v : {"lambda_", "h_", "a_"})
                    for (int i = 1; i <= m; ++i) t.header.push_back(v + std::to_string(i));
                double clock = 0.0;
                auto log_row = [&](std::int64_t k) {
                    double dot = 0.0;
                    for (int i = 0; i < m; ++i) dot += z.lambda[i] * z.h[i];
                    const bool ok = validate(z).valid;
                    std::cout << k << ' ' << z.perm.to_string() << " lambda=" << format_vector(z.lambda)
                              << " area=" << format_short(area(z)) << " valid=" << (ok ? "yes" : "no") << '\n';
                    std::vector<std::string> row{std::to_string(k), z.perm.to_string(), format_double(clock),
                                                 format_double(area(z)), format_double(dot), ok ? "1" : "0"};
                    for (const auto* v : {&z.lambda, &z.h, &z.a})
                        for (double x : *v) row.push_back(format_double(x));
                    t.rows.push_back(std::move(row));
                };
                log_row(0);
                for (std::int64_t k = 1; k <= steps; ++k) {
                    if (map == "U") {
                        z = map_u(z);
                    } else if (map == "S") {
                        clock += roof(z);
                        z = section_map_s(z);
                    } else if (map == "F") {
                        const auto st = zorich_lift_step(z);
                        clock += st.flow_time;
                        z = st.state;
                    } else {
                        clock += time;
                        z = flow(z, time);
                    }
                    log_row(k);
                }
                if (!record_out.empty()) run.write_output(record_out, dump_record(z) + "\n");
                run.emit_csv(t);
                run.finish();
                return 0;
            };
        }
        {
            auto& c = add("invariant-hist", "histogram of lambda_1 along G-orbits against the exact density");
            c.option("perm", perm, "root permutation");
            c.option("N", N, "number of G iterates")->check(CLI::PositiveNumber);
            c.option("bins", bins, "number of bins on [0, 1]")->check(CLI::PositiveNumber);
            c.option("burn-in", burn_in, "G steps discarded per replica")->check(CLI::NonNegativeNumber);
            c.option("replicas", replicas, "independent orbits")->check(CLI::PositiveNumber);
            c.option("seed", seed, "random seed")->required();
            c.run = [this, &c] {
                Run run(&c, &commons["invariant-hist"]);
                run.seed = seed;
                const auto h = sample_invariant(Permutation::parse(perm), N, bins,
                                                chain_options(seed, burn_in, replicas, common().threads));
                Table t{{"bin_lo", "bin_hi", "empirical", "exact"}, {}};
                for (int b = 0; b < bins; ++b)
                    t.rows.push_back({format_double(h.edges[b]), format_double(h.edges[b + 1]),
                                      format_double(h.empirical[b]), format_double(h.exact[b])});
                std::cout << "sup_relative_deviation=" << format_short(h.sup_relative_deviation)
                          << " reference=" << h.reference << " restarts=" << h.restarts << '\n';
                run.summary["sup_relative_deviation"] = h.sup_relative_deviation;
                run.summary["reference"] = h.reference;
                run.summary["restarts"] = h.restarts;
                run.emit_csv(t);
                run.finish();
                return 0;
            };
        }
        {
            auto& c = add("correlation", "correlation decay of two observables under G^2 on the plus set");
            c.option("perm", perm, "root permutation");
            c.option("phi", phi, "observable: lambda_i, log_lambda_i");
            c.option("psi", psi, "second observable");
            c.option("n-max", n_max, "largest lag")->check(CLI::NonNegativeNumber);
            c.option("N", N, "G^2 samples in total")->check(CLI::PositiveNumber);
            c.option("burn-in", burn_in, "G steps discarded per replica")->check(CLI::NonNegativeNumber);
            c.option("replicas", replicas, "independent orbits (the stderr is their spread)")
                ->check(CLI::PositiveNumber);
            c.flag("normalize", normalize, "report correlations instead of covariances");
            c.option("seed", seed, "random seed")->required();
            c.run = [this, &c] {
                Run run(&c, &commons["correlation"]);
                run.seed = seed;
                const auto s = correlation_decay(observables::by_name(phi), observables::by_name(psi),
                                                 Permutation::parse(perm), static_cast<int>(n_max), N,
                                                 chain_options(seed, burn_in, replicas, common().threads));
                const auto& est = normalize ? s.correlation : s.covariance;
                const auto& se = normalize ? s.corr_stderr : s.cov_stderr;
                Table t{{"n", "estimate", "stderr"}, {}};
                for (std::size_t n = 0; n < est.size(); ++n)
                    t.rows.push_back({std::to_string(n), format_double(est[n]), format_double(se[n])});
                std::cout << "corr(0)=" << format_short(s.correlation[0])
                          << " corr(n_max)=" << format_short(s.correlation.back())
                          << " dominated_from=" << dominated_from(s) << '\n';
                run.summary["dominated_from"] = dominated_from(s);
                run.summary["restarts"] = s.restarts;
                run.emit_csv(t);
                run.finish();
                return 0;
            };
        }
        {
            auto& c = add("return-times", "survival of the first visit of G^2 to a cylinder");
            c.option("perm", perm, "root permutation");
            c.option("q", q, "positive anchor word starting on the plus set");
            c.option("n-max", n_max, "largest n")->check(CLI::NonNegativeNumber);
            c.option("N", N, "number of starts")->check(CLI::PositiveNumber);
            c.option("eps", eps, "exponent for the exponential moment of the flow time");
            c.option("burn-in", burn_in, "G steps discarded per replica")->check(CLI::NonNegativeNumber);
            c.option("replicas", replicas, "independent orbits")->check(CLI::PositiveNumber);
            c.option("seed", seed, "random seed")->required();
            c.run = [this, &c] {
                Run run(&c, &commons["return-times"]);
                run.seed = seed;
                const auto rt = return_time_tail(parse_word(q), Permutation::parse(perm), static_cast<int>(n_max), N,
                                                 eps, chain_options(seed, burn_in, replicas, common().threads));
                Table t{{"n", "survival"}, {}};
                for (std::size_t n = 0; n < rt.survival.size(); ++n)
                    t.rows.push_back({std::to_string(n), format_double(rt.survival[n])});
                std::cout << "cylinder_mass=" << format_short(rt.cylinder_mass) << " tau_mean=" << format_short(rt.tau_mean)
                          << " exp_moment=" << format_short(rt.tau_exp_moment);
                run.summary["cylinder_mass"] = rt.cylinder_mass;
                run.summary["tau_mean"] = rt.tau_mean;
                run.summary["tau_exp_moment"] = rt.tau_exp_moment;
                if (n_max >= 5) {
                    const auto f = stretched_exponential_fit(rt.survival, 4, static_cast<int>(n_max));
                    std::cout << " sqrt_fit_slope=" << format_short(f.slope) << " r2=" << format_short(f.r2);
                    run.summary["sqrt_fit_slope"] = f.slope;
                    run.summary["sqrt_fit_r2"] = f.r2;
                }
                std::cout << '\n';
                run.emit_csv(t);
                run.finish();
                return 0;
            };
        }
        {
            auto& c = add("clt", "normalized flow integrals over the special flow and their Gaussian fit");
            c.option("perm", perm, "root permutation");
            c.option("phi", phi, "observable: lambda_i, log_lambda_i, raw_lambda_i, h_i, zero");
            c.option("T", T, "integration horizon");
            c.option("N", N, "number of samples")->check(CLI::PositiveNumber);
            c.option("eps", eps, "exponent for the roof moment");
            c.option("burn-in", burn_in, "F steps discarded per replica")->check(CLI::NonNegativeNumber);
            c.option("replicas", replicas, "independent orbits")->check(CLI::PositiveNumber);
            c.option("seed", seed, "random seed")->required();
            c.run = [this, &c] {
                Run run(&c, &commons["clt"]);
                run.seed = seed;
                const auto rep = clt_flow(observables::by_name(phi), Permutation::parse(perm), T, N,
                                          chain_options(seed, burn_in, replicas, common().threads), eps);
                Table t{{"sample_index", "value"}, {}};
                for (std::size_t i = 0; i < rep.samples.size(); ++i)
                    t.rows.push_back({std::to_string(i), format_double(rep.samples[i])});
                std::cout << "ks=" << format_short(rep.ks_statistic) << " sigma_hat=" << format_short(rep.sigma_hat)
                          << " mean=" << format_short(rep.mean) << " roof_exp_moment=" << format_short(rep.roof_exp_moment)
                          << (rep.degenerate ? " degenerate" : "") << '\n';
                run.summary["ks_statistic"] = rep.ks_statistic;
                run.summary["sigma_hat"] = rep.sigma_hat;
                run.summary["degenerate"] = rep.degenerate;
                run.emit_csv(t);
                run.finish();
                return 0;
            };
        }
        {
            auto& c = add("good-words", "classify a word, or sample the mass of bad words");
            c.option("q", q, "positive anchor word");
            c.option("k", k, "prefix length")->check(CLI::PositiveNumber);
            c.option("theta", theta, "exponent in (0, 1)");
            c.option("r", r, "block length (0: 2(K+1)k + 2M)")->check(CLI::NonNegativeNumber);
            c.option("K", K, "constant K in the default block length")->check(CLI::NonNegativeNumber);
            c.option("word", word, "word to classify");
            c.option("perm", perm, "root permutation for sampling");
            c.option("lengths", lengths, "word lengths to sample, comma separated (default: the block length)");
            c.option("N", N, "words per length")->check(CLI::PositiveNumber);
            c.option("burn-in", burn_in, "G steps discarded per replica")->check(CLI::NonNegativeNumber);
            c.option("replicas", replicas, "independent orbits")->check(CLI::PositiveNumber);
            c.option("seed", seed, "random seed (sampling mode)");
            c.run = [this, &c] {
                Run run(&c, &commons["good-words"]);
                GoodWordParams p;
                p.q = parse_word(q);
                p.k = k;
                p.theta = theta;
                p.r = r;
                p.K = K;
                check(p);
                if (!word.empty()) {
                    const auto rep = classify_good(parse_word(word), p);
                    std::cout << (rep.good ? "good" : "bad") << " block_length=" << rep.block_length
                              << " min_coordinate=" << format_short(rep.min_coordinate)
                              << " occurrences=" << rep.min_occurrences
                              << " required=" << format_short(rep.required_occurrences);
                    if (!rep.good) std::cout << " reason=\"" << rep.reason << "\" block=" << rep.failed_block;
                    std::cout << '\n';
                    run.summary["good"] = rep.good;
                    run.finish();
                    return 0;
                }
                if (c.app->get_option("--seed")->count() == 0) throw validation_error("sampling mode needs --seed");
                run.seed = seed;
                std::vector<int> lens;
                if (lengths.empty()) lens.push_back(p.block_length());
                else
                    for (double v : parse_reals(lengths)) lens.push_back(static_cast<int>(v));
                Table t{{"length", "bad_fraction", "stderr"}, {}};
                for (int len : lens) {
                    const auto b = bad_word_mass(p, Permutation::parse(perm), len, N,
                                                 chain_options(seed, burn_in, replicas, common().threads));
                    std::cout << "length=" << len << " bad_fraction=" << format_short(b.bad_fraction)
                              << " stderr=" << format_short(b.stderr_) << '\n';
                    t.rows.push_back({std::to_string(len), format_double(b.bad_fraction), format_double(b.stderr_)});
                }
                run.emit_csv(t);
                run.finish();
                return 0;
            };
        }
    }

    std::string active;

    const Common& common() const { return commons.at(active); }

    ZipperedRectangle load_zr(bool allow_random) {
        if (!record.empty()) return parse_record(read_file(record));
        if (!delta.empty()) {
            if (lambda.empty()) throw validation_error("--delta needs --lambda and --perm");
            return from_delta(DeltaCoords{parse_reals(lambda), Permutation::parse(perm), parse_reals(delta)});
        }
        if (allow_random && commands.at(active).app->get_option("--seed")->count() > 0) {
            auto rng = rng_stream(seed, 0);
            return random_section_point(Permutation::parse(perm), rng);
        }
        throw validation_error(allow_random ? "give --record, --lambda with --delta, or --seed"
                                            : "give --record or --lambda with --delta");
    }
};

/// Turns the config file named on the command line into leading --key=value arguments.
std::vector<std::string> expand_config(const std::vector<std::string>& args, const std::set<std::string>& names) {
    if (args.size() < 2) return args;
    std::size_t sub = 1;
    while (sub < args.size() && !names.count(args[sub])) ++sub;
    if (sub == args.size()) return args;
    std::string path;
    for (std::size_t i = sub + 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;
    const std::string text = read_file(path);
    std::map<std::string, std::string> cfg;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        try {
            const auto j = json::parse(text);
            for (const auto& [k, v] : j.at("config").items()) cfg[k] = v.get<std::string>();
        } catch (const json::exception& e) {
            throw validation_error(std::string("manifest: ") + e.what());
        }
    } else {
        cfg = parse_config(text);
    }
    std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub) + 1);
    for (const auto& [k, v] : cfg) {
        if (k == "config") throw validation_error("config: key 'config' is not allowed");
        if (v.empty()) continue;  // empty means the default; "--key=" would swallow the next token
        out.push_back("--" + k + "=" + v);
    }
    out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub) + 1, args.end());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    Cli cli;
    try {
        std::set<std::string> names;
        for (const auto& [n, c] : cli.commands) names.insert(n);
        std::vector<std::string> args(argv, argv + argc);
        args = expand_config(args, names);
        std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
        try {
            cli.app.parse(std::move(rev));
        } catch (const CLI::ParseError& e) {
            const int code = cli.app.exit(e);
            return code == 0 ? 0 : 2;
        }
        for (auto& [n, c] : cli.commands)
            if (c.app->parsed()) {
                cli.active = n;
                return c.run();
            }
        return 2;
    } catch (const validation_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const boundary_error& e) {
        std::cerr << "boundary: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return 1;
    }
}

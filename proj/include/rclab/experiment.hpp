// rclab/experiment.hpp
//
// Experiment specs (one JSON document each), their validation, and the
// runner that turns a spec into results.csv / events.jsonl / manifest.json.
// Wall-clock data goes to timing.json only, so every other file is a pure
// function of the experiment spec and the build.
#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "rclab/coupling_lab.hpp"
#include "rclab/dynamics.hpp"
#include "rclab/expansion.hpp"
#include "rclab/graph_io.hpp"
#include "rclab/oracle.hpp"
#include "rclab/polymers.hpp"

#ifndef RCLAB_BUILD_ID
#define RCLAB_BUILD_ID "unknown"
#endif

namespace rclab {

inline constexpr const char* kBuildId = RCLAB_BUILD_ID;

/// Bad spec: `field` is a dotted path ("params.beta_range.points"), or
/// "line L, column C" for syntax errors.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error("config: " + field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

enum class ExperimentKind { Sample, MixScan, PhaseScan, WsmTest, PolymerCensus, CouplingTrace, OracleVerify, ScalingDemo };

inline const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Sample: return "sample";
        case ExperimentKind::MixScan: return "mix-scan";
        case ExperimentKind::PhaseScan: return "phase-scan";
        case ExperimentKind::WsmTest: return "wsm-test";
        case ExperimentKind::PolymerCensus: return "polymer-census";
        case ExperimentKind::CouplingTrace: return "coupling-trace";
        case ExperimentKind::OracleVerify: return "oracle-verify";
        case ExperimentKind::ScalingDemo: return "scaling-demo";
    }
    return "?";
}

struct GraphSource {
    enum class Type { Generate, File, Family } type = Type::Generate;
    std::size_t n = 0;
    std::size_t degree = 0;
    std::uint64_t seed = 1;
    std::string path;
    std::string family;  // triangle, path, cycle, complete, star, hypercube, petersen, tree
    std::size_t size = 0;
};

struct BetaRange {
    double from = 0.5;
    double to = 1.5;
    std::size_t points = 11;
    bool relative_to_beta_c = true;
};

struct Caps {
    std::uint64_t steps = 0;                // per chain run; 0 = kind default
    std::uint64_t coalescence = 1'000'000;  // worst-start grand coupling
    double mixing_factor = 50.0;            // budget = factor * m * ln m
    std::size_t oracle_edges = kOracleMaxEdges;
};

struct ExperimentSpec {
    std::string name;
    ExperimentKind kind = ExperimentKind::Sample;
    GraphSource graph;
    std::vector<double> q{2.0};
    std::vector<double> beta;  // explicit list
    std::optional<BetaRange> beta_range;
    std::optional<std::size_t> delta;  // degree bound used for beta_c and closures
    double delta_class = 0.1;
    std::optional<double> eta;
    std::vector<std::uint64_t> seeds{1};
    Caps caps;
    nlohmann::json options = nlohmann::json::object();
    nlohmann::json raw;  // the document as given, echoed into the manifest
};

namespace detail {

inline std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

inline void allow_only(const nlohmann::json& j, const std::string& at, std::initializer_list<const char*> keys) {
    if (!j.is_object()) {
        throw ConfigError(at.empty() ? "<root>" : at, "expected an object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : keys) {
            ok = ok || it.key() == k;
        }
        if (!ok) {
            throw ConfigError(join(at, it.key()), "unknown field");
        }
    }
}

inline double get_number(const nlohmann::json& j, const std::string& at) {
    if (!j.is_number()) {
        throw ConfigError(at, "expected a number");
    }
    return j.get<double>();
}

inline std::uint64_t get_count(const nlohmann::json& j, const std::string& at, bool allow_zero = false) {
    if (j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
        const auto v = j.get<std::uint64_t>();
        if (v == 0 && !allow_zero) {
            throw ConfigError(at, "must be positive");
        }
        return v;
    }
    if (j.is_number_float()) {
        // 1e6 style literals are accepted when integral
        const double d = j.get<double>();
        if (d >= (allow_zero ? 0.0 : 1.0) && d == std::floor(d) && d < 1.8e19) {
            return static_cast<std::uint64_t>(d);
        }
    }
    throw ConfigError(at, allow_zero ? "expected a non-negative integer" : "expected a positive integer");
}

inline std::string get_string(const nlohmann::json& j, const std::string& at) {
    if (!j.is_string()) {
        throw ConfigError(at, "expected a string");
    }
    return j.get<std::string>();
}

inline std::vector<double> number_or_list(const nlohmann::json& j, const std::string& at) {
    if (j.is_array()) {
        if (j.empty()) {
            throw ConfigError(at, "empty list");
        }
        std::vector<double> out;
        for (std::size_t i = 0; i < j.size(); ++i) {
            out.push_back(get_number(j[i], at + "[" + std::to_string(i) + "]"));
        }
        return out;
    }
    return {get_number(j, at)};
}

inline std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline ExperimentKind parse_kind(const std::string& s) {
    for (auto k : {ExperimentKind::Sample, ExperimentKind::MixScan, ExperimentKind::PhaseScan, ExperimentKind::WsmTest,
                   ExperimentKind::PolymerCensus, ExperimentKind::CouplingTrace, ExperimentKind::OracleVerify,
                   ExperimentKind::ScalingDemo}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("kind", "unknown experiment kind '" + s + "'");
}

inline GraphSource parse_graph(const nlohmann::json& j) {
    allow_only(j, "graph", {"generate", "file", "family"});
    if (j.size() != 1) {
        throw ConfigError("graph", "give exactly one of generate, file, family");
    }
    GraphSource g;
    if (j.contains("generate")) {
        const auto& s = j["generate"];
        allow_only(s, "graph.generate", {"n", "degree", "seed"});
        for (const char* k : {"n", "degree"}) {
            if (!s.contains(k)) {
                throw ConfigError(std::string("graph.generate.") + k, "missing");
            }
        }
        g.type = GraphSource::Type::Generate;
        g.n = get_count(s["n"], "graph.generate.n");
        g.degree = get_count(s["degree"], "graph.generate.degree");
        g.seed = s.contains("seed") ? get_count(s["seed"], "graph.generate.seed", true) : 1;
        if ((g.n * g.degree) % 2 != 0) {
            throw ConfigError("graph.generate", "n * degree must be even");
        }
    } else if (j.contains("file")) {
        g.type = GraphSource::Type::File;
        g.path = get_string(j["file"], "graph.file");
    } else {
        const auto& s = j["family"];
        g.type = GraphSource::Type::Family;
        if (s.is_string()) {
            g.family = s.get<std::string>();
        } else {
            allow_only(s, "graph.family", {"name", "size", "seed"});
            if (!s.contains("name")) {
                throw ConfigError("graph.family.name", "missing");
            }
            g.family = get_string(s["name"], "graph.family.name");
            g.size = s.contains("size") ? get_count(s["size"], "graph.family.size") : 0;
            g.seed = s.contains("seed") ? get_count(s["seed"], "graph.family.seed", true) : 1;
        }
        static const std::set<std::string> known{"triangle", "path",      "cycle",    "complete",
                                                 "star",     "hypercube", "petersen", "tree"};
        if (!known.count(g.family)) {
            throw ConfigError("graph.family", "unknown family '" + g.family + "'");
        }
        if (g.family != "triangle" && g.family != "petersen" && g.size == 0) {
            throw ConfigError("graph.family.size", "required for " + g.family);
        }
    }
    return g;
}

}  // namespace detail

/// Parses and validates a spec document. Errors name the offending field.
inline ExperimentSpec parse_spec(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::string msg = e.what();
        throw ConfigError(detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1), msg);
    }
    using detail::get_count;
    using detail::get_number;
    detail::allow_only(j, "", {"name", "kind", "graph", "params", "seeds", "caps", "options"});
    ExperimentSpec s;
    s.raw = j;
    if (!j.contains("kind")) {
        throw ConfigError("kind", "missing");
    }
    s.kind = detail::parse_kind(detail::get_string(j["kind"], "kind"));
    s.name = j.contains("name") ? detail::get_string(j["name"], "name") : to_string(s.kind);
    if (s.kind != ExperimentKind::ScalingDemo) {
        if (!j.contains("graph")) {
            throw ConfigError("graph", "missing");
        }
        s.graph = detail::parse_graph(j["graph"]);
    } else if (j.contains("graph")) {
        throw ConfigError("graph", "scaling-demo generates its own graphs (see options.n)");
    }

    if (!j.contains("params")) {
        throw ConfigError("params", "missing");
    }
    const auto& p = j["params"];
    detail::allow_only(p, "params", {"q", "beta", "beta_range", "delta", "delta_class", "eta"});
    if (p.contains("q")) {
        s.q = detail::number_or_list(p["q"], "params.q");
        for (double q : s.q) {
            if (!(q >= 1.0)) {
                throw ConfigError("params.q", "q must be at least 1");
            }
        }
    }
    if (p.contains("beta") == p.contains("beta_range")) {
        throw ConfigError("params", "give exactly one of beta, beta_range");
    }
    if (p.contains("beta")) {
        s.beta = detail::number_or_list(p["beta"], "params.beta");
        for (double b : s.beta) {
            if (!(b > 0.0)) {
                throw ConfigError("params.beta", "beta must be positive");
            }
        }
    } else {
        const auto& r = p["beta_range"];
        detail::allow_only(r, "params.beta_range", {"from", "to", "points", "relative_to_beta_c"});
        BetaRange br;
        if (r.contains("from")) br.from = get_number(r["from"], "params.beta_range.from");
        if (r.contains("to")) br.to = get_number(r["to"], "params.beta_range.to");
        if (r.contains("points")) br.points = get_count(r["points"], "params.beta_range.points");
        if (r.contains("relative_to_beta_c")) {
            if (!r["relative_to_beta_c"].is_boolean()) {
                throw ConfigError("params.beta_range.relative_to_beta_c", "expected true or false");
            }
            br.relative_to_beta_c = r["relative_to_beta_c"].get<bool>();
        }
        if (!(br.from > 0.0) || !(br.to >= br.from)) {
            throw ConfigError("params.beta_range", "need 0 < from <= to");
        }
        if (br.relative_to_beta_c) {
            for (double q : s.q) {
                if (!(q > 2.0)) {
                    throw ConfigError("params.beta_range.relative_to_beta_c", "beta_c needs q > 2");
                }
            }
        }
        s.beta_range = br;
    }
    if (p.contains("delta")) s.delta = get_count(p["delta"], "params.delta");
    if (p.contains("delta_class")) s.delta_class = get_number(p["delta_class"], "params.delta_class");
    if (p.contains("eta")) {
        s.eta = get_number(p["eta"], "params.eta");
        if (!(*s.eta > 0.0 && *s.eta < 0.5)) {
            throw ConfigError("params.eta", "need 0 < eta < 1/2");
        }
    }

    if (j.contains("seeds")) {
        const auto& sd = j["seeds"];
        if (sd.is_array()) {
            if (sd.empty()) {
                throw ConfigError("seeds", "empty list");
            }
            s.seeds.clear();
            for (std::size_t i = 0; i < sd.size(); ++i) {
                s.seeds.push_back(get_count(sd[i], "seeds[" + std::to_string(i) + "]", true));
            }
        } else {
            detail::allow_only(sd, "seeds", {"count", "base"});
            if (!sd.contains("count")) {
                throw ConfigError("seeds.count", "missing");
            }
            const auto count = get_count(sd["count"], "seeds.count");
            const auto base = sd.contains("base") ? get_count(sd["base"], "seeds.base", true) : 1;
            s.seeds.clear();
            for (std::uint64_t i = 0; i < count; ++i) {
                s.seeds.push_back(base + i);
            }
        }
    }
    if (j.contains("caps")) {
        const auto& c = j["caps"];
        detail::allow_only(c, "caps", {"steps", "coalescence", "mixing_factor", "oracle_edges"});
        if (c.contains("steps")) s.caps.steps = get_count(c["steps"], "caps.steps");
        if (c.contains("coalescence")) s.caps.coalescence = get_count(c["coalescence"], "caps.coalescence");
        if (c.contains("mixing_factor")) {
            s.caps.mixing_factor = get_number(c["mixing_factor"], "caps.mixing_factor");
            if (!(s.caps.mixing_factor > 0.0)) {
                throw ConfigError("caps.mixing_factor", "must be positive");
            }
        }
        if (c.contains("oracle_edges")) {
            s.caps.oracle_edges = get_count(c["oracle_edges"], "caps.oracle_edges");
            if (s.caps.oracle_edges > kOracleMaxEdges) {
                throw ConfigError("caps.oracle_edges", "cannot exceed " + std::to_string(kOracleMaxEdges));
            }
        }
    }
    if (j.contains("options")) {
        if (!j["options"].is_object()) {
            throw ConfigError("options", "expected an object");
        }
        s.options = j["options"];
    }
    return s;
}

inline ExperimentSpec load_spec(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError(path, "cannot open spec file");
    }
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_spec(ss.str());
}

inline Graph build_graph(const GraphSource& src) {
    switch (src.type) {
        case GraphSource::Type::Generate:
            return generate_random_regular(src.n, src.degree, src.seed);
        case GraphSource::Type::File:
            return load_graph(src.path);
        case GraphSource::Type::Family:
            break;
    }
    const auto& f = src.family;
    if (f == "triangle") return families::triangle();
    if (f == "petersen") return families::petersen();
    if (f == "path") return families::path(src.size);
    if (f == "cycle") return families::cycle(src.size);
    if (f == "complete") return families::complete(src.size);
    if (f == "star") return families::star(src.size);
    if (f == "hypercube") return families::hypercube(static_cast<unsigned>(src.size));
    return families::random_tree(src.size, src.seed);
}

// ---------------------------------------------------------------------------
// Options access with the same diagnostics as the top-level fields.

class Options {
public:
    Options(const nlohmann::json& j, std::initializer_list<const char*> allowed) : j_(j) {
        detail::allow_only(j_, "options", allowed);
    }
    bool has(const char* k) const { return j_.contains(k); }
    double number(const char* k, double dflt) const {
        return has(k) ? detail::get_number(j_[k], std::string("options.") + k) : dflt;
    }
    std::uint64_t count(const char* k, std::uint64_t dflt, bool allow_zero = false) const {
        return has(k) ? detail::get_count(j_[k], std::string("options.") + k, allow_zero) : dflt;
    }
    std::string str(const char* k, const std::string& dflt, std::initializer_list<const char*> choices) const {
        if (!has(k)) {
            return dflt;
        }
        auto v = detail::get_string(j_[k], std::string("options.") + k);
        for (const char* c : choices) {
            if (v == c) {
                return v;
            }
        }
        throw ConfigError(std::string("options.") + k, "unexpected value '" + v + "'");
    }
    std::vector<double> numbers(const char* k, std::vector<double> dflt) const {
        return has(k) ? detail::number_or_list(j_[k], std::string("options.") + k) : dflt;
    }

private:
    const nlohmann::json& j_;
};

// ---------------------------------------------------------------------------
// Output plumbing.

inline std::string fmt(double x) {
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    if (std::isnan(x)) {
        return "nan";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

/// What one work item produced. Rows exclude the common prefix columns.
struct TaskOutput {
    std::vector<std::vector<std::string>> rows;
    std::vector<nlohmann::json> events;
    std::vector<nlohmann::json> warnings;
    std::size_t violations = 0;
};

struct GridPoint {
    double q;
    double beta;
    double beta_over_beta_c;  // nan when beta_c is undefined
};

struct RunResult {
    std::string kind;
    std::size_t rows = 0;
    std::size_t events = 0;
    std::size_t warnings = 0;
    std::size_t violations = 0;
    std::string graph_hash;
    std::filesystem::path out_dir;
    int exit_code() const { return violations ? 3 : 0; }
};

struct RunOptions {
    std::filesystem::path out_dir = "rclab-out";
    std::size_t workers = 0;
    bool verbose = false;
    std::ostream* log = nullptr;
};

namespace detail {

inline double beta_c_or_nan(double q, std::size_t delta) {
    if (q > 2.0 && delta >= 3) {
        return beta_c(q, delta).value;
    }
    return std::nan("");
}

inline std::vector<GridPoint> grid(const ExperimentSpec& s, std::size_t delta) {
    std::vector<GridPoint> out;
    for (double q : s.q) {
        const double bc = beta_c_or_nan(q, delta);
        std::vector<double> betas = s.beta;
        if (s.beta_range) {
            const auto& r = *s.beta_range;
            if (r.relative_to_beta_c && std::isnan(bc)) {
                throw ConfigError("params.beta_range.relative_to_beta_c", "beta_c undefined for this q and degree");
            }
            for (std::size_t i = 0; i < r.points; ++i) {
                const double f = r.points == 1 ? r.from
                                               : r.from + (r.to - r.from) * static_cast<double>(i) /
                                                              static_cast<double>(r.points - 1);
                betas.push_back(r.relative_to_beta_c ? f * bc : f);
            }
        }
        for (double b : betas) {
            out.push_back({q, b, b / bc});
        }
    }
    return out;
}

/// Runs tasks [0, count) on a pool; results land in their own slots.
template <class Fn>
std::vector<TaskOutput> run_pool(std::size_t count, std::size_t workers, Fn&& fn, std::vector<double>& seconds) {
    std::vector<TaskOutput> out(count);
    seconds.assign(count, 0.0);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            const auto t0 = std::chrono::steady_clock::now();
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
            seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };
    workers = std::min(worker_count(workers), std::max<std::size_t>(count, 1));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);  // the first failing task in index order
        }
    }
    return out;
}

inline ModelParams params_for(const ExperimentSpec& s, const GridPoint& gp, std::size_t delta) {
    ParamOptions po;
    po.delta_class = s.delta_class;
    po.eta = s.eta;
    return ModelParams(gp.q, gp.beta, delta, po);
}

inline std::uint64_t budget(const Caps& c, std::size_t m) {
    const double mm = static_cast<double>(std::max<std::size_t>(m, 2));
    return static_cast<std::uint64_t>(std::ceil(c.mixing_factor * mm * std::log(mm)));
}

/// First t at which the chain's |In| reaches `target` (from below when
/// starting all-out, from above when all-in); nullopt past the budget.
inline std::optional<std::uint64_t> hitting_time(const Graph& g, const ModelParams& mp, bool from_in, double target,
                                                 std::uint64_t budget_steps, std::uint64_t seed) {
    const std::size_t m = g.num_edges();
    ChainState<> s(g, from_in ? Configuration::all_in(m) : Configuration::all_out(m));
    RngStream rng(seed);
    auto reached = [&] {
        const double k = static_cast<double>(s.in_count());
        return from_in ? k <= target : k >= target;
    };
    while (!reached()) {
        if (s.time() >= budget_steps) {
            return std::nullopt;
        }
        glauber_step(s, mp, rng);
    }
    return s.time();
}

/// Median of |In| along long chains from one extreme start, sampled once a
/// sweep over the second half of each run.
inline double reference_median(const Graph& g, const ModelParams& mp, bool from_in, std::uint64_t steps,
                               std::size_t chains, std::uint64_t seed) {
    const std::size_t m = g.num_edges();
    std::vector<std::size_t> samples;
    for (std::size_t c = 0; c < chains; ++c) {
        ChainState<> s(g, from_in ? Configuration::all_in(m) : Configuration::all_out(m));
        RngStream rng(derive_seed(seed, c));
        for (std::uint64_t t = 1; t <= steps; ++t) {
            glauber_step(s, mp, rng);
            if (t > steps / 2 && t % std::max<std::size_t>(m, 1) == 0) {
                samples.push_back(s.in_count());
            }
        }
    }
    if (samples.empty()) {
        throw PreconditionError("reference median: run too short to sample");
    }
    std::sort(samples.begin(), samples.end());
    const std::size_t h = samples.size() / 2;
    return samples.size() % 2 ? static_cast<double>(samples[h])
                              : 0.5 * static_cast<double>(samples[h - 1] + samples[h]);
}

/// Least-squares slope of log t against log n.
inline double fit_exponent(const std::vector<std::pair<double, double>>& pts) {
    if (pts.size() < 2) {
        return std::nan("");
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [n, t] : pts) {
        const double x = std::log(n), y = std::log(t);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double k = static_cast<double>(pts.size());
    const double den = k * sxx - sx * sx;
    return den == 0.0 ? std::nan("") : (k * sxy - sx * sy) / den;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Projected-statistic mixing at oracle scale.

struct ProjectedMixing {
    std::optional<std::uint64_t> t_mix;  // first checkpoint with TV <= 1/4
    std::vector<std::pair<std::uint64_t, double>> curve;
};

/// Runs `replicas` independent chains from `start` and compares their |In|
/// histogram with `law` every `stride` steps.
inline ProjectedMixing projected_mixing_time(const Graph& g, const ModelParams& mp, const Configuration& start,
                                             std::span<const double> law, std::size_t replicas,
                                             std::uint64_t stride, std::uint64_t budget_steps, std::uint64_t seed) {
    if (law.size() != g.num_edges() + 1) {
        throw DimensionMismatch("projected mixing: law must cover 0..m");
    }
    std::vector<ChainState<>> chains;
    std::vector<RngStream> rngs;
    chains.reserve(replicas);
    rngs.reserve(replicas);
    for (std::size_t i = 0; i < replicas; ++i) {
        chains.emplace_back(g, start);
        rngs.emplace_back(derive_seed(seed, i));
    }
    ProjectedMixing out;
    std::vector<std::size_t> counts(replicas);
    for (std::uint64_t t = 0;; t += stride) {
        for (std::size_t i = 0; i < replicas; ++i) {
            counts[i] = chains[i].in_count();
        }
        const double tv = tv_in_count_projected(counts, law);
        out.curve.emplace_back(t, tv);
        if (tv <= kMixingThreshold) {
            out.t_mix = t;
            return out;
        }
        if (t >= budget_steps) {
            return out;
        }
        for (std::size_t i = 0; i < replicas; ++i) {
            for (std::uint64_t s = 0; s < stride; ++s) {
                glauber_step(chains[i], mp, rngs[i]);
            }
        }
    }
}

/// Exact |In| law, optionally conditioned on a phase (subset DP, n <= 16).
inline std::vector<double> in_count_reference(const Graph& g, const ModelParams& mp, Restriction::Phase phase) {
    const auto st = phase_statistics(g, mp);
    auto law = st.in_count_law;
    const std::size_t m = g.num_edges();
    double z = 0.0;
    for (std::size_t k = 0; k <= m; ++k) {
        const bool keep = phase == Restriction::Phase::Any ||
                          (phase == Restriction::Phase::Ordered && is_ordered_count(k, m, mp.eta())) ||
                          (phase == Restriction::Phase::Disordered && is_disordered_count(k, m, mp.eta()));
        if (!keep) {
            law[k] = 0.0;
        }
        z += law[k];
    }
    if (!(z > 0.0)) {
        throw EmptySupportError("in-count reference: phase carries no mass");
    }
    for (auto& x : law) {
        x /= z;
    }
    return law;
}

// ---------------------------------------------------------------------------
// The runner.

class ExperimentRunner {
public:
    ExperimentRunner(ExperimentSpec spec, RunOptions opt) : spec_(std::move(spec)), opt_(std::move(opt)) {}

    RunResult run() {
        const auto wall0 = std::chrono::steady_clock::now();
        const auto started = std::time(nullptr);
        prepare();
        std::vector<double> seconds;
        std::vector<TaskOutput> outs;
        switch (spec_.kind) {
            case ExperimentKind::Sample: outs = pool(grid_.size() * spec_.seeds.size(), [&](std::size_t i) { return sample(i); }, seconds); break;
            case ExperimentKind::MixScan: outs = mix_scan(seconds); break;
            case ExperimentKind::PhaseScan:
                outs = pool(grid_.size(), [&](std::size_t i) { return phase_scan(i); }, seconds);
                phase_scan_summary(outs);
                break;
            case ExperimentKind::WsmTest: outs = pool(grid_.size(), [&](std::size_t i) { return wsm(i); }, seconds); break;
            case ExperimentKind::PolymerCensus: outs = pool(grid_.size() * spec_.seeds.size(), [&](std::size_t i) { return census(i); }, seconds); break;
            case ExperimentKind::CouplingTrace: outs = coupling_trace(seconds); break;
            case ExperimentKind::OracleVerify: outs = pool(grid_.size(), [&](std::size_t i) { return oracle_verify(i); }, seconds); break;
            case ExperimentKind::ScalingDemo: outs = scaling(seconds); break;
        }
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
        return emit(outs, seconds, wall, started);
    }

    /// Column names after the common prefix, for the experiment kind.
    std::vector<std::string> columns() const {
        switch (spec_.kind) {
            case ExperimentKind::Sample: return {"t", "in_count", "components", "phase"};
            case ExperimentKind::MixScan: return {"start", "steps", "completed", "cap", "target"};
            case ExperimentKind::PhaseScan:
                return {"mass_ordered", "mass_disordered", "mass_neither", "mean_in_fraction", "modes", "log_z"};
            case ExperimentKind::WsmTest:
                return {"vertex", "edge", "phase", "r", "ball_edges", "gap", "ball_marginal", "phase_marginal", "tolerance", "pass"};
            case ExperimentKind::PolymerCensus:
                return {"flavor", "index", "V", "E", "E_u", "c_prime", "log_weight", "residual"};
            case ExperimentKind::CouplingTrace:
                return {"phase", "outcome", "iterations", "occupancy_at_gate", "gate", "r1", "r2", "witness_size", "agree_at_v", "all_maximal"};
            case ExperimentKind::OracleVerify: return {"check", "value", "reference", "residual", "tolerance", "pass"};
            case ExperimentKind::ScalingDemo: return {"n", "m", "start", "reference", "t_mix", "completed", "budget", "t_over_m_log_m"};
        }
        return {};
    }

private:
    ExperimentSpec spec_;
    RunOptions opt_;
    std::optional<Graph> graph_;
    std::string graph_hash_ = "-";
    std::size_t delta_ = 0;
    std::vector<GridPoint> grid_;
    std::vector<nlohmann::json> extra_events_;  // emitted after the task events
    std::vector<nlohmann::json> run_warnings_;

    template <class Fn>
    std::vector<TaskOutput> pool(std::size_t count, Fn&& fn, std::vector<double>& seconds) {
        return detail::run_pool(count, opt_.workers, std::forward<Fn>(fn), seconds);
    }

    void say(const std::string& msg) const {
        if (opt_.verbose && opt_.log) {
            *opt_.log << msg << '\n';
        }
    }

    void prepare() {
        if (spec_.kind == ExperimentKind::ScalingDemo) {
            delta_ = spec_.delta.value_or(Options(spec_.options, {"n", "degree", "replicas", "start", "reference", "stride"}).count("degree", 3));
        } else {
            graph_ = build_graph(spec_.graph);
            graph_hash_ = graph_hash(*graph_);
            delta_ = spec_.delta.value_or(std::max<std::size_t>(graph_->max_degree(), 1));
            say("graph " + graph_hash_ + ": n=" + std::to_string(graph_->num_vertices()) +
                " m=" + std::to_string(graph_->num_edges()));
        }
        grid_ = detail::grid(spec_, delta_);
    }

    const Graph& g() const { return *graph_; }
    ModelParams mp(std::size_t gi) const { return detail::params_for(spec_, grid_[gi], delta_); }
    std::pair<std::size_t, std::size_t> split(std::size_t i) const {
        return {i / spec_.seeds.size(), i % spec_.seeds.size()};
    }

    std::vector<std::string> prefix(std::size_t gi, std::uint64_t seed, const std::string& hash) const {
        return {kBuildId, hash, fmt(grid_[gi].q), fmt(grid_[gi].beta), fmt(grid_[gi].beta_over_beta_c),
                fmt(mp(gi).eta()), std::to_string(seed)};
    }

    nlohmann::json tag(std::size_t gi, std::uint64_t seed) const {
        return {{"build_id", kBuildId}, {"graph_hash", graph_hash_}, {"q", grid_[gi].q},
                {"beta", grid_[gi].beta},  {"eta", mp(gi).eta()},      {"seed", seed}};
    }

    // --- kinds ---------------------------------------------------------------

    TaskOutput sample(std::size_t i) {
        Options o(spec_.options, {"start", "stride"});
        const auto [gi, si] = split(i);
        const std::uint64_t seed = spec_.seeds[si];
        const std::size_t m = g().num_edges();
        const std::uint64_t steps = spec_.caps.steps ? spec_.caps.steps : 10 * m;
        const std::uint64_t stride = o.count("stride", std::max<std::size_t>(m, 1));
        const bool from_in = o.str("start", "all-out", {"all-in", "all-out"}) == "all-in";
        const auto run = run_chain(g(), mp(gi), from_in ? Configuration::all_in(m) : Configuration::all_out(m), steps,
                                   seed, stride);
        TaskOutput out;
        for (const auto& pt : run.series) {
            out.rows.push_back({std::to_string(pt.t), std::to_string(pt.in_count), std::to_string(pt.components),
                                to_string(pt.phase)});
        }
        auto ev = tag(gi, seed);
        ev["event"] = "run";
        ev["start"] = from_in ? "all-in" : "all-out";
        ev["steps"] = run.steps;
        ev["final_in_count"] = run.final_config.in_count();
        ev["connectivity_queries"] = run.connectivity_queries;
        out.events.push_back(std::move(ev));
        return out;
    }

    std::vector<TaskOutput> mix_scan(std::vector<double>& seconds) {
        Options o(spec_.options, {"reference_chains", "reference_factor"});
        const std::size_t chains = o.count("reference_chains", 4);
        const double factor = o.number("reference_factor", 4.0);
        const std::size_t m = g().num_edges();
        const std::uint64_t bud = detail::budget(spec_.caps, m);
        // per grid point: reference medians from all-out and all-in starts
        std::vector<double> pre_seconds;
        std::vector<std::array<double, 2>> medians(grid_.size());
        pool(grid_.size(),
             [&](std::size_t gi) {
                 const auto steps = static_cast<std::uint64_t>(factor * static_cast<double>(bud));
                 for (int s = 0; s < 2; ++s) {
                     medians[gi][s] = detail::reference_median(g(), mp(gi), s == 1, steps, chains,
                                                               derive_seed(spec_.seeds.front(), 0x4EF0 + 2 * gi + s));
                 }
                 return TaskOutput{};
             },
             pre_seconds);
        for (std::size_t gi = 0; gi < grid_.size(); ++gi) {
            auto ev = tag(gi, spec_.seeds.front());
            ev.erase("seed");
            ev["event"] = "reference";
            ev["median_in_count_from_all_out"] = medians[gi][0];
            ev["median_in_count_from_all_in"] = medians[gi][1];
            ev["budget"] = bud;
            ev["statistic"] = "in_count";
            extra_events_.push_back(std::move(ev));
        }
        auto outs = pool(
            grid_.size() * spec_.seeds.size(),
            [&](std::size_t i) {
                const auto [gi, si] = split(i);
                const std::uint64_t seed = spec_.seeds[si];
                const auto p = mp(gi);
                TaskOutput out;
                const auto c = coalescence_time(g(), p, seed, spec_.caps.coalescence);
                out.rows.push_back({"worst", std::to_string(c.steps), c.coalesced ? "1" : "0",
                                    std::to_string(spec_.caps.coalescence), "coalescence"});
                if (!c.coalesced) {
                    auto w = tag(gi, seed);
                    w["warning"] = "cap_exceeded";
                    w["what"] = "coalescence";
                    w["cap"] = spec_.caps.coalescence;
                    out.warnings.push_back(std::move(w));
                }
                for (int s = 0; s < 2; ++s) {
                    const auto h = detail::hitting_time(g(), p, s == 1, medians[gi][s], bud, derive_seed(seed, 0x41 + s));
                    out.rows.push_back({s ? "all-in" : "all-out", std::to_string(h ? *h : bud), h ? "1" : "0",
                                        std::to_string(bud), fmt(medians[gi][s])});
                }
                return out;
            },
            seconds);
        for (std::size_t gi = 0; gi < grid_.size(); ++gi) {
            std::array<std::size_t, 3> done{};
            for (std::size_t si = 0; si < spec_.seeds.size(); ++si) {
                const auto& rows = outs[gi * spec_.seeds.size() + si].rows;
                for (std::size_t k = 0; k < 3; ++k) {
                    done[k] += rows[k][2] == "1";
                }
            }
            auto ev = tag(gi, spec_.seeds.front());
            ev.erase("seed");
            ev["event"] = "summary";
            ev["seeds"] = spec_.seeds.size();
            ev["worst_coalesced"] = done[0];
            ev["all_out_completed"] = done[1];
            ev["all_in_completed"] = done[2];
            extra_events_.push_back(std::move(ev));
        }
        return outs;
    }

    TaskOutput phase_scan(std::size_t gi) {
        Options o(spec_.options, {});
        const auto p = mp(gi);
        const auto st = phase_statistics(g(), p);
        double mean = 0.0;
        std::size_t modes = 0;
        const auto& law = st.in_count_law;
        const std::size_t m = law.size() - 1;
        for (std::size_t k = 0; k <= m; ++k) {
            mean += static_cast<double>(k) * law[k];
            const bool left = k == 0 || law[k] > law[k - 1];
            const bool right = k == m || law[k] >= law[k + 1];
            modes += left && right && law[k] > 1e-12;
        }
        TaskOutput out;
        out.rows.push_back({fmt(st.mass_ordered), fmt(st.mass_disordered), fmt(st.mass_neither),
                            fmt(mean / static_cast<double>(std::max<std::size_t>(m, 1))), std::to_string(modes),
                            fmt(st.log_z)});
        auto ev = tag(gi, 0);
        ev.erase("seed");
        ev["event"] = "in_count_law";
        ev["law"] = law;
        out.events.push_back(std::move(ev));
        return out;
    }

    // Per q: first beta where the ordered mass overtakes the disordered one,
    // and the beta window where the |In| law is bimodal.
    void phase_scan_summary(const std::vector<TaskOutput>& outs) {
        for (double q : spec_.q) {
            nlohmann::json ev = {{"build_id", kBuildId}, {"graph_hash", graph_hash_}, {"event", "crossover"}, {"q", q}};
            std::optional<double> cross, lo, hi;
            for (std::size_t gi = 0; gi < grid_.size(); ++gi) {
                if (grid_[gi].q != q) {
                    continue;
                }
                const auto& row = outs[gi].rows.front();
                if (!cross && std::stod(row[0]) >= std::stod(row[1])) {
                    cross = grid_[gi].beta;
                }
                if (std::stoul(row[4]) >= 2) {
                    lo = lo ? std::min(*lo, grid_[gi].beta) : grid_[gi].beta;
                    hi = hi ? std::max(*hi, grid_[gi].beta) : grid_[gi].beta;
                }
            }
            const double bc = detail::beta_c_or_nan(q, delta_);
            auto opt = [](std::optional<double> x) { return x ? nlohmann::json(*x) : nlohmann::json(nullptr); };
            ev["beta_c"] = std::isnan(bc) ? nlohmann::json(nullptr) : nlohmann::json(bc);
            ev["crossover_beta"] = opt(cross);
            ev["bimodal_from"] = opt(lo);
            ev["bimodal_to"] = opt(hi);
            extra_events_.push_back(std::move(ev));
        }
    }

    TaskOutput wsm(std::size_t gi) {
        Options o(spec_.options, {"vertex", "radii", "phase"});
        const auto v = static_cast<Vertex>(o.count("vertex", 0, true));
        if (v >= g().num_vertices() || g().incident(v).empty()) {
            throw ConfigError("options.vertex", "vertex out of range or isolated");
        }
        const auto phase_s = o.str("phase", "ordered", {"ordered", "disordered"});
        const auto phase = phase_s == "ordered" ? Phase::Ordered : Phase::Disordered;
        const EdgeId e = *g().incident(v).begin();
        TaskOutput out;
        for (double rr : o.numbers("radii", {1, 2, 3})) {
            if (!(rr >= 1.0) || rr != std::floor(rr)) {
                throw ConfigError("options.radii", "radii must be positive integers");
            }
            const auto r = static_cast<std::size_t>(rr);
            const auto res = wsm_check(g(), v, e, r, phase, mp(gi));
            out.rows.push_back({std::to_string(v), std::to_string(e), phase_s, std::to_string(r),
                                std::to_string(BallView(g(), v, r).edges().size()), fmt(res.gap),
                                fmt(res.ball_marginal), fmt(res.phase_marginal), fmt(res.tolerance),
                                res.pass ? "1" : "0"});
        }
        return out;
    }

    TaskOutput census(std::size_t i) {
        Options o(spec_.options, {"flavor"});
        const auto [gi, si] = split(i);
        const std::uint64_t seed = spec_.seeds[si];
        const auto p = mp(gi);
        const bool ord = o.str("flavor", "ordered", {"ordered", "disordered"}) == "ordered";
        const std::size_t m = g().num_edges();
        const std::uint64_t steps = spec_.caps.steps ? spec_.caps.steps : 20 * m;
        ChainState<> s(g(), ord ? Configuration::all_in(m) : Configuration::all_out(m));
        RngStream rng(seed);
        const auto policy = ord ? RejectionPolicy::OutsideOrdered : RejectionPolicy::OutsideDisordered;
        for (std::uint64_t t = 0; t < steps; ++t) {
            glauber_step(s, p, rng, policy);
        }
        const auto& f = s.config();
        TaskOutput out;
        const double residual =
            ord ? check_ordered_factorization(g(), f, p) : check_disordered_factorization(g(), f, p);
        const auto list = polymer_census_json(g(), f, ord ? PolymerFlavor::Ordered : PolymerFlavor::Disordered, p);
        for (std::size_t k = 0; k < list.size(); ++k) {
            const auto& poly = list[k];
            out.rows.push_back({ord ? "ordered" : "disordered", std::to_string(k),
                                std::to_string(poly["V"].get<std::size_t>()), std::to_string(poly["E"].get<std::size_t>()),
                                std::to_string(poly["E_u"].get<std::size_t>()),
                                std::to_string(poly["c_prime"].get<std::size_t>()),
                                fmt(poly["log_weight"].get<double>()), fmt(residual)});
        }
        auto ev = tag(gi, seed);
        ev["event"] = "census";
        ev["flavor"] = ord ? "ordered" : "disordered";
        ev["in_count"] = f.in_count();
        ev["polymers"] = list.size();
        ev["factorization_residual"] = residual;
        out.events.push_back(std::move(ev));
        if (!(residual < 1e-9)) {
            ++out.violations;
            auto w = tag(gi, seed);
            w["violation"] = "factorization";
            w["residual"] = residual;
            out.warnings.push_back(std::move(w));
        }
        return out;
    }

    std::vector<TaskOutput> coupling_trace(std::vector<double>& seconds) {
        Options o(spec_.options, {"phase", "vertex", "r", "sampler", "r1", "r2", "chain_sweeps", "radius"});
        const bool ord = o.str("phase", "ordered", {"ordered", "disordered"}) == "ordered";
        const auto v = static_cast<Vertex>(o.count("vertex", 0, true));
        if (v >= g().num_vertices()) {
            throw ConfigError("options.vertex", "vertex out of range");
        }
        const bool use_chain = o.str("sampler", "oracle", {"oracle", "chain"}) == "chain";
        if (!use_chain && g().num_edges() > spec_.caps.oracle_edges) {
            throw ConfigError("options.sampler", "graph has " + std::to_string(g().num_edges()) +
                                                     " edges, over the oracle cap; use \"chain\"");
        }
        RevealOptions ro;
        if (o.has("r1") != o.has("r2")) {
            throw ConfigError("options.r1", "give r1 and r2 together");
        }
        if (o.has("r1")) {
            ro.radii = CutRadii{static_cast<std::size_t>(o.count("r1", 0)), static_cast<std::size_t>(o.count("r2", 0, true))};
        }
        if (o.has("radius")) {
            ro.radius = static_cast<std::size_t>(o.count("radius", 1));
        }
        const std::size_t r = o.count("r", 2);
        const std::size_t sweeps = o.count("chain_sweeps", 200);
        // one sampler per grid point, shared by its seeds (the oracle caches laws)
        std::vector<std::unique_ptr<RevealSampler>> samplers(grid_.size());
        std::vector<std::unique_ptr<std::mutex>> locks;
        for (std::size_t gi = 0; gi < grid_.size(); ++gi) {
            locks.push_back(std::make_unique<std::mutex>());
        }
        return pool(
            grid_.size() * spec_.seeds.size(),
            [&](std::size_t i) {
                const auto [gi, si] = split(i);
                const std::uint64_t seed = spec_.seeds[si];
                const auto p = mp(gi);
                // the oracle sampler's cache is not thread-safe; chains get their own
                std::unique_ptr<RevealSampler> own;
                RevealSampler* smp;
                std::unique_lock<std::mutex> lk;
                if (use_chain) {
                    own = std::make_unique<ChainRevealSampler>(g(), p, sweeps);
                    smp = own.get();
                } else {
                    lk = std::unique_lock<std::mutex>(*locks[gi]);
                    if (!samplers[gi]) {
                        samplers[gi] = std::make_unique<OracleRevealSampler>(g(), p);
                    }
                    smp = samplers[gi].get();
                }
                TaskOutput out;
                try {
                    const auto res = ord ? revealing_coupling_ordered(g(), v, r, p, seed, *smp, ro)
                                         : revealing_coupling_disordered(g(), v, p, seed, *smp, ro);
                    out.rows.push_back({ord ? "ordered" : "disordered", to_string(res.tag),
                                        std::to_string(res.iterations), std::to_string(res.occupancy_at_gate),
                                        fmt(res.gate), std::to_string(res.radii.r1), std::to_string(res.radii.r2),
                                        std::to_string(res.witness_size), res.agree_at_v ? "1" : "0",
                                        res.all_maximal ? "1" : "0"});
                    auto ev = res.to_json(seed);
                    const auto common = tag(gi, seed);
                    for (const auto& [k, val] : common.items()) {
                        ev[k] = val;
                    }
                    ev["event"] = "coupling";
                    out.events.push_back(std::move(ev));
                    if (res.radii_bound_unmet) {
                        auto w = tag(gi, seed);
                        w["warning"] = "radii_bound_unmet";
                        out.warnings.push_back(std::move(w));
                    }
                } catch (const InvariantViolation& e) {
                    ++out.violations;
                    auto w = tag(gi, seed);
                    w["violation"] = "invariant";
                    w["what"] = e.what();
                    out.warnings.push_back(std::move(w));
                }
                return out;
            },
            seconds);
    }

    TaskOutput oracle_verify(std::size_t gi) {
        Options o(spec_.options, {"tolerance"});
        const double tol = o.number("tolerance", 1e-9);
        const auto p = mp(gi);
        const std::size_t m = g().num_edges();
        TaskOutput out;
        auto check = [&](const std::string& name, double value, double ref) {
            const double res = std::abs(value - ref);
            const bool ok = res < tol;
            out.rows.push_back({name, fmt(value), fmt(ref), fmt(res), fmt(tol), ok ? "1" : "0"});
            if (!ok) {
                ++out.violations;
                auto w = tag(gi, 0);
                w.erase("seed");
                w["violation"] = name;
                w["residual"] = res;
                out.warnings.push_back(std::move(w));
            }
        };
        auto skip = [&](const std::string& name, const std::string& why) {
            auto w = tag(gi, 0);
            w.erase("seed");
            w["warning"] = "check_skipped";
            w["check"] = name;
            w["why"] = why;
            out.warnings.push_back(std::move(w));
        };
        if (m > spec_.caps.oracle_edges) {
            throw ConfigError("graph", "oracle-verify needs at most " + std::to_string(spec_.caps.oracle_edges) + " edges");
        }
        const auto d = exact_distribution(g(), p);
        double total = 0.0;
        for (double x : d.prob) {
            total += x;
        }
        check("probability_sum", total, 1.0);
        const double qi = std::round(p.q());
        if (qi == p.q() && qi >= 2.0 &&
            std::pow(qi, static_cast<double>(g().num_vertices())) <= kPottsMaxColorings) {
            check("log_z_potts", d.log_z, potts_log_partition_bruteforce(g(), static_cast<unsigned>(qi), p.beta()));
        } else {
            skip("log_z_potts", "q not an integer >= 2 or too many colourings");
        }
        if (m <= kDeletionContractionMaxEdges) {
            check("log_z_deletion_contraction", d.log_z, log_partition_deletion_contraction(g(), p));
        } else {
            skip("log_z_deletion_contraction", "too many edges");
        }
        if (g().num_vertices() <= kSubsetDpMaxVertices) {
            check("log_z_subset_dp", d.log_z, phase_statistics(g(), p).log_z);
        } else {
            skip("log_z_subset_dp", "too many vertices");
        }
        if (m <= kTransitionMaxEdges) {
            const auto t = exact_transition_matrix(g(), p);
            check("stationarity", stationarity_residual(t, d.prob), 0.0);
            check("detailed_balance", detailed_balance_residual(t, d.prob), 0.0);
        } else {
            skip("transition_matrix", "too many edges");
        }
        return out;
    }

    std::vector<TaskOutput> scaling(std::vector<double>& seconds) {
        Options o(spec_.options, {"n", "degree", "replicas", "start", "reference", "stride"});
        const auto ns = o.numbers("n", {8, 10, 12, 14, 16});
        const std::size_t replicas = o.count("replicas", 400);
        const std::string start_mode = o.str("start", "auto", {"auto", "all-out", "all-in"});
        const std::string ref_mode = o.str("reference", "phase", {"phase", "full"});
        for (double n : ns) {
            if (!(n >= 2 && n <= static_cast<double>(kSubsetDpMaxVertices)) || n != std::floor(n)) {
                throw ConfigError("options.n", "sizes must be integers in [2, 16]");
            }
            if ((static_cast<std::size_t>(n) * delta_) % 2 != 0) {
                throw ConfigError("options.n", "n * degree must be even");
            }
        }
        // tasks: grid point x size x seed
        const std::size_t per_grid = ns.size() * spec_.seeds.size();
        std::vector<std::string> hashes(grid_.size() * per_grid);
        auto outs = pool(
            grid_.size() * per_grid,
            [&](std::size_t i) {
                const std::size_t gi = i / per_grid;
                const std::size_t ni = (i % per_grid) / spec_.seeds.size();
                const std::uint64_t seed = spec_.seeds[i % spec_.seeds.size()];
                const auto n = static_cast<std::size_t>(ns[ni]);
                const Graph gr = generate_random_regular(n, delta_, derive_seed(seed, n));
                hashes[i] = graph_hash(gr);
                const std::size_t m = gr.num_edges();
                const auto p = detail::params_for(spec_, grid_[gi], delta_);
                const bool below = std::isnan(grid_[gi].beta_over_beta_c) || grid_[gi].beta_over_beta_c < 1.0;
                const bool from_in = start_mode == "all-in" || (start_mode == "auto" && !below);
                const auto phase = ref_mode == "full" ? Phase::Any : (from_in ? Phase::Ordered : Phase::Disordered);
                const auto law = in_count_reference(gr, p, phase);
                const std::uint64_t bud = spec_.caps.steps ? spec_.caps.steps : detail::budget(spec_.caps, m);
                const std::uint64_t stride = o.count("stride", std::max<std::size_t>(1, m / 4));
                const auto res = projected_mixing_time(gr, p, from_in ? Configuration::all_in(m) : Configuration::all_out(m),
                                                       law, replicas, stride, bud, seed);
                const double mm = static_cast<double>(m);
                TaskOutput out;
                out.rows.push_back({std::to_string(n), std::to_string(m), from_in ? "all-in" : "all-out",
                                    ref_mode == "full" ? "full" : (from_in ? "ordered" : "disordered"),
                                    std::to_string(res.t_mix.value_or(bud)), res.t_mix ? "1" : "0", std::to_string(bud),
                                    fmt(static_cast<double>(res.t_mix.value_or(bud)) / (mm * std::log(mm)))});
                if (!res.t_mix) {
                    nlohmann::json w = {{"build_id", kBuildId}, {"graph_hash", hashes[i]}, {"q", grid_[gi].q},
                                        {"beta", grid_[gi].beta}, {"seed", seed}, {"warning", "cap_exceeded"},
                                        {"what", "projected_mixing"}, {"n", n}, {"cap", bud}};
                    out.warnings.push_back(std::move(w));
                }
                return out;
            },
            seconds);
        scaling_hashes_ = hashes;
        for (std::size_t gi = 0; gi < grid_.size(); ++gi) {
            std::vector<std::pair<double, double>> pts;
            std::size_t exceeded = 0;
            for (std::size_t k = 0; k < per_grid; ++k) {
                const auto& row = outs[gi * per_grid + k].rows.front();
                if (row[5] == "1") {
                    pts.emplace_back(std::stod(row[0]), std::max(1.0, std::stod(row[4])));
                } else {
                    ++exceeded;
                }
            }
            nlohmann::json ev = {{"build_id", kBuildId}, {"event", "fit"}, {"q", grid_[gi].q},
                                 {"beta", grid_[gi].beta}, {"points", pts.size()}, {"exceeded", exceeded}};
            const double slope = detail::fit_exponent(pts);
            ev["exponent"] = std::isnan(slope) ? nlohmann::json(nullptr) : nlohmann::json(slope);
            ev["beta_over_beta_c"] = std::isnan(grid_[gi].beta_over_beta_c) ? nlohmann::json(nullptr)
                                                                             : nlohmann::json(grid_[gi].beta_over_beta_c);
            extra_events_.push_back(std::move(ev));
        }
        return outs;
    }

    std::vector<std::string> scaling_hashes_;

    // --- emission --------------------------------------------------------------

    RunResult emit(const std::vector<TaskOutput>& outs, const std::vector<double>& seconds, double wall,
                   std::time_t started) {
        namespace fs = std::filesystem;
        fs::create_directories(opt_.out_dir);
        RunResult rr;
        rr.kind = to_string(spec_.kind);
        rr.graph_hash = graph_hash_;
        rr.out_dir = opt_.out_dir;

        std::ostringstream csv, jsonl;
        csv << "build_id,graph_hash,q,beta,beta_over_beta_c,eta,seed";
        for (const auto& c : columns()) {
            csv << ',' << c;
        }
        csv << '\n';
        std::vector<nlohmann::json> warnings;
        for (std::size_t i = 0; i < outs.size(); ++i) {
            const auto [gi, seed, hash] = task_key(i);
            for (const auto& row : outs[i].rows) {
                auto full = prefix(gi, seed, hash);
                full.insert(full.end(), row.begin(), row.end());
                for (std::size_t k = 0; k < full.size(); ++k) {
                    csv << (k ? "," : "") << full[k];
                }
                csv << '\n';
                ++rr.rows;
            }
            for (const auto& ev : outs[i].events) {
                jsonl << ev.dump() << '\n';
                ++rr.events;
            }
            for (const auto& w : outs[i].warnings) {
                warnings.push_back(w);
            }
            rr.violations += outs[i].violations;
        }
        for (const auto& ev : extra_events_) {
            jsonl << ev.dump() << '\n';
            ++rr.events;
        }
        for (const auto& w : warnings) {
            auto line = w;
            line["event"] = w.contains("violation") ? "violation" : "warning";
            jsonl << line.dump() << '\n';
            ++rr.events;
        }
        rr.warnings = warnings.size();

        auto write = [&](const std::string& name, const std::string& body) {
            std::ofstream os(opt_.out_dir / name, std::ios::binary);
            if (!os) {
                throw Error("cannot write " + (opt_.out_dir / name).string());
            }
            os << body;
            const auto h = fnv1a({reinterpret_cast<const unsigned char*>(body.data()), body.size()});
            std::ostringstream hx;
            hx << std::hex << std::setw(16) << std::setfill('0') << h;
            return hx.str();
        };
        nlohmann::json manifest;
        manifest["build_id"] = kBuildId;
        manifest["kind"] = rr.kind;
        manifest["name"] = spec_.name;
        manifest["spec"] = spec_.raw;
        if (graph_) {
            manifest["graph"] = {{"hash", graph_hash_},
                                 {"n", g().num_vertices()},
                                 {"m", g().num_edges()},
                                 {"max_degree", g().max_degree()}};
        }
        manifest["delta"] = delta_;
        nlohmann::json grid = nlohmann::json::array();
        for (std::size_t gi = 0; gi < grid_.size(); ++gi) {
            const auto p = mp(gi);
            grid.push_back({{"q", grid_[gi].q}, {"beta", grid_[gi].beta}, {"eta", p.eta()}, {"zeta", p.zeta()},
                            {"beta_over_beta_c", std::isnan(grid_[gi].beta_over_beta_c)
                                                     ? nlohmann::json(nullptr)
                                                     : nlohmann::json(grid_[gi].beta_over_beta_c)}});
        }
        manifest["grid"] = grid;
        manifest["seeds"] = spec_.seeds;
        manifest["columns"] = csv.str().substr(0, csv.str().find('\n'));
        manifest["rows"] = rr.rows;
        manifest["events"] = rr.events;
        manifest["warnings"] = rr.warnings;
        manifest["violations"] = rr.violations;
        manifest["status"] = rr.violations ? "violations" : "ok";
        if (spec_.kind == ExperimentKind::MixScan || spec_.kind == ExperimentKind::ScalingDemo) {
            manifest["projection"] = "in_count";  // a lower bound on full-configuration TV
        }
        manifest["files"] = {{"results.csv", write("results.csv", csv.str())},
                             {"events.jsonl", write("events.jsonl", jsonl.str())}};
        write("manifest.json", manifest.dump(2) + "\n");

        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&started));
        nlohmann::json timing = {{"started_at", stamp}, {"wall_seconds", wall}, {"workers", detail::worker_count(opt_.workers)},
                                 {"task_seconds", seconds}};
        write("timing.json", timing.dump(2) + "\n");
        say("wrote " + std::to_string(rr.rows) + " rows, " + std::to_string(rr.events) + " events to " +
            opt_.out_dir.string());
        return rr;
    }

    std::tuple<std::size_t, std::uint64_t, std::string> task_key(std::size_t i) const {
        switch (spec_.kind) {
            case ExperimentKind::PhaseScan:
            case ExperimentKind::WsmTest:
            case ExperimentKind::OracleVerify:
                return {i, 0, graph_hash_};
            case ExperimentKind::ScalingDemo: {
                const std::size_t per_grid = scaling_hashes_.size() / std::max<std::size_t>(grid_.size(), 1);
                return {i / per_grid, spec_.seeds[i % spec_.seeds.size()], scaling_hashes_[i]};
            }
            default: {
                const auto [gi, si] = split(i);
                return {gi, spec_.seeds[si], graph_hash_};
            }
        }
    }
};

inline RunResult run_experiment(const ExperimentSpec& spec, const RunOptions& opt) {
    return ExperimentRunner(spec, opt).run();
}

}  // namespace rclab

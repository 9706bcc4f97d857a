// rclab/oracle.hpp
//
// Brute-force exact computations for small instances. Configurations are
// enumerated as binary counting over edge indices: mask bit e is edge e.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <thread>
#include <vector>

#include "json.hpp"
#include "rclab/graph_io.hpp"
#include "rclab/model.hpp"
#include "rclab/union_find.hpp"

namespace rclab {

inline constexpr std::size_t kOracleMaxEdges = 20;
inline constexpr std::size_t kTransitionMaxEdges = 12;
inline constexpr std::size_t kDeletionContractionMaxEdges = 14;
inline constexpr double kPottsMaxColorings = 1e7;
inline constexpr std::size_t kSubsetDpMaxVertices = 16;

namespace detail {

inline std::size_t worker_count(std::size_t requested) {
    if (requested != 0) {
        return requested;
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs body(lo, hi) over fixed blocks of [0, total). The block split does not
// depend on the worker count, so any reduction done per block is identical.
template <class Body>
void for_blocks(std::uint64_t total, std::size_t workers, Body&& body) {
    constexpr std::uint64_t kBlock = 1u << 14;
    const std::uint64_t nblocks = (total + kBlock - 1) / kBlock;
    workers = std::min<std::size_t>(detail::worker_count(workers), std::max<std::uint64_t>(nblocks, 1));
    auto run = [&](std::size_t w) {
        for (std::uint64_t b = w; b < nblocks; b += workers) {
            body(b * kBlock, std::min(total, (b + 1) * kBlock));
        }
    };
    if (workers <= 1) {
        run(0);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back(run, w);
    }
    for (auto& t : pool) {
        t.join();
    }
}

inline void check_oracle_size(const Graph& g, std::size_t cap, const char* what) {
    if (g.num_edges() > cap) {
        throw SizeCapError(std::string(what) + ": " + std::to_string(g.num_edges()) + " edges exceeds cap " +
                           std::to_string(cap));
    }
}

}  // namespace detail

/// c(F) for every mask. The table is independent of (q, beta), so parameter
/// sweeps reuse it.
inline std::vector<std::uint8_t> component_table(const Graph& g, std::size_t workers = 0) {
    detail::check_oracle_size(g, kOracleMaxEdges, "component_table");
    if (g.num_vertices() > 255) {
        throw SizeCapError("component_table: more than 255 vertices");
    }
    const std::size_t m = g.num_edges();
    std::vector<std::uint8_t> out(std::size_t{1} << m);
    detail::for_blocks(out.size(), workers, [&](std::uint64_t lo, std::uint64_t hi) {
        UnionFind uf(g.num_vertices());
        for (std::uint64_t mask = lo; mask < hi; ++mask) {
            uf.reset(g.num_vertices());
            for (std::uint64_t bits = mask; bits; bits &= bits - 1) {
                const auto& [u, v] = g.ends(static_cast<EdgeId>(std::countr_zero(bits)));
                uf.unite(u, v);
            }
            out[mask] = static_cast<std::uint8_t>(uf.sets());
        }
    });
    return out;
}

/// Which part of the configuration space carries mass: a phase, a clamp on
/// some edges, or both at once.
struct Restriction {
    enum class Phase { Any, Ordered, Disordered };
    Phase phase = Phase::Any;
    std::optional<PartialConfiguration> clamp;

    static Restriction none() { return {}; }
    static Restriction ordered() { return {Phase::Ordered, std::nullopt}; }
    static Restriction disordered() { return {Phase::Disordered, std::nullopt}; }
    static Restriction clamped(PartialConfiguration a, Phase ph = Phase::Any) { return {ph, std::move(a)}; }
};

struct ExactDistribution {
    std::size_t m = 0;
    std::vector<double> log_w;  // -inf outside the support
    std::vector<double> prob;
    double log_z = kNegInf;

    std::size_t states() const noexcept { return prob.size(); }
    double operator[](std::uint64_t mask) const { return prob[mask]; }
    double of(const Configuration& f) const { return prob[f.to_mask()]; }

    double edge_marginal(EdgeId e) const {
        double s = 0.0;
        for (std::uint64_t x = 0; x < prob.size(); ++x) {
            if ((x >> e) & 1) {
                s += prob[x];
            }
        }
        return s;
    }

    std::vector<double> in_count_law() const {
        std::vector<double> law(m + 1, 0.0);
        for (std::uint64_t x = 0; x < prob.size(); ++x) {
            law[std::popcount(x)] += prob[x];
        }
        return law;
    }
};

inline bool restriction_admits(const Restriction& r, std::uint64_t mask, std::size_t m, double eta,
                               std::uint64_t clamp_care, std::uint64_t clamp_val) {
    if ((mask & clamp_care) != clamp_val) {
        return false;
    }
    switch (r.phase) {
        case Restriction::Phase::Any:
            return true;
        case Restriction::Phase::Ordered:
            return is_ordered_count(std::popcount(mask), m, eta);
        case Restriction::Phase::Disordered:
            return is_disordered_count(std::popcount(mask), m, eta);
    }
    return false;
}

inline ExactDistribution exact_distribution(const Graph& g, const std::vector<std::uint8_t>& comps,
                                            const ModelParams& mp, const Restriction& r = Restriction::none()) {
    detail::check_oracle_size(g, kOracleMaxEdges, "exact_distribution");
    const std::size_t m = g.num_edges();
    if (comps.size() != (std::size_t{1} << m)) {
        throw DimensionMismatch("exact_distribution: component table does not match graph");
    }
    std::uint64_t care = 0, val = 0;
    if (r.clamp) {
        if (r.clamp->size() != m) {
            throw DimensionMismatch("exact_distribution: clamp length differs from edge count");
        }
        for (EdgeId e = 0; e < m; ++e) {
            if (r.clamp->revealed(e)) {
                care |= std::uint64_t{1} << e;
                if (r.clamp->is_in(e)) {
                    val |= std::uint64_t{1} << e;
                }
            }
        }
    }
    ExactDistribution d;
    d.m = m;
    d.log_w.assign(comps.size(), kNegInf);
    const double lq = mp.log_q();
    const double lw = mp.log_edge_weight();
    double hi = kNegInf;
    for (std::uint64_t x = 0; x < comps.size(); ++x) {
        if (restriction_admits(r, x, m, mp.eta(), care, val)) {
            d.log_w[x] = comps[x] * lq + std::popcount(x) * lw;
            hi = std::max(hi, d.log_w[x]);
        }
    }
    if (hi == kNegInf) {
        throw EmptySupportError("exact_distribution: restriction has empty support");
    }
    // Sum in index order so the result is reproducible bit for bit.
    double s = 0.0;
    for (double l : d.log_w) {
        if (l != kNegInf) {
            s += std::exp(l - hi);
        }
    }
    d.log_z = hi + std::log(s);
    d.prob.resize(comps.size());
    for (std::uint64_t x = 0; x < comps.size(); ++x) {
        d.prob[x] = d.log_w[x] == kNegInf ? 0.0 : std::exp(d.log_w[x] - d.log_z);
    }
    return d;
}

inline ExactDistribution exact_distribution(const Graph& g, const ModelParams& mp,
                                            const Restriction& r = Restriction::none(), std::size_t workers = 0) {
    return exact_distribution(g, component_table(g, workers), mp, r);
}

/// Draws masks from an exact distribution by inversion.
class ExactSampler {
public:
    explicit ExactSampler(const ExactDistribution& d) : m_(d.m), cdf_(d.prob.size()) {
        double s = 0.0;
        for (std::size_t i = 0; i < cdf_.size(); ++i) {
            s += d.prob[i];
            cdf_[i] = s;
        }
    }

    template <class Engine>
    std::uint64_t draw_mask(Engine& rng) const {
        const double u = uniform01(rng) * cdf_.back();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        auto i = static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), cdf_.size() - 1));
        // never land on a zero-mass state sitting on a flat stretch
        while (i > 0 && cdf_[i] == cdf_[i - 1]) {
            --i;
        }
        return i;
    }

    template <class Engine>
    Configuration draw(Engine& rng) const {
        return Configuration::from_mask(m_, draw_mask(rng));
    }

private:
    std::size_t m_;
    std::vector<double> cdf_;
};

inline double exact_tv(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("exact_tv: distributions live on different spaces");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += std::abs(a[i] - b[i]);
    }
    return 0.5 * s;
}

inline double exact_tv(const ExactDistribution& a, const ExactDistribution& b) {
    return exact_tv(std::span<const double>(a.prob), std::span<const double>(b.prob));
}

/// Sparse row-stochastic matrix; row x lists its (at most m + 1) successors.
struct TransitionMatrix {
    std::size_t states = 0;
    std::vector<std::size_t> row_start;
    std::vector<std::uint32_t> col;
    std::vector<double> val;

    double at(std::uint64_t x, std::uint64_t y) const {
        for (std::size_t k = row_start[x]; k < row_start[x + 1]; ++k) {
            if (col[k] == y) {
                return val[k];
            }
        }
        return 0.0;
    }

    double row_sum(std::uint64_t x) const {
        double s = 0.0;
        for (std::size_t k = row_start[x]; k < row_start[x + 1]; ++k) {
            s += val[k];
        }
        return s;
    }

    /// mu P, mu a row vector.
    std::vector<double> apply(std::span<const double> mu) const {
        if (mu.size() != states) {
            throw DimensionMismatch("transition matrix: vector length mismatch");
        }
        std::vector<double> out(states, 0.0);
        for (std::size_t x = 0; x < states; ++x) {
            if (mu[x] == 0.0) {
                continue;
            }
            for (std::size_t k = row_start[x]; k < row_start[x + 1]; ++k) {
                out[col[k]] += mu[x] * val[k];
            }
        }
        return out;
    }
};

/// Transition matrix of the single-edge chain: uniform edge, in-probability
/// p_hat if it would be a cut edge, p otherwise.
inline TransitionMatrix exact_transition_matrix(const Graph& g, const ModelParams& mp) {
    detail::check_oracle_size(g, kTransitionMaxEdges, "exact_transition_matrix");
    const std::size_t m = g.num_edges();
    const std::uint64_t states = std::uint64_t{1} << m;
    TransitionMatrix t;
    t.states = states;
    t.row_start.reserve(states + 1);
    const double inv_m = m ? 1.0 / static_cast<double>(m) : 0.0;
    UnionFind uf(g.num_vertices());
    std::vector<double> to(m);
    for (std::uint64_t x = 0; x < states; ++x) {
        t.row_start.push_back(t.col.size());
        double stay = m ? 0.0 : 1.0;
        for (EdgeId e = 0; e < m; ++e) {
            uf.reset(g.num_vertices());
            for (EdgeId f = 0; f < m; ++f) {
                if (f != e && ((x >> f) & 1)) {
                    uf.unite(g.ends(f).u, g.ends(f).v);
                }
            }
            const bool cut = !uf.same(g.ends(e).u, g.ends(e).v);
            const double pin = cut ? mp.p_hat() : mp.p();
            const bool cur = (x >> e) & 1;
            to[e] = inv_m * (cur ? 1.0 - pin : pin);
            stay += inv_m * (cur ? pin : 1.0 - pin);
        }
        // successors in increasing index order
        std::vector<std::pair<std::uint64_t, double>> row;
        row.emplace_back(x, stay);
        for (EdgeId e = 0; e < m; ++e) {
            if (to[e] > 0.0) {
                row.emplace_back(x ^ (std::uint64_t{1} << e), to[e]);
            }
        }
        std::sort(row.begin(), row.end());
        for (auto& [y, pr] : row) {
            t.col.push_back(static_cast<std::uint32_t>(y));
            t.val.push_back(pr);
        }
    }
    t.row_start.push_back(t.col.size());
    return t;
}

/// max_y |(pi P)(y) - pi(y)|.
inline double stationarity_residual(const TransitionMatrix& t, std::span<const double> pi) {
    const auto next = t.apply(pi);
    double r = 0.0;
    for (std::size_t y = 0; y < pi.size(); ++y) {
        r = std::max(r, std::abs(next[y] - pi[y]));
    }
    return r;
}

/// max_{x,y} |pi(x) P(x,y) - pi(y) P(y,x)| over stored entries.
inline double detailed_balance_residual(const TransitionMatrix& t, std::span<const double> pi) {
    double r = 0.0;
    for (std::size_t x = 0; x < t.states; ++x) {
        for (std::size_t k = t.row_start[x]; k < t.row_start[x + 1]; ++k) {
            const std::uint32_t y = t.col[k];
            r = std::max(r, std::abs(pi[x] * t.val[k] - pi[y] * t.at(y, x)));
        }
    }
    return r;
}

/// log of sum over q-colourings of exp(beta * #monochromatic edges).
inline double potts_log_partition_bruteforce(const Graph& g, unsigned q, double beta) {
    if (q == 0) {
        throw PreconditionError("potts: q must be a positive integer");
    }
    const double total = std::pow(static_cast<double>(q), static_cast<double>(g.num_vertices()));
    if (total > kPottsMaxColorings) {
        throw SizeCapError("potts: q^n exceeds brute-force cap");
    }
    const std::size_t n = g.num_vertices();
    const double m = static_cast<double>(g.num_edges());
    std::vector<unsigned> col(n, 0);
    double s = 0.0;
    while (true) {
        std::size_t mono = 0;
        for (const auto& [u, v] : g.edge_list()) {
            mono += col[u] == col[v];
        }
        s += std::exp(beta * (static_cast<double>(mono) - m));
        std::size_t i = 0;
        while (i < n && ++col[i] == q) {
            col[i++] = 0;
        }
        if (i == n) {
            break;
        }
    }
    return std::log(s) + beta * m;
}

namespace detail {

// Z(G) = Z(G - e) + (e^beta - 1) Z(G / e); a loop contributes a factor e^beta.
inline double dc_log_z(std::size_t n, std::vector<EdgeEnds>& edges, double lq, double beta, double lw) {
    if (edges.empty()) {
        return static_cast<double>(n) * lq;
    }
    const EdgeEnds e = edges.back();
    edges.pop_back();
    double out;
    if (e.u == e.v) {
        out = beta + dc_log_z(n, edges, lq, beta, lw);
    } else {
        const double del = dc_log_z(n, edges, lq, beta, lw);
        // contract: v merges into u, and the last vertex takes v's label
        std::vector<EdgeEnds> con = edges;
        const Vertex last = static_cast<Vertex>(n - 1);
        for (auto& [a, b] : con) {
            for (Vertex* x : {&a, &b}) {
                if (*x == e.v) {
                    *x = e.u;
                }
                if (*x == last) {
                    *x = e.v == last ? e.u : e.v;
                }
            }
        }
        // if u was the last vertex it now lives at v's slot
        out = log_add_exp(del, lw + dc_log_z(n - 1, con, lq, beta, lw));
    }
    edges.push_back(e);
    return out;
}

}  // namespace detail

/// log Z by deletion-contraction, independent of enumeration.
inline double log_partition_deletion_contraction(const Graph& g, const ModelParams& mp) {
    detail::check_oracle_size(g, kDeletionContractionMaxEdges, "deletion-contraction");
    auto edges = g.edge_list();
    return detail::dc_log_z(g.num_vertices(), edges, mp.log_q(), mp.beta(), mp.log_edge_weight());
}

/// For each k, log of sum over |In| = k of q^c(F), by a dynamic programme
/// over vertex subsets (connected spanning subgraph counts, then set
/// partitions into connected blocks). Entries with no configuration are -inf.
inline std::vector<double> log_in_count_weights(const Graph& g, double q) {
    const std::size_t n = g.num_vertices();
    if (n > kSubsetDpMaxVertices) {
        throw SizeCapError("in-count weights: more than 16 vertices");
    }
    const std::size_t m = g.num_edges();
    const std::size_t subsets = std::size_t{1} << n;
    std::vector<std::uint16_t> inside(subsets, 0);
    for (std::size_t s = 0; s < subsets; ++s) {
        for (const auto& [u, v] : g.edge_list()) {
            inside[s] += ((s >> u) & 1) && ((s >> v) & 1);
        }
    }
    std::vector<std::vector<double>> binom(m + 1, std::vector<double>(m + 1, 0.0));
    for (std::size_t a = 0; a <= m; ++a) {
        binom[a][0] = 1.0;
        for (std::size_t b = 1; b <= a; ++b) {
            binom[a][b] = binom[a - 1][b - 1] + binom[a - 1][b];
        }
    }
    // conn[s][k]: connected spanning subgraphs of G[s] with k edges (exact
    // integers well inside double precision for m <= 40).
    std::vector<std::vector<double>> conn(subsets);
    for (std::size_t s = 1; s < subsets; ++s) {
        const std::size_t es = inside[s];
        auto& c = conn[s];
        c.assign(es + 1, 0.0);
        for (std::size_t k = 0; k <= es; ++k) {
            c[k] = binom[es][k];
        }
        const std::size_t low = s & (~s + 1);
        const std::size_t rest = s ^ low;
        for (std::size_t t = (rest - 1) & rest;; t = (t - 1) & rest) {
            // T = low + t, a proper subset of s containing the lowest vertex
            const std::size_t tt = t | low;
            if (tt != s) {
                const auto& ct = conn[tt];
                const std::size_t eo = inside[s ^ tt];
                for (std::size_t j = 0; j < ct.size(); ++j) {
                    if (ct[j] == 0.0) {
                        continue;
                    }
                    for (std::size_t l = 0; l <= eo; ++l) {
                        c[j + l] -= ct[j] * binom[eo][l];
                    }
                }
            }
            if (t == 0) {
                break;
            }
        }
    }
    // part[s][k] = sum over partitions of s into connected blocks of q^blocks
    // times block subgraph counts; kept as scaled doubles.
    std::vector<std::vector<double>> part(subsets);
    part[0] = {1.0};
    for (std::size_t s = 1; s < subsets; ++s) {
        auto& pk = part[s];
        pk.assign(inside[s] + 1, 0.0);
        const std::size_t low = s & (~s + 1);
        const std::size_t rest = s ^ low;
        for (std::size_t t = rest;; t = (t - 1) & rest) {
            const std::size_t tt = t | low;
            const auto& ct = conn[tt];
            const auto& pr = part[s ^ tt];
            for (std::size_t j = 0; j < ct.size(); ++j) {
                if (ct[j] == 0.0) {
                    continue;
                }
                for (std::size_t l = 0; l < pr.size(); ++l) {
                    pk[j + l] += q * ct[j] * pr[l];
                }
            }
            if (t == 0) {
                break;
            }
        }
    }
    std::vector<double> out(m + 1, kNegInf);
    const auto& full = part[subsets - 1];
    // every edge of G lies inside V, so full has m + 1 entries
    for (std::size_t k = 0; k < full.size() && k <= m; ++k) {
        if (full[k] > 0.0) {
            out[k] = std::log(full[k]);
        }
    }
    return out;
}

struct PhaseStatistics {
    double mass_ordered = 0.0;
    double mass_disordered = 0.0;
    double mass_neither = 0.0;
    double tv_ordered = 0.0;     // TV(pi, pi^ord)
    double tv_disordered = 0.0;  // TV(pi, pi^dis)
    double tail_ordered = 0.0;   // pi^ord(|In| <= (1 - zeta) m)
    double tail_disordered = 0.0;  // pi^dis(|In| >= zeta m)
    double log_z = 0.0;
    std::vector<double> in_count_law;
};

/// Phase masses from the law of |In|. TV(pi, pi restricted to A) = 1 - pi(A).
inline PhaseStatistics phase_statistics_from_law(std::span<const double> law, double log_z, const ModelParams& mp) {
    const std::size_t m = law.size() - 1;
    PhaseStatistics s;
    s.log_z = log_z;
    s.in_count_law.assign(law.begin(), law.end());
    double tail_o = 0.0, tail_d = 0.0;
    for (std::size_t k = 0; k <= m; ++k) {
        const double km = static_cast<double>(k);
        const double mm = static_cast<double>(m);
        if (is_ordered_count(k, m, mp.eta())) {
            s.mass_ordered += law[k];
            if (km <= (1.0 - mp.zeta()) * mm + kPhaseSlack) {
                tail_o += law[k];
            }
        } else if (is_disordered_count(k, m, mp.eta())) {
            s.mass_disordered += law[k];
            if (km >= mp.zeta() * mm - kPhaseSlack) {
                tail_d += law[k];
            }
        } else {
            s.mass_neither += law[k];
        }
    }
    s.tv_ordered = 1.0 - s.mass_ordered;
    s.tv_disordered = 1.0 - s.mass_disordered;
    s.tail_ordered = s.mass_ordered > 0.0 ? tail_o / s.mass_ordered : 0.0;
    s.tail_disordered = s.mass_disordered > 0.0 ? tail_d / s.mass_disordered : 0.0;
    return s;
}

inline PhaseStatistics phase_statistics(const Graph& g, const ModelParams& mp) {
    const auto lwk = log_in_count_weights(g, mp.q());
    std::vector<double> terms(lwk.size());
    for (std::size_t k = 0; k < lwk.size(); ++k) {
        terms[k] = lwk[k] == kNegInf ? kNegInf : lwk[k] + static_cast<double>(k) * mp.log_edge_weight();
    }
    const double log_z = log_sum_exp(terms);
    std::vector<double> law(terms.size());
    for (std::size_t k = 0; k < terms.size(); ++k) {
        law[k] = terms[k] == kNegInf ? 0.0 : std::exp(terms[k] - log_z);
    }
    return phase_statistics_from_law(law, log_z, mp);
}

/// Log-weight dump: one JSON header line, then 2^m little-endian doubles.
inline void write_oracle_dump(const std::string& path, const Graph& g, const ModelParams& mp,
                              const ExactDistribution& d) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw Error("oracle dump: cannot open " + path);
    }
    nlohmann::json h = {{"graph_hash", graph_hash(g)}, {"n", g.num_vertices()}, {"m", g.num_edges()},
                        {"q", mp.q()},  {"beta", mp.beta()},  {"eta", mp.eta()},
                        {"log_z", d.log_z}, {"order", "binary counting over edge index"}};
    os << h.dump() << '\n';
    static_assert(std::endian::native == std::endian::little, "oracle dump assumes little-endian host");
    os.write(reinterpret_cast<const char*>(d.log_w.data()),
             static_cast<std::streamsize>(d.log_w.size() * sizeof(double)));
}

}  // namespace rclab

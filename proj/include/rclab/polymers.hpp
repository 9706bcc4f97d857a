// rclab/polymers.hpp
//
// Polymer decompositions of in-phase configurations.
//   disordered: components of (V, In(F)), singletons included, weight
//               q^(1-|V|) (e^b - 1)^|E|.
//   ordered:    components of the closure of Out(F), weight
//               q^c' (e^b - 1)^(-|E_u|), c' = small components of
//               (V, E \ E_u) (spanning, isolated vertices count).
#pragma once

#include <algorithm>
#include <deque>
#include <vector>

#include "json.hpp"
#include "rclab/model.hpp"
#include "rclab/union_find.hpp"

namespace rclab {

/// ceil(5 * delta / 9): integer edge counts reach the real threshold 5D/9
/// exactly when they reach its ceiling.
constexpr std::size_t closure_threshold(std::size_t delta_deg) noexcept { return (5 * delta_deg + 8) / 9; }

/// Least superset of A closed under "a vertex with >= 5D/9 incident edges in
/// the set brings in all its edges". Edge indicator in, edge indicator out.
inline std::vector<char> b_closure(const Graph& g, const std::vector<char>& a, std::size_t delta_deg) {
    if (a.size() != g.num_edges()) {
        throw DimensionMismatch("b_closure: indicator length differs from edge count");
    }
    const std::size_t thr = closure_threshold(delta_deg);
    std::vector<char> in = a;
    std::vector<std::size_t> cnt(g.num_vertices(), 0);
    std::vector<char> fired(g.num_vertices(), 0);
    std::deque<Vertex> ready;
    for (Vertex x = 0; x < g.num_vertices(); ++x) {
        for (EdgeId e : g.incident(x)) {
            cnt[x] += in[e];
        }
        if (cnt[x] >= thr && thr > 0) {
            fired[x] = 1;
            ready.push_back(x);
        }
    }
    while (!ready.empty()) {
        const Vertex x = ready.front();
        ready.pop_front();
        for (EdgeId e : g.incident(x)) {
            if (in[e]) {
                continue;
            }
            in[e] = 1;
            // a loop bumps its vertex twice, matching its two incidence slots
            for (Vertex y : {g.ends(e).u, g.ends(e).v}) {
                ++cnt[y];
                if (!fired[y] && cnt[y] >= thr) {
                    fired[y] = 1;
                    ready.push_back(y);
                }
            }
        }
    }
    return in;
}

inline std::vector<EdgeId> b_closure(const Graph& g, std::span<const EdgeId> a, std::size_t delta_deg) {
    std::vector<char> ind(g.num_edges(), 0);
    for (EdgeId e : a) {
        ind.at(e) = 1;
    }
    const auto c = b_closure(g, ind, delta_deg);
    std::vector<EdgeId> out;
    for (EdgeId e = 0; e < c.size(); ++e) {
        if (c[e]) {
            out.push_back(e);
        }
    }
    return out;
}

struct DisorderedPolymer {
    std::vector<Vertex> vertices;
    std::vector<EdgeId> edges;
    double log_weight = 0.0;
};

struct OrderedPolymer {
    std::vector<Vertex> vertices;
    std::vector<EdgeId> edges;       // E(gamma), closure edges
    std::vector<EdgeId> unoccupied;  // E_u(gamma)
    std::size_t c_prime = 0;
    double log_weight = 0.0;
};

enum class PolymerFlavor { Ordered, Disordered };

namespace detail {

// Groups the marked edges into connected pieces; each piece lists its
// vertices and edges in increasing order. Pieces are ordered by smallest edge.
inline std::vector<std::pair<std::vector<Vertex>, std::vector<EdgeId>>> edge_components(const Graph& g,
                                                                                        const std::vector<char>& mark) {
    UnionFind uf(g.num_vertices());
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        if (mark[e]) {
            uf.unite(g.ends(e).u, g.ends(e).v);
        }
    }
    std::vector<std::int64_t> slot(g.num_vertices(), -1);
    std::vector<std::pair<std::vector<Vertex>, std::vector<EdgeId>>> out;
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        if (!mark[e]) {
            continue;
        }
        const auto r = uf.find(g.ends(e).u);
        if (slot[r] < 0) {
            slot[r] = static_cast<std::int64_t>(out.size());
            out.emplace_back();
        }
        out[slot[r]].second.push_back(e);
    }
    for (Vertex x = 0; x < g.num_vertices(); ++x) {
        const auto r = uf.find(x);
        if (slot[r] >= 0) {
            out[slot[r]].first.push_back(x);
        }
    }
    return out;
}

}  // namespace detail

/// One polymer per component of (V, In(F)), isolated vertices included.
inline std::vector<DisorderedPolymer> disordered_polymers(const Graph& g, const Configuration& f,
                                                          const ModelParams& mp, bool check_phase = true) {
    if (f.size() != g.num_edges()) {
        throw DimensionMismatch("disordered_polymers: configuration length differs from edge count");
    }
    if (check_phase && !is_disordered_count(f.in_count(), g.num_edges(), mp.eta())) {
        throw PhaseViolation("disordered_polymers: configuration is not in the disordered phase");
    }
    UnionFind uf(g.num_vertices());
    for (EdgeId e : f.in_edges()) {
        uf.unite(g.ends(e).u, g.ends(e).v);
    }
    std::vector<std::int64_t> slot(g.num_vertices(), -1);
    std::vector<DisorderedPolymer> out;
    for (Vertex x = 0; x < g.num_vertices(); ++x) {
        const auto r = uf.find(x);
        if (slot[r] < 0) {
            slot[r] = static_cast<std::int64_t>(out.size());
            out.emplace_back();
        }
        out[slot[r]].vertices.push_back(x);
    }
    for (EdgeId e : f.in_edges()) {
        out[slot[uf.find(g.ends(e).u)]].edges.push_back(e);
    }
    for (auto& p : out) {
        p.log_weight = (1.0 - static_cast<double>(p.vertices.size())) * mp.log_q() +
                       static_cast<double>(p.edges.size()) * mp.log_edge_weight();
    }
    return out;
}

/// Components of the closure of the given out-edge set, with labels from it.
inline std::vector<OrderedPolymer> ordered_polymers_of_out_set(const Graph& g, const std::vector<char>& out_set,
                                                               const ModelParams& mp) {
    const std::size_t n = g.num_vertices();
    const auto closure = b_closure(g, out_set, mp.delta_deg());
    std::vector<OrderedPolymer> polys;
    for (auto& [vs, es] : detail::edge_components(g, closure)) {
        OrderedPolymer p;
        p.vertices = std::move(vs);
        p.edges = std::move(es);
        for (EdgeId e : p.edges) {
            if (out_set[e]) {
                p.unoccupied.push_back(e);
            }
        }
        // c': small components of (V, E \ E_u)
        std::vector<char> removed(g.num_edges(), 0);
        for (EdgeId e : p.unoccupied) {
            removed[e] = 1;
        }
        UnionFind uf(n);
        for (EdgeId e = 0; e < g.num_edges(); ++e) {
            if (!removed[e]) {
                uf.unite(g.ends(e).u, g.ends(e).v);
            }
        }
        for (Vertex x = 0; x < n; ++x) {
            if (uf.find(x) == x && 2 * uf.size_of(x) < n) {
                ++p.c_prime;
            }
        }
        p.log_weight = static_cast<double>(p.c_prime) * mp.log_q() -
                       static_cast<double>(p.unoccupied.size()) * mp.log_edge_weight();
        polys.push_back(std::move(p));
    }
    return polys;
}

inline std::vector<OrderedPolymer> ordered_polymers(const Graph& g, const Configuration& f, const ModelParams& mp,
                                                    bool check_phase = true) {
    if (f.size() != g.num_edges()) {
        throw DimensionMismatch("ordered_polymers: configuration length differs from edge count");
    }
    if (check_phase && !is_ordered_count(f.in_count(), g.num_edges(), mp.eta())) {
        throw PhaseViolation("ordered_polymers: configuration is not in the ordered phase");
    }
    std::vector<char> out(g.num_edges(), 0);
    for (EdgeId e : f.out_edges()) {
        out[e] = 1;
    }
    return ordered_polymers_of_out_set(g, out, mp);
}

/// Partial version: Out(A) is the set of revealed out-edges, and the
/// occupancy condition counts revealed in-edges.
inline std::vector<OrderedPolymer> ordered_polymers(const Graph& g, const PartialConfiguration& a,
                                                    const ModelParams& mp, bool check_phase = true) {
    if (a.size() != g.num_edges()) {
        throw DimensionMismatch("ordered_polymers: partial configuration length differs from edge count");
    }
    if (check_phase && !is_ordered_count(a.in_count(), g.num_edges(), mp.eta())) {
        throw PhaseViolation("ordered_polymers: partial configuration has too few in-edges");
    }
    std::vector<char> out(g.num_edges(), 0);
    for (EdgeId e : a.out_set()) {
        out[e] = 1;
    }
    return ordered_polymers_of_out_set(g, out, mp);
}

/// |log w_G(F) - (log q + m log(e^b - 1) + sum log w_gamma)|.
inline double check_ordered_factorization(const Graph& g, const Configuration& f, const ModelParams& mp) {
    double rhs = mp.log_q() + static_cast<double>(g.num_edges()) * mp.log_edge_weight();
    for (const auto& p : ordered_polymers(g, f, mp)) {
        rhs += p.log_weight;
    }
    return std::abs(log_weight(g, f, mp) - rhs);
}

/// |log w_G(F) - (n log q + sum log w_gamma)|.
inline double check_disordered_factorization(const Graph& g, const Configuration& f, const ModelParams& mp) {
    double rhs = static_cast<double>(g.num_vertices()) * mp.log_q();
    for (const auto& p : disordered_polymers(g, f, mp)) {
        rhs += p.log_weight;
    }
    return std::abs(log_weight(g, f, mp) - rhs);
}

/// Largest |E(gamma)| over the polymers of f; 0 when there are none.
inline std::size_t largest_polymer_size(const Graph& g, const Configuration& f, PolymerFlavor flavor,
                                        const ModelParams& mp) {
    std::size_t best = 0;
    if (flavor == PolymerFlavor::Ordered) {
        for (const auto& p : ordered_polymers(g, f, mp)) {
            best = std::max(best, p.edges.size());
        }
    } else {
        for (const auto& p : disordered_polymers(g, f, mp)) {
            best = std::max(best, p.edges.size());
        }
    }
    return best;
}

/// Size of the largest component of (V, In(F)).
inline std::size_t largest_component_size(const Graph& g, const Configuration& f) {
    UnionFind uf(g.num_vertices());
    for (EdgeId e : f.in_edges()) {
        uf.unite(g.ends(e).u, g.ends(e).v);
    }
    std::size_t best = 0;
    for (Vertex x = 0; x < g.num_vertices(); ++x) {
        best = std::max<std::size_t>(best, uf.size_of(x));
    }
    return best;
}

inline nlohmann::json polymer_census_json(const Graph& g, const Configuration& f, PolymerFlavor flavor,
                                          const ModelParams& mp) {
    nlohmann::json list = nlohmann::json::array();
    if (flavor == PolymerFlavor::Ordered) {
        for (const auto& p : ordered_polymers(g, f, mp)) {
            list.push_back({{"flavor", "ordered"},
                            {"V", p.vertices.size()},
                            {"E", p.edges.size()},
                            {"E_u", p.unoccupied.size()},
                            {"c_prime", p.c_prime},
                            {"log_weight", p.log_weight}});
        }
    } else {
        for (const auto& p : disordered_polymers(g, f, mp)) {
            list.push_back({{"flavor", "disordered"},
                            {"V", p.vertices.size()},
                            {"E", p.edges.size()},
                            {"E_u", 0},
                            {"c_prime", 0},
                            {"log_weight", p.log_weight}});
        }
    }
    return list;
}

}  // namespace rclab

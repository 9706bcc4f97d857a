// rclab/graph.hpp
//
// Immutable undirected multigraph with indexed edges, plus the named families
// the tests and presets lean on. Regularity is a property, not a type: trees
// and paths are legal graphs, and operations that need a uniform degree check
// regular_degree() themselves.
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rclab/common.hpp"

namespace rclab {

struct EdgeEnds {
    Vertex u = 0;
    Vertex v = 0;
    friend bool operator==(const EdgeEnds&, const EdgeEnds&) = default;
};

class Graph {
public:
    Graph() = default;

    Graph(std::size_t n, std::vector<EdgeEnds> edges) : n_(n), edges_(std::move(edges)) {
        if (n > kNoVertex) {
            throw PreconditionError("graph: vertex count exceeds index range");
        }
        if (edges_.size() >= kNoEdge) {
            throw PreconditionError("graph: edge count exceeds index range");
        }
        offsets_.assign(n_ + 1, 0);
        for (const auto& [u, v] : edges_) {
            if (u >= n_ || v >= n_) {
                throw PreconditionError("graph: edge endpoint out of range");
            }
            ++offsets_[u + 1];
            ++offsets_[v + 1];  // a loop lands twice on the same vertex
        }
        std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
        incident_.resize(offsets_.back());
        std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
        for (EdgeId e = 0; e < edges_.size(); ++e) {
            incident_[fill[edges_[e].u]++] = e;
            incident_[fill[edges_[e].v]++] = e;
        }
    }

    std::size_t num_vertices() const noexcept { return n_; }
    std::size_t num_edges() const noexcept { return edges_.size(); }

    const EdgeEnds& ends(EdgeId e) const { return edges_[e]; }
    const std::vector<EdgeEnds>& edge_list() const noexcept { return edges_; }

    std::span<const EdgeId> incident(Vertex v) const {
        return {incident_.data() + offsets_[v], incident_.data() + offsets_[v + 1]};
    }

    std::size_t degree(Vertex v) const { return offsets_[v + 1] - offsets_[v]; }

    Vertex other(EdgeId e, Vertex v) const {
        const auto& [a, b] = edges_[e];
        return a == v ? b : a;
    }

    std::size_t max_degree() const {
        std::size_t best = 0;
        for (Vertex v = 0; v < n_; ++v) {
            best = std::max(best, degree(v));
        }
        return best;
    }

    std::optional<std::size_t> regular_degree() const {
        if (n_ == 0) {
            return std::nullopt;
        }
        const std::size_t d = degree(0);
        for (Vertex v = 1; v < n_; ++v) {
            if (degree(v) != d) {
                return std::nullopt;
            }
        }
        return d;
    }

    bool has_self_loops() const {
        return std::any_of(edges_.begin(), edges_.end(),
                           [](const EdgeEnds& e) { return e.u == e.v; });
    }

    bool is_simple() const {
        if (has_self_loops()) {
            return false;
        }
        std::vector<std::pair<Vertex, Vertex>> keys;
        keys.reserve(edges_.size());
        for (const auto& [u, v] : edges_) {
            keys.emplace_back(std::min(u, v), std::max(u, v));
        }
        std::sort(keys.begin(), keys.end());
        return std::adjacent_find(keys.begin(), keys.end()) == keys.end();
    }

    std::optional<EdgeId> find_edge(Vertex u, Vertex v) const {
        for (EdgeId e : incident(u)) {
            if (other(e, u) == v) {
                return e;
            }
        }
        return std::nullopt;
    }

    bool is_connected() const {
        if (n_ == 0) {
            return true;
        }
        std::vector<char> seen(n_, 0);
        std::vector<Vertex> stack{0};
        seen[0] = 1;
        std::size_t count = 1;
        while (!stack.empty()) {
            const Vertex x = stack.back();
            stack.pop_back();
            for (EdgeId e : incident(x)) {
                const Vertex y = other(e, x);
                if (!seen[y]) {
                    seen[y] = 1;
                    ++count;
                    stack.push_back(y);
                }
            }
        }
        return count == n_;
    }

    friend bool operator==(const Graph& a, const Graph& b) {
        return a.n_ == b.n_ && a.edges_ == b.edges_;
    }

private:
    std::size_t n_ = 0;
    std::vector<EdgeEnds> edges_;
    std::vector<std::size_t> offsets_;
    std::vector<EdgeId> incident_;
};

// ---------------------------------------------------------------------------
// Named families.

namespace families {

inline Graph single_edge() { return Graph(2, {{0, 1}}); }

inline Graph path(std::size_t n) {
    std::vector<EdgeEnds> es;
    for (Vertex i = 0; i + 1 < n; ++i) {
        es.push_back({i, i + 1});
    }
    return Graph(n, std::move(es));
}

inline Graph cycle(std::size_t n) {
    if (n < 3) {
        throw PreconditionError("cycle: need at least 3 vertices");
    }
    std::vector<EdgeEnds> es;
    for (Vertex i = 0; i < n; ++i) {
        es.push_back({i, static_cast<Vertex>((i + 1) % n)});
    }
    return Graph(n, std::move(es));
}

inline Graph triangle() { return cycle(3); }

inline Graph complete(std::size_t n) {
    std::vector<EdgeEnds> es;
    for (Vertex i = 0; i < n; ++i) {
        for (Vertex j = i + 1; j < n; ++j) {
            es.push_back({i, j});
        }
    }
    return Graph(n, std::move(es));
}

/// Star with center 0 and leaves 1..k.
inline Graph star(std::size_t k) {
    std::vector<EdgeEnds> es;
    for (Vertex i = 1; i <= k; ++i) {
        es.push_back({0, i});
    }
    return Graph(k + 1, std::move(es));
}

/// d-dimensional hypercube; vertices are bitmasks.
inline Graph hypercube(unsigned d) {
    const std::size_t n = std::size_t{1} << d;
    std::vector<EdgeEnds> es;
    for (Vertex x = 0; x < n; ++x) {
        for (unsigned b = 0; b < d; ++b) {
            const Vertex y = x ^ (Vertex{1} << b);
            if (x < y) {
                es.push_back({x, y});
            }
        }
    }
    return Graph(n, std::move(es));
}

inline Graph petersen() {
    std::vector<EdgeEnds> es;
    for (Vertex i = 0; i < 5; ++i) {
        es.push_back({i, (i + 1) % 5});
        es.push_back({i, i + 5});
        es.push_back({i + 5, (i + 2) % 5 + 5});
    }
    return Graph(10, std::move(es));
}

/// Uniform labelled tree via a random Pruefer sequence.
inline Graph random_tree(std::size_t n, std::uint64_t seed) {
    if (n < 2) {
        return Graph(n, {});
    }
    std::mt19937_64 rng(seed);
    std::vector<Vertex> code(n - 2);
    for (auto& c : code) {
        c = static_cast<Vertex>(uniform_below(rng, n));
    }
    std::vector<std::size_t> deg(n, 1);
    for (Vertex c : code) {
        ++deg[c];
    }
    std::vector<EdgeEnds> es;
    // O(n^2) decode; trees here are small.
    for (Vertex c : code) {
        Vertex leaf = 0;
        while (deg[leaf] != 1) {
            ++leaf;
        }
        es.push_back({leaf, c});
        --deg[leaf];
        --deg[c];
    }
    Vertex a = kNoVertex;
    for (Vertex x = 0; x < n; ++x) {
        if (deg[x] == 1) {
            if (a == kNoVertex) {
                a = x;
            } else {
                es.push_back({a, x});
                break;
            }
        }
    }
    return Graph(n, std::move(es));
}

}  // namespace families

// ---------------------------------------------------------------------------
// Random regular graphs via the configuration model.

struct RegularGenOptions {
    bool simple = true;
    std::size_t max_attempts = 100000;
};

/// Uniform random pairing of n*delta half-edges. In simple mode whole pairings
/// are rejected until no loop or parallel edge remains.
inline Graph generate_random_regular(std::size_t n, std::size_t delta, std::uint64_t seed,
                                     RegularGenOptions opt = {}) {
    if ((n * delta) % 2 != 0) {
        throw PreconditionError("random regular: n*delta must be even");
    }
    if (opt.simple && n <= delta) {
        throw PreconditionError("random regular: simple mode needs n > delta");
    }
    std::mt19937_64 rng(seed);
    std::vector<Vertex> points(n * delta);
    for (std::size_t i = 0; i < points.size(); ++i) {
        points[i] = static_cast<Vertex>(i / delta);
    }
    std::vector<std::pair<Vertex, Vertex>> keys;
    for (std::size_t attempt = 0; attempt < opt.max_attempts; ++attempt) {
        shuffle_in_place(std::span<Vertex>(points), rng);
        std::vector<EdgeEnds> es;
        es.reserve(points.size() / 2);
        for (std::size_t i = 0; i < points.size(); i += 2) {
            es.push_back({points[i], points[i + 1]});
        }
        if (opt.simple) {
            keys.clear();
            bool loop = false;
            for (const auto& [u, v] : es) {
                if (u == v) {
                    loop = true;
                    break;
                }
                keys.emplace_back(std::min(u, v), std::max(u, v));
            }
            if (loop) {
                continue;
            }
            std::sort(keys.begin(), keys.end());
            if (std::adjacent_find(keys.begin(), keys.end()) != keys.end()) {
                continue;
            }
        }
        // Canonical edge order: (min, max) endpoints, lexicographic.
        for (auto& e : es) {
            if (e.u > e.v) {
                std::swap(e.u, e.v);
            }
        }
        std::sort(es.begin(), es.end(), [](const EdgeEnds& a, const EdgeEnds& b) {
            return std::pair(a.u, a.v) < std::pair(b.u, b.v);
        });
        return Graph(n, std::move(es));
    }
    throw RejectionBudgetExceeded("random regular: rejection budget of " +
                                  std::to_string(opt.max_attempts) + " pairings exhausted");
}

}  // namespace rclab

// rclab/ball.hpp
//
// Metric balls, BFS trees with their excess edges, tree-likeness scans and the
// choice of an excess-free annulus (r2, r1] inside a ball.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_map>
#include <vector>

#include "rclab/graph.hpp"

namespace rclab {

/// B_r(v) with its shell and induced edge set. Vertices are stored in BFS
/// order (neighbours visited by increasing vertex index), so vertices()[0] is
/// the center and depths are nondecreasing along the vector.
class BallView {
public:
    BallView(const Graph& g, Vertex center, std::size_t radius) : center_(center), radius_(radius) {
        if (center >= g.num_vertices()) {
            throw PreconditionError("ball: center out of range");
        }
        vertices_.push_back(center);
        depth_.push_back(0);
        local_.emplace(center, 0);
        std::vector<Vertex> nbrs;
        for (std::size_t head = 0; head < vertices_.size(); ++head) {
            const Vertex x = vertices_[head];
            const std::size_t d = depth_[head];
            if (d == radius) {
                continue;
            }
            nbrs.clear();
            for (EdgeId e : g.incident(x)) {
                nbrs.push_back(g.other(e, x));
            }
            std::sort(nbrs.begin(), nbrs.end());
            for (Vertex y : nbrs) {
                if (local_.emplace(y, static_cast<std::uint32_t>(vertices_.size())).second) {
                    vertices_.push_back(y);
                    depth_.push_back(d + 1);
                }
            }
        }
        for (std::size_t i = 0; i < vertices_.size(); ++i) {
            if (depth_[i] == radius) {
                shell_.push_back(vertices_[i]);
            }
        }
        // Induced edges, each once, in increasing edge index.
        for (Vertex x : vertices_) {
            for (EdgeId e : g.incident(x)) {
                const Vertex y = g.other(e, x);
                if (contains(y) && (x < y || (x == y))) {
                    edges_.push_back(e);
                }
            }
        }
        std::sort(edges_.begin(), edges_.end());
        edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    }

    Vertex center() const noexcept { return center_; }
    std::size_t radius() const noexcept { return radius_; }

    const std::vector<Vertex>& vertices() const noexcept { return vertices_; }
    /// S_r(v): vertices at distance exactly r. Empty when the component is
    /// exhausted before radius r.
    const std::vector<Vertex>& shell() const noexcept { return shell_; }
    /// E(B_r(v)): edges with both endpoints in the ball, increasing index.
    const std::vector<EdgeId>& edges() const noexcept { return edges_; }

    bool contains(Vertex x) const { return local_.count(x) != 0; }

    std::optional<std::size_t> depth(Vertex x) const {
        auto it = local_.find(x);
        if (it == local_.end()) {
            return std::nullopt;
        }
        return depth_[it->second];
    }

    bool in_shell(Vertex x) const {
        auto d = depth(x);
        return d && *d == radius_;
    }

    std::uint32_t local_index(Vertex x) const { return local_.at(x); }

    bool contains_edge(const Graph& g, EdgeId e) const {
        return contains(g.ends(e).u) && contains(g.ends(e).v);
    }

private:
    Vertex center_;
    std::size_t radius_;
    std::vector<Vertex> vertices_;
    std::vector<std::size_t> depth_;
    std::vector<Vertex> shell_;
    std::vector<EdgeId> edges_;
    std::unordered_map<Vertex, std::uint32_t> local_;
};

inline BallView ball(const Graph& g, Vertex v, std::size_t r) { return BallView(g, v, r); }

/// Sum over components of |E| - |V| + 1 for the subgraph induced by the ball.
inline std::size_t tree_excess(const Graph& g, const BallView& b) {
    // Count components of G[B] with a small union-find over local indices.
    std::vector<std::uint32_t> parent(b.vertices().size());
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    std::size_t comps = parent.size();
    for (EdgeId e : b.edges()) {
        const auto a = find(b.local_index(g.ends(e).u));
        const auto c = find(b.local_index(g.ends(e).v));
        if (a != c) {
            parent[a] = c;
            --comps;
        }
    }
    return b.edges().size() + comps - b.vertices().size();
}

/// Radius used by the locally-treelike test: floor(log_{D-1}(n) / 3) with D
/// the maximum degree. When D <= 2 the logarithm degenerates and every ball
/// up to the whole graph is examined.
inline std::size_t treelike_radius(const Graph& g) {
    const std::size_t n = g.num_vertices();
    const std::size_t d = g.max_degree();
    if (n <= 1) {
        return 0;
    }
    if (d <= 2) {
        return n;
    }
    const double r = std::log(static_cast<double>(n)) / (3.0 * std::log(static_cast<double>(d - 1)));
    // Guard against log rounding just below an integer.
    return static_cast<std::size_t>(std::floor(r + 1e-12));
}

struct TreelikeReport {
    std::size_t radius = 0;
    std::size_t max_excess = 0;
    Vertex worst_center = 0;
};

/// Tree excess is monotone in the radius, so only the largest admissible
/// radius needs checking at each center.
inline TreelikeReport local_excess_scan(const Graph& g) {
    TreelikeReport rep;
    rep.radius = treelike_radius(g);
    for (Vertex v = 0; v < g.num_vertices(); ++v) {
        const std::size_t x = tree_excess(g, ball(g, v, rep.radius));
        if (x > rep.max_excess) {
            rep.max_excess = x;
            rep.worst_center = v;
        }
    }
    return rep;
}

inline bool is_locally_treelike(const Graph& g, std::size_t k) {
    return local_excess_scan(g).max_excess <= k;
}

// ---------------------------------------------------------------------------
// BFS tree T0 of G[B_r(v)] and the excess edges around it.

class BfsDecomposition {
public:
    BfsDecomposition(const Graph& g, Vertex root, std::size_t radius)
        : ball_(g, root, radius) {
        const auto& vs = ball_.vertices();
        const std::size_t k = vs.size();
        parent_.assign(k, kNoVertex);
        parent_edge_.assign(k, kNoEdge);
        children_.assign(k, {});
        std::vector<char> is_tree(g.num_edges(), 0);
        // The tree edge of y is the smallest-index edge from the first BFS
        // vertex that reached it; ball construction visits in that order.
        std::vector<char> reached(k, 0);
        reached[0] = 1;
        std::vector<std::pair<Vertex, EdgeId>> nbrs;
        for (std::size_t i = 0; i < k; ++i) {
            const Vertex x = vs[i];
            if (depth(x) == radius) {
                continue;
            }
            nbrs.clear();
            for (EdgeId e : g.incident(x)) {
                nbrs.emplace_back(g.other(e, x), e);
            }
            std::sort(nbrs.begin(), nbrs.end());
            for (const auto& [y, e] : nbrs) {
                const auto j = ball_.local_index(y);
                if (!reached[j]) {
                    reached[j] = 1;
                    parent_[j] = x;
                    parent_edge_[j] = e;
                    children_[i].push_back(y);
                    is_tree[e] = 1;
                }
            }
        }
        for (EdgeId e : ball_.edges()) {
            (is_tree[e] ? tree_edges_ : excess_edges_).push_back(e);
        }
        // Preorder DFS with children by increasing vertex index.
        dfs_index_.assign(k, 0);
        subtree_size_.assign(k, 1);
        for (auto& ch : children_) {
            std::sort(ch.begin(), ch.end());
        }
        std::vector<std::pair<Vertex, std::size_t>> stack{{root, 0}};
        dfs_order_.push_back(root);
        while (!stack.empty()) {
            auto& [x, next] = stack.back();
            const auto& ch = children_[ball_.local_index(x)];
            if (next < ch.size()) {
                const Vertex y = ch[next++];
                dfs_index_[ball_.local_index(y)] = dfs_order_.size();
                dfs_order_.push_back(y);
                stack.emplace_back(y, 0);
            } else {
                const Vertex done = x;
                stack.pop_back();
                if (!stack.empty()) {
                    subtree_size_[ball_.local_index(stack.back().first)] +=
                        subtree_size_[ball_.local_index(done)];
                }
            }
        }
    }

    const BallView& ball() const noexcept { return ball_; }
    Vertex root() const noexcept { return ball_.center(); }
    std::size_t radius() const noexcept { return ball_.radius(); }

    std::size_t depth(Vertex x) const { return *ball_.depth(x); }
    Vertex parent(Vertex x) const { return parent_[ball_.local_index(x)]; }
    EdgeId parent_edge(Vertex x) const { return parent_edge_[ball_.local_index(x)]; }
    const std::vector<Vertex>& children(Vertex x) const { return children_[ball_.local_index(x)]; }

    const std::vector<EdgeId>& tree_edges() const noexcept { return tree_edges_; }
    const std::vector<EdgeId>& excess_edges() const noexcept { return excess_edges_; }

    const std::vector<Vertex>& dfs_order() const noexcept { return dfs_order_; }
    std::size_t dfs_index(Vertex x) const { return dfs_index_[ball_.local_index(x)]; }

    /// V(T_u) as a contiguous slice of the DFS order.
    std::span<const Vertex> subtree(Vertex u) const {
        const auto i = dfs_index(u);
        return {dfs_order_.data() + i, subtree_size_[ball_.local_index(u)]};
    }

    bool in_subtree(Vertex x, Vertex u) const {
        if (!ball_.contains(x)) {
            return false;
        }
        const auto i = dfs_index(u);
        const auto j = dfs_index(x);
        return j >= i && j < i + subtree_size_[ball_.local_index(u)];
    }

    /// E(T_u): parent edges of every proper descendant of u.
    std::vector<EdgeId> subtree_edges(Vertex u) const {
        std::vector<EdgeId> out;
        for (Vertex x : subtree(u).subspan(1)) {
            out.push_back(parent_edge(x));
        }
        return out;
    }

    /// d+(e): larger endpoint depth of an edge inside the ball.
    std::size_t far_depth(const Graph& g, EdgeId e) const {
        return std::max(depth(g.ends(e).u), depth(g.ends(e).v));
    }

private:
    BallView ball_;
    std::vector<Vertex> parent_;
    std::vector<EdgeId> parent_edge_;
    std::vector<std::vector<Vertex>> children_;
    std::vector<EdgeId> tree_edges_;
    std::vector<EdgeId> excess_edges_;
    std::vector<Vertex> dfs_order_;
    std::vector<std::size_t> dfs_index_;
    std::vector<std::size_t> subtree_size_;
};

inline BfsDecomposition bfs_decomposition(const Graph& g, Vertex v, std::size_t r) {
    return BfsDecomposition(g, v, r);
}

struct CutRadii {
    std::size_t r1 = 0;
    std::size_t r2 = 0;
    std::size_t gap() const noexcept { return r1 - r2; }
    friend bool operator==(const CutRadii&, const CutRadii&) = default;
};

/// Widest (r2, r1] inside [0, r] containing none of the given far depths,
/// ties to the smallest r2. Returns nullopt when every level 1..r is blocked.
inline std::optional<CutRadii> widest_excess_free_annulus(std::span<const std::size_t> far_depths,
                                                          std::size_t r) {
    std::vector<char> blocked(r + 2, 0);
    for (std::size_t dp : far_depths) {
        if (dp <= r) {
            blocked[dp] = 1;
        }
    }
    std::optional<CutRadii> best;
    std::size_t lo = 1;
    while (lo <= r) {
        if (blocked[lo]) {
            ++lo;
            continue;
        }
        std::size_t hi = lo;
        while (hi + 1 <= r && !blocked[hi + 1]) {
            ++hi;
        }
        const CutRadii c{hi, lo - 1};
        if (!best || c.gap() > best->gap()) {
            best = c;
        }
        lo = hi + 1;
    }
    return best;
}

inline std::vector<std::size_t> excess_far_depths(const Graph& g, const BfsDecomposition& d) {
    std::vector<std::size_t> out;
    for (EdgeId e : d.excess_edges()) {
        out.push_back(d.far_depth(g, e));
    }
    return out;
}

inline std::optional<CutRadii> widest_excess_free_annulus(const Graph& g, const BfsDecomposition& d,
                                                          std::size_t r) {
    const auto fd = excess_far_depths(g, d);
    return widest_excess_free_annulus(std::span<const std::size_t>(fd), r);
}

/// Radii for the annulus argument. Requires r > k + 1 and at most k excess
/// edges in the decomposition, which guarantees a gap of at least r/(1+k) - 1.
inline CutRadii choose_cut_radii(const Graph& g, const BfsDecomposition& d, std::size_t r,
                                 std::size_t k) {
    if (r <= k + 1) {
        throw PreconditionError("choose_cut_radii: need r > k + 1");
    }
    if (r > d.radius()) {
        throw PreconditionError("choose_cut_radii: r exceeds decomposition radius");
    }
    if (d.excess_edges().size() > k) {
        throw PreconditionError("choose_cut_radii: more than k excess edges");
    }
    auto best = widest_excess_free_annulus(g, d, r);
    if (!best || static_cast<double>(best->gap()) <
                     static_cast<double>(r) / static_cast<double>(1 + k) - 1.0) {
        throw InvariantViolation("choose_cut_radii: gap bound violated");
    }
    return *best;
}

/// Post-hoc check: no excess edge has its far endpoint at depth in (r2, r1].
inline bool annulus_is_excess_free(const Graph& g, const BfsDecomposition& d, CutRadii c) {
    return std::none_of(d.excess_edges().begin(), d.excess_edges().end(), [&](EdgeId e) {
        const auto dp = d.far_depth(g, e);
        return dp > c.r2 && dp <= c.r1;
    });
}

}  // namespace rclab

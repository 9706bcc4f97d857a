// Connected simple graphs with few edges, one per isomorphism class.
// Grown edge by edge; duplicates removed with a brute-force canonical form
// (colour refinement, then every relabelling inside the colour classes).
#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "rclab/graph.hpp"

namespace smallg {

using EdgeList = std::vector<std::pair<int, int>>;

struct Shape {
    int n = 0;
    EdgeList edges;  // u < v, sorted
};

inline EdgeList relabel(const EdgeList& es, const std::vector<int>& to) {
    EdgeList out;
    for (auto [u, v] : es) {
        int a = to[u], b = to[v];
        out.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<int> refine_colours(const Shape& s) {
    std::vector<std::vector<int>> adj(s.n);
    for (auto [u, v] : s.edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    std::vector<int> col(s.n);
    for (int x = 0; x < s.n; ++x) {
        col[x] = static_cast<int>(adj[x].size());
    }
    while (true) {
        std::vector<std::pair<int, std::vector<int>>> sig(s.n);
        for (int x = 0; x < s.n; ++x) {
            sig[x].first = col[x];
            for (int y : adj[x]) {
                sig[x].second.push_back(col[y]);
            }
            std::sort(sig[x].second.begin(), sig[x].second.end());
        }
        auto sorted = sig;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        std::vector<int> next(s.n);
        for (int x = 0; x < s.n; ++x) {
            next[x] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), sig[x]) - sorted.begin());
        }
        const auto classes = [](const std::vector<int>& c) { return std::set<int>(c.begin(), c.end()).size(); };
        if (classes(next) == classes(col)) {
            return next;
        }
        col = next;
    }
}

inline EdgeList canonical(const Shape& s) {
    const auto col = refine_colours(s);
    std::map<int, std::vector<int>> cells;
    for (int x = 0; x < s.n; ++x) {
        cells[col[x]].push_back(x);
    }
    std::vector<std::vector<int>> groups;
    for (auto& [c, vs] : cells) {
        groups.push_back(vs);
    }
    EdgeList best;
    bool have = false;
    std::vector<int> to(s.n);
    // odometer over the permutations of every cell
    while (true) {
        int label = 0;
        for (const auto& g : groups) {
            for (int x : g) {
                to[x] = label++;
            }
        }
        auto cand = relabel(s.edges, to);
        if (!have || cand < best) {
            best = std::move(cand);
            have = true;
        }
        std::size_t k = 0;
        while (k < groups.size() && !std::next_permutation(groups[k].begin(), groups[k].end())) {
            ++k;
        }
        if (k == groups.size()) {
            break;
        }
    }
    return best;
}

/// All connected simple graphs with 1..max_edges edges, up to isomorphism.
inline std::vector<Shape> connected_graphs(int max_edges) {
    std::vector<Shape> out;
    std::vector<Shape> layer{Shape{2, {{0, 1}}}};
    for (int m = 1; m <= max_edges; ++m) {
        out.insert(out.end(), layer.begin(), layer.end());
        if (m == max_edges) {
            break;
        }
        std::set<std::pair<int, EdgeList>> seen;
        std::vector<Shape> next;
        auto offer = [&](Shape s) {
            std::sort(s.edges.begin(), s.edges.end());
            auto key = std::make_pair(s.n, canonical(s));
            if (seen.insert(key).second) {
                next.push_back(Shape{s.n, key.second});
            }
        };
        for (const auto& s : layer) {
            std::set<std::pair<int, int>> have(s.edges.begin(), s.edges.end());
            for (int u = 0; u < s.n; ++u) {
                for (int v = u + 1; v < s.n; ++v) {
                    if (!have.count({u, v})) {
                        Shape t = s;
                        t.edges.emplace_back(u, v);
                        offer(t);
                    }
                }
                Shape t = s;
                t.edges.emplace_back(u, s.n);
                ++t.n;
                offer(t);
            }
        }
        layer = std::move(next);
    }
    return out;
}

inline rclab::Graph to_graph(const Shape& s) {
    std::vector<rclab::EdgeEnds> es;
    for (auto [u, v] : s.edges) {
        es.push_back({static_cast<rclab::Vertex>(u), static_cast<rclab::Vertex>(v)});
    }
    return rclab::Graph(static_cast<std::size_t>(s.n), std::move(es));
}

}  // namespace smallg

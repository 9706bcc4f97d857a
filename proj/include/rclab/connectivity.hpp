// rclab/connectivity.hpp
//
// Dynamic connectivity engines behind one compile-time interface, and the
// adapter that mirrors a multigraph edge subset into a simple-graph engine.
#pragma once

#include <concepts>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "rclab/graph.hpp"
#include "rclab/hdt.hpp"
#include "rclab/union_find.hpp"

namespace rclab {

template <class C>
concept ConnectivityEngine = requires(C c, const C cc, Vertex u, Vertex v) {
    { C(std::size_t{}) };
    c.insert_edge(u, v);
    c.delete_edge(u, v);
    { cc.has_edge(u, v) } -> std::convertible_to<bool>;
    { cc.connected(u, v) } -> std::convertible_to<bool>;
    { cc.component_size(v) } -> std::convertible_to<std::size_t>;
    { cc.num_components() } -> std::convertible_to<std::size_t>;
    { cc.num_vertices() } -> std::convertible_to<std::size_t>;
};

/// Union-find over the current edge set, rebuilt from scratch on the first
/// query after any deletion.
class NaiveConnectivity {
public:
    explicit NaiveConnectivity(std::size_t n) : n_(n), uf_(n) {}

    std::size_t num_vertices() const noexcept { return n_; }
    std::size_t num_edges() const noexcept { return list_.size(); }

    bool has_edge(Vertex u, Vertex v) const { return pos_.count(key(u, v)) != 0; }

    void insert_edge(Vertex u, Vertex v) {
        check(u, v);
        if (u == v) {
            throw PreconditionError("connectivity: self-loops are not stored");
        }
        const auto k = key(u, v);
        if (pos_.count(k)) {
            throw PreconditionError("connectivity: duplicate insert");
        }
        pos_.emplace(k, list_.size());
        list_.push_back({u, v});
        if (!dirty_) {
            uf_.unite(u, v);
        }
    }

    void delete_edge(Vertex u, Vertex v) {
        check(u, v);
        auto it = pos_.find(key(u, v));
        if (it == pos_.end()) {
            throw PreconditionError("connectivity: deleting a missing edge");
        }
        const std::size_t i = it->second;
        pos_.erase(it);
        if (i + 1 != list_.size()) {
            list_[i] = list_.back();
            pos_[key(list_[i].u, list_[i].v)] = i;
        }
        list_.pop_back();
        dirty_ = true;
    }

    bool connected(Vertex u, Vertex v) const {
        check(u, v);
        rebuild();
        return uf_.same(u, v);
    }

    std::size_t component_size(Vertex v) const {
        check(v, v);
        rebuild();
        return uf_.size_of(v);
    }

    std::size_t num_components() const {
        rebuild();
        return uf_.sets();
    }

private:
    static std::uint64_t key(Vertex u, Vertex v) {
        if (u > v) {
            std::swap(u, v);
        }
        return (static_cast<std::uint64_t>(u) << 32) | v;
    }

    void check(Vertex u, Vertex v) const {
        if (u >= n_ || v >= n_) {
            throw PreconditionError("connectivity: vertex out of range");
        }
    }

    void rebuild() const {
        if (!dirty_) {
            return;
        }
        uf_.reset(n_);
        for (const auto& [a, b] : list_) {
            uf_.unite(a, b);
        }
        dirty_ = false;
    }

    std::size_t n_;
    std::vector<EdgeEnds> list_;
    std::unordered_map<std::uint64_t, std::size_t> pos_;
    mutable UnionFind uf_;
    mutable bool dirty_ = false;
};

static_assert(ConnectivityEngine<NaiveConnectivity>);
static_assert(ConnectivityEngine<HdtConnectivity>);

using DefaultConnectivity = HdtConnectivity;

/// Tracks a subset of a graph's edges inside an engine. Parallel edges share
/// one engine edge through a multiplicity count; self-loops never touch the
/// engine (they cannot change connectivity).
template <ConnectivityEngine Engine>
class EdgeMirror {
public:
    explicit EdgeMirror(const Graph& g) : g_(&g), engine_(g.num_vertices()), in_(g.num_edges(), 0) {
        // Parallel edges share a slot; the slot counts how many are present.
        std::unordered_map<std::uint64_t, std::uint32_t> slot;
        pair_.resize(g.num_edges());
        for (EdgeId e = 0; e < g.num_edges(); ++e) {
            const auto& [u, v] = g.ends(e);
            pair_[e] = slot.emplace(key(u, v), static_cast<std::uint32_t>(slot.size())).first->second;
        }
        mult_.assign(slot.size(), 0);
    }

    const Engine& engine() const {
        settle();
        return engine_;
    }
    const Graph& graph() const noexcept { return *g_; }

    bool contains(EdgeId e) const { return in_[e] != 0; }

    void insert(EdgeId e) {
        settle();
        if (in_[e]) {
            throw PreconditionError("edge mirror: edge already present");
        }
        in_[e] = 1;
        const auto& [u, v] = g_->ends(e);
        if (u == v) {
            return;
        }
        if (mult_[pair_[e]]++ == 0) {
            engine_.insert_edge(u, v);
        }
    }

    void erase(EdgeId e) {
        if (!in_[e]) {
            throw PreconditionError("edge mirror: edge not present");
        }
        if (detached_ == e) {
            detached_ = kNone;
            in_[e] = 0;
            --mult_[pair_[e]];
            return;
        }
        settle();
        in_[e] = 0;
        const auto& [u, v] = g_->ends(e);
        if (u == v) {
            return;
        }
        if (--mult_[pair_[e]] == 0) {
            engine_.delete_edge(u, v);
        }
    }

    bool connected(Vertex a, Vertex b) const {
        settle();
        return engine_.connected(a, b);
    }
    std::size_t component_size(Vertex v) const {
        settle();
        return engine_.component_size(v);
    }
    std::size_t num_components() const {
        settle();
        return engine_.num_components();
    }

    /// Is e a cut edge of (V, In + {e})? Observably side-effect free.
    bool would_be_cut_edge(EdgeId e) {
        settle();
        const auto& [u, v] = g_->ends(e);
        if (u == v) {
            return false;
        }
        if (!in_[e]) {
            return !engine_.connected(u, v);
        }
        if (mult_[pair_[e]] > 1) {
            return false;
        }
        if constexpr (requires { engine_.is_tree_edge(u, v); }) {
            if (!engine_.is_tree_edge(u, v)) {
                return false;
            }
        }
        engine_.delete_edge(u, v);
        if (engine_.connected(u, v)) {
            engine_.insert_edge(u, v);
            return false;
        }
        // Usually erased next; keep it out of the engine until we know.
        detached_ = e;
        return true;
    }

private:
    static std::uint64_t key(Vertex u, Vertex v) {
        if (u > v) {
            std::swap(u, v);
        }
        return (static_cast<std::uint64_t>(u) << 32) | v;
    }

    static constexpr EdgeId kNone = static_cast<EdgeId>(-1);

    void settle() const {
        if (detached_ != kNone) {
            const auto& [u, v] = g_->ends(detached_);
            detached_ = kNone;
            engine_.insert_edge(u, v);
        }
    }

    const Graph* g_;
    mutable Engine engine_;
    mutable EdgeId detached_ = kNone;
    std::vector<char> in_;
    std::vector<std::uint32_t> pair_;
    std::vector<std::uint32_t> mult_;
};

}  // namespace rclab

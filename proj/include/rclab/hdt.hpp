// rclab/hdt.hpp
//
// Fully-dynamic connectivity after Holm, de Lichtenberg and Thorup: a
// hierarchy of spanning forests F_0 >= F_1 >= ... where F_i holds the tree
// edges of level >= i, each forest kept as Euler tours in treaps.
//
// Tour representation: one node per vertex plus one node per arc (two arcs per
// tree edge). A tree's tour is any cyclic rotation of an Euler circuit with
// each vertex node sitting at one of that vertex's visits, which is all link
// and cut need.
//
// Flags aggregated up the treaps:
//   kTreeFlag    on the first arc of a tree edge, in the forest of its level;
//   kNontreeFlag on a vertex node when the vertex has non-tree edges there.
#pragma once

#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rclab/common.hpp"

namespace rclab {

class HdtConnectivity {
public:
    explicit HdtConnectivity(std::size_t n, std::uint64_t seed = 0x5eed) : n_(n), prng_(seed) {
        levels_ = 1;
        while ((std::size_t{1} << levels_) <= n) {
            ++levels_;
        }
        nodes_.reserve(levels_ * n + 1);
        nodes_.push_back(Node{});  // 0 is the null node
        vnode_.assign(levels_, std::vector<std::uint32_t>(n));
        for (std::size_t i = 0; i < levels_; ++i) {
            for (std::size_t x = 0; x < n; ++x) {
                vnode_[i][x] = alloc(static_cast<std::uint32_t>(x), true);
            }
        }
        nontree_.assign(levels_, std::vector<std::vector<std::uint32_t>>(n));
        components_ = n;
    }

    std::size_t num_vertices() const noexcept { return n_; }
    std::size_t num_components() const noexcept { return components_; }
    std::size_t num_edges() const noexcept { return index_.size(); }

    bool has_edge(Vertex u, Vertex v) const { return index_.count(key(u, v)) != 0; }

    void insert_edge(Vertex u, Vertex v) {
        check_vertices(u, v);
        if (u == v) {
            throw PreconditionError("connectivity: self-loops are not stored");
        }
        const auto k = key(u, v);
        if (index_.count(k)) {
            throw PreconditionError("connectivity: duplicate insert");
        }
        const std::uint32_t id = new_edge(u, v);
        index_.emplace(k, id);
        if (!connected(u, v)) {
            edges_[id].tree = true;
            link_level(0, id);
            --components_;
        } else {
            add_nontree(id);
        }
    }

    void delete_edge(Vertex u, Vertex v) {
        check_vertices(u, v);
        auto it = index_.find(key(u, v));
        if (it == index_.end()) {
            throw PreconditionError("connectivity: deleting a missing edge");
        }
        const std::uint32_t id = it->second;
        index_.erase(it);
        if (!edges_[id].tree) {
            remove_nontree(id);
            free_edge(id);
            return;
        }
        const std::size_t top = edges_[id].level;
        for (std::size_t i = 0; i <= top; ++i) {
            cut_level(i, id);
        }
        free_edge(id);
        for (std::size_t i = top + 1; i-- > 0;) {
            if (replace(i, u, v)) {
                return;
            }
        }
        ++components_;
    }

    bool connected(Vertex u, Vertex v) const {
        check_vertices(u, v);
        return root(vnode_[0][u]) == root(vnode_[0][v]);
    }

    std::size_t component_size(Vertex v) const {
        check_vertices(v, v);
        return nodes_[root(vnode_[0][v])].vcnt;
    }

    /// Stored edge currently in the spanning forest? Non-tree edges lie on a cycle.
    bool is_tree_edge(Vertex u, Vertex v) const { return edges_[index_.at(key(u, v))].tree; }

    /// Level of a stored edge; exposed for tests of the level bound.
    std::size_t edge_level(Vertex u, Vertex v) const { return edges_[index_.at(key(u, v))].level; }
    std::size_t level_count() const noexcept { return levels_; }

private:
    static constexpr std::uint8_t kTreeFlag = 1;
    static constexpr std::uint8_t kNontreeFlag = 2;
    static constexpr std::size_t kScanBudget = 32;

    struct Node {
        std::uint32_t l = 0, r = 0, p = 0;
        std::uint32_t prio = 0;
        std::uint32_t size = 0;
        std::uint32_t vcnt = 0;
        std::uint32_t item = 0;  // vertex id or edge id
        bool is_vertex = false;
        std::uint8_t flags = 0;
        std::uint8_t agg = 0;
    };

    struct EdgeRec {
        Vertex u = 0, v = 0;
        std::size_t level = 0;
        bool tree = false;
        std::uint32_t pos_u = 0, pos_v = 0;            // slots in non-tree lists
        std::vector<std::pair<std::uint32_t, std::uint32_t>> arcs;  // per level
    };

    static std::uint64_t key(Vertex u, Vertex v) {
        if (u > v) {
            std::swap(u, v);
        }
        return (static_cast<std::uint64_t>(u) << 32) | v;
    }

    void check_vertices(Vertex u, Vertex v) const {
        if (u >= n_ || v >= n_) {
            throw PreconditionError("connectivity: vertex out of range");
        }
    }

    // --- node pool ---------------------------------------------------------

    std::uint32_t alloc(std::uint32_t item, bool is_vertex) {
        std::uint32_t id;
        if (!free_nodes_.empty()) {
            id = free_nodes_.back();
            free_nodes_.pop_back();
        } else {
            id = static_cast<std::uint32_t>(nodes_.size());
            nodes_.push_back(Node{});
        }
        Node& x = nodes_[id];
        x = Node{};
        x.prio = static_cast<std::uint32_t>(splitmix64(prng_));
        x.size = 1;
        x.vcnt = is_vertex ? 1 : 0;
        x.item = item;
        x.is_vertex = is_vertex;
        return id;
    }

    void release(std::uint32_t id) { free_nodes_.push_back(id); }

    void pull(std::uint32_t x) {
        Node& a = nodes_[x];
        const Node& L = nodes_[a.l];
        const Node& R = nodes_[a.r];
        a.size = 1 + (a.l ? L.size : 0) + (a.r ? R.size : 0);
        a.vcnt = (a.is_vertex ? 1 : 0) + (a.l ? L.vcnt : 0) + (a.r ? R.vcnt : 0);
        a.agg = a.flags | (a.l ? L.agg : 0) | (a.r ? R.agg : 0);
    }

    std::uint32_t root(std::uint32_t x) const {
        while (nodes_[x].p) {
            x = nodes_[x].p;
        }
        return x;
    }

    std::uint32_t position(std::uint32_t x) const {
        std::uint32_t pos = nodes_[x].l ? nodes_[nodes_[x].l].size : 0;
        while (nodes_[x].p) {
            const std::uint32_t p = nodes_[x].p;
            if (nodes_[p].r == x) {
                pos += 1 + (nodes_[p].l ? nodes_[nodes_[p].l].size : 0);
            }
            x = p;
        }
        return pos;
    }

    std::uint32_t merge(std::uint32_t a, std::uint32_t b) {
        if (!a || !b) {
            const std::uint32_t t = a ? a : b;
            if (t) {
                nodes_[t].p = 0;
            }
            return t;
        }
        if (nodes_[a].prio > nodes_[b].prio) {
            const std::uint32_t c = merge(nodes_[a].r, b);
            nodes_[a].r = c;
            nodes_[c].p = a;
            pull(a);
            nodes_[a].p = 0;
            return a;
        }
        const std::uint32_t c = merge(a, nodes_[b].l);
        nodes_[b].l = c;
        nodes_[c].p = b;
        pull(b);
        nodes_[b].p = 0;
        return b;
    }

    /// First k nodes of t, and the rest. Both returned roots have no parent.
    std::pair<std::uint32_t, std::uint32_t> split(std::uint32_t t, std::uint32_t k) {
        if (!t) {
            return {0, 0};
        }
        const std::uint32_t ls = nodes_[t].l ? nodes_[nodes_[t].l].size : 0;
        if (k <= ls) {
            auto [a, b] = split(nodes_[t].l, k);
            nodes_[t].l = b;
            if (b) {
                nodes_[b].p = t;
            }
            pull(t);
            nodes_[t].p = 0;
            if (a) {
                nodes_[a].p = 0;
            }
            return {a, t};
        }
        auto [a, b] = split(nodes_[t].r, k - ls - 1);
        nodes_[t].r = a;
        if (a) {
            nodes_[a].p = t;
        }
        pull(t);
        nodes_[t].p = 0;
        if (b) {
            nodes_[b].p = 0;
        }
        return {t, b};
    }

    void refresh_up(std::uint32_t x) {
        while (x) {
            pull(x);
            x = nodes_[x].p;
        }
    }

    void set_flag(std::uint32_t x, std::uint8_t f, bool on) {
        const std::uint8_t old = nodes_[x].flags;
        nodes_[x].flags = on ? (old | f) : (old & ~f);
        if (nodes_[x].flags != old) {
            refresh_up(x);
        }
    }

    /// Some node under t carrying flag f; t must have it in agg.
    std::uint32_t find_flag(std::uint32_t t, std::uint8_t f) const {
        while (!(nodes_[t].flags & f)) {
            const std::uint32_t l = nodes_[t].l;
            t = (l && (nodes_[l].agg & f)) ? l : nodes_[t].r;
        }
        return t;
    }

    std::uint32_t reroot(std::size_t level, Vertex x) {
        const std::uint32_t node = vnode_[level][x];
        const std::uint32_t pos = position(node);
        auto [a, b] = split(root(node), pos);
        return merge(b, a);
    }

    // --- edges -------------------------------------------------------------

    std::uint32_t new_edge(Vertex u, Vertex v) {
        std::uint32_t id;
        if (!free_edges_.empty()) {
            id = free_edges_.back();
            free_edges_.pop_back();
        } else {
            id = static_cast<std::uint32_t>(edges_.size());
            edges_.emplace_back();
        }
        EdgeRec& e = edges_[id];
        e.u = u;
        e.v = v;
        e.level = 0;
        e.tree = false;
        e.pos_u = e.pos_v = 0;
        e.arcs.assign(levels_, {0, 0});  // keeps capacity across reuse
        return id;
    }

    void free_edge(std::uint32_t id) { free_edges_.push_back(id); }

    void link_level(std::size_t level, std::uint32_t id) {
        EdgeRec& e = edges_[id];
        const std::uint32_t ru = reroot(level, e.u);
        const std::uint32_t rv = reroot(level, e.v);
        const std::uint32_t a1 = alloc(id, false);
        const std::uint32_t a2 = alloc(id, false);
        e.arcs[level] = {a1, a2};
        if (level == e.level) {
            nodes_[a1].flags = kTreeFlag;
            pull(a1);
        }
        merge(merge(merge(ru, a1), rv), a2);
    }

    void cut_level(std::size_t level, std::uint32_t id) {
        EdgeRec& e = edges_[id];
        auto [a1, a2] = e.arcs[level];
        std::uint32_t p1 = position(a1);
        std::uint32_t p2 = position(a2);
        if (p1 > p2) {
            std::swap(p1, p2);
        }
        auto [left, rest] = split(root(a1), p1);
        auto [first_arc, rest2] = split(rest, 1);
        auto [middle, rest3] = split(rest2, p2 - p1 - 1);
        auto [second_arc, right] = split(rest3, 1);
        (void)first_arc;
        (void)second_arc;
        (void)middle;
        merge(left, right);
        release(a1);
        release(a2);
        e.arcs[level] = {0, 0};
    }

    void add_nontree(std::uint32_t id) {
        EdgeRec& e = edges_[id];
        auto& lu = nontree_[e.level][e.u];
        auto& lv = nontree_[e.level][e.v];
        e.pos_u = static_cast<std::uint32_t>(lu.size());
        lu.push_back(id);
        e.pos_v = static_cast<std::uint32_t>(lv.size());
        lv.push_back(id);
        if (lu.size() == 1) {
            set_flag(vnode_[e.level][e.u], kNontreeFlag, true);
        }
        if (lv.size() == 1) {
            set_flag(vnode_[e.level][e.v], kNontreeFlag, true);
        }
    }

    void drop_slot(std::size_t level, Vertex x, std::uint32_t pos) {
        auto& list = nontree_[level][x];
        const std::uint32_t moved = list.back();
        list[pos] = moved;
        list.pop_back();
        if (pos < list.size()) {
            EdgeRec& m = edges_[moved];
            (m.u == x ? m.pos_u : m.pos_v) = pos;
        }
        if (list.empty()) {
            set_flag(vnode_[level][x], kNontreeFlag, false);
        }
    }

    void remove_nontree(std::uint32_t id) {
        const EdgeRec& e = edges_[id];
        const std::size_t level = e.level;
        const Vertex u = e.u;
        const Vertex v = e.v;
        const std::uint32_t pu = e.pos_u;
        drop_slot(level, u, pu);
        drop_slot(level, v, edges_[id].pos_v);
    }

    /// A level-`level` non-tree edge leaving the tree rooted at t, looking at
    /// no more than `budget` candidates; 0 if none seen.
    std::uint32_t scan_crossing(std::size_t level, std::uint32_t t, std::size_t budget) {
        std::uint32_t found = 0;
        std::size_t seen = 0;
        // explicit stack over flagged subtrees
        scan_stack_.clear();
        scan_stack_.push_back(t);
        while (!scan_stack_.empty() && !found && seen < budget) {
            const std::uint32_t x = scan_stack_.back();
            scan_stack_.pop_back();
            const Node& nx = nodes_[x];
            if (!(nx.agg & kNontreeFlag)) {
                continue;
            }
            if (nx.flags & kNontreeFlag) {
                const Vertex a = nx.item;
                for (const std::uint32_t id : nontree_[level][a]) {
                    const EdgeRec& e = edges_[id];
                    const Vertex b = e.u == a ? e.v : e.u;
                    if (root(vnode_[level][b]) != t) {
                        found = id;
                        break;
                    }
                    if (++seen >= budget) {
                        break;
                    }
                }
            }
            if (nx.l) {
                scan_stack_.push_back(nx.l);
            }
            if (nx.r) {
                scan_stack_.push_back(nx.r);
            }
        }
        return found ? found + 1 : 0;  // shift so edge id 0 is representable
    }

    /// id must already be out of the non-tree lists.
    void promote_replacement(std::size_t level, std::uint32_t id) {
        edges_[id].tree = true;
        for (std::size_t j = 0; j <= level; ++j) {
            link_level(j, id);
        }
    }

    /// Look for a replacement of the removed tree edge {u, v} at `level`.
    bool replace(std::size_t level, Vertex u, Vertex v) {
        const std::uint32_t ru = root(vnode_[level][u]);
        const std::uint32_t rv = root(vnode_[level][v]);
        const bool u_small = nodes_[ru].vcnt <= nodes_[rv].vcnt;
        const Vertex sv = u_small ? u : v;

        // Cheap first look: a crossing edge near the front of the small side
        // spares pushing its whole tree up a level.
        if (const std::uint32_t hit = scan_crossing(level, u_small ? ru : rv, kScanBudget)) {
            remove_nontree(hit - 1);
            promote_replacement(level, hit - 1);
            return true;
        }

        // Push the small side's level-`level` tree edges one level up.
        for (;;) {
            const std::uint32_t small = root(vnode_[level][sv]);
            if (!(nodes_[small].agg & kTreeFlag)) {
                break;
            }
            const std::uint32_t arc = find_flag(small, kTreeFlag);
            const std::uint32_t id = nodes_[arc].item;
            set_flag(arc, kTreeFlag, false);
            if (level + 1 >= levels_) {
                throw InvariantViolation("connectivity: edge level exceeds log n");
            }
            edges_[id].level = level + 1;
            link_level(level + 1, id);
        }

        for (;;) {
            const std::uint32_t small = root(vnode_[level][sv]);
            if (!(nodes_[small].agg & kNontreeFlag)) {
                return false;
            }
            const std::uint32_t vn = find_flag(small, kNontreeFlag);
            const Vertex x = nodes_[vn].item;
            auto& list = nontree_[level][x];
            while (!list.empty()) {
                const std::uint32_t id = list.back();
                const EdgeRec& e = edges_[id];
                const Vertex y = e.u == x ? e.v : e.u;
                remove_nontree(id);
                if (root(vnode_[level][y]) == small) {
                    if (level + 1 >= levels_) {
                        throw InvariantViolation("connectivity: edge level exceeds log n");
                    }
                    edges_[id].level = level + 1;
                    add_nontree(id);
                } else {
                    promote_replacement(level, id);
                    return true;
                }
            }
        }
    }

    std::size_t n_;
    std::size_t levels_ = 1;
    std::uint64_t prng_;
    std::size_t components_ = 0;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> free_nodes_;
    std::vector<std::vector<std::uint32_t>> vnode_;                 // [level][vertex]
    std::vector<std::vector<std::vector<std::uint32_t>>> nontree_;  // [level][vertex]
    std::vector<EdgeRec> edges_;
    std::vector<std::uint32_t> free_edges_;
    std::vector<std::uint32_t> scan_stack_;
    std::unordered_map<std::uint64_t, std::uint32_t> index_;
};

}  // namespace rclab

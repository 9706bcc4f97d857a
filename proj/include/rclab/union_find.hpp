// rclab/union_find.hpp
#pragma once

#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

namespace rclab {

/// Path-halving, union-by-size disjoint sets with a live set count.
class UnionFind {
public:
    explicit UnionFind(std::size_t n = 0) { reset(n); }

    void reset(std::size_t n) {
        parent_.resize(n);
        std::iota(parent_.begin(), parent_.end(), 0u);
        size_.assign(n, 1);
        sets_ = n;
    }

    std::uint32_t find(std::uint32_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    bool unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) {
            return false;
        }
        if (size_[a] < size_[b]) {
            std::swap(a, b);
        }
        parent_[b] = a;
        size_[a] += size_[b];
        --sets_;
        return true;
    }

    bool same(std::uint32_t a, std::uint32_t b) { return find(a) == find(b); }
    std::uint32_t size_of(std::uint32_t x) { return size_[find(x)]; }
    std::size_t sets() const noexcept { return sets_; }
    std::size_t elements() const noexcept { return parent_.size(); }

private:
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> size_;
    std::size_t sets_ = 0;
};

/// Union by size without path compression, so every union can be undone in
/// LIFO order. Used by enumerations that walk a search tree over edges.
class RollbackUnionFind {
public:
    explicit RollbackUnionFind(std::size_t n = 0) : parent_(n), size_(n, 1), sets_(n) {
        std::iota(parent_.begin(), parent_.end(), 0u);
    }

    std::uint32_t find(std::uint32_t x) const {
        while (parent_[x] != x) {
            x = parent_[x];
        }
        return x;
    }

    /// Records an entry even for no-op unions so rollback stays symmetric.
    bool unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) {
            history_.push_back(kNone);
            return false;
        }
        if (size_[a] < size_[b]) {
            std::swap(a, b);
        }
        parent_[b] = a;
        size_[a] += size_[b];
        --sets_;
        history_.push_back(b);
        return true;
    }

    void rollback() {
        const std::uint32_t b = history_.back();
        history_.pop_back();
        if (b == kNone) {
            return;
        }
        const std::uint32_t a = parent_[b];
        size_[a] -= size_[b];
        parent_[b] = b;
        ++sets_;
    }

    std::size_t sets() const noexcept { return sets_; }

private:
    static constexpr std::uint32_t kNone = 0xffffffffu;
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> size_;
    std::vector<std::uint32_t> history_;
    std::size_t sets_ = 0;
};

}  // namespace rclab

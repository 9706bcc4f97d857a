// rclab/expansion.hpp
//
// Edge-expansion profile phi_G(eps) = min over 0 < |S| <= eps*n of
// |E(S, V\S)| / (D |S|) for D-regular G, and membership in the expander
// class defined by phi(1/2) >= 1/10 and phi(delta) >= 5/9.
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "rclab/graph.hpp"

namespace rclab {

enum class ExpansionMode { Exact, Heuristic };

inline constexpr std::size_t kExactExpansionMaxVertices = 24;

struct ExpansionResult {
    double value = std::numeric_limits<double>::infinity();  // +inf when no S qualifies
    bool exact = true;       // false: an upper bound from local search only
    std::vector<Vertex> witness;
};

namespace detail {

inline std::size_t max_set_size(std::size_t n, double eps) {
    // Small tolerance so eps*n landing a hair under an integer still counts.
    return static_cast<std::size_t>(std::floor(eps * static_cast<double>(n) + 1e-9));
}

inline std::size_t require_regular(const Graph& g, const char* what) {
    auto d = g.regular_degree();
    if (!d || *d == 0) {
        throw PreconditionError(std::string(what) + ": graph must be regular with positive degree");
    }
    return *d;
}

}  // namespace detail

/// Exact profile by Gray-code walk over all vertex subsets. The cut size is
/// updated incrementally as one vertex flips in or out.
inline ExpansionResult expansion_profile_exact(const Graph& g, double eps) {
    const std::size_t d = detail::require_regular(g, "expansion_profile");
    const std::size_t n = g.num_vertices();
    if (n > kExactExpansionMaxVertices) {
        throw SizeCapError("expansion_profile: exact mode limited to n <= 24");
    }
    const std::size_t cap = detail::max_set_size(n, eps);
    ExpansionResult res;
    if (cap == 0) {
        return res;
    }
    std::vector<char> in(n, 0);
    long long cut = 0;
    std::size_t size = 0;
    std::uint64_t best_mask = 0;
    std::uint64_t mask = 0;
    const std::uint64_t total = std::uint64_t{1} << n;
    for (std::uint64_t i = 1; i < total; ++i) {
        const auto x = static_cast<Vertex>(std::countr_zero(i));
        // Flipping x changes the cut by (#neighbours on x's old side) - (#on the other).
        long long same = 0;
        long long across = 0;
        for (EdgeId e : g.incident(x)) {
            const Vertex y = g.other(e, x);
            if (y == x) {
                continue;
            }
            (in[y] == in[x] ? same : across) += 1;
        }
        cut += same - across;
        in[x] ^= 1;
        mask ^= std::uint64_t{1} << x;
        size += in[x] ? 1 : -1;
        if (size > 0 && size <= cap) {
            const double ratio = static_cast<double>(cut) / static_cast<double>(d * size);
            if (ratio < res.value) {
                res.value = ratio;
                best_mask = mask;
            }
        }
    }
    for (Vertex x = 0; x < n; ++x) {
        if (best_mask >> x & 1) {
            res.witness.push_back(x);
        }
    }
    return res;
}

/// Upper bound on the profile from greedy growth plus single-vertex swaps,
/// restarted from every vertex. Never certifies a lower bound.
inline ExpansionResult expansion_profile_heuristic(const Graph& g, double eps,
                                                   std::uint64_t seed = 1) {
    const std::size_t d = detail::require_regular(g, "expansion_profile");
    const std::size_t n = g.num_vertices();
    const std::size_t cap = detail::max_set_size(n, eps);
    ExpansionResult res;
    res.exact = false;
    if (cap == 0) {
        return res;
    }
    std::mt19937_64 rng(seed);
    std::vector<int> inside(n, 0);
    std::vector<long long> nin(n, 0);  // neighbours of x inside S
    std::vector<Vertex> members;
    auto add = [&](Vertex x) {
        inside[x] = 1;
        members.push_back(x);
        for (EdgeId e : g.incident(x)) {
            const Vertex y = g.other(e, x);
            if (y != x) {
                ++nin[y];
            }
        }
    };
    std::vector<Vertex> starts(n);
    std::iota(starts.begin(), starts.end(), 0);
    shuffle_in_place(std::span<Vertex>(starts), rng);
    const std::size_t restarts = std::min<std::size_t>(n, 64);
    for (std::size_t s = 0; s < restarts; ++s) {
        std::fill(inside.begin(), inside.end(), 0);
        std::fill(nin.begin(), nin.end(), 0);
        members.clear();
        long long cut = 0;
        auto grow = [&](Vertex x) {
            long long loops = 0;
            for (EdgeId e : g.incident(x)) {
                loops += g.other(e, x) == x;
            }
            cut += static_cast<long long>(d) - loops - 2 * nin[x];
            add(x);
        };
        grow(starts[s]);
        auto consider = [&] {
            const double ratio =
                static_cast<double>(cut) / static_cast<double>(d * members.size());
            if (ratio < res.value) {
                res.value = ratio;
                res.witness = members;
            }
        };
        consider();
        while (members.size() < cap) {
            // Greedy: the outside neighbour with most edges into S.
            Vertex best = kNoVertex;
            long long best_nin = -1;
            for (Vertex m : members) {
                for (EdgeId e : g.incident(m)) {
                    const Vertex y = g.other(e, m);
                    if (!inside[y] && nin[y] > best_nin) {
                        best = y;
                        best_nin = nin[y];
                    }
                }
            }
            if (best == kNoVertex) {
                break;  // S is a whole component
            }
            grow(best);
            consider();
        }
    }
    std::sort(res.witness.begin(), res.witness.end());
    return res;
}

inline ExpansionResult expansion_profile(const Graph& g, double eps, ExpansionMode mode) {
    if (!(eps > 0.0 && eps <= 0.5)) {
        throw PreconditionError("expansion_profile: eps must lie in (0, 1/2]");
    }
    return mode == ExpansionMode::Exact ? expansion_profile_exact(g, eps)
                                        : expansion_profile_heuristic(g, eps);
}

enum class ClassVerdict { Member, NotMember, Unknown };

struct ClassReport {
    ClassVerdict verdict = ClassVerdict::Unknown;
    ExpansionResult half;   // phi(1/2)
    ExpansionResult small;  // phi(delta)
    bool half_ok = false;
    bool small_ok = false;
};

/// Both thresholds with per-threshold detail. Heuristic values are upper
/// bounds, so that mode can refute membership but never confirm it.
inline ClassReport in_class_G_delta(const Graph& g, double delta, ExpansionMode mode) {
    ClassReport rep;
    rep.half = expansion_profile(g, 0.5, mode);
    rep.small = expansion_profile(g, delta, mode);
    rep.half_ok = rep.half.value >= 0.1;
    rep.small_ok = rep.small.value >= 5.0 / 9.0;
    const bool pass = rep.half_ok && rep.small_ok;
    if (mode == ExpansionMode::Exact) {
        rep.verdict = pass ? ClassVerdict::Member : ClassVerdict::NotMember;
    } else {
        rep.verdict = pass ? ClassVerdict::Unknown : ClassVerdict::NotMember;
    }
    return rep;
}

}  // namespace rclab

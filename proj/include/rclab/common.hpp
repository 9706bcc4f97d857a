// rclab/common.hpp
//
// Shared vocabulary for the random-cluster laboratory: index types, the
// exception hierarchy, deterministic random helpers and log-domain arithmetic.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace rclab {

using Vertex = std::uint32_t;
using EdgeId = std::uint32_t;

inline constexpr Vertex kNoVertex = std::numeric_limits<Vertex>::max();
inline constexpr EdgeId kNoEdge = std::numeric_limits<EdgeId>::max();

// ---------------------------------------------------------------------------
// Errors. Every failure mode the library reports distinctly gets its own type
// so callers (and the CLI exit-code mapping) can tell them apart.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// The input is larger than an exact method is allowed to handle.
class SizeCapError : public Error {
public:
    using Error::Error;
};

/// Simple-graph generation ran out of its rejection budget.
class RejectionBudgetExceeded : public Error {
public:
    using Error::Error;
};

/// A configuration was passed where a phase (ordered/disordered) was required.
class PhaseViolation : public Error {
public:
    using Error::Error;
};

/// A restricted or conditioned distribution has no support.
class EmptySupportError : public Error {
public:
    using Error::Error;
};

/// An internal invariant failed. Always a bug, never data.
class InvariantViolation : public Error {
public:
    using Error::Error;
};

/// Two objects that must live on the same space (edge count, state count) do not.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic randomness. std::uniform_*_distribution is implementation
// defined, so bounded integers and unit uniforms are derived by hand from the
// raw 64-bit engine output; identical seeds give identical streams everywhere.

/// SplitMix64 step, used to derive independent sub-seeds from one seed.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
    std::uint64_t s = seed ^ (salt * 0xd1b54a32d192ed03ULL);
    splitmix64(s);
    return splitmix64(s);
}

/// Uniform double in [0, 1) with 53 random bits.
template <class Engine>
double uniform01(Engine& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) by rejection on the top of the range.
template <class Engine>
std::uint64_t uniform_below(Engine& rng, std::uint64_t bound) {
    if (bound <= 1) {
        return 0;
    }
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = rng();
    while (x >= limit) {
        x = rng();
    }
    return x % bound;
}

/// Fisher-Yates shuffle driven by uniform_below.
template <class T, class Engine>
void shuffle_in_place(std::span<T> values, Engine& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(values[i - 1], values[j]);
    }
}

// ---------------------------------------------------------------------------
// Log-domain helpers.

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add_exp(double a, double b) noexcept {
    if (a == kNegInf) {
        return b;
    }
    if (b == kNegInf) {
        return a;
    }
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

inline double log_sum_exp(std::span<const double> xs) noexcept {
    double hi = kNegInf;
    for (double x : xs) {
        hi = std::max(hi, x);
    }
    if (hi == kNegInf) {
        return kNegInf;
    }
    double acc = 0.0;
    for (double x : xs) {
        acc += std::exp(x - hi);
    }
    return hi + std::log(acc);
}

/// log(e^beta - 1), accurate for small and large beta.
inline double log_expm1(double beta) noexcept {
    if (beta > 30.0) {
        return beta + std::log1p(-std::exp(-beta));
    }
    return std::log(std::expm1(beta));
}

/// FNV-1a over raw bytes; used for graph hashes in provenance fields.
inline std::uint64_t fnv1a(std::span<const unsigned char> bytes,
                           std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace rclab

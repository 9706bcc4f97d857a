// rclab/model.hpp
//
// Random-cluster model: parameters and derived constants, full and partial
// edge configurations, weights (log domain), phases and boundary classes.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rclab/ball.hpp"
#include "rclab/graph.hpp"
#include "rclab/union_find.hpp"

namespace rclab {

// ---------------------------------------------------------------------------
// Parameters.

struct ParamOptions {
    double delta_class = 0.1;        // expansion-class delta, feeds eta
    std::optional<double> eta = {};  // override
    std::optional<double> zeta = {}; // override
};

class ModelParams {
public:
    ModelParams() = default;

    /// q >= 1 (q = 1 is plain bond percolation), beta > 0.
    ModelParams(double q, double beta, std::size_t delta_deg, ParamOptions opt = {})
        : q_(q), beta_(beta), delta_deg_(delta_deg) {
        if (!(q >= 1.0) || !std::isfinite(q)) {
            throw PreconditionError("params: q must be a finite real >= 1");
        }
        if (!(beta > 0.0) || !std::isfinite(beta)) {
            throw PreconditionError("params: beta must be a finite real > 0");
        }
        if (!(opt.delta_class > 0.0 && opt.delta_class < 0.5)) {
            throw PreconditionError("params: class delta must lie in (0, 1/2)");
        }
        delta_class_ = opt.delta_class;
        eta_ = opt.eta.value_or(std::min(opt.delta_class / 5.0, 0.01));
        if (!(eta_ > 0.0 && eta_ < 0.5)) {
            throw PreconditionError("params: eta must lie in (0, 1/2)");
        }
        if (opt.zeta) {
            zeta_ = *opt.zeta;
            if (!(zeta_ > 0.0 && zeta_ < eta_)) {
                throw PreconditionError("params: zeta must lie in (0, eta)");
            }
        } else {
            // The textbook choice 20*D/log q only drops below eta for
            // astronomically large q; clamp and say so.
            const double raw = q_ > 1.0 ? 20.0 * static_cast<double>(delta_deg) / std::log(q_)
                                        : std::numeric_limits<double>::infinity();
            if (raw < eta_) {
                zeta_ = raw;
            } else {
                zeta_ = eta_ / 2.0;
                zeta_clamped_ = true;
            }
        }
        log_q_ = std::log(q_);
        log_w_edge_ = log_expm1(beta_);
        p_ = -std::expm1(-beta_);
        // p_hat = (e^b - 1) / (q + e^b - 1), written to stay finite for large beta.
        p_hat_ = 1.0 / (1.0 + q_ * std::exp(-log_w_edge_));
    }

    double q() const noexcept { return q_; }
    double beta() const noexcept { return beta_; }
    std::size_t delta_deg() const noexcept { return delta_deg_; }
    double delta_class() const noexcept { return delta_class_; }
    double eta() const noexcept { return eta_; }
    double zeta() const noexcept { return zeta_; }
    bool zeta_clamped() const noexcept { return zeta_clamped_; }

    double p() const noexcept { return p_; }
    double p_hat() const noexcept { return p_hat_; }
    double log_q() const noexcept { return log_q_; }
    /// log(e^beta - 1): the log-weight of one in-edge.
    double log_edge_weight() const noexcept { return log_w_edge_; }

    ModelParams with_beta(double beta) const {
        ParamOptions o;
        o.delta_class = delta_class_;
        o.eta = eta_;
        if (!zeta_clamped_) {
            o.zeta = zeta_;
        }
        return ModelParams(q_, beta, delta_deg_, o);
    }

private:
    double q_ = 2.0;
    double beta_ = 1.0;
    std::size_t delta_deg_ = 3;
    double delta_class_ = 0.1;
    double eta_ = 0.01;
    double zeta_ = 0.005;
    bool zeta_clamped_ = false;
    double p_ = 0.0;
    double p_hat_ = 0.0;
    double log_q_ = 0.0;
    double log_w_edge_ = 0.0;
};

struct CriticalBeta {
    double value = 0.0;       // log((q-2) / ((q-1)^{1-2/D} - 1))
    double asymptotic = 0.0;  // 2 log q / D
};

inline CriticalBeta beta_c(double q, std::size_t delta_deg) {
    if (!(q > 2.0)) {
        throw PreconditionError("beta_c: need q > 2");
    }
    if (delta_deg < 3) {
        throw PreconditionError("beta_c: need degree >= 3");
    }
    const double d = static_cast<double>(delta_deg);
    const double denom = std::expm1((1.0 - 2.0 / d) * std::log(q - 1.0));
    return {std::log(q - 2.0) - std::log(denom), 2.0 * std::log(q) / d};
}

// ---------------------------------------------------------------------------
// Configurations.

class Configuration {
public:
    Configuration() = default;
    explicit Configuration(std::size_t m, bool value = false)
        : m_(m), words_((m + 63) / 64, value ? ~std::uint64_t{0} : 0), count_(value ? m : 0) {
        trim();
    }

    static Configuration all_in(std::size_t m) { return Configuration(m, true); }
    static Configuration all_out(std::size_t m) { return Configuration(m, false); }

    /// Bit e of `mask` is edge e; m <= 64.
    static Configuration from_mask(std::size_t m, std::uint64_t mask) {
        if (m > 64) {
            throw PreconditionError("configuration: mask form needs m <= 64");
        }
        Configuration c(m);
        if (m > 0) {
            c.words_[0] = m == 64 ? mask : (mask & ((std::uint64_t{1} << m) - 1));
            c.count_ = static_cast<std::size_t>(std::popcount(c.words_[0]));
        }
        return c;
    }

    std::uint64_t to_mask() const {
        if (m_ > 64) {
            throw PreconditionError("configuration: mask form needs m <= 64");
        }
        return m_ == 0 ? 0 : words_[0];
    }

    std::size_t size() const noexcept { return m_; }
    std::size_t in_count() const noexcept { return count_; }
    std::size_t out_count() const noexcept { return m_ - count_; }

    bool operator[](EdgeId e) const { return (words_[e >> 6] >> (e & 63)) & 1; }

    void set(EdgeId e, bool value) {
        auto& w = words_[e >> 6];
        const std::uint64_t bit = std::uint64_t{1} << (e & 63);
        const bool old = (w & bit) != 0;
        if (old == value) {
            return;
        }
        w ^= bit;
        if (value) {
            ++count_;
        } else {
            --count_;
        }
    }

    std::vector<EdgeId> in_edges() const {
        std::vector<EdgeId> out;
        for (EdgeId e = 0; e < m_; ++e) {
            if ((*this)[e]) {
                out.push_back(e);
            }
        }
        return out;
    }

    std::vector<EdgeId> out_edges() const {
        std::vector<EdgeId> out;
        for (EdgeId e = 0; e < m_; ++e) {
            if (!(*this)[e]) {
                out.push_back(e);
            }
        }
        return out;
    }

    /// In(this) subset of In(other).
    bool subset_of(const Configuration& other) const {
        if (m_ != other.m_) {
            throw DimensionMismatch("configuration: edge counts differ");
        }
        for (std::size_t i = 0; i < words_.size(); ++i) {
            if (words_[i] & ~other.words_[i]) {
                return false;
            }
        }
        return true;
    }

    const std::vector<std::uint64_t>& words() const noexcept { return words_; }

    friend bool operator==(const Configuration& a, const Configuration& b) {
        return a.m_ == b.m_ && a.words_ == b.words_;
    }

    /// "m:hex", most significant nibble first; bit e of the number is edge e.
    std::string to_hex() const {
        static constexpr char digits[] = "0123456789abcdef";
        std::string s = std::to_string(m_) + ":";
        const std::size_t nibbles = std::max<std::size_t>(1, (m_ + 3) / 4);
        for (std::size_t k = nibbles; k-- > 0;) {
            unsigned v = 0;
            for (unsigned b = 0; b < 4; ++b) {
                const std::size_t e = 4 * k + b;
                if (e < m_ && (*this)[static_cast<EdgeId>(e)]) {
                    v |= 1u << b;
                }
            }
            s.push_back(digits[v]);
        }
        return s;
    }

    static Configuration from_hex(const std::string& s) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) {
            throw PreconditionError("configuration hex: missing 'm:' header");
        }
        const std::size_t m = std::stoull(s.substr(0, colon));
        const std::string hex = s.substr(colon + 1);
        const std::size_t nibbles = std::max<std::size_t>(1, (m + 3) / 4);
        if (hex.size() != nibbles) {
            throw PreconditionError("configuration hex: wrong digit count");
        }
        Configuration c(m);
        for (std::size_t i = 0; i < nibbles; ++i) {
            const char ch = hex[i];
            unsigned v = 0;
            if (ch >= '0' && ch <= '9') {
                v = static_cast<unsigned>(ch - '0');
            } else if (ch >= 'a' && ch <= 'f') {
                v = static_cast<unsigned>(ch - 'a' + 10);
            } else if (ch >= 'A' && ch <= 'F') {
                v = static_cast<unsigned>(ch - 'A' + 10);
            } else {
                throw PreconditionError("configuration hex: bad digit");
            }
            const std::size_t k = nibbles - 1 - i;
            for (unsigned b = 0; b < 4; ++b) {
                if (v >> b & 1) {
                    const std::size_t e = 4 * k + b;
                    if (e >= m) {
                        throw PreconditionError("configuration hex: bit beyond edge count");
                    }
                    c.set(static_cast<EdgeId>(e), true);
                }
            }
        }
        return c;
    }

private:
    void trim() {
        if (m_ % 64 != 0 && !words_.empty()) {
            words_.back() &= (std::uint64_t{1} << (m_ % 64)) - 1;
        }
    }

    std::size_t m_ = 0;
    std::vector<std::uint64_t> words_;
    std::size_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Partial configurations over {0, 1, *}.

enum class EdgeState : std::uint8_t { Out = 0, In = 1, Hidden = 2 };

class PartialConfiguration {
public:
    PartialConfiguration() = default;
    explicit PartialConfiguration(std::size_t m) : s_(m, EdgeState::Hidden) {}

    explicit PartialConfiguration(const Configuration& f) : s_(f.size()) {
        for (EdgeId e = 0; e < f.size(); ++e) {
            s_[e] = f[e] ? EdgeState::In : EdgeState::Out;
        }
    }

    /// Reveal only `edges` from f.
    static PartialConfiguration restrict(const Configuration& f, std::span<const EdgeId> edges) {
        PartialConfiguration a(f.size());
        for (EdgeId e : edges) {
            a.s_[e] = f[e] ? EdgeState::In : EdgeState::Out;
        }
        return a;
    }

    /// Every edge in `edges` revealed with the same value, the rest hidden.
    static PartialConfiguration uniform(std::size_t m, std::span<const EdgeId> edges, bool in) {
        PartialConfiguration a(m);
        for (EdgeId e : edges) {
            a.s_[e] = in ? EdgeState::In : EdgeState::Out;
        }
        return a;
    }

    std::size_t size() const noexcept { return s_.size(); }
    EdgeState operator[](EdgeId e) const { return s_[e]; }
    void set(EdgeId e, EdgeState v) { s_[e] = v; }

    bool revealed(EdgeId e) const { return s_[e] != EdgeState::Hidden; }
    bool is_in(EdgeId e) const { return s_[e] == EdgeState::In; }

    std::vector<EdgeId> revealed_set() const { return select([](EdgeState x) { return x != EdgeState::Hidden; }); }
    std::vector<EdgeId> hidden_set() const { return select([](EdgeState x) { return x == EdgeState::Hidden; }); }
    std::vector<EdgeId> in_set() const { return select([](EdgeState x) { return x == EdgeState::In; }); }
    std::vector<EdgeId> out_set() const { return select([](EdgeState x) { return x == EdgeState::Out; }); }

    std::size_t in_count() const {
        return static_cast<std::size_t>(std::count(s_.begin(), s_.end(), EdgeState::In));
    }
    std::size_t revealed_count() const {
        return s_.size() - static_cast<std::size_t>(std::count(s_.begin(), s_.end(), EdgeState::Hidden));
    }

    bool is_full() const { return revealed_count() == s_.size(); }

    Configuration to_configuration() const {
        if (!is_full()) {
            throw PreconditionError("partial configuration: not fully revealed");
        }
        Configuration f(s_.size());
        for (EdgeId e = 0; e < s_.size(); ++e) {
            f.set(e, s_[e] == EdgeState::In);
        }
        return f;
    }

    /// a is refined by b: In(a) subset In(b) and Out(a) subset Out(b).
    friend bool refines(const PartialConfiguration& a, const PartialConfiguration& b) {
        if (a.size() != b.size()) {
            throw DimensionMismatch("partial configuration: edge counts differ");
        }
        for (std::size_t e = 0; e < a.s_.size(); ++e) {
            if (a.s_[e] != EdgeState::Hidden && a.s_[e] != b.s_[e]) {
                return false;
            }
        }
        return true;
    }

    friend bool operator==(const PartialConfiguration&, const PartialConfiguration&) = default;

    /// Pattern string, one character per edge: '0', '1' or '*'.
    std::string to_string() const {
        std::string out(s_.size(), '*');
        for (std::size_t e = 0; e < s_.size(); ++e) {
            if (s_[e] != EdgeState::Hidden) {
                out[e] = s_[e] == EdgeState::In ? '1' : '0';
            }
        }
        return out;
    }

private:
    template <class Pred>
    std::vector<EdgeId> select(Pred p) const {
        std::vector<EdgeId> out;
        for (EdgeId e = 0; e < s_.size(); ++e) {
            if (p(s_[e])) {
                out.push_back(e);
            }
        }
        return out;
    }

    std::vector<EdgeState> s_;
};

/// Union of partial configurations with disjoint revealed sets.
inline PartialConfiguration unite(const PartialConfiguration& a, const PartialConfiguration& b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("partial configuration: edge counts differ");
    }
    PartialConfiguration out = a;
    for (EdgeId e = 0; e < a.size(); ++e) {
        if (b.revealed(e)) {
            if (a.revealed(e)) {
                throw PreconditionError("union: revealed sets overlap");
            }
            out.set(e, b[e]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Components and weights.

template <class InPred>
std::size_t count_components(const Graph& g, InPred in) {
    UnionFind uf(g.num_vertices());
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        if (in(e)) {
            uf.unite(g.ends(e).u, g.ends(e).v);
        }
    }
    return uf.sets();
}

/// c(F): components of (V, In(F)); isolated vertices count.
inline std::size_t component_count(const Graph& g, const Configuration& f) {
    if (f.size() != g.num_edges()) {
        throw DimensionMismatch("component_count: configuration length != edge count");
    }
    return count_components(g, [&](EdgeId e) { return f[e]; });
}

/// log w(F) = c(F) log q + |F| log(e^beta - 1).
inline double log_weight(const Graph& g, const Configuration& f, const ModelParams& mp) {
    const auto c = component_count(g, f);
    return static_cast<double>(c) * mp.log_q() + static_cast<double>(f.in_count()) * mp.log_edge_weight();
}

/// c-hat: components of (B_r, In(F) restricted to E(B_r)) avoiding the shell.
/// Only ball edges of f are read.
inline std::size_t wired_component_count(const Graph& g, const BallView& b, const Configuration& f) {
    const auto& vs = b.vertices();
    UnionFind uf(vs.size());
    for (EdgeId e : b.edges()) {
        if (f[e]) {
            uf.unite(b.local_index(g.ends(e).u), b.local_index(g.ends(e).v));
        }
    }
    std::vector<char> touches(vs.size(), 0);
    for (Vertex s : b.shell()) {
        touches[uf.find(b.local_index(s))] = 1;
    }
    std::size_t count = 0;
    for (std::uint32_t i = 0; i < vs.size(); ++i) {
        if (uf.find(i) == i && !touches[i]) {
            ++count;
        }
    }
    return count;
}

// ---------------------------------------------------------------------------
// Phases.

enum class PhaseLabel { Ordered, Disordered, Neither };

inline const char* to_string(PhaseLabel p) {
    switch (p) {
        case PhaseLabel::Ordered: return "ordered";
        case PhaseLabel::Disordered: return "disordered";
        case PhaseLabel::Neither: return "neither";
    }
    return "?";
}

inline constexpr double kPhaseSlack = 1e-9;

inline bool is_ordered_count(std::size_t in_count, std::size_t m, double eta) {
    return static_cast<double>(in_count) + kPhaseSlack >= (1.0 - eta) * static_cast<double>(m);
}

inline bool is_disordered_count(std::size_t in_count, std::size_t m, double eta) {
    return static_cast<double>(in_count) <= eta * static_cast<double>(m) + kPhaseSlack;
}

inline PhaseLabel phase_of_count(std::size_t in_count, std::size_t m, double eta) {
    if (is_ordered_count(in_count, m, eta)) {
        return PhaseLabel::Ordered;
    }
    if (is_disordered_count(in_count, m, eta)) {
        return PhaseLabel::Disordered;
    }
    return PhaseLabel::Neither;
}

inline PhaseLabel phase_of(const Configuration& f, const ModelParams& mp, std::size_t m) {
    if (f.size() != m) {
        throw DimensionMismatch("phase_of: configuration length != edge count");
    }
    return phase_of_count(f.in_count(), m, mp.eta());
}

// ---------------------------------------------------------------------------
// Boundary component set xi(A).

/// Vertices incident to both a revealed and a hidden edge.
inline std::vector<Vertex> boundary_vertices(const Graph& g, const PartialConfiguration& a) {
    std::vector<Vertex> out;
    for (Vertex x = 0; x < g.num_vertices(); ++x) {
        bool rev = false;
        bool hid = false;
        for (EdgeId e : g.incident(x)) {
            (a.revealed(e) ? rev : hid) = true;
        }
        if (rev && hid) {
            out.push_back(x);
        }
    }
    return out;
}

/// Same test against an explicit edge set F (given as a membership mask).
inline std::vector<Vertex> boundary_of_edge_set(const Graph& g, const std::vector<char>& in_f) {
    std::vector<Vertex> out;
    for (Vertex x = 0; x < g.num_vertices(); ++x) {
        bool a = false;
        bool b = false;
        for (EdgeId e : g.incident(x)) {
            (in_f[e] ? a : b) = true;
        }
        if (a && b) {
            out.push_back(x);
        }
    }
    return out;
}

using BoundaryPartition = std::vector<std::vector<Vertex>>;

/// Classes of boundary vertices under connectivity in G[In(A)]; sorted
/// classes of sorted vertices.
inline BoundaryPartition boundary_component_set(const Graph& g, const PartialConfiguration& a) {
    if (a.size() != g.num_edges()) {
        throw DimensionMismatch("boundary_component_set: length != edge count");
    }
    UnionFind uf(g.num_vertices());
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        if (a.is_in(e)) {
            uf.unite(g.ends(e).u, g.ends(e).v);
        }
    }
    std::map<std::uint32_t, std::vector<Vertex>> classes;
    for (Vertex x : boundary_vertices(g, a)) {
        classes[uf.find(x)].push_back(x);
    }
    BoundaryPartition out;
    for (auto& [root, vs] : classes) {
        out.push_back(std::move(vs));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace rclab

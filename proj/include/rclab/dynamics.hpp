// rclab/dynamics.hpp
//
// Single-edge heat-bath chain for the RC measure, its ball-local free and
// wired versions, monotone couplings and mixing diagnostics.
//
// One step = one edge update attempt. Every update is "in iff U < threshold"
// with threshold p_hat for a would-be cut edge and p otherwise; since
// p_hat <= p, chains driven by the same (e, U) stay ordered.
#pragma once

#include <optional>
#include <random>
#include <unordered_map>
#include <vector>

#include "rclab/ball.hpp"
#include "rclab/connectivity.hpp"
#include "rclab/model.hpp"
#include "rclab/oracle.hpp"

namespace rclab {

struct StepDraw {
    EdgeId edge;
    double u;
};

/// Two independent mt19937_64 streams (edge choice, uniform) derived from one
/// seed. Chains sharing a stream object see the same (e_t, U_t) sequence.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed)
        : seed_(seed), edge_rng_(derive_seed(seed, 1)), u_rng_(derive_seed(seed, 2)) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

    StepDraw next(std::size_t m) {
        ++counter_;
        const auto e = static_cast<EdgeId>(uniform_below(edge_rng_, m));
        return {e, uniform01(u_rng_)};
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    std::mt19937_64 edge_rng_;
    std::mt19937_64 u_rng_;
};

enum class RejectionPolicy { None, OutsideOrdered, OutsideDisordered };

struct StepOutcome {
    bool changed = false;
    bool rejected = false;
    bool queried = false;  // whether connectivity had to be consulted
};

/// Decide the new value of an edge from its draw. The connectivity query is
/// skipped when U falls outside [p_hat, p), where the answer cannot matter.
template <class CutQuery>
bool decide_in(double u, const ModelParams& mp, CutQuery&& is_cut, bool* queried = nullptr) {
    if (u < mp.p_hat()) {
        return true;
    }
    if (u >= mp.p()) {
        return false;
    }
    if (queried) {
        *queried = true;
    }
    return !is_cut();
}

/// X_t together with its connectivity mirror.
template <ConnectivityEngine Engine = DefaultConnectivity>
class ChainState {
public:
    ChainState(const Graph& g, const Configuration& x0) : g_(&g), x_(x0), mirror_(g) {
        if (x0.size() != g.num_edges()) {
            throw DimensionMismatch("chain: initial configuration length differs from edge count");
        }
        for (EdgeId e : x0.in_edges()) {
            mirror_.insert(e);
        }
    }

    const Graph& graph() const noexcept { return *g_; }
    const Configuration& config() const noexcept { return x_; }
    std::uint64_t time() const noexcept { return t_; }
    std::size_t in_count() const noexcept { return x_.in_count(); }
    std::size_t components() const { return mirror_.num_components(); }
    EdgeMirror<Engine>& mirror() noexcept { return mirror_; }

    bool would_be_cut_edge(EdgeId e) { return mirror_.would_be_cut_edge(e); }

    /// Applies one draw. With a rejection policy the tentative value is kept
    /// only if the resulting configuration stays in the phase.
    StepOutcome apply(const StepDraw& d, const ModelParams& mp, RejectionPolicy policy = RejectionPolicy::None) {
        ++t_;
        StepOutcome out;
        const bool cur = x_[d.edge];
        const bool next = decide_in(d.u, mp, [&] { return mirror_.would_be_cut_edge(d.edge); }, &out.queried);
        if (next == cur) {
            return out;
        }
        const std::size_t m = x_.size();
        const std::size_t k = x_.in_count() + (next ? 1 : 0) - (next ? 0 : 1);
        if ((policy == RejectionPolicy::OutsideOrdered && !is_ordered_count(k, m, mp.eta())) ||
            (policy == RejectionPolicy::OutsideDisordered && !is_disordered_count(k, m, mp.eta()))) {
            out.rejected = true;
            return out;
        }
        x_.set(d.edge, next);
        if (next) {
            mirror_.insert(d.edge);
        } else {
            mirror_.erase(d.edge);
        }
        out.changed = true;
        return out;
    }

    /// Mirror agrees with the configuration (BFS recount of components).
    bool consistent() const {
        for (EdgeId e = 0; e < x_.size(); ++e) {
            if (mirror_.contains(e) != x_[e]) {
                return false;
            }
        }
        return mirror_.num_components() == component_count(*g_, x_);
    }

private:
    const Graph* g_;
    Configuration x_;
    EdgeMirror<Engine> mirror_;
    std::uint64_t t_ = 0;
};

template <ConnectivityEngine Engine>
StepOutcome glauber_step(ChainState<Engine>& s, const ModelParams& mp, RngStream& rng,
                         RejectionPolicy policy = RejectionPolicy::None) {
    const std::size_t m = s.graph().num_edges();
    if (m == 0) {
        return {};
    }
    return s.apply(rng.next(m), mp, policy);
}

struct TrajectoryPoint {
    std::uint64_t t;
    std::size_t in_count;
    std::size_t components;
    PhaseLabel phase;
};

struct RunSummary {
    Configuration final_config;
    std::vector<TrajectoryPoint> series;
    std::uint64_t steps = 0;
    std::uint64_t connectivity_queries = 0;
};

/// Runs `steps` updates from x0, recording a point every `stride` steps
/// (and at t = 0 and at the end).
template <ConnectivityEngine Engine = DefaultConnectivity>
RunSummary run_chain(const Graph& g, const ModelParams& mp, const Configuration& x0, std::uint64_t steps,
                     std::uint64_t seed, std::uint64_t stride = 0) {
    ChainState<Engine> s(g, x0);
    RngStream rng(seed);
    RunSummary out{x0, {}, steps, 0};
    const std::size_t m = g.num_edges();
    auto record = [&] {
        out.series.push_back({s.time(), s.in_count(), s.components(), phase_of_count(s.in_count(), m, mp.eta())});
    };
    if (stride) {
        record();
    }
    for (std::uint64_t i = 0; i < steps; ++i) {
        out.connectivity_queries += glauber_step(s, mp, rng).queried;
        if (stride && (s.time() % stride == 0 || i + 1 == steps)) {
            record();
        }
    }
    out.final_config = s.config();
    return out;
}

enum class Boundary { Free, Wired };

/// Chain on E(B_r(v)) only. Free: everything outside the ball is out.
/// Wired: everything outside is in, which for connectivity inside the ball
/// amounts to contracting the shell to one vertex.
template <ConnectivityEngine Engine = DefaultConnectivity>
class LocalChain {
public:
    LocalChain(const Graph& g, const BallView& b, Boundary boundary, const Configuration& x0_local)
        : boundary_(boundary), global_edges_(b.edges()), local_graph_(build(g, b, boundary)),
          state_(local_graph_, x0_local) {
        for (std::size_t i = 0; i < global_edges_.size(); ++i) {
            local_of_.emplace(global_edges_[i], static_cast<EdgeId>(i));
        }
    }

    LocalChain(const Graph& g, const BallView& b, Boundary boundary)
        : LocalChain(g, b, boundary,
                     boundary == Boundary::Free ? Configuration::all_out(b.edges().size())
                                                : Configuration::all_in(b.edges().size())) {}

    // state_ points into local_graph_
    LocalChain(const LocalChain&) = delete;
    LocalChain& operator=(const LocalChain&) = delete;

    Boundary boundary() const noexcept { return boundary_; }
    const Configuration& config() const noexcept { return state_.config(); }
    const std::vector<EdgeId>& global_edges() const noexcept { return global_edges_; }
    const Graph& local_graph() const noexcept { return local_graph_; }

    std::optional<EdgeId> local_edge(EdgeId global) const {
        auto it = local_of_.find(global);
        if (it == local_of_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    /// Applies a draw made for the whole graph; a no-op off the ball.
    StepOutcome apply_global(const StepDraw& d, const ModelParams& mp) {
        auto le = local_edge(d.edge);
        if (!le) {
            return {};
        }
        return state_.apply({*le, d.u}, mp);
    }

    /// Picks a ball edge uniformly.
    StepOutcome step(const ModelParams& mp, RngStream& rng) { return glauber_step(state_, mp, rng); }

    bool would_be_cut_edge(EdgeId local) { return state_.would_be_cut_edge(local); }
    bool consistent() const { return state_.consistent(); }

private:
    // Local vertex ids follow BallView order; with a wired boundary the shell
    // vertices are dropped and replaced by a single last id.
    static Graph build(const Graph& g, const BallView& b, Boundary boundary) {
        const auto& vs = b.vertices();
        const bool wire = boundary == Boundary::Wired && !b.shell().empty();
        std::vector<Vertex> ids(vs.size());
        Vertex next = 0;
        for (std::size_t i = 0; i < vs.size(); ++i) {
            if (!(wire && b.in_shell(vs[i]))) {
                ids[i] = next++;
            }
        }
        const Vertex sink = next;
        auto id = [&](Vertex x) { return wire && b.in_shell(x) ? sink : ids[b.local_index(x)]; };
        std::vector<EdgeEnds> es;
        es.reserve(b.edges().size());
        for (EdgeId e : b.edges()) {
            es.push_back({id(g.ends(e).u), id(g.ends(e).v)});
        }
        return Graph(next + (wire ? 1 : 0), std::move(es));
    }

    Boundary boundary_;
    std::vector<EdgeId> global_edges_;
    std::unordered_map<EdgeId, EdgeId> local_of_;
    Graph local_graph_;
    ChainState<Engine> state_;
};

/// Two chains driven by one stream. `ordered_violations` counts steps at which
/// In(lower) was not contained in In(upper) after the step.
template <ConnectivityEngine Engine = DefaultConnectivity>
class CoupledPair {
public:
    CoupledPair(const Graph& g, const Configuration& lower, const Configuration& upper, std::uint64_t seed,
                RejectionPolicy lower_policy = RejectionPolicy::None,
                RejectionPolicy upper_policy = RejectionPolicy::None)
        : lower_(g, lower), upper_(g, upper), rng_(seed), lower_policy_(lower_policy), upper_policy_(upper_policy) {
        for (EdgeId e = 0; e < g.num_edges(); ++e) {
            diff_ += lower[e] != upper[e];
        }
    }

    ChainState<Engine>& lower() noexcept { return lower_; }
    ChainState<Engine>& upper() noexcept { return upper_; }
    const RngStream& stream() const noexcept { return rng_; }
    std::uint64_t time() const noexcept { return lower_.time(); }
    std::size_t disagreements() const noexcept { return diff_; }
    bool coalesced() const noexcept { return diff_ == 0; }

    /// No rejection has fired in either chain so far.
    bool no_rejection_yet() const noexcept { return !first_rejection_; }
    std::optional<std::uint64_t> first_rejection() const noexcept { return first_rejection_; }

    bool nested() const { return lower_.config().subset_of(upper_.config()); }

    void step(const ModelParams& mp) {
        const std::size_t m = lower_.graph().num_edges();
        if (m == 0) {
            return;
        }
        const StepDraw d = rng_.next(m);
        const bool before = lower_.config()[d.edge] != upper_.config()[d.edge];
        const auto a = lower_.apply(d, mp, lower_policy_);
        const auto b = upper_.apply(d, mp, upper_policy_);
        if ((a.rejected || b.rejected) && !first_rejection_) {
            first_rejection_ = lower_.time();
        }
        const bool after = lower_.config()[d.edge] != upper_.config()[d.edge];
        diff_ += after;
        diff_ -= before;
    }

private:
    ChainState<Engine> lower_;
    ChainState<Engine> upper_;
    RngStream rng_;
    RejectionPolicy lower_policy_;
    RejectionPolicy upper_policy_;
    std::size_t diff_ = 0;
    std::optional<std::uint64_t> first_rejection_;
};

template <ConnectivityEngine Engine>
void monotone_coupled_step(CoupledPair<Engine>& c, const ModelParams& mp) {
    c.step(mp);
}

struct CoalescenceResult {
    bool coalesced = false;
    std::uint64_t steps = 0;  // coalescence time, or the cap when exceeded
};

/// Grand coupling of the all-out and all-in chains.
template <ConnectivityEngine Engine = DefaultConnectivity>
CoalescenceResult coalescence_time(const Graph& g, const ModelParams& mp, std::uint64_t seed, std::uint64_t cap) {
    const std::size_t m = g.num_edges();
    CoupledPair<Engine> c(g, Configuration::all_out(m), Configuration::all_in(m), seed);
    while (!c.coalesced()) {
        if (c.time() >= cap) {
            return {false, cap};
        }
        c.step(mp);
    }
    return {true, c.time()};
}

/// Empirical TV over the full configuration space.
inline double tv_distance_empirical(std::span<const std::uint64_t> sample_masks, const ExactDistribution& ref) {
    if (sample_masks.empty()) {
        throw PreconditionError("tv_distance_empirical: no samples");
    }
    std::unordered_map<std::uint64_t, double> freq;
    const double w = 1.0 / static_cast<double>(sample_masks.size());
    for (auto x : sample_masks) {
        if (x >= ref.states()) {
            throw DimensionMismatch("tv_distance_empirical: sample outside the reference space");
        }
        freq[x] += w;
    }
    double s = 0.0;
    for (std::uint64_t x = 0; x < ref.states(); ++x) {
        auto it = freq.find(x);
        s += std::abs((it == freq.end() ? 0.0 : it->second) - ref[x]);
    }
    return 0.5 * s;
}

inline double tv_distance_empirical(std::span<const Configuration> samples, const ExactDistribution& ref) {
    std::vector<std::uint64_t> masks;
    masks.reserve(samples.size());
    for (const auto& f : samples) {
        if (f.size() != ref.m) {
            throw DimensionMismatch("tv_distance_empirical: configuration length differs from reference");
        }
        masks.push_back(f.to_mask());
    }
    return tv_distance_empirical(std::span<const std::uint64_t>(masks), ref);
}

/// Empirical TV of the |In| statistic against a reference law on {0..m}.
/// This is a projection: it lower-bounds the full TV.
inline double tv_in_count_projected(std::span<const std::size_t> in_counts, std::span<const double> law) {
    if (in_counts.empty()) {
        throw PreconditionError("tv_in_count_projected: no samples");
    }
    std::vector<double> emp(law.size(), 0.0);
    for (auto k : in_counts) {
        if (k >= law.size()) {
            throw DimensionMismatch("tv_in_count_projected: count outside the law's support");
        }
        emp[k] += 1.0 / static_cast<double>(in_counts.size());
    }
    return exact_tv(std::span<const double>(emp), law);
}

/// Independent chains from x0, each run for `steps`; returns final masks.
template <ConnectivityEngine Engine = DefaultConnectivity>
std::vector<std::uint64_t> sample_final_masks(const Graph& g, const ModelParams& mp, const Configuration& x0,
                                              std::uint64_t steps, std::size_t samples, std::uint64_t seed) {
    if (g.num_edges() > 64) {
        throw SizeCapError("sample_final_masks: masks hold at most 64 edges");
    }
    std::vector<std::uint64_t> out;
    out.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        ChainState<Engine> s(g, x0);
        RngStream rng(derive_seed(seed, i));
        for (std::uint64_t t = 0; t < steps; ++t) {
            glauber_step(s, mp, rng);
        }
        out.push_back(s.config().to_mask());
    }
    return out;
}

struct MixingTimeResult {
    std::uint64_t t_mix = 0;
    std::vector<double> tv;  // tv[t] = TV(P^t(start, .), pi) for t = 0..t_mix
};

inline constexpr double kMixingThreshold = 0.25;

/// Smallest t with TV(P^t(start, .), pi) <= 1/4, from exact matrix powers.
inline MixingTimeResult exact_mixing_time(const Graph& g, const ModelParams& mp, const Configuration& start,
                                          std::uint64_t max_steps = 10'000'000) {
    if (start.size() != g.num_edges()) {
        throw DimensionMismatch("exact_mixing_time: start configuration length differs from edge count");
    }
    const auto t = exact_transition_matrix(g, mp);
    const auto pi = exact_distribution(g, mp).prob;
    std::vector<double> mu(t.states, 0.0);
    mu[start.to_mask()] = 1.0;
    MixingTimeResult r;
    for (std::uint64_t step = 0;; ++step) {
        r.tv.push_back(exact_tv(std::span<const double>(mu), std::span<const double>(pi)));
        if (r.tv.back() <= kMixingThreshold) {
            r.t_mix = step;
            return r;
        }
        if (step == max_steps) {
            throw SizeCapError("exact_mixing_time: no mixing within the step cap");
        }
        mu = t.apply(mu);
    }
}

}  // namespace rclab

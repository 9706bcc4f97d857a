// rclab/coupling_lab.hpp
//
// Spatial-mixing measurements and the revealing couplings that compare a
// phase-restricted measure with an extreme-boundary ball measure.
//
// Exact pieces enumerate (m <= 20); the chain sampler trades exactness for
// scale and says so in every outcome it produces.
#pragma once

#include <deque>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "rclab/ball.hpp"
#include "rclab/dynamics.hpp"
#include "rclab/oracle.hpp"
#include "rclab/polymers.hpp"

namespace rclab {

using Phase = Restriction::Phase;

enum class BallBoundary { Plus, Minus };
enum class MarginalMethod { Oracle, LocalChain };

// ---------------------------------------------------------------------------
// Ball marginals.

struct MarginalEstimate {
    double value = 0.0;
    double std_error = 0.0;
    bool exact = true;
    bool converged = true;
    std::uint64_t samples = 0;
    std::string diagnostics;
};

struct LocalChainOptions {
    std::uint64_t seed = 1;
    std::size_t burn_in_sweeps = 200;
    std::size_t sample_sweeps = 4000;
    std::size_t batches = 20;
};

namespace detail {

inline std::vector<char> ball_edge_mask(const Graph& g, const BallView& b) {
    std::vector<char> in_ball(g.num_edges(), 0);
    for (EdgeId e : b.edges()) {
        in_ball[e] = 1;
    }
    return in_ball;
}

inline std::size_t position_in(std::span<const EdgeId> edges, EdgeId e, const char* what) {
    auto it = std::lower_bound(edges.begin(), edges.end(), e);
    if (it == edges.end() || *it != e) {
        throw PreconditionError(std::string(what) + ": edge is not inside the ball");
    }
    return static_cast<std::size_t>(it - edges.begin());
}

inline void require_incident(const Graph& g, Vertex v, EdgeId e, const char* what) {
    if (e >= g.num_edges() || (g.ends(e).u != v && g.ends(e).v != v)) {
        throw PreconditionError(std::string(what) + ": edge is not incident to the ball center");
    }
}

// Exterior clamped, ball interior enumerated, components counted on all of G.
// The exterior is contracted first so each mask costs one small union-find.
inline double ball_marginal_exact(const Graph& g, const BallView& b, BallBoundary bd, EdgeId e,
                                  const ModelParams& mp) {
    const auto& be = b.edges();
    if (be.size() > kOracleMaxEdges) {
        throw SizeCapError("conditional_edge_marginal: " + std::to_string(be.size()) + " ball edges exceeds cap " +
                           std::to_string(kOracleMaxEdges));
    }
    const std::size_t pos = position_in(be, e, "conditional_edge_marginal");
    const auto in_ball = ball_edge_mask(g, b);
    UnionFind outer(g.num_vertices());
    if (bd == BallBoundary::Plus) {
        for (EdgeId f = 0; f < g.num_edges(); ++f) {
            if (!in_ball[f]) {
                outer.unite(g.ends(f).u, g.ends(f).v);
            }
        }
    }
    const std::size_t c0 = outer.sets();
    std::map<std::uint32_t, std::uint32_t> compact;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> ends;
    for (EdgeId f : be) {
        auto id = [&](Vertex x) {
            return compact.emplace(outer.find(x), static_cast<std::uint32_t>(compact.size())).first->second;
        };
        ends.emplace_back(id(g.ends(f).u), id(g.ends(f).v));
    }
    const std::size_t k = compact.size();
    const std::uint64_t total = std::uint64_t{1} << be.size();
    std::vector<double> lw(total);
    double hi = kNegInf;
    UnionFind uf(k);
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        uf.reset(k);
        std::size_t merges = 0;
        for (std::uint64_t bits = mask; bits; bits &= bits - 1) {
            const auto& [x, y] = ends[std::countr_zero(bits)];
            merges += uf.unite(x, y);
        }
        lw[mask] = static_cast<double>(c0 - merges) * mp.log_q() + std::popcount(mask) * mp.log_edge_weight();
        hi = std::max(hi, lw[mask]);
    }
    double z = 0.0, on = 0.0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        const double w = std::exp(lw[mask] - hi);
        z += w;
        if ((mask >> pos) & 1) {
            on += w;
        }
    }
    return on / z;
}

// Heat-bath on the ball edges of the full graph with the exterior clamped.
// Batch means give the standard error; split halves flag drift.
inline MarginalEstimate ball_marginal_chain(const Graph& g, const BallView& b, BallBoundary bd, EdgeId e,
                                            const ModelParams& mp, const LocalChainOptions& opt) {
    const auto& be = b.edges();
    position_in(be, e, "conditional_edge_marginal");
    // exterior clamped to the boundary value; the interior starts there too
    ChainState<> s(g, bd == BallBoundary::Plus ? Configuration::all_in(g.num_edges())
                                               : Configuration::all_out(g.num_edges()));
    std::mt19937_64 erng(derive_seed(opt.seed, 11)), urng(derive_seed(opt.seed, 12));
    auto step = [&] {
        s.apply({be[uniform_below(erng, be.size())], uniform01(urng)}, mp);
    };
    const std::uint64_t burn = opt.burn_in_sweeps * be.size();
    for (std::uint64_t t = 0; t < burn; ++t) {
        step();
    }
    const std::size_t batches = std::max<std::size_t>(opt.batches, 4);
    const std::uint64_t per = std::max<std::uint64_t>(1, opt.sample_sweeps * be.size() / batches);
    std::vector<double> means(batches, 0.0);
    for (std::size_t bi = 0; bi < batches; ++bi) {
        std::uint64_t hits = 0;
        for (std::uint64_t t = 0; t < per; ++t) {
            step();
            hits += s.config()[e];
        }
        means[bi] = static_cast<double>(hits) / static_cast<double>(per);
    }
    MarginalEstimate est;
    est.exact = false;
    est.samples = per * batches;
    double mean = 0.0;
    for (double x : means) {
        mean += x;
    }
    mean /= static_cast<double>(batches);
    double var = 0.0;
    for (double x : means) {
        var += (x - mean) * (x - mean);
    }
    var /= static_cast<double>(batches - 1);
    est.value = mean;
    est.std_error = std::sqrt(var / static_cast<double>(batches));
    double first = 0.0, second = 0.0;
    for (std::size_t bi = 0; bi < batches; ++bi) {
        (bi < batches / 2 ? first : second) += means[bi];
    }
    first /= static_cast<double>(batches / 2);
    second /= static_cast<double>(batches - batches / 2);
    const double drift = std::abs(first - second);
    const double allow = 4.0 * std::max(est.std_error, 1.0 / static_cast<double>(est.samples)) * std::sqrt(2.0);
    est.converged = drift <= allow;
    est.diagnostics = "batches=" + std::to_string(batches) + " per_batch=" + std::to_string(per) +
                      " half_drift=" + std::to_string(drift) + " allowed=" + std::to_string(allow);
    return est;
}

}  // namespace detail

/// pi conditioned on every edge outside E(B) being in (Plus) or out (Minus),
/// evaluated at e -> in. e must be incident to the ball center.
inline MarginalEstimate conditional_edge_marginal(const Graph& g, const BallView& b, BallBoundary bd, EdgeId e,
                                                  const ModelParams& mp, MarginalMethod method = MarginalMethod::Oracle,
                                                  const LocalChainOptions& opt = {}) {
    detail::require_incident(g, b.center(), e, "conditional_edge_marginal");
    if (method == MarginalMethod::Oracle) {
        MarginalEstimate est;
        est.value = detail::ball_marginal_exact(g, b, bd, e, mp);
        est.samples = std::uint64_t{1} << b.edges().size();
        return est;
    }
    return detail::ball_marginal_chain(g, b, bd, e, mp, opt);
}

/// Exact marginal of e under pi restricted to a phase (Any = unrestricted).
inline double phase_edge_marginal(const Graph& g, const ModelParams& mp, Phase phase, EdgeId e) {
    if (e >= g.num_edges()) {
        throw PreconditionError("phase_edge_marginal: edge out of range");
    }
    return exact_distribution(g, mp, Restriction{phase, std::nullopt}).edge_marginal(e);
}

struct WsmResult {
    double gap = 0.0;
    double ball_marginal = 0.0;
    double phase_marginal = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// |pi_{B_r^pm(v)}(e) - pi^phase(e)| against 1/(100 m). The ordered phase
/// (and Any) is compared with the plus ball, the disordered with the minus ball.
inline WsmResult wsm_check(const Graph& g, Vertex v, EdgeId e, std::size_t r, Phase phase, const ModelParams& mp) {
    const BallView b(g, v, r);
    const auto bd = phase == Phase::Disordered ? BallBoundary::Minus : BallBoundary::Plus;
    WsmResult res;
    res.ball_marginal = conditional_edge_marginal(g, b, bd, e, mp).value;
    res.phase_marginal = phase_edge_marginal(g, mp, phase, e);
    res.gap = std::abs(res.ball_marginal - res.phase_marginal);
    res.tolerance = 1.0 / (100.0 * static_cast<double>(g.num_edges()));
    res.pass = res.gap <= res.tolerance;
    return res;
}

// ---------------------------------------------------------------------------
// Conditional laws of partial configurations, from one cached weight table.

class ConditionalOracle {
public:
    ConditionalOracle(const Graph& g, const ModelParams& mp, std::size_t workers = 0) : g_(&g), mp_(mp) {
        const auto comps = component_table(g, workers);
        log_w_.resize(comps.size());
        for (std::uint64_t x = 0; x < comps.size(); ++x) {
            log_w_[x] = comps[x] * mp.log_q() + std::popcount(x) * mp.log_edge_weight();
        }
    }

    const Graph& graph() const noexcept { return *g_; }
    const ModelParams& params() const noexcept { return mp_; }
    std::size_t cache_size() const noexcept { return cache_.size(); }

    /// Law of the values on `next` (bit i <-> next[i]) under the measure
    /// conditioned to refine `a`, optionally restricted to a phase. Every
    /// edge of `next` must be hidden in `a`.
    const std::vector<double>& reveal_law(const PartialConfiguration& a, std::span<const EdgeId> next,
                                          Phase phase = Phase::Any) {
        const std::size_t m = g_->num_edges();
        if (a.size() != m) {
            throw DimensionMismatch("reveal_law: partial configuration length differs from edge count");
        }
        if (next.size() > 24) {
            throw SizeCapError("reveal_law: too many edges to reveal at once");
        }
        std::string key = a.to_string();
        key += '|';
        key += std::to_string(static_cast<int>(phase));
        for (EdgeId e : next) {
            if (e >= m || a.revealed(e)) {
                throw PreconditionError("reveal_law: edge to reveal is already revealed");
            }
            key += ',';
            key += std::to_string(e);
        }
        if (auto it = cache_.find(key); it != cache_.end()) {
            return it->second;
        }
        if (cache_.size() > 200000) {
            cache_.clear();
        }
        std::uint64_t hidden = 0, base = 0;
        for (EdgeId e = 0; e < m; ++e) {
            if (!a.revealed(e)) {
                hidden |= std::uint64_t{1} << e;
            } else if (a.is_in(e)) {
                base |= std::uint64_t{1} << e;
            }
        }
        const Restriction r{phase, std::nullopt};
        double hi = kNegInf;
        // submasks of `hidden`, including 0
        for (std::uint64_t s = hidden;; s = (s - 1) & hidden) {
            const auto x = base | s;
            if (restriction_admits(r, x, m, mp_.eta(), 0, 0)) {
                hi = std::max(hi, log_w_[x]);
            }
            if (s == 0) {
                break;
            }
        }
        if (hi == kNegInf) {
            throw EmptySupportError("reveal_law: no configuration refines the partial configuration in this phase");
        }
        std::vector<double> law(std::size_t{1} << next.size(), 0.0);
        double z = 0.0;
        for (std::uint64_t s = hidden;; s = (s - 1) & hidden) {
            const auto x = base | s;
            if (restriction_admits(r, x, m, mp_.eta(), 0, 0)) {
                const double w = std::exp(log_w_[x] - hi);
                std::size_t idx = 0;
                for (std::size_t i = 0; i < next.size(); ++i) {
                    idx |= static_cast<std::size_t>((x >> next[i]) & 1) << i;
                }
                law[idx] += w;
                z += w;
            }
            if (s == 0) {
                break;
            }
        }
        for (double& p : law) {
            p /= z;
        }
        return cache_.emplace(std::move(key), std::move(law)).first->second;
    }

    double edge_marginal(const PartialConfiguration& a, EdgeId e, Phase phase = Phase::Any) {
        const EdgeId one[1] = {e};
        return reveal_law(a, one, phase)[1];
    }

private:
    const Graph* g_;
    ModelParams mp_;
    std::vector<double> log_w_;
    std::map<std::string, std::vector<double>> cache_;
};

/// Writes the values of `idx` (bit i <-> edges[i]) into a copy of a.
inline PartialConfiguration extend(const PartialConfiguration& a, std::span<const EdgeId> edges, std::uint64_t idx) {
    PartialConfiguration out = a;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        out.set(edges[i], ((idx >> i) & 1) ? EdgeState::In : EdgeState::Out);
    }
    return out;
}

/// Hidden edges of `a` that lie in the target revealed set.
inline std::vector<EdgeId> newly_revealed(const PartialConfiguration& a, std::span<const EdgeId> target) {
    std::vector<EdgeId> out;
    for (EdgeId e : target) {
        if (!a.revealed(e)) {
            out.push_back(e);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Couplings of two laws on {0,1}^k.

struct CouplingPlan {
    std::vector<std::tuple<std::uint64_t, std::uint64_t, double>> cells;  // (x, y, mass)
    double tv = 0.0;
    bool maximal = false;
    bool monotone = false;  // every cell has x subset of y

    double disagreement() const {
        double s = 0.0;
        for (const auto& [x, y, w] : cells) {
            if (x != y) {
                s += w;
            }
        }
        return s;
    }

    template <class Engine>
    std::pair<std::uint64_t, std::uint64_t> draw(Engine& rng) const {
        double total = 0.0;
        for (const auto& c : cells) {
            total += std::get<2>(c);
        }
        double u = uniform01(rng) * total;
        for (const auto& [x, y, w] : cells) {
            if (u < w) {
                return {x, y};
            }
            u -= w;
        }
        // rounding: fall back to the last cell with mass
        for (auto it = cells.rbegin(); it != cells.rend(); ++it) {
            if (std::get<2>(*it) > 0) {
                return {std::get<0>(*it), std::get<1>(*it)};
            }
        }
        throw InvariantViolation("coupling: no mass to draw from");
    }
};

namespace detail {

// Dinic on a small network with real capacities.
class MaxFlow {
public:
    explicit MaxFlow(std::size_t n) : adj_(n), level_(n), it_(n) {}

    std::size_t add_edge(std::size_t a, std::size_t b, double cap) {
        adj_[a].push_back(arcs_.size());
        arcs_.push_back({b, cap});
        adj_[b].push_back(arcs_.size());
        arcs_.push_back({a, 0.0});
        return arcs_.size() - 2;
    }

    double flow_on(std::size_t arc) const { return arcs_[arc ^ 1].cap; }

    double run(std::size_t s, std::size_t t) {
        double total = 0.0;
        while (bfs(s, t)) {
            std::fill(it_.begin(), it_.end(), 0);
            while (true) {
                const double f = dfs(s, t, std::numeric_limits<double>::infinity());
                if (f <= kEps) {
                    break;
                }
                total += f;
            }
        }
        return total;
    }

private:
    static constexpr double kEps = 1e-16;
    struct Arc {
        std::size_t to;
        double cap;
    };

    bool bfs(std::size_t s, std::size_t t) {
        std::fill(level_.begin(), level_.end(), -1);
        std::deque<std::size_t> q{s};
        level_[s] = 0;
        while (!q.empty()) {
            const auto x = q.front();
            q.pop_front();
            for (auto a : adj_[x]) {
                if (arcs_[a].cap > kEps && level_[arcs_[a].to] < 0) {
                    level_[arcs_[a].to] = level_[x] + 1;
                    q.push_back(arcs_[a].to);
                }
            }
        }
        return level_[t] >= 0;
    }

    double dfs(std::size_t x, std::size_t t, double f) {
        if (x == t) {
            return f;
        }
        for (auto& i = it_[x]; i < adj_[x].size(); ++i) {
            const auto a = adj_[x][i];
            const auto y = arcs_[a].to;
            if (arcs_[a].cap > kEps && level_[y] == level_[x] + 1) {
                const double got = dfs(y, t, std::min(f, arcs_[a].cap));
                if (got > kEps) {
                    arcs_[a].cap -= got;
                    arcs_[a ^ 1].cap += got;
                    return got;
                }
            }
        }
        return 0.0;
    }

    std::vector<std::vector<std::size_t>> adj_;
    std::vector<Arc> arcs_;
    std::vector<int> level_;
    std::vector<std::size_t> it_;
};

inline constexpr double kCouplingTol = 1e-9;
inline constexpr std::size_t kMaxCouplingPairs = 4'000'000;

// Transports a onto b along x subset-of y. Returns moved mass; cells appended.
inline double subset_transport(std::span<const double> a, std::span<const double> b,
                               std::vector<std::tuple<std::uint64_t, std::uint64_t, double>>& cells) {
    std::vector<std::uint64_t> xs, ys;
    for (std::uint64_t i = 0; i < a.size(); ++i) {
        if (a[i] > 0) {
            xs.push_back(i);
        }
        if (b[i] > 0) {
            ys.push_back(i);
        }
    }
    if (xs.size() * ys.size() > kMaxCouplingPairs) {
        throw SizeCapError("coupling: support too large for the transport network");
    }
    const std::size_t src = xs.size() + ys.size(), dst = src + 1;
    MaxFlow mf(dst + 1);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mf.add_edge(src, i, a[xs[i]]);
    }
    for (std::size_t j = 0; j < ys.size(); ++j) {
        mf.add_edge(xs.size() + j, dst, b[ys[j]]);
    }
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> mid;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t j = 0; j < ys.size(); ++j) {
            if ((xs[i] & ~ys[j]) == 0) {
                mid.emplace_back(mf.add_edge(i, xs.size() + j, 2.0), i, j);
            }
        }
    }
    const double moved = mf.run(src, dst);
    for (const auto& [arc, i, j] : mid) {
        const double f = mf.flow_on(arc);
        if (f > 0) {
            cells.emplace_back(xs[i], ys[j], f);
        }
    }
    return moved;
}

}  // namespace detail

/// Coupling of mu (first coordinate) and nu (second). With want_monotone the
/// plan keeps x subset of y: maximal when such a maximal plan exists
/// (diagonal plus a subset-respecting transport of the residuals), otherwise
/// a full monotone transport flagged non-maximal. Without it: diagonal plus
/// independent residuals, which is always maximal.
inline CouplingPlan couple_laws(std::span<const double> mu, std::span<const double> nu, bool want_monotone) {
    if (mu.size() != nu.size()) {
        throw DimensionMismatch("couple_laws: laws on different spaces");
    }
    CouplingPlan plan;
    plan.tv = exact_tv(mu, nu);
    std::vector<double> a(mu.size()), b(nu.size());
    for (std::uint64_t x = 0; x < mu.size(); ++x) {
        const double d = std::min(mu[x], nu[x]);
        if (d > 0) {
            plan.cells.emplace_back(x, x, d);
        }
        a[x] = mu[x] - d;
        b[x] = nu[x] - d;
    }
    if (plan.tv <= detail::kCouplingTol) {
        plan.maximal = true;
        plan.monotone = true;
        return plan;
    }
    if (want_monotone) {
        const auto diag = plan.cells;
        const double moved = detail::subset_transport(a, b, plan.cells);
        if (moved >= plan.tv - detail::kCouplingTol) {
            plan.maximal = true;
            plan.monotone = true;
            return plan;
        }
        plan.cells.clear();
        const double all = detail::subset_transport(mu, nu, plan.cells);
        if (all < 1.0 - detail::kCouplingTol) {
            throw InvariantViolation("couple_laws: laws are not stochastically ordered (transported " +
                                     std::to_string(all) + ")");
        }
        plan.maximal = false;
        plan.monotone = true;
        return plan;
    }
    for (std::uint64_t x = 0; x < a.size(); ++x) {
        if (a[x] <= 0) {
            continue;
        }
        for (std::uint64_t y = 0; y < b.size(); ++y) {
            if (b[y] > 0) {
                plan.cells.emplace_back(x, y, a[x] * b[y] / plan.tv);
            }
        }
    }
    plan.maximal = true;
    plan.monotone = std::all_of(plan.cells.begin(), plan.cells.end(),
                                [](const auto& c) { return (std::get<0>(c) & ~std::get<1>(c)) == 0; });
    return plan;
}

struct CoupledReveal {
    PartialConfiguration first;
    PartialConfiguration second;
    bool maximal = false;
    bool monotone = false;
    double tv = 0.0;  // between the two reveal laws (NaN when not computed)
};

/// Draws refinements of a1 and a2 onto the revealed set `target`, coupled as
/// closely as possible; order-preserving whenever In(a1) is inside In(a2).
template <class Engine>
CoupledReveal optimally_coupled_conditional_pair(ConditionalOracle& oracle, const PartialConfiguration& a1,
                                                 const PartialConfiguration& a2, std::span<const EdgeId> target,
                                                 Engine& rng) {
    if (a1.revealed_set() != a2.revealed_set()) {
        throw PreconditionError("coupled reveal: revealed sets differ");
    }
    const auto next = newly_revealed(a1, target);
    const auto& mu = oracle.reveal_law(a1, next);
    const auto& nu = oracle.reveal_law(a2, next);
    bool nested = true;
    for (EdgeId e = 0; e < a1.size(); ++e) {
        nested = nested && (!a1.is_in(e) || a2.is_in(e));
    }
    const auto plan = couple_laws(mu, nu, nested);
    const auto [x, y] = plan.draw(rng);
    return {extend(a1, next, x), extend(a2, next, y), plan.maximal, plan.monotone, plan.tv};
}

// ---------------------------------------------------------------------------
// Samplers for the revealing processes.

enum class SamplerKind { Oracle, Chain };

inline const char* to_string(SamplerKind k) { return k == SamplerKind::Oracle ? "oracle" : "chain"; }

class RevealSampler {
public:
    virtual ~RevealSampler() = default;
    /// Restriction of a sample from pi^phase to `edges`.
    virtual PartialConfiguration phase_projection(Phase phase, std::span<const EdgeId> edges, std::mt19937_64& rng) = 0;
    /// Full configuration from pi (restricted to phase) conditioned on refining a.
    virtual Configuration complete(const PartialConfiguration& a, Phase phase, std::mt19937_64& rng) = 0;
    virtual CoupledReveal couple(const PartialConfiguration& a1, const PartialConfiguration& a2,
                                 std::span<const EdgeId> target, std::mt19937_64& rng) = 0;
    virtual SamplerKind kind() const = 0;
};

class OracleRevealSampler final : public RevealSampler {
public:
    OracleRevealSampler(const Graph& g, const ModelParams& mp) : oracle_(std::in_place, g, mp) {}
    explicit OracleRevealSampler(std::shared_ptr<ConditionalOracle> shared) : shared_(std::move(shared)) {}

    ConditionalOracle& oracle() { return shared_ ? *shared_ : *oracle_; }

    PartialConfiguration phase_projection(Phase phase, std::span<const EdgeId> edges, std::mt19937_64& rng) override {
        const PartialConfiguration none(oracle().graph().num_edges());
        std::vector<EdgeId> es(edges.begin(), edges.end());
        std::sort(es.begin(), es.end());
        return extend(none, es, draw_index(oracle().reveal_law(none, es, phase), rng));
    }

    Configuration complete(const PartialConfiguration& a, Phase phase, std::mt19937_64& rng) override {
        const auto hidden = a.hidden_set();
        return extend(a, hidden, draw_index(oracle().reveal_law(a, hidden, phase), rng)).to_configuration();
    }

    CoupledReveal couple(const PartialConfiguration& a1, const PartialConfiguration& a2, std::span<const EdgeId> target,
                         std::mt19937_64& rng) override {
        return optimally_coupled_conditional_pair(oracle(), a1, a2, target, rng);
    }

    SamplerKind kind() const override { return SamplerKind::Oracle; }

private:
    static std::uint64_t draw_index(const std::vector<double>& law, std::mt19937_64& rng) {
        double u = uniform01(rng);
        std::uint64_t last = 0;
        for (std::uint64_t i = 0; i < law.size(); ++i) {
            if (law[i] > 0) {
                last = i;
                if (u < law[i]) {
                    return i;
                }
                u -= law[i];
            }
        }
        return last;
    }

    std::optional<ConditionalOracle> oracle_;
    std::shared_ptr<ConditionalOracle> shared_;
};

/// Glauber runs on the hidden edges only. Coupled reveals share every draw
/// and start from the same hidden state, so nesting is preserved and equal
/// boundary connectivity gives identical trajectories; they are not maximal.
class ChainRevealSampler final : public RevealSampler {
public:
    ChainRevealSampler(const Graph& g, const ModelParams& mp, std::size_t sweeps = 200)
        : g_(&g), mp_(mp), sweeps_(sweeps) {}

    PartialConfiguration phase_projection(Phase phase, std::span<const EdgeId> edges, std::mt19937_64& rng) override {
        const PartialConfiguration none(g_->num_edges());
        const auto f = complete(none, phase, rng);
        return PartialConfiguration::restrict(f, edges);
    }

    Configuration complete(const PartialConfiguration& a, Phase phase, std::mt19937_64& rng) override {
        const auto hidden = a.hidden_set();
        const bool start_in = phase != Phase::Disordered;
        ChainState<> s(*g_, fill(a, hidden, start_in));
        const auto policy = phase == Phase::Ordered      ? RejectionPolicy::OutsideOrdered
                            : phase == Phase::Disordered ? RejectionPolicy::OutsideDisordered
                                                         : RejectionPolicy::None;
        if (policy != RejectionPolicy::None) {
            const auto k = s.in_count();
            const bool ok = phase == Phase::Ordered ? is_ordered_count(k, g_->num_edges(), mp_.eta())
                                                    : is_disordered_count(k, g_->num_edges(), mp_.eta());
            if (!ok) {
                throw EmptySupportError("chain sampler: starting state is outside the phase");
            }
        }
        run(hidden, rng, [&](const StepDraw& d) { s.apply(d, mp_, policy); });
        return s.config();
    }

    CoupledReveal couple(const PartialConfiguration& a1, const PartialConfiguration& a2, std::span<const EdgeId> target,
                         std::mt19937_64& rng) override {
        if (a1.revealed_set() != a2.revealed_set()) {
            throw PreconditionError("coupled reveal: revealed sets differ");
        }
        const auto hidden = a1.hidden_set();
        ChainState<> lo(*g_, fill(a1, hidden, true));
        ChainState<> hi(*g_, fill(a2, hidden, true));
        run(hidden, rng, [&](const StepDraw& d) {
            lo.apply(d, mp_);
            hi.apply(d, mp_);
        });
        const auto next = newly_revealed(a1, target);
        CoupledReveal out{a1, a2, false, true, std::numeric_limits<double>::quiet_NaN()};
        for (EdgeId e : next) {
            out.first.set(e, lo.config()[e] ? EdgeState::In : EdgeState::Out);
            out.second.set(e, hi.config()[e] ? EdgeState::In : EdgeState::Out);
            out.monotone = out.monotone && (!lo.config()[e] || hi.config()[e]);
        }
        return out;
    }

    SamplerKind kind() const override { return SamplerKind::Chain; }

private:
    static Configuration fill(const PartialConfiguration& a, std::span<const EdgeId> hidden, bool in) {
        Configuration f(a.size());
        for (EdgeId e = 0; e < a.size(); ++e) {
            f.set(e, a.is_in(e));
        }
        for (EdgeId e : hidden) {
            f.set(e, in);
        }
        return f;
    }

    template <class Apply>
    void run(std::span<const EdgeId> hidden, std::mt19937_64& rng, Apply&& apply) {
        if (hidden.empty()) {
            return;
        }
        const std::uint64_t steps = sweeps_ * hidden.size();
        for (std::uint64_t t = 0; t < steps; ++t) {
            const EdgeId e = hidden[uniform_below(rng, hidden.size())];
            apply(StepDraw{e, uniform01(rng)});
        }
    }

    const Graph* g_;
    ModelParams mp_;
    std::size_t sweeps_;
};

// ---------------------------------------------------------------------------
// Revealing processes.

struct RevealState {
    std::size_t i = 0;
    std::vector<EdgeId> revealed;  // F_i, sorted
    std::vector<Vertex> frontier;  // V_i (ordered process only)
    PartialConfiguration phase_side;  // F_i^ord or F_i^dis
    PartialConfiguration ball_side;   // F_i^+ or F_i^-
    Vertex w = kNoVertex;  // chosen boundary vertex and its parent, when a
    Vertex p = kNoVertex;  // subtree was revealed from this state
};

enum class OutcomeTag { AgreeAtV, UnsuccessfulOccupancy, UnsuccessfulRadius, LargePolymerWitness };

inline const char* to_string(OutcomeTag t) {
    switch (t) {
        case OutcomeTag::AgreeAtV:
            return "agree_at_v";
        case OutcomeTag::UnsuccessfulOccupancy:
            return "unsuccessful_occupancy";
        case OutcomeTag::UnsuccessfulRadius:
            return "unsuccessful_radius";
        case OutcomeTag::LargePolymerWitness:
            return "large_polymer_witness";
    }
    return "?";
}

struct CouplingOutcome {
    OutcomeTag tag = OutcomeTag::UnsuccessfulRadius;
    Configuration phase_config;  // F^ord or F^dis
    Configuration ball_config;   // F^+ or F^-
    std::vector<RevealState> trace;
    std::size_t iterations = 0;
    std::size_t occupancy_at_gate = 0;
    double gate = 0.0;
    std::size_t r = 0;
    CutRadii radii;
    std::size_t excess_bound = 0;
    bool radii_bound_unmet = false;
    bool agree_at_v = false;
    bool all_maximal = true;
    SamplerKind sampler = SamplerKind::Oracle;
    std::size_t witness_size = 0;   // polymer (ordered) or component (disordered) edge count
    std::size_t witness_path = 0;   // disordered: in-path between two boundary vertices
    double witness_threshold = 0.0;
    std::size_t invariant_checks = 0;

    nlohmann::json to_json(std::uint64_t seed) const {
        nlohmann::json j{{"seed", seed},
                         {"outcome", to_string(tag)},
                         {"iterations", iterations},
                         {"occupancy_at_gate", occupancy_at_gate},
                         {"gate", gate},
                         {"radii", {{"r", r}, {"r1", radii.r1}, {"r2", radii.r2}}},
                         {"radii_bound_unmet", radii_bound_unmet},
                         {"agree_at_v", agree_at_v},
                         {"maximal_couplings", all_maximal},
                         {"sampler", to_string(sampler)}};
        if (tag == OutcomeTag::LargePolymerWitness || tag == OutcomeTag::UnsuccessfulRadius) {
            j["polymer_witness_size"] = witness_size;
        }
        if (witness_path) {
            j["witness_path"] = witness_path;
        }
        return j;
    }
};

struct RevealOptions {
    std::optional<CutRadii> radii = {};            // skip the chooser
    std::optional<std::size_t> excess_bound = {};  // K; default: excess edges of the BFS ball
    std::optional<std::size_t> radius = {};        // disordered process: default is the treelike radius
};

namespace detail {

struct RevealGeometry {
    BfsDecomposition bfs;
    CutRadii radii;
    std::size_t k = 0;
    bool bound_unmet = false;
    std::vector<char> inner_r1;  // E(B_r1(v)) membership

    std::size_t depth_or_far(Vertex x) const {
        const auto d = bfs.ball().depth(x);
        return d ? *d : bfs.radius() + 1;
    }

    bool in_tree(Vertex x) const {
        const auto d = bfs.ball().depth(x);
        return d && *d <= radii.r1;
    }

    // V(T_u) and E(T_u) inside the first r1 + 1 levels
    std::vector<Vertex> tree_vertices(Vertex u) const {
        std::vector<Vertex> out;
        for (Vertex x : bfs.subtree(u)) {
            if (bfs.depth(x) <= radii.r1) {
                out.push_back(x);
            }
        }
        return out;
    }

    std::vector<EdgeId> tree_edges(Vertex u) const {
        std::vector<EdgeId> out;
        for (Vertex x : tree_vertices(u)) {
            if (x != u) {
                out.push_back(bfs.parent_edge(x));
            }
        }
        return out;
    }
};

inline RevealGeometry reveal_geometry(const Graph& g, Vertex v, std::size_t r, const RevealOptions& opt) {
    RevealGeometry geo{bfs_decomposition(g, v, r), {}, 0, false, {}};
    geo.k = opt.excess_bound ? *opt.excess_bound : geo.bfs.excess_edges().size();
    const double bound = static_cast<double>(r) / static_cast<double>(geo.k + 1) - 1.0;
    if (opt.radii) {
        geo.radii = *opt.radii;
        if (!(geo.radii.r1 <= r && geo.radii.r1 > geo.radii.r2)) {
            throw PreconditionError("revealing coupling: radii must satisfy r >= r1 > r2 >= 0");
        }
        if (!annulus_is_excess_free(g, geo.bfs, geo.radii)) {
            throw PreconditionError("revealing coupling: annulus (r2, r1] contains excess edges");
        }
        geo.bound_unmet = static_cast<double>(geo.radii.gap()) < bound || r <= geo.k + 1;
    } else if (r > geo.k + 1 && geo.bfs.excess_edges().size() <= geo.k) {
        geo.radii = choose_cut_radii(g, geo.bfs, r, geo.k);
    } else {
        const auto c = widest_excess_free_annulus(g, geo.bfs, r);
        if (!c) {
            throw PreconditionError("revealing coupling: no excess-free annulus inside the ball");
        }
        geo.radii = *c;
        geo.bound_unmet = true;
    }
    geo.inner_r1.assign(g.num_edges(), 0);
    for (EdgeId e : geo.bfs.ball().edges()) {
        if (geo.bfs.far_depth(g, e) <= geo.radii.r1) {
            geo.inner_r1[e] = 1;
        }
    }
    return geo;
}

inline std::vector<EdgeId> edges_outside(const std::vector<char>& inner) {
    std::vector<EdgeId> out;
    for (EdgeId e = 0; e < inner.size(); ++e) {
        if (!inner[e]) {
            out.push_back(e);
        }
    }
    return out;
}

inline std::vector<char> as_mask(std::size_t m, std::span<const EdgeId> es) {
    std::vector<char> out(m, 0);
    for (EdgeId e : es) {
        out[e] = 1;
    }
    return out;
}

inline bool agree_on_star(const Graph& g, Vertex v, const Configuration& a, const Configuration& b) {
    for (EdgeId e : g.incident(v)) {
        if (a[e] != b[e]) {
            return false;
        }
    }
    return true;
}

inline bool in_nested(const PartialConfiguration& lo, const PartialConfiguration& hi) {
    for (EdgeId e = 0; e < lo.size(); ++e) {
        if (lo.is_in(e) && !hi.is_in(e)) {
            return false;
        }
    }
    return true;
}

[[noreturn]] inline void invariant_failed(const char* which, std::size_t i, const std::string& why) {
    throw InvariantViolation(std::string(which) + "(" + std::to_string(i) + ") violated: " + why);
}

// Inv1..Inv4 for state i of the ordered process.
inline void check_ordered_state(const Graph& g, const RevealGeometry& geo, const RevealState& s) {
    const std::size_t m = g.num_edges();
    const auto rev = s.phase_side.revealed_set();
    if (rev != s.revealed || s.ball_side.revealed_set() != s.revealed) {
        invariant_failed("Inv1", s.i, "revealed sets differ from F_i");
    }
    if (!in_nested(s.phase_side, s.ball_side)) {
        invariant_failed("Inv1", s.i, "In(ordered side) not inside In(plus side)");
    }
    const auto f = as_mask(m, s.revealed);
    for (EdgeId e = 0; e < m; ++e) {
        if (!geo.inner_r1[e] && !f[e]) {
            invariant_failed("Inv1", s.i, "exterior edge " + std::to_string(e) + " not revealed");
        }
    }
    for (std::size_t a = 0; a < s.frontier.size(); ++a) {
        for (std::size_t b = a + 1; b < s.frontier.size(); ++b) {
            if (geo.bfs.in_subtree(s.frontier[a], s.frontier[b]) || geo.bfs.in_subtree(s.frontier[b], s.frontier[a])) {
                invariant_failed("Inv2", s.i, "frontier subtrees overlap");
            }
        }
    }
    std::vector<char> covered(g.num_vertices(), 0);
    for (Vertex u : s.frontier) {
        for (Vertex x : geo.tree_vertices(u)) {
            covered[x] = 1;
        }
        for (EdgeId e : geo.tree_edges(u)) {
            if (!f[e]) {
                invariant_failed("Inv3", s.i, "subtree edge " + std::to_string(e) + " not revealed");
            }
        }
    }
    std::vector<char> touched(g.num_vertices(), 0);
    for (EdgeId e : s.revealed) {
        touched[g.ends(e).u] = touched[g.ends(e).v] = 1;
    }
    for (Vertex x = 0; x < g.num_vertices(); ++x) {
        if (geo.in_tree(x) && touched[x] != covered[x]) {
            invariant_failed("Inv3", s.i, "vertex " + std::to_string(x) + " coverage mismatch");
        }
    }
    std::size_t dist = std::numeric_limits<std::size_t>::max();
    for (Vertex x = 0; x < g.num_vertices(); ++x) {
        if (touched[x]) {
            dist = std::min(dist, geo.depth_or_far(x));
        }
    }
    if (dist > geo.radii.r2) {
        std::vector<char> in_front(g.num_vertices(), 0);
        for (Vertex u : s.frontier) {
            in_front[u] = 1;
        }
        for (Vertex x : boundary_of_edge_set(g, f)) {
            if (!in_front[x]) {
                invariant_failed("Inv4", s.i, "boundary vertex " + std::to_string(x) + " outside the frontier");
            }
        }
    }
}

inline std::size_t distance_to_edges(const Graph& g, const RevealGeometry& geo, std::span<const EdgeId> es) {
    std::size_t dist = std::numeric_limits<std::size_t>::max();
    for (EdgeId e : es) {
        dist = std::min({dist, geo.depth_or_far(g.ends(e).u), geo.depth_or_far(g.ends(e).v)});
    }
    return dist;
}

}  // namespace detail

/// Couples F^ord ~ pi^ord with F^+ ~ pi_{B+_{r1}(v)} by revealing the
/// exterior, then BFS subtrees from the leaves inward. Every state is kept.
inline CouplingOutcome revealing_coupling_ordered(const Graph& g, Vertex v, std::size_t r, const ModelParams& mp,
                                                  std::uint64_t seed, RevealSampler& sampler,
                                                  const RevealOptions& opt = {}) {
    const std::size_t m = g.num_edges(), n = g.num_vertices();
    if (v >= n) {
        throw PreconditionError("revealing coupling: vertex out of range");
    }
    const auto geo = detail::reveal_geometry(g, v, r, opt);
    std::mt19937_64 rng(derive_seed(seed, 0xC0));
    CouplingOutcome out;
    out.r = r;
    out.radii = geo.radii;
    out.excess_bound = geo.k;
    out.radii_bound_unmet = geo.bound_unmet;
    out.sampler = sampler.kind();
    out.gate = (1.0 - mp.eta()) * static_cast<double>(m);

    // Step 1
    RevealState s;
    s.revealed = detail::edges_outside(geo.inner_r1);
    s.phase_side = sampler.phase_projection(Phase::Ordered, s.revealed, rng);
    out.occupancy_at_gate = s.phase_side.in_count();
    const auto plus_clamp = PartialConfiguration::uniform(m, s.revealed, true);
    if (!is_ordered_count(out.occupancy_at_gate, m, mp.eta())) {
        s.ball_side = plus_clamp;
        out.phase_config = sampler.complete(s.phase_side, Phase::Ordered, rng);
        out.ball_config = sampler.complete(plus_clamp, Phase::Any, rng);
        out.trace.push_back(std::move(s));
        out.tag = OutcomeTag::UnsuccessfulOccupancy;
        out.agree_at_v = detail::agree_on_star(g, v, out.phase_config, out.ball_config);
        return out;
    }
    s.ball_side = plus_clamp;
    for (Vertex x : geo.bfs.ball().vertices()) {
        if (geo.bfs.depth(x) == geo.radii.r1) {
            s.frontier.push_back(x);
        }
    }
    std::sort(s.frontier.begin(), s.frontier.end());

    const std::vector<EdgeId> all_edges = [&] {
        std::vector<EdgeId> es(m);
        for (EdgeId e = 0; e < m; ++e) {
            es[e] = e;
        }
        return es;
    }();
    auto finish = [&](const RevealState& st) {
        const auto c = sampler.couple(st.phase_side, st.ball_side, all_edges, rng);
        out.all_maximal = out.all_maximal && c.maximal;
        out.phase_config = c.first.to_configuration();
        out.ball_config = c.second.to_configuration();
        out.agree_at_v = detail::agree_on_star(g, v, out.phase_config, out.ball_config);
    };

    // Step 2
    while (true) {
        s.i = out.trace.size();
        detail::check_ordered_state(g, geo, s);
        ++out.invariant_checks;
        if (detail::distance_to_edges(g, geo, s.revealed) <= geo.radii.r2) {
            break;  // Step 3
        }
        UnionFind uf(n);
        for (EdgeId e : s.phase_side.in_set()) {
            uf.unite(g.ends(e).u, g.ends(e).v);
        }
        Vertex w = kNoVertex;
        for (Vertex x : boundary_of_edge_set(g, detail::as_mask(m, s.revealed))) {
            if (2 * static_cast<std::size_t>(uf.size_of(x)) >= n) {
                continue;
            }
            if (w == kNoVertex || geo.bfs.depth(x) > geo.bfs.depth(w) ||
                (geo.bfs.depth(x) == geo.bfs.depth(w) && geo.bfs.dfs_index(x) < geo.bfs.dfs_index(w))) {
                w = x;
            }
        }
        if (w == kNoVertex) {
            // Step 2b
            finish(s);
            out.trace.push_back(s);
            out.iterations = out.trace.size() - 1;
            if (!out.agree_at_v && sampler.kind() == SamplerKind::Oracle) {
                throw InvariantViolation("revealing coupling: giant boundary yet the two sides disagree at v");
            }
            out.tag = OutcomeTag::AgreeAtV;
            return out;
        }
        // Step 2a
        const Vertex p = geo.bfs.parent(w);
        RevealState next;
        next.revealed = s.revealed;
        for (EdgeId e : geo.tree_edges(p)) {
            next.revealed.push_back(e);
        }
        std::sort(next.revealed.begin(), next.revealed.end());
        next.revealed.erase(std::unique(next.revealed.begin(), next.revealed.end()), next.revealed.end());
        const auto c = sampler.couple(s.phase_side, s.ball_side, next.revealed, rng);
        out.all_maximal = out.all_maximal && c.maximal;
        next.phase_side = c.first;
        next.ball_side = c.second;
        for (Vertex u : s.frontier) {
            if (!geo.bfs.in_subtree(u, p)) {
                next.frontier.push_back(u);
            }
        }
        next.frontier.push_back(p);
        std::sort(next.frontier.begin(), next.frontier.end());
        if (next.revealed.size() <= s.revealed.size()) {
            detail::invariant_failed("Inv5", s.i, "revealed set did not grow");
        }
        if (!refines(s.phase_side, next.phase_side) || !refines(s.ball_side, next.ball_side)) {
            detail::invariant_failed("Inv6", s.i, "next state does not refine the current one");
        }
        s.w = w;
        s.p = p;
        out.trace.push_back(std::move(s));
        s = std::move(next);
    }

    // Step 3
    finish(s);
    out.trace.push_back(s);
    out.iterations = out.trace.size() - 1;
    for (const auto& poly : ordered_polymers(g, out.phase_config, mp, false)) {
        out.witness_size = std::max(out.witness_size, poly.edges.size());
    }
    out.witness_threshold = static_cast<double>(r) / (400.0 * static_cast<double>(mp.delta_deg()) *
                                                      static_cast<double>(1 + geo.k)) -
                            1.0;
    out.tag = out.witness_threshold >= 1.0 && static_cast<double>(out.witness_size) >= out.witness_threshold
                  ? OutcomeTag::LargePolymerWitness
                  : OutcomeTag::UnsuccessfulRadius;
    return out;
}

/// Two-stage version for the disordered phase against the minus ball: reveal
/// the exterior, then everything outside B_{r2+1}(v) in one go, then the rest.
inline CouplingOutcome revealing_coupling_disordered(const Graph& g, Vertex v, const ModelParams& mp,
                                                     std::uint64_t seed, RevealSampler& sampler,
                                                     const RevealOptions& opt = {}) {
    const std::size_t m = g.num_edges();
    if (v >= g.num_vertices()) {
        throw PreconditionError("revealing coupling: vertex out of range");
    }
    const std::size_t r = opt.radius ? *opt.radius : treelike_radius(g);
    const auto geo = detail::reveal_geometry(g, v, r, opt);
    std::mt19937_64 rng(derive_seed(seed, 0xD0));
    CouplingOutcome out;
    out.r = r;
    out.radii = geo.radii;
    out.excess_bound = geo.k;
    out.radii_bound_unmet = geo.bound_unmet;
    out.sampler = sampler.kind();
    std::size_t inner = 0;
    for (char c : geo.inner_r1) {
        inner += c;
    }
    out.gate = mp.eta() * static_cast<double>(m) - static_cast<double>(inner);

    RevealState s;
    s.revealed = detail::edges_outside(geo.inner_r1);
    s.phase_side = sampler.phase_projection(Phase::Disordered, s.revealed, rng);
    out.occupancy_at_gate = s.phase_side.in_count();
    s.ball_side = PartialConfiguration::uniform(m, s.revealed, false);
    if (static_cast<double>(out.occupancy_at_gate) > out.gate + kPhaseSlack) {
        out.phase_config = sampler.complete(s.phase_side, Phase::Disordered, rng);
        out.ball_config = sampler.complete(s.ball_side, Phase::Any, rng);
        out.trace.push_back(std::move(s));
        out.tag = OutcomeTag::UnsuccessfulOccupancy;
        out.agree_at_v = detail::agree_on_star(g, v, out.phase_config, out.ball_config);
        return out;
    }
    auto check = [&](const RevealState& st) {
        if (st.phase_side.revealed_set() != st.revealed || st.ball_side.revealed_set() != st.revealed) {
            detail::invariant_failed("Inv1", st.i, "revealed sets differ");
        }
        if (!detail::in_nested(st.ball_side, st.phase_side)) {
            detail::invariant_failed("Inv1", st.i, "In(minus side) not inside In(disordered side)");
        }
        ++out.invariant_checks;
    };
    check(s);

    // F_1: everything outside B_{r2+1}(v)
    RevealState s1;
    s1.i = 1;
    for (EdgeId e = 0; e < m; ++e) {
        if (geo.depth_or_far(g.ends(e).u) > geo.radii.r2 + 1 || geo.depth_or_far(g.ends(e).v) > geo.radii.r2 + 1) {
            s1.revealed.push_back(e);
        }
    }
    const auto c1 = sampler.couple(s.ball_side, s.phase_side, s1.revealed, rng);
    out.all_maximal = out.all_maximal && c1.maximal;
    s1.ball_side = c1.first;
    s1.phase_side = c1.second;
    if (!refines(s.phase_side, s1.phase_side) || !refines(s.ball_side, s1.ball_side)) {
        detail::invariant_failed("Inv6", 0, "second stage does not refine the first");
    }
    check(s1);
    out.trace.push_back(std::move(s));

    std::vector<EdgeId> all_edges(m);
    for (EdgeId e = 0; e < m; ++e) {
        all_edges[e] = e;
    }
    const auto c2 = sampler.couple(s1.ball_side, s1.phase_side, all_edges, rng);
    out.all_maximal = out.all_maximal && c2.maximal;
    out.ball_config = c2.first.to_configuration();
    out.phase_config = c2.second.to_configuration();
    out.agree_at_v = detail::agree_on_star(g, v, out.phase_config, out.ball_config);
    out.iterations = 1;

    const auto xi = boundary_component_set(g, s1.phase_side);
    const auto joined = std::find_if(xi.begin(), xi.end(), [](const auto& cls) { return cls.size() > 1; });
    if (joined == xi.end()) {
        out.trace.push_back(std::move(s1));
        if (!out.agree_at_v && sampler.kind() == SamplerKind::Oracle) {
            throw InvariantViolation("revealing coupling: free boundary yet the two sides disagree at v");
        }
        out.tag = OutcomeTag::AgreeAtV;
        return out;
    }
    // witness: shortest in-path between two joined boundary vertices, and the
    // final in-component that contains it
    const Vertex a = (*joined)[0], b = (*joined)[1];
    std::vector<std::size_t> dist(g.num_vertices(), std::numeric_limits<std::size_t>::max());
    std::deque<Vertex> q{a};
    dist[a] = 0;
    while (!q.empty()) {
        const Vertex x = q.front();
        q.pop_front();
        for (EdgeId e : g.incident(x)) {
            const Vertex y = g.other(e, x);
            if (s1.phase_side.is_in(e) && dist[y] == std::numeric_limits<std::size_t>::max()) {
                dist[y] = dist[x] + 1;
                q.push_back(y);
            }
        }
    }
    out.witness_path = dist[b];
    UnionFind uf(g.num_vertices());
    for (EdgeId e : out.phase_config.in_edges()) {
        uf.unite(g.ends(e).u, g.ends(e).v);
    }
    for (EdgeId e : out.phase_config.in_edges()) {
        out.witness_size += uf.find(g.ends(e).u) == uf.find(a);
    }
    out.witness_threshold = static_cast<double>(r) / static_cast<double>(geo.k + 1) - 2.0;
    out.trace.push_back(std::move(s1));
    out.tag = OutcomeTag::LargePolymerWitness;
    return out;
}

// ---------------------------------------------------------------------------
// Exact checks of the two structural facts the couplings rest on.

/// max over assignments A of the hidden edges of
/// |pi_{a1}(a1 u A) - pi_{a2}(a2 u A)|. Zero whenever xi(a1) = xi(a2).
inline double same_projection_residual(ConditionalOracle& oracle, const PartialConfiguration& a1,
                                       const PartialConfiguration& a2) {
    if (a1.revealed_set() != a2.revealed_set()) {
        throw PreconditionError("same_projection_residual: revealed sets differ");
    }
    const auto hidden = a1.hidden_set();
    const auto& l1 = oracle.reveal_law(a1, hidden);
    const auto& l2 = oracle.reveal_law(a2, hidden);
    double worst = 0.0;
    for (std::size_t i = 0; i < l1.size(); ++i) {
        worst = std::max(worst, std::abs(l1[i] - l2[i]));
    }
    return worst;
}

struct MonotonicityReport {
    std::uint64_t pairs = 0;        // (a1, a2) with equal R and In(a1) inside In(a2)
    std::uint64_t comparisons = 0;  // hidden-edge marginal comparisons
    std::uint64_t violations = 0;
    double worst_excess = 0.0;      // max of P_a1(f) - P_a2(f)
};

inline constexpr std::size_t kMonotonicityMaxEdges = 10;

/// Every pair of partial configurations with the same revealed set and nested
/// in-sets: hidden-edge marginals must be nested too.
inline MonotonicityReport exhaustive_monotonicity_check(const Graph& g, const ModelParams& mp, double tol = 1e-12) {
    const std::size_t m = g.num_edges();
    if (m > kMonotonicityMaxEdges) {
        throw SizeCapError("exhaustive_monotonicity_check: too many edges");
    }
    const auto comps = component_table(g, 1);
    const std::uint64_t full = (std::uint64_t{1} << m) - 1;
    std::vector<double> lw(comps.size());
    for (std::uint64_t x = 0; x < comps.size(); ++x) {
        lw[x] = comps[x] * mp.log_q() + std::popcount(x) * mp.log_edge_weight();
    }
    MonotonicityReport rep;
    std::vector<std::vector<double>> marg;  // indexed by in-mask within the current R
    for (std::uint64_t rmask = 0; rmask <= full; ++rmask) {
        const std::uint64_t hidden = full & ~rmask;
        // marginals for every in-set I inside R
        std::vector<std::uint64_t> ins;
        for (std::uint64_t s = rmask;; s = (s - 1) & rmask) {
            ins.push_back(s);
            if (s == 0) {
                break;
            }
        }
        std::map<std::uint64_t, std::vector<double>> by_in;
        for (std::uint64_t in : ins) {
            double hi = kNegInf;
            for (std::uint64_t s = hidden;; s = (s - 1) & hidden) {
                hi = std::max(hi, lw[in | s]);
                if (s == 0) {
                    break;
                }
            }
            std::vector<double> p(m, 0.0);
            double z = 0.0;
            for (std::uint64_t s = hidden;; s = (s - 1) & hidden) {
                const double w = std::exp(lw[in | s] - hi);
                z += w;
                for (std::uint64_t bits = s; bits; bits &= bits - 1) {
                    p[std::countr_zero(bits)] += w;
                }
                if (s == 0) {
                    break;
                }
            }
            for (double& x : p) {
                x /= z;
            }
            by_in.emplace(in, std::move(p));
        }
        for (std::uint64_t lo : ins) {
            const std::uint64_t rest = rmask & ~lo;
            for (std::uint64_t add = rest;; add = (add - 1) & rest) {
                const auto& p1 = by_in.at(lo);
                const auto& p2 = by_in.at(lo | add);
                ++rep.pairs;
                for (std::uint64_t bits = hidden; bits; bits &= bits - 1) {
                    const auto f = std::countr_zero(bits);
                    ++rep.comparisons;
                    const double excess = p1[f] - p2[f];
                    rep.worst_excess = std::max(rep.worst_excess, excess);
                    if (excess > tol) {
                        ++rep.violations;
                    }
                }
                if (add == 0) {
                    break;
                }
            }
        }
    }
    return rep;
}

}  // namespace rclab

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "rclab/dynamics.hpp"

using namespace rclab;

namespace {

// Heat-bath matrix built from weight ratios alone: from x, edge e is resampled
// from pi conditioned on the other edges. Dense, for tiny m only.
std::vector<std::vector<double>> heat_bath_dense(const Graph& g, const ModelParams& mp) {
    const std::size_t m = g.num_edges();
    const std::size_t n = std::size_t{1} << m;
    std::vector<double> lw(n);
    for (std::size_t x = 0; x < n; ++x) {
        lw[x] = log_weight(g, Configuration::from_mask(m, x), mp);
    }
    std::vector<std::vector<double>> p(n, std::vector<double>(n, 0.0));
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t e = 0; e < m; ++e) {
            const std::size_t on = x | (std::size_t{1} << e), off = x & ~(std::size_t{1} << e);
            const double pin = 1.0 / (1.0 + std::exp(lw[off] - lw[on]));
            p[x][on] += pin / m;
            p[x][off] += (1 - pin) / m;
        }
    }
    return p;
}

std::size_t dense_mixing_time(const std::vector<std::vector<double>>& p, std::size_t start,
                              const std::vector<double>& pi) {
    std::vector<double> mu(p.size(), 0.0);
    mu[start] = 1.0;
    for (std::size_t t = 0;; ++t) {
        double tv = 0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            tv += std::abs(mu[i] - pi[i]) / 2;
        }
        if (tv <= 0.25) {
            return t;
        }
        std::vector<double> nx(mu.size(), 0.0);
        for (std::size_t i = 0; i < mu.size(); ++i) {
            for (std::size_t j = 0; j < mu.size(); ++j) {
                nx[j] += mu[i] * p[i][j];
            }
        }
        mu = nx;
    }
}

bool bfs_connected_without(const Graph& g, const Configuration& f, EdgeId skip) {
    const Vertex s = g.ends(skip).u, t = g.ends(skip).v;
    std::vector<char> seen(g.num_vertices(), 0);
    std::vector<Vertex> st{s};
    seen[s] = 1;
    while (!st.empty()) {
        Vertex x = st.back();
        st.pop_back();
        for (EdgeId e : g.incident(x)) {
            if (e != skip && f[e] && !seen[g.other(e, x)]) {
                seen[g.other(e, x)] = 1;
                st.push_back(g.other(e, x));
            }
        }
    }
    return seen[t];
}

}  // namespace

TEST(Rng, Reproducible) {
    RngStream a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        auto x = a.next(17), y = b.next(17), z = c.next(17);
        EXPECT_EQ(x.edge, y.edge);
        EXPECT_EQ(x.u, y.u);
        differs |= x.edge != z.edge || x.u != z.u;
        EXPECT_LT(x.edge, 17u);
        EXPECT_GE(x.u, 0.0);
        EXPECT_LT(x.u, 1.0);
    }
    EXPECT_TRUE(differs);
    EXPECT_EQ(a.counter(), 100u);
}

TEST(Step, HighBetaCutEdgeGoesIn) {
    const ModelParams mp(2.0, 5.0, 1);
    const double ph = (std::exp(5.0) - 1) / (2 + std::exp(5.0) - 1);
    EXPECT_NEAR(mp.p_hat(), ph, 1e-15);
    const Graph g = families::single_edge();
    ChainState s(g, Configuration::all_out(1));
    s.apply({0, 0.5}, mp);
    EXPECT_TRUE(s.config()[0]);
}

TEST(Step, TriangleBranches) {
    // edges 01, 12, 20; update edge 0
    const Graph g = families::triangle();
    const ModelParams mp(3.0, 1.0, 2);
    const double mid = 0.5 * (mp.p_hat() + mp.p());  // in iff not cut
    {
        ChainState s(g, Configuration::from_mask(3, 0b010));
        EXPECT_TRUE(s.would_be_cut_edge(0));
        s.apply({0, mid}, mp);
        EXPECT_FALSE(s.config()[0]);
    }
    {
        ChainState s(g, Configuration::from_mask(3, 0b110));
        EXPECT_FALSE(s.would_be_cut_edge(0));
        s.apply({0, mid}, mp);
        EXPECT_TRUE(s.config()[0]);
    }
}

TEST(Step, PercolationIgnoresCutStatus) {
    const ModelParams mp(1.0, 0.8, 2);
    EXPECT_DOUBLE_EQ(mp.p(), mp.p_hat());
    // with p_hat == p no draw ever lands in [p_hat, p)
    const Graph g = families::triangle();
    ChainState s(g, Configuration::all_out(3));
    RngStream rng(1);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_FALSE(glauber_step(s, mp, rng).queried);
    }
}

TEST(Step, CutQueryMatchesBfs) {
    const Graph g = generate_random_regular(20, 3, 3);
    const ModelParams mp(2.0, 1.0, 3);
    ChainState s(g, Configuration::all_out(g.num_edges()));
    RngStream rng(9);
    for (int i = 0; i < 5000; ++i) {
        glauber_step(s, mp, rng);
        const EdgeId e = static_cast<EdgeId>(i % g.num_edges());
        ASSERT_EQ(s.would_be_cut_edge(e), !bfs_connected_without(g, s.config(), e));
        if (i % 50 == 0) {
            ASSERT_TRUE(s.consistent());
        }
    }
}

TEST(Step, RejectionKeepsPhase) {
    const Graph g = families::complete(4);  // m = 6
    const ModelParams mp(2.0, 0.3, 3, {.eta = 0.2});  // ordered: >= 4.8, i.e. 5 or 6
    ChainState s(g, Configuration::all_in(6));
    RngStream rng(2);
    std::size_t rejected = 0;
    for (int i = 0; i < 20000; ++i) {
        rejected += glauber_step(s, mp, rng, RejectionPolicy::OutsideOrdered).rejected;
        ASSERT_GE(s.in_count(), 5u);
    }
    EXPECT_GT(rejected, 0u);
    ChainState d(g, Configuration::all_out(6));
    for (int i = 0; i < 20000; ++i) {
        glauber_step(d, ModelParams(2.0, 3.0, 3, {.eta = 0.2}), rng, RejectionPolicy::OutsideDisordered);
        ASSERT_LE(d.in_count(), 1u);
    }
}

TEST(Run, ZeroStepsReturnsStart) {
    const Graph g = families::cycle(5);
    const auto x0 = Configuration::from_mask(5, 0b10110);
    const auto r = run_chain(g, ModelParams(2, 1, 2), x0, 0, 1, 1);
    EXPECT_EQ(r.final_config, x0);
    ASSERT_EQ(r.series.size(), 1u);
    EXPECT_EQ(r.series[0].in_count, 3u);
    EXPECT_EQ(r.series[0].components, 2u);
}

TEST(Run, SeriesStride) {
    const Graph g = families::cycle(5);
    const auto r = run_chain(g, ModelParams(2, 1, 2), Configuration::all_out(5), 25, 1, 10);
    ASSERT_EQ(r.series.size(), 4u);  // t = 0, 10, 20, 25
    EXPECT_EQ(r.series[3].t, 25u);
    EXPECT_EQ(r.series[3].in_count, r.final_config.in_count());
}

TEST(Run, EnginesAgree) {
    const Graph g = generate_random_regular(30, 4, 8);
    const ModelParams mp(3.0, 1.1, 4);
    const auto a = run_chain<HdtConnectivity>(g, mp, Configuration::all_out(g.num_edges()), 20000, 5);
    const auto b = run_chain<NaiveConnectivity>(g, mp, Configuration::all_out(g.num_edges()), 20000, 5);
    EXPECT_EQ(a.final_config, b.final_config);
    EXPECT_EQ(a.connectivity_queries, b.connectivity_queries);
}

TEST(Stationary, SingleEdgeFrequencies) {
    const Graph g = families::single_edge();
    for (double q : {1.0, 2.0, 7.0}) {
        const ModelParams mp(q, 0.9, 1);
        ChainState s(g, Configuration::all_out(1));
        RngStream rng(static_cast<std::uint64_t>(q * 10));
        const int n = 100000;
        int hits = 0;
        for (int i = 0; i < n; ++i) {
            glauber_step(s, mp, rng);
            hits += s.config()[0];
        }
        const double expect = q == 1.0 ? mp.p() : (std::exp(0.9) - 1) / (q + std::exp(0.9) - 1);
        EXPECT_NEAR(static_cast<double>(hits) / n, expect, 3 * std::sqrt(expect * (1 - expect) / n));
    }
}

TEST(Stationary, TreeMarginalsArePHat) {
    const Graph t = families::random_tree(30, 4);
    const ModelParams mp(3.0, 1.4, 3);
    const std::size_t m = t.num_edges();
    ChainState s(t, Configuration::all_out(m));
    RngStream rng(10);
    for (std::size_t i = 0; i < 20 * m; ++i) {
        glauber_step(s, mp, rng);
    }
    const int samples = 20000;
    std::vector<int> hits(m, 0);
    for (int k = 0; k < samples; ++k) {
        for (std::size_t i = 0; i < 6 * m; ++i) {
            glauber_step(s, mp, rng);
        }
        for (EdgeId e = 0; e < m; ++e) {
            hits[e] += s.config()[e];
        }
    }
    const double ph = mp.p_hat(), sd = std::sqrt(ph * (1 - ph) / samples);
    for (EdgeId e = 0; e < m; ++e) {
        EXPECT_NEAR(static_cast<double>(hits[e]) / samples, ph, 4 * sd) << "edge " << e;
    }
}

TEST(Local, StarCutBehaviour) {
    const Graph st = families::star(4);  // center 0, edges 0..3 to leaves
    const auto b = ball(st, 0, 1);
    LocalChain<> wired(st, b, Boundary::Wired, Configuration::from_mask(4, 0b0010));
    // leaf edge 0: center reaches the contracted shell through edge 1
    EXPECT_FALSE(wired.would_be_cut_edge(0));
    EXPECT_TRUE(wired.would_be_cut_edge(1));  // the center's only route to the shell
    LocalChain<> lonely(st, b, Boundary::Wired, Configuration::all_out(4));
    EXPECT_TRUE(lonely.would_be_cut_edge(2));  // center isolated
    LocalChain<> free(st, b, Boundary::Free, Configuration::all_out(4));
    EXPECT_TRUE(free.would_be_cut_edge(0));
    LocalChain<> free_full(st, b, Boundary::Free, Configuration::all_in(4));
    EXPECT_TRUE(free_full.would_be_cut_edge(0));  // a star has no cycles
}

TEST(Local, WiredWeightsFollowHatC) {
    // Stationary law of the contracted chain vs q^c_hat (e^b - 1)^|F| on the ball.
    const Graph g = generate_random_regular(40, 3, 21);
    const auto b = ball(g, 0, 2);
    ASSERT_GE(b.shell().size(), 2u);
    const ModelParams mp(2.5, 0.8, 3);
    LocalChain<> wired(g, b, Boundary::Wired);
    const auto& lg = wired.local_graph();
    const std::size_t k = lg.num_edges();
    ASSERT_LE(k, 20u);
    const auto d = exact_distribution(lg, mp);
    double off = 0;
    bool first = true;
    for (std::uint64_t x = 0; x < d.states(); ++x) {
        Configuration global(g.num_edges());
        Configuration local = Configuration::from_mask(k, x);
        for (EdgeId i = 0; i < k; ++i) {
            global.set(wired.global_edges()[i], local[i]);
        }
        const double target = wired_component_count(g, b, global) * mp.log_q() + local.in_count() * mp.log_edge_weight();
        if (first) {
            off = d.log_w[x] - target;
            first = false;
        }
        ASSERT_NEAR(d.log_w[x] - target, off, 1e-9);
    }
    EXPECT_NEAR(off, mp.log_q(), 1e-9);  // the shell component itself
}

TEST(Local, WiredSingleLeafMarginal) {
    const Graph st = families::star(1);
    const auto b = ball(st, 0, 1);
    const ModelParams mp(4.0, 1.2, 1);
    LocalChain<> wired(st, b, Boundary::Wired);
    RngStream rng(4);
    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        wired.step(mp, rng);
        hits += wired.config()[0];
    }
    // exact pi_{B+}: out has c_hat = 1 (weight q), in has c_hat = 0
    const double expect = (std::exp(1.2) - 1) / (4.0 + std::exp(1.2) - 1);
    EXPECT_NEAR(static_cast<double>(hits) / n, expect, 3 * std::sqrt(expect * (1 - expect) / n));
}

TEST(Local, Sandwich) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Graph g = generate_random_regular(20, 3, 30 + seed);
        const auto b = ball(g, 0, 2);
        const ModelParams mp(3.0, 1.0 + 0.3 * seed, 3);
        std::mt19937_64 init(seed);
        Configuration x0(g.num_edges());
        for (EdgeId e = 0; e < g.num_edges(); ++e) {
            x0.set(e, init() & 1);
        }
        ChainState global(g, x0);
        LocalChain<> freec(g, b, Boundary::Free), wired(g, b, Boundary::Wired);
        RngStream rng(seed);
        for (int t = 0; t < 20000; ++t) {
            const auto d = rng.next(g.num_edges());
            global.apply(d, mp);
            freec.apply_global(d, mp);
            wired.apply_global(d, mp);
            for (std::size_t i = 0; i < b.edges().size(); ++i) {
                const bool gv = global.config()[b.edges()[i]];
                ASSERT_LE(freec.config()[i], gv) << "t=" << t;
                ASSERT_LE(gv, wired.config()[i]) << "t=" << t;
            }
        }
    }
}

TEST(Coupled, IdenticalStartsStayIdentical) {
    const Graph g = generate_random_regular(12, 3, 1);
    const auto all = Configuration::all_in(g.num_edges());
    CoupledPair<> c(g, all, all, 3);
    for (int t = 0; t < 2000; ++t) {
        monotone_coupled_step(c, ModelParams(2.0, 1.0, 3));
        ASSERT_TRUE(c.coalesced());
        ASSERT_EQ(c.lower().config(), c.upper().config());
    }
}

TEST(Coupled, ExtremesStayNested) {
    const Graph g = generate_random_regular(40, 5, 2);
    const std::size_t m = g.num_edges();
    const ModelParams mp(5.0, 0.9, 5);
    CoupledPair<> c(g, Configuration::all_out(m), Configuration::all_in(m), 11);
    for (int t = 0; t < 10000; ++t) {
        c.step(mp);
        ASSERT_TRUE(c.nested()) << "t=" << t;
    }
    EXPECT_TRUE(c.no_rejection_yet());
}

TEST(Coupled, RejectionRecorded) {
    const Graph g = families::complete(4);
    const ModelParams mp(2.0, 0.3, 3, {.eta = 0.2});
    CoupledPair<> c(g, Configuration::all_out(6), Configuration::all_in(6), 4, RejectionPolicy::None,
                    RejectionPolicy::OutsideOrdered);
    for (int t = 0; t < 5000; ++t) {
        c.step(mp);
        ASSERT_GE(c.upper().in_count(), 5u);
    }
    ASSERT_TRUE(c.first_rejection().has_value());
}

TEST(Coalescence, SingleEdgeIsImmediate) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto r = coalescence_time(families::single_edge(), ModelParams(3.0, 1.0, 1), s, 100);
        EXPECT_TRUE(r.coalesced);
        EXPECT_EQ(r.steps, 1u);
    }
}

TEST(Coalescence, PercolationIsCouponCollector) {
    const Graph g = families::petersen();
    const std::size_t m = g.num_edges();
    for (std::uint64_t s = 0; s < 30; ++s) {
        const auto r = coalescence_time(g, ModelParams(1.0, 0.7, 3), s, 1'000'000);
        RngStream rng(s);
        std::set<EdgeId> seen;
        std::uint64_t t = 0;
        while (seen.size() < m) {
            seen.insert(rng.next(m).edge);
            ++t;
        }
        EXPECT_TRUE(r.coalesced);
        EXPECT_EQ(r.steps, t);
    }
}

TEST(Coalescence, CapReported) {
    const Graph g = generate_random_regular(30, 3, 2);
    const auto r = coalescence_time(g, ModelParams(2.0, 1.0, 3), 1, 5);
    EXPECT_FALSE(r.coalesced);
    EXPECT_EQ(r.steps, 5u);
}

TEST(Tv, EmpiricalBasics) {
    ExactDistribution uni;
    uni.m = 1;
    uni.prob = {0.5, 0.5};
    const std::vector<std::uint64_t> point(100, 1);
    EXPECT_NEAR(tv_distance_empirical(point, uni), 0.5, 1e-15);
    const std::vector<std::uint64_t> bad{2};
    EXPECT_THROW(tv_distance_empirical(bad, uni), DimensionMismatch);
    const std::vector<Configuration> wrong{Configuration::all_in(3)};
    EXPECT_THROW(tv_distance_empirical(wrong, uni), DimensionMismatch);
    const std::vector<std::size_t> counts{0, 1, 1, 0};
    const std::vector<double> law{0.5, 0.5};
    EXPECT_NEAR(tv_in_count_projected(counts, law), 0.0, 1e-15);
}

TEST(Tv, ExactSamplesConverge) {
    const auto d = exact_distribution(families::triangle(), ModelParams(2.0, 1.0, 2));
    ExactSampler s(d);
    std::mt19937_64 rng(1);
    std::vector<std::uint64_t> xs;
    for (int i = 0; i < 200000; ++i) {
        xs.push_back(s.draw_mask(rng));
    }
    EXPECT_LT(tv_distance_empirical(xs, d), 0.01);
}

TEST(Tv, ChainOnTriangle) {
    const Graph g = families::triangle();
    const ModelParams mp(2.0, 1.0, 2);
    const std::size_t m = 3;
    const auto steps = static_cast<std::uint64_t>(std::ceil(10 * m * std::log(m)));
    const auto xs = sample_final_masks(g, mp, Configuration::all_out(m), steps, 20000, 77);
    EXPECT_LT(tv_distance_empirical(xs, exact_distribution(g, mp)), 0.05);
}

TEST(Mixing, SingleEdgeHalf) {
    const ModelParams mp(1.0, std::log(2.0), 1);
    EXPECT_NEAR(mp.p(), 0.5, 1e-15);
    const auto r = exact_mixing_time(families::single_edge(), mp, Configuration::all_in(1));
    EXPECT_EQ(r.t_mix, 1u);
    EXPECT_NEAR(r.tv[1], 0.0, 1e-15);
}

TEST(Mixing, TriangleMatchesHeatBathConstruction) {
    const Graph g = families::triangle();
    const ModelParams mp(2.0, 1.0, 2);
    const auto pi = exact_distribution(g, mp).prob;
    const auto dense = heat_bath_dense(g, mp);
    const auto sparse = exact_transition_matrix(g, mp);
    for (std::size_t x = 0; x < 8; ++x) {
        for (std::size_t y = 0; y < 8; ++y) {
            ASSERT_NEAR(sparse.at(x, y), dense[x][y], 1e-12);
        }
    }
    for (std::uint64_t start : {0u, 7u, 3u}) {
        const auto r = exact_mixing_time(g, mp, Configuration::from_mask(3, start));
        EXPECT_EQ(r.t_mix, dense_mixing_time(dense, start, pi));
    }
}

TEST(Mixing, TvNonincreasing) {
    const Graph g = generate_random_regular(6, 3, 2);  // m = 9
    const ModelParams mp(3.0, 2.0, 3);
    const auto r = exact_mixing_time(g, mp, Configuration::all_out(g.num_edges()));
    for (std::size_t t = 1; t < r.tv.size(); ++t) {
        EXPECT_LE(r.tv[t], r.tv[t - 1] + 1e-12);
    }
    EXPECT_GT(r.t_mix, 0u);
}

TEST(Mixing, SizeCap) {
    EXPECT_THROW(exact_mixing_time(families::complete(6), ModelParams(2, 1, 5), Configuration::all_in(15)),
                 SizeCapError);
}

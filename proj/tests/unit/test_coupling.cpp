#include <gtest/gtest.h>

#include <random>

#include "../support/small_graphs.hpp"
#include "rclab/coupling_lab.hpp"
#include "rclab/expansion.hpp"

using namespace rclab;

namespace {

// Independent ball marginal: every configuration of G, exterior checked by
// hand, components by DFS.
double ball_marginal_brute(const Graph& g, const BallView& b, bool plus, EdgeId e, double q, double beta) {
    const std::size_t m = g.num_edges(), n = g.num_vertices();
    std::vector<char> in_ball(m, 0);
    for (EdgeId f : b.edges()) {
        in_ball[f] = 1;
    }
    double z = 0, on = 0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
        bool ok = true;
        for (EdgeId f = 0; f < m && ok; ++f) {
            if (!in_ball[f]) {
                ok = (((mask >> f) & 1) != 0) == plus;
            }
        }
        if (!ok) {
            continue;
        }
        std::vector<std::vector<Vertex>> adj(n);
        for (EdgeId f = 0; f < m; ++f) {
            if ((mask >> f) & 1) {
                adj[g.ends(f).u].push_back(g.ends(f).v);
                adj[g.ends(f).v].push_back(g.ends(f).u);
            }
        }
        std::vector<char> seen(n, 0);
        int c = 0;
        for (Vertex s = 0; s < n; ++s) {
            if (seen[s]) {
                continue;
            }
            ++c;
            std::vector<Vertex> st{s};
            seen[s] = 1;
            while (!st.empty()) {
                Vertex x = st.back();
                st.pop_back();
                for (Vertex y : adj[x]) {
                    if (!seen[y]) {
                        seen[y] = 1;
                        st.push_back(y);
                    }
                }
            }
        }
        const double w = std::pow(q, c) * std::pow(std::exp(beta) - 1, std::popcount(mask));
        z += w;
        if ((mask >> e) & 1) {
            on += w;
        }
    }
    return on / z;
}

EdgeId edge_at(const Graph& g, Vertex v) { return *g.incident(v).begin(); }

PartialConfiguration random_partial(std::size_t m, std::mt19937_64& rng, double p_reveal = 0.5) {
    PartialConfiguration a(m);
    for (EdgeId e = 0; e < m; ++e) {
        if (uniform01(rng) < p_reveal) {
            a.set(e, uniform01(rng) < 0.5 ? EdgeState::In : EdgeState::Out);
        }
    }
    return a;
}

}  // namespace

TEST(BallMarginal, SingleBridgeGivesPHat) {
    const Graph g = families::path(3);  // edges 0-1, 1-2
    const ModelParams mp(3.0, 1.2, 2);
    const BallView b(g, 0, 1);
    ASSERT_EQ(b.edges(), std::vector<EdgeId>{0});
    for (auto bd : {BallBoundary::Minus, BallBoundary::Plus}) {
        EXPECT_NEAR(conditional_edge_marginal(g, b, bd, 0, mp).value, mp.p_hat(), 1e-14);
    }
}

TEST(BallMarginal, PercolationIgnoresBoundary) {
    const Graph g = families::petersen();
    const ModelParams mp(1.0, 0.8, 3);
    const BallView b(g, 0, 1);
    for (auto bd : {BallBoundary::Minus, BallBoundary::Plus}) {
        EXPECT_NEAR(conditional_edge_marginal(g, b, bd, edge_at(g, 0), mp).value, mp.p(), 1e-13);
    }
}

TEST(BallMarginal, HighTemperatureLimit) {
    const Graph g = families::complete(5);
    const ModelParams mp(2.0, 1e-9, 4);
    const BallView b(g, 0, 1);
    EXPECT_LT(conditional_edge_marginal(g, b, BallBoundary::Plus, edge_at(g, 0), mp).value, 1e-8);
    EXPECT_LT(conditional_edge_marginal(g, b, BallBoundary::Minus, edge_at(g, 0), mp).value, 1e-8);
}

TEST(BallMarginal, MatchesBruteForce) {
    std::vector<Graph> gs{families::petersen(), families::hypercube(3), families::cycle(9),
                          generate_random_regular(10, 3, 4)};
    for (const auto& g : gs) {
        for (std::size_t r : {1u, 2u}) {
            const BallView b(g, 0, r);
            for (double beta : {0.4, 1.7}) {
                const ModelParams mp(2.5, beta, g.max_degree());
                for (EdgeId e : g.incident(0)) {
                    for (bool plus : {false, true}) {
                        const auto got = conditional_edge_marginal(g, b, plus ? BallBoundary::Plus : BallBoundary::Minus,
                                                                   e, mp);
                        ASSERT_NEAR(got.value, ball_marginal_brute(g, b, plus, e, 2.5, beta), 1e-12);
                    }
                }
            }
        }
    }
}

TEST(BallMarginal, PlusAboveMinus) {
    const Graph g = generate_random_regular(16, 3, 2);
    const ModelParams mp(4.0, 1.3, 3);
    for (std::size_t r = 1; r <= 2; ++r) {
        const BallView b(g, 5, r);
        const EdgeId e = edge_at(g, 5);
        EXPECT_LE(conditional_edge_marginal(g, b, BallBoundary::Minus, e, mp).value,
                  conditional_edge_marginal(g, b, BallBoundary::Plus, e, mp).value + 1e-15);
    }
}

TEST(BallMarginal, LocalChainEstimate) {
    const Graph g = generate_random_regular(30, 3, 7);
    const ModelParams mp(3.0, 1.1, 3);
    const BallView b(g, 0, 2);
    const EdgeId e = edge_at(g, 0);
    for (auto bd : {BallBoundary::Minus, BallBoundary::Plus}) {
        const double exact = conditional_edge_marginal(g, b, bd, e, mp).value;
        const auto est = conditional_edge_marginal(g, b, bd, e, mp, MarginalMethod::LocalChain, {.seed = 9});
        EXPECT_FALSE(est.exact);
        EXPECT_GT(est.std_error, 0.0);
        EXPECT_LT(std::abs(est.value - exact), 5 * est.std_error + 1e-3) << est.diagnostics;
        EXPECT_FALSE(est.diagnostics.empty());
    }
}

TEST(BallMarginal, Errors) {
    const Graph g = families::complete(8);  // 28 edges in the radius-1 ball
    const ModelParams mp(2.0, 1.0, 7);
    EXPECT_THROW(conditional_edge_marginal(g, BallView(g, 0, 1), BallBoundary::Plus, 0, mp), SizeCapError);
    const Graph c = families::cycle(8);
    const EdgeId far = 4;  // not incident to vertex 0
    EXPECT_THROW(conditional_edge_marginal(c, BallView(c, 0, 2), BallBoundary::Plus, far, mp), PreconditionError);
    EXPECT_THROW(conditional_edge_marginal(c, BallView(c, 0, 0), BallBoundary::Plus, 0, mp), PreconditionError);
}

TEST(PhaseMarginal, TrivialOrderedPhase) {
    const Graph g = families::cycle(6);
    const ModelParams mp(2.0, 1.0, 2, {.eta = 0.1});  // (1 - eta) m = 5.4: only all-in
    for (EdgeId e = 0; e < 6; ++e) {
        EXPECT_DOUBLE_EQ(phase_edge_marginal(g, mp, Phase::Ordered, e), 1.0);
        EXPECT_DOUBLE_EQ(phase_edge_marginal(g, mp, Phase::Disordered, e), 0.0);
    }
}

TEST(PhaseMarginal, SymmetricGraphHasEqualMarginals) {
    const Graph g = families::petersen();
    const ModelParams mp(3.0, 1.0, 3, {.eta = 0.3});
    const double a = phase_edge_marginal(g, mp, Phase::Ordered, 0);
    for (EdgeId e = 1; e < g.num_edges(); ++e) {
        EXPECT_NEAR(phase_edge_marginal(g, mp, Phase::Ordered, e), a, 1e-12);
    }
}

TEST(PhaseMarginal, TriangleByHand) {
    const Graph g = families::triangle();
    const ModelParams mp(2.0, 2.0, 2, {.eta = 0.4});  // ordered: at least 1.8 edges in
    const double w = std::exp(2.0) - 1;
    // 3 in: q w^3; 2 in: 3 q w^2; e is in for all-in and two of the 2-in states
    EXPECT_NEAR(phase_edge_marginal(g, mp, Phase::Ordered, 1), (w + 2) / (w + 3), 1e-13);
    // disordered: at most 1.2 in: all-out q^3, one in 3 q^2 w
    EXPECT_NEAR(phase_edge_marginal(g, mp, Phase::Disordered, 1), 2 * w / (2 * 2 + 3 * 2 * w) * 1.0, 1e-13);
}

TEST(Wsm, WholeGraphBallIsUnconditioned) {
    const Graph g = families::complete(4);
    const ModelParams mp(3.0, 1.0, 3, {.eta = 0.3});
    const auto any = wsm_check(g, 0, 0, 2, Phase::Any, mp);
    EXPECT_NEAR(any.gap, 0.0, 1e-14);
    EXPECT_TRUE(any.pass);
    const auto ord = wsm_check(g, 0, 0, 2, Phase::Ordered, mp);
    EXPECT_NEAR(ord.gap, std::abs(exact_distribution(g, mp).edge_marginal(0) -
                                  exact_distribution(g, mp, Restriction::ordered()).edge_marginal(0)),
                1e-14);
    EXPECT_DOUBLE_EQ(ord.tolerance, 1.0 / 600.0);
}

TEST(Wsm, PercolationPlusBall) {
    const Graph g = families::petersen();
    const ModelParams mp(1.0, 0.9, 3, {.eta = 0.3});
    const auto res = wsm_check(g, 0, edge_at(g, 0), 1, Phase::Ordered, mp);
    EXPECT_NEAR(res.ball_marginal, mp.p(), 1e-13);
    EXPECT_NEAR(res.phase_marginal, exact_distribution(g, mp, Restriction::ordered()).edge_marginal(edge_at(g, 0)),
                1e-14);
}

TEST(Oracle, RevealLawMatchesFullDistribution) {
    const Graph g = families::petersen();
    const ModelParams mp(2.0, 1.1, 3, {.eta = 0.3});
    ConditionalOracle o(g, mp);
    std::mt19937_64 rng(1);
    for (int t = 0; t < 20; ++t) {
        const auto a = random_partial(g.num_edges(), rng, 0.4);
        const auto hidden = a.hidden_set();
        if (hidden.size() < 2) {
            continue;
        }
        const std::vector<EdgeId> next{hidden[0], hidden[1]};
        for (auto ph : {Phase::Any, Phase::Ordered}) {
            std::optional<ExactDistribution> d;
            try {
                d = exact_distribution(g, mp, Restriction::clamped(a, ph));
            } catch (const EmptySupportError&) {
                EXPECT_THROW(o.reveal_law(a, next, ph), EmptySupportError);
                continue;
            }
            std::vector<double> want(4, 0.0);
            for (std::uint64_t x = 0; x < d->states(); ++x) {
                want[((x >> next[0]) & 1) | (((x >> next[1]) & 1) << 1)] += d->prob[x];
            }
            const auto& got = o.reveal_law(a, next, ph);
            for (int i = 0; i < 4; ++i) {
                EXPECT_NEAR(got[i], want[i], 1e-12);
            }
        }
    }
    EXPECT_GT(o.cache_size(), 0u);
    PartialConfiguration full(Configuration::all_in(g.num_edges()));
    const std::vector<EdgeId> e0{0};
    EXPECT_THROW(o.reveal_law(full, e0), PreconditionError);
}

TEST(Coupling, EqualLawsStayOnDiagonal) {
    const std::vector<double> mu{0.1, 0.2, 0.3, 0.4};
    for (bool mono : {false, true}) {
        const auto plan = couple_laws(mu, mu, mono);
        EXPECT_TRUE(plan.maximal);
        EXPECT_EQ(plan.disagreement(), 0.0);
    }
}

TEST(Coupling, MaximalMonotoneFromFlow) {
    // conditional reveal laws of nested partial configurations are ordered
    const Graph g = generate_random_regular(8, 3, 1);
    const ModelParams mp(3.0, 1.0, 3);
    ConditionalOracle o(g, mp);
    std::mt19937_64 rng(2);
    int maximal = 0;
    for (int t = 0; t < 60; ++t) {
        auto lo = random_partial(g.num_edges(), rng, 0.5);
        auto hi = lo;
        for (EdgeId e : lo.out_set()) {
            if (uniform01(rng) < 0.5) {
                hi.set(e, EdgeState::In);
            }
        }
        const auto next = lo.hidden_set();
        const auto& mu = o.reveal_law(lo, next);
        const auto& nu = o.reveal_law(hi, next);
        const auto plan = couple_laws(mu, nu, true);
        ASSERT_TRUE(plan.monotone);
        std::vector<double> m1(mu.size(), 0.0), m2(nu.size(), 0.0);
        for (const auto& [x, y, w] : plan.cells) {
            ASSERT_EQ(x & ~y, 0u);
            m1[x] += w;
            m2[y] += w;
        }
        for (std::size_t i = 0; i < mu.size(); ++i) {
            ASSERT_NEAR(m1[i], mu[i], 1e-9);
            ASSERT_NEAR(m2[i], nu[i], 1e-9);
        }
        if (plan.maximal) {
            ++maximal;
            EXPECT_NEAR(plan.disagreement(), plan.tv, 1e-9);
        } else {
            EXPECT_GE(plan.disagreement(), plan.tv - 1e-12);
        }
    }
    EXPECT_GT(maximal, 30);
}

TEST(Coupling, UnorderedLaws) {
    const std::vector<double> mu{0.0, 0.0, 0.0, 1.0};  // all-in
    const std::vector<double> nu{1.0, 0.0, 0.0, 0.0};  // all-out
    EXPECT_THROW(couple_laws(mu, nu, true), InvariantViolation);
    const auto plan = couple_laws(mu, nu, false);
    EXPECT_TRUE(plan.maximal);
    EXPECT_FALSE(plan.monotone);
    EXPECT_NEAR(plan.disagreement(), 1.0, 1e-15);
}

TEST(Coupling, ConditionalPairEqualInputs) {
    const Graph g = families::petersen();
    const ModelParams mp(2.0, 1.0, 3);
    ConditionalOracle o(g, mp);
    std::mt19937_64 rng(3);
    const auto a = random_partial(g.num_edges(), rng, 0.6);
    const auto target = [&] {
        std::vector<EdgeId> t = a.revealed_set();
        auto h = a.hidden_set();
        t.insert(t.end(), h.begin(), h.begin() + std::min<std::size_t>(3, h.size()));
        return t;
    }();
    for (int t = 0; t < 100; ++t) {
        const auto c = optimally_coupled_conditional_pair(o, a, a, target, rng);
        ASSERT_EQ(c.first, c.second);
        ASSERT_TRUE(refines(a, c.first));
    }
}

TEST(Coupling, DisagreementFrequencyIsTv) {
    const Graph g = families::cycle(8);
    const ModelParams mp(2.0, 1.5, 2);
    ConditionalOracle o(g, mp);
    PartialConfiguration lo(g.num_edges()), hi(g.num_edges());
    for (EdgeId e : {4u, 5u, 6u}) {
        lo.set(e, EdgeState::Out);
        hi.set(e, EdgeState::In);
    }
    std::vector<EdgeId> target{0, 1, 2, 4, 5, 6};
    std::mt19937_64 rng(4);
    const int draws = 10000;
    int differ = 0;
    double tv = 0;
    for (int t = 0; t < draws; ++t) {
        const auto c = optimally_coupled_conditional_pair(o, lo, hi, target, rng);
        tv = c.tv;
        ASSERT_TRUE(c.monotone);
        for (EdgeId e = 0; e < g.num_edges(); ++e) {
            ASSERT_FALSE(c.first.is_in(e) && !c.second.is_in(e));
        }
        differ += c.first.to_string().substr(0, 3) != c.second.to_string().substr(0, 3);
    }
    const double sigma = std::sqrt(tv * (1 - tv) / draws);
    EXPECT_GT(tv, 0.05);
    EXPECT_NEAR(static_cast<double>(differ) / draws, tv, 4 * sigma);
}

TEST(StructuralFacts, SameBoundaryPartitionSameProjection) {
    const Graph g = generate_random_regular(8, 3, 5);
    const ModelParams mp(3.0, 1.2, 3);
    ConditionalOracle o(g, mp);
    std::mt19937_64 rng(6);
    int equal_xi = 0, different = 0;
    for (int t = 0; t < 3000 && equal_xi < 200; ++t) {
        auto a1 = random_partial(g.num_edges(), rng, 0.5);
        auto a2 = a1;
        for (EdgeId e : a1.revealed_set()) {
            a2.set(e, uniform01(rng) < 0.5 ? EdgeState::In : EdgeState::Out);
        }
        if (a1.hidden_set().empty()) {
            continue;
        }
        const double res = same_projection_residual(o, a1, a2);
        if (boundary_component_set(g, a1) == boundary_component_set(g, a2)) {
            ++equal_xi;
            ASSERT_LT(res, 1e-10);
        } else if (res > 1e-6) {
            ++different;
        }
    }
    EXPECT_GE(equal_xi, 100);
    EXPECT_GT(different, 0);
}

TEST(StructuralFacts, MonotonicityExhaustiveSmallGraphs) {
    const auto shapes = smallg::connected_graphs(6);
    ASSERT_EQ(shapes.size(), 1u + 1 + 3 + 5 + 12 + 30);
    for (const auto& s : shapes) {
        const Graph g = smallg::to_graph(s);
        for (double beta : {0.5, 2.0}) {
            const auto rep = exhaustive_monotonicity_check(g, ModelParams(3.0, beta, g.max_degree()));
            ASSERT_EQ(rep.violations, 0u);
            // sum over R of 3^|R| = 4^m
            ASSERT_EQ(rep.pairs, std::uint64_t{1} << (2 * g.num_edges()));
        }
    }
}

TEST(StructuralFacts, MonotonicityWithLoopsAndMultiEdges) {
    const Graph g(3, {{0, 1}, {0, 1}, {1, 2}, {2, 2}, {0, 2}});
    const auto rep = exhaustive_monotonicity_check(g, ModelParams(2.0, 1.0, 4));
    EXPECT_EQ(rep.violations, 0u);
    EXPECT_GT(rep.comparisons, 0u);
}

// --- revealing coupling, ordered ------------------------------------------------

namespace {

ModelParams cycle_params(double beta, double eta) { return ModelParams(2.0, beta, 2, {.delta_class = 0.05, .eta = eta}); }

}  // namespace

TEST(RevealOrdered, GateFailsForSmallEta) {
    const Graph g = families::cycle(16);
    const auto mp = cycle_params(3.0, 0.05);  // gate 15.2 > 12 exterior edges
    OracleRevealSampler smp(g, mp);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto out = revealing_coupling_ordered(g, 0, 2, mp, seed, smp);
        EXPECT_EQ(out.tag, OutcomeTag::UnsuccessfulOccupancy);
        EXPECT_EQ(out.iterations, 0u);
        EXPECT_EQ(out.trace.size(), 1u);
    }
}

TEST(RevealOrdered, InvariantsAndOutcomes) {
    const Graph g = families::cycle(16);
    const auto mp = cycle_params(2.0, 0.45);
    OracleRevealSampler smp(g, mp);
    std::map<OutcomeTag, int> tags;
    for (std::uint64_t seed = 0; seed < 400; ++seed) {
        const auto out = revealing_coupling_ordered(g, 0, 2, mp, seed, smp);
        ++tags[out.tag];
        EXPECT_EQ(out.radii, (CutRadii{2, 0}));
        EXPECT_FALSE(out.radii_bound_unmet);
        EXPECT_TRUE(out.all_maximal);
        if (out.tag != OutcomeTag::UnsuccessfulOccupancy) {
            EXPECT_EQ(out.invariant_checks, out.trace.size());
            EXPECT_EQ(out.iterations + 1, out.trace.size());
            EXPECT_GE(out.occupancy_at_gate, 9u);
            // reveals only grow, and the final pair refines every state
            for (std::size_t i = 0; i + 1 < out.trace.size(); ++i) {
                EXPECT_LT(out.trace[i].revealed.size(), out.trace[i + 1].revealed.size());
                EXPECT_NE(out.trace[i].w, kNoVertex);
            }
            for (const auto& st : out.trace) {
                EXPECT_TRUE(refines(st.phase_side, PartialConfiguration(out.phase_config)));
                EXPECT_TRUE(refines(st.ball_side, PartialConfiguration(out.ball_config)));
            }
            for (EdgeId e = 0; e < g.num_edges(); ++e) {
                EXPECT_LE(out.phase_config[e], out.ball_config[e]);
            }
        }
        if (out.tag == OutcomeTag::AgreeAtV) {
            EXPECT_TRUE(out.agree_at_v);
        }
    }
    EXPECT_GT(tags[OutcomeTag::AgreeAtV], 0);
    EXPECT_GT(tags[OutcomeTag::UnsuccessfulOccupancy], 0);
    EXPECT_GT(tags[OutcomeTag::UnsuccessfulRadius], 0);
    // witness threshold r/(400 D (1+K)) - 1 is negative at this size
    EXPECT_EQ(tags[OutcomeTag::LargePolymerWitness], 0);
}

TEST(RevealOrdered, AdjacentRadiiStopAfterOneReveal) {
    const Graph g = families::cycle(16);
    const auto mp = cycle_params(1.0, 0.45);
    OracleRevealSampler smp(g, mp);
    int reached = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto out = revealing_coupling_ordered(g, 0, 2, mp, seed, smp, {.radii = CutRadii{1, 0}});
        if (out.iterations > 0) {
            ++reached;
            EXPECT_EQ(out.iterations, 1u);
            EXPECT_EQ(out.tag, OutcomeTag::UnsuccessfulRadius);
        }
    }
    EXPECT_GT(reached, 0);
}

TEST(RevealOrdered, LowTemperatureMostlyAgrees) {
    const Graph g = families::cycle(16);
    const auto mp = cycle_params(6.0, 0.3);
    OracleRevealSampler smp(g, mp);
    int agree = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        agree += revealing_coupling_ordered(g, 0, 2, mp, seed, smp).tag == OutcomeTag::AgreeAtV;
    }
    EXPECT_GT(agree, 180);
}

TEST(RevealOrdered, MarginalLawsAreCorrect) {
    const Graph g = families::cycle(16);
    const auto mp = cycle_params(2.5, 0.45);
    auto shared = std::make_shared<ConditionalOracle>(g, mp);
    OracleRevealSampler smp(shared);
    const BallView b(g, 0, 2);
    // exact in-count law of pi^ord, and the plus-ball law of the 4 ball edges
    const auto ord = exact_distribution(g, mp, Restriction::ordered());
    const auto ord_law = ord.in_count_law();
    PartialConfiguration clamp(g.num_edges());
    std::vector<char> in_ball(g.num_edges(), 0);
    for (EdgeId e : b.edges()) {
        in_ball[e] = 1;
    }
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
        if (!in_ball[e]) {
            clamp.set(e, EdgeState::In);
        }
    }
    const auto& ball_law = shared->reveal_law(clamp, b.edges());
    const int runs = 6000;
    std::vector<std::size_t> counts;
    std::vector<double> ball_freq(ball_law.size(), 0.0);
    for (int s = 0; s < runs; ++s) {
        const auto out = revealing_coupling_ordered(g, 0, 2, mp, 1000 + s, smp);
        counts.push_back(out.phase_config.in_count());
        std::size_t idx = 0;
        for (std::size_t i = 0; i < b.edges().size(); ++i) {
            idx |= static_cast<std::size_t>(out.ball_config[b.edges()[i]]) << i;
        }
        ball_freq[idx] += 1.0 / runs;
        for (EdgeId e = 0; e < g.num_edges(); ++e) {
            ASSERT_TRUE(in_ball[e] || out.ball_config[e]);
        }
    }
    EXPECT_LT(tv_in_count_projected(counts, ord_law), 0.03);
    EXPECT_LT(exact_tv(ball_freq, ball_law), 0.03);
}

TEST(RevealOrdered, ChainSamplerKeepsInvariants) {
    const Graph g = generate_random_regular(40, 3, 3);
    const ModelParams mp(3.0, 3.0, 3, {.eta = 0.2});
    ChainRevealSampler smp(g, mp, 30);
    int ran = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto out = revealing_coupling_ordered(g, 0, 3, mp, seed, smp);
        EXPECT_FALSE(out.all_maximal && out.tag != OutcomeTag::UnsuccessfulOccupancy);
        EXPECT_EQ(out.sampler, SamplerKind::Chain);
        if (out.tag != OutcomeTag::UnsuccessfulOccupancy) {
            ++ran;
            EXPECT_EQ(out.invariant_checks, out.trace.size());
        }
    }
    EXPECT_GT(ran, 0);
}

TEST(RevealOrdered, FallbackAnnulusIsFlagged) {
    const Graph g = families::hypercube(3);
    const ModelParams mp(2.0, 2.0, 3, {.eta = 0.45});
    OracleRevealSampler smp(g, mp);
    const auto out = revealing_coupling_ordered(g, 0, 2, mp, 1, smp);
    EXPECT_TRUE(out.radii_bound_unmet);
    EXPECT_LT(out.radii.r2, out.radii.r1);
}

TEST(RevealOrdered, JsonLine) {
    const Graph g = families::cycle(16);
    const auto mp = cycle_params(2.0, 0.45);
    OracleRevealSampler smp(g, mp);
    const auto j = revealing_coupling_ordered(g, 0, 2, mp, 5, smp).to_json(5);
    EXPECT_EQ(j["seed"], 5);
    EXPECT_TRUE(j.contains("outcome"));
    EXPECT_TRUE(j.contains("iterations"));
    EXPECT_TRUE(j.contains("occupancy_at_gate"));
    EXPECT_EQ(j["radii"]["r1"], 2);
}

TEST(RevealOrdered, BadRadiiRejected) {
    const Graph g = families::cycle(16);
    const auto mp = cycle_params(2.0, 0.45);
    OracleRevealSampler smp(g, mp);
    EXPECT_THROW(revealing_coupling_ordered(g, 0, 2, mp, 1, smp, {.radii = CutRadii{3, 0}}), PreconditionError);
    EXPECT_THROW(revealing_coupling_ordered(g, 0, 2, mp, 1, smp, {.radii = CutRadii{1, 1}}), PreconditionError);
}

// --- revealing coupling, disordered -------------------------------------------

TEST(RevealDisordered, GateFailsWhenBallTooBig) {
    const Graph g = families::cycle(16);
    const auto mp = cycle_params(1.0, 0.2);  // 3.2 - 8 < 0
    OracleRevealSampler smp(g, mp);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto out = revealing_coupling_disordered(g, 0, mp, seed, smp, {.radius = 4});
        EXPECT_EQ(out.tag, OutcomeTag::UnsuccessfulOccupancy);
        EXPECT_LT(out.gate, 0.0);
    }
}

TEST(RevealDisordered, HighTemperatureAgrees) {
    const Graph g = families::cycle(20);
    const auto mp = cycle_params(0.05, 0.45);
    OracleRevealSampler smp(g, mp);
    int agree = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto out = revealing_coupling_disordered(g, 0, mp, seed, smp, {.radius = 4});
        agree += out.tag == OutcomeTag::AgreeAtV;
        if (out.tag != OutcomeTag::UnsuccessfulOccupancy) {
            EXPECT_EQ(out.invariant_checks, 2u);
            for (EdgeId e = 0; e < g.num_edges(); ++e) {
                EXPECT_LE(out.ball_config[e], out.phase_config[e]);
            }
        }
    }
    EXPECT_GT(agree, 90);
}

TEST(RevealDisordered, WitnessComponent) {
    // a 6-cycle through v with a long pendant path hanging off the far vertex,
    // so the exterior is big enough for the gate at moderate beta
    std::vector<EdgeEnds> es;
    for (Vertex i = 0; i < 6; ++i) {
        es.push_back({i, (i + 1) % 6});
    }
    for (Vertex i = 6; i < 66; ++i) {
        es.push_back({i == 6 ? Vertex{3} : i - 1, i});
    }
    const Graph g(66, es);
    const ModelParams mp(2.0, 0.75, 3, {.eta = 0.45});
    ChainRevealSampler smp(g, mp, 40);
    int witnesses = 0, ran = 0;
    for (std::uint64_t seed = 0; seed < 400 && witnesses < 8; ++seed) {
        const auto out = revealing_coupling_disordered(g, 0, mp, seed, smp, {.radius = 2});
        ASSERT_EQ(out.radii, (CutRadii{2, 0}));
        ran += out.tag != OutcomeTag::UnsuccessfulOccupancy;
        if (out.tag != OutcomeTag::LargePolymerWitness) {
            continue;
        }
        ++witnesses;
        EXPECT_GE(out.witness_path, out.radii.r1 - (out.radii.r2 + 1));
        EXPECT_GE(out.witness_size, out.witness_path);
        // boundary of F_1 is {2, 4}; the witness joins them through 3
        ASSERT_TRUE(out.phase_config[2] && out.phase_config[3]);
        UnionFind uf(g.num_vertices());
        for (EdgeId e : out.phase_config.in_edges()) {
            uf.unite(g.ends(e).u, g.ends(e).v);
        }
        std::size_t size = 0;
        for (EdgeId e : out.phase_config.in_edges()) {
            size += uf.find(g.ends(e).u) == uf.find(2);
        }
        EXPECT_EQ(out.witness_size, size);
    }
    EXPECT_GT(ran, 100);
    EXPECT_GT(witnesses, 0);
}

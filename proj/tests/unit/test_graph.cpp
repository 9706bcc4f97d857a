#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "rclab/ball.hpp"
#include "rclab/expansion.hpp"
#include "rclab/graph.hpp"
#include "rclab/graph_io.hpp"

using namespace rclab;

namespace {

// Independent expansion oracle: direct popcount over every mask, cut counted
// edge by edge (no incremental bookkeeping).
double brute_expansion(const Graph& g, double eps) {
    const std::size_t n = g.num_vertices();
    const std::size_t d = *g.regular_degree();
    const auto cap = static_cast<std::size_t>(std::floor(eps * n + 1e-9));
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
        const auto s = static_cast<std::size_t>(std::popcount(mask));
        if (s > cap) {
            continue;
        }
        std::size_t cut = 0;
        for (const auto& [u, v] : g.edge_list()) {
            cut += ((mask >> u) & 1) != ((mask >> v) & 1);
        }
        best = std::min(best, static_cast<double>(cut) / static_cast<double>(d * s));
    }
    return best;
}

std::vector<std::size_t> hist(const Graph& g) {
    std::vector<std::size_t> h(g.max_degree() + 1, 0);
    for (Vertex v = 0; v < g.num_vertices(); ++v) {
        ++h[g.degree(v)];
    }
    return h;
}

}  // namespace

TEST(Generate, SingleEdgeIsForced) {
    const Graph g = generate_random_regular(2, 1, 7, {.simple = true});
    ASSERT_EQ(g.num_edges(), 1u);
    EXPECT_EQ(g.ends(0), (EdgeEnds{0, 1}));
}

TEST(Generate, FourVerticesCubicIsK4) {
    const Graph g = generate_random_regular(4, 3, 11);
    EXPECT_EQ(g, families::complete(4));
}

TEST(Generate, DegreesArePointMass) {
    const Graph g = generate_random_regular(1000, 5, 3);
    const auto h = hist(g);
    ASSERT_EQ(h.size(), 6u);
    EXPECT_EQ(h[5], 1000u);
    EXPECT_EQ(g.num_edges(), 2500u);
    EXPECT_TRUE(g.is_simple());
}

TEST(Generate, DeterministicUnderSeed) {
    EXPECT_EQ(generate_random_regular(200, 3, 99), generate_random_regular(200, 3, 99));
    EXPECT_FALSE(generate_random_regular(200, 3, 99) == generate_random_regular(200, 3, 100));
}

TEST(Generate, ParityAndSizeErrors) {
    EXPECT_THROW(generate_random_regular(5, 3, 1), PreconditionError);
    EXPECT_THROW(generate_random_regular(4, 4, 1), PreconditionError);
}

TEST(Generate, RejectionBudgetIsDistinct) {
    // A simple 3-regular graph on 6 vertices exists but one attempt is
    // almost never enough; with a budget of 1 some seed must fail.
    bool failed = false;
    for (std::uint64_t s = 0; s < 50 && !failed; ++s) {
        try {
            generate_random_regular(6, 3, s, {.simple = true, .max_attempts = 1});
        } catch (const RejectionBudgetExceeded&) {
            failed = true;
        }
    }
    EXPECT_TRUE(failed);
}

TEST(Generate, MultigraphModeKeepsDegrees) {
    const Graph g = generate_random_regular(10, 4, 5, {.simple = false});
    EXPECT_EQ(*g.regular_degree(), 4u);
}

TEST(Generate, SumOfDegreesIsTwiceEdges) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Graph g = generate_random_regular(64, 5, s);
        std::size_t sum = 0;
        for (Vertex v = 0; v < g.num_vertices(); ++v) {
            sum += g.degree(v);
        }
        EXPECT_EQ(sum, 2 * g.num_edges());
        EXPECT_EQ(sum, 5u * 64u);
    }
}

TEST(Ball, RadiusZero) {
    const Graph g = families::petersen();
    const auto b = ball(g, 3, 0);
    EXPECT_EQ(b.vertices(), std::vector<Vertex>{3});
    EXPECT_TRUE(b.edges().empty());
    EXPECT_EQ(b.shell(), std::vector<Vertex>{3});
}

TEST(Ball, K4RadiusOne) {
    const Graph g = families::complete(4);
    for (Vertex v = 0; v < 4; ++v) {
        const auto b = ball(g, v, 1);
        EXPECT_EQ(b.vertices().size(), 4u);
        EXPECT_EQ(b.edges().size(), 6u);
    }
}

TEST(Ball, C6RadiusTwo) {
    const auto b = ball(families::cycle(6), 0, 2);
    EXPECT_EQ(b.vertices().size(), 5u);
    EXPECT_EQ(b.edges().size(), 4u);
    std::set<Vertex> shell(b.shell().begin(), b.shell().end());
    EXPECT_EQ(shell, (std::set<Vertex>{2, 4}));
}

TEST(Ball, MonotoneInRadius) {
    const Graph g = generate_random_regular(200, 5, 17);
    for (Vertex v = 0; v < 200; v += 13) {
        for (std::size_t r = 0; r < 5; ++r) {
            const auto a = ball(g, v, r);
            const auto b = ball(g, v, r + 1);
            for (Vertex x : a.vertices()) {
                EXPECT_TRUE(b.contains(x));
            }
            // S_{r+1} = B_{r+1} \ B_r
            for (Vertex x : b.shell()) {
                EXPECT_FALSE(a.contains(x));
            }
            EXPECT_EQ(b.vertices().size() - a.vertices().size(), b.shell().size());
        }
    }
}

TEST(TreeExcess, Examples) {
    const Graph t = families::random_tree(30, 4);
    EXPECT_EQ(tree_excess(t, ball(t, 0, 30)), 0u);
    const Graph c6 = families::cycle(6);
    EXPECT_EQ(tree_excess(c6, ball(c6, 0, 3)), 1u);
    const Graph k4 = families::complete(4);
    EXPECT_EQ(tree_excess(k4, ball(k4, 0, 1)), 3u);
}

TEST(Treelike, Examples) {
    const Graph t = families::random_tree(40, 8);
    EXPECT_TRUE(is_locally_treelike(t, 0));
    const Graph k4 = families::complete(4);
    EXPECT_EQ(treelike_radius(k4), 0u);
    EXPECT_TRUE(is_locally_treelike(k4, 0));
}

TEST(Treelike, LargeRandomGraphScan) {
    const Graph g = generate_random_regular(10000, 5, 2024);
    const auto rep = local_excess_scan(g);
    // floor(log_4(10^4)/3) = floor(6.64/3) = 2
    EXPECT_EQ(rep.radius, 2u);
    EXPECT_TRUE(is_locally_treelike(g, rep.max_excess));
    if (rep.max_excess > 0) {
        EXPECT_FALSE(is_locally_treelike(g, rep.max_excess - 1));
    }
    RecordProperty("max_excess", static_cast<int>(rep.max_excess));
}

TEST(Expansion, SingleEdge) {
    const auto r = expansion_profile(families::single_edge(), 0.5, ExpansionMode::Exact);
    EXPECT_DOUBLE_EQ(r.value, 1.0);
}

TEST(Expansion, K4) {
    const auto r = expansion_profile(families::complete(4), 0.5, ExpansionMode::Exact);
    EXPECT_NEAR(r.value, 2.0 / 3.0, 1e-15);
    EXPECT_EQ(r.witness.size(), 2u);
}

TEST(Expansion, C6) {
    const auto r = expansion_profile(families::cycle(6), 0.5, ExpansionMode::Exact);
    EXPECT_NEAR(r.value, 1.0 / 3.0, 1e-15);
}

TEST(Expansion, RejectsBadInputs) {
    EXPECT_THROW(expansion_profile(families::path(3), 0.5, ExpansionMode::Exact), PreconditionError);
    EXPECT_THROW(expansion_profile(families::cycle(6), 0.0, ExpansionMode::Exact), PreconditionError);
    EXPECT_THROW(expansion_profile(families::cycle(6), 0.6, ExpansionMode::Exact), PreconditionError);
    EXPECT_THROW(expansion_profile(families::cycle(26), 0.5, ExpansionMode::Exact), SizeCapError);
}

TEST(Expansion, ExactMatchesIndependentEnumeration) {
    std::vector<Graph> gs = {families::complete(4), families::cycle(7), families::petersen(),
                             families::hypercube(3), families::complete(6)};
    for (std::uint64_t s = 0; s < 8; ++s) {
        gs.push_back(generate_random_regular(12, 3, s));
        gs.push_back(generate_random_regular(10, 4, s));
    }
    for (const auto& g : gs) {
        for (double eps : {0.1, 0.25, 0.3, 0.5}) {
            const auto r = expansion_profile(g, eps, ExpansionMode::Exact);
            EXPECT_EQ(r.value, brute_expansion(g, eps));
        }
    }
}

TEST(Expansion, HeuristicIsAnUpperBound) {
    for (std::uint64_t s = 0; s < 6; ++s) {
        const Graph g = generate_random_regular(16, 3, s);
        const auto ex = expansion_profile(g, 0.5, ExpansionMode::Exact);
        const auto he = expansion_profile(g, 0.5, ExpansionMode::Heuristic);
        EXPECT_FALSE(he.exact);
        EXPECT_GE(he.value + 1e-15, ex.value);
    }
}

TEST(ExpanderClass, K4Member) {
    const auto rep = in_class_G_delta(families::complete(4), 0.3, ExpansionMode::Exact);
    EXPECT_EQ(rep.verdict, ClassVerdict::Member);
    EXPECT_NEAR(rep.half.value, 2.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(rep.small.value, 1.0);
}

TEST(ExpanderClass, C6Verdict) {
    // 0.3 * 6 = 1.8, so only singletons count for the small threshold, and
    // phi(1/2) = 1/3 clears 1/10: C6 is a member.
    const auto rep = in_class_G_delta(families::cycle(6), 0.3, ExpansionMode::Exact);
    EXPECT_TRUE(rep.half_ok);
    EXPECT_TRUE(rep.small_ok);
    EXPECT_DOUBLE_EQ(rep.small.value, 1.0);
    EXPECT_EQ(rep.verdict, ClassVerdict::Member);
}

TEST(ExpanderClass, PathRejected) {
    EXPECT_THROW(in_class_G_delta(families::path(3), 0.3, ExpansionMode::Exact), PreconditionError);
}

TEST(ExpanderClass, HeuristicNeverCertifies) {
    const auto rep = in_class_G_delta(families::complete(6), 0.3, ExpansionMode::Heuristic);
    EXPECT_NE(rep.verdict, ClassVerdict::Member);
    const auto bad = in_class_G_delta(families::cycle(20), 0.3, ExpansionMode::Heuristic);
    EXPECT_EQ(bad.verdict, ClassVerdict::NotMember);
}

TEST(Bfs, TreeHasNoExcess) {
    const Graph t = families::random_tree(25, 1);
    const auto d = bfs_decomposition(t, 0, 25);
    EXPECT_TRUE(d.excess_edges().empty());
    EXPECT_EQ(d.tree_edges().size(), 24u);
}

TEST(Bfs, K4) {
    const auto d = bfs_decomposition(families::complete(4), 0, 1);
    EXPECT_EQ(d.tree_edges().size(), 3u);
    EXPECT_EQ(d.excess_edges().size(), 3u);
}

TEST(Bfs, C6ClosingEdge) {
    const Graph g = families::cycle(6);
    const auto d = bfs_decomposition(g, 0, 3);
    ASSERT_EQ(d.excess_edges().size(), 1u);
    // Vertex 3 is reached first from 2, so {3,4} closes the cycle.
    EXPECT_EQ(g.ends(d.excess_edges()[0]), (EdgeEnds{3, 4}));
    EXPECT_EQ(d.parent(3), 2u);
}

TEST(Bfs, StructuralProperties) {
    const Graph g = generate_random_regular(300, 5, 8);
    for (Vertex v = 0; v < 300; v += 37) {
        for (std::size_t r = 1; r <= 4; ++r) {
            const auto d = bfs_decomposition(g, v, r);
            EXPECT_EQ(d.tree_edges().size(), d.ball().vertices().size() - 1);
            for (EdgeId e : d.excess_edges()) {
                const auto a = d.depth(g.ends(e).u);
                const auto b = d.depth(g.ends(e).v);
                EXPECT_LE(a > b ? a - b : b - a, 1u);
            }
            // DFS preorder: every subtree is a contiguous block whose first
            // element is its root.
            for (Vertex x : d.ball().vertices()) {
                const auto st = d.subtree(x);
                EXPECT_EQ(st.front(), x);
                for (Vertex y : st) {
                    EXPECT_TRUE(d.in_subtree(y, x));
                }
                EXPECT_EQ(d.subtree_edges(x).size(), st.size() - 1);
            }
        }
    }
}

TEST(Bfs, PrefixProperty) {
    // The tree of a smaller radius is the top of the larger one.
    const Graph g = generate_random_regular(100, 4, 3);
    const auto big = bfs_decomposition(g, 5, 4);
    const auto small = bfs_decomposition(g, 5, 2);
    for (Vertex x : small.ball().vertices()) {
        if (x != 5) {
            EXPECT_EQ(small.parent(x), big.parent(x));
        }
    }
}

TEST(CutRadii, Examples) {
    std::vector<std::size_t> none;
    EXPECT_EQ(*widest_excess_free_annulus(std::span<const std::size_t>(none), 5), (CutRadii{5, 0}));
    std::vector<std::size_t> two{2};
    EXPECT_EQ(*widest_excess_free_annulus(std::span<const std::size_t>(two), 5), (CutRadii{5, 2}));
    for (std::size_t k = 1; k <= 6; ++k) {
        std::vector<std::size_t> packed;
        for (std::size_t i = 1; i <= k; ++i) {
            packed.push_back(i);
        }
        EXPECT_EQ(*widest_excess_free_annulus(std::span<const std::size_t>(packed), k + 2),
                  (CutRadii{k + 2, k}));
    }
}

TEST(CutRadii, TiesGoToSmallestInner) {
    std::vector<std::size_t> mid{3};
    // {1,2} and {4,5} both have width 2.
    EXPECT_EQ(*widest_excess_free_annulus(std::span<const std::size_t>(mid), 5), (CutRadii{2, 0}));
}

TEST(CutRadii, OnGraphs) {
    const Graph g = generate_random_regular(20000, 3, 12);
    std::size_t checked = 0;
    for (Vertex v = 0; v < 20000; v += 97) {
        const std::size_t r = 6;
        const auto d = bfs_decomposition(g, v, r);
        const std::size_t k = std::max<std::size_t>(d.excess_edges().size(), 1);
        if (r <= k + 1) {
            EXPECT_THROW(choose_cut_radii(g, d, r, k), PreconditionError);
            continue;
        }
        const auto c = choose_cut_radii(g, d, r, k);
        EXPECT_GE(c.r1, c.r2 + 1);
        EXPECT_LE(c.r1, r);
        EXPECT_TRUE(annulus_is_excess_free(g, d, c));
        EXPECT_GE(static_cast<double>(c.gap()), static_cast<double>(r) / (1.0 + k) - 1.0);
        // No edge of the shell E(B_r1) \ E(B_r2) is an excess edge.
        const auto b1 = ball(g, v, c.r1);
        const auto b2 = ball(g, v, c.r2);
        std::set<EdgeId> excess(d.excess_edges().begin(), d.excess_edges().end());
        for (EdgeId e : b1.edges()) {
            if (!b2.contains_edge(g, e)) {
                EXPECT_FALSE(excess.count(e));
            }
        }
        ++checked;
    }
    EXPECT_GT(checked, 0u);
}

TEST(GraphIo, TextRoundTrip) {
    const Graph g = generate_random_regular(50, 3, 4);
    const std::string text = to_edge_list(g);
    const Graph h = from_edge_list(text);
    EXPECT_EQ(g, h);
    EXPECT_EQ(to_edge_list(h), text);
}

TEST(GraphIo, BinaryRoundTrip) {
    const Graph g = generate_random_regular(20, 4, 9, {.simple = false});
    std::stringstream ss;
    write_binary(ss, g);
    const std::string bytes = ss.str();
    EXPECT_EQ(bytes.substr(0, 4), "RCLG");
    EXPECT_EQ(bytes.size(), 4u + 4 + 8 + 8 + 8 * g.num_edges());
    std::stringstream in(bytes);
    const Graph h = read_binary(in);
    EXPECT_EQ(g, h);
    std::stringstream again;
    write_binary(again, h);
    EXPECT_EQ(again.str(), bytes);
}

TEST(GraphIo, Errors) {
    EXPECT_THROW(from_edge_list("3 2\n0 1\n"), FormatError);
    EXPECT_THROW(from_edge_list("3 1\n0 7\n"), FormatError);
    std::stringstream bad("XXXX");
    EXPECT_THROW(read_binary(bad), FormatError);
}

TEST(GraphIo, HashIsStable) {
    EXPECT_EQ(graph_hash(families::triangle()), graph_hash(from_edge_list("3 3\n0 1\n1 2\n2 0\n")));
    EXPECT_NE(graph_hash(families::triangle()), graph_hash(families::path(3)));
    EXPECT_EQ(graph_hash(families::triangle()).size(), 16u);
}

TEST(Families, Shapes) {
    EXPECT_EQ(*families::petersen().regular_degree(), 3u);
    EXPECT_TRUE(families::petersen().is_simple());
    EXPECT_EQ(*families::hypercube(4).regular_degree(), 4u);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Graph t = families::random_tree(2 + s, s);
        EXPECT_EQ(t.num_edges(), t.num_vertices() - 1);
        EXPECT_TRUE(t.is_connected());
    }
}

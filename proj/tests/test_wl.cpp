#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "grepool/wl.hpp"
#include "testutil.hpp"

using namespace grepool;

namespace {

Graph cycle(int n) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n});
    return make_graph(n, edges);
}

// Disjoint union of two triangles as a single 6-node graph.
Graph two_triangles() {
    return make_graph(6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}});
}

Graph path(int n) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
    return make_graph(n, edges);
}

}  // namespace

TEST_CASE("a triangle keeps a single color at every round") {
    WLColoring coloring = wl_refine(make_graph(3, {{0, 1}, {1, 2}, {2, 0}}));
    for (const auto& round : coloring.rounds) {
        CHECK(color_histogram(round).size() == 1);
    }
}

TEST_CASE("a path of three nodes splits into endpoints and center at round 1") {
    WLColoring coloring = wl_refine(path(3));
    REQUIRE(coloring.rounds.size() >= 2);
    CHECK(color_histogram(coloring.rounds[0]).size() == 1);
    auto hist = color_histogram(coloring.rounds[1]);
    REQUIRE(hist.size() == 2);
    std::vector<int> counts;
    for (auto& [c, n] : hist) counts.push_back(n);
    std::sort(counts.begin(), counts.end());
    CHECK(counts == std::vector<int>{1, 2});
}

TEST_CASE("refinement stabilizes within n rounds with non-decreasing color counts") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 10);
        std::vector<std::pair<int, int>> edges;
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v)
                if (rng() % 3 == 0) edges.push_back({u, v});
        WLColoring coloring = wl_refine(make_graph(n, edges));
        CHECK(coloring.stable_round <= n);
        for (size_t r = 1; r < coloring.rounds.size(); ++r) {
            CHECK(color_histogram(coloring.rounds[r]).size() >=
                  color_histogram(coloring.rounds[r - 1]).size());
        }
    }
}

TEST_CASE("hexagon and two triangles are 1-WL equivalent") {
    CHECK(wl_equivalent(cycle(6), two_triangles()));
    // Identical stable histograms: both collapse to one color class of six.
    auto a = wl_refine(cycle(6));
    auto b = wl_refine(two_triangles());
    CHECK(color_histogram(a.rounds.back()).size() == 1);
    CHECK(color_histogram(b.rounds.back()).size() == 1);
}

TEST_CASE("every graph is equivalent to itself") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 8);
        std::vector<std::pair<int, int>> edges;
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v)
                if (rng() % 2) edges.push_back({u, v});
        Graph g = make_graph(n, edges);
        CHECK(wl_equivalent(g, g));
    }
}

TEST_CASE("path and triangle are distinguishable") {
    CHECK_FALSE(wl_equivalent(path(3), cycle(3)));
}

TEST_CASE("graphs with different node counts or feature dims are distinguishable") {
    CHECK_FALSE(wl_equivalent(path(3), path(4)));
    Graph a = path(3), b = path(3);
    b.feat_dim = 2;
    b.features.assign(6, 1.0);
    CHECK_FALSE(wl_equivalent(a, b));
}

TEST_CASE("differing initial features split the refinement") {
    Graph a = path(2), b = path(2);
    b.features = {1.0, 2.0};
    CHECK(wl_equivalent(a, a));
    CHECK_FALSE(wl_equivalent(a, b));
}

TEST_CASE("refinement is isomorphism invariant") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 8);
        std::vector<std::pair<int, int>> edges;
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v)
                if (rng() % 3 == 0) edges.push_back({u, v});
        Graph g = make_graph(n, edges);

        std::vector<int> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng() % (i + 1)]);
        Graph pg = make_graph(n, {});
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v)
                if (g.edge(u, v)) pg.set_edge(perm[u], perm[v]);

        CHECK(wl_equivalent(g, pg));
        auto ha = color_histogram(wl_refine(g).rounds.back());
        auto hb = color_histogram(wl_refine(pg).rounds.back());
        std::vector<int> ca, cb;
        for (auto& [c, k] : ha) ca.push_back(k);
        for (auto& [c, k] : hb) cb.push_back(k);
        std::sort(ca.begin(), ca.end());
        std::sort(cb.begin(), cb.end());
        CHECK(ca == cb);
    }
}

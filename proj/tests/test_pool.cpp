#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "grepool/pool.hpp"
#include "testutil.hpp"

using namespace grepool;
using testutil::random_tensor;

namespace {

AttnParams random_attn(std::mt19937_64& rng, int d, int heads) {
    AttnParams p;
    p.heads = heads;
    p.head_dim = d / heads;
    for (int h = 0; h < heads; ++h) p.q_global.push_back(random_tensor(rng, 1, p.head_dim));
    p.w_key = random_tensor(rng, d, d);
    p.w_value = random_tensor(rng, d, d);
    return p;
}

BatchTopology topo_from(const std::vector<Graph>& graphs) { return topology_of(make_batch(graphs)); }

// Reference top-k: full sort over (score, index), slice, sort ascending.
std::vector<int> sort_and_slice(const std::vector<double>& scores, const std::vector<int>& graph_id,
                                double p, bool reverse) {
    std::vector<int> out;
    int start = 0;
    while (start < static_cast<int>(scores.size())) {
        int end = start;
        while (end < static_cast<int>(scores.size()) && graph_id[end] == graph_id[start]) ++end;
        const int n = end - start;
        int k = static_cast<int>(std::ceil(p * n - 1e-9));
        k = std::clamp(k, 1, n);
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), start);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (scores[a] != scores[b]) return reverse ? scores[a] < scores[b] : scores[a] > scores[b];
            return a < b;
        });
        order.resize(k);
        std::sort(order.begin(), order.end());
        out.insert(out.end(), order.begin(), order.end());
        start = end;
    }
    return out;
}

}  // namespace

TEST_CASE("identical embeddings get uniform attention") {
    std::mt19937_64 rng(3);
    Tensor emb(4, 4);
    Tensor row = random_tensor(rng, 1, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) emb.at(i, j) = row.at(0, j);
    auto sc = attention_scores(emb, random_attn(rng, 4, 2), {0, 0, 0, 0});
    for (int i = 0; i < 4; ++i) CHECK(sc.fused.at(0, i) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("a single-node graph scores exactly one") {
    std::mt19937_64 rng(5);
    auto sc = attention_scores(random_tensor(rng, 1, 4), random_attn(rng, 4, 1), {0});
    CHECK(sc.fused.at(0, 0) == 1.0);
}

TEST_CASE("batched scores match per-graph evaluation and sum to one per graph") {
    std::mt19937_64 rng(7);
    const int d = 6;
    AttnParams params = random_attn(rng, d, 3);
    Tensor emb = random_tensor(rng, 5, d);
    auto sc = attention_scores(emb, params, {0, 0, 0, 1, 1});

    double s0 = 0, s1 = 0;
    for (int i = 0; i < 3; ++i) s0 += sc.fused.at(0, i);
    for (int i = 3; i < 5; ++i) s1 += sc.fused.at(0, i);
    CHECK(s0 == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(s1 == doctest::Approx(1.0).epsilon(1e-10));

    // Unbatched oracle: evaluate each graph alone.
    auto sc0 = attention_scores(gather_rows(emb, {0, 1, 2}), params, {0, 0, 0});
    auto sc1 = attention_scores(gather_rows(emb, {3, 4}), params, {0, 0});
    for (int i = 0; i < 3; ++i) CHECK(sc.fused.at(0, i) == doctest::Approx(sc0.fused.at(0, i)).epsilon(1e-12));
    for (int i = 0; i < 2; ++i) CHECK(sc.fused.at(0, 3 + i) == doctest::Approx(sc1.fused.at(0, i)).epsilon(1e-12));
}

TEST_CASE("head count must divide the dimension") {
    std::mt19937_64 rng(9);
    AttnParams p = random_attn(rng, 6, 3);
    p.heads = 4;
    CHECK_THROWS_AS(attention_scores(random_tensor(rng, 3, 6), p, {0, 0, 0}), config_error);
}

TEST_CASE("select_nodes keeps ceil(p*n) nodes") {
    std::vector<double> s{0.5, 0.1, 0.2, 0.05, 0.15};
    auto idx = select_nodes(s, {0, 0, 0, 0, 0}, 0.5, SelectStrategy::attention);
    CHECK(idx.size() == 3);  // ceil(2.5)
}

TEST_CASE("select_nodes picks the two largest") {
    std::vector<double> s{0.1, 0.4, 0.2, 0.3};
    auto idx = select_nodes(s, {0, 0, 0, 0}, 0.5, SelectStrategy::attention);
    CHECK(idx == std::vector<int>{1, 3});
}

TEST_CASE("ceil does not overshoot on p*n that lands on an integer") {
    std::vector<double> s(10, 0.1);
    std::vector<int> gid(10, 0);
    CHECK(select_nodes(s, gid, 0.7, SelectStrategy::attention).size() == 7);
    CHECK(select_nodes(s, gid, 1.0, SelectStrategy::attention).size() == 10);
    CHECK(select_nodes(s, gid, 0.01, SelectStrategy::attention).size() == 1);  // k >= 1
}

TEST_CASE("ties break by ascending node index") {
    std::vector<double> s{0.3, 0.3, 0.3, 0.3};
    CHECK(select_nodes(s, {0, 0, 0, 0}, 0.5, SelectStrategy::attention) == std::vector<int>{0, 1});
    CHECK(select_nodes(s, {0, 0, 0, 0}, 0.5, SelectStrategy::reverse) == std::vector<int>{0, 1});
}

TEST_CASE("select_nodes matches the sort-and-slice oracle on random instances") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n_graphs = 1 + static_cast<int>(rng() % 4);
        std::vector<double> scores;
        std::vector<int> gid;
        for (int g = 0; g < n_graphs; ++g) {
            const int n = 1 + static_cast<int>(rng() % 64);
            for (int i = 0; i < n; ++i) {
                scores.push_back(testutil::uniform(rng, 0, 1));
                gid.push_back(g);
            }
        }
        const double p = testutil::uniform(rng, 0.01, 1.0);
        CHECK(select_nodes(scores, gid, p, SelectStrategy::attention) == sort_and_slice(scores, gid, p, false));
        CHECK(select_nodes(scores, gid, p, SelectStrategy::reverse) == sort_and_slice(scores, gid, p, true));
    }
}

TEST_CASE("random selection is a valid in-graph sample and reproducible") {
    std::mt19937_64 rng(13);
    std::vector<double> scores(12, 0.0);
    std::vector<int> gid{0, 0, 0, 0, 0, 1, 1, 1, 2, 2, 2, 2};
    std::mt19937_64 r1(42), r2(42);
    auto a = select_nodes(scores, gid, 0.5, SelectStrategy::random, &r1);
    auto b = select_nodes(scores, gid, 0.5, SelectStrategy::random, &r2);
    CHECK(a == b);
    CHECK(std::is_sorted(a.begin(), a.end()));
    CHECK(a.size() == 3 + 2 + 2);
    CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
    CHECK_THROWS_AS(select_nodes(scores, gid, 0.5, SelectStrategy::random, nullptr), config_error);
    CHECK_THROWS_AS(select_nodes(scores, gid, 1.5, SelectStrategy::attention), config_error);
    (void)rng;
}

TEST_CASE("coarsen with p=1 keeps everything and gates by score") {
    std::mt19937_64 rng(17);
    auto graphs = std::vector<Graph>{make_graph(4, {{0, 1}, {1, 2}, {2, 3}}), make_graph(3, {{0, 1}, {1, 2}})};
    BatchTopology topo = topo_from(graphs);
    Tensor emb = random_tensor(rng, topo.total_nodes, 4);
    AttnParams params = random_attn(rng, 4, 2);
    PoolOutput out = grepool_pool(topo, emb, params, 1.0, SelectStrategy::attention);

    CHECK(out.coarse_topology.adj == topo.adj);
    CHECK(out.discarded_embeddings.rows() == 0);
    for (int i = 0; i < topo.total_nodes; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(out.coarse_features.at(i, j) ==
                  doctest::Approx(emb.at(i, j) * out.scores.at(0, i)).epsilon(1e-12));
}

TEST_CASE("coarsening a path to its endpoints drops the edges") {
    BatchTopology topo = topo_from({make_graph(3, {{0, 1}, {1, 2}})});
    std::mt19937_64 rng(19);
    Tensor emb = random_tensor(rng, 3, 4);
    auto sc = attention_scores(emb, random_attn(rng, 4, 1), topo.graph_id);
    PoolOutput out = coarsen(topo, emb, sc, {0, 2});
    CHECK(out.coarse_topology.adj == std::vector<uint8_t>{0, 0, 0, 0});
}

TEST_CASE("coarse adjacency equals the index oracle") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<std::pair<int, int>> edges;
        for (int u = 0; u < 6; ++u)
            for (int v = u + 1; v < 6; ++v)
                if (rng() % 2) edges.push_back({u, v});
        BatchTopology topo = topo_from({make_graph(6, edges)});
        Tensor emb = random_tensor(rng, 6, 4);
        auto sc = attention_scores(emb, random_attn(rng, 4, 2), topo.graph_id);
        auto idx = select_nodes(sc.fused.values(), topo.graph_id, 0.6, SelectStrategy::attention);
        PoolOutput out = coarsen(topo, emb, sc, idx);
        for (size_t a = 0; a < idx.size(); ++a)
            for (size_t b = 0; b < idx.size(); ++b)
                CHECK(out.coarse_topology.adj[a * idx.size() + b] ==
                      topo.adj[static_cast<size_t>(idx[a]) * 6 + idx[b]]);
    }
}

TEST_CASE("readout with p=1 and one head is exactly scores times values") {
    std::mt19937_64 rng(29);
    const int n = 5, d = 4;
    Tensor emb = random_tensor(rng, n, d);
    AttnParams params = random_attn(rng, d, 1);
    auto sc = attention_scores(emb, params, std::vector<int>(n, 0));
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    Tensor h = global_readout(sc, all, std::vector<int>(n, 0), 1);
    Tensor oracle = matmul(sc.per_head[0], sc.per_head_values[0]);
    CHECK(testutil::max_abs_diff(h, oracle) < 1e-12);
}

TEST_CASE("readout of a single retained node is score times value") {
    std::mt19937_64 rng(31);
    const int n = 4, d = 6;
    Tensor emb = random_tensor(rng, n, d);
    AttnParams params = random_attn(rng, d, 2);
    auto sc = attention_scores(emb, params, std::vector<int>(n, 0));
    Tensor h = global_readout(sc, {2}, std::vector<int>(n, 0), 1);
    for (int hd = 0; hd < 2; ++hd) {
        for (int j = 0; j < params.head_dim; ++j) {
            const double expect = sc.per_head[hd].at(0, 2) * sc.per_head_values[hd].at(2, j);
            CHECK(h.at(0, hd * params.head_dim + j) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("readout matches the explicit summation oracle") {
    std::mt19937_64 rng(37);
    const int n = 4, d = 4, heads = 2;
    Tensor emb = random_tensor(rng, n, d);
    AttnParams params = random_attn(rng, d, heads);
    auto sc = attention_scores(emb, params, std::vector<int>(n, 0));
    std::vector<int> retained{1, 3};
    Tensor h = global_readout(sc, retained, std::vector<int>(n, 0), 1);
    for (int hd = 0; hd < heads; ++hd) {
        for (int j = 0; j < params.head_dim; ++j) {
            double expect = 0;
            for (int i : retained) expect += sc.per_head[hd].at(0, i) * sc.per_head_values[hd].at(i, j);
            CHECK(h.at(0, hd * params.head_dim + j) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("renormalized readout divides by the retained mass") {
    std::mt19937_64 rng(41);
    const int n = 5, d = 4;
    Tensor emb = random_tensor(rng, n, d);
    AttnParams params = random_attn(rng, d, 1);
    auto sc = attention_scores(emb, params, std::vector<int>(n, 0));
    std::vector<int> retained{0, 2, 4};
    Tensor raw = global_readout(sc, retained, std::vector<int>(n, 0), 1, false);
    Tensor renorm = global_readout(sc, retained, std::vector<int>(n, 0), 1, true);
    double mass = 0;
    for (int i : retained) mass += sc.per_head[0].at(0, i);
    for (int j = 0; j < d; ++j) CHECK(renorm.at(0, j) == doctest::Approx(raw.at(0, j) / mass).epsilon(1e-12));
}

TEST_CASE("retained score mass lies in (0, 1] and dominates discarded scores") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 8);
        std::vector<std::pair<int, int>> edges;
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v)
                if (rng() % 3 == 0) edges.push_back({u, v});
        BatchTopology topo = topo_from({make_graph(n, edges, 4)});
        Tensor emb = random_tensor(rng, n, 4);
        PoolOutput out = grepool_pool(topo, emb, random_attn(rng, 4, 2), 0.5, SelectStrategy::attention);

        double mass = 0, min_retained = 1e300, max_discarded = -1e300;
        std::vector<uint8_t> kept(n, 0);
        for (int i : out.retained_idx) kept[i] = 1;
        for (int i = 0; i < n; ++i) {
            if (kept[i]) {
                mass += out.scores.at(0, i);
                min_retained = std::min(min_retained, out.scores.at(0, i));
            } else {
                max_discarded = std::max(max_discarded, out.scores.at(0, i));
            }
        }
        CHECK(mass > 0.0);
        CHECK(mass <= 1.0 + 1e-12);
        if (max_discarded > -1e300) CHECK(min_retained >= max_discarded);
    }
}

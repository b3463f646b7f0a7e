#include "grepool/pool.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "grepool/gcn.hpp"

namespace grepool {

SelectStrategy parse_strategy(const std::string& name) {
    if (name == "attention") return SelectStrategy::attention;
    if (name == "random") return SelectStrategy::random;
    if (name == "reverse") return SelectStrategy::reverse;
    throw config_error("unknown selection strategy \"" + name + "\" (want attention, random or reverse)");
}

std::string to_string(SelectStrategy s) {
    switch (s) {
        case SelectStrategy::attention: return "attention";
        case SelectStrategy::random: return "random";
        case SelectStrategy::reverse: return "reverse";
    }
    return "?";
}

namespace {

// Nodes of one graph are a contiguous run of equal graph ids starting at 0.
std::vector<int> segment_offsets(const std::vector<int>& graph_id) {
    std::vector<int> offsets;
    int prev = -1;
    for (size_t i = 0; i < graph_id.size(); ++i) {
        const int g = graph_id[i];
        if (g == prev) continue;
        if (g != prev + 1) throw index_error("graph ids must be contiguous runs 0..G-1");
        offsets.push_back(static_cast<int>(i));
        prev = g;
    }
    offsets.push_back(static_cast<int>(graph_id.size()));
    return offsets;
}

// k = ceil(p * n), at least 1. The epsilon guards against FP artifacts like
// 0.7 * 10 = 7.000000000000001 rounding up.
int retained_count(double pool_ratio, int n) {
    int k = static_cast<int>(std::ceil(pool_ratio * n - 1e-9));
    return std::clamp(k, 1, n);
}

}  // namespace

BlockAdjacency normalize_topology(const BatchTopology& topo) {
    BlockAdjacency out;
    out.node_offsets = topo.node_offsets;
    out.total_nodes = topo.total_nodes;
    for (int g = 0; g < topo.n_graphs; ++g) {
        const int base = topo.node_offsets[g];
        const int n = topo.node_offsets[g + 1] - base;
        std::vector<uint8_t> block(static_cast<size_t>(n) * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                block[static_cast<size_t>(i) * n + j] = topo.adj[static_cast<size_t>(base + i) * topo.total_nodes + (base + j)];
        out.block_offsets.push_back(static_cast<int>(out.blocks.size()));
        Tensor norm = normalize_adjacency(block, n);
        out.blocks.insert(out.blocks.end(), norm.values().begin(), norm.values().end());
    }
    return out;
}

BatchTopology topology_of(const GraphBatch& batch) {
    BatchTopology topo;
    topo.total_nodes = batch.total_nodes;
    topo.n_graphs = batch.n_graphs();
    topo.graph_id = batch.graph_id;
    topo.node_offsets = batch.node_offsets;
    topo.adj.assign(static_cast<size_t>(batch.total_nodes) * batch.total_nodes, 0);
    for (int g = 0; g < batch.n_graphs(); ++g) {
        const Graph& gr = batch.graphs[g];
        const int base = batch.node_offsets[g];
        for (int i = 0; i < gr.n; ++i)
            for (int j = 0; j < gr.n; ++j)
                topo.adj[static_cast<size_t>(base + i) * batch.total_nodes + (base + j)] = gr.adj[static_cast<size_t>(i) * gr.n + j];
    }
    return topo;
}

AttentionScores attention_scores(const Tensor& embeddings, const AttnParams& params,
                                 const std::vector<int>& graph_id) {
    const int d = embeddings.cols();
    if (params.heads < 1 || d % params.heads != 0) {
        throw config_error("attention_scores: dimension " + std::to_string(d) + " is not divisible by " +
                           std::to_string(params.heads) + " heads");
    }
    if (params.head_dim != d / params.heads) {
        throw config_error("attention_scores: head_dim " + std::to_string(params.head_dim) + " != d/heads");
    }
    if (params.w_key.rows() != d || params.w_value.rows() != d) {
        throw shape_error("attention_scores: projection rows must match embedding dim " + std::to_string(d));
    }
    if (graph_id.size() != static_cast<size_t>(embeddings.rows())) {
        throw shape_error("attention_scores: one graph id per node required");
    }
    const std::vector<int> offsets = segment_offsets(graph_id);
    const int n = embeddings.rows();
    const int dh = params.head_dim;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor keys = matmul(embeddings, params.w_key);
    Tensor values = matmul(embeddings, params.w_value);

    AttentionScores out;
    Tensor fused_sum;
    for (int h = 0; h < params.heads; ++h) {
        Tensor k_h = slice_cols(keys, h * dh, (h + 1) * dh);
        Tensor v_h = slice_cols(values, h * dh, (h + 1) * dh);
        Tensor logits = scale(matmul(params.q_global.at(h), transpose(k_h)), inv_sqrt);

        Tensor a_h;
        for (size_t g = 0; g + 1 < offsets.size(); ++g) {
            std::vector<uint8_t> mask(n, 0);
            std::fill(mask.begin() + offsets[g], mask.begin() + offsets[g + 1], 1);
            Tensor part = softmax_masked(logits, mask);
            a_h = a_h.defined() ? add(a_h, part) : part;
        }
        out.per_head.push_back(a_h);
        out.per_head_values.push_back(v_h);
        fused_sum = fused_sum.defined() ? add(fused_sum, a_h) : a_h;
    }
    out.fused = params.heads == 1 ? fused_sum : scale(fused_sum, 1.0 / params.heads);
    return out;
}

std::vector<int> select_nodes(const std::vector<double>& scores, const std::vector<int>& graph_id,
                              double pool_ratio, SelectStrategy strategy, std::mt19937_64* rng) {
    if (!(pool_ratio > 0.0 && pool_ratio <= 1.0)) {
        throw config_error("select_nodes: pool ratio must be in (0, 1], got " + std::to_string(pool_ratio));
    }
    if (scores.size() != graph_id.size()) throw shape_error("select_nodes: scores and graph ids disagree");
    if (strategy == SelectStrategy::random && rng == nullptr) {
        throw config_error("select_nodes: random strategy needs a seeded generator");
    }
    const std::vector<int> offsets = segment_offsets(graph_id);

    std::vector<int> retained;
    for (size_t g = 0; g + 1 < offsets.size(); ++g) {
        const int base = offsets[g];
        const int n_g = offsets[g + 1] - base;
        const int k = retained_count(pool_ratio, n_g);
        std::vector<int> order(n_g);
        std::iota(order.begin(), order.end(), base);
        switch (strategy) {
            case SelectStrategy::attention:
                std::stable_sort(order.begin(), order.end(),
                                 [&](int a, int b) { return scores[a] > scores[b]; });
                break;
            case SelectStrategy::reverse:
                std::stable_sort(order.begin(), order.end(),
                                 [&](int a, int b) { return scores[a] < scores[b]; });
                break;
            case SelectStrategy::random:
                for (int i = n_g - 1; i > 0; --i) {
                    std::swap(order[i], order[(*rng)() % static_cast<uint64_t>(i + 1)]);
                }
                break;
        }
        retained.insert(retained.end(), order.begin(), order.begin() + k);
    }
    std::sort(retained.begin(), retained.end());
    return retained;
}

Tensor global_readout(const AttentionScores& scores, const std::vector<int>& retained_idx,
                      const std::vector<int>& graph_id, int n_graphs, bool renormalize) {
    std::vector<int> retained_graphs;
    retained_graphs.reserve(retained_idx.size());
    for (int i : retained_idx) retained_graphs.push_back(graph_id.at(i));

    std::vector<Tensor> head_outputs;
    for (size_t h = 0; h < scores.per_head.size(); ++h) {
        Tensor a_col = gather_rows(transpose(scores.per_head[h]), retained_idx);   // k x 1
        Tensor v_rows = gather_rows(scores.per_head_values[h], retained_idx);      // k x dh
        Tensor summed = segment_sum_rows(scale_rows(v_rows, a_col), retained_graphs, n_graphs);
        if (renormalize) {
            Tensor mass = segment_sum_rows(a_col, retained_graphs, n_graphs);  // B x 1
            summed = scale_rows(summed, recip(mass));
        }
        head_outputs.push_back(summed);
    }
    return head_outputs.size() == 1 ? head_outputs[0] : concat_cols(head_outputs);
}

PoolOutput drop_pool(const BatchTopology& topo, const Tensor& embeddings, const Tensor& score_col,
                     const std::vector<int>& retained_idx) {
    PoolOutput out;
    out.retained_idx = retained_idx;
    out.scores = transpose(score_col);

    std::vector<uint8_t> keep(topo.total_nodes, 0);
    for (int i : retained_idx) keep.at(i) = 1;
    std::vector<int> discarded;
    for (int i = 0; i < topo.total_nodes; ++i)
        if (!keep[i]) discarded.push_back(i);

    out.coarse_features =
        scale_rows(gather_rows(embeddings, retained_idx), gather_rows(score_col, retained_idx));

    const int k = static_cast<int>(retained_idx.size());
    BatchTopology& coarse = out.coarse_topology;
    coarse.total_nodes = k;
    coarse.n_graphs = topo.n_graphs;
    coarse.adj.assign(static_cast<size_t>(k) * k, 0);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
            coarse.adj[static_cast<size_t>(a) * k + b] = topo.adj[static_cast<size_t>(retained_idx[a]) * topo.total_nodes + retained_idx[b]];
    coarse.graph_id.reserve(k);
    for (int i : retained_idx) coarse.graph_id.push_back(topo.graph_id[i]);
    coarse.node_offsets.assign(topo.n_graphs + 1, 0);
    for (int g : coarse.graph_id) ++coarse.node_offsets[g + 1];
    for (int g = 0; g < topo.n_graphs; ++g) coarse.node_offsets[g + 1] += coarse.node_offsets[g];

    if (!discarded.empty()) {
        out.discarded_embeddings = gather_rows(embeddings, discarded);
        for (int i : discarded) out.discarded_graph_id.push_back(topo.graph_id[i]);
    } else {
        out.discarded_embeddings = Tensor(0, embeddings.cols());
    }
    return out;
}

PoolOutput coarsen(const BatchTopology& topo, const Tensor& embeddings, const AttentionScores& scores,
                   const std::vector<int>& retained_idx, bool renormalize_readout) {
    PoolOutput out = drop_pool(topo, embeddings, transpose(scores.fused), retained_idx);
    out.scores = scores.fused;  // keep the 1 x n orientation of the fused scores
    out.h_global = global_readout(scores, retained_idx, topo.graph_id, topo.n_graphs, renormalize_readout);
    return out;
}

PoolOutput grepool_pool(const BatchTopology& topo, const Tensor& embeddings, const AttnParams& params,
                        double pool_ratio, SelectStrategy strategy, std::mt19937_64* rng,
                        bool renormalize_readout) {
    AttentionScores sc = attention_scores(embeddings, params, topo.graph_id);
    std::vector<int> retained = select_nodes(sc.fused.values(), topo.graph_id, pool_ratio, strategy, rng);
    return coarsen(topo, embeddings, sc, retained, renormalize_readout);
}

double bench_pooling_scores_us(int n, int hidden_dim, int heads, int reps, uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uniform = [&rng](double lo, double hi) {
        return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
    };

    Graph g;
    g.n = n;
    g.adj.assign(static_cast<size_t>(n) * n, 0);
    g.feat_dim = hidden_dim;
    g.features.resize(static_cast<size_t>(n) * hidden_dim);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (uniform(0, 1) < 0.3) g.set_edge(i, j);
    for (auto& v : g.features) v = uniform(-1, 1);

    GraphBatch batch = make_batch({g});
    BlockAdjacency adj = normalize_batch_adjacency(batch);
    Tensor features = batch.feature_matrix();
    const std::vector<int> graph_id(n, 0);

    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    GcnParams gcn{Tensor(hidden_dim, hidden_dim), Tensor(1, hidden_dim)};
    AttnParams attn;
    attn.heads = heads;
    attn.head_dim = hidden_dim / heads;
    attn.w_key = Tensor(hidden_dim, hidden_dim);
    attn.w_value = Tensor(hidden_dim, hidden_dim);
    for (auto* t : {&gcn.weight, &attn.w_key, &attn.w_value})
        for (auto& v : t->values()) v = uniform(-bound, bound);
    for (int h = 0; h < heads; ++h) {
        Tensor q(1, attn.head_dim);
        for (auto& v : q.values()) v = uniform(-bound, bound);
        attn.q_global.push_back(q.set_requires_grad(true));
    }
    gcn.weight.set_requires_grad(true);
    gcn.bias.set_requires_grad(true);
    attn.w_key.set_requires_grad(true);
    attn.w_value.set_requires_grad(true);

    std::vector<double> times;
    times.reserve(reps);
    double sink = 0.0;
    for (int r = 0; r < reps + 2; ++r) {  // two warmup rounds
        const auto t0 = std::chrono::steady_clock::now();
        Tensor emb = gcn_forward(features, adj, gcn);
        AttentionScores sc = attention_scores(emb, attn, graph_id);
        const auto t1 = std::chrono::steady_clock::now();
        sink += sc.fused.values()[0];
        if (r >= 2) times.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    }
    (void)sink;
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

}  // namespace grepool

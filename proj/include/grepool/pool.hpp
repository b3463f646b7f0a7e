#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "grepool/gcn.hpp"
#include "grepool/graph.hpp"
#include "grepool/tensor.hpp"

namespace grepool {

// Attention of every node against a learnable per-layer global query; the
// fused score is the mean over heads. One distinct q_global per pooling
// layer.
struct AttnParams {
    std::vector<Tensor> q_global;  // heads tensors, each 1 x head_dim
    Tensor w_key;                  // d x d, columns split across heads
    Tensor w_value;                // d x d
    int heads = 1;
    int head_dim = 0;
};

enum class SelectStrategy { attention, random, reverse };

SelectStrategy parse_strategy(const std::string& name);
std::string to_string(SelectStrategy s);

struct AttentionScores {
    Tensor fused;                         // 1 x n; sums to 1 within each graph
    std::vector<Tensor> per_head;         // each 1 x n
    std::vector<Tensor> per_head_values;  // each n x head_dim
};

// Per head h: a_h = softmax(q_h . K_h^T / sqrt(head_dim)) masked per graph
// (a node never attends across graphs). graph_id must be the batch tagging:
// non-decreasing ids 0..G-1.
AttentionScores attention_scores(const Tensor& embeddings, const AttnParams& params,
                                 const std::vector<int>& graph_id);

// Per graph, exactly max(1, ceil(p * n_g)) indices. attention = highest
// scores, reverse = lowest, random = uniform without replacement. Ties break
// by ascending node index; output is sorted ascending (global node ids).
std::vector<int> select_nodes(const std::vector<double>& scores, const std::vector<int>& graph_id,
                              double pool_ratio, SelectStrategy strategy, std::mt19937_64* rng = nullptr);

// Graph structure of a batch without features; what pooling coarsens.
struct BatchTopology {
    std::vector<uint8_t> adj;  // total x total, block-diagonal
    std::vector<int> graph_id;
    std::vector<int> node_offsets;  // size n_graphs+1
    int total_nodes = 0;
    int n_graphs = 0;

    bool edge(int u, int v) const { return adj[static_cast<size_t>(u) * total_nodes + v] != 0; }
};

BatchTopology topology_of(const GraphBatch& batch);

// Normalized per-graph adjacency blocks of an arbitrary (possibly coarsened)
// topology.
BlockAdjacency normalize_topology(const BatchTopology& topo);

struct PoolOutput {
    std::vector<int> retained_idx;   // sorted, global node ids of the input
    Tensor coarse_features;          // k_total x d, rows gated by their score
    BatchTopology coarse_topology;   // induced adjacency, graph ids recomputed
    Tensor h_global;                 // n_graphs x d
    Tensor scores;                   // fused 1 x n over the input nodes
    Tensor discarded_embeddings;     // (n-k) x d, ungated
    std::vector<int> discarded_graph_id;
};

// Weighted combination of the retained nodes' values with their attention
// scores, heads concatenated; no renormalization over the retained set
// unless asked for.
Tensor global_readout(const AttentionScores& scores, const std::vector<int>& retained_idx,
                      const std::vector<int>& graph_id, int n_graphs, bool renormalize = false);

// Shared node-drop mechanics for any per-node score column: retained rows
// gathered and gated by their score, induced adjacency, ungated discarded
// rows. h_global is left for the caller to fill.
PoolOutput drop_pool(const BatchTopology& topo, const Tensor& embeddings, const Tensor& score_col,
                     const std::vector<int>& retained_idx);

PoolOutput coarsen(const BatchTopology& topo, const Tensor& embeddings, const AttentionScores& scores,
                   const std::vector<int>& retained_idx, bool renormalize_readout = false);

// attention_scores + select_nodes + coarsen in one step.
PoolOutput grepool_pool(const BatchTopology& topo, const Tensor& embeddings, const AttnParams& params,
                        double pool_ratio, SelectStrategy strategy, std::mt19937_64* rng = nullptr,
                        bool renormalize_readout = false);

// Wall time of the pooling-score stage (normalized neighborhood aggregation
// feeding attention scoring) on a seeded random graph of n nodes. Median
// over reps, in microseconds. Used by the bench command and the complexity
// check.
double bench_pooling_scores_us(int n, int hidden_dim, int heads, int reps, uint64_t seed);

}  // namespace grepool

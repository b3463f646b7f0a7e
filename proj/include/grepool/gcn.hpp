#pragma once

#include <cstdint>
#include <vector>

#include "grepool/graph.hpp"
#include "grepool/tensor.hpp"

namespace grepool {

struct GcnParams {
    Tensor weight;  // d_in x d_out
    Tensor bias;    // 1 x d_out
};

// A_hat = D^{-1/2} (A + I) D^{-1/2}; an isolated node's row reduces to a
// self-loop of weight 1.
Tensor normalize_adjacency(const std::vector<uint8_t>& adj, int n);

// Per-graph normalized adjacency blocks of a batch. Semantically identical to
// the dense block-diagonal A_hat; stored blockwise so the aggregation step
// costs sum(n_g^2 * d) instead of (sum n_g)^2 * d.
struct BlockAdjacency {
    std::vector<double> blocks;  // concatenated n_g x n_g matrices
    std::vector<int> block_offsets;
    std::vector<int> node_offsets;  // size n_graphs+1
    int total_nodes = 0;

    Tensor to_dense() const;
};

BlockAdjacency normalize_batch_adjacency(const GraphBatch& batch);

// Aggregation over an explicit dense topology: out[n x n] given by topo, not
// learnable. Used by the block path and tests.
Tensor aggregate(const BlockAdjacency& adj, const Tensor& features);

// H' = relu(A_hat * H * W + bias).
Tensor gcn_forward(const Tensor& features, const Tensor& norm_adj, const GcnParams& params);
Tensor gcn_forward(const Tensor& features, const BlockAdjacency& norm_adj, const GcnParams& params);

}  // namespace grepool

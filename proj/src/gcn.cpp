#include "grepool/gcn.hpp"

#include <cmath>
#include <memory>

namespace grepool {

Tensor normalize_adjacency(const std::vector<uint8_t>& adj, int n) {
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (adj[static_cast<size_t>(i) * n + j] != adj[static_cast<size_t>(j) * n + i]) {
                throw shape_error("normalize_adjacency: adjacency is not symmetric at (" + std::to_string(i) +
                                  ", " + std::to_string(j) + ")");
            }
        }
    }
    std::vector<double> inv_sqrt_deg(n);
    for (int i = 0; i < n; ++i) {
        int d = 1;  // self-loop
        for (int j = 0; j < n; ++j) d += adj[static_cast<size_t>(i) * n + j];
        inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(d));
    }
    Tensor out(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double a = (i == j) ? 1.0 : static_cast<double>(adj[static_cast<size_t>(i) * n + j]);
            if (a != 0.0) out.at(i, j) = inv_sqrt_deg[i] * a * inv_sqrt_deg[j];
        }
    }
    return out;
}

BlockAdjacency normalize_batch_adjacency(const GraphBatch& batch) {
    BlockAdjacency out;
    out.node_offsets = batch.node_offsets;
    out.total_nodes = batch.total_nodes;
    for (const auto& g : batch.graphs) {
        out.block_offsets.push_back(static_cast<int>(out.blocks.size()));
        Tensor norm = normalize_adjacency(g.adj, g.n);
        out.blocks.insert(out.blocks.end(), norm.values().begin(), norm.values().end());
    }
    return out;
}

Tensor BlockAdjacency::to_dense() const {
    Tensor out(total_nodes, total_nodes);
    for (size_t g = 0; g + 1 < node_offsets.size(); ++g) {
        const int base = node_offsets[g];
        const int n = node_offsets[g + 1] - base;
        const double* block = blocks.data() + block_offsets[g];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) out.at(base + i, base + j) = block[static_cast<size_t>(i) * n + j];
    }
    return out;
}

Tensor aggregate(const BlockAdjacency& adj, const Tensor& features) {
    if (features.rows() != adj.total_nodes) {
        throw shape_error("aggregate: features have " + std::to_string(features.rows()) + " rows for " +
                          std::to_string(adj.total_nodes) + " nodes");
    }
    const int d = features.cols();
    auto out_node = std::make_shared<TensorNode>();
    out_node->rows = adj.total_nodes;
    out_node->cols = d;
    out_node->values.assign(static_cast<size_t>(adj.total_nodes) * d, 0.0);
    out_node->inputs = {features.node()};
    out_node->requires_grad = features.requires_grad();
    out_node->op = "aggregate";

    // Shared so the backward closure does not copy the blocks.
    auto blocks = std::make_shared<std::vector<double>>(adj.blocks);
    auto block_offsets = adj.block_offsets;
    auto node_offsets = adj.node_offsets;

    auto apply = [](const std::vector<double>& blocks, const std::vector<int>& block_offsets,
                    const std::vector<int>& node_offsets, const double* in, double* out, int d) {
        for (size_t g = 0; g + 1 < node_offsets.size(); ++g) {
            const int base = node_offsets[g];
            const int n = node_offsets[g + 1] - base;
            const double* block = blocks.data() + block_offsets[g];
            for (int i = 0; i < n; ++i) {
                double* oi = out + static_cast<size_t>(base + i) * d;
                for (int k = 0; k < n; ++k) {
                    const double a = block[static_cast<size_t>(i) * n + k];
                    if (a == 0.0) continue;
                    const double* hk = in + static_cast<size_t>(base + k) * d;
                    for (int j = 0; j < d; ++j) oi[j] += a * hk[j];
                }
            }
        }
    };
    apply(*blocks, block_offsets, node_offsets, features.values().data(), out_node->values.data(), d);

    // Each block is symmetric, so the backward product uses the same blocks.
    out_node->backward_fn = [blocks, block_offsets, node_offsets, apply](TensorNode& o) {
        TensorNode& in = *o.inputs[0];
        if (!in.requires_grad) return;
        apply(*blocks, block_offsets, node_offsets, o.grad.data(), in.grad_data(), o.cols);
    };
    return Tensor(out_node);
}

Tensor gcn_forward(const Tensor& features, const Tensor& norm_adj, const GcnParams& params) {
    if (features.cols() != params.weight.rows()) {
        throw shape_error("gcn_forward: feature dim " + std::to_string(features.cols()) +
                          " != weight rows " + std::to_string(params.weight.rows()));
    }
    Tensor mixed = matmul(matmul(norm_adj, features), params.weight);
    return relu(add_row_vector(mixed, params.bias));
}

Tensor gcn_forward(const Tensor& features, const BlockAdjacency& norm_adj, const GcnParams& params) {
    if (features.cols() != params.weight.rows()) {
        throw shape_error("gcn_forward: feature dim " + std::to_string(features.cols()) +
                          " != weight rows " + std::to_string(params.weight.rows()));
    }
    Tensor mixed = matmul(aggregate(norm_adj, features), params.weight);
    return relu(add_row_vector(mixed, params.bias));
}

}  // namespace grepool

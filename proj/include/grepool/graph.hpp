#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grepool/tensor.hpp"

namespace grepool {

// Undirected graph with dense 0/1 adjacency (symmetric, zero diagonal) and a
// row of features per node.
struct Graph {
    int n = 0;
    std::vector<uint8_t> adj;      // n*n
    std::vector<double> features;  // n*feat_dim, row-major
    int feat_dim = 0;
    int label = 0;

    bool edge(int u, int v) const { return adj[static_cast<size_t>(u) * n + v] != 0; }
    void set_edge(int u, int v) {
        adj[static_cast<size_t>(u) * n + v] = 1;
        adj[static_cast<size_t>(v) * n + u] = 1;
    }
    int degree(int u) const;

    bool operator==(const Graph&) const = default;
};

Graph make_graph(int n, const std::vector<std::pair<int, int>>& edges, int feat_dim = 1, int label = 0);

// Block-diagonal union of graphs. No adjacency entry ever crosses graphs;
// node i of graph g lives at row node_offsets[g] + i.
struct GraphBatch {
    std::vector<Graph> graphs;
    std::vector<int> node_offsets;  // size graphs+1, last entry = total nodes
    std::vector<int> graph_id;      // per node
    int total_nodes = 0;
    int feat_dim = 0;

    int n_graphs() const { return static_cast<int>(graphs.size()); }
    std::vector<int> labels() const;
    Tensor feature_matrix() const;  // total_nodes x feat_dim leaf
    bool edge(int u, int v) const;  // batch-level node ids
};

GraphBatch make_batch(const std::vector<Graph>& graphs);
GraphBatch make_batch(const std::vector<Graph>& dataset, const std::vector<int>& indices);

struct DatasetSplit {
    std::vector<int> train;
    std::vector<int> valid;
    std::vector<int> test;
    uint64_t seed = 0;
};

// Disjoint covering split, stratified by label, deterministic per seed.
DatasetSplit make_splits(const std::vector<int>& labels, double train_ratio, double valid_ratio,
                         double test_ratio, uint64_t seed);

// TU plain-text ingestion. Expects <name>_A.txt (1-indexed "i, j" edge
// lines), <name>_graph_indicator.txt and <name>_graph_labels.txt, plus an
// optional <name>_node_labels.txt whose labels become one-hot features.
// Graph labels are remapped to contiguous [0, C). Graphs without node labels
// get a single constant feature.
std::vector<Graph> parse_tu_dataset(const std::string& dir, const std::string& name);

bool tu_dataset_has_node_labels(const std::string& dir, const std::string& name);

// Inverse of parse_tu_dataset for graphs whose features are exact one-hot
// rows (as produced by the parser).
void write_tu_dataset(const std::string& dir, const std::string& name, const std::vector<Graph>& graphs);

// Replaces features with a one-hot of min(degree, max_degree); feature
// dimension becomes max_degree + 1.
Graph degree_features(const Graph& g, int max_degree);

}  // namespace grepool

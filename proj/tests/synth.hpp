#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "grepool/graph.hpp"

// Deterministic synthetic graph-classification datasets used by the training
// tests and, when no real TU data is available, by the acceptance suite.
namespace synth {

inline int pick(std::mt19937_64& rng, int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng() % static_cast<uint64_t>(hi - lo + 1));
}

// Label 1 iff the graph contains a triangle. Positive graphs are a triangle
// with a path tail, negatives are plain paths; features are degree one-hots
// (cap 3), so the classes are linearly separable from the motif.
inline std::vector<grepool::Graph> triangle_dataset(int n_graphs, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<grepool::Graph> out;
    for (int i = 0; i < n_graphs; ++i) {
        const int label = i % 2;
        const int n = pick(rng, 4, 8);
        std::vector<std::pair<int, int>> edges;
        if (label == 1) {
            edges = {{0, 1}, {1, 2}, {2, 0}};
            for (int v = 3; v < n; ++v) edges.push_back({v - 1, v});
        } else {
            for (int v = 1; v < n; ++v) edges.push_back({v - 1, v});
        }
        grepool::Graph g = grepool::make_graph(n, edges, 1, label);
        out.push_back(grepool::degree_features(g, 3));
    }
    return out;
}

struct MotifSpec {
    int n_graphs = 188;
    int node_types = 7;
    int min_nodes = 10;
    int max_nodes = 26;
    int motif_type_a = 5;  // informative pair: label 1 iff a-b edge exists
    int motif_type_b = 6;
    double positive_fraction = 0.55;
    double extra_edge_prob = 0.15;  // sparse extra wiring among filler nodes
    double label_noise = 0.0;
    uint64_t seed = 1;
};

// Filler-plus-motif construction: every graph carries one node of each motif
// type; only the positive class wires them to each other. Filler nodes and
// their wiring look alike across classes, so the informative signal lives in
// a small minority of the nodes.
inline std::vector<grepool::Graph> motif_dataset(const MotifSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    std::vector<grepool::Graph> out;
    std::vector<int> filler_types;
    for (int t = 0; t < spec.node_types; ++t) {
        if (t != spec.motif_type_a && t != spec.motif_type_b) filler_types.push_back(t);
    }

    for (int i = 0; i < spec.n_graphs; ++i) {
        const bool positive = (rng() >> 11) * 0x1.0p-53 < spec.positive_fraction;
        const int n = pick(rng, spec.min_nodes, spec.max_nodes);
        const int a = n - 2, b = n - 1;  // motif pair sits at the end

        std::vector<int> type(n);
        for (int v = 0; v < n - 2; ++v) type[v] = filler_types[rng() % filler_types.size()];
        type[a] = spec.motif_type_a;
        type[b] = spec.motif_type_b;

        // Random tree over the filler nodes, then sparse extra edges.
        std::vector<std::pair<int, int>> edges;
        for (int v = 1; v < n - 2; ++v) edges.push_back({pick(rng, 0, v - 1), v});
        for (int u = 0; u < n - 2; ++u) {
            for (int v = u + 2; v < n - 2; ++v) {
                if ((rng() >> 11) * 0x1.0p-53 < spec.extra_edge_prob / n) edges.push_back({u, v});
            }
        }
        // Motif nodes hang off the filler; only positives wire a to b.
        const int anchor_a = pick(rng, 0, n - 3);
        int anchor_b = pick(rng, 0, n - 3);
        edges.push_back({anchor_a, a});
        if (positive) {
            edges.push_back({a, b});
        } else {
            while (anchor_b == anchor_a) anchor_b = pick(rng, 0, n - 3);
        }
        edges.push_back({anchor_b, b});

        int label = positive ? 1 : 0;
        if (spec.label_noise > 0 && (rng() >> 11) * 0x1.0p-53 < spec.label_noise) label = 1 - label;

        grepool::Graph g = grepool::make_graph(n, edges, spec.node_types, label);
        std::fill(g.features.begin(), g.features.end(), 0.0);
        for (int v = 0; v < n; ++v) g.features[static_cast<size_t>(v) * spec.node_types + type[v]] = 1.0;
        out.push_back(std::move(g));
    }
    return out;
}

// Stand-ins with the scale of the two small biochemical benchmarks.
inline std::vector<grepool::Graph> mutag_like() {
    MotifSpec spec;
    spec.n_graphs = 188;
    spec.node_types = 7;
    spec.min_nodes = 10;
    spec.max_nodes = 26;
    spec.seed = 20240801;
    return motif_dataset(spec);
}

inline std::vector<grepool::Graph> ptc_like() {
    MotifSpec spec;
    spec.n_graphs = 344;
    spec.node_types = 19;
    spec.min_nodes = 8;
    spec.max_nodes = 20;
    spec.label_noise = 0.05;
    spec.seed = 20240802;
    return motif_dataset(spec);
}

}  // namespace synth

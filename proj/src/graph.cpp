#include "grepool/graph.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace grepool {

int Graph::degree(int u) const {
    int d = 0;
    for (int v = 0; v < n; ++v) d += adj[static_cast<size_t>(u) * n + v];
    return d;
}

Graph make_graph(int n, const std::vector<std::pair<int, int>>& edges, int feat_dim, int label) {
    Graph g;
    g.n = n;
    g.adj.assign(static_cast<size_t>(n) * n, 0);
    g.features.assign(static_cast<size_t>(n) * feat_dim, 1.0);
    g.feat_dim = feat_dim;
    g.label = label;
    for (auto [u, v] : edges) {
        if (u < 0 || u >= n || v < 0 || v >= n) {
            throw index_error("make_graph: edge (" + std::to_string(u) + ", " + std::to_string(v) +
                              ") out of range for n=" + std::to_string(n));
        }
        if (u != v) g.set_edge(u, v);
    }
    return g;
}

std::vector<int> GraphBatch::labels() const {
    std::vector<int> out;
    out.reserve(graphs.size());
    for (const auto& g : graphs) out.push_back(g.label);
    return out;
}

Tensor GraphBatch::feature_matrix() const {
    Tensor t(total_nodes, feat_dim);
    size_t off = 0;
    for (const auto& g : graphs) {
        std::copy(g.features.begin(), g.features.end(), t.values().begin() + off);
        off += g.features.size();
    }
    return t;
}

bool GraphBatch::edge(int u, int v) const {
    if (graph_id[u] != graph_id[v]) return false;
    const Graph& g = graphs[graph_id[u]];
    const int base = node_offsets[graph_id[u]];
    return g.edge(u - base, v - base);
}

GraphBatch make_batch(const std::vector<Graph>& graphs) {
    if (graphs.empty()) throw config_error("make_batch: empty graph list");
    GraphBatch b;
    b.graphs = graphs;
    b.feat_dim = graphs[0].feat_dim;
    b.node_offsets.push_back(0);
    for (size_t g = 0; g < graphs.size(); ++g) {
        if (graphs[g].feat_dim != b.feat_dim) {
            throw shape_error("make_batch: feature dimensions differ across graphs");
        }
        for (int i = 0; i < graphs[g].n; ++i) b.graph_id.push_back(static_cast<int>(g));
        b.node_offsets.push_back(b.node_offsets.back() + graphs[g].n);
    }
    b.total_nodes = b.node_offsets.back();
    return b;
}

GraphBatch make_batch(const std::vector<Graph>& dataset, const std::vector<int>& indices) {
    std::vector<Graph> picked;
    picked.reserve(indices.size());
    for (int i : indices) picked.push_back(dataset.at(i));
    return make_batch(picked);
}

DatasetSplit make_splits(const std::vector<int>& labels, double train_ratio, double valid_ratio,
                         double test_ratio, uint64_t seed) {
    if (std::abs(train_ratio + valid_ratio + test_ratio - 1.0) > 1e-9) {
        throw config_error("make_splits: ratios must sum to 1");
    }
    std::map<int, std::vector<int>> by_class;
    for (size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));

    DatasetSplit split;
    split.seed = seed;
    std::mt19937_64 rng(seed);
    for (auto& [label, idx] : by_class) {
        for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
        const int n = static_cast<int>(idx.size());
        const int n_train = static_cast<int>(std::lround(train_ratio * n));
        const int n_valid = static_cast<int>(std::lround(valid_ratio * n));
        for (int i = 0; i < n; ++i) {
            if (i < n_train) split.train.push_back(idx[i]);
            else if (i < n_train + n_valid) split.valid.push_back(idx[i]);
            else split.test.push_back(idx[i]);
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.valid.begin(), split.valid.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

namespace {

std::string tu_path(const std::string& dir, const std::string& name, const std::string& suffix) {
    return (std::filesystem::path(dir) / (name + suffix)).string();
}

std::ifstream open_required(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    return in;
}

// Reads one integer per line (TU files may carry trailing fields separated
// by commas; only the first is used).
std::vector<long> read_int_column(const std::string& path) {
    auto in = open_required(path);
    std::vector<long> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        long v;
        if (!(ss >> v)) throw format_error(path, line_no, "expected an integer");
        out.push_back(v);
    }
    return out;
}

}  // namespace

bool tu_dataset_has_node_labels(const std::string& dir, const std::string& name) {
    return std::filesystem::exists(tu_path(dir, name, "_node_labels.txt"));
}

std::vector<Graph> parse_tu_dataset(const std::string& dir, const std::string& name) {
    const std::string a_path = tu_path(dir, name, "_A.txt");
    const std::string ind_path = tu_path(dir, name, "_graph_indicator.txt");
    const std::string glab_path = tu_path(dir, name, "_graph_labels.txt");

    const std::vector<long> indicator = read_int_column(ind_path);
    const std::vector<long> graph_labels_raw = read_int_column(glab_path);
    const long n_nodes = static_cast<long>(indicator.size());
    const long n_graphs = static_cast<long>(graph_labels_raw.size());
    if (n_nodes == 0) throw io_error(ind_path + ": dataset has no nodes");
    if (n_graphs == 0) throw io_error(glab_path + ": dataset has no graphs");

    // Indicator values are 1-indexed graph ids; nodes of one graph are
    // contiguous in TU files.
    std::vector<int> graph_of_node(n_nodes);
    std::vector<int> graph_size(n_graphs, 0);
    for (long i = 0; i < n_nodes; ++i) {
        const long g = indicator[i];
        if (g < 1 || g > n_graphs) {
            throw format_error(ind_path, i + 1, "graph id " + std::to_string(g) + " out of range [1, " +
                                                    std::to_string(n_graphs) + "]");
        }
        graph_of_node[i] = static_cast<int>(g - 1);
        ++graph_size[g - 1];
    }
    std::vector<long> node_base(n_graphs, 0);
    for (long g = 1; g < n_graphs; ++g) node_base[g] = node_base[g - 1] + graph_size[g - 1];
    std::vector<long> local_of_node(n_nodes);
    for (long i = 0; i < n_nodes; ++i) {
        const int g = graph_of_node[i];
        local_of_node[i] = i - node_base[g];
        if (local_of_node[i] < 0 || local_of_node[i] >= graph_size[g]) {
            throw format_error(ind_path, i + 1, "graph indicator is not contiguous");
        }
    }

    // Graph labels remapped onto [0, C) in ascending value order.
    std::map<long, int> label_map;
    for (long v : graph_labels_raw) label_map.emplace(v, 0);
    int next = 0;
    for (auto& [v, idx] : label_map) idx = next++;

    // Node labels (optional) become one-hot features.
    std::vector<int> node_label;
    int n_node_labels = 0;
    if (tu_dataset_has_node_labels(dir, name)) {
        const std::string nlab_path = tu_path(dir, name, "_node_labels.txt");
        const std::vector<long> raw = read_int_column(nlab_path);
        if (static_cast<long>(raw.size()) != n_nodes) {
            throw io_error(nlab_path + ": " + std::to_string(raw.size()) + " labels for " +
                           std::to_string(n_nodes) + " nodes");
        }
        std::map<long, int> nl_map;
        for (long v : raw) nl_map.emplace(v, 0);
        for (auto& [v, idx] : nl_map) idx = n_node_labels++;
        node_label.reserve(raw.size());
        for (long v : raw) node_label.push_back(nl_map[v]);
    }
    const int feat_dim = n_node_labels > 0 ? n_node_labels : 1;

    std::vector<Graph> graphs(n_graphs);
    for (long g = 0; g < n_graphs; ++g) {
        Graph& gr = graphs[g];
        gr.n = graph_size[g];
        gr.adj.assign(static_cast<size_t>(gr.n) * gr.n, 0);
        gr.feat_dim = feat_dim;
        gr.features.assign(static_cast<size_t>(gr.n) * feat_dim, n_node_labels > 0 ? 0.0 : 1.0);
        gr.label = label_map[graph_labels_raw[g]];
        if (n_node_labels > 0) {
            for (int i = 0; i < gr.n; ++i) {
                gr.features[static_cast<size_t>(i) * feat_dim + node_label[node_base[g] + i]] = 1.0;
            }
        }
    }

    // Edges: 1-indexed global node pairs, symmetrized, self-loops dropped.
    auto in = open_required(a_path);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        long u, v;
        if (!(ss >> u >> v)) throw format_error(a_path, line_no, "expected an edge \"i, j\"");
        if (u < 1 || u > n_nodes || v < 1 || v > n_nodes) {
            throw format_error(a_path, line_no, "node index out of range [1, " + std::to_string(n_nodes) + "]");
        }
        if (graph_of_node[u - 1] != graph_of_node[v - 1]) {
            throw format_error(a_path, line_no, "edge crosses graphs " +
                                                    std::to_string(graph_of_node[u - 1] + 1) + " and " +
                                                    std::to_string(graph_of_node[v - 1] + 1));
        }
        if (u == v) continue;
        Graph& gr = graphs[graph_of_node[u - 1]];
        gr.set_edge(static_cast<int>(local_of_node[u - 1]), static_cast<int>(local_of_node[v - 1]));
    }
    return graphs;
}

void write_tu_dataset(const std::string& dir, const std::string& name, const std::vector<Graph>& graphs) {
    if (graphs.empty()) throw config_error("write_tu_dataset: empty graph list");
    std::filesystem::create_directories(dir);
    std::ofstream a(tu_path(dir, name, "_A.txt"));
    std::ofstream ind(tu_path(dir, name, "_graph_indicator.txt"));
    std::ofstream glab(tu_path(dir, name, "_graph_labels.txt"));
    std::ofstream nlab(tu_path(dir, name, "_node_labels.txt"));
    if (!a || !ind || !glab || !nlab) throw io_error("cannot write TU files under " + dir);

    long base = 0;
    for (size_t g = 0; g < graphs.size(); ++g) {
        const Graph& gr = graphs[g];
        glab << gr.label << "\n";
        for (int i = 0; i < gr.n; ++i) {
            ind << (g + 1) << "\n";
            int hot = -1, ones = 0, nonzero = 0;
            for (int j = 0; j < gr.feat_dim; ++j) {
                const double v = gr.features[static_cast<size_t>(i) * gr.feat_dim + j];
                if (v != 0.0) ++nonzero;
                if (v == 1.0) {
                    ++ones;
                    hot = j;
                }
            }
            if (ones != 1 || nonzero != 1) {
                throw io_error("write_tu_dataset: features of graph " + std::to_string(g) +
                               " are not one-hot rows");
            }
            nlab << hot << "\n";
            for (int j = 0; j < gr.n; ++j) {
                if (gr.edge(i, j)) a << (base + i + 1) << ", " << (base + j + 1) << "\n";
            }
        }
        base += gr.n;
    }
}

Graph degree_features(const Graph& g, int max_degree) {
    if (max_degree < 1) throw config_error("degree_features: max_degree must be >= 1");
    Graph out = g;
    out.feat_dim = max_degree + 1;
    out.features.assign(static_cast<size_t>(g.n) * out.feat_dim, 0.0);
    for (int i = 0; i < g.n; ++i) {
        const int d = std::min(g.degree(i), max_degree);
        out.features[static_cast<size_t>(i) * out.feat_dim + d] = 1.0;
    }
    return out;
}

}  // namespace grepool

#include "grepool/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace grepool {

ModelKind parse_model_kind(const std::string& name) {
    if (name == "grepool") return ModelKind::grepool;
    if (name == "sagpool") return ModelKind::sagpool;
    throw config_error("unknown model kind \"" + name + "\" (want grepool or sagpool)");
}

std::string to_string(ModelKind k) {
    return k == ModelKind::grepool ? "grepool" : "sagpool";
}

std::vector<Tensor> ModelParams::parameters() const {
    std::vector<Tensor> out;
    for (const auto& g : gcn) {
        out.push_back(g.weight);
        out.push_back(g.bias);
    }
    for (const auto& a : attn) {
        for (const auto& q : a.q_global) out.push_back(q);
        out.push_back(a.w_key);
        out.push_back(a.w_value);
    }
    for (const auto& s : score_proj) {
        out.push_back(s.weight);
        out.push_back(s.bias);
    }
    out.push_back(classifier);
    return out;
}

size_t ModelParams::parameter_count() const {
    size_t n = 0;
    for (const auto& t : parameters()) n += t.values().size();
    return n;
}

void ModelParams::zero_grad() {
    for (auto& t : parameters()) t.zero_grad();
}

namespace {

struct SeededDraw {
    std::mt19937_64 rng;
    explicit SeededDraw(uint64_t seed) : rng(seed) {}

    double uniform01() { return (rng() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    double normal() {
        // Box-Muller; the second variate is discarded to keep draws simple
        // and order-stable.
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    Tensor fan_uniform(int rows, int cols) {
        Tensor t(rows, cols);
        const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
        for (auto& v : t.values()) v = uniform(-bound, bound);
        return t.set_requires_grad(true);
    }

    Tensor scaled_normal(int rows, int cols, double sigma) {
        Tensor t(rows, cols);
        for (auto& v : t.values()) v = normal() * sigma;
        return t.set_requires_grad(true);
    }
};

Tensor zero_param(int rows, int cols) {
    return Tensor(rows, cols).set_requires_grad(true);
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, uint64_t seed) {
    if (cfg.hidden_dim < 1 || cfg.layers < 1 || cfg.classes < 1 || cfg.input_dim < 1) {
        throw config_error("init_params: dimensions must be positive");
    }
    if (cfg.kind == ModelKind::grepool && cfg.hidden_dim % cfg.heads != 0) {
        throw config_error("init_params: hidden dim " + std::to_string(cfg.hidden_dim) +
                           " is not divisible by " + std::to_string(cfg.heads) + " heads");
    }
    SeededDraw draw(seed);
    ModelParams p;
    const int d = cfg.hidden_dim;
    for (int l = 0; l < cfg.layers; ++l) {
        const int d_in = l == 0 ? cfg.input_dim : d;
        p.gcn.push_back({draw.fan_uniform(d_in, d), zero_param(1, d)});
        if (cfg.kind == ModelKind::grepool) {
            AttnParams a;
            a.heads = cfg.heads;
            a.head_dim = d / cfg.heads;
            const double sigma = 1.0 / std::sqrt(static_cast<double>(d));
            for (int h = 0; h < cfg.heads; ++h) a.q_global.push_back(draw.scaled_normal(1, a.head_dim, sigma));
            a.w_key = draw.fan_uniform(d, d);
            a.w_value = draw.fan_uniform(d, d);
            p.attn.push_back(std::move(a));
        } else {
            p.score_proj.push_back({draw.fan_uniform(d, 1), zero_param(1, 1)});
        }
    }
    p.classifier = draw.fan_uniform(d, cfg.classes);
    return p;
}

ModelParams deep_copy(const ModelParams& params) {
    ModelParams out;
    auto clone = [](const Tensor& t) {
        Tensor c(t.rows(), t.cols(), t.values());
        c.set_requires_grad(t.requires_grad());
        return c;
    };
    for (const auto& g : params.gcn) out.gcn.push_back({clone(g.weight), clone(g.bias)});
    for (const auto& a : params.attn) {
        AttnParams ap;
        ap.heads = a.heads;
        ap.head_dim = a.head_dim;
        for (const auto& q : a.q_global) ap.q_global.push_back(clone(q));
        ap.w_key = clone(a.w_key);
        ap.w_value = clone(a.w_value);
        out.attn.push_back(std::move(ap));
    }
    for (const auto& s : params.score_proj) out.score_proj.push_back({clone(s.weight), clone(s.bias)});
    out.classifier = clone(params.classifier);
    return out;
}

ForwardOutput model_forward(const GraphBatch& batch, const ModelParams& params, const ModelConfig& cfg,
                            std::mt19937_64* rng) {
    if (batch.feat_dim != cfg.input_dim) {
        throw shape_error("model_forward: batch feature dim " + std::to_string(batch.feat_dim) +
                          " != configured input dim " + std::to_string(cfg.input_dim));
    }
    ForwardOutput out;
    Tensor features = batch.feature_matrix();
    BatchTopology topo = topology_of(batch);
    const int n_graphs = batch.n_graphs();

    Tensor h_sum;
    for (int l = 0; l < cfg.layers; ++l) {
        BlockAdjacency adj = normalize_topology(topo);
        Tensor emb = gcn_forward(features, adj, params.gcn[l]);

        PoolOutput pooled;
        if (cfg.kind == ModelKind::grepool) {
            pooled = grepool_pool(topo, emb, params.attn[l], cfg.pool_ratio, cfg.strategy, rng,
                                  cfg.renormalize_readout);
        } else {
            // Score-based baseline: tanh of a 1-dim GCN projection, top-k,
            // gate by score. The per-layer readout sums the gated retained
            // rows, mirroring the attention model's summed readout.
            const GcnParams& scorer = params.score_proj[l];
            Tensor score_col =
                grepool::tanh(add_row_vector(matmul(aggregate(adj, emb), scorer.weight), scorer.bias));
            std::vector<int> retained =
                select_nodes(score_col.values(), topo.graph_id, cfg.pool_ratio, cfg.strategy, rng);
            pooled = drop_pool(topo, emb, score_col, retained);
            pooled.h_global = segment_sum_rows(pooled.coarse_features, pooled.coarse_topology.graph_id, n_graphs);
        }

        out.layer_global.push_back(pooled.h_global);
        out.discarded.push_back(pooled.discarded_embeddings);
        out.discarded_graph_id.push_back(pooled.discarded_graph_id);
        out.layer_scores.push_back(pooled.scores.values());
        out.layer_retained.push_back(pooled.retained_idx);

        h_sum = h_sum.defined() ? add(h_sum, pooled.h_global) : pooled.h_global;
        features = pooled.coarse_features;
        topo = std::move(pooled.coarse_topology);
    }

    out.logits = matmul(h_sum, params.classifier);
    out.probabilities = softmax_rows(out.logits);
    return out;
}

// ---- checkpoint ----

namespace {

void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
    os << "tensor " << name << " " << t.rows() << " " << t.cols() << "\n";
    os << std::hexfloat;
    for (int i = 0; i < t.rows(); ++i) {
        for (int j = 0; j < t.cols(); ++j) os << (j ? " " : "") << t.at(i, j);
        os << "\n";
    }
    os << std::defaultfloat;
}

Tensor read_tensor(std::istream& is, const std::string& path, const std::string& want) {
    std::string tag, name;
    int rows, cols;
    if (!(is >> tag >> name >> rows >> cols) || tag != "tensor" || name != want) {
        throw io_error(path + ": expected tensor " + want);
    }
    Tensor t(rows, cols);
    for (auto& v : t.values()) {
        std::string tok;
        if (!(is >> tok)) throw io_error(path + ": truncated tensor " + want);
        v = std::strtod(tok.c_str(), nullptr);
    }
    return t.set_requires_grad(true);
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const ModelConfig& cfg) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot write checkpoint " + path);
    os << "grepool-checkpoint 1\n";
    os << "kind " << to_string(cfg.kind) << "\n";
    os << "input " << cfg.input_dim << "\n";
    os << "hidden " << cfg.hidden_dim << "\n";
    os << "classes " << cfg.classes << "\n";
    os << "layers " << cfg.layers << "\n";
    os << "heads " << cfg.heads << "\n";
    os << "pool_ratio " << std::hexfloat << cfg.pool_ratio << std::defaultfloat << "\n";
    os << "strategy " << to_string(cfg.strategy) << "\n";
    os << "renormalize " << (cfg.renormalize_readout ? 1 : 0) << "\n";
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string base = "gcn" + std::to_string(l);
        write_tensor(os, base + ".weight", params.gcn[l].weight);
        write_tensor(os, base + ".bias", params.gcn[l].bias);
        if (cfg.kind == ModelKind::grepool) {
            const std::string ab = "attn" + std::to_string(l);
            for (int h = 0; h < cfg.heads; ++h)
                write_tensor(os, ab + ".q" + std::to_string(h), params.attn[l].q_global[h]);
            write_tensor(os, ab + ".w_key", params.attn[l].w_key);
            write_tensor(os, ab + ".w_value", params.attn[l].w_value);
        } else {
            const std::string sb = "score" + std::to_string(l);
            write_tensor(os, sb + ".weight", params.score_proj[l].weight);
            write_tensor(os, sb + ".bias", params.score_proj[l].bias);
        }
    }
    write_tensor(os, "classifier", params.classifier);
}

std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open checkpoint " + path);
    std::string magic;
    int version;
    if (!(is >> magic >> version) || magic != "grepool-checkpoint") {
        throw io_error(path + ": not a checkpoint file");
    }
    if (version != 1) throw io_error(path + ": unsupported checkpoint version " + std::to_string(version));

    ModelConfig cfg;
    auto read_kv = [&](const std::string& want) {
        std::string key, value;
        if (!(is >> key >> value) || key != want) throw io_error(path + ": expected key " + want);
        return value;
    };
    cfg.kind = parse_model_kind(read_kv("kind"));
    cfg.input_dim = std::stoi(read_kv("input"));
    cfg.hidden_dim = std::stoi(read_kv("hidden"));
    cfg.classes = std::stoi(read_kv("classes"));
    cfg.layers = std::stoi(read_kv("layers"));
    cfg.heads = std::stoi(read_kv("heads"));
    cfg.pool_ratio = std::strtod(read_kv("pool_ratio").c_str(), nullptr);
    cfg.strategy = parse_strategy(read_kv("strategy"));
    cfg.renormalize_readout = read_kv("renormalize") == "1";

    ModelParams p;
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string base = "gcn" + std::to_string(l);
        GcnParams g;
        g.weight = read_tensor(is, path, base + ".weight");
        g.bias = read_tensor(is, path, base + ".bias");
        p.gcn.push_back(std::move(g));
        if (cfg.kind == ModelKind::grepool) {
            const std::string ab = "attn" + std::to_string(l);
            AttnParams a;
            a.heads = cfg.heads;
            a.head_dim = cfg.hidden_dim / cfg.heads;
            for (int h = 0; h < cfg.heads; ++h) a.q_global.push_back(read_tensor(is, path, ab + ".q" + std::to_string(h)));
            a.w_key = read_tensor(is, path, ab + ".w_key");
            a.w_value = read_tensor(is, path, ab + ".w_value");
            p.attn.push_back(std::move(a));
        } else {
            const std::string sb = "score" + std::to_string(l);
            GcnParams s;
            s.weight = read_tensor(is, path, sb + ".weight");
            s.bias = read_tensor(is, path, sb + ".bias");
            p.score_proj.push_back(std::move(s));
        }
    }
    p.classifier = read_tensor(is, path, "classifier");
    return {std::move(p), cfg};
}

}  // namespace grepool

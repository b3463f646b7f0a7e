#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "grepool/gcn.hpp"
#include "grepool/pool.hpp"

namespace grepool {

enum class ModelKind { grepool, sagpool };

ModelKind parse_model_kind(const std::string& name);
std::string to_string(ModelKind k);

struct ModelConfig {
    int input_dim = 1;
    int hidden_dim = 128;
    int classes = 2;
    int layers = 3;
    int heads = 4;
    double pool_ratio = 0.5;
    SelectStrategy strategy = SelectStrategy::attention;
    ModelKind kind = ModelKind::grepool;
    bool renormalize_readout = false;
};

// All learnable tensors of the stacked (GCN -> pool) network plus the
// shared linear classifier. For the score-based baseline, score_proj holds
// the per-layer 1-dim GCN scorer instead of attention parameters.
struct ModelParams {
    std::vector<GcnParams> gcn;        // layers entries
    std::vector<AttnParams> attn;      // layers entries (grepool kind)
    std::vector<GcnParams> score_proj; // layers entries (sagpool kind), weight d x 1
    Tensor classifier;                 // hidden x classes

    std::vector<Tensor> parameters() const;
    size_t parameter_count() const;
    void zero_grad();
};

// Deterministic per seed: fan-based uniform for weights, scaled normal
// (sigma = 1/sqrt(d)) for the global queries.
ModelParams init_params(const ModelConfig& cfg, uint64_t seed);

// Independent copy of all parameter values (no shared storage).
ModelParams deep_copy(const ModelParams& params);

struct ForwardOutput {
    Tensor logits;         // n_graphs x classes
    Tensor probabilities;  // rows sum to 1
    std::vector<Tensor> layer_global;               // per layer, n_graphs x d
    std::vector<Tensor> discarded;                  // per layer, rows = discarded nodes (may be 0 x d)
    std::vector<std::vector<int>> discarded_graph_id;
    std::vector<std::vector<double>> layer_scores;  // fused score values per layer
    std::vector<std::vector<int>> layer_retained;
};

// logits = classifier applied to the elementwise sum of the per-layer global
// embeddings; the coarsened graph of layer l feeds layer l+1.
ForwardOutput model_forward(const GraphBatch& batch, const ModelParams& params, const ModelConfig& cfg,
                            std::mt19937_64* rng = nullptr);

// Versioned plain-text checkpoint of named parameter matrices (hexfloat, so
// reloading is bit-exact).
void save_checkpoint(const std::string& path, const ModelParams& params, const ModelConfig& cfg);
std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path);

}  // namespace grepool

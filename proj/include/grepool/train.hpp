#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grepool/graph.hpp"
#include "grepool/model.hpp"

namespace grepool {

struct TrainConfig {
    std::string dataset = "dataset";
    double pool_ratio = 0.5;
    double lambda = 0.1;
    int layers = 3;
    int heads = 4;
    int hidden_dim = 128;
    double lr = 1e-3;
    double weight_decay = 5e-4;
    int epochs = 200;
    int batch_size = 32;
    uint64_t seed = 0;
    SelectStrategy strategy = SelectStrategy::attention;
    ModelKind model = ModelKind::grepool;
    bool uniform_loss_enabled = false;
    bool renormalize_readout = false;
    bool per_node_uniform_kl = false;
    int max_degree = 64;
    double train_ratio = 0.8;
    double valid_ratio = 0.1;
    double test_ratio = 0.1;

    void validate() const;  // throws config_error naming the offending field
};

struct EpochStats {
    double l_sup = 0;
    double l_unif = 0;
    double l_total = 0;
    double valid_acc = 0;
    double test_acc = 0;
};

struct RunResult {
    uint64_t seed = 0;
    bool failed = false;
    std::string failure;
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_valid_accuracy = 0;
    double test_accuracy = 0;       // at the best-validation epoch
    ModelParams best_params;        // snapshot taken at the best-validation epoch
    ModelConfig model_config;
};

struct Aggregate {
    double mean_accuracy = 0;
    double std_accuracy = 0;
    int n_failed = 0;
    std::vector<RunResult> runs;
};

// -(1/|D|) sum_G log(yhat_G[y_G]); probabilities clamped at 1e-12 (a clamp
// event is counted and logged once).
Tensor supervised_loss(const Tensor& probabilities, const std::vector<int>& labels);
long supervised_loss_clamp_events();

// Mean over rows of KL(uniform || row).
Tensor kl_uniform(const Tensor& probabilities);

// Discarded embeddings of every layer pooled per graph (mean), classified
// with the shared weight matrix, and pulled toward the uniform distribution.
// Graphs with nothing discarded contribute exactly 0; no discarded nodes at
// all yields the exact scalar 0. per_node switches to averaging the KL over
// individual discarded nodes instead of pooling first.
Tensor uniform_loss(const std::vector<Tensor>& discarded, const std::vector<std::vector<int>>& discarded_graph_id,
                    int n_graphs, const Tensor& classifier, bool per_node = false);

Tensor total_loss(const Tensor& sup, const Tensor& unif, double lambda);

// Adam with bias correction and decoupled weight decay (beta1 0.9, beta2
// 0.999, eps 1e-8).
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long step = 0;
};

AdamState init_adam(const std::vector<Tensor>& params);
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr, double weight_decay);

double evaluate_accuracy(const std::vector<Graph>& dataset, const std::vector<int>& indices,
                         const ModelParams& params, const ModelConfig& cfg, int batch_size,
                         std::mt19937_64* rng);

// One seeded run: fresh split and init, minibatch training, model selection
// at the best validation accuracy. A non-finite loss aborts the run and
// marks it failed.
RunResult train_run(const std::vector<Graph>& dataset, const TrainConfig& cfg);

// n_seeds independent runs (seeds cfg.seed .. cfg.seed + n_seeds - 1),
// optionally spread over worker threads; aggregation order is fixed by seed.
Aggregate run_experiment(const std::vector<Graph>& dataset, const TrainConfig& cfg, int n_seeds,
                         int jobs = 1);

}  // namespace grepool

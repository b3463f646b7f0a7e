#include "grepool/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

namespace grepool {

void TrainConfig::validate() const {
    if (!(pool_ratio > 0.0 && pool_ratio <= 1.0)) throw config_error("config field \"p\": must be in (0, 1]");
    if (lambda < 0.0) throw config_error("config field \"lambda\": must be >= 0");
    if (lr <= 0.0) throw config_error("config field \"lr\": must be > 0");
    if (weight_decay < 0.0) throw config_error("config field \"weight_decay\": must be >= 0");
    if (layers < 1) throw config_error("config field \"layers\": must be >= 1");
    if (heads < 1) throw config_error("config field \"heads\": must be >= 1");
    if (hidden_dim < 1) throw config_error("config field \"hidden\": must be >= 1");
    if (model == ModelKind::grepool && hidden_dim % heads != 0) {
        throw config_error("config field \"heads\": must divide hidden dim " + std::to_string(hidden_dim));
    }
    if (epochs < 1) throw config_error("config field \"epochs\": must be >= 1");
    if (batch_size < 1) throw config_error("config field \"batch_size\": must be >= 1");
    if (max_degree < 1) throw config_error("config field \"max_degree\": must be >= 1");
    if (std::abs(train_ratio + valid_ratio + test_ratio - 1.0) > 1e-9) {
        throw config_error("config field \"train_ratio\": split ratios must sum to 1");
    }
}

namespace {

constexpr double kProbClamp = 1e-12;

std::atomic<long> g_clamp_events{0};

Tensor one_hot_rows(const std::vector<int>& labels, int classes) {
    Tensor t(static_cast<int>(labels.size()), classes);
    for (size_t i = 0; i < labels.size(); ++i) t.at(static_cast<int>(i), labels[i]) = 1.0;
    return t;
}

}  // namespace

long supervised_loss_clamp_events() { return g_clamp_events.load(); }

Tensor supervised_loss(const Tensor& probabilities, const std::vector<int>& labels) {
    const int n = probabilities.rows();
    const int classes = probabilities.cols();
    if (labels.size() != static_cast<size_t>(n)) throw shape_error("supervised_loss: one label per row required");
    for (int y : labels) {
        if (y < 0 || y >= classes) throw index_error("supervised_loss: label " + std::to_string(y) + " out of range");
    }
    for (size_t i = 0; i < labels.size(); ++i) {
        if (probabilities.at(static_cast<int>(i), labels[i]) < kProbClamp) {
            if (g_clamp_events.fetch_add(1) == 0) {
                std::fprintf(stderr, "warning: probability at true class below %g, clamped\n", kProbClamp);
            }
        }
    }
    Tensor picked = row_sum(hadamard(probabilities, one_hot_rows(labels, classes)));
    return scale(sum_all(log(clamp_min(picked, kProbClamp))), -1.0 / n);
}

Tensor kl_uniform(const Tensor& probabilities) {
    const int n = probabilities.rows();
    const int classes = probabilities.cols();
    // KL(u || p) = -log C - (1/C) sum_c log p_c per row.
    Tensor mean_log = row_mean(log(clamp_min(probabilities, kProbClamp)));
    Tensor kl_rows = scale(add(mean_log, Tensor::full(n, 1, std::log(static_cast<double>(classes)))), -1.0);
    return scale(sum_all(kl_rows), 1.0 / n);
}

Tensor uniform_loss(const std::vector<Tensor>& discarded, const std::vector<std::vector<int>>& discarded_graph_id,
                    int n_graphs, const Tensor& classifier, bool per_node) {
    std::vector<Tensor> parts;
    std::vector<int> gid;
    for (size_t l = 0; l < discarded.size(); ++l) {
        if (!discarded[l].defined() || discarded[l].rows() == 0) continue;
        parts.push_back(discarded[l]);
        gid.insert(gid.end(), discarded_graph_id[l].begin(), discarded_graph_id[l].end());
    }
    if (parts.empty()) return Tensor(1, 1);

    Tensor all = parts.size() == 1 ? parts[0] : concat_rows(parts);
    if (per_node) {
        return kl_uniform(softmax_rows(matmul(all, classifier)));
    }
    std::vector<double> inv_counts(n_graphs, 0.0);
    for (int g : gid) inv_counts[g] += 1.0;
    for (double& c : inv_counts) c = c > 0.0 ? 1.0 / c : 0.0;
    Tensor pooled = scale_rows(segment_sum_rows(all, gid, n_graphs), Tensor(n_graphs, 1, inv_counts));
    return kl_uniform(softmax_rows(matmul(pooled, classifier)));
}

Tensor total_loss(const Tensor& sup, const Tensor& unif, double lambda) {
    if (lambda < 0.0) throw config_error("total_loss: lambda must be >= 0");
    return add(sup, scale(unif, lambda));
}

AdamState init_adam(const std::vector<Tensor>& params) {
    AdamState st;
    for (const auto& p : params) {
        st.m.emplace_back(p.values().size(), 0.0);
        st.v.emplace_back(p.values().size(), 0.0);
    }
    return st;
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr, double weight_decay) {
    if (state.m.size() != params.size()) throw shape_error("adam_step: state does not match parameter list");
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (size_t k = 0; k < params.size(); ++k) {
        auto& values = params[k].values();
        if (state.m[k].size() != values.size()) throw shape_error("adam_step: state shape mismatch");
        const bool has_grad = params[k].has_grad();
        for (size_t i = 0; i < values.size(); ++i) {
            const double g = has_grad ? params[k].grad()[i] : 0.0;
            values[i] -= lr * weight_decay * values[i];
            state.m[k][i] = beta1 * state.m[k][i] + (1.0 - beta1) * g;
            state.v[k][i] = beta2 * state.v[k][i] + (1.0 - beta2) * g * g;
            const double mhat = state.m[k][i] / bc1;
            const double vhat = state.v[k][i] / bc2;
            values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

namespace {

int argmax_row(const Tensor& t, int row) {
    int best = 0;
    for (int j = 1; j < t.cols(); ++j)
        if (t.at(row, j) > t.at(row, best)) best = j;
    return best;
}

}  // namespace

double evaluate_accuracy(const std::vector<Graph>& dataset, const std::vector<int>& indices,
                         const ModelParams& params, const ModelConfig& cfg, int batch_size,
                         std::mt19937_64* rng) {
    if (indices.empty()) return 0.0;
    int correct = 0;
    for (size_t start = 0; start < indices.size(); start += batch_size) {
        const size_t end = std::min(indices.size(), start + batch_size);
        std::vector<int> chunk(indices.begin() + start, indices.begin() + end);
        GraphBatch batch = make_batch(dataset, chunk);
        ForwardOutput out = model_forward(batch, params, cfg, rng);
        for (int g = 0; g < batch.n_graphs(); ++g) {
            if (argmax_row(out.probabilities, g) == batch.graphs[g].label) ++correct;
        }
    }
    return static_cast<double>(correct) / indices.size();
}

RunResult train_run(const std::vector<Graph>& dataset, const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw config_error("train_run: empty dataset");

    std::vector<int> labels;
    labels.reserve(dataset.size());
    int classes = 0;
    for (const auto& g : dataset) {
        labels.push_back(g.label);
        classes = std::max(classes, g.label + 1);
    }

    ModelConfig mc;
    mc.input_dim = dataset[0].feat_dim;
    mc.hidden_dim = cfg.hidden_dim;
    mc.classes = classes;
    mc.layers = cfg.layers;
    mc.heads = cfg.heads;
    mc.pool_ratio = cfg.pool_ratio;
    mc.strategy = cfg.strategy;
    mc.kind = cfg.model;
    mc.renormalize_readout = cfg.renormalize_readout;

    RunResult result;
    result.seed = cfg.seed;
    result.model_config = mc;

    DatasetSplit split = make_splits(labels, cfg.train_ratio, cfg.valid_ratio, cfg.test_ratio, cfg.seed);
    ModelParams params = init_params(mc, cfg.seed);
    std::vector<Tensor> flat = params.parameters();
    AdamState adam = init_adam(flat);
    std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

    std::vector<int> order = split.train;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

        double sup_sum = 0, unif_sum = 0, total_sum = 0;
        long graph_count = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<int> chunk(order.begin() + start, order.begin() + end);
            GraphBatch batch = make_batch(dataset, chunk);

            ForwardOutput out = model_forward(batch, params, mc, &rng);
            Tensor sup = supervised_loss(out.probabilities, batch.labels());
            Tensor unif = cfg.uniform_loss_enabled
                              ? uniform_loss(out.discarded, out.discarded_graph_id, batch.n_graphs(),
                                             params.classifier, cfg.per_node_uniform_kl)
                              : Tensor(1, 1);
            Tensor total = total_loss(sup, unif, cfg.lambda);

            if (!std::isfinite(total.item())) {
                result.failed = true;
                result.failure = "non-finite loss at epoch " + std::to_string(epoch) + " (sup=" +
                                 std::to_string(sup.item()) + ", unif=" + std::to_string(unif.item()) + ")";
                return result;
            }

            params.zero_grad();
            backward(total);
            adam_step(flat, adam, cfg.lr, cfg.weight_decay);

            const long b = static_cast<long>(chunk.size());
            sup_sum += sup.item() * b;
            unif_sum += unif.item() * b;
            total_sum += total.item() * b;
            graph_count += b;
        }

        EpochStats stats;
        stats.l_sup = sup_sum / graph_count;
        stats.l_unif = unif_sum / graph_count;
        stats.l_total = total_sum / graph_count;
        stats.valid_acc = evaluate_accuracy(dataset, split.valid, params, mc, cfg.batch_size, &rng);
        stats.test_acc = evaluate_accuracy(dataset, split.test, params, mc, cfg.batch_size, &rng);
        result.epochs.push_back(stats);

        if (stats.valid_acc > result.best_valid_accuracy || result.best_epoch < 0) {
            result.best_valid_accuracy = stats.valid_acc;
            result.best_epoch = epoch;
            result.test_accuracy = stats.test_acc;
            result.best_params = deep_copy(params);
        }
    }
    return result;
}

Aggregate run_experiment(const std::vector<Graph>& dataset, const TrainConfig& cfg, int n_seeds, int jobs) {
    if (n_seeds < 1) throw config_error("run_experiment: n_seeds must be >= 1");
    Aggregate agg;
    agg.runs.resize(n_seeds);

    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next.fetch_add(1); i < n_seeds; i = next.fetch_add(1)) {
            TrainConfig c = cfg;
            c.seed = cfg.seed + static_cast<uint64_t>(i);
            agg.runs[i] = train_run(dataset, c);
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < std::min(jobs, n_seeds); ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    double sum = 0;
    int n_ok = 0;
    for (const auto& r : agg.runs) {
        if (r.failed) {
            ++agg.n_failed;
            continue;
        }
        sum += r.test_accuracy;
        ++n_ok;
    }
    if (n_ok > 0) {
        agg.mean_accuracy = sum / n_ok;
        double sq = 0;
        for (const auto& r : agg.runs) {
            if (!r.failed) sq += (r.test_accuracy - agg.mean_accuracy) * (r.test_accuracy - agg.mean_accuracy);
        }
        agg.std_accuracy = n_ok > 1 ? std::sqrt(sq / (n_ok - 1)) : 0.0;
    }
    return agg;
}

}  // namespace grepool

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "grepool/config.hpp"
#include "grepool/model.hpp"
#include "grepool/records.hpp"
#include "grepool/wl.hpp"

namespace fs = std::filesystem;
using grepool::Aggregate;
using grepool::ExperimentConfig;
using grepool::Graph;
using grepool::RunResult;
using grepool::TrainConfig;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDivergence = 4;

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides,
                             const std::string& data_root, const std::string& out_dir, int jobs) {
    ExperimentConfig cfg = ExperimentConfig::load(path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw grepool::config_error("--set expects key=value, got \"" + kv + "\"");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!data_root.empty()) cfg.data_root = data_root;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (jobs > 0) cfg.jobs = jobs;
    cfg.validate();
    return cfg;
}

// One experiment cell: run all seeds, write per-run curves and records.
Aggregate run_cell(const std::vector<Graph>& dataset, const ExperimentConfig& cfg, const TrainConfig& tc,
                   const json& cell, std::vector<json>& records) {
    Aggregate agg = grepool::run_experiment(dataset, tc, cfg.n_seeds, cfg.jobs);
    const std::string hash = cfg.config_hash();
    fs::create_directories(fs::path(cfg.output_dir) / "curves");
    fs::create_directories(fs::path(cfg.output_dir) / "checkpoints");
    for (const auto& run : agg.runs) {
        std::string cell_tag;
        if (!cell.is_null()) {
            for (const auto& [k, v] : cell.items()) {
                cell_tag += "_" + k + "-" + (v.is_string() ? v.get<std::string>() : v.dump());
            }
        }
        const std::string stem = "run" + cell_tag + "_seed" + std::to_string(run.seed);
        const std::string curves = "curves/" + stem + ".csv";
        grepool::write_curves((fs::path(cfg.output_dir) / curves).string(), run);
        json record = grepool::run_record(tc.dataset, hash, cell, run, curves);
        if (!run.failed) {
            const std::string ckpt = "checkpoints/" + stem + ".ckpt";
            grepool::save_checkpoint((fs::path(cfg.output_dir) / ckpt).string(), run.best_params,
                                     run.model_config);
            record["checkpoint"] = ckpt;
        }
        records.push_back(record);
    }
    records.push_back(grepool::aggregate_record(tc.dataset, hash, cell, agg));
    return agg;
}

int finish(const ExperimentConfig& cfg, const std::vector<json>& records,
           const std::vector<std::pair<std::string, Aggregate>>& table) {
    fs::create_directories(cfg.output_dir);
    grepool::write_records((fs::path(cfg.output_dir) / "records.jsonl").string(), records);
    const std::string pretty = grepool::format_aggregate_table(table);
    std::ofstream((fs::path(cfg.output_dir) / "results.txt").string()) << pretty;
    std::cout << pretty;
    for (const auto& [label, agg] : table) {
        if (agg.n_failed > 0) {
            std::cerr << "error: " << agg.n_failed << " run(s) diverged in cell " << label << "\n";
            return kExitDivergence;
        }
    }
    return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
    const std::vector<Graph> dataset = grepool::load_dataset(cfg);
    std::vector<json> records;
    Aggregate agg = run_cell(dataset, cfg, cfg.train, json(), records);
    return finish(cfg, records, {{cfg.train.dataset, agg}});
}

int cmd_ablate(const ExperimentConfig& cfg) {
    const std::vector<Graph> dataset = grepool::load_dataset(cfg);

    // Cartesian product over the non-empty grids; scalar settings otherwise.
    auto strategies = cfg.sweep.strategies;
    if (strategies.empty()) strategies = {cfg.train.strategy};
    auto ps = cfg.sweep.p;
    if (ps.empty()) ps = {cfg.train.pool_ratio};
    auto lambdas = cfg.sweep.lambda;
    if (lambdas.empty()) lambdas = {cfg.train.lambda};
    auto layer_counts = cfg.sweep.layers;
    if (layer_counts.empty()) layer_counts = {cfg.train.layers};

    std::vector<json> records;
    std::vector<std::pair<std::string, Aggregate>> table;
    std::ostringstream long_form;
    long_form << "strategy\tp\tlambda\tlayers\tseed\taccuracy\n";
    for (auto strategy : strategies) {
        for (double p : ps) {
            for (double lambda : lambdas) {
                for (int layers : layer_counts) {
                    TrainConfig tc = cfg.train;
                    tc.strategy = strategy;
                    tc.pool_ratio = p;
                    tc.lambda = lambda;
                    tc.layers = layers;
                    json cell{{"strategy", to_string(strategy)}, {"p", p}, {"lambda", lambda}, {"layers", layers}};
                    Aggregate agg = run_cell(dataset, cfg, tc, cell, records);
                    std::ostringstream label;
                    label << to_string(strategy) << " p=" << p << " lambda=" << lambda << " L=" << layers;
                    table.emplace_back(label.str(), agg);
                    for (const auto& run : agg.runs) {
                        long_form << to_string(strategy) << "\t" << p << "\t" << lambda << "\t" << layers << "\t"
                                  << run.seed << "\t" << run.test_accuracy << "\n";
                    }
                }
            }
        }
    }
    fs::create_directories(cfg.output_dir);
    std::ofstream((fs::path(cfg.output_dir) / "ablation.tsv").string()) << long_form.str();
    return finish(cfg, records, table);
}

// Edge-list text form: one "u v" pair per line (0-indexed), '#' comments;
// node count is max index + 1 unless a "nodes N" line says otherwise.
Graph read_edge_list(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw grepool::io_error("cannot open graph file " + path);
    std::vector<std::pair<int, int>> edges;
    long declared_n = -1;
    std::string line;
    long line_no = 0;
    long max_node = -1;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string first;
        if (!(ss >> first)) continue;
        if (first == "nodes") {
            if (!(ss >> declared_n) || declared_n < 1) {
                throw grepool::format_error(path, line_no, "expected \"nodes N\"");
            }
            continue;
        }
        long u, v;
        try {
            u = std::stol(first);
        } catch (const std::exception&) {
            throw grepool::format_error(path, line_no, "expected an edge \"u v\"");
        }
        if (!(ss >> v)) throw grepool::format_error(path, line_no, "expected an edge \"u v\"");
        if (u < 0 || v < 0) throw grepool::format_error(path, line_no, "node ids must be >= 0");
        max_node = std::max({max_node, u, v});
        edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
    }
    const long n = declared_n > 0 ? declared_n : max_node + 1;
    if (n < 1) throw grepool::io_error(path + ": graph has no nodes");
    if (max_node >= n) throw grepool::io_error(path + ": node id exceeds declared node count");
    return grepool::make_graph(static_cast<int>(n), edges);
}

int cmd_wltest(const std::string& path_a, const std::string& path_b) {
    const Graph a = read_edge_list(path_a);
    const Graph b = read_edge_list(path_b);
    const bool eq = grepool::wl_equivalent(a, b);
    for (const auto& [name, g] : {std::pair<const char*, const Graph&>{"A", a}, {"B", b}}) {
        const auto coloring = grepool::wl_refine(g);
        const auto hist = grepool::color_histogram(coloring.rounds.back());
        std::cout << name << ": n=" << g.n << " stable_round=" << coloring.stable_round << " histogram=";
        for (const auto& [color, count] : hist) std::cout << count << " ";
        std::cout << "\n";
    }
    std::cout << (eq ? "equivalent" : "distinguishable") << "\n";
    return 0;
}

int cmd_bench(const std::vector<int>& sizes, int hidden, int heads, int reps, uint64_t seed) {
    std::cout << "# pooling-score stage (normalized aggregation + attention scoring), median of " << reps
              << " reps\n";
    std::cout << "n\ttime_us\n";
    for (int n : sizes) {
        if (n < 1) throw grepool::config_error("bench sizes must be >= 1");
        const double us = grepool::bench_pooling_scores_us(n, hidden, heads, reps, seed);
        std::printf("%d\t%.1f\n", n, us);
    }
    return 0;
}

int cmd_parse_check(const std::string& dir, const std::string& name) {
    const std::vector<Graph> graphs = grepool::parse_tu_dataset(dir, name);
    long nodes = 0, edges = 0;
    int classes = 0;
    for (const auto& g : graphs) {
        nodes += g.n;
        classes = std::max(classes, g.label + 1);
        for (size_t i = 0; i < g.adj.size(); ++i) edges += g.adj[i];
    }
    std::cout << "graphs: " << graphs.size() << "\n";
    std::cout << "classes: " << classes << "\n";
    std::cout << "mean nodes: " << static_cast<double>(nodes) / graphs.size() << "\n";
    std::cout << "mean edges: " << static_cast<double>(edges) / 2.0 / graphs.size() << "\n";
    std::cout << "feature dim: " << (graphs.empty() ? 0 : graphs[0].feat_dim) << "\n";
    std::cout << "node labels: " << (grepool::tu_dataset_has_node_labels(dir, name) ? "yes" : "no") << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph classification with attention-based node-drop pooling"};
    app.require_subcommand(1);

    std::string config_path, data_root, out_dir;
    std::vector<std::string> overrides;
    int jobs = 0;

    auto add_config_options = [&](CLI::App* cmd) {
        cmd->add_option("config", config_path, "experiment config file")->required();
        cmd->add_option("--set", overrides, "override a scalar config key (key=value)");
        cmd->add_option("--data-root", data_root, "dataset root (default $GREPOOL_DATA_ROOT)");
        cmd->add_option("--out", out_dir, "output directory override");
        cmd->add_option("--jobs", jobs, "concurrent runs");
    };

    CLI::App* train = app.add_subcommand("train", "train and aggregate over seeds");
    add_config_options(train);
    CLI::App* ablate = app.add_subcommand("ablate", "sweep strategies / pooling ratios / lambdas / layers");
    add_config_options(ablate);

    std::string graph_a, graph_b;
    CLI::App* wltest = app.add_subcommand("wltest", "1-WL equivalence of two edge-list graphs");
    wltest->add_option("graph_a", graph_a)->required();
    wltest->add_option("graph_b", graph_b)->required();

    std::vector<int> bench_sizes{64, 128, 256};
    int bench_hidden = 64, bench_heads = 4, bench_reps = 15;
    uint64_t bench_seed = 1;
    CLI::App* bench = app.add_subcommand("bench", "time the pooling-score stage at growing graph sizes");
    bench->add_option("sizes", bench_sizes, "node counts");
    bench->add_option("--hidden", bench_hidden);
    bench->add_option("--heads", bench_heads);
    bench->add_option("--reps", bench_reps);
    bench->add_option("--seed", bench_seed);

    std::string tu_dir, tu_name;
    CLI::App* parse_check = app.add_subcommand("parse-check", "ingest a TU dataset and print its shape");
    parse_check->add_option("dir", tu_dir)->required();
    parse_check->add_option("name", tu_name)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(load_config(config_path, overrides, data_root, out_dir, jobs));
        if (ablate->parsed()) return cmd_ablate(load_config(config_path, overrides, data_root, out_dir, jobs));
        if (wltest->parsed()) return cmd_wltest(graph_a, graph_b);
        if (bench->parsed()) return cmd_bench(bench_sizes, bench_hidden, bench_heads, bench_reps, bench_seed);
        if (parse_check->parsed()) return cmd_parse_check(tu_dir, tu_name);
    } catch (const grepool::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const grepool::io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const grepool::divergence_error& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#pragma once

#include <string>
#include <vector>

#include "grepool/train.hpp"

namespace grepool {

// Sweep grids for the ablation command; empty grids fall back to the scalar
// value from the [train] settings.
struct SweepGrid {
    std::vector<double> p;
    std::vector<double> lambda;
    std::vector<int> layers;
    std::vector<SelectStrategy> strategies;
};

// File form of a full experiment: dataset location, training knobs, sweep
// grids and output directory. Declarative key = value text, one [sweep]
// section; unknown keys are rejected.
struct ExperimentConfig {
    TrainConfig train;
    std::string data_root;  // empty: $GREPOOL_DATA_ROOT, then "."
    std::string output_dir = "out";
    int n_seeds = 10;
    int jobs = 1;
    SweepGrid sweep;

    static ExperimentConfig load(const std::string& path);

    // Applies one scalar "key=value" assignment (the CLI --set override).
    void set(const std::string& key, const std::string& value);

    void validate() const;

    std::string dataset_dir() const;
    std::string canonical_text() const;  // fixed field order, for hashing
    std::string config_hash() const;     // FNV-1a 64 over canonical_text
};

// Parses the configured TU dataset; graphs without node labels get degree
// one-hot features capped at train.max_degree.
std::vector<Graph> load_dataset(const ExperimentConfig& cfg);

}  // namespace grepool

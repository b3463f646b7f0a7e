#include "grepool/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace grepool {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw config_error("config field \"" + key + "\": \"" + value + "\" is not a number");
    }
}

long parse_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw config_error("config field \"" + key + "\": \"" + value + "\" is not an integer");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw config_error("config field \"" + key + "\": \"" + value + "\" is not a boolean");
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    if (key == "dataset") train.dataset = value;
    else if (key == "data_root") data_root = value;
    else if (key == "output_dir") output_dir = value;
    else if (key == "seeds") n_seeds = static_cast<int>(parse_int(key, value));
    else if (key == "jobs") jobs = static_cast<int>(parse_int(key, value));
    else if (key == "p") train.pool_ratio = parse_double(key, value);
    else if (key == "lambda") train.lambda = parse_double(key, value);
    else if (key == "layers") train.layers = static_cast<int>(parse_int(key, value));
    else if (key == "heads") train.heads = static_cast<int>(parse_int(key, value));
    else if (key == "hidden") train.hidden_dim = static_cast<int>(parse_int(key, value));
    else if (key == "lr") train.lr = parse_double(key, value);
    else if (key == "weight_decay") train.weight_decay = parse_double(key, value);
    else if (key == "epochs") train.epochs = static_cast<int>(parse_int(key, value));
    else if (key == "batch_size") train.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "seed") train.seed = static_cast<uint64_t>(parse_int(key, value));
    else if (key == "strategy") train.strategy = parse_strategy(value);
    else if (key == "model") train.model = parse_model_kind(value);
    else if (key == "uniform_loss") train.uniform_loss_enabled = parse_bool(key, value);
    else if (key == "renormalize_readout") train.renormalize_readout = parse_bool(key, value);
    else if (key == "per_node_uniform_kl") train.per_node_uniform_kl = parse_bool(key, value);
    else if (key == "max_degree") train.max_degree = static_cast<int>(parse_int(key, value));
    else if (key == "train_ratio") train.train_ratio = parse_double(key, value);
    else if (key == "valid_ratio") train.valid_ratio = parse_double(key, value);
    else if (key == "test_ratio") train.test_ratio = parse_double(key, value);
    else throw config_error("unknown config key \"" + key + "\"");
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config " + path);
    ExperimentConfig cfg;
    std::string line, section;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            if (section != "sweep") {
                throw config_error(path + ":" + std::to_string(line_no) + ": unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw config_error(path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (section.empty()) {
                cfg.set(key, value);
            } else if (key == "p") {
                for (const auto& v : split_list(value)) cfg.sweep.p.push_back(parse_double(key, v));
            } else if (key == "lambda") {
                for (const auto& v : split_list(value)) cfg.sweep.lambda.push_back(parse_double(key, v));
            } else if (key == "layers") {
                for (const auto& v : split_list(value)) cfg.sweep.layers.push_back(static_cast<int>(parse_int(key, v)));
            } else if (key == "strategy") {
                for (const auto& v : split_list(value)) cfg.sweep.strategies.push_back(parse_strategy(v));
            } else {
                throw config_error("unknown sweep key \"" + key + "\"");
            }
        } catch (const config_error& e) {
            throw config_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

void ExperimentConfig::validate() const {
    train.validate();
    if (train.dataset.empty()) throw config_error("config field \"dataset\": must be set");
    if (n_seeds < 1) throw config_error("config field \"seeds\": must be >= 1");
    if (jobs < 1) throw config_error("config field \"jobs\": must be >= 1");
    for (double p : sweep.p) {
        if (!(p > 0.0 && p <= 1.0)) throw config_error("config field \"sweep.p\": values must be in (0, 1]");
    }
    for (double l : sweep.lambda) {
        if (l < 0.0) throw config_error("config field \"sweep.lambda\": values must be >= 0");
    }
    for (int l : sweep.layers) {
        if (l < 1) throw config_error("config field \"sweep.layers\": values must be >= 1");
    }
}

std::string ExperimentConfig::dataset_dir() const {
    std::string root = data_root;
    if (root.empty()) {
        if (const char* env = std::getenv("GREPOOL_DATA_ROOT")) root = env;
    }
    if (root.empty()) root = ".";
    return (std::filesystem::path(root) / train.dataset).string();
}

std::string ExperimentConfig::canonical_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "dataset=" << train.dataset << "\n"
       << "p=" << train.pool_ratio << "\n"
       << "lambda=" << train.lambda << "\n"
       << "layers=" << train.layers << "\n"
       << "heads=" << train.heads << "\n"
       << "hidden=" << train.hidden_dim << "\n"
       << "lr=" << train.lr << "\n"
       << "weight_decay=" << train.weight_decay << "\n"
       << "epochs=" << train.epochs << "\n"
       << "batch_size=" << train.batch_size << "\n"
       << "seed=" << train.seed << "\n"
       << "strategy=" << to_string(train.strategy) << "\n"
       << "model=" << to_string(train.model) << "\n"
       << "uniform_loss=" << train.uniform_loss_enabled << "\n"
       << "renormalize_readout=" << train.renormalize_readout << "\n"
       << "per_node_uniform_kl=" << train.per_node_uniform_kl << "\n"
       << "max_degree=" << train.max_degree << "\n"
       << "ratios=" << train.train_ratio << "/" << train.valid_ratio << "/" << train.test_ratio << "\n"
       << "seeds=" << n_seeds << "\n";
    os << "sweep.p=";
    for (double v : sweep.p) os << v << ",";
    os << "\nsweep.lambda=";
    for (double v : sweep.lambda) os << v << ",";
    os << "\nsweep.layers=";
    for (int v : sweep.layers) os << v << ",";
    os << "\nsweep.strategy=";
    for (auto s : sweep.strategies) os << to_string(s) << ",";
    os << "\n";
    return os.str();
}

std::string ExperimentConfig::config_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_text()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<Graph> load_dataset(const ExperimentConfig& cfg) {
    const std::string dir = cfg.dataset_dir();
    std::vector<Graph> graphs = parse_tu_dataset(dir, cfg.train.dataset);
    if (!tu_dataset_has_node_labels(dir, cfg.train.dataset)) {
        for (auto& g : graphs) g = degree_features(g, cfg.train.max_degree);
    }
    return graphs;
}

}  // namespace grepool

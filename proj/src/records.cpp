#include "grepool/records.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace grepool {

using nlohmann::json;

void write_records(const std::string& path, const std::vector<json>& records) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot write records to " + path);
    os << json{{"schema", kRecordSchemaName}, {"version", kRecordSchemaVersion}}.dump() << "\n";
    for (const auto& r : records) os << r.dump() << "\n";
}

std::vector<json> read_records(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open records " + path);
    std::string line;
    if (!std::getline(is, line)) throw io_error(path + ": empty records file");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw format_error(path, 1, e.what());
    }
    if (header.value("schema", "") != kRecordSchemaName) {
        throw format_error(path, 1, "not a records file (schema header missing)");
    }
    if (header.value("version", -1) != kRecordSchemaVersion) {
        throw format_error(path, 1, "unsupported records version");
    }
    std::vector<json> out;
    long line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw format_error(path, line_no, e.what());
        }
    }
    return out;
}

json run_record(const std::string& dataset, const std::string& config_hash, const json& cell,
                const RunResult& run, const std::string& curves_path) {
    json r{
        {"kind", "run"},
        {"dataset", dataset},
        {"config_hash", config_hash},
        {"seed", run.seed},
        {"failed", run.failed},
        {"accuracy", run.test_accuracy},
        {"best_valid_accuracy", run.best_valid_accuracy},
        {"best_epoch", run.best_epoch},
        {"curves", curves_path},
    };
    if (run.failed) r["failure"] = run.failure;
    if (!cell.is_null()) r["cell"] = cell;
    return r;
}

json aggregate_record(const std::string& dataset, const std::string& config_hash, const json& cell,
                      const Aggregate& agg) {
    json r{
        {"kind", "aggregate"},
        {"dataset", dataset},
        {"config_hash", config_hash},
        {"runs", agg.runs.size()},
        {"failed_runs", agg.n_failed},
        {"mean_accuracy", agg.mean_accuracy},
        {"std_accuracy", agg.std_accuracy},
    };
    if (!cell.is_null()) r["cell"] = cell;
    return r;
}

void write_curves(const std::string& path, const RunResult& run) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot write curves to " + path);
    os << "epoch,l_sup,l_unif,l_total,valid_acc,test_acc\n";
    char buf[160];
    for (size_t e = 0; e < run.epochs.size(); ++e) {
        const EpochStats& s = run.epochs[e];
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", e, s.l_sup, s.l_unif, s.l_total,
                      s.valid_acc, s.test_acc);
        os << buf;
    }
}

std::string format_aggregate_table(const std::vector<std::pair<std::string, Aggregate>>& rows) {
    size_t width = 4;
    for (const auto& [label, agg] : rows) width = std::max(width, label.size());
    std::ostringstream os;
    os << std::string(width, ' ') << "  mean_acc  std_acc  runs  failed\n";
    for (const auto& [label, agg] : rows) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "  %8.4f  %7.4f  %4zu  %6d\n", agg.mean_accuracy, agg.std_accuracy,
                      agg.runs.size(), agg.n_failed);
        os << label << std::string(width - label.size(), ' ') << buf;
    }
    return os.str();
}

}  // namespace grepool

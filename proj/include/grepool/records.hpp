#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "grepool/train.hpp"

namespace grepool {

// Line-delimited machine records. The first line is a schema header; every
// following line is one JSON record. parse(emit(r)) == r.
inline constexpr int kRecordSchemaVersion = 1;
inline constexpr const char* kRecordSchemaName = "grepool/records";

void write_records(const std::string& path, const std::vector<nlohmann::json>& records);
std::vector<nlohmann::json> read_records(const std::string& path);

nlohmann::json run_record(const std::string& dataset, const std::string& config_hash,
                          const nlohmann::json& cell, const RunResult& run, const std::string& curves_path);
nlohmann::json aggregate_record(const std::string& dataset, const std::string& config_hash,
                                const nlohmann::json& cell, const Aggregate& agg);

// Per-epoch loss curve CSV for one run.
void write_curves(const std::string& path, const RunResult& run);

// Fixed-width table of (cell label, aggregate) pairs.
std::string format_aggregate_table(const std::vector<std::pair<std::string, Aggregate>>& rows);

}  // namespace grepool

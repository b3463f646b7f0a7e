#pragma once

#include <stdexcept>
#include <string>

namespace grepool {

// Contract violations in the numeric layer.
struct shape_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct index_error : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// Softmax over a fully masked row has no defined value.
struct mask_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Surface-level categories. The CLI maps these onto its stable exit codes:
// config_error -> 2, io_error -> 3, divergence_error -> 4.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Ingestion failure tied to a specific line of an input file.
struct format_error : io_error {
    format_error(const std::string& file, long line, const std::string& what)
        : io_error(file + ":" + std::to_string(line) + ": " + what) {}
};

struct divergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace grepool

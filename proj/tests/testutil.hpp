#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "grepool/tensor.hpp"

namespace testutil {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

inline grepool::Tensor random_tensor(std::mt19937_64& rng, int rows, int cols, double lo = -2.0,
                                     double hi = 2.0) {
    grepool::Tensor t(rows, cols);
    for (auto& v : t.values()) v = uniform(rng, lo, hi);
    return t;
}

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline double max_abs_diff(const grepool::Tensor& a, const grepool::Tensor& b) {
    double m = 0;
    for (size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

// Fresh scratch directory under the system temp root.
inline std::string temp_dir(const std::string& tag) {
    static int counter = 0;
    const auto path = std::filesystem::temp_directory_path() /
                      ("grepool_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
    return path.string();
}

}  // namespace testutil

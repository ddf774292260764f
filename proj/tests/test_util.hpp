// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fastsae/rng.hpp"

namespace testutil {

inline std::filesystem::path source_dir() { return FASTSAE_SOURCE_DIR; }

inline std::filesystem::path fixture(const std::string& rel) { return source_dir() / rel; }

/// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("fastsae_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::vector<double> normal_vec(fastsae::Engine& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = nd(rng);
    return v;
}

inline std::vector<float> normal_vecf(fastsae::Engine& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(nd(rng));
    return v;
}

inline std::size_t randint(fastsae::Engine& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(fastsae::uniform_index(rng, hi - lo + 1));
}

}  // namespace testutil

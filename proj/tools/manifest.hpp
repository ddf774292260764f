// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fastsae::cli {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Record of one artifact-producing run, written next to its primary output.
/// Holds no timestamps or host data, so identical runs write identical manifests.
struct RunManifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::map<std::string, std::uint64_t> seeds;
    std::vector<std::filesystem::path> inputs;
    std::vector<std::filesystem::path> outputs;

    /// Digests every input and output, then writes `<first output>.manifest.json`.
    std::filesystem::path write() const;
};

}  // namespace fastsae::cli

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "fastsae/sae.hpp"

namespace fastsae {

/// Default steering sweep coefficients.
inline constexpr std::array<double, 7> kDefaultSweep{0, 15, 25, 50, 100, 150, 200};

struct SteerRequest {
    std::size_t feature = 0;
    double alpha = 0.0;
};

/// z' = z + alpha * d_k in double precision, no renormalization. alpha == 0 returns z unchanged.
std::vector<double> steer(std::span<const double> z, const SteerRequest& req, const SaeParams& p);

/// steer() for each coefficient, in order.
std::vector<std::vector<double>> sweep(std::span<const double> z, std::size_t feature,
                                       std::span<const double> coefficients, const SaeParams& p);

// Steering vector file: "SAES" | u32 version | u32 d_in | u32 feature | d_in x f32

inline constexpr char kSteerMagic[5] = "SAES";
inline constexpr std::uint32_t kSteerVersion = 1;

struct SteeringVector {
    std::uint32_t feature = 0;
    std::vector<float> direction;

    friend bool operator==(const SteeringVector&, const SteeringVector&) = default;
};

SteeringVector steering_vector(const SaeParams& p, std::size_t feature);
void write_steering_vector(std::ostream& os, const SteeringVector& v);
SteeringVector read_steering_vector(std::istream& is);
void export_steering_vector(const SaeParams& p, std::size_t feature, const std::filesystem::path& path);
SteeringVector import_steering_vector(const std::filesystem::path& path);

}  // namespace fastsae

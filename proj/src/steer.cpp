// SPDX-License-Identifier: Apache-2.0
#include "fastsae/steer.hpp"

#include <fstream>
#include <string>

#include "fastsae/detail/binary_io.hpp"
#include "fastsae/error.hpp"

namespace fastsae {

namespace {
void check_feature(const SaeParams& p, std::size_t k) {
    if (k >= p.d_sae) {
        throw ContractError("feature " + std::to_string(k) + " out of range (d_sae = " + std::to_string(p.d_sae) + ")");
    }
}
}  // namespace

std::vector<double> steer(std::span<const double> z, const SteerRequest& req, const SaeParams& p) {
    check_feature(p, req.feature);
    if (z.size() != p.d_in) throw ContractError("steer: activation length does not match d_in");
    std::vector<double> out(z.begin(), z.end());
    if (req.alpha == 0.0) return out;
    const auto d = p.dec_row(req.feature);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += req.alpha * static_cast<double>(d[j]);
    return out;
}

std::vector<std::vector<double>> sweep(std::span<const double> z, std::size_t feature,
                                       std::span<const double> coefficients, const SaeParams& p) {
    if (coefficients.empty()) throw ContractError("sweep needs at least one coefficient");
    std::vector<std::vector<double>> out;
    out.reserve(coefficients.size());
    for (double a : coefficients) out.push_back(steer(z, {feature, a}, p));
    return out;
}

SteeringVector steering_vector(const SaeParams& p, std::size_t feature) {
    check_feature(p, feature);
    const auto d = p.dec_row(feature);
    return {static_cast<std::uint32_t>(feature), std::vector<float>(d.begin(), d.end())};
}

void write_steering_vector(std::ostream& os, const SteeringVector& v) {
    if (v.direction.empty()) throw ContractError("steering vector is empty");
    detail::put_magic(os, kSteerMagic);
    detail::put_le<std::uint32_t>(os, kSteerVersion);
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(v.direction.size()));
    detail::put_le<std::uint32_t>(os, v.feature);
    detail::put_f32_array(os, v.direction);
    if (!os) throw IoError("steering vector write failed");
}

SteeringVector read_steering_vector(std::istream& is) {
    detail::expect_magic(is, kSteerMagic, "steering vector");
    const auto version = detail::require_le<std::uint32_t>(is, "steering version");
    if (version != kSteerVersion) throw FormatError("unsupported steering vector version " + std::to_string(version));
    const auto d_in = detail::require_le<std::uint32_t>(is, "d_in");
    if (d_in == 0) throw FormatError("steering vector declares d_in = 0");
    SteeringVector v;
    v.feature = detail::require_le<std::uint32_t>(is, "feature");
    v.direction.resize(d_in);
    if (!detail::get_f32_array(is, v.direction)) throw FormatError("truncated steering vector");
    return v;
}

void export_steering_vector(const SaeParams& p, std::size_t feature, const std::filesystem::path& path) {
    const auto v = steering_vector(p, feature);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write steering vector " + path.string());
    write_steering_vector(os, v);
}

SteeringVector import_steering_vector(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open steering vector " + path.string());
    return read_steering_vector(is);
}

}  // namespace fastsae

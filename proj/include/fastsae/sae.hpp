// SPDX-License-Identifier: Apache-2.0
#pragma once

// Sparse autoencoder parameters and the per-sample reference math.
//
// Decoder rows are the feature directions: W_dec holds d_sae rows of length
// d_in, and a reconstruction is b_dec + sum_k f_k * W_dec[k]. Everything here
// works on one input vector at a time; batched OpenMP kernels live in
// kernels.hpp and are tested against these.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace fastsae {

enum class Arch : std::uint32_t { standard = 0, jumprelu = 1 };

Arch parse_arch(std::string_view s);
std::string_view arch_name(Arch a);

template <class T>
struct BasicSaeParams {
    Arch arch = Arch::standard;
    std::size_t d_in = 0;
    std::size_t d_sae = 0;
    std::vector<T> w_enc;      // d_sae x d_in
    std::vector<T> b_enc;      // d_sae
    std::vector<T> w_dec;      // d_sae x d_in; row k is feature direction d_k
    std::vector<T> b_dec;      // d_in
    std::vector<T> threshold;  // d_sae for jumprelu, empty otherwise

    static BasicSaeParams zeros(Arch arch, std::size_t d_in, std::size_t d_sae);

    std::span<const T> enc_row(std::size_t k) const { return {w_enc.data() + k * d_in, d_in}; }
    std::span<const T> dec_row(std::size_t k) const { return {w_dec.data() + k * d_in, d_in}; }
    std::span<T> dec_row(std::size_t k) { return {w_dec.data() + k * d_in, d_in}; }

    /// Throws on inconsistent shapes or non-positive thresholds.
    void validate() const;

    template <class U>
    BasicSaeParams<U> cast() const {
        BasicSaeParams<U> o;
        o.arch = arch;
        o.d_in = d_in;
        o.d_sae = d_sae;
        o.w_enc.assign(w_enc.begin(), w_enc.end());
        o.b_enc.assign(b_enc.begin(), b_enc.end());
        o.w_dec.assign(w_dec.begin(), w_dec.end());
        o.b_dec.assign(b_dec.begin(), b_dec.end());
        o.threshold.assign(threshold.begin(), threshold.end());
        return o;
    }

    friend bool operator==(const BasicSaeParams&, const BasicSaeParams&) = default;
};

using SaeParams = BasicSaeParams<float>;

/// Gradients share the parameter layout.
template <class T>
using SaeGrads = BasicSaeParams<T>;

template <class T>
struct LossParts {
    T total = 0;
    T mse_part = 0;       // ||x - x_hat||^2
    T sparsity_part = 0;  // sum |f_i| (standard) or #{f_i != 0} (jumprelu)
    T lambda = 0;
};

/// z = W_enc x + b_enc
template <class T>
std::vector<T> pre_activation(std::span<const T> x, const BasicSaeParams<T>& p);

/// standard: max(0, z); jumprelu: z_i if z_i > theta_i else 0.
template <class T>
std::vector<T> encode(std::span<const T> x, const BasicSaeParams<T>& p);

template <class T>
std::vector<T> decode(std::span<const T> f, const BasicSaeParams<T>& p);

template <class T>
LossParts<T> loss(std::span<const T> x, const BasicSaeParams<T>& p, T lambda);

/// Gradients of loss() for one sample. For jumprelu, the threshold receives
/// rectangle-kernel pseudo-gradients of width `bandwidth`; elsewhere the
/// gradients are exact.
template <class T>
SaeGrads<T> backward(std::span<const T> x, const BasicSaeParams<T>& p, T lambda, T bandwidth);

/// Scales every decoder row to unit L2 norm. Throws naming the first zero row.
template <class T>
void normalize_decoder(BasicSaeParams<T>& p);

// --- checkpoint: "SAEC" | u32 version | u32 arch | u32 d_in | u32 d_sae
//                 | f32 W_enc | b_enc | W_dec | b_dec | [threshold]

inline constexpr char kCheckpointMagic[5] = "SAEC";
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(std::ostream& os, const SaeParams& p);
SaeParams load_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const SaeParams& p);
SaeParams load_checkpoint(const std::filesystem::path& path);

}  // namespace fastsae

// SPDX-License-Identifier: Apache-2.0
#include "fastsae/sae.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "fastsae/detail/binary_io.hpp"
#include "fastsae/error.hpp"

namespace fastsae {

Arch parse_arch(std::string_view s) {
    if (s == "standard") return Arch::standard;
    if (s == "jumprelu") return Arch::jumprelu;
    throw UsageError("unknown SAE architecture '" + std::string(s) + "' (expected standard or jumprelu)");
}

std::string_view arch_name(Arch a) { return a == Arch::jumprelu ? "jumprelu" : "standard"; }

template <class T>
BasicSaeParams<T> BasicSaeParams<T>::zeros(Arch arch, std::size_t d_in, std::size_t d_sae) {
    BasicSaeParams p;
    p.arch = arch;
    p.d_in = d_in;
    p.d_sae = d_sae;
    p.w_enc.assign(d_sae * d_in, T(0));
    p.b_enc.assign(d_sae, T(0));
    p.w_dec.assign(d_sae * d_in, T(0));
    p.b_dec.assign(d_in, T(0));
    if (arch == Arch::jumprelu) p.threshold.assign(d_sae, T(0));
    return p;
}

template <class T>
void BasicSaeParams<T>::validate() const {
    if (d_in < 1 || d_sae < 1) throw ContractError("SAE dimensions must be >= 1");
    const bool ok = w_enc.size() == d_sae * d_in && b_enc.size() == d_sae && w_dec.size() == d_sae * d_in &&
                    b_dec.size() == d_in &&
                    threshold.size() == (arch == Arch::jumprelu ? d_sae : std::size_t{0});
    if (!ok) throw ContractError("SAE parameter shapes inconsistent with d_in/d_sae");
    if (arch == Arch::jumprelu) {
        for (std::size_t i = 0; i < d_sae; ++i) {
            if (!(threshold[i] > T(0))) {
                throw ContractError("jumprelu threshold " + std::to_string(i) + " is not positive");
            }
        }
    }
}

namespace {

template <class T>
void check_input(std::span<const T> x, std::size_t n, const char* what) {
    if (x.size() != n) {
        throw ContractError(std::string(what) + " has length " + std::to_string(x.size()) + ", expected " +
                            std::to_string(n));
    }
}

}  // namespace

template <class T>
std::vector<T> pre_activation(std::span<const T> x, const BasicSaeParams<T>& p) {
    check_input(x, p.d_in, "input");
    std::vector<T> z(p.d_sae);
    for (std::size_t k = 0; k < p.d_sae; ++k) {
        T acc = p.b_enc[k];
        const auto row = p.enc_row(k);
        for (std::size_t j = 0; j < p.d_in; ++j) acc += row[j] * x[j];
        z[k] = acc;
    }
    return z;
}

template <class T>
std::vector<T> encode(std::span<const T> x, const BasicSaeParams<T>& p) {
    auto z = pre_activation(x, p);
    for (std::size_t k = 0; k < p.d_sae; ++k) {
        if (p.arch == Arch::standard) {
            z[k] = z[k] > T(0) ? z[k] : T(0);
        } else {
            z[k] = z[k] > p.threshold[k] ? z[k] : T(0);  // H(0) = 0
        }
    }
    return z;
}

template <class T>
std::vector<T> decode(std::span<const T> f, const BasicSaeParams<T>& p) {
    check_input(f, p.d_sae, "latent vector");
    std::vector<T> xhat(p.b_dec.begin(), p.b_dec.end());
    for (std::size_t k = 0; k < p.d_sae; ++k) {
        if (f[k] == T(0)) continue;
        const auto row = p.dec_row(k);
        for (std::size_t j = 0; j < p.d_in; ++j) xhat[j] += f[k] * row[j];
    }
    return xhat;
}

template <class T>
LossParts<T> loss(std::span<const T> x, const BasicSaeParams<T>& p, T lambda) {
    if (lambda < T(0)) throw ContractError("sparsity coefficient must be >= 0");
    const auto f = encode(x, p);
    const auto xhat = decode<T>(f, p);
    LossParts<T> out;
    out.lambda = lambda;
    for (std::size_t j = 0; j < p.d_in; ++j) {
        const T e = x[j] - xhat[j];
        out.mse_part += e * e;
    }
    for (T v : f) {
        if (p.arch == Arch::standard) {
            out.sparsity_part += std::abs(v);
        } else if (v != T(0)) {
            out.sparsity_part += T(1);
        }
    }
    out.total = out.mse_part + lambda * out.sparsity_part;
    return out;
}

template <class T>
SaeGrads<T> backward(std::span<const T> x, const BasicSaeParams<T>& p, T lambda, T bandwidth) {
    const auto z = pre_activation(x, p);
    std::vector<T> f(p.d_sae);
    std::vector<bool> active(p.d_sae);
    for (std::size_t k = 0; k < p.d_sae; ++k) {
        const T gate = p.arch == Arch::standard ? T(0) : p.threshold[k];
        active[k] = z[k] > gate;
        f[k] = active[k] ? z[k] : T(0);
    }
    const auto xhat = decode<T>(f, p);

    SaeGrads<T> g = SaeGrads<T>::zeros(p.arch, p.d_in, p.d_sae);
    std::vector<T> dxhat(p.d_in);
    for (std::size_t j = 0; j < p.d_in; ++j) {
        dxhat[j] = T(2) * (xhat[j] - x[j]);
        g.b_dec[j] = dxhat[j];
    }
    for (std::size_t k = 0; k < p.d_sae; ++k) {
        const auto drow = p.dec_row(k);
        T gf = 0;  // dL_mse / df_k
        for (std::size_t j = 0; j < p.d_in; ++j) {
            gf += drow[j] * dxhat[j];
            g.w_dec[k * p.d_in + j] = f[k] * dxhat[j];
        }
        T dz = 0;
        if (p.arch == Arch::standard) {
            if (active[k]) dz = gf + lambda;
        } else {
            if (active[k]) dz = gf;
            const T theta = p.threshold[k];
            if (std::abs(z[k] - theta) <= bandwidth / T(2)) {
                g.threshold[k] = -(theta / bandwidth) * gf - lambda / bandwidth;
            }
        }
        g.b_enc[k] = dz;
        for (std::size_t j = 0; j < p.d_in; ++j) g.w_enc[k * p.d_in + j] = dz * x[j];
    }
    return g;
}

template <class T>
void normalize_decoder(BasicSaeParams<T>& p) {
    for (std::size_t k = 0; k < p.d_sae; ++k) {
        auto row = p.dec_row(k);
        T sq = 0;
        for (T v : row) sq += v * v;
        if (!(sq > T(0))) throw ContractError("decoder row " + std::to_string(k) + " has zero norm");
        const T inv = T(1) / std::sqrt(sq);
        for (T& v : row) v *= inv;
    }
}

#define FASTSAE_INSTANTIATE(T)                                                                    \
    template struct BasicSaeParams<T>;                                                            \
    template std::vector<T> pre_activation<T>(std::span<const T>, const BasicSaeParams<T>&);      \
    template std::vector<T> encode<T>(std::span<const T>, const BasicSaeParams<T>&);              \
    template std::vector<T> decode<T>(std::span<const T>, const BasicSaeParams<T>&);              \
    template LossParts<T> loss<T>(std::span<const T>, const BasicSaeParams<T>&, T);               \
    template SaeGrads<T> backward<T>(std::span<const T>, const BasicSaeParams<T>&, T, T);         \
    template void normalize_decoder<T>(BasicSaeParams<T>&);

FASTSAE_INSTANTIATE(float)
FASTSAE_INSTANTIATE(double)
#undef FASTSAE_INSTANTIATE

// ---------------------------------------------------------------------------
// checkpoint

void save_checkpoint(std::ostream& os, const SaeParams& p) {
    p.validate();
    detail::put_magic(os, kCheckpointMagic);
    detail::put_le<std::uint32_t>(os, kCheckpointVersion);
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.arch));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.d_in));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.d_sae));
    detail::put_f32_array(os, p.w_enc);
    detail::put_f32_array(os, p.b_enc);
    detail::put_f32_array(os, p.w_dec);
    detail::put_f32_array(os, p.b_dec);
    if (p.arch == Arch::jumprelu) detail::put_f32_array(os, p.threshold);
    if (!os) throw IoError("checkpoint write failed");
}

SaeParams load_checkpoint(std::istream& is) {
    detail::expect_magic(is, kCheckpointMagic, "SAE checkpoint");
    const auto version = detail::require_le<std::uint32_t>(is, "checkpoint version");
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto arch = detail::require_le<std::uint32_t>(is, "arch");
    if (arch > 1) throw FormatError("unknown SAE architecture tag " + std::to_string(arch));
    const auto d_in = detail::require_le<std::uint32_t>(is, "d_in");
    const auto d_sae = detail::require_le<std::uint32_t>(is, "d_sae");
    if (d_in == 0 || d_sae == 0) throw FormatError("checkpoint declares a zero dimension");
    auto p = SaeParams::zeros(static_cast<Arch>(arch), d_in, d_sae);
    bool ok = detail::get_f32_array(is, p.w_enc) && detail::get_f32_array(is, p.b_enc) &&
              detail::get_f32_array(is, p.w_dec) && detail::get_f32_array(is, p.b_dec);
    if (ok && p.arch == Arch::jumprelu) ok = detail::get_f32_array(is, p.threshold);
    if (!ok) throw FormatError("truncated checkpoint payload");
    if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint payload");
    return p;
}

void save_checkpoint(const std::filesystem::path& path, const SaeParams& p) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint " + path.string());
    save_checkpoint(os, p);
}

SaeParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint " + path.string());
    return load_checkpoint(is);
}

}  // namespace fastsae

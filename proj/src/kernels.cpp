// SPDX-License-Identifier: Apache-2.0
#include "fastsae/kernels.hpp"

#include <omp.h>

#include <cmath>

#include "fastsae/error.hpp"

namespace fastsae {

int max_threads() { return omp_get_max_threads(); }
void set_threads(int n) { omp_set_num_threads(n); }

template <class T>
void Workspace<T>::resize(std::size_t rows, std::size_t d_in, std::size_t d_sae) {
    pre.resize(rows * d_sae);
    act.resize(rows * d_sae);
    recon.resize(rows * d_in);
    dxhat.resize(rows * d_in);
    dz.resize(rows * d_sae);
    dtheta.resize(rows * d_sae);
    row_mse.resize(rows);
    row_sparsity.resize(rows);
}

template <class T>
void forward_batch(const BasicSaeParams<T>& p, std::span<const T> x, std::size_t rows, Workspace<T>& ws,
                   Exec exec) {
    const std::size_t d_in = p.d_in;
    const std::size_t d_sae = p.d_sae;
    if (x.size() != rows * d_in) throw ContractError("forward_batch: input size does not match rows x d_in");
    ws.resize(rows, d_in, d_sae);
    const bool jump = p.arch == Arch::jumprelu;
    const auto n = static_cast<std::ptrdiff_t>(rows);

#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::ptrdiff_t b = 0; b < n; ++b) {
        const T* xb = x.data() + b * d_in;
        T* zb = ws.pre.data() + b * d_sae;
        T* fb = ws.act.data() + b * d_sae;
        T* rb = ws.recon.data() + b * d_in;
        for (std::size_t k = 0; k < d_sae; ++k) {
            const T* w = p.w_enc.data() + k * d_in;
            T acc = p.b_enc[k];
            for (std::size_t j = 0; j < d_in; ++j) acc += w[j] * xb[j];
            zb[k] = acc;
            const T gate = jump ? p.threshold[k] : T(0);
            fb[k] = acc > gate ? acc : T(0);
        }
        for (std::size_t j = 0; j < d_in; ++j) rb[j] = p.b_dec[j];
        for (std::size_t k = 0; k < d_sae; ++k) {
            const T fk = fb[k];
            if (fk == T(0)) continue;
            const T* d = p.w_dec.data() + k * d_in;
            for (std::size_t j = 0; j < d_in; ++j) rb[j] += fk * d[j];
        }
    }
}

template <class T>
void squared_error_batch(const BasicSaeParams<T>& p, std::span<const T> x, std::size_t rows,
                         std::span<double> out, Workspace<T>& ws, Exec exec) {
    if (out.size() != rows) throw ContractError("squared_error_batch: output size mismatch");
    forward_batch(p, x, rows, ws, exec);
    const std::size_t d_in = p.d_in;
    const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::ptrdiff_t b = 0; b < n; ++b) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d_in; ++j) {
            const double e = static_cast<double>(x[b * d_in + j]) - static_cast<double>(ws.recon[b * d_in + j]);
            acc += e * e;
        }
        out[b] = acc;
    }
}

template <class T>
LossParts<double> backward_batch(const BasicSaeParams<T>& p, std::span<const T> x, std::size_t rows, T lambda,
                                 T bandwidth, SaeGrads<T>& g, Workspace<T>& ws, Exec exec) {
    if (rows == 0) throw ContractError("backward_batch on an empty batch");
    if (lambda < T(0)) throw ContractError("sparsity coefficient must be >= 0");
    forward_batch(p, x, rows, ws, exec);

    const std::size_t d_in = p.d_in;
    const std::size_t d_sae = p.d_sae;
    const bool jump = p.arch == Arch::jumprelu;
    const T inv_rows = T(1) / static_cast<T>(rows);
    const T lam = lambda * inv_rows;
    const auto n = static_cast<std::ptrdiff_t>(rows);

    if (g.arch != p.arch || g.d_in != d_in || g.d_sae != d_sae) g = SaeGrads<T>::zeros(p.arch, d_in, d_sae);

    // Per-row: residual, loss parts, latent gradients.
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::ptrdiff_t b = 0; b < n; ++b) {
        const T* xb = x.data() + b * d_in;
        const T* rb = ws.recon.data() + b * d_in;
        T* gb = ws.dxhat.data() + b * d_in;
        double mse = 0.0;
        for (std::size_t j = 0; j < d_in; ++j) {
            const T e = rb[j] - xb[j];
            mse += static_cast<double>(e) * static_cast<double>(e);
            gb[j] = T(2) * e * inv_rows;
        }
        ws.row_mse[b] = mse;

        const T* zb = ws.pre.data() + b * d_sae;
        const T* fb = ws.act.data() + b * d_sae;
        T* dzb = ws.dz.data() + b * d_sae;
        T* dtb = ws.dtheta.data() + b * d_sae;
        double sparsity = 0.0;
        for (std::size_t k = 0; k < d_sae; ++k) {
            const bool active = fb[k] != T(0);
            const bool in_band = jump && std::abs(zb[k] - p.threshold[k]) <= bandwidth / T(2);
            T gf = 0;
            if (active || in_band) {
                const T* d = p.w_dec.data() + k * d_in;
                for (std::size_t j = 0; j < d_in; ++j) gf += d[j] * gb[j];
            }
            if (jump) {
                dzb[k] = active ? gf : T(0);
                dtb[k] = in_band ? -(p.threshold[k] / bandwidth) * gf - lam / bandwidth : T(0);
                if (active) sparsity += 1.0;
            } else {
                dzb[k] = active ? gf + lam : T(0);
                sparsity += static_cast<double>(fb[k]);
            }
        }
        ws.row_sparsity[b] = sparsity;
    }

    // Per-feature parameter gradients, summed over rows in order.
    const auto n_feat = static_cast<std::ptrdiff_t>(d_sae);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::ptrdiff_t k = 0; k < n_feat; ++k) {
        T* gdec = g.w_dec.data() + k * d_in;
        T* genc = g.w_enc.data() + k * d_in;
        std::fill(gdec, gdec + d_in, T(0));
        std::fill(genc, genc + d_in, T(0));
        T gbenc = 0;
        T gtheta = 0;
        for (std::size_t b = 0; b < rows; ++b) {
            const T fk = ws.act[b * d_sae + k];
            if (fk != T(0)) {
                const T* gb = ws.dxhat.data() + b * d_in;
                for (std::size_t j = 0; j < d_in; ++j) gdec[j] += fk * gb[j];
            }
            const T dzk = ws.dz[b * d_sae + k];
            if (dzk != T(0)) {
                const T* xb = x.data() + b * d_in;
                for (std::size_t j = 0; j < d_in; ++j) genc[j] += dzk * xb[j];
                gbenc += dzk;
            }
            if (jump) gtheta += ws.dtheta[b * d_sae + k];
        }
        g.b_enc[k] = gbenc;
        if (jump) g.threshold[k] = gtheta;
    }

    const auto n_dim = static_cast<std::ptrdiff_t>(d_in);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::ptrdiff_t j = 0; j < n_dim; ++j) {
        T acc = 0;
        for (std::size_t b = 0; b < rows; ++b) acc += ws.dxhat[b * d_in + j];
        g.b_dec[j] = acc;
    }

    LossParts<double> out;
    out.lambda = static_cast<double>(lambda);
    for (std::size_t b = 0; b < rows; ++b) {
        out.mse_part += ws.row_mse[b];
        out.sparsity_part += ws.row_sparsity[b];
    }
    out.mse_part /= static_cast<double>(rows);
    out.sparsity_part /= static_cast<double>(rows);
    out.total = out.mse_part + out.lambda * out.sparsity_part;
    return out;
}

#define FASTSAE_INSTANTIATE(T)                                                                                \
    template struct Workspace<T>;                                                                             \
    template void forward_batch<T>(const BasicSaeParams<T>&, std::span<const T>, std::size_t, Workspace<T>&, \
                                   Exec);                                                                     \
    template void squared_error_batch<T>(const BasicSaeParams<T>&, std::span<const T>, std::size_t,          \
                                         std::span<double>, Workspace<T>&, Exec);                             \
    template LossParts<double> backward_batch<T>(const BasicSaeParams<T>&, std::span<const T>, std::size_t, T, \
                                                 T, SaeGrads<T>&, Workspace<T>&, Exec);

FASTSAE_INSTANTIATE(float)
FASTSAE_INSTANTIATE(double)
#undef FASTSAE_INSTANTIATE

}  // namespace fastsae

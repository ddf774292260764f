// SPDX-License-Identifier: Apache-2.0
#pragma once

// Batched SAE kernels. Parallel loops run over independent rows or over
// independent output features, and every reduction is a fixed-order serial
// loop inside one iteration, so Exec::parallel is bit-identical to
// Exec::serial at any thread count. The per-sample functions in sae.hpp are
// the reference these are tested against.

#include <span>
#include <vector>

#include "fastsae/sae.hpp"

namespace fastsae {

enum class Exec { serial, parallel };

template <class T>
struct Workspace {
    std::vector<T> pre;    // rows x d_sae
    std::vector<T> act;    // rows x d_sae
    std::vector<T> recon;  // rows x d_in
    std::vector<T> dxhat;  // rows x d_in
    std::vector<T> dz;     // rows x d_sae
    std::vector<T> dtheta; // rows x d_sae (jumprelu)
    std::vector<double> row_mse;
    std::vector<double> row_sparsity;

    void resize(std::size_t rows, std::size_t d_in, std::size_t d_sae);
};

/// Fills ws.pre, ws.act and ws.recon for `rows` inputs laid out row-major in x.
template <class T>
void forward_batch(const BasicSaeParams<T>& p, std::span<const T> x, std::size_t rows, Workspace<T>& ws,
                   Exec exec = Exec::parallel);

/// Per-row squared reconstruction error ||x - x_hat||^2 (accumulated in double).
template <class T>
void squared_error_batch(const BasicSaeParams<T>& p, std::span<const T> x, std::size_t rows,
                         std::span<double> out, Workspace<T>& ws, Exec exec = Exec::parallel);

/// Mean-over-rows loss and its gradient. `grads` is resized as needed.
template <class T>
LossParts<double> backward_batch(const BasicSaeParams<T>& p, std::span<const T> x, std::size_t rows, T lambda,
                                 T bandwidth, SaeGrads<T>& grads, Workspace<T>& ws, Exec exec = Exec::parallel);

/// Number of OpenMP threads a parallel region would use.
int max_threads();
void set_threads(int n);

}  // namespace fastsae

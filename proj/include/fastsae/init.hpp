// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fastsae/actstream.hpp"
#include "fastsae/sae.hpp"

namespace fastsae {

/// rows x cols, entries i.i.d. U[-b, b] with b = sqrt(6 / cols).
std::vector<float> kaiming_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed);

/// Weighted geometric median problem: minimize sum_i w_i ||m - p_i||.
struct WeiszfeldProblem {
    std::size_t dim = 0;
    std::vector<double> points;   // n x dim, row-major
    std::vector<double> weights;  // n, all > 0; empty means all ones
    double ftol = 1e-20;
    double eps_div = 1e-12;
    std::size_t max_iter = 10000;

    std::size_t count() const noexcept { return dim ? points.size() / dim : 0; }
    void validate() const;
};

struct WeiszfeldResult {
    std::vector<double> median;
    double objective = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// Objective of every accepted iterate, starting with m_0.
    std::vector<double> objective_trace;
};

/// Weighted sum of distances from m to the problem's points.
double weiszfeld_objective(const WeiszfeldProblem& prob, std::span<const double> m);

/// Weiszfeld iteration from the weighted mean (or `start`). Stops when the
/// relative objective change is <= ftol, when an update fails to lower the
/// objective (floating-point fixed point, counted as converged), or at
/// max_iter with converged = false.
WeiszfeldResult geometric_median(const WeiszfeldProblem& prob,
                                 std::optional<std::span<const double>> start = std::nullopt);

struct InitConfig {
    Arch arch = Arch::jumprelu;
    std::size_t d_sae = 0;
    std::uint64_t seed = 42;
    float init_threshold = 0.001f;
    bool normalize_decoder = true;
    double gm_ftol = 1e-20;
    std::size_t gm_max_iter = 10000;
};

struct InitReport {
    std::size_t gm_iterations = 0;
    bool gm_converged = false;
};

/// Kaiming-uniform W_enc and W_dec (independent derived seeds), decoder rows
/// normalized, b_enc = 0, b_dec = geometric median of the sample, threshold = init_threshold.
SaeParams init_sae(const InitConfig& cfg, const ActivationBatch& sample, InitReport* report = nullptr);

}  // namespace fastsae

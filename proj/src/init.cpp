// SPDX-License-Identifier: Apache-2.0
#include "fastsae/init.hpp"

#include <cmath>
#include <numeric>

#include "fastsae/error.hpp"
#include "fastsae/rng.hpp"

namespace fastsae {

std::vector<float> kaiming_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    if (rows < 1 || cols < 1) throw ContractError("kaiming_uniform needs rows, cols >= 1");
    const double bound = std::sqrt(6.0 / static_cast<double>(cols));
    Engine rng(seed);
    std::vector<float> out(rows * cols);
    for (float& v : out) {
        v = static_cast<float>((2.0 * uniform01(rng) - 1.0) * bound);
        // Rounding to float can land a hair outside the bound.
        v = std::clamp(v, static_cast<float>(-bound), static_cast<float>(bound));
    }
    return out;
}

void WeiszfeldProblem::validate() const {
    if (dim < 1) throw ContractError("geometric median: dim must be >= 1");
    if (points.empty() || points.size() % dim != 0) {
        throw ContractError("geometric median: need n >= 1 points of dimension dim");
    }
    if (!weights.empty()) {
        if (weights.size() != count()) throw ContractError("geometric median: one weight per point required");
        for (double w : weights) {
            if (!(w > 0.0)) throw ContractError("geometric median: weights must be positive");
        }
    }
    if (!(ftol > 0.0)) throw ContractError("geometric median: ftol must be positive");
    if (!(eps_div > 0.0)) throw ContractError("geometric median: eps_div must be positive");
}

namespace {

inline double weight_of(const WeiszfeldProblem& prob, std::size_t i) {
    return prob.weights.empty() ? 1.0 : prob.weights[i];
}

// Distances from m to every point; parallel over points, deterministic.
void distances(const WeiszfeldProblem& prob, std::span<const double> m, std::vector<double>& dist) {
    const std::size_t n = prob.count();
    const std::size_t d = prob.dim;
    dist.resize(n);
    const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n * d > 65536)
    for (std::ptrdiff_t i = 0; i < nn; ++i) {
        const double* p = prob.points.data() + i * d;
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double e = p[j] - m[j];
            s += e * e;
        }
        dist[i] = std::sqrt(s);
    }
}

double objective_from(const WeiszfeldProblem& prob, const std::vector<double>& dist) {
    double f = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) f += weight_of(prob, i) * dist[i];
    return f;
}

// out = sum_i c_i p_i / sum_i c_i, parallel over coordinates.
void weighted_mean(const WeiszfeldProblem& prob, const std::vector<double>& coef, std::vector<double>& out) {
    const std::size_t n = prob.count();
    const std::size_t d = prob.dim;
    double total = 0.0;
    for (double c : coef) total += c;
    out.assign(d, 0.0);
    const auto nd = static_cast<std::ptrdiff_t>(d);
#pragma omp parallel for schedule(static) if (n * d > 65536)
    for (std::ptrdiff_t j = 0; j < nd; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += coef[i] * prob.points[i * d + j];
        out[j] = acc / total;
    }
}

}  // namespace

double weiszfeld_objective(const WeiszfeldProblem& prob, std::span<const double> m) {
    std::vector<double> dist;
    distances(prob, m, dist);
    return objective_from(prob, dist);
}

WeiszfeldResult geometric_median(const WeiszfeldProblem& prob, std::optional<std::span<const double>> start) {
    prob.validate();
    const std::size_t n = prob.count();

    WeiszfeldResult res;
    std::vector<double> coef(n);
    if (start) {
        if (start->size() != prob.dim) throw ContractError("geometric median: start has wrong dimension");
        res.median.assign(start->begin(), start->end());
    } else {
        for (std::size_t i = 0; i < n; ++i) coef[i] = weight_of(prob, i);
        weighted_mean(prob, coef, res.median);
    }

    std::vector<double> dist;
    distances(prob, res.median, dist);
    res.objective = objective_from(prob, dist);
    res.objective_trace.push_back(res.objective);

    std::vector<double> next;
    std::vector<double> next_dist;
    for (std::size_t it = 0; it < prob.max_iter; ++it) {
        for (std::size_t i = 0; i < n; ++i) coef[i] = weight_of(prob, i) / std::max(dist[i], prob.eps_div);
        weighted_mean(prob, coef, next);
        distances(prob, next, next_dist);
        const double f_next = objective_from(prob, next_dist);
        res.iterations = it + 1;

        if (!(f_next < res.objective)) {
            // No decrease: the iteration has hit its floating-point fixed point.
            res.converged = true;
            return res;
        }
        const double change = res.objective - f_next;
        const bool stop = change <= prob.ftol * res.objective;
        res.median.swap(next);
        dist.swap(next_dist);
        res.objective = f_next;
        res.objective_trace.push_back(f_next);
        if (stop) {
            res.converged = true;
            return res;
        }
    }
    return res;
}

SaeParams init_sae(const InitConfig& cfg, const ActivationBatch& sample, InitReport* report) {
    if (sample.empty()) throw ContractError("init_sae needs a non-empty activation sample");
    if (cfg.d_sae < 1) throw ContractError("init_sae: d_sae must be >= 1");
    const std::size_t d_in = sample.d_in();

    auto p = SaeParams::zeros(cfg.arch, d_in, cfg.d_sae);
    p.w_enc = kaiming_uniform(cfg.d_sae, d_in, derive_seed(cfg.seed, 0x656e63));  // "enc"
    p.w_dec = kaiming_uniform(cfg.d_sae, d_in, derive_seed(cfg.seed, 0x646563));  // "dec"
    if (cfg.normalize_decoder) normalize_decoder(p);
    if (cfg.arch == Arch::jumprelu) {
        if (!(cfg.init_threshold > 0.0f)) throw ContractError("init threshold must be positive");
        std::fill(p.threshold.begin(), p.threshold.end(), cfg.init_threshold);
    }

    WeiszfeldProblem prob;
    prob.dim = d_in;
    prob.points.assign(sample.values().begin(), sample.values().end());
    prob.ftol = cfg.gm_ftol;
    prob.max_iter = cfg.gm_max_iter;
    const auto gm = geometric_median(prob);
    for (std::size_t j = 0; j < d_in; ++j) p.b_dec[j] = static_cast<float>(gm.median[j]);
    if (report) {
        report->gm_iterations = gm.iterations;
        report->gm_converged = gm.converged;
    }
    return p;
}

}  // namespace fastsae

// SPDX-License-Identifier: Apache-2.0
// Times one training-step gradient three ways: the per-sample reference,
// the batched kernel with OpenMP off, and the batched kernel with OpenMP on.
//
//   bench_kernels [--d-in N] [--d-sae N] [--rows N] [--reps N]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#include "fastsae/kernels.hpp"
#include "fastsae/rng.hpp"

using namespace fastsae;

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double best_ms(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        f();
        best = std::min(best, std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    }
    return best;
}

std::vector<float> uniform(Engine& rng, std::size_t n, double scale) {
    std::vector<float> v(n);
    for (float& x : v) x = static_cast<float>((2.0 * uniform01(rng) - 1.0) * scale);
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t d_in = 64, d_sae = 512, rows = 128;
    int reps = 20;
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::size_t v = std::strtoull(argv[i + 1], nullptr, 10);
        if (!std::strcmp(argv[i], "--d-in")) d_in = v;
        else if (!std::strcmp(argv[i], "--d-sae")) d_sae = v;
        else if (!std::strcmp(argv[i], "--rows")) rows = v;
        else if (!std::strcmp(argv[i], "--reps")) reps = static_cast<int>(v);
        else {
            std::fprintf(stderr, "unknown option %s\n", argv[i]);
            return 2;
        }
    }

    Engine rng(1);
    auto p = SaeParams::zeros(Arch::jumprelu, d_in, d_sae);
    p.w_enc = uniform(rng, d_in * d_sae, 0.3);
    p.w_dec = uniform(rng, d_in * d_sae, 0.3);
    normalize_decoder(p);
    std::fill(p.threshold.begin(), p.threshold.end(), 0.05f);
    const auto x = uniform(rng, rows * d_in, 1.0);

    SaeGrads<float> g;
    Workspace<float> ws;
    volatile float sink = 0;

    const double ref = best_ms(reps, [&] {
        auto acc = SaeGrads<float>::zeros(p.arch, d_in, d_sae);
        for (std::size_t b = 0; b < rows; ++b) {
            const auto gi = backward<float>(std::span<const float>(x.data() + b * d_in, d_in), p, 0.01f, 0.001f);
            for (std::size_t i = 0; i < acc.w_enc.size(); ++i) acc.w_enc[i] += gi.w_enc[i];
        }
        sink = acc.w_enc[0];
    });
    const double serial = best_ms(reps, [&] {
        backward_batch<float>(p, x, rows, 0.01f, 0.001f, g, ws, Exec::serial);
        sink = g.w_enc[0];
    });
    const double parallel = best_ms(reps, [&] {
        backward_batch<float>(p, x, rows, 0.01f, 0.001f, g, ws, Exec::parallel);
        sink = g.w_enc[0];
    });
    (void)sink;

    std::printf("d_in=%zu d_sae=%zu rows=%zu threads=%d (best of %d)\n", d_in, d_sae, rows, max_threads(), reps);
    std::printf("variant\tms\tspeedup_vs_reference\n");
    std::printf("reference\t%.3f\t1.00\n", ref);
    std::printf("batched_serial\t%.3f\t%.2f\n", serial, ref / serial);
    std::printf("batched_parallel\t%.3f\t%.2f\n", parallel, ref / parallel);
    return 0;
}

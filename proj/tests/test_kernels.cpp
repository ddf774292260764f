// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fastsae/error.hpp"
#include "fastsae/kernels.hpp"
#include "test_util.hpp"

using namespace fastsae;

namespace {

template <class T>
BasicSaeParams<T> random_params(Engine& rng, Arch arch, std::size_t d_in, std::size_t d_sae) {
    auto p = BasicSaeParams<T>::zeros(arch, d_in, d_sae);
    auto fill = [&](std::vector<T>& v, double s) {
        const auto src = testutil::normal_vec(rng, v.size(), s);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(src[i]);
    };
    fill(p.w_enc, 0.5);
    fill(p.b_enc, 0.2);
    fill(p.w_dec, 0.5);
    fill(p.b_dec, 0.2);
    for (auto& t : p.threshold) t = static_cast<T>(0.05 + 0.3 * uniform01(rng));
    return p;
}

template <class T>
std::vector<T> random_x(Engine& rng, std::size_t n) {
    const auto v = testutil::normal_vec(rng, n);
    return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE_TEMPLATE("forward_batch matches the per-sample reference exactly", T, float, double) {
    Engine rng(1);
    for (Arch arch : {Arch::standard, Arch::jumprelu}) {
        const std::size_t d_in = 7, d_sae = 19, rows = 23;
        const auto p = random_params<T>(rng, arch, d_in, d_sae);
        const auto x = random_x<T>(rng, rows * d_in);
        Workspace<T> ws;
        forward_batch<T>(p, x, rows, ws, Exec::serial);
        for (std::size_t b = 0; b < rows; ++b) {
            const std::span<const T> xb(x.data() + b * d_in, d_in);
            const auto f = encode<T>(xb, p);
            const auto r = decode<T>(f, p);
            for (std::size_t k = 0; k < d_sae; ++k) CHECK(ws.act[b * d_sae + k] == f[k]);
            for (std::size_t j = 0; j < d_in; ++j) CHECK(ws.recon[b * d_in + j] == r[j]);
        }
    }
}

TEST_CASE("backward_batch equals the mean of per-sample gradients") {
    Engine rng(2);
    for (Arch arch : {Arch::standard, Arch::jumprelu}) {
        const std::size_t d_in = 5, d_sae = 11, rows = 17;
        auto p = random_params<double>(rng, arch, d_in, d_sae);
        const auto x = random_x<double>(rng, rows * d_in);
        // Put a few pre-activations inside the threshold band.
        const double lambda = arch == Arch::standard ? 5.0 : 0.01;
        const double bw = 0.5;
        SaeGrads<double> g;
        Workspace<double> ws;
        const auto lp = backward_batch<double>(p, x, rows, lambda, bw, g, ws, Exec::serial);

        auto mean = SaeGrads<double>::zeros(arch, d_in, d_sae);
        double mse = 0, sp = 0;
        for (std::size_t b = 0; b < rows; ++b) {
            const std::span<const double> xb(x.data() + b * d_in, d_in);
            const auto gi = backward<double>(xb, p, lambda, bw);
            const auto li = loss<double>(xb, p, lambda);
            mse += li.mse_part;
            sp += li.sparsity_part;
            auto acc = [&](std::vector<double>& dst, const std::vector<double>& src) {
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i] / rows;
            };
            acc(mean.w_enc, gi.w_enc);
            acc(mean.b_enc, gi.b_enc);
            acc(mean.w_dec, gi.w_dec);
            acc(mean.b_dec, gi.b_dec);
            acc(mean.threshold, gi.threshold);
        }
        auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
            REQUIRE(a.size() == b.size());
            for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12 * (1 + std::abs(b[i])));
        };
        close(g.w_enc, mean.w_enc);
        close(g.b_enc, mean.b_enc);
        close(g.w_dec, mean.w_dec);
        close(g.b_dec, mean.b_dec);
        close(g.threshold, mean.threshold);
        CHECK(lp.mse_part == doctest::Approx(mse / rows).epsilon(1e-12));
        CHECK(lp.sparsity_part == doctest::Approx(sp / rows).epsilon(1e-12));
        CHECK(lp.total == doctest::Approx(lp.mse_part + lambda * lp.sparsity_part).epsilon(1e-15));
        if (arch == Arch::jumprelu) {
            bool any = false;
            for (double t : g.threshold) any = any || t != 0.0;
            CHECK(any);
        }
    }
}

TEST_CASE("parallel execution is bit-identical to serial") {
    Engine rng(3);
    const int saved = max_threads();
    for (int threads : {1, 2, 4}) {
        set_threads(threads);
        for (Arch arch : {Arch::standard, Arch::jumprelu}) {
            const std::size_t d_in = 16, d_sae = 64, rows = 130;
            const auto p = random_params<float>(rng, arch, d_in, d_sae);
            const auto x = random_x<float>(rng, rows * d_in);
            SaeGrads<float> gs, gp;
            Workspace<float> ws, wp;
            const auto ls = backward_batch<float>(p, x, rows, 0.5f, 0.3f, gs, ws, Exec::serial);
            const auto lpar = backward_batch<float>(p, x, rows, 0.5f, 0.3f, gp, wp, Exec::parallel);
            CHECK(gs == gp);
            CHECK(ls.total == lpar.total);
            CHECK(ws.recon == wp.recon);

            std::vector<double> es(rows), ep(rows);
            squared_error_batch<float>(p, x, rows, es, ws, Exec::serial);
            squared_error_batch<float>(p, x, rows, ep, wp, Exec::parallel);
            CHECK(es == ep);
        }
    }
    set_threads(saved);
}

TEST_CASE("kernel contracts") {
    const auto p = SaeParams::zeros(Arch::standard, 3, 4);
    Workspace<float> ws;
    SaeGrads<float> g;
    const std::vector<float> x(5, 0.0f);
    CHECK_THROWS_AS(forward_batch<float>(p, x, 2, ws), ContractError);
    CHECK_THROWS_AS(backward_batch<float>(p, std::span<const float>{}, 0, 1.0f, 0.001f, g, ws), ContractError);
    const std::vector<float> x3(3, 0.0f);
    CHECK_THROWS_AS(backward_batch<float>(p, x3, 1, -1.0f, 0.001f, g, ws), ContractError);
    std::vector<double> out(2);
    CHECK_THROWS_AS(squared_error_batch<float>(p, x3, 1, out, ws), ContractError);
}

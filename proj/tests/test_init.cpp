// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fastsae/error.hpp"
#include "fastsae/init.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fastsae;

namespace {

WeiszfeldProblem problem(std::size_t dim, const std::vector<std::vector<double>>& pts, std::vector<double> w = {}) {
    WeiszfeldProblem p;
    p.dim = dim;
    for (const auto& q : pts) p.points.insert(p.points.end(), q.begin(), q.end());
    p.weights = std::move(w);
    return p;
}

}  // namespace

TEST_CASE("kaiming uniform: bounds, moments, determinism") {
    const std::size_t rows = 512, cols = 64;
    const auto w = kaiming_uniform(rows, cols, 42);
    const double b = std::sqrt(6.0 / cols);
    double sum = 0, sq = 0;
    for (float v : w) {
        CHECK(std::abs(v) <= static_cast<float>(b));
        sum += v;
        sq += double(v) * v;
    }
    const double n = double(w.size());
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    // U[-b, b]: mean 0, variance b^2 / 3 = 2 / cols.
    CHECK(std::abs(mean) < 4 * std::sqrt(b * b / 3 / n));
    CHECK(var == doctest::Approx(2.0 / cols).epsilon(0.02));
    CHECK(kaiming_uniform(rows, cols, 42) == w);
    CHECK(kaiming_uniform(rows, cols, 43) != w);
    CHECK_THROWS_AS(kaiming_uniform(0, 3, 1), ContractError);
}

TEST_CASE("geometric median: small examples") {
    // 1-D: the median of {0, 1, 10} is 1.
    auto r = geometric_median(problem(1, {{0}, {1}, {10}}));
    CHECK(r.converged);
    CHECK(r.median[0] == doctest::Approx(1.0).epsilon(1e-6));

    // Equilateral triangle: the centroid.
    const double h = std::sqrt(3.0) / 2;
    r = geometric_median(problem(2, {{0, 0}, {1, 0}, {0.5, h}}));
    CHECK(r.median[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(r.median[1] == doctest::Approx(h / 3).epsilon(1e-9));

    // One point.
    r = geometric_median(problem(3, {{1, -2, 3}}));
    CHECK(r.median == std::vector<double>{1, -2, 3});
    CHECK(r.objective == 0.0);

    // Weights pull the median onto a heavy point.
    r = geometric_median(problem(1, {{0}, {4}}, {1.0, 3.0}));
    CHECK(r.median[0] == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("geometric median matches a gradient-free brute force") {
    Engine rng(5);
    for (std::size_t dim : {1u, 2u, 3u}) {
        for (int rep = 0; rep < 4; ++rep) {
            const auto n = testutil::randint(rng, 3, 12);
            std::vector<std::vector<double>> pts;
            std::vector<double> w;
            for (std::size_t i = 0; i < n; ++i) {
                pts.push_back(testutil::normal_vec(rng, dim, 2.0));
                w.push_back(0.5 + uniform01(rng));
            }
            const auto res = geometric_median(problem(dim, pts, w));
            const double brute = oracle::gm_brute_force(pts, w);
            CHECK(res.objective <= brute * (1 + 1e-6) + 1e-9);
            CHECK(oracle::gm_objective(pts, w, res.median) == doctest::Approx(res.objective).epsilon(1e-12));
        }
    }
}

TEST_CASE("geometric median: objective never increases and the result is translation equivariant") {
    Engine rng(6);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t dim = 8, n = 200;
        WeiszfeldProblem p;
        p.dim = dim;
        p.points = testutil::normal_vec(rng, n * dim);
        // A few outliers so the median and mean differ.
        for (std::size_t j = 0; j < dim; ++j) p.points[j] += 50.0;
        const auto r = geometric_median(p);
        CHECK(r.converged);
        for (std::size_t i = 1; i < r.objective_trace.size(); ++i) CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);

        const auto shift = testutil::normal_vec(rng, dim, 10.0);
        WeiszfeldProblem q = p;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < dim; ++j) q.points[i * dim + j] += shift[j];
        }
        const auto rq = geometric_median(q);
        for (std::size_t j = 0; j < dim; ++j) CHECK(std::abs(rq.median[j] - (r.median[j] + shift[j])) < 1e-6);
    }
}

TEST_CASE("geometric median contracts") {
    CHECK_THROWS_AS(geometric_median(problem(2, {})), ContractError);
    CHECK_THROWS_AS(geometric_median(problem(1, {{0}, {1}}, {1.0, 0.0})), ContractError);
    CHECK_THROWS_AS(geometric_median(problem(1, {{0}, {1}}, {1.0})), ContractError);
    auto p = problem(1, {{0}, {1}, {5}});
    p.max_iter = 0;
    const auto r = geometric_median(p);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 0);
}

TEST_CASE("init_sae") {
    Engine rng(7);
    ActivationBatch sample(6);
    for (std::uint64_t i = 0; i < 300; ++i) {
        const auto v = testutil::normal_vecf(rng, 6);
        sample.append(RecordMeta{i, 0, 0, false}, v);
    }
    for (Arch arch : {Arch::standard, Arch::jumprelu}) {
        InitConfig cfg;
        cfg.arch = arch;
        cfg.d_sae = 24;
        InitReport rep;
        const auto p = init_sae(cfg, sample, &rep);
        p.validate();
        CHECK(rep.gm_converged);
        for (float b : p.b_enc) CHECK(b == 0.0f);
        for (std::size_t k = 0; k < p.d_sae; ++k) {
            double n = 0;
            for (float v : p.dec_row(k)) n += double(v) * v;
            CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-6);
        }
        if (arch == Arch::jumprelu) {
            for (float t : p.threshold) CHECK(t == 0.001f);
        }
        CHECK(p.w_enc != p.w_dec);
        CHECK(init_sae(cfg, sample) == p);

        WeiszfeldProblem prob;
        prob.dim = 6;
        prob.points.assign(sample.values().begin(), sample.values().end());
        const auto gm = geometric_median(prob);
        for (std::size_t j = 0; j < 6; ++j) CHECK(p.b_dec[j] == static_cast<float>(gm.median[j]));
    }
    InitConfig bad;
    bad.d_sae = 4;
    CHECK_THROWS_AS(init_sae(bad, ActivationBatch(3)), ContractError);
}

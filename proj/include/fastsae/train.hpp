// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fastsae/actstream.hpp"
#include "fastsae/buffer.hpp"
#include "fastsae/kernels.hpp"
#include "fastsae/sae.hpp"
#include "fastsae/schedule.hpp"

namespace fastsae {

struct TrainConfig {
    Arch arch = Arch::jumprelu;
    std::size_t expansion_factor = 8;

    double lr = 7e-5;
    double lr_end = 7e-6;
    std::uint64_t warmup_steps = 16000;
    std::uint64_t decay_steps = 64000;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    double sparsity_coefficient = 0.01;  // 5 for standard
    std::uint64_t sparsity_warmup_steps = 10000;

    std::uint64_t train_batch_tokens = 128;
    std::uint64_t total_train_tokens = 40960000;

    double dead_threshold = 1e-8;
    std::uint64_t dead_window = 1000;

    double jumprelu_bandwidth = 0.001;
    double jumprelu_init_threshold = 0.001;
    bool normalize_decoder = true;
    double gm_ftol = 1e-20;
    std::uint64_t gm_max_iter = 10000;

    std::uint64_t seed = 42;
    std::uint64_t buffer_capacity = MixingBuffer::kDefaultCapacity;
    ScheduleMode scheduler = ScheduleMode::fast;

    /// Full-scale hyperparameters, with the architecture's sparsity coefficient.
    static TrainConfig full_scale(Arch arch);

    /// Small-run schedule: warmup/decay/sparsity-warmup keep their full-scale
    /// fractions of the total step count; peak/end lr are 1e-3/1e-4.
    static TrainConfig desk_scale(Arch arch, std::uint64_t total_tokens);

    std::uint64_t total_steps() const { return total_train_tokens / train_batch_tokens; }

    void validate() const;

    /// Flat key=value view; keys are the field names above.
    std::map<std::string, std::string> to_map() const;
    /// Applies key=value overrides; unknown keys are a UsageError.
    void apply(const std::map<std::string, std::string>& kv);
};

/// Reads a flat key=value file ('#' comments, blank lines allowed).
std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path);

/// Linear warmup 0 -> lr, cosine lr -> lr_end over decay_steps, then lr_end.
double lr_at_step(std::uint64_t t, const TrainConfig& cfg);

/// Linear ramp 0 -> sparsity_coefficient over sparsity_warmup_steps, then constant.
double sparsity_coeff_at_step(std::uint64_t t, const TrainConfig& cfg);

struct AdamState {
    SaeGrads<float> m;
    SaeGrads<float> v;
    std::uint64_t t = 0;

    static AdamState for_params(const SaeParams& p);
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    bool normalize_decoder = true;
    float threshold_floor = 1e-9f;
};

/// Bias-corrected Adam on every tensor, then decoder renormalization and the
/// threshold floor.
void adam_step(SaeParams& p, const SaeGrads<float>& grads, AdamState& state, double lr, const AdamHyper& hyper);

/// A feature is dead once it has stayed below the threshold for `window`
/// consecutive updates (a never-fired feature counts from the first update).
class DeadFeatureTracker {
public:
    DeadFeatureTracker(std::size_t d_sae, std::uint64_t window, double threshold);

    /// `activations` is rows x d_sae. Returns the dead count after this update.
    std::size_t update(std::span<const float> activations, std::size_t rows);

    std::size_t dead_count() const noexcept;
    bool is_dead(std::size_t k) const { return inactive_[k] >= window_; }
    std::uint64_t window() const noexcept { return window_; }

private:
    std::uint64_t window_;
    double threshold_;
    std::vector<std::uint64_t> inactive_;
    std::vector<float> batch_max_;
};

struct StepMetrics {
    std::uint64_t step = 0;
    double total = 0;
    double mse_part = 0;
    double sparsity_part = 0;
    double lambda = 0;
    double lr = 0;
    std::size_t dead_count = 0;
};

/// One JSON object per line.
void write_metrics_line(std::ostream& os, const StepMetrics& m);

struct TrainResult {
    SaeParams params;
    std::vector<StepMetrics> log;
    std::uint64_t tokens_consumed = 0;
    std::uint64_t steps = 0;
    std::size_t gm_iterations = 0;
    bool gm_converged = false;
};

using StepCallback = std::function<void(const StepMetrics&)>;

/// Full training loop over the mixing buffer: fill -> shuffle/drain half ->
/// train on the drained rows in batches -> refill, until total_train_tokens
/// or the source runs out. b_dec is initialized from the first buffer fill.
TrainResult train(const TrainConfig& cfg, RecordSource& source, const StepCallback& on_step = {},
                  Exec exec = Exec::parallel);

}  // namespace fastsae

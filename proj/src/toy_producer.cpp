// SPDX-License-Identifier: Apache-2.0
#include "fastsae/toy_producer.hpp"

#include <cmath>
#include <numbers>

#include "fastsae/error.hpp"
#include "fastsae/rng.hpp"

namespace fastsae {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr float kPositionScale = 0.7f;
constexpr float kContextMix = 0.8f;
constexpr float kSinkScale = 4.0f;

enum : std::uint64_t { kTagEmbed = 1, kTagProjection = 2, kTagPosition = 3, kTagSink = 4 };

// Unit-variance uniform sample from a counter.
inline float counter_uniform(std::uint64_t key, std::uint64_t k) {
    const std::uint64_t bits = splitmix64(key ^ splitmix64(k));
    const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
    return static_cast<float>((2.0 * u - 1.0) * kSqrt3);
}

}  // namespace

ToyProducer::ToyProducer(std::uint64_t seed, std::size_t d_in) : seed_(seed), d_in_(d_in) {
    if (d_in < 1) throw ContractError("toy producer d_in must be >= 1");
    const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(d_in));

    Engine proj_rng(derive_seed(seed, kTagProjection));
    projection_.resize(d_in * d_in);
    for (float& w : projection_) {
        w = static_cast<float>((2.0 * uniform01(proj_rng) - 1.0) * kSqrt3) * inv_sqrt_d;
    }

    Engine pos_rng(derive_seed(seed, kTagPosition));
    frequency_.resize(d_in);
    phase_.resize(d_in);
    for (std::size_t k = 0; k < d_in; ++k) {
        // Periods from ~2*pi up to ~2*pi*1000 tokens.
        frequency_[k] = static_cast<float>(std::exp(-std::log(1000.0) * static_cast<double>(k) / d_in));
        phase_[k] = static_cast<float>(2.0 * std::numbers::pi * uniform01(pos_rng));
    }

    sink_.resize(d_in);
    const std::uint64_t sink_key = derive_seed(seed, kTagSink);
    for (std::size_t k = 0; k < d_in; ++k) sink_[k] = kSinkScale * counter_uniform(sink_key, k);

    double w = 0.0;
    for (std::size_t j = 1; j <= kWindow; ++j) w += std::pow(kDecay, static_cast<double>(j));
    window_norm_ = static_cast<float>(w);
}

void ToyProducer::embed(TokenId token, std::span<float> out) const {
    const std::uint64_t key = derive_seed(seed_ ^ (static_cast<std::uint64_t>(token) << 20), kTagEmbed);
    for (std::size_t k = 0; k < d_in_; ++k) out[k] = counter_uniform(key, k);
}

void ToyProducer::produce(const TokenSequence& unit, ActivationBatch& dst) const {
    if (dst.d_in() != d_in_) throw ContractError("producer/batch d_in mismatch");
    const std::size_t len = unit.size();
    const std::size_t d = d_in_;

    std::vector<float> emb(len * d);
    std::vector<float> out(len * d);
    std::vector<float> decay(kWindow + 1);
    for (std::size_t j = 0; j <= kWindow; ++j) {
        decay[j] = static_cast<float>(std::pow(kDecay, static_cast<double>(j)));
    }

    const auto n = static_cast<std::ptrdiff_t>(len);
#pragma omp parallel for schedule(static) if (len > 256)
    for (std::ptrdiff_t p = 0; p < n; ++p) {
        embed(unit.tokens[p], {emb.data() + p * d, d});
    }

#pragma omp parallel if (len > 256)
    {
        std::vector<float> ctx(d);
#pragma omp for schedule(static)
        for (std::ptrdiff_t p = 0; p < n; ++p) {
            std::fill(ctx.begin(), ctx.end(), 0.0f);
            const std::size_t reach = std::min<std::size_t>(kWindow, static_cast<std::size_t>(p));
            for (std::size_t j = 1; j <= reach; ++j) {
                const float* e = emb.data() + (p - j) * d;
                const float w = decay[j];
                for (std::size_t k = 0; k < d; ++k) ctx[k] += w * e[k];
            }
            float* a = out.data() + p * d;
            const float* self = emb.data() + p * d;
            const float pos = static_cast<float>(p);
            for (std::size_t r = 0; r < d; ++r) {
                const float* row = projection_.data() + r * d;
                float acc = 0.0f;
                for (std::size_t k = 0; k < d; ++k) acc += row[k] * ctx[k];
                a[r] = self[r] + kPositionScale * std::sin(pos * frequency_[r] + phase_[r]) +
                       kContextMix * acc / window_norm_;
                if (p == 0) a[r] += sink_[r];
            }
        }
    }

    dst.reserve(dst.rows() + len);
    for (std::size_t p = 0; p < len; ++p) {
        RecordMeta m{unit.instance_id, static_cast<std::uint32_t>(p), unit.tokens[p], unit.special[p] != 0};
        dst.append(m, {out.data() + p * d, d});
    }
}

std::vector<ActivationRecord> ToyProducer::produce(const TokenSequence& unit) const {
    ActivationBatch b(d_in_);
    produce(unit, b);
    std::vector<ActivationRecord> out;
    out.reserve(b.rows());
    for (std::size_t i = 0; i < b.rows(); ++i) out.push_back(b.record(i));
    return out;
}

ProducerSource::ProducerSource(SequenceSource units, ToyProducer producer)
    : units_(std::move(units)), producer_(std::move(producer)), staged_(producer_.d_in()) {}

std::size_t ProducerSource::pull(ActivationBatch& dst, std::size_t max_rows) {
    std::size_t added = 0;
    while (added < max_rows) {
        if (staged_pos_ >= staged_.rows()) {
            staged_.clear();
            staged_pos_ = 0;
            auto unit = units_();
            if (!unit) break;
            producer_.produce(*unit, staged_);
            continue;
        }
        const std::size_t n = std::min(max_rows - added, staged_.rows() - staged_pos_);
        dst.append_rows(staged_, staged_pos_, n);
        staged_pos_ += n;
        added += n;
    }
    return added;
}

}  // namespace fastsae

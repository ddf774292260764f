// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "fastsae/actstream.hpp"
#include "fastsae/schedule.hpp"

namespace fastsae {

/// Deterministic stand-in for a language model's residual stream.
///
/// For token t at position p inside a unit:
///
///   a = embed(t) + pos(p) + mix * R * (sum_{j=1..32} 0.9^j embed(t_{p-j})) / W + [p == 0] * sink
///
/// where embed is a seed-keyed pseudo-random vector per token id, pos is a
/// sinusoidal code, R is a fixed random d_in x d_in projection and W the full
/// window weight. Context never crosses a unit boundary, so cutting a document
/// into blocks changes the activations of tokens near the cut.
class ToyProducer {
public:
    static constexpr std::size_t kWindow = 32;
    static constexpr double kDecay = 0.9;

    ToyProducer(std::uint64_t seed, std::size_t d_in);

    std::size_t d_in() const noexcept { return d_in_; }
    std::uint64_t seed() const noexcept { return seed_; }

    /// Embedding of one token id (pure function of seed and id).
    void embed(TokenId token, std::span<float> out) const;

    /// Activations for every token of the unit, appended to dst in position order.
    void produce(const TokenSequence& unit, ActivationBatch& dst) const;
    std::vector<ActivationRecord> produce(const TokenSequence& unit) const;

private:
    std::uint64_t seed_;
    std::size_t d_in_;
    std::vector<float> projection_;  // d_in x d_in, row-major
    std::vector<float> frequency_;
    std::vector<float> phase_;
    std::vector<float> sink_;
    float window_norm_;
};

/// RecordSource that schedules units and runs the toy producer lazily.
class ProducerSource : public RecordSource {
public:
    ProducerSource(SequenceSource units, ToyProducer producer);
    std::size_t d_in() const override { return producer_.d_in(); }
    std::size_t pull(ActivationBatch& dst, std::size_t max_rows) override;

private:
    SequenceSource units_;
    ToyProducer producer_;
    ActivationBatch staged_;
    std::size_t staged_pos_ = 0;
};

}  // namespace fastsae

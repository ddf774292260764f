// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "fastsae/actstream.hpp"
#include "fastsae/rng.hpp"

namespace fastsae {

struct FillResult {
    std::size_t added = 0;
    bool exhausted = false;  // source ran dry before the buffer was full
};

/// Mixing activation buffer. One cycle: fill to capacity, shuffle every row,
/// hand the first half to the trainer, keep the second half for the next cycle.
class MixingBuffer {
public:
    static constexpr std::size_t kDefaultCapacity = 16384;

    /// capacity must be even and >= 2.
    MixingBuffer(std::size_t d_in, std::size_t capacity, std::uint64_t seed);

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return rows_.rows(); }
    bool full() const noexcept { return size() == capacity_; }
    std::size_t d_in() const noexcept { return rows_.d_in(); }
    const ActivationBatch& contents() const noexcept { return rows_; }

    FillResult fill(RecordSource& source);

    /// Fisher-Yates over all rows, then removes and returns the first capacity/2.
    /// Throws ContractError unless full.
    ActivationBatch shuffle_and_drain();

    /// End-of-stream flush: shuffles and returns everything left.
    ActivationBatch flush();

private:
    void shuffle();

    std::size_t capacity_;
    ActivationBatch rows_;
    Engine rng_;
};

}  // namespace fastsae

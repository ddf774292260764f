// SPDX-License-Identifier: Apache-2.0
#include "fastsae/buffer.hpp"

#include "fastsae/error.hpp"

namespace fastsae {

MixingBuffer::MixingBuffer(std::size_t d_in, std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rows_(d_in), rng_(seed) {
    if (capacity < 2 || capacity % 2 != 0) {
        throw ContractError("buffer capacity must be even and >= 2, got " + std::to_string(capacity));
    }
    rows_.reserve(capacity);
}

FillResult MixingBuffer::fill(RecordSource& source) {
    if (source.d_in() != d_in()) throw FormatError("source d_in does not match buffer d_in");
    FillResult res;
    while (size() < capacity_) {
        const std::size_t got = source.pull(rows_, capacity_ - size());
        if (got == 0) {
            res.exhausted = true;
            break;
        }
        res.added += got;
    }
    return res;
}

void MixingBuffer::shuffle() {
    for (std::size_t i = rows_.rows(); i > 1; --i) {
        const std::size_t j = uniform_index(rng_, i);
        rows_.swap_rows(i - 1, j);
    }
}

ActivationBatch MixingBuffer::shuffle_and_drain() {
    if (!full()) {
        throw ContractError("shuffle_and_drain on a buffer holding " + std::to_string(size()) + " of " +
                            std::to_string(capacity_) + " rows");
    }
    shuffle();
    const std::size_t half = capacity_ / 2;
    ActivationBatch out(d_in());
    out.reserve(half);
    out.append_rows(rows_, 0, half);
    rows_.erase_front(half);
    return out;
}

ActivationBatch MixingBuffer::flush() {
    shuffle();
    ActivationBatch out(d_in());
    std::swap(out, rows_);
    rows_.reserve(capacity_);
    return out;
}

}  // namespace fastsae

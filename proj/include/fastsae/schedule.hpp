// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "fastsae/corpus.hpp"

namespace fastsae {

enum class ScheduleMode { bt, fast };

ScheduleMode parse_schedule_mode(std::string_view s);
std::string_view schedule_mode_name(ScheduleMode m);

struct ScheduleConfig {
    ScheduleMode mode = ScheduleMode::fast;
    std::size_t context_size = 2048;  // BT block length
    std::size_t truncation = 8192;    // FAST per-instance cap
    TokenId separator_id = 0;         // BT end-of-document token, flagged special

    void validate() const;
};

/// Pull-style producer of token sequences; std::nullopt marks the end.
using SequenceSource = std::function<std::optional<TokenSequence>()>;

SequenceSource from_vector(std::vector<TokenSequence> seqs);

/// Block Training: concatenate instances with one separator between
/// consecutive instances and cut into blocks of exactly context_size tokens.
/// The trailing partial block is dropped. Block ids count from 0.
class BlockScheduler {
public:
    BlockScheduler(SequenceSource upstream, ScheduleConfig cfg);
    std::optional<TokenSequence> next();

private:
    SequenceSource upstream_;
    ScheduleConfig cfg_;
    TokenSequence pending_;
    std::size_t offset_ = 0;
    std::uint64_t emitted_ = 0;
    bool any_instance_ = false;
    bool done_ = false;
};

/// FAST: each instance becomes its own unit, cut to its first `truncation` tokens.
class InstanceScheduler {
public:
    InstanceScheduler(SequenceSource upstream, ScheduleConfig cfg);
    std::optional<TokenSequence> next();

private:
    SequenceSource upstream_;
    ScheduleConfig cfg_;
};

/// Scheduler for cfg.mode as a SequenceSource.
SequenceSource make_scheduler(SequenceSource upstream, const ScheduleConfig& cfg);

std::vector<TokenSequence> schedule_bt(const std::vector<TokenSequence>& seqs, const ScheduleConfig& cfg);
std::vector<TokenSequence> schedule_fast(const std::vector<TokenSequence>& seqs, const ScheduleConfig& cfg);

}  // namespace fastsae

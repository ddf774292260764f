// SPDX-License-Identifier: Apache-2.0
#include "fastsae/schedule.hpp"

#include <memory>

#include "fastsae/error.hpp"

namespace fastsae {

ScheduleMode parse_schedule_mode(std::string_view s) {
    if (s == "bt" || s == "BT") return ScheduleMode::bt;
    if (s == "fast" || s == "FAST") return ScheduleMode::fast;
    throw UsageError("unknown schedule mode '" + std::string(s) + "' (expected bt or fast)");
}

std::string_view schedule_mode_name(ScheduleMode m) { return m == ScheduleMode::bt ? "bt" : "fast"; }

void ScheduleConfig::validate() const {
    if (context_size < 1) throw ContractError("context_size must be >= 1");
    if (truncation < 1) throw ContractError("truncation must be >= 1");
}

SequenceSource from_vector(std::vector<TokenSequence> seqs) {
    auto data = std::make_shared<std::vector<TokenSequence>>(std::move(seqs));
    auto pos = std::make_shared<std::size_t>(0);
    return [data, pos]() -> std::optional<TokenSequence> {
        if (*pos >= data->size()) return std::nullopt;
        return (*data)[(*pos)++];
    };
}

BlockScheduler::BlockScheduler(SequenceSource upstream, ScheduleConfig cfg)
    : upstream_(std::move(upstream)), cfg_(cfg) {
    cfg_.validate();
}

std::optional<TokenSequence> BlockScheduler::next() {
    const std::size_t block = cfg_.context_size;
    while (!done_ && pending_.size() - offset_ < block) {
        auto inst = upstream_();
        if (!inst) {
            done_ = true;
            break;
        }
        // Compact consumed prefix before growing.
        if (offset_ > 0) {
            pending_.tokens.erase(pending_.tokens.begin(), pending_.tokens.begin() + offset_);
            pending_.special.erase(pending_.special.begin(), pending_.special.begin() + offset_);
            offset_ = 0;
        }
        if (any_instance_) pending_.push(cfg_.separator_id, true);
        any_instance_ = true;
        pending_.tokens.insert(pending_.tokens.end(), inst->tokens.begin(), inst->tokens.end());
        pending_.special.insert(pending_.special.end(), inst->special.begin(), inst->special.end());
    }
    if (pending_.size() - offset_ < block) return std::nullopt;

    TokenSequence out;
    out.instance_id = emitted_++;
    out.tokens.assign(pending_.tokens.begin() + offset_, pending_.tokens.begin() + offset_ + block);
    out.special.assign(pending_.special.begin() + offset_, pending_.special.begin() + offset_ + block);
    offset_ += block;
    return out;
}

InstanceScheduler::InstanceScheduler(SequenceSource upstream, ScheduleConfig cfg)
    : upstream_(std::move(upstream)), cfg_(cfg) {
    cfg_.validate();
}

std::optional<TokenSequence> InstanceScheduler::next() {
    auto inst = upstream_();
    if (!inst) return std::nullopt;
    if (inst->size() > cfg_.truncation) {
        inst->tokens.resize(cfg_.truncation);
        inst->special.resize(cfg_.truncation);
    }
    return inst;
}

SequenceSource make_scheduler(SequenceSource upstream, const ScheduleConfig& cfg) {
    if (cfg.mode == ScheduleMode::bt) {
        auto s = std::make_shared<BlockScheduler>(std::move(upstream), cfg);
        return [s] { return s->next(); };
    }
    auto s = std::make_shared<InstanceScheduler>(std::move(upstream), cfg);
    return [s] { return s->next(); };
}

namespace {
template <class Scheduler>
std::vector<TokenSequence> drain(Scheduler s) {
    std::vector<TokenSequence> out;
    while (auto unit = s.next()) out.push_back(std::move(*unit));
    return out;
}
}  // namespace

std::vector<TokenSequence> schedule_bt(const std::vector<TokenSequence>& seqs, const ScheduleConfig& cfg) {
    if (cfg.mode != ScheduleMode::bt) throw ContractError("schedule_bt called with mode != bt");
    return drain(BlockScheduler(from_vector(seqs), cfg));
}

std::vector<TokenSequence> schedule_fast(const std::vector<TokenSequence>& seqs, const ScheduleConfig& cfg) {
    if (cfg.mode != ScheduleMode::fast) throw ContractError("schedule_fast called with mode != fast");
    return drain(InstanceScheduler(from_vector(seqs), cfg));
}

}  // namespace fastsae

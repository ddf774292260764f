// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "fastsae/actstream.hpp"
#include "fastsae/kernels.hpp"
#include "fastsae/sae.hpp"

namespace fastsae {

// --- reconstruction error ---------------------------------------------------
//
//   MSE = sum_i (1/L_i) sum_j sum_k (y_ijk - yhat_ijk)^2 / (N * d_in)
//
// Sequences are keyed by instance_id. For the special-token variant only
// special positions count toward L_i, and sequences without any are left out of N.

class MseAccumulator {
public:
    explicit MseAccumulator(std::size_t d_in) : d_in_(d_in) {}

    /// Adds one token's squared error (already summed over dimensions).
    void add(std::uint64_t sequence_id, double squared_error);
    /// Adds another accumulator's per-sequence sums (shard merge).
    void merge(const MseAccumulator& other);

    std::size_t sequences() const noexcept { return seqs_.size(); }
    std::size_t d_in() const noexcept { return d_in_; }
    /// Throws ContractError when no token was added.
    double finalize() const;

private:
    struct Seq {
        double sum = 0.0;
        std::uint64_t count = 0;
    };
    std::size_t d_in_;
    std::unordered_map<std::uint64_t, Seq> seqs_;
};

struct MseResult {
    double raw = 0.0;
    double log2 = 0.0;  // -inf when raw == 0
    std::size_t sequences = 0;
    std::uint64_t tokens = 0;
};

/// "-inf" for zero, fixed 6-decimal text otherwise.
std::string format_log2(double log2_value);

struct EvalOptions {
    /// When set, a token is special iff its id is in this set; otherwise the record flag decides.
    std::optional<std::set<TokenId>> special_ids;
    std::size_t chunk_rows = 4096;
    Exec exec = Exec::parallel;
};

struct EvalReport {
    MseResult mse;
    std::optional<MseResult> mse_special;  // absent when the stream has no special tokens
};

/// One pass over the stream computing MSE and MSE_st.
EvalReport evaluate(const SaeParams& p, RecordSource& stream, const EvalOptions& opts = {});

/// Single metric: all tokens, or only special tokens. Throws if the effective token set is empty.
MseResult mse(const SaeParams& p, RecordSource& stream, bool special_only, const EvalOptions& opts = {});

// --- feature contexts -----------------------------------------------------------

struct ContextEntry {
    std::uint64_t sequence_id = 0;
    float max_activation = 0.0f;
    std::vector<TokenId> tokens;
    std::vector<float> activations;  // feature activation per token
    std::vector<std::string> words;  // token text, when a vocabulary was available
};

struct FeatureContext {
    std::size_t feature = 0;
    std::vector<ContextEntry> contexts;  // sorted by (max desc, sequence id asc)

    /// Non-zero activation somewhere in its top contexts.
    bool eligible() const;
};

/// Top-n sequences for one feature by exhaustive scan.
FeatureContext top_activating_contexts(const SaeParams& p, const std::vector<ActivationSequence>& data,
                                       std::size_t feature, std::size_t top_n = 5);

/// Top-n contexts for every feature in one pass over the data.
std::vector<FeatureContext> all_feature_contexts(const SaeParams& p, const std::vector<ActivationSequence>& data,
                                                 std::size_t top_n = 5, Exec exec = Exec::parallel);

/// Keeps eligible features and samples `count` of them without replacement
/// (all of them if fewer). Throws if none are eligible.
std::vector<std::size_t> select_features(const std::vector<FeatureContext>& contexts, std::size_t count,
                                         std::uint64_t seed);

struct FeatureAverage {
    std::size_t feature = 0;
    double average = 0.0;
};

/// For every sequence containing `token`, each feature's max activation over
/// that token's positions; averaged over those sequences; top-n (feature, avg), descending.
std::vector<FeatureAverage> avg_top_max_activation(const SaeParams& p, const std::vector<ActivationSequence>& data,
                                                   TokenId token, std::size_t top_n = 5);

// --- output helpers ---------------------------------------------------------------

/// Fills ContextEntry::words from the vocabulary.
void render_words(std::vector<FeatureContext>& ctxs, const Vocabulary& vocab);

/// One JSON object per feature per line.
void write_feature_contexts(std::ostream& os, const std::vector<FeatureContext>& ctxs);
std::vector<FeatureContext> read_feature_contexts(std::istream& is);

}  // namespace fastsae

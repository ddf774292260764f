// SPDX-License-Identifier: Apache-2.0
#include "fastsae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "fastsae/error.hpp"
#include "fastsae/rng.hpp"

namespace fastsae {

using nlohmann::json;

void MseAccumulator::add(std::uint64_t sequence_id, double squared_error) {
    auto& s = seqs_[sequence_id];
    s.sum += squared_error;
    s.count += 1;
}

void MseAccumulator::merge(const MseAccumulator& other) {
    if (other.d_in_ != d_in_) throw ContractError("cannot merge MSE accumulators with different d_in");
    for (const auto& [id, s] : other.seqs_) {
        auto& mine = seqs_[id];
        mine.sum += s.sum;
        mine.count += s.count;
    }
}

double MseAccumulator::finalize() const {
    if (seqs_.empty()) throw ContractError("MSE over an empty token set");
    // Sum in id order so the result does not depend on hash-table layout.
    std::vector<std::uint64_t> ids;
    ids.reserve(seqs_.size());
    for (const auto& kv : seqs_) ids.push_back(kv.first);
    std::sort(ids.begin(), ids.end());
    double total = 0.0;
    for (auto id : ids) {
        const auto& s = seqs_.at(id);
        total += s.sum / static_cast<double>(s.count);
    }
    return total / (static_cast<double>(seqs_.size()) * static_cast<double>(d_in_));
}

std::string format_log2(double v) {
    if (std::isinf(v) && v < 0) return "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

namespace {

MseResult to_result(const MseAccumulator& acc, std::uint64_t tokens) {
    MseResult r;
    r.raw = acc.finalize();
    r.log2 = r.raw > 0.0 ? std::log2(r.raw) : -std::numeric_limits<double>::infinity();
    r.sequences = acc.sequences();
    r.tokens = tokens;
    return r;
}

}  // namespace

EvalReport evaluate(const SaeParams& p, RecordSource& stream, const EvalOptions& opts) {
    if (stream.d_in() != p.d_in) {
        throw FormatError("stream d_in " + std::to_string(stream.d_in()) + " does not match checkpoint d_in " +
                          std::to_string(p.d_in));
    }
    MseAccumulator all(p.d_in);
    MseAccumulator special(p.d_in);
    std::uint64_t n_all = 0;
    std::uint64_t n_special = 0;

    ActivationBatch chunk(p.d_in);
    Workspace<float> ws;
    std::vector<double> se;
    while (stream.pull(chunk, opts.chunk_rows) > 0) {
        se.resize(chunk.rows());
        squared_error_batch<float>(p, chunk.values(), chunk.rows(), se, ws, opts.exec);
        for (std::size_t i = 0; i < chunk.rows(); ++i) {
            const RecordMeta& m = chunk.meta(i);
            all.add(m.instance_id, se[i]);
            ++n_all;
            const bool is_special = opts.special_ids ? opts.special_ids->count(m.token_id) != 0 : m.is_special;
            if (is_special) {
                special.add(m.instance_id, se[i]);
                ++n_special;
            }
        }
        chunk.clear();
    }
    if (n_all == 0) throw ContractError("evaluation stream is empty");

    EvalReport rep;
    rep.mse = to_result(all, n_all);
    if (n_special > 0) rep.mse_special = to_result(special, n_special);
    return rep;
}

MseResult mse(const SaeParams& p, RecordSource& stream, bool special_only, const EvalOptions& opts) {
    auto rep = evaluate(p, stream, opts);
    if (!special_only) return rep.mse;
    if (!rep.mse_special) throw ContractError("MSE_st requested but the stream has no special tokens");
    return *rep.mse_special;
}

// ---------------------------------------------------------------------------
// contexts

bool FeatureContext::eligible() const {
    return std::any_of(contexts.begin(), contexts.end(), [](const ContextEntry& c) { return c.max_activation > 0; });
}

namespace {

struct Ranked {
    float max;
    std::uint64_t id;
    std::size_t index;  // position in the dataset
};

inline bool ranks_before(const Ranked& a, const Ranked& b) {
    if (a.max != b.max) return a.max > b.max;
    return a.id < b.id;
}

void offer(std::vector<Ranked>& top, std::size_t top_n, const Ranked& r) {
    if (top.size() == top_n && !ranks_before(r, top.back())) return;
    auto pos = std::upper_bound(top.begin(), top.end(), r, ranks_before);
    top.insert(pos, r);
    if (top.size() > top_n) top.pop_back();
}

ContextEntry make_entry(const ActivationSequence& seq, const Workspace<float>& ws, std::size_t d_sae,
                        std::size_t feature, float max) {
    ContextEntry e;
    e.sequence_id = seq.id;
    e.max_activation = max;
    const std::size_t len = seq.rows.rows();
    e.tokens.reserve(len);
    e.activations.reserve(len);
    for (std::size_t t = 0; t < len; ++t) {
        e.tokens.push_back(seq.rows.meta(t).token_id);
        e.activations.push_back(ws.act[t * d_sae + feature]);
    }
    return e;
}

void check_dims(const SaeParams& p, const std::vector<ActivationSequence>& data) {
    for (const auto& s : data) {
        if (s.rows.d_in() != p.d_in) throw FormatError("dataset d_in does not match checkpoint d_in");
    }
}

}  // namespace

FeatureContext top_activating_contexts(const SaeParams& p, const std::vector<ActivationSequence>& data,
                                       std::size_t feature, std::size_t top_n) {
    if (data.empty()) throw ContractError("top_activating_contexts on an empty dataset");
    if (feature >= p.d_sae) throw ContractError("feature index " + std::to_string(feature) + " out of range");
    check_dims(p, data);
    std::vector<Ranked> top;
    Workspace<float> ws;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& seq = data[i];
        if (seq.rows.empty()) continue;
        forward_batch<float>(p, seq.rows.values(), seq.rows.rows(), ws, Exec::serial);
        float mx = 0.0f;
        for (std::size_t t = 0; t < seq.rows.rows(); ++t) mx = std::max(mx, ws.act[t * p.d_sae + feature]);
        offer(top, top_n, {mx, seq.id, i});
    }
    FeatureContext fc;
    fc.feature = feature;
    for (const auto& r : top) {
        forward_batch<float>(p, data[r.index].rows.values(), data[r.index].rows.rows(), ws, Exec::serial);
        fc.contexts.push_back(make_entry(data[r.index], ws, p.d_sae, feature, r.max));
    }
    return fc;
}

std::vector<FeatureContext> all_feature_contexts(const SaeParams& p, const std::vector<ActivationSequence>& data,
                                                 std::size_t top_n, Exec exec) {
    if (data.empty()) throw ContractError("all_feature_contexts on an empty dataset");
    check_dims(p, data);
    const std::size_t d_sae = p.d_sae;
    std::vector<std::vector<Ranked>> top(d_sae);

    // Per-sequence feature maxima, computed in parallel chunks and merged in order.
    constexpr std::size_t kChunk = 64;
    std::vector<float> maxima;
    for (std::size_t base = 0; base < data.size(); base += kChunk) {
        const std::size_t count = std::min(kChunk, data.size() - base);
        maxima.assign(count * d_sae, 0.0f);
        const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel if (exec == Exec::parallel)
        {
            Workspace<float> ws;
#pragma omp for schedule(dynamic, 1)
            for (std::ptrdiff_t c = 0; c < n; ++c) {
                const auto& seq = data[base + c];
                if (seq.rows.empty()) continue;
                forward_batch<float>(p, seq.rows.values(), seq.rows.rows(), ws, Exec::serial);
                float* mx = maxima.data() + c * d_sae;
                for (std::size_t t = 0; t < seq.rows.rows(); ++t) {
                    const float* f = ws.act.data() + t * d_sae;
                    for (std::size_t k = 0; k < d_sae; ++k) mx[k] = std::max(mx[k], f[k]);
                }
            }
        }
        for (std::size_t c = 0; c < count; ++c) {
            if (data[base + c].rows.empty()) continue;
            for (std::size_t k = 0; k < d_sae; ++k) {
                offer(top[k], top_n, {maxima[c * d_sae + k], data[base + c].id, base + c});
            }
        }
    }

    // Materialize per-token activations, one forward pass per referenced sequence.
    std::map<std::size_t, std::vector<std::pair<std::size_t, std::size_t>>> wanted;  // seq -> (feature, rank)
    std::vector<FeatureContext> out(d_sae);
    for (std::size_t k = 0; k < d_sae; ++k) {
        out[k].feature = k;
        out[k].contexts.resize(top[k].size());
        for (std::size_t r = 0; r < top[k].size(); ++r) wanted[top[k][r].index].push_back({k, r});
    }
    Workspace<float> ws;
    for (const auto& [idx, slots] : wanted) {
        const auto& seq = data[idx];
        forward_batch<float>(p, seq.rows.values(), seq.rows.rows(), ws, exec);
        for (const auto& [k, r] : slots) out[k].contexts[r] = make_entry(seq, ws, d_sae, k, top[k][r].max);
    }
    return out;
}

std::vector<std::size_t> select_features(const std::vector<FeatureContext>& contexts, std::size_t count,
                                         std::uint64_t seed) {
    std::vector<std::size_t> eligible;
    for (const auto& fc : contexts) {
        if (fc.eligible()) eligible.push_back(fc.feature);
    }
    if (eligible.empty()) throw ContractError("no eligible features: every feature is inactive on its top contexts");
    if (eligible.size() <= count) return eligible;
    Engine rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + uniform_index(rng, eligible.size() - i);
        std::swap(eligible[i], eligible[j]);
    }
    eligible.resize(count);
    return eligible;
}

std::vector<FeatureAverage> avg_top_max_activation(const SaeParams& p, const std::vector<ActivationSequence>& data,
                                                   TokenId token, std::size_t top_n) {
    check_dims(p, data);
    const std::size_t d_sae = p.d_sae;
    std::vector<double> sum(d_sae, 0.0);
    std::size_t samples = 0;
    Workspace<float> ws;
    std::vector<float> mx(d_sae);
    for (const auto& seq : data) {
        std::vector<std::size_t> positions;
        for (std::size_t t = 0; t < seq.rows.rows(); ++t) {
            if (seq.rows.meta(t).token_id == token) positions.push_back(t);
        }
        if (positions.empty()) continue;
        ++samples;
        forward_batch<float>(p, seq.rows.values(), seq.rows.rows(), ws, Exec::parallel);
        std::fill(mx.begin(), mx.end(), -std::numeric_limits<float>::infinity());
        for (auto t : positions) {
            for (std::size_t k = 0; k < d_sae; ++k) mx[k] = std::max(mx[k], ws.act[t * d_sae + k]);
        }
        for (std::size_t k = 0; k < d_sae; ++k) sum[k] += mx[k];
    }
    if (samples == 0) throw ContractError("token " + std::to_string(token) + " does not occur in the dataset");

    std::vector<FeatureAverage> all(d_sae);
    for (std::size_t k = 0; k < d_sae; ++k) all[k] = {k, sum[k] / static_cast<double>(samples)};
    const std::size_t n = std::min(top_n, d_sae);
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(),
                      [](const FeatureAverage& a, const FeatureAverage& b) {
                          if (a.average != b.average) return a.average > b.average;
                          return a.feature < b.feature;
                      });
    all.resize(n);
    return all;
}

// ---------------------------------------------------------------------------
// I/O

void render_words(std::vector<FeatureContext>& ctxs, const Vocabulary& vocab) {
    for (auto& fc : ctxs) {
        for (auto& e : fc.contexts) {
            e.words.clear();
            for (TokenId t : e.tokens) e.words.push_back(t < vocab.size() ? vocab.word(t) : std::to_string(t));
        }
    }
}

void write_feature_contexts(std::ostream& os, const std::vector<FeatureContext>& ctxs) {
    for (const auto& fc : ctxs) {
        json arr = json::array();
        for (const auto& e : fc.contexts) {
            json c{{"sequence_id", e.sequence_id},
                   {"max", e.max_activation},
                   {"tokens", e.tokens},
                   {"activations", e.activations}};
            if (!e.words.empty()) c["words"] = e.words;
            arr.push_back(std::move(c));
        }
        os << json{{"feature", fc.feature}, {"eligible", fc.eligible()}, {"contexts", std::move(arr)}}.dump()
           << '\n';
    }
}

std::vector<FeatureContext> read_feature_contexts(std::istream& is) {
    std::vector<FeatureContext> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            FeatureContext fc;
            fc.feature = j.at("feature").get<std::size_t>();
            for (const auto& c : j.at("contexts")) {
                ContextEntry e;
                e.sequence_id = c.at("sequence_id").get<std::uint64_t>();
                e.max_activation = c.at("max").get<float>();
                e.tokens = c.at("tokens").get<std::vector<TokenId>>();
                e.activations = c.at("activations").get<std::vector<float>>();
                if (c.contains("words")) e.words = c.at("words").get<std::vector<std::string>>();
                if (e.activations.size() != e.tokens.size()) {
                    throw FormatError("tokens/activations length mismatch");
                }
                fc.contexts.push_back(std::move(e));
            }
            out.push_back(std::move(fc));
        } catch (const json::exception& e) {
            throw FormatError("feature context line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace fastsae

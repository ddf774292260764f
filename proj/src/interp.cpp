// SPDX-License-Identifier: Apache-2.0
#include "fastsae/interp.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "fastsae/error.hpp"

namespace fastsae {

using nlohmann::json;

const std::string_view kInterpSystemPrompt =
    "We are analyzing the activation levels of features in a neural network. Each feature activates specific "
    "tokens in a text, and the activation value of each token indicates its relevance to the feature. Higher "
    "activation values signify a stronger association.\n"
    "\n"
    "Your task is to evaluate the feature based on the following scoring rubric and assign it a monosemanticity "
    "score.\n"
    "\n"
    "### Scoring Rubric: Activation Consistency\n"
    "\n"
    "1: No discernible pattern\n"
    "\n"
    "2: Broad consistent theme but lacking structure\n"
    "\n"
    "3: Clear overall pattern but quite a few examples not fitting that pattern\n"
    "\n"
    "4: Clear pattern with one or two deviating examples\n"
    "\n"
    "5: Clear pattern with no deviating examples\n"
    "\n"
    "### Instructions:\n"
    "\n"
    "1. Analyze the context provided, which consists of a sequence of alternating tokens and their "
    "corresponding activation values.\n"
    "\n"
    "2. Assign a score based on the activation consistency rubric.\n"
    "\n"
    "3. Provide a descriptive name for the feature that captures its essence.\n"
    "\n"
    "Example output: 'My final verdict score is: [[3]], feature name is [[Mathematical Problem Explanation]]'.";

std::string render_contexts(const FeatureContext& ctx) {
    std::string out;
    char num[32];
    for (std::size_t c = 0; c < ctx.contexts.size(); ++c) {
        const auto& e = ctx.contexts[c];
        if (c) out += "\n\n";
        for (std::size_t t = 0; t < e.tokens.size(); ++t) {
            if (t) out += ' ';
            out += e.words.empty() ? std::to_string(e.tokens[t]) : e.words[t];
            std::snprintf(num, sizeof num, "(%.4f)", static_cast<double>(e.activations[t]));
            out += num;
        }
    }
    return out;
}

Prompt build_prompt(const FeatureContext& ctx) {
    if (ctx.contexts.empty()) throw ContractError("build_prompt needs at least one context");
    Prompt p;
    p.system = std::string(kInterpSystemPrompt);
    p.user = "Below is the context of feature " + std::to_string(ctx.feature) +
             ", represented as sentences with tokens and their activation values:\n\n" + render_contexts(ctx);
    return p;
}

namespace {

std::string_view trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Contents of the next [[...]] at or after `from`; advances `from` past it.
std::optional<std::string_view> next_bracketed(std::string_view s, std::size_t& from) {
    const auto open = s.find("[[", from);
    if (open == std::string_view::npos) return std::nullopt;
    const auto close = s.find("]]", open + 2);
    if (close == std::string_view::npos) return std::nullopt;
    from = close + 2;
    return s.substr(open + 2, close - open - 2);
}

}  // namespace

Verdict parse_verdict(std::string_view response) {
    const std::string raw(response);
    std::size_t pos = 0;
    const auto score_text = next_bracketed(response, pos);
    if (!score_text) throw ParseError("no [[score]] marker in response", raw);
    const auto digits = trim(*score_text);
    if (digits.empty() || digits.size() > 9 ||
        digits.find_first_not_of("0123456789") != std::string_view::npos) {
        throw ParseError("score marker '[[" + std::string(*score_text) + "]]' is not an integer", raw);
    }
    const int score = std::stoi(std::string(digits));
    if (score < 1 || score > 5) throw ParseError("score " + std::to_string(score) + " outside 1..5", raw);
    const auto name = next_bracketed(response, pos);
    if (!name) throw ParseError("no [[feature name]] marker after the score", raw);
    const auto clean = trim(*name);
    if (clean.empty()) throw ParseError("empty feature name", raw);
    return {score, std::string(clean)};
}

std::string format_verdict(const Verdict& v) {
    return "My final verdict score is: [[" + std::to_string(v.score) + "]], feature name is [[" + v.feature_name +
           "]]";
}

std::string chat_request_json(const ChatRequest& req) {
    nlohmann::ordered_json j;
    j["model"] = req.model;
    j["temperature"] = req.temperature;
    j["messages"] = json::array({{{"role", "system"}, {"content", req.system}},
                                 {{"role", "user"}, {"content", req.user}}});
    return j.dump();
}

std::string chat_response_content(std::string_view body) {
    try {
        const json j = json::parse(body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("unexpected chat response shape: ") + e.what());
    }
}

void summarize(ScoreReport& r) {
    r.histogram.fill(0);
    r.cdf.fill(0.0);
    r.scored = 0;
    r.failures = 0;
    for (const auto& s : r.scores) {
        if (s.verdict) {
            ++r.histogram[s.verdict->score - 1];
            ++r.scored;
        } else {
            ++r.failures;
        }
    }
    std::size_t running = 0;
    for (std::size_t s = 0; s < 5; ++s) {
        running += r.histogram[s];
        r.cdf[s] = r.scored ? static_cast<double>(running) / static_cast<double>(r.scored) : 0.0;
    }
}

ScoreReport score_features(ChatClient& client, const std::vector<FeatureContext>& features, const ScoreOptions& opts) {
    ScoreReport report;
    report.scores.resize(features.size());
    std::mutex audit_mu;
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t i = next++; i < features.size(); i = next++) {
            FeatureScore& out = report.scores[i];
            out.feature = features[i].feature;
            const Prompt prompt = build_prompt(features[i]);
            const ChatRequest req{opts.model, opts.temperature, prompt.system, prompt.user};
            for (int attempt = 0; attempt <= opts.retries; ++attempt) {
                out.attempts = attempt + 1;
                try {
                    out.raw_response = client.complete(req);
                    out.error.clear();
                    break;
                } catch (const TransportError& e) {
                    out.error = e.what();
                    if (attempt < opts.retries) {
                        std::this_thread::sleep_for(std::chrono::milliseconds(opts.backoff_ms * (attempt + 1)));
                    }
                } catch (const Error& e) {
                    out.error = e.what();
                    break;
                }
            }
            if (out.error.empty()) {
                try {
                    out.verdict = parse_verdict(out.raw_response);
                } catch (const ParseError& e) {
                    out.error = e.what();
                }
            }
            if (opts.audit) {
                nlohmann::ordered_json j;
                j["feature"] = out.feature;
                j["request"] = json::parse(chat_request_json(req));
                j["response"] = out.raw_response;
                if (!out.error.empty()) j["error"] = out.error;
                std::lock_guard lock(audit_mu);
                *opts.audit << j.dump() << '\n';
            }
        }
    };

    const int workers = std::max(1, std::min<int>(opts.parallelism, static_cast<int>(features.size())));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    summarize(report);
    return report;
}

void write_score_records(std::ostream& os, const ScoreReport& r) {
    for (const auto& s : r.scores) {
        nlohmann::ordered_json j;
        j["feature"] = s.feature;
        if (s.verdict) {
            j["score"] = s.verdict->score;
            j["feature_name"] = s.verdict->feature_name;
        } else {
            j["score"] = nullptr;
            j["error"] = s.error;
        }
        j["attempts"] = s.attempts;
        os << j.dump() << '\n';
    }
}

void write_score_distribution(std::ostream& os, const ScoreReport& r) {
    os << "score\tcount\tfraction\tcdf\n";
    char buf[128];
    for (std::size_t s = 0; s < 5; ++s) {
        const double frac = r.scored ? static_cast<double>(r.histogram[s]) / static_cast<double>(r.scored) : 0.0;
        std::snprintf(buf, sizeof buf, "%zu\t%zu\t%.6f\t%.6f\n", s + 1, r.histogram[s], frac, r.cdf[s]);
        os << buf;
    }
    os << "# scored=" << r.scored << " failures=" << r.failures << '\n';
}

}  // namespace fastsae

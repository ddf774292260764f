// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fastsae/eval.hpp"

namespace fastsae {

/// System prompt for monosemanticity scoring.
extern const std::string_view kInterpSystemPrompt;

struct Prompt {
    std::string system;
    std::string user;
};

/// "token(0.1234) token(0.0000) ..." per context, contexts separated by a blank line.
std::string render_contexts(const FeatureContext& ctx);

Prompt build_prompt(const FeatureContext& ctx);

struct Verdict {
    int score = 0;  // 1..5
    std::string feature_name;

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// First [[integer]] is the score, the next [[...]] the feature name. Throws ParseError.
Verdict parse_verdict(std::string_view response);
std::string format_verdict(const Verdict& v);

// --- chat transport -------------------------------------------------------------

struct ChatRequest {
    std::string model;
    double temperature = 0.0;
    std::string system;
    std::string user;
};

/// Request body in chat-completions shape.
std::string chat_request_json(const ChatRequest& req);
/// Content of the first choice's message. Throws FormatError.
std::string chat_response_content(std::string_view body);

class ChatClient {
public:
    virtual ~ChatClient() = default;
    /// Returns the assistant reply text. Throws TransportError on failure.
    virtual std::string complete(const ChatRequest& req) = 0;
};

struct HttpChatConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout_seconds = 120;
};

std::unique_ptr<ChatClient> make_http_chat_client(const HttpChatConfig& cfg);

/// Answers from a callback; used for offline runs and tests. Thread-safe if the callback is.
class MockChatClient : public ChatClient {
public:
    using Responder = std::function<std::string(const ChatRequest&)>;
    explicit MockChatClient(Responder r) : respond_(std::move(r)) {}
    std::string complete(const ChatRequest& req) override { return respond_(req); }

private:
    Responder respond_;
};

// --- scoring ----------------------------------------------------------------------

struct ScoreOptions {
    std::string model = "gpt-4o-2024-11-20";
    double temperature = 0.0;
    int parallelism = 1;
    int retries = 1;  // extra attempts after a transport failure
    int backoff_ms = 500;
    std::ostream* audit = nullptr;  // JSON lines of every request/response
};

struct FeatureScore {
    std::size_t feature = 0;
    std::optional<Verdict> verdict;
    std::string error;  // set when no verdict
    std::string raw_response;
    int attempts = 0;
};

struct ScoreReport {
    std::vector<FeatureScore> scores;  // in input order
    std::array<std::size_t, 5> histogram{};  // counts of scores 1..5
    std::array<double, 5> cdf{};             // fraction with score <= s
    std::size_t scored = 0;
    std::size_t failures = 0;
};

/// Histogram and CDF over the verdicts present in `scores`.
void summarize(ScoreReport& report);

ScoreReport score_features(ChatClient& client, const std::vector<FeatureContext>& features, const ScoreOptions& opts);

void write_score_records(std::ostream& os, const ScoreReport& r);
/// Tab-separated: score, count, fraction, cdf.
void write_score_distribution(std::ostream& os, const ScoreReport& r);

}  // namespace fastsae

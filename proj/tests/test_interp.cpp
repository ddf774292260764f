// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fastsae/error.hpp"
#include "fastsae/interp.hpp"
#include "test_util.hpp"

using namespace fastsae;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

FeatureContext toy_context(std::size_t feature) {
    FeatureContext fc;
    fc.feature = feature;
    ContextEntry a;
    a.tokens = {7, 8};
    a.activations = {0.0f, 1.23456f};
    a.words = {"the", "cat"};
    a.max_activation = 1.23456f;
    ContextEntry b;
    b.tokens = {9};
    b.activations = {0.5f};
    b.max_activation = 0.5f;
    fc.contexts = {a, b};
    return fc;
}

std::vector<FeatureContext> features(std::size_t n) {
    std::vector<FeatureContext> out;
    for (std::size_t k = 0; k < n; ++k) out.push_back(toy_context(k));
    return out;
}

}  // namespace

TEST_CASE("system prompt matches the stored fixture byte for byte") {
    const auto want = slurp(testutil::fixture("tests/fixtures/system_prompt.txt"));
    CHECK(std::string(kInterpSystemPrompt) == want);
}

TEST_CASE("prompt construction") {
    const auto p = build_prompt(toy_context(12));
    CHECK(p.system == kInterpSystemPrompt);
    CHECK(p.user ==
          "Below is the context of feature 12, represented as sentences with tokens and their activation values:\n\n"
          "the(0.0000) cat(1.2346)\n\n9(0.5000)");
    FeatureContext empty;
    CHECK_THROWS_AS(build_prompt(empty), ContractError);
}

TEST_CASE("parse the documented example output") {
    const auto v = parse_verdict("My final verdict score is: [[3]], feature name is [[Mathematical Problem Explanation]]");
    CHECK(v.score == 3);
    CHECK(v.feature_name == "Mathematical Problem Explanation");
    const auto spaced = parse_verdict("Reasoning...\nMy final verdict score is: [[ 5 ]], feature name is [[  Greetings ]]");
    CHECK(spaced.score == 5);
    CHECK(spaced.feature_name == "Greetings");
}

TEST_CASE("format/parse roundtrip") {
    Engine rng(1);
    const std::string alphabet = "abcdefghijklmnopqrstuvwxyz ABCXYZ-_'";
    for (int rep = 0; rep < 100; ++rep) {
        Verdict v;
        v.score = static_cast<int>(1 + uniform_index(rng, 5));
        const auto len = testutil::randint(rng, 1, 30);
        for (std::size_t i = 0; i < len; ++i) v.feature_name += alphabet[uniform_index(rng, alphabet.size())];
        // Names are trimmed on parse; compare against the trimmed form.
        const auto a = v.feature_name.find_first_not_of(' ');
        if (a == std::string::npos) v.feature_name = "x";
        else v.feature_name = v.feature_name.substr(a, v.feature_name.find_last_not_of(' ') - a + 1);
        CHECK(parse_verdict(format_verdict(v)) == v);
    }
}

TEST_CASE("malformed verdicts are parse errors") {
    for (const char* bad : {"no markers at all", "[[0]], feature name is [[x]]", "[[6]], feature name is [[x]]",
                            "[[three]], feature name is [[x]]", "[[3]] and no name", "[[3]], feature name is [[  ]]",
                            "[[-1]], feature name is [[x]]", "[[3.5]], feature name is [[x]]", "[[3"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(parse_verdict(bad), ParseError);
    }
}

TEST_CASE("chat request and response JSON") {
    const ChatRequest req{"gpt-4o-2024-11-20", 0.0, "sys", "usr"};
    const auto j = nlohmann::json::parse(chat_request_json(req));
    CHECK(j["model"] == "gpt-4o-2024-11-20");
    CHECK(j["temperature"] == 0.0);
    CHECK(j["messages"][0]["role"] == "system");
    CHECK(j["messages"][1]["content"] == "usr");
    CHECK(chat_response_content(R"({"choices":[{"message":{"role":"assistant","content":"hi"}}]})") == "hi");
    CHECK_THROWS_AS(chat_response_content(R"({"choices":[]})"), FormatError);
    CHECK_THROWS_AS(chat_response_content("not json"), FormatError);
    const ScoreOptions defaults;
    CHECK(defaults.model == "gpt-4o-2024-11-20");
    CHECK(defaults.temperature == 0.0);
}

TEST_CASE("score distribution over the five scores") {
    for (int s = 1; s <= 5; ++s) {
        MockChatClient mock([s](const ChatRequest&) { return format_verdict({s, "f"}); });
        const auto r = score_features(mock, features(4), ScoreOptions{});
        CHECK(r.scored == 4);
        CHECK(r.histogram[s - 1] == 4);
        for (int i = 0; i < 5; ++i) CHECK(r.cdf[i] == (i + 1 >= s ? 1.0 : 0.0));
    }
}

TEST_CASE("cyclic mock gives a flat histogram") {
    MockChatClient mock([](const ChatRequest& req) {
        const auto pos = req.user.find("feature ") + 8;
        const int k = std::stoi(req.user.substr(pos));
        return format_verdict({k % 5 + 1, "f" + std::to_string(k)});
    });
    ScoreOptions opts;
    opts.parallelism = 4;
    const auto r = score_features(mock, features(10), opts);
    CHECK(r.histogram == std::array<std::size_t, 5>{2, 2, 2, 2, 2});
    CHECK(r.cdf[2] == doctest::Approx(0.6));
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(r.scores[i].feature == i);
        REQUIRE(r.scores[i].verdict);
        CHECK(r.scores[i].verdict->score == static_cast<int>(i % 5 + 1));
    }
    std::ostringstream dist;
    write_score_distribution(dist, r);
    CHECK(dist.str().rfind("score\tcount\tfraction\tcdf\n1\t2\t0.200000\t0.200000\n", 0) == 0);
    CHECK(dist.str().find("# scored=10 failures=0") != std::string::npos);
}

TEST_CASE("one malformed response out of ten is recorded, not fatal") {
    MockChatClient mock([](const ChatRequest& req) -> std::string {
        if (req.user.find("feature 3,") != std::string::npos) return "I cannot decide.";
        return format_verdict({4, "x"});
    });
    std::ostringstream audit;
    ScoreOptions opts;
    opts.audit = &audit;
    const auto r = score_features(mock, features(10), opts);
    CHECK(r.scored == 9);
    CHECK(r.failures == 1);
    CHECK_FALSE(r.scores[3].verdict);
    CHECK(r.scores[3].raw_response == "I cannot decide.");
    CHECK(r.cdf[3] == 1.0);

    std::istringstream lines(audit.str());
    std::size_t n = 0, errors = 0;
    for (std::string line; std::getline(lines, line); ++n) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j["request"]["messages"][0]["content"] == std::string(kInterpSystemPrompt));
        if (j.contains("error")) ++errors;
    }
    CHECK(n == 10);
    CHECK(errors == 1);

    std::ostringstream rec;
    write_score_records(rec, r);
    CHECK(rec.str().find("\"score\":null") != std::string::npos);
}

TEST_CASE("transport errors are retried, other errors are not") {
    std::atomic<int> calls{0};
    MockChatClient flaky([&](const ChatRequest&) -> std::string {
        if (calls++ == 0) throw TransportError("connection reset");
        return format_verdict({2, "y"});
    });
    ScoreOptions opts;
    opts.backoff_ms = 1;
    auto r = score_features(flaky, features(1), opts);
    CHECK(r.scores[0].attempts == 2);
    CHECK(r.scored == 1);

    MockChatClient down([](const ChatRequest&) -> std::string { throw TransportError("down"); });
    opts.retries = 2;
    r = score_features(down, features(1), opts);
    CHECK(r.scores[0].attempts == 3);
    CHECK(r.failures == 1);

    MockChatClient garbled([](const ChatRequest&) -> std::string { throw FormatError("bad body"); });
    r = score_features(garbled, features(2), opts);
    CHECK(r.scores[0].attempts == 1);
    CHECK(r.failures == 2);
}

TEST_CASE("HTTP client against a local server") {
    httplib::Server srv;
    std::atomic<int> hits{0};
    std::string seen_auth, seen_body;
    srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (hits++ == 0) {
            res.status = 500;
            res.set_content("busy", "text/plain");
            return;
        }
        seen_auth = req.get_header_value("Authorization");
        seen_body = req.body;
        const nlohmann::json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", format_verdict({5, "Greeting"})}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    const int port = srv.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();

    ::setenv("FASTSAE_TEST_KEY", "sk-test", 1);
    HttpChatConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.api_key_env = "FASTSAE_TEST_KEY";
    cfg.timeout_seconds = 5;
    auto client = make_http_chat_client(cfg);
    ScoreOptions opts;
    opts.backoff_ms = 1;
    const auto r = score_features(*client, features(1), opts);
    srv.stop();
    th.join();

    CHECK(hits == 2);
    CHECK(r.scores[0].attempts == 2);
    REQUIRE(r.scores[0].verdict);
    CHECK(r.scores[0].verdict->score == 5);
    CHECK(seen_auth == "Bearer sk-test");
    CHECK(nlohmann::json::parse(seen_body)["model"] == "gpt-4o-2024-11-20");

    HttpChatConfig bad;
    bad.endpoint = "ftp://x/y";
    CHECK_THROWS_AS(make_http_chat_client(bad), UsageError);
}

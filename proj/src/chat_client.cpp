// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>

#include "fastsae/error.hpp"
#include "fastsae/interp.hpp"

namespace fastsae {
namespace {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw UsageError("endpoint '" + url + "' has no scheme");
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw UsageError("endpoint scheme must be http or https: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpChatClient final : public ChatClient {
public:
    explicit HttpChatClient(const HttpChatConfig& cfg) : url_(split_url(cfg.endpoint)), client_(url_.base) {
        if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key) {
            client_.set_bearer_token_auth(key);
        }
        client_.set_connection_timeout(cfg.timeout_seconds);
        client_.set_read_timeout(cfg.timeout_seconds);
        client_.set_write_timeout(cfg.timeout_seconds);
    }

    std::string complete(const ChatRequest& req) override {
        auto res = client_.Post(url_.path, chat_request_json(req), "application/json");
        if (!res) throw TransportError("request to " + url_.base + url_.path + " failed: " + httplib::to_string(res.error()));
        if (res->status != 200) {
            throw TransportError("endpoint returned HTTP " + std::to_string(res->status) + ": " +
                                 res->body.substr(0, 200));
        }
        return chat_response_content(res->body);
    }

private:
    SplitUrl url_;
    httplib::Client client_;
};

}  // namespace

std::unique_ptr<ChatClient> make_http_chat_client(const HttpChatConfig& cfg) {
    return std::make_unique<HttpChatClient>(cfg);
}

}  // namespace fastsae

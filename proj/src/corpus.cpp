// SPDX-License-Identifier: Apache-2.0
#include "fastsae/corpus.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fastsae/error.hpp"

namespace fastsae {

using nlohmann::json;

Role parse_role(std::string_view name) {
    if (name == "system") return Role::system;
    if (name == "user") return Role::user;
    if (name == "assistant") return Role::assistant;
    throw FormatError("unknown role '" + std::string(name) +
                      "' (expected system, user or assistant)");
}

std::string_view role_name(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// dialogue files

std::vector<DialogueInstance> read_dialogues(std::istream& in) {
    std::vector<DialogueInstance> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            DialogueInstance inst;
            const json& id = j.at("id");
            inst.id = id.is_string() ? id.get<std::string>() : id.dump();
            for (const json& t : j.at("turns")) {
                inst.turns.push_back(
                    {parse_role(t.at("role").get<std::string>()), t.at("content").get<std::string>()});
            }
            if (inst.turns.empty()) {
                throw FormatError("instance '" + inst.id + "' has no turns");
            }
            out.push_back(std::move(inst));
        } catch (const json::exception& e) {
            throw FormatError("dialogue line " + std::to_string(lineno) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError("dialogue line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<DialogueInstance> read_dialogues(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dialogue file " + path.string());
    return read_dialogues(in);
}

void write_dialogues(std::ostream& out, const std::vector<DialogueInstance>& data) {
    for (const auto& inst : data) {
        json turns = json::array();
        for (const auto& t : inst.turns) {
            turns.push_back({{"role", role_name(t.role)}, {"content", t.content}});
        }
        out << json{{"id", inst.id}, {"turns", std::move(turns)}}.dump() << '\n';
    }
}

void write_dialogues(const std::filesystem::path& path, const std::vector<DialogueInstance>& data) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dialogue file " + path.string());
    write_dialogues(out, data);
    if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// n-grams

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv_feed(std::uint64_t h, std::string_view s) {
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::vector<std::string_view> split_words(std::string_view text) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        const std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) words.push_back(text.substr(start, i - start));
    }
    return words;
}

}  // namespace

NgramHash hash_ngram(std::string_view joined) { return fnv_feed(kFnvOffset, joined); }

std::unordered_set<NgramHash> generate_ngrams(std::string_view content, const NgramConfig& cfg) {
    if (cfg.n < 1) throw ContractError("n-gram size must be >= 1");
    std::unordered_set<NgramHash> out;
    const auto words = split_words(content);
    if (words.size() < cfg.n) return out;
    out.reserve(words.size() - cfg.n + 1);
    for (std::size_t start = 0; start + cfg.n <= words.size(); ++start) {
        // Same bytes as hashing the window joined by single spaces.
        std::uint64_t h = kFnvOffset;
        for (std::size_t k = 0; k < cfg.n; ++k) {
            if (k) h = fnv_feed(h, " ");
            h = fnv_feed(h, words[start + k]);
        }
        out.insert(h);
    }
    return out;
}

std::unordered_set<NgramHash> instance_ngrams(const DialogueInstance& inst, const NgramConfig& cfg) {
    std::unordered_set<NgramHash> all;
    for (const auto& turn : inst.turns) {
        auto grams = generate_ngrams(turn.content, cfg);
        all.insert(grams.begin(), grams.end());
    }
    return all;
}

std::vector<DialogueInstance> dedup(const std::vector<DialogueInstance>& data, const NgramConfig& cfg) {
    if (cfg.n < 1) throw ContractError("n-gram size must be >= 1");
    const auto count = static_cast<std::ptrdiff_t>(data.size());

    // Extraction is independent per sample; only the greedy pass is ordered.
    std::vector<std::vector<NgramHash>> grams(data.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto set = instance_ngrams(data[i], cfg);
        grams[i].assign(set.begin(), set.end());
    }

    std::unordered_set<NgramHash> seen;
    std::vector<DialogueInstance> kept;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const bool duplicate =
            std::any_of(grams[i].begin(), grams[i].end(), [&](NgramHash h) { return seen.count(h) != 0; });
        if (duplicate) continue;
        seen.insert(grams[i].begin(), grams[i].end());
        kept.push_back(data[i]);
    }
    return kept;
}

// ---------------------------------------------------------------------------
// vocabulary / template

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
    for (std::size_t i = 0; i < words_.size(); ++i) {
        if (!index_.emplace(words_[i], static_cast<TokenId>(i)).second) {
            throw FormatError("duplicate vocabulary entry '" + words_[i] + "'");
        }
    }
    auto it = index_.find(std::string(kUnknown));
    if (it == index_.end()) {
        throw FormatError("vocabulary lacks the reserved " + std::string(kUnknown) + " entry");
    }
    unk_ = it->second;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary " + path.string());
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        words.push_back(line);
    }
    return Vocabulary(std::move(words));
}

TokenId Vocabulary::lookup(std::string_view word) const {
    auto it = index_.find(std::string(word));
    return it == index_.end() ? unk_ : it->second;
}

TokenId Vocabulary::require(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) throw FormatError("vocabulary lacks required token '" + std::string(word) + "'");
    return it->second;
}

bool Vocabulary::contains(std::string_view word) const { return index_.count(std::string(word)) != 0; }

const std::string& Vocabulary::word(TokenId id) const {
    if (id >= words_.size()) throw ContractError("token id " + std::to_string(id) + " outside vocabulary");
    return words_[id];
}

ChatTemplate ChatTemplate::chatml(const Vocabulary& vocab) {
    ChatTemplate t;
    const TokenId begin = vocab.require("<|im_start|>");
    const TokenId end = vocab.require("<|im_end|>");
    for (Role r : {Role::system, Role::user, Role::assistant}) {
        const TokenId role_tok = vocab.require(role_name(r));
        t.markers[r] = {begin, role_tok, end};
        t.special_token_ids.insert(role_tok);
    }
    t.special_token_ids.insert(begin);
    t.special_token_ids.insert(end);
    if (vocab.contains("<|endoftext|>")) t.special_token_ids.insert(vocab.require("<|endoftext|>"));
    return t;
}

void ChatTemplate::validate() const {
    for (const auto& [role, m] : markers) {
        for (TokenId id : {m.begin, m.role, m.end}) {
            if (!is_special(id)) {
                throw ContractError("template marker " + std::to_string(id) + " for role " +
                                    std::string(role_name(role)) + " is not in the special set");
            }
        }
    }
}

TokenSequence apply_chat_template(const DialogueInstance& inst, const ChatTemplate& tmpl,
                                  const Vocabulary& vocab, std::uint64_t instance_id) {
    if (inst.turns.empty()) throw ContractError("instance '" + inst.id + "' has no turns");
    TokenSequence seq;
    seq.instance_id = instance_id;
    for (const auto& turn : inst.turns) {
        auto it = tmpl.markers.find(turn.role);
        if (it == tmpl.markers.end()) {
            throw ContractError("chat template has no markers for role '" +
                                std::string(role_name(turn.role)) + "' (instance " + inst.id + ")");
        }
        const RoleMarkers& m = it->second;
        seq.push(m.begin, true);
        seq.push(m.role, true);
        for (std::string_view w : split_words(turn.content)) {
            TokenId id = vocab.lookup(w);
            if (tmpl.is_special(id)) id = vocab.unknown_id();
            seq.push(id, false);
        }
        seq.push(m.end, true);
    }
    return seq;
}

}  // namespace fastsae

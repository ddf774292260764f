// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace fastsae {

using TokenId = std::uint32_t;

enum class Role { system, user, assistant };

Role parse_role(std::string_view name);
std::string_view role_name(Role role);

struct Turn {
    Role role;
    std::string content;
};

/// One multi-turn conversation. `turns` is never empty once validated.
struct DialogueInstance {
    std::string id;
    std::vector<Turn> turns;

    friend bool operator==(const DialogueInstance& a, const DialogueInstance& b) {
        return a.id == b.id && a.turns.size() == b.turns.size() &&
               std::equal(a.turns.begin(), a.turns.end(), b.turns.begin(),
                          [](const Turn& x, const Turn& y) {
                              return x.role == y.role && x.content == y.content;
                          });
    }
};

/// Token ids plus a parallel special-token mask. `instance_id` is the ordinal of
/// the source instance (FAST) or of the block (BT).
struct TokenSequence {
    std::uint64_t instance_id = 0;
    std::vector<TokenId> tokens;
    std::vector<std::uint8_t> special;

    std::size_t size() const noexcept { return tokens.size(); }
    void push(TokenId t, bool is_special) {
        tokens.push_back(t);
        special.push_back(is_special ? 1 : 0);
    }
};

// --- dialogue files: one JSON object per line, {"id": ..., "turns": [{"role", "content"}]} ---

std::vector<DialogueInstance> read_dialogues(std::istream& in);
std::vector<DialogueInstance> read_dialogues(const std::filesystem::path& path);
void write_dialogues(std::ostream& out, const std::vector<DialogueInstance>& data);
void write_dialogues(const std::filesystem::path& path, const std::vector<DialogueInstance>& data);

// --- n-gram deduplication ---

struct NgramConfig {
    std::size_t n = 20;
};

using NgramHash = std::uint64_t;

/// 64-bit FNV-1a over the space-joined words of one n-gram.
NgramHash hash_ngram(std::string_view joined);

/// Hashes of every window of n consecutive whitespace-delimited words.
std::unordered_set<NgramHash> generate_ngrams(std::string_view content, const NgramConfig& cfg);

/// Union of generate_ngrams over every turn of an instance.
std::unordered_set<NgramHash> instance_ngrams(const DialogueInstance& inst, const NgramConfig& cfg);

/// Greedy first-wins deduplication: a sample survives iff none of its n-gram
/// hashes was produced by an earlier surviving sample.
std::vector<DialogueInstance> dedup(const std::vector<DialogueInstance>& data, const NgramConfig& cfg);

// --- toy tokenizer and chat template ---

/// Word-level vocabulary loaded from a one-token-per-line file; id = 0-based line index.
class Vocabulary {
public:
    static constexpr std::string_view kUnknown = "<unk>";

    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> words);

    static Vocabulary load(const std::filesystem::path& path);

    std::size_t size() const noexcept { return words_.size(); }
    TokenId unknown_id() const noexcept { return unk_; }

    /// Id of an exact word, or the unknown id.
    TokenId lookup(std::string_view word) const;
    /// Id of a word that must be present.
    TokenId require(std::string_view word) const;
    bool contains(std::string_view word) const;
    const std::string& word(TokenId id) const;

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, TokenId> index_;
    TokenId unk_ = 0;
};

struct RoleMarkers {
    TokenId begin;
    TokenId role;
    TokenId end;
};

/// Per-role markers wrapped around each turn: begin, role token, content..., end.
struct ChatTemplate {
    std::map<Role, RoleMarkers> markers;
    std::set<TokenId> special_token_ids;

    /// ChatML-style template: <|im_start|> role ... <|im_end|>, plus the
    /// <|endoftext|> separator in the special set when the vocabulary has it.
    static ChatTemplate chatml(const Vocabulary& vocab);

    /// Throws if any marker id is missing from special_token_ids.
    void validate() const;
    bool is_special(TokenId t) const { return special_token_ids.count(t) != 0; }
};

/// Content words are looked up in the vocabulary; a content word whose id is a
/// template special id is emitted as <unk> so the mask and the special set agree.
TokenSequence apply_chat_template(const DialogueInstance& inst, const ChatTemplate& tmpl,
                                  const Vocabulary& vocab, std::uint64_t instance_id);

}  // namespace fastsae

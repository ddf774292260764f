// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fastsae/error.hpp"
#include "fastsae/schedule.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fastsae;

namespace {

constexpr TokenId kSep = 1;

TokenSequence make_seq(std::uint64_t id, std::size_t len, TokenId base) {
    TokenSequence s;
    s.instance_id = id;
    for (std::size_t i = 0; i < len; ++i) s.push(base + static_cast<TokenId>(i % 1000), i == 0);
    return s;
}

ScheduleConfig bt(std::size_t ctx) {
    ScheduleConfig c;
    c.mode = ScheduleMode::bt;
    c.context_size = ctx;
    c.separator_id = kSep;
    return c;
}

ScheduleConfig fast(std::size_t trunc) {
    ScheduleConfig c;
    c.mode = ScheduleMode::fast;
    c.truncation = trunc;
    return c;
}

}  // namespace

TEST_CASE("BT: 5000 tokens after separators gives 2 blocks and drops 904") {
    // Two instances of 2500 and 2499 tokens plus one separator.
    const std::vector<TokenSequence> seqs{make_seq(0, 2500, 10), make_seq(1, 2499, 10)};
    const auto blocks = schedule_bt(seqs, bt(2048));
    REQUIRE(blocks.size() == 2);
    CHECK(5000 - 2 * 2048 == 904);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        CHECK(blocks[b].size() == 2048);
        CHECK(blocks[b].instance_id == b);
    }
}

TEST_CASE("BT: single exact-size instance is one block equal to it") {
    const auto inst = make_seq(0, 2048, 10);
    const auto blocks = schedule_bt({inst}, bt(2048));
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].tokens == inst.tokens);
    CHECK(blocks[0].special == inst.special);
}

TEST_CASE("BT: flattened blocks prefix the separator-joined stream") {
    Engine rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<TokenSequence> seqs;
        const auto n = testutil::randint(rng, 1, 30);
        for (std::size_t i = 0; i < n; ++i) seqs.push_back(make_seq(i, testutil::randint(rng, 0, 300), 10 + 7 * i));
        const std::size_t ctx = testutil::randint(rng, 1, 257);
        const auto blocks = schedule_bt(seqs, bt(ctx));
        const auto joined = oracle::joined_stream(seqs, kSep);

        std::vector<TokenId> flat;
        for (const auto& b : blocks) {
            REQUIRE(b.size() == ctx);
            flat.insert(flat.end(), b.tokens.begin(), b.tokens.end());
        }
        CHECK(blocks.size() == joined.size() / ctx);
        REQUIRE(flat.size() <= joined.size());
        CHECK(std::equal(flat.begin(), flat.end(), joined.begin()));
    }
}

TEST_CASE("BT: separator is flagged special and masks travel with tokens") {
    TokenSequence a, b;
    a.push(5, true);
    a.push(6, false);
    b.push(7, false);
    const auto blocks = schedule_bt({a, b}, bt(4));
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].tokens == std::vector<TokenId>{5, 6, kSep, 7});
    CHECK(blocks[0].special == std::vector<std::uint8_t>{1, 0, 1, 0});
}

TEST_CASE("FAST: oversized instance truncated at 8192") {
    const auto units = schedule_fast({make_seq(0, 10000, 10)}, fast(8192));
    REQUIRE(units.size() == 1);
    CHECK(units[0].size() == 8192);
    const auto small = schedule_fast({make_seq(0, 5, 10)}, fast(8192));
    REQUIRE(small.size() == 1);
    CHECK(small[0].size() == 5);
}

TEST_CASE("FAST: units are per-instance prefixes in order") {
    Engine rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<TokenSequence> seqs;
        const auto n = testutil::randint(rng, 0, 30);
        for (std::size_t i = 0; i < n; ++i) seqs.push_back(make_seq(i, testutil::randint(rng, 1, 400), 10 + 13 * i));
        const std::size_t trunc = testutil::randint(rng, 1, 500);
        const auto units = schedule_fast(seqs, fast(trunc));
        REQUIRE(units.size() == seqs.size());
        for (std::size_t i = 0; i < units.size(); ++i) {
            CHECK(units[i].instance_id == seqs[i].instance_id);
            CHECK(units[i].size() == std::min(trunc, seqs[i].size()));
            CHECK(std::equal(units[i].tokens.begin(), units[i].tokens.end(), seqs[i].tokens.begin()));
        }
    }
}

TEST_CASE("scheduler guards") {
    CHECK_THROWS_AS(schedule_fast({}, bt(4)), ContractError);
    CHECK_THROWS_AS(schedule_bt({}, fast(4)), ContractError);
    CHECK_THROWS_AS(schedule_bt({}, bt(0)), ContractError);
    CHECK_THROWS_AS(parse_schedule_mode("packed"), UsageError);
    CHECK(schedule_bt({}, bt(4)).empty());
    CHECK(parse_schedule_mode("bt") == ScheduleMode::bt);
}

TEST_CASE("streaming scheduler pulls lazily and matches the vector form") {
    std::vector<TokenSequence> seqs{make_seq(0, 10, 10), make_seq(1, 7, 20), make_seq(2, 20, 30)};
    auto src = make_scheduler(from_vector(seqs), bt(6));
    std::vector<TokenSequence> streamed;
    while (auto b = src()) streamed.push_back(*b);
    const auto direct = schedule_bt(seqs, bt(6));
    REQUIRE(streamed.size() == direct.size());
    for (std::size_t i = 0; i < direct.size(); ++i) CHECK(streamed[i].tokens == direct[i].tokens);
}

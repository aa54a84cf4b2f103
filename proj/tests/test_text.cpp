#include <doctest.h>

#include <random>

#include "sciforge/text.hpp"
#include "test_util.hpp"

using namespace sciforge;

TEST_CASE("normalize lowercases, strips punctuation, collapses whitespace") {
    CHECK(text::normalize("  Hello,   World!  ") == "hello world");
    CHECK(text::normalize("What is 2+2?") == "what is 2 2");
    CHECK(text::normalize("") == "");
    CHECK(text::normalize("...") == "");
}

TEST_CASE("normalize is idempotent on random strings") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> len(0, 200);
    std::uniform_int_distribution<int> byte(1, 255);
    for (int trial = 0; trial < 500; ++trial) {
        std::string s;
        int n = len(rng);
        for (int i = 0; i < n; ++i) s.push_back(static_cast<char>(byte(rng)));
        std::string once = text::normalize(s);
        CHECK(text::normalize(once) == once);
    }
}

TEST_CASE("tokenize splits words and keeps numerals") {
    auto tokens = text::tokenize("The 2nd law: F = m*a.");
    CHECK(tokens == std::vector<std::string>{"the", "2nd", "law", "f", "m", "a"});
    CHECK(text::tokenize("").empty());
    // UTF-8 bytes stay inside tokens
    auto greek = text::tokenize("\xce\xb5 energy");
    REQUIRE(greek.size() == 2);
    CHECK(greek[0] == "\xce\xb5");
}

TEST_CASE("hashed_ngrams windows and dedups") {
    auto tokens = std::vector<std::string>{"a", "b", "c", "d", "e"};
    CHECK(text::hashed_ngrams(tokens, 4).size() == 2);
    CHECK(text::hashed_ngrams({"a", "b", "c"}, 4).empty());
    // repeated text dedups within the set
    auto repeated = std::vector<std::string>{"a", "b", "c", "d", "a", "b", "c", "d"};
    // windows: abcd bcda cdab dabc abcd -> 4 unique
    CHECK(text::hashed_ngrams(repeated, 4).size() == 4);
}

TEST_CASE("ngram_strings preserves window order") {
    auto grams = text::ngram_strings({"x", "y", "z"}, 2);
    CHECK(grams == std::vector<std::string>{"x y", "y z"});
}

TEST_CASE("fnv1a64 and hex64 are stable") {
    CHECK(text::fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(text::hex64(0) == "0000000000000000");
    CHECK(text::hex64(0xdeadbeefull) == "00000000deadbeef");
}

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sciforge::text {

/// Canonical text form used for dedup keys and token matching:
/// ASCII-lowercased, ASCII punctuation removed, whitespace collapsed
/// to single spaces, trimmed. Idempotent. Bytes >= 0x80 pass through
/// untouched (no multilingual normalization).
std::string normalize(std::string_view s);

struct TokenizerConfig {
    bool lowercase = true;
    bool keep_numerals = true;
};

/// Word tokenizer: splits on ASCII whitespace/punctuation, treats any
/// byte >= 0x80 as a word byte so UTF-8 sequences stay inside tokens.
std::vector<std::string> tokenize(std::string_view s, const TokenizerConfig& cfg = {});

/// FNV-1a 64-bit over raw bytes. Stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view s);

/// splitmix64 finalizer, used to derive hash families from seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// 16-char lowercase hex rendering of a 64-bit value.
std::string hex64(std::uint64_t v);

/// Hashes of all consecutive `width`-token windows, deduplicated and
/// sorted. Fewer than `width` tokens yields an empty set.
std::vector<std::uint64_t> hashed_ngrams(const std::vector<std::string>& tokens, int width);

/// Joined `width`-token windows as strings ("a b c"), in window order,
/// duplicates preserved.
std::vector<std::string> ngram_strings(const std::vector<std::string>& tokens, int width);

}  // namespace sciforge::text

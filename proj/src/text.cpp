#include "sciforge/text.hpp"

#include <algorithm>
#include <cctype>

namespace sciforge::text {

namespace {

bool is_ascii_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(unsigned char c) {
    return c < 0x80 && std::ispunct(c);
}

}  // namespace

std::string normalize(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (unsigned char c : s) {
        if (is_ascii_space(c) || is_ascii_punct(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view s, const TokenizerConfig& cfg) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    };
    for (unsigned char c : s) {
        bool word_byte = c >= 0x80 || std::isalpha(c) || (cfg.keep_numerals && std::isdigit(c));
        if (!word_byte) {
            flush();
            continue;
        }
        cur.push_back(static_cast<char>(cfg.lowercase && c < 0x80 ? std::tolower(c) : c));
    }
    flush();
    return tokens;
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

std::vector<std::uint64_t> hashed_ngrams(const std::vector<std::string>& tokens, int width) {
    std::vector<std::uint64_t> grams;
    if (width <= 0 || tokens.size() < static_cast<size_t>(width)) return grams;
    grams.reserve(tokens.size() - static_cast<size_t>(width) + 1);
    std::string window;
    for (size_t i = 0; i + static_cast<size_t>(width) <= tokens.size(); ++i) {
        window.clear();
        for (int j = 0; j < width; ++j) {
            if (j) window.push_back('\x1f');
            window += tokens[i + static_cast<size_t>(j)];
        }
        grams.push_back(fnv1a64(window));
    }
    std::sort(grams.begin(), grams.end());
    grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
    return grams;
}

std::vector<std::string> ngram_strings(const std::vector<std::string>& tokens, int width) {
    std::vector<std::string> grams;
    if (width <= 0 || tokens.size() < static_cast<size_t>(width)) return grams;
    grams.reserve(tokens.size() - static_cast<size_t>(width) + 1);
    for (size_t i = 0; i + static_cast<size_t>(width) <= tokens.size(); ++i) {
        std::string window;
        for (int j = 0; j < width; ++j) {
            if (j) window.push_back(' ');
            window += tokens[i + static_cast<size_t>(j)];
        }
        grams.push_back(std::move(window));
    }
    return grams;
}

}  // namespace sciforge::text

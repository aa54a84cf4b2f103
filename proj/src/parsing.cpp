#include "sciforge/parsing.hpp"

#include <cctype>
#include <vector>

namespace sciforge::parsing {

namespace {

constexpr std::string_view kBoxedMarker = "\\boxed{";

bool is_escaped(std::string_view text, size_t pos) {
    // Counts the run of backslashes immediately before `pos`; an odd run
    // escapes the character.
    size_t n = 0;
    while (pos > n && text[pos - n - 1] == '\\') ++n;
    return (n % 2) == 1;
}

/// Content span of the boxed expression whose marker starts at `start`,
/// or nullopt when braces never balance.
std::optional<std::string> boxed_content_at(std::string_view text, size_t start) {
    size_t open = start + kBoxedMarker.size() - 1;  // position of '{'
    int depth = 0;
    for (size_t i = open; i < text.size(); ++i) {
        char c = text[i];
        if ((c == '{' || c == '}') && is_escaped(text, i)) continue;
        if (c == '{') {
            ++depth;
        } else if (c == '}') {
            --depth;
            if (depth == 0) return std::string(text.substr(open + 1, i - open - 1));
        }
    }
    return std::nullopt;
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<size_t> boxed_marker_positions(std::string_view text) {
    std::vector<size_t> positions;
    size_t pos = 0;
    while ((pos = text.find(kBoxedMarker, pos)) != std::string_view::npos) {
        positions.push_back(pos);
        pos += 1;
    }
    return positions;
}

}  // namespace

std::optional<std::string> extract_last_boxed(std::string_view text) {
    auto positions = boxed_marker_positions(text);
    for (auto it = positions.rbegin(); it != positions.rend(); ++it)
        if (auto content = boxed_content_at(text, *it)) return content;
    return std::nullopt;
}

std::optional<bool> parse_final_decision(std::string_view text) {
    auto positions = boxed_marker_positions(text);
    for (auto it = positions.rbegin(); it != positions.rend(); ++it) {
        auto content = boxed_content_at(text, *it);
        if (!content) continue;
        std::string verdict = lower(trim(*content));
        if (verdict == "yes") return true;
        if (verdict == "no") return false;
    }
    return std::nullopt;
}

ParsedRollout parse_rollout(std::string_view raw) {
    ParsedRollout out;
    out.raw = std::string(raw);
    size_t delim = raw.rfind(kThinkDelimiter);
    if (delim == std::string_view::npos) {
        out.no_think_tag = true;
        out.response = out.raw;
    } else {
        out.think = std::string(raw.substr(0, delim));
        out.response = std::string(raw.substr(delim + kThinkDelimiter.size()));
    }
    out.final_answer = extract_last_boxed(out.response);
    out.no_boxed = !out.final_answer.has_value();
    return out;
}

}  // namespace sciforge::parsing

#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace sciforge::parsing {

/// A rollout split into its reasoning prefix and judged suffix.
struct ParsedRollout {
    std::string raw;
    std::string think;                        // empty when no delimiter present
    std::string response;                     // y_res: text judged by rubrics
    std::optional<std::string> final_answer;  // y_ans: last boxed span in response
    bool no_think_tag = false;
    bool no_boxed = false;
};

inline constexpr std::string_view kThinkDelimiter = "</think>";

/// Splits on the LAST think delimiter; extracts the last balanced-brace
/// boxed span from the response segment via a depth scan. Never fails;
/// missing pieces set the corresponding flag.
ParsedRollout parse_rollout(std::string_view raw);

/// Content of the last balanced \boxed{...} span, or nullopt. Escaped
/// braces (\{ \}) do not affect depth; unbalanced spans are skipped.
std::optional<std::string> extract_last_boxed(std::string_view text);

/// Verdict of the last boxed Yes/No span (case-insensitive), as emitted
/// after "Final Decision:" by the verification prompts. nullopt when no
/// boxed span holds a yes/no.
std::optional<bool> parse_final_decision(std::string_view text);

}  // namespace sciforge::parsing

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sciforge/chat.hpp"
#include "sciforge/corpus.hpp"
#include "sciforge/parsing.hpp"
#include "sciforge/pipeline.hpp"

namespace sciforge::reward {

using corpus::QuestionRecord;
using corpus::RubricCategory;
using corpus::RubricItem;
using parsing::ParsedRollout;
using parsing::parse_rollout;

/// Per-category importance weights plus the dominant final-answer weight.
struct RubricWeights {
    double essential = 1.0;
    double important = 0.7;
    double optional_detail = 0.3;
    double pitfall = 0.9;
    double final_answer = 4.0;

    double for_category(RubricCategory c) const;
};

struct ItemJudgment {
    size_t index = 0;                 // rubric index in record order
    RubricCategory category = RubricCategory::Essential;
    bool verdict_yes = false;         // raw judge verdict
    int satisfied = 0;                // j_i after pitfall inversion
    double weight = 0.0;
    bool judge_failed = false;
};

struct RewardBreakdown {
    int final_answer_correct = 0;     // j_ans
    bool final_answer_present = false;
    std::optional<std::string> final_answer;
    std::vector<ItemJudgment> items;
    double reward = 0.0;              // R(y)
    bool gated = false;
    int judge_failures = 0;
    bool backend_unavailable = false;
    bool no_boxed = false;
    bool no_think_tag = false;
};

/// Rule verification of a boxed final answer against the canonical
/// reference form. Numbers match within relative 1e-4 (absolute 1e-9
/// near zero); choice keys ignore case and parentheses; expressions and
/// tokens match on normalized text. Missing answer scores 0.
int verify_answer_rule(const std::optional<std::string>& final_answer,
                       const pipeline::CanonicalAnswer& reference);

struct JudgeOutcome {
    bool verdict_yes = false;        // raw boxed verdict
    int satisfied = 0;               // mapped j value
    bool failed = false;             // no parseable verdict after retries
    bool backend_unavailable = false;  // every attempt died in transport/status
    std::string raw;                 // last judge response
};

/// Generative final-answer check (open-ended records). Unparseable
/// verdicts resolve to j_ans = 0 with the failure flag set.
JudgeOutcome verify_answer_judge(const std::string& question, const std::string& reference_answer,
                                 const std::optional<std::string>& final_answer,
                                 chat::ChatClient& judge, int max_attempts = 3,
                                 const chat::SamplingParams& params = {});

/// Single rubric-item check. The judge answers whether the behavior (or,
/// for pitfalls, the fault) is present; satisfaction inverts the verdict
/// for Pitfall items. Unparseable verdicts score 0 either way.
JudgeOutcome judge_rubric_item(const std::string& question, const RubricItem& item,
                               const std::string& response_segment, chat::ChatClient& judge,
                               int max_attempts = 3, const chat::SamplingParams& params = {});

/// Text passed as <RUBRIC_ITEM>: "Title (Category): Description".
std::string format_rubric_item(const RubricItem& item);

/// Weighted aggregation R = (w_ans*j_ans + sum(w_i*j_i)) / (w_ans + sum(w_i)).
/// With the gate on and j_ans = 0, R is capped just below 0.5.
RewardBreakdown aggregate(int final_answer_correct, std::vector<ItemJudgment> items,
                          const RubricWeights& weights, bool gate);

struct RewardConfig {
    RubricWeights weights;
    bool gate = false;
    int judge_attempts = 3;
    int judge_concurrency = 4;
    chat::SamplingParams judge_sampling;
};

/// End-to-end scoring of one rollout: verifiable records take the rule
/// path (no rubric terms); open-ended records run the full rubric
/// pipeline on the response segment.
RewardBreakdown score_rollout(const QuestionRecord& rec, const std::string& rollout_text,
                              chat::ChatClient* judge, const RewardConfig& cfg);

struct RewardStats {
    double mean = 0.0;
    double stddev = 0.0;  // population
    std::array<long, 20> histogram{};
    size_t count = 0;
};

RewardStats reward_stats(std::span<const double> rewards);

}  // namespace sciforge::reward

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sciforge/chat.hpp"
#include "sciforge/corpus.hpp"

namespace sciforge::difficulty {

using corpus::QuestionRecord;

struct GeneratorConfig {
    chat::SamplingParams sampling;  // non-thinking defaults: 0.7 / 0.8 / 20
    int rollouts = 8;
    int max_attempts = 3;   // per-rollout generation retries
    int judge_attempts = 3; // per-verification retries (open-ended path)
    int concurrency = 4;    // rollouts in flight per question
};

struct DifficultyEstimate {
    std::string question_id;
    int successes = 0;
    int trials = 0;
    std::vector<bool> verdicts;  // per-rollout, in rollout order
    bool degraded = false;       // some rollout errored out and counted as failure

    double value() const { return trials > 0 ? static_cast<double>(successes) / trials : 0.0; }
    bool trivial() const { return trials > 0 && successes == trials; }
};

/// Runs `cfg.rollouts` independent generations of the record's prompt,
/// verifies each rollout's final answer (rule-based for verifiable
/// records, generative judge for open-ended ones), and returns the
/// success count. A rollout that keeps failing counts as incorrect and
/// flags the estimate as degraded.
DifficultyEstimate estimate_difficulty(const QuestionRecord& rec, chat::ChatClient& generator,
                                       chat::ChatClient* judge, const GeneratorConfig& cfg);

enum class MissingEstimatePolicy { Fail, PassThroughUnscored };

struct TrivialityResult {
    std::vector<QuestionRecord> kept;  // difficulty_eighths set where estimated
    std::vector<std::string> dropped_trivial_ids;
    std::vector<std::string> unscored_ids;
};

/// Drops exactly the records whose estimate solved every trial; all other
/// estimated records are annotated with difficulty k/8. Requires
/// estimates with 8 trials for annotation (the record schema stores the
/// numerator of k/8).
TrivialityResult apply_triviality_filter(const std::vector<QuestionRecord>& records,
                                         const std::map<std::string, DifficultyEstimate>& estimates,
                                         MissingEstimatePolicy policy = MissingEstimatePolicy::Fail);

}  // namespace sciforge::difficulty

#include "sciforge/difficulty.hpp"

#include <atomic>
#include <thread>

#include "sciforge/parsing.hpp"
#include "sciforge/pipeline.hpp"
#include "sciforge/prompts.hpp"
#include "sciforge/reward.hpp"

namespace sciforge::difficulty {

namespace {

struct RolloutOutcome {
    bool correct = false;
    bool errored = false;
};

RolloutOutcome run_rollout(const QuestionRecord& rec, const std::string& prompt,
                           chat::ChatClient& generator, chat::ChatClient* judge,
                           const GeneratorConfig& cfg,
                           const std::optional<pipeline::CanonicalAnswer>& canonical) {
    RolloutOutcome outcome;
    chat::ChatResult generation;
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        generation = generator.complete({{"user", prompt}}, cfg.sampling);
        if (generation.ok()) break;
    }
    if (!generation.ok()) {
        outcome.errored = true;
        return outcome;
    }
    parsing::ParsedRollout parsed = parsing::parse_rollout(generation.text);
    if (rec.verification && *rec.verification == corpus::Verification::Verifiable && canonical) {
        outcome.correct = reward::verify_answer_rule(parsed.final_answer, *canonical) == 1;
        return outcome;
    }
    if (!judge) {
        outcome.errored = true;
        return outcome;
    }
    auto judged = reward::verify_answer_judge(rec.question, rec.reference_answer,
                                              parsed.final_answer, *judge, cfg.judge_attempts);
    outcome.correct = judged.satisfied == 1;
    outcome.errored = judged.failed;
    return outcome;
}

}  // namespace

DifficultyEstimate estimate_difficulty(const QuestionRecord& rec, chat::ChatClient& generator,
                                       chat::ChatClient* judge, const GeneratorConfig& cfg) {
    if (cfg.rollouts < 1) throw corpus::CorpusError("rollout count must be at least 1");
    DifficultyEstimate est;
    est.question_id = rec.id;
    est.trials = cfg.rollouts;
    est.verdicts.assign(static_cast<size_t>(cfg.rollouts), false);

    std::string prompt = corpus::render_prompt(rec);
    auto canonical = pipeline::canonicalize_answer(rec.reference_answer);

    std::atomic<int> next{0};
    std::atomic<bool> degraded{false};
    std::vector<char> verdicts(static_cast<size_t>(cfg.rollouts), 0);
    auto worker = [&] {
        while (true) {
            int i = next.fetch_add(1);
            if (i >= cfg.rollouts) break;
            RolloutOutcome outcome = run_rollout(rec, prompt, generator, judge, cfg, canonical);
            verdicts[static_cast<size_t>(i)] = outcome.correct ? 1 : 0;
            if (outcome.errored) degraded = true;
        }
    };
    int threads = std::max(1, std::min(cfg.concurrency, cfg.rollouts));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (int i = 0; i < cfg.rollouts; ++i) {
        est.verdicts[static_cast<size_t>(i)] = verdicts[static_cast<size_t>(i)] != 0;
        if (est.verdicts[static_cast<size_t>(i)]) ++est.successes;
    }
    est.degraded = degraded.load();
    return est;
}

TrivialityResult apply_triviality_filter(const std::vector<QuestionRecord>& records,
                                         const std::map<std::string, DifficultyEstimate>& estimates,
                                         MissingEstimatePolicy policy) {
    TrivialityResult result;
    for (const auto& rec : records) {
        auto it = estimates.find(rec.id);
        if (it == estimates.end()) {
            if (policy == MissingEstimatePolicy::Fail)
                throw corpus::CorpusError("record " + rec.id + " has no difficulty estimate");
            result.unscored_ids.push_back(rec.id);
            result.kept.push_back(rec);
            continue;
        }
        const DifficultyEstimate& est = it->second;
        if (est.trivial()) {
            result.dropped_trivial_ids.push_back(rec.id);
            continue;
        }
        if (est.trials != 8)
            throw corpus::CorpusError("record " + rec.id + ": difficulty annotation requires 8 " +
                                      "trials, got " + std::to_string(est.trials));
        QuestionRecord annotated = rec;
        annotated.difficulty_eighths = est.successes;
        if (est.degraded) annotated.extra["difficulty_degraded"] = true;
        result.kept.push_back(std::move(annotated));
    }
    return result;
}

}  // namespace sciforge::difficulty

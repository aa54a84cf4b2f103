#include "sciforge/reward.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "sciforge/prompts.hpp"
#include "sciforge/text.hpp"

namespace sciforge::reward {

double RubricWeights::for_category(RubricCategory c) const {
    switch (c) {
        case RubricCategory::Essential: return essential;
        case RubricCategory::Important: return important;
        case RubricCategory::Optional: return optional_detail;
        case RubricCategory::Pitfall: return pitfall;
    }
    return essential;
}

namespace {

constexpr double kRelativeTolerance = 1e-4;
constexpr double kAbsoluteTolerance = 1e-9;

bool numbers_match(double candidate, double reference) {
    double diff = std::abs(candidate - reference);
    double scale = std::abs(reference);
    if (scale < kAbsoluteTolerance) return diff <= kAbsoluteTolerance;
    return diff / scale <= kRelativeTolerance;
}

std::string squash(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s)
        if (!std::isspace(c)) out.push_back(static_cast<char>(c));
    return out;
}

}  // namespace

int verify_answer_rule(const std::optional<std::string>& final_answer,
                       const pipeline::CanonicalAnswer& reference) {
    if (!final_answer) return 0;
    auto candidate = pipeline::canonicalize_answer(*final_answer);
    if (!candidate) return 0;
    using Kind = pipeline::CanonicalAnswer::Kind;
    switch (reference.kind) {
        case Kind::Number: {
            if (candidate->kind != Kind::Number) return 0;
            if (!candidate->unit.empty() && !reference.unit.empty() &&
                text::normalize(candidate->unit) != text::normalize(reference.unit))
                return 0;
            return numbers_match(candidate->value, reference.value) ? 1 : 0;
        }
        case Kind::ChoiceKey:
            return candidate->kind == Kind::ChoiceKey && candidate->text == reference.text ? 1 : 0;
        case Kind::Expression:
            if (candidate->kind == Kind::Expression || candidate->kind == Kind::Token)
                return squash(candidate->text) == squash(reference.text) ? 1 : 0;
            return 0;
        case Kind::Token:
            if (candidate->kind == Kind::Token || candidate->kind == Kind::Expression)
                return text::normalize(candidate->text) == text::normalize(reference.text) ? 1 : 0;
            return 0;
    }
    return 0;
}

JudgeOutcome verify_answer_judge(const std::string& question, const std::string& reference_answer,
                                 const std::optional<std::string>& final_answer,
                                 chat::ChatClient& judge, int max_attempts,
                                 const chat::SamplingParams& params) {
    JudgeOutcome outcome;
    if (!final_answer) {
        // No boxed span: conservatively incorrect, no judge call needed.
        return outcome;
    }
    std::string prompt = prompts::render_answer_verification(question, reference_answer,
                                                             *final_answer);
    bool any_response = false;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        auto result = judge.complete({{"user", prompt}}, params);
        if (!result.ok()) continue;
        any_response = true;
        outcome.raw = result.text;
        if (auto verdict = parsing::parse_final_decision(result.text)) {
            outcome.verdict_yes = *verdict;
            outcome.satisfied = *verdict ? 1 : 0;
            return outcome;
        }
    }
    outcome.failed = true;  // "When in doubt, answer No"
    outcome.backend_unavailable = !any_response;
    return outcome;
}

std::string format_rubric_item(const RubricItem& item) {
    return item.title + " (" + std::string(corpus::to_string(item.category)) + "): " +
           item.description;
}

JudgeOutcome judge_rubric_item(const std::string& question, const RubricItem& item,
                               const std::string& response_segment, chat::ChatClient& judge,
                               int max_attempts, const chat::SamplingParams& params) {
    JudgeOutcome outcome;
    std::vector<chat::ChatMessage> messages = {
        {"system", std::string(prompts::kRubricJudgeSystemPrompt)},
        {"user", prompts::render_rubric_judge_user(question, format_rubric_item(item),
                                                   response_segment)}};
    bool any_response = false;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        auto result = judge.complete(messages, params);
        if (!result.ok()) continue;
        any_response = true;
        outcome.raw = result.text;
        if (auto verdict = parsing::parse_final_decision(result.text)) {
            outcome.verdict_yes = *verdict;
            // Pitfall: judge says Yes when the fault exists, i.e. the
            // criterion is NOT met.
            if (item.category == RubricCategory::Pitfall)
                outcome.satisfied = *verdict ? 0 : 1;
            else
                outcome.satisfied = *verdict ? 1 : 0;
            return outcome;
        }
    }
    outcome.failed = true;
    outcome.satisfied = 0;  // conservative for every category
    outcome.backend_unavailable = !any_response;
    return outcome;
}

RewardBreakdown aggregate(int final_answer_correct, std::vector<ItemJudgment> items,
                          const RubricWeights& weights, bool gate) {
    RewardBreakdown out;
    out.final_answer_correct = final_answer_correct;
    double numerator = weights.final_answer * final_answer_correct;
    double denominator = weights.final_answer;
    for (auto& item : items) {
        item.weight = weights.for_category(item.category);
        numerator += item.weight * item.satisfied;
        denominator += item.weight;
        if (item.judge_failed) ++out.judge_failures;
    }
    out.items = std::move(items);
    out.reward = numerator / denominator;
    if (gate && final_answer_correct == 0) {
        constexpr double kGateCap = 0.5 - 1e-6;
        if (out.reward > kGateCap) {
            out.reward = kGateCap;
            out.gated = true;
        }
    }
    return out;
}

RewardBreakdown score_rollout(const QuestionRecord& rec, const std::string& rollout_text,
                              chat::ChatClient* judge, const RewardConfig& cfg) {
    ParsedRollout parsed = parse_rollout(rollout_text);

    if (rec.verification && *rec.verification == corpus::Verification::Verifiable) {
        auto canonical = pipeline::canonicalize_answer(rec.reference_answer);
        int j_ans = canonical ? verify_answer_rule(parsed.final_answer, *canonical) : 0;
        RewardBreakdown out = aggregate(j_ans, {}, cfg.weights, cfg.gate);
        out.final_answer = parsed.final_answer;
        out.final_answer_present = parsed.final_answer.has_value();
        out.no_boxed = parsed.no_boxed;
        out.no_think_tag = parsed.no_think_tag;
        return out;
    }

    if (!judge) throw std::invalid_argument("open-ended scoring requires a judge backend");

    std::vector<ItemJudgment> items(rec.rubrics.size());
    int extra_failures = 0;
    std::atomic<bool> backend_unavailable{false};
    {
        std::atomic<size_t> next{0};
        auto worker = [&] {
            while (true) {
                size_t i = next.fetch_add(1);
                if (i >= rec.rubrics.size()) break;
                JudgeOutcome res = judge_rubric_item(rec.question, rec.rubrics[i], parsed.response,
                                                     *judge, cfg.judge_attempts, cfg.judge_sampling);
                items[i] = {i, rec.rubrics[i].category, res.verdict_yes, res.satisfied, 0.0,
                            res.failed};
                if (res.backend_unavailable) backend_unavailable = true;
            }
        };
        int threads = std::max(1, std::min<int>(cfg.judge_concurrency,
                                                static_cast<int>(rec.rubrics.size())));
        if (threads <= 1 || rec.rubrics.empty()) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
    }

    JudgeOutcome ans = verify_answer_judge(rec.question, rec.reference_answer, parsed.final_answer,
                                           *judge, cfg.judge_attempts, cfg.judge_sampling);
    if (ans.failed) ++extra_failures;
    if (ans.backend_unavailable) backend_unavailable = true;

    RewardBreakdown out = aggregate(ans.satisfied, std::move(items), cfg.weights, cfg.gate);
    out.judge_failures += extra_failures;
    out.backend_unavailable = backend_unavailable.load();
    out.final_answer = parsed.final_answer;
    out.final_answer_present = parsed.final_answer.has_value();
    out.no_boxed = parsed.no_boxed;
    out.no_think_tag = parsed.no_think_tag;
    return out;
}

RewardStats reward_stats(std::span<const double> rewards) {
    if (rewards.empty()) throw std::invalid_argument("reward_stats requires at least one reward");
    RewardStats stats;
    stats.count = rewards.size();
    double sum = 0.0;
    for (double r : rewards) sum += r;
    stats.mean = sum / static_cast<double>(rewards.size());
    double sq = 0.0;
    for (double r : rewards) sq += (r - stats.mean) * (r - stats.mean);
    stats.stddev = std::sqrt(sq / static_cast<double>(rewards.size()));
    for (double r : rewards) {
        int bin = static_cast<int>(r * 20.0);
        if (bin < 0) bin = 0;
        if (bin > 19) bin = 19;
        stats.histogram[static_cast<size_t>(bin)] += 1;
    }
    return stats;
}

}  // namespace sciforge::reward

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sciforge/chat.hpp"
#include "sciforge/corpus.hpp"

namespace sciforge::pipeline {

using corpus::QuestionRecord;
using corpus::RubricItem;
using corpus::Subject;
using corpus::Verification;

// ---------------------------------------------------------------------------
// clean

struct DropRecord {
    std::string id;
    std::string reason;
};

struct CleanResult {
    std::vector<QuestionRecord> kept;
    std::vector<DropRecord> dropped;
    std::map<std::string, long> reason_counts;
};

/// Drop reason for a single record, or nullopt to keep it. Reasons:
/// empty_question, empty_answer, placeholder.
std::optional<std::string> clean_reason(const QuestionRecord& rec);
CleanResult clean(std::vector<QuestionRecord> records);

// ---------------------------------------------------------------------------
// subject assignment

class SubjectClassifier {
public:
    virtual ~SubjectClassifier() = default;
    /// Returns a subject label; the caller validates it against the enum.
    virtual chat::ChatResult classify(const QuestionRecord& rec) = 0;
};

/// Deterministic keyword-table fallback. First subject whose keyword
/// list hits the normalized question wins; defaults to science.
class KeywordSubjectClassifier : public SubjectClassifier {
public:
    chat::ChatResult classify(const QuestionRecord& rec) override;
    static const std::vector<std::pair<std::string, Subject>>& keyword_table();
};

/// Scripted classifier for tests: id -> label map with optional default.
class ScriptedSubjectClassifier : public SubjectClassifier {
public:
    void set(std::string id, std::string label) { labels_[std::move(id)] = std::move(label); }
    void set_default(std::string label) { default_ = std::move(label); }
    chat::ChatResult classify(const QuestionRecord& rec) override;

private:
    std::map<std::string, std::string> labels_;
    std::optional<std::string> default_;
};

/// Delegates to a chat-completion backend with a fixed classification
/// instruction; the model must answer with a bare subject token.
class ChatSubjectClassifier : public SubjectClassifier {
public:
    ChatSubjectClassifier(chat::ChatClient& client, chat::SamplingParams params = {});
    chat::ChatResult classify(const QuestionRecord& rec) override;

private:
    chat::ChatClient& client_;
    chat::SamplingParams params_;
};

struct AssignSubjectOutcome {
    bool fell_back = false;  // classifier kept failing; labeled science
    int attempts = 0;
};

/// Sets rec.subject from the classifier; retries invalid labels and
/// failures up to `max_attempts`, then labels science.
AssignSubjectOutcome assign_subject(QuestionRecord& rec, SubjectClassifier& classifier,
                                    int max_attempts = 3);

// ---------------------------------------------------------------------------
// answer canonicalization / verifiability split

struct CanonicalAnswer {
    enum class Kind { Number, Expression, ChoiceKey, Token };
    Kind kind = Kind::Token;
    double value = 0.0;     // Number
    std::string unit;       // Number: stripped unit text, may be empty
    std::string text;       // Expression/Token normalized text; ChoiceKey letter

    bool operator==(const CanonicalAnswer&) const = default;
};

/// Total and deterministic; failure is the nullopt value.
std::optional<CanonicalAnswer> canonicalize_answer(std::string_view reference_answer);

enum class SplitOutcome { Verifiable, OpenEnded, DroppedOpenEndedMath };

/// Sets rec.verification from canonicalize_answer; open-ended math is the
/// caller-visible drop signal.
SplitOutcome split_verifiability(QuestionRecord& rec);

// ---------------------------------------------------------------------------
// dedup

struct DedupExactResult {
    std::vector<QuestionRecord> kept;
    std::vector<DropRecord> dropped;  // reason = exact_duplicate_of:<id>
};

DedupExactResult dedup_exact(const std::vector<QuestionRecord>& records);

struct MinHashConfig {
    int shingle_width = 3;
    int permutations = 128;
    std::uint64_t seed = 0x5c1f04ced117ull;
};

struct ShingleSignature {
    std::vector<std::uint64_t> values;  // length = permutations
    size_t shingle_count = 0;
};

ShingleSignature minhash_signature(std::string_view question_text, const MinHashConfig& cfg);

/// Fraction of equal positions; both signatures must share one config.
double estimate_jaccard(const ShingleSignature& a, const ShingleSignature& b);

struct NearDupPair {
    std::string kept_id;
    std::string dropped_id;
    double estimated_jaccard = 0.0;
};

struct DedupNearResult {
    std::vector<QuestionRecord> kept;
    std::vector<NearDupPair> pairs;
};

/// Drops any record whose estimated Jaccard against an earlier-retained
/// record reaches the threshold. Signatures are compared in full against
/// every retained record, so decisions depend only on (records, config).
DedupNearResult dedup_near(const std::vector<QuestionRecord>& records, double jaccard_threshold,
                           const MinHashConfig& cfg = {});

// ---------------------------------------------------------------------------
// conflict resolution

struct ConflictGroupLog {
    std::string question_id;  // id of the first record in the group
    std::vector<std::string> member_ids;
    bool equivalent = false;
    bool judge_failed = false;
};

struct ConflictResult {
    std::vector<QuestionRecord> kept;
    std::vector<ConflictGroupLog> groups;
};

/// Groups records by normalized question; groups whose answers differ on
/// normalized text are conflicts. All answers are judge-verified against
/// the first; equivalent groups collapse to the first record, anything
/// else (including judge failure or judge == nullptr) drops the group.
ConflictResult resolve_conflicts(const std::vector<QuestionRecord>& records,
                                 chat::ChatClient* judge, int max_attempts = 3,
                                 const chat::SamplingParams& params = {});

// ---------------------------------------------------------------------------
// contamination

struct ContaminationConfig {
    int ngram_width = 13;
    double overlap_threshold = 0.8;
};

class BenchmarkIndex {
public:
    BenchmarkIndex(const std::vector<std::string>& benchmark_questions,
                   const ContaminationConfig& cfg);

    /// Highest overlap fraction of the question's n-grams against any
    /// single benchmark question. Questions shorter than the width fall
    /// back to normalized whole-question containment (returns 0 or 1).
    double max_overlap(std::string_view question) const;

    size_t size() const { return per_benchmark_gram_counts_.size(); }

private:
    ContaminationConfig cfg_;
    std::map<std::uint64_t, std::vector<std::uint32_t>> gram_to_benchmarks_;
    std::vector<size_t> per_benchmark_gram_counts_;
    std::vector<std::string> normalized_benchmarks_;
};

struct ContaminationResult {
    std::vector<QuestionRecord> kept;
    std::vector<DropRecord> dropped;  // reason = contaminated overlap=<frac>
};

ContaminationResult remove_contamination(const std::vector<QuestionRecord>& records,
                                         const BenchmarkIndex& index,
                                         const ContaminationConfig& cfg);

/// Loads a benchmark corpus: JSONL objects with a `question` field, or
/// plain newline-delimited text.
std::vector<std::string> load_benchmark_questions(const std::string& path);

// ---------------------------------------------------------------------------
// rubric generation

struct RubricGenConfig {
    int max_attempts = 3;
    int min_items = 7;
    int max_items = 20;
    chat::SamplingParams sampling;
};

struct RubricGenOutcome {
    bool ok = false;
    std::vector<RubricItem> items;
    std::string error;
    int attempts = 0;
};

/// Parses the trailing JSON array of {title, description, category}
/// objects out of a generator response.
std::optional<std::vector<RubricItem>> parse_rubric_array(std::string_view response,
                                                          std::string* error = nullptr);

/// Renders the rubric-generation prompt, calls the generator, validates
/// categories and item-count bounds, and attaches items on success.
RubricGenOutcome generate_rubrics(QuestionRecord& rec, chat::ChatClient& generator,
                                  const RubricGenConfig& cfg = {});

}  // namespace sciforge::pipeline

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sciforge::corpus {

using ordered_json = nlohmann::ordered_json;

enum class Subject { Math, Physics, Chemistry, Biology, Medicine, Cs, Economics, Science };
enum class Verification { Verifiable, OpenEnded };
enum class RubricCategory { Essential, Important, Optional, Pitfall };
enum class SftMode { Think, Instruct };

std::string_view to_string(Subject s);
std::string_view to_string(Verification v);
std::string_view to_string(RubricCategory c);
std::string_view to_string(SftMode m);
std::optional<Subject> parse_subject(std::string_view s);
std::optional<Verification> parse_verification(std::string_view s);
std::optional<RubricCategory> parse_rubric_category(std::string_view s);
std::optional<SftMode> parse_sft_mode(std::string_view s);

struct RubricItem {
    std::string title;
    std::string description;
    RubricCategory category = RubricCategory::Essential;

    bool operator==(const RubricItem&) const = default;
};

/// One dataset instance. subject/verification/difficulty are optional
/// because records flow through the pipeline before the corresponding
/// stage has run. `difficulty_eighths` is the integer numerator k of
/// d = k/8; it is serialized as the bare integer, never a float.
struct QuestionRecord {
    std::string id;
    std::string question;
    std::string reference_answer;
    std::optional<Subject> subject;
    std::optional<Verification> verification;
    std::optional<int> difficulty_eighths;
    std::vector<RubricItem> rubrics;
    std::optional<std::string> source;
    ordered_json extra = ordered_json::object();  // unknown fields, preserved on pass-through

    double difficulty() const { return difficulty_eighths ? *difficulty_eighths / 8.0 : -1.0; }
    bool operator==(const QuestionRecord&) const = default;
};

struct SftExample {
    std::string question_id;
    std::string prompt;
    std::string response;
    SftMode mode = SftMode::Think;
    ordered_json extra = ordered_json::object();

    bool operator==(const SftExample&) const = default;
};

/// Stable content id: hex FNV-1a of the normalized question text.
std::string make_record_id(std::string_view question);

ordered_json to_json(const RubricItem& item);
ordered_json to_json(const QuestionRecord& rec);
ordered_json to_json(const SftExample& ex);
RubricItem rubric_item_from_json(const ordered_json& j);
QuestionRecord record_from_json(const ordered_json& j);
SftExample sft_example_from_json(const ordered_json& j);

/// Full-record invariant check; returns the first violated invariant or
/// nullopt when the record is valid. Matches the documented record
/// invariants exactly (property-tested).
std::optional<std::string> validate(const QuestionRecord& rec);
std::optional<std::string> validate(const RubricItem& item);
std::optional<std::string> validate(const SftExample& ex);

enum class ErrorPolicy { Fail, Skip };

struct LineError {
    long line = 0;
    std::string message;
};

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Streaming line reader over plain or gzip files (magic-byte detected).
/// Holds one line in memory at a time.
class LineReader {
public:
    explicit LineReader(const std::string& path);
    ~LineReader();
    LineReader(const LineReader&) = delete;
    LineReader& operator=(const LineReader&) = delete;

    /// Reads the next line (without trailing newline). Returns false at EOF.
    bool next(std::string& line);
    long line_number() const { return line_number_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    long line_number_ = 0;
};

/// Streams records out of a JSONL file. Malformed lines and schema
/// violations honor the error policy; skipped lines are reported to
/// `on_error` with their line numbers.
class JsonlReader {
public:
    JsonlReader(const std::string& path, ErrorPolicy policy = ErrorPolicy::Fail);

    /// Raw parse: next JSON object, or nullopt at EOF.
    std::optional<ordered_json> next_json();

    void add_error(LineError err);
    const std::vector<LineError>& errors() const { return errors_; }
    long line_number() const { return reader_.line_number(); }

private:
    LineReader reader_;
    ErrorPolicy policy_;
    std::vector<LineError> errors_;
    std::string buf_;
};

std::vector<QuestionRecord> read_question_records(const std::string& path,
                                                  ErrorPolicy policy = ErrorPolicy::Fail,
                                                  std::vector<LineError>* errors = nullptr);
std::vector<SftExample> read_sft_examples(const std::string& path,
                                          ErrorPolicy policy = ErrorPolicy::Fail,
                                          std::vector<LineError>* errors = nullptr);

/// Streaming variants: invoke `fn` per record without materializing the file.
void for_each_question_record(const std::string& path, ErrorPolicy policy,
                              std::vector<LineError>* errors,
                              const std::function<void(QuestionRecord&&)>& fn);
void for_each_sft_example(const std::string& path, ErrorPolicy policy,
                          std::vector<LineError>* errors,
                          const std::function<void(SftExample&&)>& fn);

/// Writes one JSON object per line to `path.tmp`, then renames onto
/// `path`. On error the partial file is removed. Output is byte-stable
/// for identical input (insertion-ordered fields, integer difficulty).
class JsonlWriter {
public:
    explicit JsonlWriter(const std::string& path);
    ~JsonlWriter();
    JsonlWriter(const JsonlWriter&) = delete;
    JsonlWriter& operator=(const JsonlWriter&) = delete;

    void write(const ordered_json& j);
    void write(const QuestionRecord& rec) { write(to_json(rec)); }
    void write(const SftExample& ex) { write(to_json(ex)); }

    /// Flushes and renames the temp file into place. Returns lines written.
    long commit();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

long write_question_records(const std::vector<QuestionRecord>& recs, const std::string& path);

/// Label used for <SUBJECT> substitution in the instruction template;
/// the enum token itself ("science" for the general domain).
std::string_view subject_label(std::optional<Subject> s);

/// Renders the instruction template for a record.
std::string render_prompt(const QuestionRecord& rec);

}  // namespace sciforge::corpus

#include "sciforge/corpus.hpp"

#include <zlib.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sciforge/prompts.hpp"
#include "sciforge/text.hpp"

namespace sciforge::corpus {

namespace fs = std::filesystem;

std::string_view to_string(Subject s) {
    switch (s) {
        case Subject::Math: return "math";
        case Subject::Physics: return "physics";
        case Subject::Chemistry: return "chemistry";
        case Subject::Biology: return "biology";
        case Subject::Medicine: return "medicine";
        case Subject::Cs: return "cs";
        case Subject::Economics: return "economics";
        case Subject::Science: return "science";
    }
    return "science";
}

std::string_view to_string(Verification v) {
    return v == Verification::Verifiable ? "Verifiable" : "OpenEnded";
}

std::string_view to_string(RubricCategory c) {
    switch (c) {
        case RubricCategory::Essential: return "Essential";
        case RubricCategory::Important: return "Important";
        case RubricCategory::Optional: return "Optional";
        case RubricCategory::Pitfall: return "Pitfall";
    }
    return "Essential";
}

std::string_view to_string(SftMode m) { return m == SftMode::Think ? "think" : "instruct"; }

std::optional<Subject> parse_subject(std::string_view s) {
    static const std::array<Subject, 8> all = {Subject::Math,     Subject::Physics,
                                               Subject::Chemistry, Subject::Biology,
                                               Subject::Medicine,  Subject::Cs,
                                               Subject::Economics, Subject::Science};
    for (Subject sub : all)
        if (to_string(sub) == s) return sub;
    return std::nullopt;
}

std::optional<Verification> parse_verification(std::string_view s) {
    if (s == "Verifiable") return Verification::Verifiable;
    if (s == "OpenEnded") return Verification::OpenEnded;
    return std::nullopt;
}

std::optional<RubricCategory> parse_rubric_category(std::string_view s) {
    if (s == "Essential") return RubricCategory::Essential;
    if (s == "Important") return RubricCategory::Important;
    if (s == "Optional") return RubricCategory::Optional;
    if (s == "Pitfall") return RubricCategory::Pitfall;
    return std::nullopt;
}

std::optional<SftMode> parse_sft_mode(std::string_view s) {
    if (s == "think") return SftMode::Think;
    if (s == "instruct") return SftMode::Instruct;
    return std::nullopt;
}

std::string make_record_id(std::string_view question) {
    return text::hex64(text::fnv1a64(text::normalize(question)));
}

namespace {

const char* kKnownRecordFields[] = {"id",         "question",   "reference_answer",
                                    "subject",    "verification", "difficulty",
                                    "rubrics",    "source"};
const char* kKnownSftFields[] = {"question_id", "prompt", "response", "mode"};

bool is_known(const char* const* names, size_t n, const std::string& key) {
    for (size_t i = 0; i < n; ++i)
        if (key == names[i]) return true;
    return false;
}

std::string require_string(const ordered_json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_string())
        throw CorpusError(std::string("missing or non-string field '") + field + "'");
    return it->get<std::string>();
}

}  // namespace

ordered_json to_json(const RubricItem& item) {
    ordered_json j = ordered_json::object();
    j["title"] = item.title;
    j["description"] = item.description;
    j["category"] = std::string(to_string(item.category));
    return j;
}

ordered_json to_json(const QuestionRecord& rec) {
    ordered_json j = ordered_json::object();
    j["id"] = rec.id;
    j["question"] = rec.question;
    j["reference_answer"] = rec.reference_answer;
    if (rec.subject) j["subject"] = std::string(to_string(*rec.subject));
    if (rec.verification) j["verification"] = std::string(to_string(*rec.verification));
    if (rec.difficulty_eighths) j["difficulty"] = *rec.difficulty_eighths;
    if (!rec.rubrics.empty()) {
        ordered_json arr = ordered_json::array();
        for (const auto& r : rec.rubrics) arr.push_back(to_json(r));
        j["rubrics"] = std::move(arr);
    }
    if (rec.source) j["source"] = *rec.source;
    for (const auto& [key, value] : rec.extra.items()) j[key] = value;
    return j;
}

ordered_json to_json(const SftExample& ex) {
    ordered_json j = ordered_json::object();
    j["question_id"] = ex.question_id;
    j["prompt"] = ex.prompt;
    j["response"] = ex.response;
    j["mode"] = std::string(to_string(ex.mode));
    for (const auto& [key, value] : ex.extra.items()) j[key] = value;
    return j;
}

RubricItem rubric_item_from_json(const ordered_json& j) {
    if (!j.is_object()) throw CorpusError("rubric item is not an object");
    RubricItem item;
    item.title = require_string(j, "title");
    item.description = require_string(j, "description");
    auto cat = parse_rubric_category(require_string(j, "category"));
    if (!cat) throw CorpusError("invalid rubric category '" + j["category"].get<std::string>() + "'");
    item.category = *cat;
    return item;
}

QuestionRecord record_from_json(const ordered_json& j) {
    if (!j.is_object()) throw CorpusError("record line is not a JSON object");
    QuestionRecord rec;
    rec.question = require_string(j, "question");
    rec.reference_answer = require_string(j, "reference_answer");
    if (auto it = j.find("id"); it != j.end() && it->is_string() && !it->get<std::string>().empty())
        rec.id = it->get<std::string>();
    else
        rec.id = make_record_id(rec.question);
    if (auto it = j.find("subject"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw CorpusError("non-string subject");
        auto s = parse_subject(it->get<std::string>());
        if (!s) throw CorpusError("unknown subject '" + it->get<std::string>() + "'");
        rec.subject = s;
    }
    if (auto it = j.find("verification"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw CorpusError("non-string verification");
        auto v = parse_verification(it->get<std::string>());
        if (!v) throw CorpusError("unknown verification '" + it->get<std::string>() + "'");
        rec.verification = v;
    }
    if (auto it = j.find("difficulty"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer())
            throw CorpusError("difficulty must be the integer numerator k of k/8");
        int k = it->get<int>();
        if (k < 0 || k > 8) throw CorpusError("difficulty numerator out of range [0,8]");
        rec.difficulty_eighths = k;
    }
    if (auto it = j.find("rubrics"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw CorpusError("rubrics must be an array");
        for (const auto& rj : *it) rec.rubrics.push_back(rubric_item_from_json(rj));
    }
    if (auto it = j.find("source"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw CorpusError("non-string source");
        rec.source = it->get<std::string>();
    }
    for (const auto& [key, value] : j.items())
        if (!is_known(kKnownRecordFields, std::size(kKnownRecordFields), key)) rec.extra[key] = value;
    return rec;
}

SftExample sft_example_from_json(const ordered_json& j) {
    if (!j.is_object()) throw CorpusError("sft example line is not a JSON object");
    SftExample ex;
    ex.question_id = require_string(j, "question_id");
    ex.prompt = require_string(j, "prompt");
    ex.response = require_string(j, "response");
    auto mode = parse_sft_mode(require_string(j, "mode"));
    if (!mode) throw CorpusError("unknown mode '" + j["mode"].get<std::string>() + "'");
    ex.mode = *mode;
    for (const auto& [key, value] : j.items())
        if (!is_known(kKnownSftFields, std::size(kKnownSftFields), key)) ex.extra[key] = value;
    return ex;
}

std::optional<std::string> validate(const RubricItem& item) {
    if (item.title.empty()) return "rubric title is empty";
    if (item.description.empty()) return "rubric description is empty";
    return std::nullopt;
}

std::optional<std::string> validate(const QuestionRecord& rec) {
    if (rec.id.empty()) return "id is empty";
    if (rec.question.empty()) return "question is empty";
    if (rec.reference_answer.empty()) return "reference_answer is empty";
    if (rec.difficulty_eighths && (*rec.difficulty_eighths < 0 || *rec.difficulty_eighths > 8))
        return "difficulty numerator out of range [0,8]";
    if (rec.verification && *rec.verification == Verification::Verifiable && !rec.rubrics.empty())
        return "verifiable record carries rubrics";
    if (rec.subject && *rec.subject == Subject::Math && rec.verification &&
        *rec.verification == Verification::OpenEnded)
        return "open-ended math record";
    for (const auto& item : rec.rubrics)
        if (auto err = validate(item)) return err;
    return std::nullopt;
}

std::optional<std::string> validate(const SftExample& ex) {
    if (ex.question_id.empty()) return "question_id is empty";
    if (ex.prompt.empty()) return "prompt is empty";
    if (ex.mode == SftMode::Think) {
        size_t first = ex.response.find("</think>");
        if (first != std::string::npos && ex.response.find("</think>", first + 1) != std::string::npos)
            return "think response contains more than one think delimiter";
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Line I/O

struct LineReader::Impl {
    gzFile gz = nullptr;            // used for gzip inputs
    std::ifstream plain;            // used otherwise
    bool is_gzip = false;
    std::array<char, 1 << 16> buf{};
};

LineReader::LineReader(const std::string& path) : impl_(std::make_unique<Impl>()) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw CorpusError("cannot open file: " + path);
    unsigned char magic[2] = {0, 0};
    probe.read(reinterpret_cast<char*>(magic), 2);
    impl_->is_gzip = probe.gcount() == 2 && magic[0] == 0x1f && magic[1] == 0x8b;
    probe.close();
    if (impl_->is_gzip) {
        impl_->gz = gzopen(path.c_str(), "rb");
        if (!impl_->gz) throw CorpusError("cannot open gzip file: " + path);
        gzbuffer(impl_->gz, 1 << 16);
    } else {
        impl_->plain.open(path, std::ios::binary);
        if (!impl_->plain) throw CorpusError("cannot open file: " + path);
    }
}

LineReader::~LineReader() {
    if (impl_ && impl_->gz) gzclose(impl_->gz);
}

bool LineReader::next(std::string& line) {
    line.clear();
    if (impl_->is_gzip) {
        bool got_any = false;
        while (true) {
            char* r = gzgets(impl_->gz, impl_->buf.data(), static_cast<int>(impl_->buf.size()));
            if (!r) break;
            got_any = true;
            line += r;
            if (!line.empty() && line.back() == '\n') {
                line.pop_back();
                break;
            }
        }
        if (!got_any) return false;
    } else {
        if (!std::getline(impl_->plain, line)) return false;
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_number_;
    return true;
}

JsonlReader::JsonlReader(const std::string& path, ErrorPolicy policy)
    : reader_(path), policy_(policy) {}

std::optional<ordered_json> JsonlReader::next_json() {
    while (reader_.next(buf_)) {
        if (buf_.find_first_not_of(" \t") == std::string::npos) continue;  // blank line
        try {
            return ordered_json::parse(buf_);
        } catch (const nlohmann::json::exception& e) {
            if (policy_ == ErrorPolicy::Fail)
                throw CorpusError("line " + std::to_string(reader_.line_number()) +
                                  ": malformed JSON: " + e.what());
            errors_.push_back({reader_.line_number(), std::string("malformed JSON: ") + e.what()});
        }
    }
    return std::nullopt;
}

void JsonlReader::add_error(LineError err) { errors_.push_back(std::move(err)); }

namespace {

template <typename T, typename Parse>
void stream_typed(const std::string& path, ErrorPolicy policy, std::vector<LineError>* errors,
                  const std::function<void(T&&)>& fn, Parse parse) {
    JsonlReader reader(path, policy);
    while (auto j = reader.next_json()) {
        try {
            fn(parse(*j));
        } catch (const CorpusError& e) {
            if (policy == ErrorPolicy::Fail)
                throw CorpusError("line " + std::to_string(reader.line_number()) + ": " + e.what());
            reader.add_error({reader.line_number(), e.what()});
        }
    }
    if (errors) *errors = reader.errors();
}

}  // namespace

void for_each_question_record(const std::string& path, ErrorPolicy policy,
                              std::vector<LineError>* errors,
                              const std::function<void(QuestionRecord&&)>& fn) {
    stream_typed<QuestionRecord>(path, policy, errors, fn,
                                 [](const ordered_json& j) { return record_from_json(j); });
}

void for_each_sft_example(const std::string& path, ErrorPolicy policy,
                          std::vector<LineError>* errors,
                          const std::function<void(SftExample&&)>& fn) {
    stream_typed<SftExample>(path, policy, errors, fn,
                             [](const ordered_json& j) { return sft_example_from_json(j); });
}

std::vector<QuestionRecord> read_question_records(const std::string& path, ErrorPolicy policy,
                                                  std::vector<LineError>* errors) {
    std::vector<QuestionRecord> out;
    for_each_question_record(path, policy, errors,
                             [&](QuestionRecord&& r) { out.push_back(std::move(r)); });
    return out;
}

std::vector<SftExample> read_sft_examples(const std::string& path, ErrorPolicy policy,
                                          std::vector<LineError>* errors) {
    std::vector<SftExample> out;
    for_each_sft_example(path, policy, errors, [&](SftExample&& e) { out.push_back(std::move(e)); });
    return out;
}

struct JsonlWriter::Impl {
    std::string final_path;
    std::string tmp_path;
    std::ofstream out;
    long count = 0;
    bool committed = false;
};

JsonlWriter::JsonlWriter(const std::string& path) : impl_(std::make_unique<Impl>()) {
    impl_->final_path = path;
    impl_->tmp_path = path + ".tmp";
    fs::path dir = fs::path(path).parent_path();
    if (!dir.empty() && !fs::exists(dir)) fs::create_directories(dir);
    impl_->out.open(impl_->tmp_path, std::ios::binary | std::ios::trunc);
    if (!impl_->out) throw CorpusError("cannot open for writing: " + impl_->tmp_path);
}

JsonlWriter::~JsonlWriter() {
    if (impl_ && !impl_->committed) {
        impl_->out.close();
        std::error_code ec;
        fs::remove(impl_->tmp_path, ec);
    }
}

void JsonlWriter::write(const ordered_json& j) {
    impl_->out << j.dump() << '\n';
    if (!impl_->out) throw CorpusError("write failed: " + impl_->tmp_path);
    ++impl_->count;
}

long JsonlWriter::commit() {
    impl_->out.flush();
    if (!impl_->out) throw CorpusError("flush failed: " + impl_->tmp_path);
    impl_->out.close();
    fs::rename(impl_->tmp_path, impl_->final_path);
    impl_->committed = true;
    return impl_->count;
}

long write_question_records(const std::vector<QuestionRecord>& recs, const std::string& path) {
    JsonlWriter writer(path);
    for (const auto& r : recs) writer.write(r);
    return writer.commit();
}

std::string_view subject_label(std::optional<Subject> s) {
    return s ? to_string(*s) : std::string_view("science");
}

std::string render_prompt(const QuestionRecord& rec) {
    return prompts::render_instruction(subject_label(rec.subject), rec.question);
}

}  // namespace sciforge::corpus

#include "sciforge/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <unordered_map>
#include <unordered_set>

#include "sciforge/parsing.hpp"
#include "sciforge/prompts.hpp"
#include "sciforge/text.hpp"

namespace sciforge::pipeline {

namespace {

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string collapse_ws(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending) {
            out.push_back(' ');
            pending = false;
        }
        out.push_back(static_cast<char>(c));
    }
    return out;
}

size_t word_count(std::string_view s) {
    size_t n = 0;
    bool in_word = false;
    for (unsigned char c : s) {
        bool space = std::isspace(c);
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

}  // namespace

// ---------------------------------------------------------------------------
// clean

namespace {

// Normalized placeholder answers that slip through upstream formatting;
// they look like answers but carry no content.
const char* kPlaceholderAnswers[] = {"answer", "x", ""};

bool is_placeholder_answer(const std::string& reference_answer) {
    std::string norm = text::normalize(reference_answer);
    for (const char* p : kPlaceholderAnswers)
        if (norm == p) return true;
    return false;
}

}  // namespace

std::optional<std::string> clean_reason(const QuestionRecord& rec) {
    if (trim(rec.question).empty()) return "empty_question";
    if (trim(rec.reference_answer).empty()) return "empty_answer";
    if (is_placeholder_answer(rec.reference_answer)) return "placeholder";
    return std::nullopt;
}

CleanResult clean(std::vector<QuestionRecord> records) {
    CleanResult result;
    for (auto& rec : records) {
        if (auto reason = clean_reason(rec)) {
            result.reason_counts[*reason] += 1;
            result.dropped.push_back({rec.id, *reason});
        } else {
            result.kept.push_back(std::move(rec));
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// subject assignment

const std::vector<std::pair<std::string, Subject>>& KeywordSubjectClassifier::keyword_table() {
    // Fixture keyword table; rows are matched in order on whole words of
    // the normalized question, first hit wins.
    static const std::vector<std::pair<std::string, Subject>> table = {
        {"dna", Subject::Biology},
        {"enzyme", Subject::Biology},
        {"cell membrane", Subject::Biology},
        {"photosynthesis", Subject::Biology},
        {"organism", Subject::Biology},
        {"evolution", Subject::Biology},
        {"protein", Subject::Biology},
        {"patient", Subject::Medicine},
        {"diagnosis", Subject::Medicine},
        {"symptom", Subject::Medicine},
        {"disease", Subject::Medicine},
        {"treatment", Subject::Medicine},
        {"drug", Subject::Medicine},
        {"molecule", Subject::Chemistry},
        {"reaction", Subject::Chemistry},
        {"acid", Subject::Chemistry},
        {"compound", Subject::Chemistry},
        {"electron configuration", Subject::Chemistry},
        {"mole", Subject::Chemistry},
        {"velocity", Subject::Physics},
        {"force", Subject::Physics},
        {"energy", Subject::Physics},
        {"quantum", Subject::Physics},
        {"momentum", Subject::Physics},
        {"electric field", Subject::Physics},
        {"algorithm", Subject::Cs},
        {"complexity", Subject::Cs},
        {"data structure", Subject::Cs},
        {"program", Subject::Cs},
        {"compiler", Subject::Cs},
        {"market", Subject::Economics},
        {"inflation", Subject::Economics},
        {"supply", Subject::Economics},
        {"demand curve", Subject::Economics},
        {"gdp", Subject::Economics},
        {"integral", Subject::Math},
        {"derivative", Subject::Math},
        {"polynomial", Subject::Math},
        {"matrix", Subject::Math},
        {"theorem", Subject::Math},
        {"probability", Subject::Math},
        {"equation", Subject::Math},
    };
    return table;
}

chat::ChatResult KeywordSubjectClassifier::classify(const QuestionRecord& rec) {
    std::string haystack = " " + text::normalize(rec.question) + " ";
    for (const auto& [keyword, subject] : keyword_table())
        if (haystack.find(" " + keyword + " ") != std::string::npos)
            return chat::ChatResult::success(std::string(corpus::to_string(subject)));
    return chat::ChatResult::success("science");
}

chat::ChatResult ScriptedSubjectClassifier::classify(const QuestionRecord& rec) {
    if (auto it = labels_.find(rec.id); it != labels_.end())
        return chat::ChatResult::success(it->second);
    if (default_) return chat::ChatResult::success(*default_);
    return chat::ChatResult::failure(
        {chat::ChatError::Kind::Script, "no scripted label for " + rec.id, 0});
}

ChatSubjectClassifier::ChatSubjectClassifier(chat::ChatClient& client, chat::SamplingParams params)
    : client_(client), params_(params) {}

chat::ChatResult ChatSubjectClassifier::classify(const QuestionRecord& rec) {
    std::string prompt =
        "Classify the following question into exactly one subject. Answer with only one token "
        "from: math, physics, chemistry, biology, medicine, cs, economics, science.\n\n"
        "Question:\n" +
        rec.question;
    return client_.complete({{"user", prompt}}, params_);
}

AssignSubjectOutcome assign_subject(QuestionRecord& rec, SubjectClassifier& classifier,
                                    int max_attempts) {
    AssignSubjectOutcome outcome;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        ++outcome.attempts;
        auto result = classifier.classify(rec);
        if (!result.ok()) continue;
        if (auto subject = corpus::parse_subject(text::normalize(result.text))) {
            rec.subject = subject;
            return outcome;
        }
    }
    rec.subject = Subject::Science;
    outcome.fell_back = true;
    return outcome;
}

// ---------------------------------------------------------------------------
// answer canonicalization

namespace {

// Strips enclosing math delimiters and \boxed wrappers, repeatedly.
std::string strip_math_wrappers(std::string s, bool* had_wrapper) {
    bool changed = true;
    while (changed) {
        changed = false;
        s = trim(s);
        auto strip_pair = [&](std::string_view open, std::string_view close) {
            if (s.size() > open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
                s = s.substr(open.size(), s.size() - open.size() - close.size());
                changed = true;
                if (had_wrapper) *had_wrapper = true;
                return true;
            }
            return false;
        };
        if (strip_pair("$$", "$$") || strip_pair("\\(", "\\)") || strip_pair("\\[", "\\]")) continue;
        if (s.size() > 2 && s.front() == '$' && s.back() == '$' && s.find('$', 1) == s.size() - 1) {
            s = s.substr(1, s.size() - 2);
            changed = true;
            if (had_wrapper) *had_wrapper = true;
            continue;
        }
        if (s.starts_with("\\boxed{") && s.ends_with("}")) {
            auto inner = parsing::extract_last_boxed(s);
            if (inner && s == "\\boxed{" + *inner + "}") {
                s = *inner;
                changed = true;
                if (had_wrapper) *had_wrapper = true;
            }
        }
    }
    return trim(s);
}

struct NumberScan {
    double value = 0.0;
    size_t end = 0;  // index one past the numeric token
    bool ok = false;
};

// Scans a decimal/scientific literal at `pos`, allowing 1,234,567 comma
// grouping.
NumberScan scan_decimal(std::string_view s, size_t pos) {
    NumberScan out;
    size_t i = pos;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    size_t digits_begin = i;
    std::string literal = i > pos ? std::string(1, s[pos]) : std::string();
    bool any_digit = false;
    while (i < s.size()) {
        char c = s[i];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            literal.push_back(c);
            any_digit = true;
            ++i;
        } else if (c == ',' && i > digits_begin && i + 3 <= s.size() - 1 &&
                   std::isdigit(static_cast<unsigned char>(s[i + 1])) &&
                   std::isdigit(static_cast<unsigned char>(s[i + 2])) &&
                   std::isdigit(static_cast<unsigned char>(s[i + 3]))) {
            ++i;  // thousands separator
        } else {
            break;
        }
    }
    if (i < s.size() && s[i] == '.') {
        literal.push_back('.');
        ++i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
            literal.push_back(s[i]);
            any_digit = true;
            ++i;
        }
    }
    if (!any_digit) return out;
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        size_t j = i + 1;
        std::string exp;
        if (j < s.size() && (s[j] == '+' || s[j] == '-')) exp.push_back(s[j++]);
        size_t exp_digits = 0;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
            exp.push_back(s[j++]);
            ++exp_digits;
        }
        if (exp_digits > 0) {
            literal += "e" + exp;
            i = j;
        }
    }
    out.value = std::strtod(literal.c_str(), nullptr);
    out.end = i;
    out.ok = true;
    return out;
}

// Optional "x 10^k" / "\times 10^{k}" multiplier following a mantissa.
size_t scan_pow10_suffix(std::string_view s, size_t pos, int* exponent) {
    size_t i = pos;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t mark = i;
    if (s.substr(i).starts_with("\\times"))
        i += 6;
    else if (s.substr(i).starts_with("\\cdot"))
        i += 5;
    else if (i < s.size() && (s[i] == '*' || s[i] == 'x' || s[i] == 'X'))
        i += 1;
    else if (s.substr(i).starts_with("\xc3\x97"))  // U+00D7
        i += 2;
    else
        return pos;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (!s.substr(i).starts_with("10^")) return pos;
    i += 3;
    bool braced = i < s.size() && s[i] == '{';
    if (braced) ++i;
    size_t exp_start = i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    size_t digit_start = i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i == digit_start) return pos;
    int exp = std::atoi(std::string(s.substr(exp_start, i - exp_start)).c_str());
    if (braced) {
        if (i >= s.size() || s[i] != '}') return pos;
        ++i;
    }
    (void)mark;
    *exponent = exp;
    return i;
}

bool is_unit_like(std::string_view s) {
    std::string t = trim(s);
    if (t.empty()) return true;
    if (t.size() > 24) return false;
    size_t words = word_count(t);
    if (words > 3) return false;
    if (std::isdigit(static_cast<unsigned char>(t.front()))) return false;
    for (unsigned char c : t) {
        bool ok = c >= 0x80 || std::isalnum(c) || std::isspace(c) || c == '/' || c == '^' ||
                  c == '%' || c == '-' || c == '.' || c == '{' || c == '}' || c == '\\';
        if (!ok) return false;
    }
    return true;
}

std::optional<CanonicalAnswer> try_number(const std::string& s) {
    // \frac{a}{b} with numeric arguments, optional leading sign.
    {
        std::string_view v = s;
        double sign = 1.0;
        if (v.starts_with("-")) {
            sign = -1.0;
            v.remove_prefix(1);
        } else if (v.starts_with("+")) {
            v.remove_prefix(1);
        }
        for (std::string_view frac : {"\\frac", "\\dfrac", "\\tfrac"}) {
            if (!v.starts_with(frac)) continue;
            std::string_view rest = v.substr(frac.size());
            if (!rest.starts_with("{")) break;
            size_t close1 = rest.find('}');
            if (close1 == std::string_view::npos) break;
            std::string_view num = rest.substr(1, close1 - 1);
            std::string_view after = rest.substr(close1 + 1);
            if (!after.starts_with("{") || !after.ends_with("}")) break;
            std::string_view den = after.substr(1, after.size() - 2);
            NumberScan ns = scan_decimal(num, 0);
            NumberScan ds = scan_decimal(den, 0);
            if (ns.ok && ns.end == num.size() && ds.ok && ds.end == den.size() && ds.value != 0.0) {
                CanonicalAnswer out;
                out.kind = CanonicalAnswer::Kind::Number;
                out.value = sign * ns.value / ds.value;
                return out;
            }
        }
    }
    // a/b plain fraction.
    {
        NumberScan ns = scan_decimal(s, 0);
        if (ns.ok) {
            size_t i = ns.end;
            while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
            if (i < s.size() && s[i] == '/') {
                ++i;
                while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
                NumberScan ds = scan_decimal(s, i);
                if (ds.ok && trim(s.substr(ds.end)).empty() && ds.value != 0.0) {
                    CanonicalAnswer out;
                    out.kind = CanonicalAnswer::Kind::Number;
                    out.value = ns.value / ds.value;
                    return out;
                }
            }
        }
    }
    // Decimal / scientific, optional power-of-ten suffix, optional unit.
    {
        size_t start = 0;
        std::string leading_unit;
        NumberScan ns = scan_decimal(s, start);
        if (!ns.ok) {
            // Allow one short alphabetic leading unit token ("USD 5").
            size_t sp = s.find(' ');
            if (sp != std::string::npos && sp > 0 && sp <= 4) {
                std::string_view head = std::string_view(s).substr(0, sp);
                bool alpha = std::all_of(head.begin(), head.end(), [](unsigned char c) {
                    return std::isalpha(c);
                });
                if (alpha) {
                    start = sp + 1;
                    ns = scan_decimal(s, start);
                    if (ns.ok) leading_unit = std::string(head);
                }
            }
        }
        if (ns.ok) {
            int extra_exp = 0;
            size_t after = scan_pow10_suffix(s, ns.end, &extra_exp);
            double value = ns.value * (after != ns.end ? std::pow(10.0, extra_exp) : 1.0);
            std::string tail = trim(s.substr(after));
            if (is_unit_like(tail)) {
                CanonicalAnswer out;
                out.kind = CanonicalAnswer::Kind::Number;
                out.value = value;
                out.unit = !tail.empty() ? tail : leading_unit;
                return out;
            }
        }
    }
    return std::nullopt;
}

std::optional<CanonicalAnswer> try_choice_key(const std::string& s) {
    std::string t = trim(s);
    size_t i = 0;
    bool paren = false;
    if (i < t.size() && t[i] == '(') {
        paren = true;
        ++i;
    }
    while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i]))) ++i;
    if (i >= t.size() || !std::isalpha(static_cast<unsigned char>(t[i]))) return std::nullopt;
    char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(t[i])));
    if (letter < 'A' || letter > 'J') return std::nullopt;
    ++i;
    while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i]))) ++i;
    if (paren) {
        if (i >= t.size() || t[i] != ')') return std::nullopt;
        ++i;
    }
    while (i < t.size() && (t[i] == '.' || t[i] == ')' || t[i] == ':')) ++i;
    while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i]))) ++i;
    if (i != t.size()) return std::nullopt;
    // Bare single letters are choice keys; longer unparenthesized text is not.
    if (!paren && t.size() > 2) return std::nullopt;
    CanonicalAnswer out;
    out.kind = CanonicalAnswer::Kind::ChoiceKey;
    out.text = std::string(1, letter);
    return out;
}

bool looks_mathy(std::string_view s) {
    bool has_digit = false, has_operator = false;
    for (size_t i = 0; i < s.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        if (c == '\\' || c == '=' || c == '^' || c == '_' || c == '~' || c == '<' || c == '>')
            return true;
        if (std::isdigit(c)) has_digit = true;
        if (c == '+' || c == '-' || c == '*' || c == '/') has_operator = true;
    }
    // U+223C TILDE OPERATOR shows up in LaTeX-extracted text.
    if (s.find("\xe2\x88\xbc") != std::string_view::npos) return true;
    return has_digit && has_operator;
}

constexpr size_t kMaxExpressionChars = 128;

}  // namespace

std::optional<CanonicalAnswer> canonicalize_answer(std::string_view reference_answer) {
    bool had_wrapper = false;
    std::string s = strip_math_wrappers(std::string(reference_answer), &had_wrapper);
    if (s.empty()) return std::nullopt;

    if (auto choice = try_choice_key(s)) return choice;
    if (auto number = try_number(s)) return number;

    std::string collapsed = collapse_ws(s);
    if ((had_wrapper || looks_mathy(collapsed)) && collapsed.size() <= kMaxExpressionChars) {
        CanonicalAnswer out;
        out.kind = CanonicalAnswer::Kind::Expression;
        out.text = collapsed;
        return out;
    }

    std::string norm = text::normalize(s);
    if (!norm.empty() && word_count(norm) <= 5) {
        CanonicalAnswer out;
        out.kind = CanonicalAnswer::Kind::Token;
        out.text = norm;
        return out;
    }
    return std::nullopt;
}

SplitOutcome split_verifiability(QuestionRecord& rec) {
    bool verifiable = canonicalize_answer(rec.reference_answer).has_value();
    if (verifiable) {
        rec.verification = Verification::Verifiable;
        return SplitOutcome::Verifiable;
    }
    if (rec.subject && *rec.subject == Subject::Math) return SplitOutcome::DroppedOpenEndedMath;
    rec.verification = Verification::OpenEnded;
    return SplitOutcome::OpenEnded;
}

// ---------------------------------------------------------------------------
// dedup

DedupExactResult dedup_exact(const std::vector<QuestionRecord>& records) {
    DedupExactResult result;
    std::unordered_map<std::string, std::string> seen;  // normalized question -> kept id
    for (const auto& rec : records) {
        std::string key = text::normalize(rec.question);
        auto [it, inserted] = seen.emplace(key, rec.id);
        if (inserted)
            result.kept.push_back(rec);
        else
            result.dropped.push_back({rec.id, "exact_duplicate_of:" + it->second});
    }
    return result;
}

ShingleSignature minhash_signature(std::string_view question_text, const MinHashConfig& cfg) {
    std::vector<std::string> tokens = text::tokenize(text::normalize(question_text));
    // Short texts shingle over their full token span so identical short
    // questions still collide and distinct ones do not.
    int width = std::min<int>(cfg.shingle_width, std::max<size_t>(tokens.size(), 1));
    std::vector<std::string> shingles = text::ngram_strings(tokens, width);
    std::vector<std::uint64_t> hashes;
    hashes.reserve(shingles.size());
    for (const auto& sh : shingles) hashes.push_back(text::fnv1a64(sh));
    std::sort(hashes.begin(), hashes.end());
    hashes.erase(std::unique(hashes.begin(), hashes.end()), hashes.end());

    ShingleSignature sig;
    sig.shingle_count = hashes.size();
    sig.values.assign(static_cast<size_t>(cfg.permutations), ~0ull);
    for (int p = 0; p < cfg.permutations; ++p) {
        std::uint64_t salt = text::splitmix64(cfg.seed + static_cast<std::uint64_t>(p));
        std::uint64_t best = ~0ull;
        for (std::uint64_t h : hashes) best = std::min(best, text::splitmix64(h ^ salt));
        sig.values[static_cast<size_t>(p)] = best;
    }
    return sig;
}

double estimate_jaccard(const ShingleSignature& a, const ShingleSignature& b) {
    if (a.shingle_count == 0 && b.shingle_count == 0) return 1.0;
    if (a.shingle_count == 0 || b.shingle_count == 0) return 0.0;
    size_t n = std::min(a.values.size(), b.values.size());
    if (n == 0) return 0.0;
    size_t equal = 0;
    for (size_t i = 0; i < n; ++i)
        if (a.values[i] == b.values[i]) ++equal;
    return static_cast<double>(equal) / static_cast<double>(n);
}

DedupNearResult dedup_near(const std::vector<QuestionRecord>& records, double jaccard_threshold,
                           const MinHashConfig& cfg) {
    if (!(jaccard_threshold > 0.0 && jaccard_threshold < 1.0 + 1e-12))
        throw corpus::CorpusError("near-dup threshold must be in (0,1]");
    DedupNearResult result;
    std::vector<ShingleSignature> retained_sigs;
    for (const auto& rec : records) {
        ShingleSignature sig = minhash_signature(rec.question, cfg);
        bool dropped = false;
        for (size_t i = 0; i < retained_sigs.size(); ++i) {
            double est = estimate_jaccard(sig, retained_sigs[i]);
            if (est >= jaccard_threshold) {
                result.pairs.push_back({result.kept[i].id, rec.id, est});
                dropped = true;
                break;
            }
        }
        if (!dropped) {
            result.kept.push_back(rec);
            retained_sigs.push_back(std::move(sig));
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// conflict resolution

namespace {

/// One equivalence check via the final-answer verification prompt; the
/// judge's Yes means the candidate answer is equivalent to the reference.
std::optional<bool> judge_equivalent(chat::ChatClient& judge, const std::string& question,
                                     const std::string& reference, const std::string& candidate,
                                     int max_attempts, const chat::SamplingParams& params) {
    std::string prompt = prompts::render_answer_verification(question, reference, candidate);
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        auto result = judge.complete({{"user", prompt}}, params);
        if (!result.ok()) continue;
        if (auto verdict = parsing::parse_final_decision(result.text)) return verdict;
    }
    return std::nullopt;
}

}  // namespace

ConflictResult resolve_conflicts(const std::vector<QuestionRecord>& records,
                                 chat::ChatClient* judge, int max_attempts,
                                 const chat::SamplingParams& params) {
    ConflictResult result;
    std::unordered_map<std::string, std::vector<size_t>> groups;
    std::vector<std::string> group_order;
    for (size_t i = 0; i < records.size(); ++i) {
        std::string key = text::normalize(records[i].question);
        auto it = groups.find(key);
        if (it == groups.end()) {
            groups[key] = {i};
            group_order.push_back(key);
        } else {
            it->second.push_back(i);
        }
    }

    std::unordered_set<size_t> drop;
    std::unordered_set<size_t> collapse_to_first;
    for (const auto& key : group_order) {
        const auto& members = groups[key];
        if (members.size() < 2) continue;
        std::unordered_set<std::string> answers;
        for (size_t idx : members) answers.insert(text::normalize(records[idx].reference_answer));
        if (answers.size() < 2) continue;  // same answer; plain duplicates, not conflicts

        ConflictGroupLog log;
        log.question_id = records[members[0]].id;
        for (size_t idx : members) log.member_ids.push_back(records[idx].id);

        bool all_equivalent = judge != nullptr;
        bool judge_failed = judge == nullptr;
        if (judge) {
            const auto& first = records[members[0]];
            for (size_t m = 1; m < members.size() && all_equivalent && !judge_failed; ++m) {
                auto verdict = judge_equivalent(*judge, first.question, first.reference_answer,
                                                records[members[m]].reference_answer, max_attempts,
                                                params);
                if (!verdict)
                    judge_failed = true;
                else if (!*verdict)
                    all_equivalent = false;
            }
        }
        log.equivalent = all_equivalent && !judge_failed;
        log.judge_failed = judge_failed;
        result.groups.push_back(log);

        if (log.equivalent) {
            for (size_t m = 1; m < members.size(); ++m) collapse_to_first.insert(members[m]);
        } else {
            for (size_t idx : members) drop.insert(idx);
        }
    }

    for (size_t i = 0; i < records.size(); ++i)
        if (!drop.count(i) && !collapse_to_first.count(i)) result.kept.push_back(records[i]);
    return result;
}

// ---------------------------------------------------------------------------
// contamination

BenchmarkIndex::BenchmarkIndex(const std::vector<std::string>& benchmark_questions,
                               const ContaminationConfig& cfg)
    : cfg_(cfg) {
    for (std::uint32_t b = 0; b < benchmark_questions.size(); ++b) {
        std::string norm = text::normalize(benchmark_questions[b]);
        normalized_benchmarks_.push_back(norm);
        std::vector<std::string> tokens = text::tokenize(norm);
        std::vector<std::uint64_t> grams = text::hashed_ngrams(tokens, cfg_.ngram_width);
        per_benchmark_gram_counts_.push_back(grams.size());
        for (std::uint64_t g : grams) gram_to_benchmarks_[g].push_back(b);
    }
}

double BenchmarkIndex::max_overlap(std::string_view question) const {
    std::string norm = text::normalize(question);
    std::vector<std::string> tokens = text::tokenize(norm);
    if (tokens.size() < static_cast<size_t>(cfg_.ngram_width)) {
        if (norm.empty()) return 0.0;
        for (const auto& b : normalized_benchmarks_)
            if (b.find(norm) != std::string::npos) return 1.0;
        return 0.0;
    }
    std::vector<std::uint64_t> grams = text::hashed_ngrams(tokens, cfg_.ngram_width);
    if (grams.empty()) return 0.0;
    std::unordered_map<std::uint32_t, size_t> hits;
    for (std::uint64_t g : grams) {
        auto it = gram_to_benchmarks_.find(g);
        if (it == gram_to_benchmarks_.end()) continue;
        for (std::uint32_t b : it->second) hits[b] += 1;
    }
    size_t best = 0;
    for (const auto& [b, count] : hits) best = std::max(best, count);
    return static_cast<double>(best) / static_cast<double>(grams.size());
}

ContaminationResult remove_contamination(const std::vector<QuestionRecord>& records,
                                         const BenchmarkIndex& index,
                                         const ContaminationConfig& cfg) {
    ContaminationResult result;
    for (const auto& rec : records) {
        double overlap = index.max_overlap(rec.question);
        if (overlap >= cfg.overlap_threshold)
            result.dropped.push_back({rec.id, "contaminated overlap=" + std::to_string(overlap)});
        else
            result.kept.push_back(rec);
    }
    return result;
}

std::vector<std::string> load_benchmark_questions(const std::string& path) {
    std::vector<std::string> questions;
    corpus::LineReader reader(path);
    std::string line;
    while (reader.next(line)) {
        std::string trimmed = trim(line);
        if (trimmed.empty()) continue;
        if (trimmed.front() == '{') {
            try {
                auto j = nlohmann::ordered_json::parse(trimmed);
                if (j.is_object() && j.contains("question") && j["question"].is_string()) {
                    questions.push_back(j["question"].get<std::string>());
                    continue;
                }
            } catch (const nlohmann::json::exception&) {
                // fall through: treat the line as plain text
            }
        }
        questions.push_back(trimmed);
    }
    return questions;
}

// ---------------------------------------------------------------------------
// rubric generation

std::optional<std::vector<RubricItem>> parse_rubric_array(std::string_view response,
                                                          std::string* error) {
    auto fail = [&](const std::string& msg) -> std::optional<std::vector<RubricItem>> {
        if (error) *error = msg;
        return std::nullopt;
    };
    size_t end = response.rfind(']');
    if (end == std::string_view::npos) return fail("no JSON array in response");
    // Try progressively wider spans ending at the last ']' until one parses.
    size_t begin = response.rfind('[', end);
    nlohmann::ordered_json arr;
    bool parsed = false;
    while (begin != std::string_view::npos) {
        try {
            arr = nlohmann::ordered_json::parse(response.substr(begin, end - begin + 1));
            parsed = true;
            break;
        } catch (const nlohmann::json::exception&) {
            if (begin == 0) break;
            begin = response.rfind('[', begin - 1);
        }
    }
    if (!parsed) return fail("trailing JSON array does not parse");
    if (!arr.is_array()) return fail("trailing JSON value is not an array");
    std::vector<RubricItem> items;
    for (size_t i = 0; i < arr.size(); ++i) {
        try {
            items.push_back(corpus::rubric_item_from_json(arr[i]));
        } catch (const corpus::CorpusError& e) {
            return fail("item " + std::to_string(i) + ": " + e.what());
        }
        if (auto err = corpus::validate(items.back()))
            return fail("item " + std::to_string(i) + ": " + *err);
    }
    return items;
}

RubricGenOutcome generate_rubrics(QuestionRecord& rec, chat::ChatClient& generator,
                                  const RubricGenConfig& cfg) {
    RubricGenOutcome outcome;
    if (!rec.verification || *rec.verification != Verification::OpenEnded) {
        outcome.error = "record is not open-ended";
        return outcome;
    }
    std::string prompt = prompts::render_rubric_generation(corpus::subject_label(rec.subject),
                                                           rec.question, rec.reference_answer);
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        ++outcome.attempts;
        auto result = generator.complete({{"user", prompt}}, cfg.sampling);
        if (!result.ok()) {
            outcome.error = result.error->message;
            continue;
        }
        std::string parse_error;
        auto items = parse_rubric_array(result.text, &parse_error);
        if (!items) {
            outcome.error = parse_error;
            continue;
        }
        if (items->size() < static_cast<size_t>(cfg.min_items) ||
            items->size() > static_cast<size_t>(cfg.max_items)) {
            outcome.error = "rubric count " + std::to_string(items->size()) + " outside [" +
                            std::to_string(cfg.min_items) + "," + std::to_string(cfg.max_items) +
                            "]";
            continue;
        }
        rec.rubrics = std::move(*items);
        outcome.ok = true;
        outcome.error.clear();
        return outcome;
    }
    return outcome;
}

}  // namespace sciforge::pipeline

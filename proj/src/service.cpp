#include "sciforge/service.hpp"

#include <fstream>
#include <mutex>

#include <httplib.h>

#include "sciforge/pipeline.hpp"
#include "sciforge/text.hpp"

namespace sciforge::service {

RewardRequest parse_reward_request(const ordered_json& j) {
    if (!j.is_object()) throw BadRequest("", "request body must be a JSON object");
    RewardRequest req;

    auto need_string = [&](const char* field) -> std::string {
        auto it = j.find(field);
        if (it == j.end()) throw BadRequest(field, std::string(field) + " is required");
        if (!it->is_string()) throw BadRequest(field, std::string(field) + " must be a string");
        return it->get<std::string>();
    };

    if (auto it = j.find("id"); it != j.end() && it->is_string()) req.id = it->get<std::string>();
    req.record.question = need_string("question");
    if (req.record.question.empty()) throw BadRequest("question", "question must be non-empty");
    req.record.reference_answer = need_string("reference_answer");
    req.record.id = req.id.value_or(corpus::make_record_id(req.record.question));

    auto verification = corpus::parse_verification(need_string("verification"));
    if (!verification)
        throw BadRequest("verification", "verification must be Verifiable or OpenEnded");
    req.record.verification = verification;

    if (auto it = j.find("rubrics"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw BadRequest("rubrics", "rubrics must be an array");
        for (size_t i = 0; i < it->size(); ++i) {
            const auto& rj = (*it)[i];
            std::string prefix = "rubrics[" + std::to_string(i) + "]";
            try {
                req.record.rubrics.push_back(corpus::rubric_item_from_json(rj));
            } catch (const corpus::CorpusError& e) {
                throw BadRequest(prefix, e.what());
            }
            if (auto err = corpus::validate(req.record.rubrics.back()))
                throw BadRequest(prefix, *err);
        }
    }
    if (*verification == corpus::Verification::OpenEnded && req.record.rubrics.empty())
        throw BadRequest("rubrics", "open-ended requests require a non-empty rubrics array");
    if (*verification == corpus::Verification::Verifiable && !req.record.rubrics.empty())
        throw BadRequest("rubrics", "verifiable requests must not carry rubrics");

    req.rollout_text = need_string("rollout_text");
    if (auto it = j.find("gate"); it != j.end() && !it->is_null()) {
        if (!it->is_boolean()) throw BadRequest("gate", "gate must be a boolean");
        req.gate = it->get<bool>();
    }
    return req;
}

ordered_json breakdown_to_json(const reward::RewardBreakdown& b,
                               const std::optional<std::string>& id) {
    ordered_json out = ordered_json::object();
    if (id) out["id"] = *id;
    out["reward"] = b.reward;
    ordered_json fa = ordered_json::object();
    fa["present"] = b.final_answer_present;
    if (b.final_answer) fa["text"] = *b.final_answer;
    fa["correct"] = b.final_answer_correct;
    out["final_answer"] = std::move(fa);
    ordered_json items = ordered_json::array();
    for (const auto& item : b.items) {
        items.push_back({{"index", item.index},
                         {"category", std::string(corpus::to_string(item.category))},
                         {"verdict", item.verdict_yes ? "Yes" : "No"},
                         {"satisfied", item.satisfied},
                         {"weight", item.weight},
                         {"judge_failed", item.judge_failed}});
    }
    out["items"] = std::move(items);
    out["gated"] = b.gated;
    out["judge_failures"] = b.judge_failures;
    out["no_boxed"] = b.no_boxed;
    out["no_think_tag"] = b.no_think_tag;
    return out;
}

BatchCounts reward_batch(const std::string& in_path, const std::string& out_path,
                         chat::ChatClient* judge, const reward::RewardConfig& cfg,
                         corpus::ErrorPolicy policy) {
    BatchCounts counts;
    corpus::JsonlReader reader(in_path, policy);
    corpus::JsonlWriter writer(out_path);
    while (auto j = reader.next_json()) {
        ++counts.requests;
        try {
            RewardRequest req = parse_reward_request(*j);
            reward::RewardConfig effective = cfg;
            if (req.gate) effective.gate = *req.gate;
            auto breakdown = reward::score_rollout(req.record, req.rollout_text, judge, effective);
            writer.write(breakdown_to_json(breakdown, req.id));
            counts.rewards.push_back(breakdown.reward);
            ++counts.scored;
        } catch (const BadRequest& e) {
            if (policy == corpus::ErrorPolicy::Fail)
                throw corpus::CorpusError("line " + std::to_string(reader.line_number()) + ": " +
                                          (e.field().empty() ? "" : e.field() + ": ") + e.what());
            ordered_json err = {{"error", e.what()}, {"field", e.field()}};
            writer.write(err);
            ++counts.failed;
        }
    }
    writer.commit();
    return counts;
}

namespace {

/// Serializes access to one shared judge backend; per-request state in
/// the handlers is otherwise isolated.
class SerializedChatClient : public chat::ChatClient {
public:
    explicit SerializedChatClient(chat::ChatClient& inner) : inner_(inner) {}
    chat::ChatResult complete(const std::vector<chat::ChatMessage>& messages,
                              const chat::SamplingParams& params) override {
        std::lock_guard lock(mu_);
        return inner_.complete(messages, params);
    }

private:
    chat::ChatClient& inner_;
    std::mutex mu_;
};

void reply_json(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

std::unique_ptr<httplib::Server> make_reward_server(chat::ChatClient* judge,
                                                    const reward::RewardConfig& cfg) {
    auto server = std::make_unique<httplib::Server>();
    auto shared_judge = judge ? std::make_shared<SerializedChatClient>(*judge) : nullptr;

    server->Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        reply_json(res, 200, {{"status", "ok"}});
    });

    server->Post("/v1/reward", [shared_judge, cfg](const httplib::Request& req,
                                                   httplib::Response& res) {
        ordered_json body;
        try {
            body = ordered_json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
            reply_json(res, 400, {{"error", std::string("invalid JSON: ") + e.what()}, {"field", ""}});
            return;
        }
        try {
            RewardRequest request = parse_reward_request(body);
            reward::RewardConfig effective = cfg;
            if (request.gate) effective.gate = *request.gate;
            if (request.record.verification == corpus::Verification::OpenEnded && !shared_judge) {
                reply_json(res, 503, {{"error", "no judge backend configured"}});
                res.set_header("Retry-After", "30");
                return;
            }
            auto breakdown = reward::score_rollout(request.record, request.rollout_text,
                                                   shared_judge.get(), effective);
            if (breakdown.backend_unavailable) {
                reply_json(res, 503, {{"error", "judge backend exhausted"}});
                res.set_header("Retry-After", "1");
                return;
            }
            reply_json(res, 200, breakdown_to_json(breakdown, request.id));
        } catch (const BadRequest& e) {
            reply_json(res, 400, {{"error", e.what()}, {"field", e.field()}});
        }
    });

    server->Post("/v1/verify", [shared_judge, cfg](const httplib::Request& req,
                                                   httplib::Response& res) {
        ordered_json body;
        try {
            body = ordered_json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
            reply_json(res, 400, {{"error", std::string("invalid JSON: ") + e.what()}, {"field", ""}});
            return;
        }
        auto need = [&](const char* field) -> std::optional<std::string> {
            auto it = body.find(field);
            if (it == body.end() || !it->is_string()) return std::nullopt;
            return it->get<std::string>();
        };
        auto question = need("question");
        auto reference = need("reference_answer");
        auto candidate = need("candidate");
        if (!question || !reference || !candidate) {
            const char* field = !question ? "question" : (!reference ? "reference_answer" : "candidate");
            reply_json(res, 400, {{"error", std::string(field) + " is required"}, {"field", field}});
            return;
        }
        // Rule path whenever the reference canonicalizes; generative
        // verification otherwise.
        int j_ans = 0;
        if (auto canonical = pipeline::canonicalize_answer(*reference)) {
            j_ans = reward::verify_answer_rule(*candidate, *canonical);
        } else if (shared_judge) {
            auto outcome = reward::verify_answer_judge(*question, *reference, *candidate,
                                                       *shared_judge, cfg.judge_attempts,
                                                       cfg.judge_sampling);
            if (outcome.backend_unavailable) {
                reply_json(res, 503, {{"error", "judge backend exhausted"}});
                res.set_header("Retry-After", "1");
                return;
            }
            j_ans = outcome.satisfied;
        } else {
            reply_json(res, 503, {{"error", "no judge backend configured"}});
            res.set_header("Retry-After", "30");
            return;
        }
        reply_json(res, 200, {{"j_ans", j_ans}});
    });

    return server;
}

// ---------------------------------------------------------------------------
// manifests

ManifestBuilder::ManifestBuilder(std::string subcommand, const config::ToolkitConfig& cfg)
    : subcommand_(std::move(subcommand)), config_(cfg.render()), config_digest_(cfg.digest()) {}

void ManifestBuilder::add_input(const std::string& path) {
    inputs_.push_back({{"path", path}, {"digest", file_digest(path)}});
}

void ManifestBuilder::add_output(const std::string& path, long records) {
    outputs_.push_back({{"path", path}, {"records", records}});
}

void ManifestBuilder::add_count(const std::string& name, long value) { counts_[name] = value; }

void ManifestBuilder::set_elapsed_ms(long ms) { elapsed_ms_ = ms; }

ordered_json ManifestBuilder::build() const {
    ordered_json j = ordered_json::object();
    j["tool"] = "sciforge";
    j["subcommand"] = subcommand_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["counts"] = counts_;
    j["config_digest"] = config_digest_;
    j["config"] = config_;
    if (elapsed_ms_ >= 0) j["elapsed_ms"] = elapsed_ms_;
    return j;
}

void ManifestBuilder::write(const std::string& path) const {
    corpus::JsonlWriter writer(path);
    writer.write(build());
    writer.commit();
}

namespace {

// Token-length buckets; the tail bucket isolates the >250-token answers
// that are rare in curated corpora.
const long kLengthBucketEdges[] = {25, 50, 75, 100, 150, 200, 250};

ordered_json length_distribution(const std::vector<long>& lengths) {
    ordered_json out = ordered_json::object();
    double sum = 0.0;
    for (long n : lengths) sum += static_cast<double>(n);
    out["mean"] = lengths.empty() ? 0.0 : sum / static_cast<double>(lengths.size());
    ordered_json buckets = ordered_json::array();
    size_t edge_count = std::size(kLengthBucketEdges);
    std::vector<long> counts(edge_count + 1, 0);
    for (long n : lengths) {
        size_t b = 0;
        while (b < edge_count && n >= kLengthBucketEdges[b]) ++b;
        counts[b] += 1;
    }
    long lo = 0;
    for (size_t b = 0; b <= edge_count; ++b) {
        ordered_json bucket = ordered_json::object();
        bucket["min"] = lo;
        if (b < edge_count) {
            bucket["max"] = kLengthBucketEdges[b];
            lo = kLengthBucketEdges[b];
        } else {
            bucket["max"] = nullptr;
        }
        bucket["count"] = counts[b];
        buckets.push_back(std::move(bucket));
    }
    out["buckets"] = std::move(buckets);
    return out;
}

}  // namespace

ordered_json stats_report(const std::vector<corpus::QuestionRecord>& records) {
    ordered_json report = ordered_json::object();
    report["records"] = records.size();

    ordered_json subjects = ordered_json::object();
    for (corpus::Subject s :
         {corpus::Subject::Math, corpus::Subject::Physics, corpus::Subject::Chemistry,
          corpus::Subject::Biology, corpus::Subject::Medicine, corpus::Subject::Cs,
          corpus::Subject::Economics, corpus::Subject::Science})
        subjects[std::string(corpus::to_string(s))] = 0;
    long unassigned = 0;
    for (const auto& rec : records) {
        if (rec.subject)
            subjects[std::string(corpus::to_string(*rec.subject))] =
                subjects[std::string(corpus::to_string(*rec.subject))].get<long>() + 1;
        else
            ++unassigned;
    }
    if (unassigned) subjects["unassigned"] = unassigned;
    report["subjects"] = std::move(subjects);

    long verifiable = 0, open_ended = 0, unsplit = 0;
    for (const auto& rec : records) {
        if (!rec.verification)
            ++unsplit;
        else if (*rec.verification == corpus::Verification::Verifiable)
            ++verifiable;
        else
            ++open_ended;
    }
    ordered_json verification = {{"verifiable", verifiable}, {"open_ended", open_ended}};
    if (unsplit) verification["unsplit"] = unsplit;
    report["verification"] = std::move(verification);

    std::vector<long> question_lengths, answer_lengths;
    question_lengths.reserve(records.size());
    answer_lengths.reserve(records.size());
    for (const auto& rec : records) {
        question_lengths.push_back(static_cast<long>(text::tokenize(rec.question).size()));
        answer_lengths.push_back(static_cast<long>(text::tokenize(rec.reference_answer).size()));
    }
    report["question_tokens"] = length_distribution(question_lengths);
    report["answer_tokens"] = length_distribution(answer_lengths);

    std::vector<long> difficulty_bins(9, 0);
    long unscored = 0;
    for (const auto& rec : records) {
        if (rec.difficulty_eighths)
            difficulty_bins[static_cast<size_t>(*rec.difficulty_eighths)] += 1;
        else
            ++unscored;
    }
    report["difficulty_histogram"] = difficulty_bins;
    if (unscored) report["difficulty_unscored"] = unscored;

    long rubric_records = 0, rubric_items = 0;
    for (const auto& rec : records) {
        if (rec.rubrics.empty()) continue;
        ++rubric_records;
        rubric_items += static_cast<long>(rec.rubrics.size());
    }
    if (rubric_records) {
        report["rubrics"] = {{"records", rubric_records},
                             {"mean_items", static_cast<double>(rubric_items) / rubric_records}};
    }
    return report;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw corpus::CorpusError("cannot open for digest: " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    return "fnv1a64:" + text::hex64(h);
}

}  // namespace sciforge::service

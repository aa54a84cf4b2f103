// sciforge: dataset construction, coverage selection, curriculum, and
// rubric-reward stages as composable subcommands over JSONL files.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>

#include "sciforge/chat.hpp"
#include "sciforge/config.hpp"
#include "sciforge/corpus.hpp"
#include "sciforge/coverage.hpp"
#include "sciforge/curriculum.hpp"
#include "sciforge/difficulty.hpp"
#include "sciforge/pipeline.hpp"
#include "sciforge/reward.hpp"
#include "sciforge/service.hpp"

namespace sf = sciforge;
using sf::config::ToolkitConfig;
using sf::corpus::ordered_json;

namespace {

struct Stopwatch {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    long elapsed_ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - start)
            .count();
    }
};

sf::corpus::ErrorPolicy policy_from(const ToolkitConfig& cfg) {
    return cfg.str("io.error_policy") == "skip" ? sf::corpus::ErrorPolicy::Skip
                                                : sf::corpus::ErrorPolicy::Fail;
}

/// Backend spec: "scripted:<transcript path>" or "http" (configured
/// endpoint) or "http:<base url>".
std::unique_ptr<sf::chat::ChatClient> make_backend(const std::string& spec, ToolkitConfig& cfg,
                                                   const std::string& endpoint_prefix) {
    if (spec.rfind("scripted:", 0) == 0) {
        auto path = spec.substr(9);
        return std::make_unique<sf::chat::ScriptedChatClient>(
            sf::chat::ScriptedChatClient::from_file(path));
    }
    if (spec == "http" || spec.rfind("http:", 0) == 0) {
        if (spec.size() > 5 && spec.rfind("http:", 0) == 0)
            cfg.set_flag(endpoint_prefix + ".endpoint", spec.substr(5));
        sf::chat::EndpointConfig endpoint;
        endpoint.base_url = cfg.str(endpoint_prefix + ".endpoint");
        endpoint.model = cfg.str(endpoint_prefix + ".model");
        endpoint.api_key = cfg.str(endpoint_prefix + ".api_key");
        if (endpoint.base_url.empty())
            throw std::runtime_error(endpoint_prefix +
                                     ".endpoint is not configured (flag, file, or env)");
        return std::make_unique<sf::chat::HttpChatClient>(endpoint);
    }
    throw std::runtime_error("unknown backend spec '" + spec +
                             "' (expected scripted:<path> or http[:<url>])");
}

sf::chat::SamplingParams sampling_from(const ToolkitConfig& cfg, const std::string& prefix) {
    sf::chat::SamplingParams params;
    params.temperature = cfg.number(prefix + ".temperature");
    params.top_p = cfg.number(prefix + ".top_p");
    params.top_k = static_cast<int>(cfg.integer(prefix + ".top_k"));
    params.max_tokens = static_cast<int>(cfg.integer(prefix + ".max_tokens"));
    return params;
}

sf::reward::RewardConfig reward_config_from(const ToolkitConfig& cfg) {
    sf::reward::RewardConfig rc;
    rc.weights.essential = cfg.number("reward.weight_essential");
    rc.weights.important = cfg.number("reward.weight_important");
    rc.weights.optional_detail = cfg.number("reward.weight_optional");
    rc.weights.pitfall = cfg.number("reward.weight_pitfall");
    rc.weights.final_answer = cfg.number("reward.weight_final_answer");
    rc.gate = cfg.boolean("reward.gate");
    rc.judge_attempts = static_cast<int>(cfg.integer("judge.retries"));
    rc.judge_concurrency = static_cast<int>(cfg.integer("judge.concurrency"));
    rc.judge_sampling = sampling_from(cfg, "judge");
    return rc;
}

sf::curriculum::CurriculumConfig curriculum_config_from(const ToolkitConfig& cfg) {
    sf::curriculum::CurriculumConfig cc;
    cc.tau_discard = cfg.number("curriculum.tau_discard");
    cc.tau_pending = cfg.number("curriculum.tau_pending");
    cc.tau_train = cfg.number("curriculum.tau_train");
    cc.replacement_extremum = cfg.str("curriculum.replacement_extremum") == "min_d"
                                  ? sf::curriculum::CurriculumConfig::Extremum::MinD
                                  : sf::curriculum::CurriculumConfig::Extremum::MaxD;
    return cc;
}

void write_manifest(sf::service::ManifestBuilder& manifest, const Stopwatch& watch,
                    const std::string& path) {
    manifest.set_elapsed_ms(watch.elapsed_ms());
    manifest.write(path);
}

std::string default_manifest_path(const std::string& out_path) {
    return out_path + ".manifest.json";
}

void write_json_file(const std::string& path, const ordered_json& j) {
    sf::corpus::JsonlWriter writer(path);
    writer.write(j);
    writer.commit();
}

void write_drop_report(const std::string& path, const std::vector<sf::pipeline::DropRecord>& drops) {
    sf::corpus::JsonlWriter writer(path);
    for (const auto& d : drops) writer.write(ordered_json{{"id", d.id}, {"reason", d.reason}});
    writer.commit();
}

/// Scripted subject classifier file: JSONL of {"id":..., "label":...}
/// plus an optional {"default": label} line.
sf::pipeline::ScriptedSubjectClassifier scripted_classifier_from(const std::string& path) {
    sf::pipeline::ScriptedSubjectClassifier classifier;
    sf::corpus::JsonlReader reader(path);
    while (auto j = reader.next_json()) {
        if (j->contains("default"))
            classifier.set_default(j->at("default").get<std::string>());
        else
            classifier.set(j->at("id").get<std::string>(), j->at("label").get<std::string>());
    }
    return classifier;
}

std::unique_ptr<sf::curriculum::SuccessPolicy> parse_policy(const std::string& spec) {
    if (spec.rfind("constant:", 0) == 0)
        return std::make_unique<sf::curriculum::ConstantPolicy>(std::stod(spec.substr(9)));
    if (spec.rfind("logistic:", 0) == 0) {
        std::map<std::string, double> kv;
        std::string body = spec.substr(9);
        size_t pos = 0;
        while (pos < body.size()) {
            size_t comma = body.find(',', pos);
            std::string part = body.substr(pos, comma == std::string::npos ? comma : comma - pos);
            size_t eq = part.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("bad policy parameter '" + part + "'");
            kv[part.substr(0, eq)] = std::stod(part.substr(eq + 1));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        return std::make_unique<sf::curriculum::LogisticPolicy>(
            kv.count("bias") ? kv["bias"] : -4.0, kv.count("epoch_gain") ? kv["epoch_gain"] : 0.5,
            kv.count("ease_gain") ? kv["ease_gain"] : 4.0);
    }
    throw std::runtime_error("unknown policy spec '" + spec +
                             "' (expected constant:<p> or logistic:bias=..,epoch_gain=..,ease_gain=..)");
}

// Flag holders shared across subcommands.
struct CommonFlags {
    std::string config_file;
    std::optional<long> seed;
    std::optional<std::string> error_policy;
    std::string manifest_path;
};

void apply_common(CommonFlags& common, ToolkitConfig& cfg) {
    cfg.load_env();
    if (!common.config_file.empty()) cfg.load_file(common.config_file);
    if (common.seed) cfg.set_flag("seed", *common.seed);
    if (common.error_policy) cfg.set_flag("io.error_policy", *common.error_policy);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"science QA dataset and rubric-reward toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags are accepted after the subcommand too

    ToolkitConfig cfg = ToolkitConfig::defaults();
    CommonFlags common;
    app.add_option("--config", common.config_file, "JSON config file of {\"dotted.key\": value}");
    app.add_option("--seed", common.seed, "global RNG seed");
    app.add_option("--policy", common.error_policy, "input error policy: fail or skip")
        ->check(CLI::IsMember({"fail", "skip"}));

    // ---- ingest ----------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "validate raw JSONL and assign stable ids");
    std::string in_path, out_path;
    ingest->add_option("--in", in_path, "input JSONL")->required();
    ingest->add_option("--out", out_path, "output JSONL")->required();
    ingest->add_option("--manifest", common.manifest_path, "manifest path");
    ingest->callback([&] {
        apply_common(common, cfg);
        Stopwatch watch;
        std::vector<sf::corpus::LineError> errors;
        sf::corpus::JsonlWriter writer(out_path);
        long read = 0;
        sf::corpus::for_each_question_record(in_path, policy_from(cfg), &errors,
                                             [&](sf::corpus::QuestionRecord&& rec) {
                                                 ++read;
                                                 writer.write(rec);
                                             });
        long written = writer.commit();
        sf::service::ManifestBuilder manifest("ingest", cfg);
        manifest.add_input(in_path);
        manifest.add_output(out_path, written);
        manifest.add_count("read", read);
        manifest.add_count("skipped", static_cast<long>(errors.size()));
        write_manifest(manifest, watch,
                       common.manifest_path.empty() ? default_manifest_path(out_path)
                                                    : common.manifest_path);
    });

    // ---- clean -----------------------------------------------------------
    auto* clean_cmd = app.add_subcommand("clean", "drop empty and placeholder answers");
    std::string drops_path;
    clean_cmd->add_option("--in", in_path, "input JSONL")->required();
    clean_cmd->add_option("--out", out_path, "output JSONL")->required();
    clean_cmd->add_option("--drops", drops_path, "drop report JSONL");
    clean_cmd->add_option("--manifest", common.manifest_path, "manifest path");
    clean_cmd->callback([&] {
        apply_common(common, cfg);
        Stopwatch watch;
        std::vector<sf::corpus::LineError> errors;
        sf::corpus::JsonlWriter writer(out_path);
        std::vector<sf::pipeline::DropRecord> drops;
        std::map<std::string, long> reasons;
        long read = 0;
        sf::corpus::for_each_question_record(in_path, policy_from(cfg), &errors,
                                             [&](sf::corpus::QuestionRecord&& rec) {
                                                 ++read;
                                                 if (auto reason = sf::pipeline::clean_reason(rec)) {
                                                     drops.push_back({rec.id, *reason});
                                                     reasons[*reason] += 1;
                                                 } else {
                                                     writer.write(rec);
                                                 }
                                             });
        long written = writer.commit();
        if (!drops_path.empty()) write_drop_report(drops_path, drops);
        sf::service::ManifestBuilder manifest("clean", cfg);
        manifest.add_input(in_path);
        manifest.add_output(out_path, written);
        manifest.add_count("read", read);
        for (const auto& [reason, count] : reasons) manifest.add_count("dropped_" + reason, count);
        write_manifest(manifest, watch,
                       common.manifest_path.empty() ? default_manifest_path(out_path)
                                                    : common.manifest_path);
    });

    // ---- subject ---------------------------------------------------------
    auto* subject_cmd = app.add_subcommand("subject", "assign one of the eight subjects");
    std::string classifier_spec = "keyword";
    std::optional<long> retries_flag;
    subject_cmd->add_option("--in", in_path, "input JSONL")->required();
    subject_cmd->add_option("--out", out_path, "output JSONL")->required();
    subject_cmd->add_option("--classifier", classifier_spec,
                            "keyword | scripted:<path> | chat (judge endpoint)");
    subject_cmd->add_option("--retries", retries_flag, "classifier retry limit");
    subject_cmd->add_option("--manifest", common.manifest_path, "manifest path");
    subject_cmd->callback([&] {
        apply_common(common, cfg);
        if (retries_flag) cfg.set_flag("subject.retries", *retries_flag);
        Stopwatch watch;
        std::unique_ptr<sf::pipeline::SubjectClassifier> classifier;
        std::unique_ptr<sf::chat::ChatClient> backend;
        if (classifier_spec == "keyword") {
            classifier = std::make_unique<sf::pipeline::KeywordSubjectClassifier>();
        } else if (classifier_spec.rfind("scripted:", 0) == 0) {
            classifier = std::make_unique<sf::pipeline::ScriptedSubjectClassifier>(
                scripted_classifier_from(classifier_spec.substr(9)));
        } else if (classifier_spec == "chat") {
            backend = make_backend("http", cfg, "judge");
            classifier = std::make_unique<sf::pipeline::ChatSubjectClassifier>(
                *backend, sampling_from(cfg, "judge"));
        } else {
            throw std::runtime_error("unknown classifier '" + classifier_spec + "'");
        }
        int retries = static_cast<int>(cfg.integer("subject.retries"));
        std::vector<sf::corpus::LineError> errors;
        sf::corpus::JsonlWriter writer(out_path);
        long read = 0, fallbacks = 0;
        sf::corpus::for_each_question_record(
            in_path, policy_from(cfg), &errors, [&](sf::corpus::QuestionRecord&& rec) {
                ++read;
                auto outcome = sf::pipeline::assign_subject(rec, *classifier, retries);
                if (outcome.fell_back) ++fallbacks;
                writer.write(rec);
            });
        long written = writer.commit();
        sf::service::ManifestBuilder manifest("subject", cfg);
        manifest.add_input(in_path);
        manifest.add_output(out_path, written);
        manifest.add_count("read", read);
        manifest.add_count("fallback_science", fallbacks);
        write_manifest(manifest, watch,
                       common.manifest_path.empty() ? default_manifest_path(out_path)
                                                    : common.manifest_path);
    });

    // ---- split -----------------------------------------------------------
    auto* split_cmd = app.add_subcommand("split", "verifiable/open-ended split with math discard");
    split_cmd->add_option("--in", in_path, "input JSONL")->required();
    split_cmd->add_option("--out", out_path, "output JSONL")->required();
    split_cmd->add_option("--drops", drops_path, "dropped open-ended math report");
    split_cmd->add_option("--manifest", common.manifest_path, "manifest path");
    split_cmd->callback([&] {
        apply_common(common, cfg);
        Stopwatch watch;
        std::vector<sf::corpus::LineError> errors;
        sf::corpus::JsonlWriter writer(out_path);
        std::vector<sf::pipeline::DropRecord> drops;
        long read = 0, verifiable = 0, open_ended = 0;
        sf::corpus::for_each_question_record(
            in_path, policy_from(cfg), &errors, [&](sf::corpus::QuestionRecord&& rec) {
                ++read;
                switch (sf::pipeline::split_verifiability(rec)) {
                    case sf::pipeline::SplitOutcome::Verifiable:
                        ++verifiable;
                        writer.write(rec);
                        break;
                    case sf::pipeline::SplitOutcome::OpenEnded:
                        ++open_ended;
                        writer.write(rec);
                        break;
                    case sf::pipeline::SplitOutcome::DroppedOpenEndedMath:
                        drops.push_back({rec.id, "open_ended_math"});
                        break;
                }
            });
        long written = writer.commit();
        if (!drops_path.empty()) write_drop_report(drops_path, drops);
        sf::service::ManifestBuilder manifest("split", cfg);
        manifest.add_input(in_path);
        manifest.add_output(out_path, written);
        manifest.add_count("read", read);
        manifest.add_count("verifiable", verifiable);
        manifest.add_count("open_ended", open_ended);
        manifest.add_count("dropped_open_ended_math", static_cast<long>(drops.size()));
        write_manifest(manifest, watch,
                       common.manifest_path.empty() ? default_manifest_path(out_path)
                                                    : common.manifest_path);
    });

    // ---- dedup -----------------------------------------------------------
    auto* dedup_cmd = app.add_subcommand(
        "dedup", "conflict resolution, exact dedup, and near-duplicate removal");
    std::string pairs_path, conflicts_path, judge_spec, mode = "both";
    std::optional<double> threshold_flag;
    std::optional<long> shingle_flag, perm_flag;
    dedup_cmd->add_option("--in", in_path, "input JSONL")->required();
    dedup_cmd->add_option("--out", out_path, "output JSONL")->required();
    dedup_cmd->add_option("--mode", mode, "exact | near | both")
        ->check(CLI::IsMember({"exact", "near", "both"}));
    dedup_cmd->add_option("--threshold", threshold_flag, "near-dup Jaccard threshold");
    dedup_cmd->add_option("--shingle-width", shingle_flag, "shingle width in words");
    dedup_cmd->add_option("--permutations", perm_flag, "MinHash permutation count");
    dedup_cmd->add_option("--judge", judge_spec,
                          "answer-equivalence judge (scripted:<path> or http[:<url>]); "
                          "conflicting groups are dropped when absent");
    dedup_cmd->add_option("--pairs", pairs_path, "near-dup pair report JSONL");
    dedup_cmd->add_option("--conflicts", conflicts_path, "conflict group report JSONL");
    dedup_cmd->add_option("--manifest", common.manifest_path, "manifest path");
    dedup_cmd->callback([&] {
        apply_common(common, cfg);
        if (threshold_flag) cfg.set_flag("dedup.threshold", *threshold_flag);
        if (shingle_flag) cfg.set_flag("dedup.shingle_width", *shingle_flag);
        if (perm_flag) cfg.set_flag("dedup.permutations", *perm_flag);
        Stopwatch watch;
        std::vector<sf::corpus::LineError> errors;
        auto records = sf::corpus::read_question_records(in_path, policy_from(cfg), &errors);
        long read = static_cast<long>(records.size());

        std::unique_ptr<sf::chat::ChatClient> judge;
        if (!judge_spec.empty()) judge = make_backend(judge_spec, cfg, "judge");

        auto conflicts = sf::pipeline::resolve_conflicts(records, judge.get(),
                                                         static_cast<int>(cfg.integer("judge.retries")),
                                                         sampling_from(cfg, "judge"));
        if (!conflicts_path.empty()) {
            sf::corpus::JsonlWriter writer(conflicts_path);
            for (const auto& g : conflicts.groups)
                writer.write(ordered_json{{"question_id", g.question_id},
                                          {"member_ids", g.member_ids},
                                          {"equivalent", g.equivalent},
                                          {"judge_failed", g.judge_failed}});
            writer.commit();
        }

        std::vector<sf::corpus::QuestionRecord> current = std::move(conflicts.kept);
        long exact_dropped = 0;
        if (mode != "near") {
            auto exact = sf::pipeline::dedup_exact(current);
            exact_dropped = static_cast<long>(exact.dropped.size());
            current = std::move(exact.kept);
        }
        long near_dropped = 0;
        if (mode != "exact") {
            sf::pipeline::MinHashConfig mh;
            mh.shingle_width = static_cast<int>(cfg.integer("dedup.shingle_width"));
            mh.permutations = static_cast<int>(cfg.integer("dedup.permutations"));
            mh.seed = static_cast<std::uint64_t>(cfg.integer("seed")) ^ 0x5c1f04ced117ull;
            auto near = sf::pipeline::dedup_near(current, cfg.number("dedup.threshold"), mh);
            near_dropped = static_cast<long>(near.pairs.size());
            if (!pairs_path.empty()) {
                sf::corpus::JsonlWriter writer(pairs_path);
                for (const auto& p : near.pairs)
                    writer.write(ordered_json{{"kept_id", p.kept_id},
                                              {"dropped_id", p.dropped_id},
                                              {"estimated_jaccard", p.estimated_jaccard}});
                writer.commit();
            }
            current = std::move(near.kept);
        }

        long written = sf::corpus::write_question_records(current, out_path);
        sf::service::ManifestBuilder manifest("dedup", cfg);
        manifest.add_input(in_path);
        manifest.add_output(out_path, written);
        manifest.add_count("read", read);
        manifest.add_count("conflict_groups", static_cast<long>(conflicts.groups.size()));
        manifest.add_count("exact_dropped", exact_dropped);
        manifest.add_count("near_dropped", near_dropped);
        write_manifest(manifest, watch,
                       common.manifest_path.empty() ? default_manifest_path(out_path)
                                                    : common.manifest_path);
    });

    // ---- decontaminate ----------------------------------------------------
    auto* decon_cmd = app.add_subcommand("decontaminate", "benchmark overlap removal");
    std::string benchmark_path;
    std::optional<long> width_flag;
    std::optional<double> overlap_flag;
    decon_cmd->add_option("--in", in_path, "input JSONL")->required();
    decon_cmd->add_option("--out", out_path, "output JSONL")->required();
    decon_cmd->add_option("--benchmark", benchmark_path, "benchmark questions (text or JSONL)")
        ->required();
    decon_cmd->add_option("--ngram-width", width_flag, "overlap n-gram width in words");
    decon_cmd->add_option("--overlap-threshold", overlap_flag, "drop threshold fraction");
    decon_cmd->add_option("--drops", drops_path, "drop report JSONL");
    decon_cmd->add_option("--manifest", common.manifest_path, "manifest path");
    decon_cmd->callback([&] {
        apply_common(common, cfg);
        if (width_flag) cfg.set_flag("decontaminate.ngram_width", *width_flag);
        if (overlap_flag) cfg.set_flag("decontaminate.overlap_threshold", *overlap_flag);
        Stopwatch watch;
        sf::pipeline::ContaminationConfig ccfg;
        ccfg.ngram_width = static_cast<int>(cfg.integer("decontaminate.ngram_width"));
        ccfg.overlap_threshold = cfg.number("decontaminate.overlap_threshold");
        auto benchmarks = sf::pipeline::load_benchmark_questions(benchmark_path);
        sf::pipeline::BenchmarkIndex index(benchmarks, ccfg);
        std::vector<sf::corpus::LineError> errors;
        auto records = sf::corpus::read_question_records(in_path, policy_from(cfg), &errors);
        auto result = sf::pipeline::remove_contamination(records, index, ccfg);
        long written = sf::corpus::write_question_records(result.kept, out_path);
        if (!drops_path.empty()) write_drop_report(drops_path, result.dropped);
        sf::service::ManifestBuilder manifest("decontaminate", cfg);
        manifest.add_input(in_path);
        manifest.add_input(benchmark_path);
        manifest.add_output(out_path, written);
        manifest.add_count("read", static_cast<long>(records.size()));
        manifest.add_count("benchmark_questions", static_cast<long>(benchmarks.size()));
        manifest.add_count("dropped_contaminated", static_cast<long>(result.dropped.size()));
        write_manifest(manifest, watch,
                       common.manifest_path.empty() ? default_manifest_path(out_path)
                                                    : common.manifest_path);
    });

    // ---- rubric-gen --------------------------------------------------------
    auto* rubric_cmd = app.add_subcommand("rubric-gen", "generate rubrics for open-ended records");
    std::string generator_spec, failed_path;
    std::optional<long> min_items_flag, max_items_flag, rubric_retries_flag;
    rubric_cmd->add_option("--in", in_path, "input JSONL")->required();
    rubric_cmd->add_option("--out", out_path, "output JSONL")->required();
    rubric_cmd->add_option("--generator", generator_spec, "scripted:<path> or http[:<url>]")
        ->required();
    rubric_cmd->add_option("--failed", failed_path, "rubric-failed records JSONL");
    rubric_cmd->add_option("--min-items", min_items_flag, "minimum rubric items");
    rubric_cmd->add_option("--max-items", max_items_flag, "maximum rubric items");
    rubric_cmd->add_option("--retries", rubric_retries_flag, "generation retry limit");
    rubric_cmd->add_option("--manifest", common.manifest_path, "manifest path");
    rubric_cmd->callback([&] {
        apply_common(common, cfg);
        if (min_items_flag) cfg.set_flag("rubric.min_items", *min_items_flag);
        if (max_items_flag) cfg.set_flag("rubric.max_items", *max_items_flag);
        if (rubric_retries_flag) cfg.set_flag("rubric.retries", *rubric_retries_flag);
        Stopwatch watch;
        auto generator = make_backend(generator_spec, cfg, "generator");
        sf::pipeline::RubricGenConfig rcfg;
        rcfg.min_items = static_cast<int>(cfg.integer("rubric.min_items"));
        rcfg.max_items = static_cast<int>(cfg.integer("rubric.max_items"));
        rcfg.max_attempts = static_cast<int>(cfg.integer("rubric.retries"));
        std::vector<sf::corpus::LineError> errors;
        sf::corpus::JsonlWriter writer(out_path);
        std::unique_ptr<sf::corpus::JsonlWriter> failed_writer;
        if (!failed_path.empty()) failed_writer = std::make_unique<sf::corpus::JsonlWriter>(failed_path);
        long read = 0, generated = 0, failed = 0, passthrough = 0;
        sf::corpus::for_each_question_record(
            in_path, policy_from(cfg), &errors, [&](sf::corpus::QuestionRecord&& rec) {
                ++read;
                bool open_ended = rec.verification &&
                                  *rec.verification == sf::corpus::Verification::OpenEnded;
                if (!open_ended || !rec.rubrics.empty()) {
                    ++passthrough;
                    writer.write(rec);
                    return;
                }
                auto outcome = sf::pipeline::generate_rubrics(rec, *generator, rcfg);
                if (outcome.ok) {
                    ++generated;
                    writer.write(rec);
                } else {
                    ++failed;
                    if (failed_writer) {
                        rec.extra["rubric_failed"] = true;
                        rec.extra["rubric_error"] = outcome.error;
                        failed_writer->write(rec);
                    }
                }
            });
        long written = writer.commit();
        if (failed_writer) failed_writer->commit();
        sf::service::ManifestBuilder manifest("rubric-gen", cfg);
        manifest.add_input(in_path);
        manifest.add_output(out_path, written);
        manifest.add_count("read", read);
        manifest.add_count("generated", generated);
        manifest.add_count("failed", failed);
        manifest.add_count("passthrough", passthrough);
        write_manifest(manifest, watch,
                       common.manifest_path.empty() ? default_manifest_path(out_path)
                                                    : common.manifest_path);
    });

    // ---- difficulty --------------------------------------------------------
    auto* diff_cmd = app.add_subcommand("difficulty", "rollout-based difficulty + 8/8 discard");
    std::string estimates_path;
    std::optional<long> rollouts_flag;
    std::optional<std::string> missing_flag;
    bool no_filter = false;
    diff_cmd->add_option("--in", in_path, "input JSONL")->required();
    diff_cmd->add_option("--out", out_path, "output JSONL")->required();
    diff_cmd->add_option("--generator", generator_spec, "scripted:<path> or http[:<url>]")
        ->required();
    diff_cmd->add_option("--judge", judge_spec, "verifier for open-ended records");
    diff_cmd->add_option("--rollouts", rollouts_flag, "rollouts per question");
    diff_cmd->add_flag("--no-filter", no_filter, "keep 8/8 records (annotate only)");
    diff_cmd->add_option("--estimates", estimates_path, "per-question estimate JSONL");
    diff_cmd->add_option("--missing", missing_flag, "missing estimate policy: fail | pass")
        ->check(CLI::IsMember({"fail", "pass"}));
    std::string diff_transcript;
    diff_cmd->add_option("--record-transcript", diff_transcript,
                         "append generator/judge request/response pairs for offline replay");
    diff_cmd->add_option("--manifest", common.manifest_path, "manifest path");
    diff_cmd->callback([&] {
        apply_common(common, cfg);
        if (rollouts_flag) cfg.set_flag("difficulty.rollouts", *rollouts_flag);
        if (missing_flag) cfg.set_flag("difficulty.missing_estimate", *missing_flag);
        Stopwatch watch;
        auto generator = make_backend(generator_spec, cfg, "generator");
        std::unique_ptr<sf::chat::ChatClient> judge;
        if (!judge_spec.empty()) judge = make_backend(judge_spec, cfg, "judge");
        std::unique_ptr<sf::chat::RecordingChatClient> gen_recorder, judge_recorder;
        sf::chat::ChatClient* generator_ptr = generator.get();
        sf::chat::ChatClient* judge_ptr = judge.get();
        if (!diff_transcript.empty()) {
            gen_recorder = std::make_unique<sf::chat::RecordingChatClient>(*generator_ptr,
                                                                           diff_transcript);
            generator_ptr = gen_recorder.get();
            if (judge_ptr) {
                judge_recorder = std::make_unique<sf::chat::RecordingChatClient>(*judge_ptr,
                                                                                 diff_transcript);
                judge_ptr = judge_recorder.get();
            }
        }
        sf::difficulty::GeneratorConfig gcfg;
        gcfg.rollouts = static_cast<int>(cfg.integer("difficulty.rollouts"));
        gcfg.max_attempts = static_cast<int>(cfg.integer("difficulty.retries"));
        gcfg.judge_attempts = static_cast<int>(cfg.integer("judge.retries"));
        gcfg.concurrency = static_cast<int>(cfg.integer("difficulty.concurrency"));
        gcfg.sampling = sampling_from(cfg, "difficulty");

        std::vector<sf::corpus::LineError> errors;
        auto records = sf::corpus::read_question_records(in_path, policy_from(cfg), &errors);
        std::vector<sf::difficulty::DifficultyEstimate> ordered(records.size());
        int question_workers = std::max(1, static_cast<int>(cfg.integer(
                                               "difficulty.question_concurrency")));
        {
            std::atomic<size_t> next{0};
            auto worker = [&] {
                while (true) {
                    size_t i = next.fetch_add(1);
                    if (i >= records.size()) break;
                    ordered[i] = sf::difficulty::estimate_difficulty(records[i], *generator_ptr,
                                                                     judge_ptr, gcfg);
                }
            };
            if (question_workers == 1 || records.size() < 2) {
                worker();
            } else {
                std::vector<std::thread> pool;
                for (int t = 0; t < question_workers; ++t) pool.emplace_back(worker);
                for (auto& th : pool) th.join();
            }
        }
        std::map<std::string, sf::difficulty::DifficultyEstimate> estimates;
        long degraded = 0;
        for (auto& est : ordered) {
            if (est.degraded) ++degraded;
            estimates[est.question_id] = std::move(est);
        }
        if (!estimates_path.empty()) {
            sf::corpus::JsonlWriter writer(estimates_path);
            for (const auto& rec : records) {
                const auto& est = estimates.at(rec.id);
                ordered_json verdicts = ordered_json::array();
                for (bool v : est.verdicts) verdicts.push_back(v);
                writer.write(ordered_json{{"question_id", est.question_id},
                                          {"successes", est.successes},
                                          {"trials", est.trials},
                                          {"verdicts", verdicts},
                                          {"degraded", est.degraded}});
            }
            writer.commit();
        }

        long written = 0, trivial = 0;
        if (no_filter) {
            sf::corpus::JsonlWriter writer(out_path);
            for (auto& rec : records) {
                const auto& est = estimates.at(rec.id);
                if (est.trials == 8) rec.difficulty_eighths = est.successes;
                writer.write(rec);
            }
            written = writer.commit();
        } else {
            auto policy = cfg.str("difficulty.missing_estimate") == "pass"
                              ? sf::difficulty::MissingEstimatePolicy::PassThroughUnscored
                              : sf::difficulty::MissingEstimatePolicy::Fail;
            auto result = sf::difficulty::apply_triviality_filter(records, estimates, policy);
            trivial = static_cast<long>(result.dropped_trivial_ids.size());
            written = sf::corpus::write_question_records(result.kept, out_path);
        }
        sf::service::ManifestBuilder manifest("difficulty", cfg);
        manifest.add_input(in_path);
        manifest.add_output(out_path, written);
        manifest.add_count("read", static_cast<long>(records.size()));
        manifest.add_count("trivial_dropped", trivial);
        manifest.add_count("degraded", degraded);
        write_manifest(manifest, watch,
                       common.manifest_path.empty() ? default_manifest_path(out_path)
                                                    : common.manifest_path);
    });

    // ---- select-sft ---------------------------------------------------------
    auto* select_cmd = app.add_subcommand("select-sft", "exploration-expanding coverage selection");
    std::string report_path, mode_filter, algorithm = "lazy";
    long select_n = 0;
    std::optional<long> budget_flag;
    select_cmd->add_option("--in", in_path, "SFT example JSONL")->required();
    select_cmd->add_option("--n", select_n, "number of examples to select")->required();
    select_cmd->add_option("--out", out_path, "selected ids JSON")->required();
    select_cmd->add_option("--mode", mode_filter, "think | instruct pool filter")
        ->check(CLI::IsMember({"think", "instruct"}));
    select_cmd->add_option("--report", report_path, "coverage report JSON");
    select_cmd->add_option("--algorithm", algorithm, "lazy | naive")
        ->check(CLI::IsMember({"lazy", "naive"}));
    select_cmd->add_option("--memory-budget-mb", budget_flag, "gram spill budget (0 = in memory)");
    select_cmd->add_option("--manifest", common.manifest_path, "manifest path");
    select_cmd->callback([&] {
        apply_common(common, cfg);
        if (budget_flag) cfg.set_flag("coverage.memory_budget_mb", *budget_flag);
        Stopwatch watch;
        int gram_width = static_cast<int>(cfg.integer("coverage.gram_width"));
        long budget_mb = cfg.integer("coverage.memory_budget_mb");
        sf::coverage::GramPool pool;
        if (budget_mb > 0)
            pool.set_spill("", static_cast<std::uint64_t>(budget_mb) * 1024 * 1024);
        std::map<std::string, long> id_uses;
        std::vector<sf::corpus::LineError> errors;
        long read = 0;
        sf::corpus::for_each_sft_example(
            in_path, policy_from(cfg), &errors, [&](sf::corpus::SftExample&& ex) {
                ++read;
                if (!mode_filter.empty() &&
                    ex.mode != *sf::corpus::parse_sft_mode(mode_filter))
                    return;
                // Repeated question ids get an ordinal suffix so the
                // selected-ids list stays unambiguous.
                long uses = ++id_uses[ex.question_id];
                std::string pool_id =
                    uses == 1 ? ex.question_id : ex.question_id + "#" + std::to_string(uses);
                pool.add(pool_id, sf::coverage::extract_grams(ex, {}, gram_width));
            });
        auto state = algorithm == "naive"
                         ? sf::coverage::select_greedy(pool, static_cast<size_t>(select_n))
                         : sf::coverage::select_lazy_greedy(pool, static_cast<size_t>(select_n));
        write_json_file(out_path, ordered_json{{"selected_ids", state.picked_ids}});
        auto report = sf::coverage::coverage_report(state);
        if (!report_path.empty())
            write_json_file(report_path, ordered_json{{"selected", report.selected},
                                                      {"unique_grams", report.unique_grams},
                                                      {"gain_curve", report.gain_curve},
                                                      {"reevaluations", report.reevaluations}});
        sf::service::ManifestBuilder manifest("select-sft", cfg);
        manifest.add_input(in_path);
        manifest.add_output(out_path, static_cast<long>(state.picked_ids.size()));
        manifest.add_count("read", read);
        manifest.add_count("pool", static_cast<long>(pool.size()));
        manifest.add_count("unique_grams", static_cast<long>(state.unique_grams));
        write_manifest(manifest, watch,
                       common.manifest_path.empty() ? default_manifest_path(out_path)
                                                    : common.manifest_path);
    });

    // ---- curriculum ----------------------------------------------------------
    auto* cinit = app.add_subcommand("curriculum-init", "partition records into a curriculum state");
    std::string state_path, state_out_path, events_path;
    std::optional<double> tau_discard_flag, tau_pending_flag, tau_train_flag;
    std::optional<std::string> extremum_flag;
    cinit->add_option("--in", in_path, "records with difficulty")->required();
    cinit->add_option("--state-out", state_out_path, "state checkpoint JSON")->required();
    cinit->add_option("--tau-discard", tau_discard_flag, "discard threshold");
    cinit->add_option("--tau-pending", tau_pending_flag, "pending threshold");
    cinit->add_option("--tau-train", tau_train_flag, "mastery threshold");
    cinit->add_option("--extremum", extremum_flag, "replacement extremum: max_d | min_d")
        ->check(CLI::IsMember({"max_d", "min_d"}));
    cinit->add_option("--manifest", common.manifest_path, "manifest path");
    cinit->callback([&] {
        apply_common(common, cfg);
        if (tau_discard_flag) cfg.set_flag("curriculum.tau_discard", *tau_discard_flag);
        if (tau_pending_flag) cfg.set_flag("curriculum.tau_pending", *tau_pending_flag);
        if (tau_train_flag) cfg.set_flag("curriculum.tau_train", *tau_train_flag);
        if (extremum_flag) cfg.set_flag("curriculum.replacement_extremum", *extremum_flag);
        Stopwatch watch;
        std::vector<sf::corpus::LineError> errors;
        auto records = sf::corpus::read_question_records(in_path, policy_from(cfg), &errors);
        auto state = sf::curriculum::partition(records, curriculum_config_from(cfg));
        state.save(state_out_path);
        sf::service::ManifestBuilder manifest("curriculum-init", cfg);
        manifest.add_input(in_path);
        manifest.add_output(state_out_path, 1);
        manifest.add_count("train", static_cast<long>(state.train.size()));
        manifest.add_count("pending", static_cast<long>(state.pending_size()));
        manifest.add_count("discard", static_cast<long>(state.discard.size()));
        write_manifest(manifest, watch,
                       common.manifest_path.empty() ? default_manifest_path(state_out_path)
                                                    : common.manifest_path);
    });

    auto* cstep = app.add_subcommand("curriculum-step", "apply rollout results to the state");
    cstep->add_option("--state", state_path, "state checkpoint JSON")->required();
    cstep->add_option("--events", events_path, "rollout result JSONL")->required();
    cstep->add_option("--state-out", state_out_path, "updated checkpoint")->required();
    cstep->add_option("--manifest", common.manifest_path, "manifest path");
    cstep->callback([&] {
        apply_common(common, cfg);
        Stopwatch watch;
        auto state = sf::curriculum::CurriculumState::load(state_path);
        sf::corpus::JsonlReader reader(events_path, policy_from(cfg));
        long events = 0;
        while (auto j = reader.next_json()) {
            ++events;
            long count = j->contains("count") ? j->at("count").get<long>() : 1;
            sf::curriculum::record_rollout(state, j->at("question_id").get<std::string>(),
                                           j->at("correct").get<bool>(), count);
        }
        state.save(state_out_path);
        sf::service::ManifestBuilder manifest("curriculum-step", cfg);
        manifest.add_input(state_path);
        manifest.add_input(events_path);
        manifest.add_output(state_out_path, 1);
        manifest.add_count("events", events);
        write_manifest(manifest, watch,
                       common.manifest_path.empty() ? default_manifest_path(state_out_path)
                                                    : common.manifest_path);
    });

    auto* cend = app.add_subcommand("curriculum-epoch-end", "replace mastered items");
    std::string report_out;
    cend->add_option("--state", state_path, "state checkpoint JSON")->required();
    cend->add_option("--state-out", state_out_path, "updated checkpoint")->required();
    cend->add_option("--report", report_out, "epoch report JSON");
    cend->add_option("--manifest", common.manifest_path, "manifest path");
    cend->callback([&] {
        apply_common(common, cfg);
        Stopwatch watch;
        auto state = sf::curriculum::CurriculumState::load(state_path);
        auto report = sf::curriculum::epoch_end(state);
        state.save(state_out_path);
        if (!report_out.empty()) {
            ordered_json j = {{"epoch", report.epoch},
                              {"replace_ratio", report.replace_ratio},
                              {"mean_train_difficulty", report.mean_train_difficulty_after},
                              {"train_size", report.train_size_after},
                              {"pending_size", report.pending_size_after},
                              {"mastered", report.mastered},
                              {"replaced", report.replaced},
                              {"removed_without_replacement", report.removed_without_replacement}};
            write_json_file(report_out, j);
        }
        sf::service::ManifestBuilder manifest("curriculum-epoch-end", cfg);
        manifest.add_input(state_path);
        manifest.add_output(state_out_path, 1);
        manifest.add_count("mastered", static_cast<long>(report.mastered));
        manifest.add_count("replaced", static_cast<long>(report.replaced));
        write_manifest(manifest, watch,
                       common.manifest_path.empty() ? default_manifest_path(state_out_path)
                                                    : common.manifest_path);
    });

    // ---- reward ---------------------------------------------------------------
    auto* rbatch = app.add_subcommand("reward-batch", "score rollout requests from JSONL");
    bool gate_flag = false;
    std::string record_transcript, stats_out;
    rbatch->add_option("--in", in_path, "request JSONL")->required();
    rbatch->add_option("--out", out_path, "breakdown JSONL")->required();
    rbatch->add_option("--judge", judge_spec, "scripted:<path> or http[:<url>]");
    rbatch->add_flag("--gate", gate_flag, "cap reward below 0.5 when the final answer is wrong");
    rbatch->add_option("--record-transcript", record_transcript,
                       "append judge request/response pairs for offline replay");
    rbatch->add_option("--stats", stats_out, "reward mean/std/histogram report JSON");
    rbatch->add_option("--manifest", common.manifest_path, "manifest path");
    rbatch->callback([&] {
        apply_common(common, cfg);
        if (gate_flag) cfg.set_flag("reward.gate", true);
        Stopwatch watch;
        std::unique_ptr<sf::chat::ChatClient> judge;
        std::unique_ptr<sf::chat::RecordingChatClient> recorder;
        if (!judge_spec.empty()) judge = make_backend(judge_spec, cfg, "judge");
        sf::chat::ChatClient* judge_ptr = judge.get();
        if (judge_ptr && !record_transcript.empty()) {
            recorder = std::make_unique<sf::chat::RecordingChatClient>(*judge_ptr,
                                                                       record_transcript);
            judge_ptr = recorder.get();
        }
        auto counts = sf::service::reward_batch(in_path, out_path, judge_ptr,
                                                reward_config_from(cfg), policy_from(cfg));
        sf::service::ManifestBuilder manifest("reward-batch", cfg);
        manifest.add_input(in_path);
        manifest.add_output(out_path, counts.scored + counts.failed);
        manifest.add_count("requests", counts.requests);
        manifest.add_count("scored", counts.scored);
        manifest.add_count("failed", counts.failed);
        if (!counts.rewards.empty()) {
            auto stats = sf::reward::reward_stats(counts.rewards);
            if (!stats_out.empty()) {
                ordered_json hist = ordered_json::array();
                for (long c : stats.histogram) hist.push_back(c);
                write_json_file(stats_out, ordered_json{{"count", stats.count},
                                                        {"mean", stats.mean},
                                                        {"std", stats.stddev},
                                                        {"histogram", hist}});
            }
        }
        write_manifest(manifest, watch,
                       common.manifest_path.empty() ? default_manifest_path(out_path)
                                                    : common.manifest_path);
    });

    auto* rserve = app.add_subcommand("reward-serve", "HTTP reward endpoint for RL trainers");
    std::string bind_address = "127.0.0.1";
    int port = 8490;
    rserve->add_option("--bind", bind_address, "bind address (default local only)");
    rserve->add_option("--port", port, "listen port");
    rserve->add_option("--judge", judge_spec, "scripted:<path> or http[:<url>]");
    rserve->add_flag("--gate", gate_flag, "cap reward below 0.5 when the final answer is wrong");
    rserve->callback([&] {
        apply_common(common, cfg);
        if (gate_flag) cfg.set_flag("reward.gate", true);
        std::unique_ptr<sf::chat::ChatClient> judge;
        if (!judge_spec.empty()) judge = make_backend(judge_spec, cfg, "judge");
        auto server = sf::service::make_reward_server(judge.get(), reward_config_from(cfg));
        std::cerr << "listening on " << bind_address << ":" << port << "\n";
        if (!server->listen(bind_address, port))
            throw std::runtime_error("failed to bind " + bind_address + ":" +
                                     std::to_string(port));
    });

    // ---- stats ------------------------------------------------------------------
    auto* stats_cmd = app.add_subcommand("stats", "corpus statistics report");
    stats_cmd->add_option("--in", in_path, "input JSONL")->required();
    stats_cmd->add_option("--out", out_path, "report JSON")->required();
    stats_cmd->add_option("--manifest", common.manifest_path, "manifest path");
    stats_cmd->callback([&] {
        apply_common(common, cfg);
        Stopwatch watch;
        std::vector<sf::corpus::LineError> errors;
        auto records = sf::corpus::read_question_records(in_path, policy_from(cfg), &errors);
        write_json_file(out_path, sf::service::stats_report(records));
        sf::service::ManifestBuilder manifest("stats", cfg);
        manifest.add_input(in_path);
        manifest.add_output(out_path, 1);
        manifest.add_count("records", static_cast<long>(records.size()));
        write_manifest(manifest, watch,
                       common.manifest_path.empty() ? default_manifest_path(out_path)
                                                    : common.manifest_path);
    });

    // ---- simulate ------------------------------------------------------------------
    auto* sim_cmd = app.add_subcommand("simulate", "closed-loop curriculum simulation");
    std::string policy_spec = "logistic:bias=-4,epoch_gain=0.5,ease_gain=4";
    long epochs = 10, rollouts = 8;
    sim_cmd->add_option("--in", in_path, "records with difficulty")->required();
    sim_cmd->add_option("--out", out_path, "trajectory JSONL")->required();
    sim_cmd->add_option("--epochs", epochs, "epochs to simulate");
    sim_cmd->add_option("--rollouts", rollouts, "rollouts per question per epoch");
    sim_cmd->add_option("--sim-policy", policy_spec,
                        "constant:<p> or logistic:bias=..,epoch_gain=..,ease_gain=..");
    sim_cmd->add_option("--tau-discard", tau_discard_flag, "discard threshold");
    sim_cmd->add_option("--tau-pending", tau_pending_flag, "pending threshold");
    sim_cmd->add_option("--tau-train", tau_train_flag, "mastery threshold");
    sim_cmd->add_option("--manifest", common.manifest_path, "manifest path");
    sim_cmd->callback([&] {
        apply_common(common, cfg);
        if (tau_discard_flag) cfg.set_flag("curriculum.tau_discard", *tau_discard_flag);
        if (tau_pending_flag) cfg.set_flag("curriculum.tau_pending", *tau_pending_flag);
        if (tau_train_flag) cfg.set_flag("curriculum.tau_train", *tau_train_flag);
        Stopwatch watch;
        std::vector<sf::corpus::LineError> errors;
        auto records = sf::corpus::read_question_records(in_path, policy_from(cfg), &errors);
        auto policy = parse_policy(policy_spec);
        auto trajectory = sf::curriculum::simulate(
            *policy, records, curriculum_config_from(cfg), static_cast<int>(epochs),
            static_cast<int>(rollouts), static_cast<std::uint64_t>(cfg.integer("seed")));
        sf::corpus::JsonlWriter writer(out_path);
        for (const auto& e : trajectory)
            writer.write(ordered_json{{"epoch", e.epoch},
                                      {"replace_ratio", e.replace_ratio},
                                      {"mean_train_difficulty", e.mean_train_difficulty_after},
                                      {"train_size", e.train_size_after},
                                      {"pending_size", e.pending_size_after},
                                      {"mastered", e.mastered},
                                      {"replaced", e.replaced}});
        long written = writer.commit();
        sf::service::ManifestBuilder manifest("simulate", cfg);
        manifest.add_input(in_path);
        manifest.add_output(out_path, written);
        manifest.add_count("records", static_cast<long>(records.size()));
        manifest.add_count("epochs", epochs);
        write_manifest(manifest, watch,
                       common.manifest_path.empty() ? default_manifest_path(out_path)
                                                    : common.manifest_path);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << ordered_json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}

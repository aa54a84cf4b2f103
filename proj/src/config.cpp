#include "sciforge/config.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "sciforge/text.hpp"

namespace sciforge::config {

namespace {

constexpr const char* kPaper = "paper-default";
constexpr const char* kToolkit = "toolkit-default";

}  // namespace

ToolkitConfig ToolkitConfig::defaults() {
    ToolkitConfig cfg;
    auto set = [&](const char* key, ordered_json value, const char* origin) {
        cfg.entries_[key] = {std::move(value), origin};
    };

    set("seed", 0, kToolkit);
    set("io.error_policy", "fail", kToolkit);

    set("dedup.shingle_width", 3, kToolkit);
    set("dedup.permutations", 128, kToolkit);
    set("dedup.threshold", 0.9, kToolkit);

    set("decontaminate.ngram_width", 13, kToolkit);
    set("decontaminate.overlap_threshold", 0.8, kToolkit);

    set("subject.retries", 3, kToolkit);

    set("rubric.min_items", 7, kPaper);
    set("rubric.max_items", 20, kPaper);
    set("rubric.retries", 3, kToolkit);

    set("difficulty.rollouts", 8, kPaper);
    set("difficulty.temperature", 0.7, kPaper);
    set("difficulty.top_p", 0.8, kPaper);
    set("difficulty.top_k", 20, kPaper);
    set("difficulty.max_tokens", 4096, kToolkit);
    set("difficulty.retries", 3, kToolkit);
    set("difficulty.concurrency", 4, kToolkit);
    // questions in flight; 1 keeps scripted-sequence runs reproducible
    set("difficulty.question_concurrency", 1, kToolkit);
    set("difficulty.missing_estimate", "fail", kToolkit);

    set("curriculum.tau_discard", 1.0, kPaper);
    set("curriculum.tau_pending", 0.625, kPaper);
    set("curriculum.tau_train", 0.9, kPaper);
    set("curriculum.replacement_extremum", "max_d", kToolkit);

    set("coverage.gram_width", 4, kPaper);
    set("coverage.memory_budget_mb", 0, kToolkit);

    set("reward.weight_essential", 1.0, kPaper);
    set("reward.weight_important", 0.7, kPaper);
    set("reward.weight_optional", 0.3, kPaper);
    set("reward.weight_pitfall", 0.9, kPaper);
    set("reward.weight_final_answer", 4.0, kPaper);
    set("reward.gate", false, kToolkit);

    set("judge.endpoint", "", kToolkit);
    set("judge.model", "", kToolkit);
    set("judge.api_key", "", kToolkit);
    set("judge.max_tokens", 2048, kPaper);
    set("judge.temperature", 0.7, kPaper);
    set("judge.top_p", 0.8, kPaper);
    set("judge.top_k", 20, kPaper);
    set("judge.retries", 3, kToolkit);
    set("judge.concurrency", 4, kToolkit);

    set("generator.endpoint", "", kToolkit);
    set("generator.model", "", kToolkit);
    set("generator.api_key", "", kToolkit);

    return cfg;
}

void ToolkitConfig::load_env() {
    static const std::pair<const char*, const char*> vars[] = {
        {"SCIFORGE_JUDGE_ENDPOINT", "judge.endpoint"},
        {"SCIFORGE_JUDGE_MODEL", "judge.model"},
        {"SCIFORGE_JUDGE_API_KEY", "judge.api_key"},
        {"SCIFORGE_GENERATOR_ENDPOINT", "generator.endpoint"},
        {"SCIFORGE_GENERATOR_MODEL", "generator.model"},
        {"SCIFORGE_GENERATOR_API_KEY", "generator.api_key"},
    };
    for (const auto& [env_name, key] : vars)
        if (const char* v = std::getenv(env_name)) overlay(key, std::string(v), "env");
}

void ToolkitConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("config file must hold a JSON object");
    for (const auto& [key, value] : j.items()) overlay(key, value, "file");
}

void ToolkitConfig::set_flag(const std::string& key, ordered_json value) {
    overlay(key, std::move(value), "flag");
}

void ToolkitConfig::overlay(const std::string& key, ordered_json value, const std::string& origin) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw std::runtime_error("unknown config key: " + key);
    it->second = {std::move(value), origin};
}

bool ToolkitConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

const ToolkitConfig::Entry& ToolkitConfig::entry(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw std::runtime_error("unknown config key: " + key);
    return it->second;
}

double ToolkitConfig::number(const std::string& key) const {
    const auto& e = entry(key);
    if (!e.value.is_number()) throw std::runtime_error("config key " + key + " is not a number");
    return e.value.get<double>();
}

long ToolkitConfig::integer(const std::string& key) const {
    const auto& e = entry(key);
    if (!e.value.is_number_integer())
        throw std::runtime_error("config key " + key + " is not an integer");
    return e.value.get<long>();
}

bool ToolkitConfig::boolean(const std::string& key) const {
    const auto& e = entry(key);
    if (!e.value.is_boolean()) throw std::runtime_error("config key " + key + " is not a boolean");
    return e.value.get<bool>();
}

std::string ToolkitConfig::str(const std::string& key) const {
    const auto& e = entry(key);
    if (!e.value.is_string()) throw std::runtime_error("config key " + key + " is not a string");
    return e.value.get<std::string>();
}

ordered_json ToolkitConfig::render() const {
    ordered_json out = ordered_json::object();
    for (const auto& [key, e] : entries_) {
        // Secrets stay out of rendered manifests.
        bool secret = key.find("api_key") != std::string::npos;
        out[key] = {{"value", secret && !e.value.get<std::string>().empty()
                                  ? ordered_json("<redacted>")
                                  : e.value},
                    {"origin", e.origin}};
    }
    return out;
}

std::string ToolkitConfig::digest() const { return text::hex64(text::fnv1a64(render().dump())); }

}  // namespace sciforge::config

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sciforge/chat.hpp"
#include "sciforge/corpus.hpp"
#include "sciforge/coverage.hpp"
#include "sciforge/curriculum.hpp"
#include "sciforge/parsing.hpp"
#include "sciforge/pipeline.hpp"
#include "sciforge/prompts.hpp"
#include "sciforge/reward.hpp"
#include "sciforge/text.hpp"

namespace py = pybind11;
using namespace sciforge;

namespace {

/// ChatClient backed by a python callable: fn(messages) -> str, where
/// messages is a list of (role, content) pairs. Raising propagates as a
/// failed call.
class CallableChatClient : public chat::ChatClient {
public:
    explicit CallableChatClient(py::function fn) : fn_(std::move(fn)) {}

    chat::ChatResult complete(const std::vector<chat::ChatMessage>& messages,
                              const chat::SamplingParams&) override {
        py::gil_scoped_acquire gil;
        py::list msgs;
        for (const auto& m : messages) msgs.append(py::make_tuple(m.role, m.content));
        try {
            return chat::ChatResult::success(fn_(msgs).cast<std::string>());
        } catch (const py::error_already_set& e) {
            return chat::ChatResult::failure({chat::ChatError::Kind::Transport, e.what(), 0});
        }
    }

private:
    py::function fn_;
};

corpus::QuestionRecord record_from_dict(const py::dict& d) {
    corpus::ordered_json j = corpus::ordered_json::parse(
        py::module_::import("json").attr("dumps")(d).cast<std::string>());
    return corpus::record_from_json(j);
}

py::object json_to_py(const corpus::ordered_json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

coverage::GramPool pool_from_gram_lists(const std::vector<std::vector<std::string>>& gram_sets,
                                        const std::vector<std::string>& ids) {
    if (!ids.empty() && ids.size() != gram_sets.size())
        throw std::invalid_argument("ids and gram_sets must have matching lengths");
    coverage::GramPool pool;
    for (size_t i = 0; i < gram_sets.size(); ++i) {
        std::vector<std::uint64_t> grams;
        grams.reserve(gram_sets[i].size());
        for (const auto& g : gram_sets[i]) grams.push_back(text::fnv1a64(g));
        std::sort(grams.begin(), grams.end());
        grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
        pool.add(ids.empty() ? std::to_string(i) : ids[i], std::move(grams));
    }
    return pool;
}

py::dict selection_to_dict(const coverage::SelectionState& state) {
    py::dict out;
    out["picked_indices"] = state.picked_indices;
    out["picked_ids"] = state.picked_ids;
    out["gains"] = state.gains;
    out["unique_grams"] = state.unique_grams;
    out["reevaluations"] = state.reevaluations;
    return out;
}

reward::RewardConfig reward_config_from_kwargs(double essential, double important,
                                               double optional_detail, double pitfall,
                                               double final_answer, bool gate) {
    reward::RewardConfig cfg;
    cfg.weights = {essential, important, optional_detail, pitfall, final_answer};
    cfg.gate = gate;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "science QA dataset and rubric-reward toolkit";

    // ---- text -------------------------------------------------------------
    m.def("normalize_text", [](const std::string& s) { return text::normalize(s); },
          "Lowercase, punctuation-stripped, whitespace-collapsed text form");
    m.def(
        "tokenize",
        [](const std::string& s) {
            return text::tokenize(s);
        },
        "Word tokens (lowercased, numerals kept, punctuation dropped)");

    // ---- prompts ------------------------------------------------------------
    m.def("render_instruction", &prompts::render_instruction, py::arg("subject"),
          py::arg("question"));
    m.def("render_answer_verification", &prompts::render_answer_verification, py::arg("question"),
          py::arg("reference_answer"), py::arg("candidate_answer"));
    m.def("render_rubric_generation", &prompts::render_rubric_generation, py::arg("subject"),
          py::arg("question"), py::arg("reference_answer"));
    m.def("render_rubric_judge_user", &prompts::render_rubric_judge_user, py::arg("question"),
          py::arg("rubric_item"), py::arg("response"));
    m.attr("RUBRIC_JUDGE_SYSTEM_PROMPT") = std::string(prompts::kRubricJudgeSystemPrompt);

    // ---- parsing ------------------------------------------------------------
    py::class_<parsing::ParsedRollout>(m, "ParsedRollout")
        .def_readonly("raw", &parsing::ParsedRollout::raw)
        .def_readonly("think", &parsing::ParsedRollout::think)
        .def_readonly("response", &parsing::ParsedRollout::response)
        .def_readonly("final_answer", &parsing::ParsedRollout::final_answer)
        .def_readonly("no_think_tag", &parsing::ParsedRollout::no_think_tag)
        .def_readonly("no_boxed", &parsing::ParsedRollout::no_boxed);
    m.def("parse_rollout", &parsing::parse_rollout, py::arg("text"));
    m.def("extract_last_boxed", &parsing::extract_last_boxed, py::arg("text"));

    // ---- canonicalization / rule verification ---------------------------------
    py::class_<pipeline::CanonicalAnswer>(m, "CanonicalAnswer")
        .def_property_readonly("kind",
                               [](const pipeline::CanonicalAnswer& c) {
                                   switch (c.kind) {
                                       case pipeline::CanonicalAnswer::Kind::Number:
                                           return "number";
                                       case pipeline::CanonicalAnswer::Kind::Expression:
                                           return "expression";
                                       case pipeline::CanonicalAnswer::Kind::ChoiceKey:
                                           return "choice_key";
                                       case pipeline::CanonicalAnswer::Kind::Token:
                                           return "token";
                                   }
                                   return "token";
                               })
        .def_readonly("value", &pipeline::CanonicalAnswer::value)
        .def_readonly("unit", &pipeline::CanonicalAnswer::unit)
        .def_readonly("text", &pipeline::CanonicalAnswer::text);
    m.def("canonicalize_answer", &pipeline::canonicalize_answer, py::arg("reference_answer"));
    m.def(
        "verify_answer_rule",
        [](const std::optional<std::string>& answer, const std::string& reference) {
            auto canonical = pipeline::canonicalize_answer(reference);
            if (!canonical)
                throw std::invalid_argument("reference answer does not canonicalize");
            return reward::verify_answer_rule(answer, *canonical);
        },
        py::arg("final_answer"), py::arg("reference_answer"));

    // ---- coverage --------------------------------------------------------------
    m.def(
        "extract_grams",
        [](const std::string& prompt, const std::string& response, int width) {
            corpus::SftExample ex;
            ex.question_id = "q";
            ex.prompt = prompt;
            ex.response = response;
            return coverage::extract_grams(ex, {}, width);
        },
        py::arg("prompt"), py::arg("response"), py::arg("gram_width") = 4);
    m.def(
        "select_greedy",
        [](const std::vector<std::vector<std::string>>& gram_sets, size_t n,
           const std::vector<std::string>& ids) {
            auto pool = pool_from_gram_lists(gram_sets, ids);
            return selection_to_dict(coverage::select_greedy(pool, n));
        },
        py::arg("gram_sets"), py::arg("n"), py::arg("ids") = std::vector<std::string>{});
    m.def(
        "select_lazy_greedy",
        [](const std::vector<std::vector<std::string>>& gram_sets, size_t n,
           const std::vector<std::string>& ids) {
            auto pool = pool_from_gram_lists(gram_sets, ids);
            return selection_to_dict(coverage::select_lazy_greedy(pool, n));
        },
        py::arg("gram_sets"), py::arg("n"), py::arg("ids") = std::vector<std::string>{});

    // ---- curriculum --------------------------------------------------------------
    py::class_<curriculum::CurriculumConfig>(m, "CurriculumConfig")
        .def(py::init([](double tau_discard, double tau_pending, double tau_train,
                         const std::string& extremum) {
                 curriculum::CurriculumConfig cfg;
                 cfg.tau_discard = tau_discard;
                 cfg.tau_pending = tau_pending;
                 cfg.tau_train = tau_train;
                 cfg.replacement_extremum = extremum == "min_d"
                                                ? curriculum::CurriculumConfig::Extremum::MinD
                                                : curriculum::CurriculumConfig::Extremum::MaxD;
                 cfg.validate();
                 return cfg;
             }),
             py::arg("tau_discard") = 1.0, py::arg("tau_pending") = 0.625,
             py::arg("tau_train") = 0.9, py::arg("replacement_extremum") = "max_d");

    py::class_<curriculum::CurriculumState>(m, "CurriculumState")
        .def_readonly("epoch", &curriculum::CurriculumState::epoch)
        .def_property_readonly("train",
                               [](const curriculum::CurriculumState& s) {
                                   return std::vector<std::string>(s.train.begin(), s.train.end());
                               })
        .def_property_readonly("discard",
                               [](const curriculum::CurriculumState& s) {
                                   return std::vector<std::string>(s.discard.begin(),
                                                                   s.discard.end());
                               })
        .def_property_readonly("pending_size", &curriculum::CurriculumState::pending_size)
        .def_property_readonly("mean_train_difficulty",
                               &curriculum::CurriculumState::mean_train_difficulty)
        .def("to_dict",
             [](const curriculum::CurriculumState& s) { return json_to_py(s.to_json()); })
        .def("save", &curriculum::CurriculumState::save, py::arg("path"))
        .def_static("load", &curriculum::CurriculumState::load, py::arg("path"));

    m.def(
        "partition",
        [](const std::vector<std::pair<std::string, int>>& id_difficulty,
           const curriculum::CurriculumConfig& cfg) {
            std::vector<corpus::QuestionRecord> records;
            for (const auto& [id, k] : id_difficulty) {
                corpus::QuestionRecord rec;
                rec.id = id;
                rec.question = id;
                rec.reference_answer = "-";
                rec.difficulty_eighths = k;
                records.push_back(std::move(rec));
            }
            return curriculum::partition(records, cfg);
        },
        py::arg("id_difficulty"), py::arg("config") = curriculum::CurriculumConfig{});
    m.def("record_rollout", &curriculum::record_rollout, py::arg("state"), py::arg("question_id"),
          py::arg("correct"), py::arg("count") = 1);
    m.def(
        "epoch_end",
        [](curriculum::CurriculumState& state) {
            auto report = curriculum::epoch_end(state);
            py::dict out;
            out["epoch"] = report.epoch;
            out["replace_ratio"] = report.replace_ratio;
            out["mean_train_difficulty"] = report.mean_train_difficulty_after;
            out["train_size"] = report.train_size_after;
            out["pending_size"] = report.pending_size_after;
            out["mastered"] = report.mastered;
            out["replaced"] = report.replaced;
            out["removed_without_replacement"] = report.removed_without_replacement;
            return out;
        },
        py::arg("state"));

    // ---- reward --------------------------------------------------------------------
    m.def(
        "aggregate_reward",
        [](int j_ans, const std::vector<std::pair<std::string, int>>& items, double essential,
           double important, double optional_detail, double pitfall, double final_answer,
           bool gate) {
            std::vector<reward::ItemJudgment> judged;
            for (size_t i = 0; i < items.size(); ++i) {
                auto category = corpus::parse_rubric_category(items[i].first);
                if (!category)
                    throw std::invalid_argument("unknown rubric category: " + items[i].first);
                reward::ItemJudgment ij;
                ij.index = i;
                ij.category = *category;
                ij.satisfied = items[i].second;
                judged.push_back(ij);
            }
            auto breakdown = reward::aggregate(
                j_ans, std::move(judged),
                {essential, important, optional_detail, pitfall, final_answer}, gate);
            py::dict out;
            out["reward"] = breakdown.reward;
            out["gated"] = breakdown.gated;
            return out;
        },
        py::arg("j_ans"), py::arg("items"), py::arg("essential") = 1.0, py::arg("important") = 0.7,
        py::arg("optional") = 0.3, py::arg("pitfall") = 0.9, py::arg("final_answer") = 4.0,
        py::arg("gate") = false,
        "Weighted rubric aggregation; items are (category, satisfied) pairs");

    m.def(
        "reward_stats",
        [](const std::vector<double>& rewards) {
            auto stats = reward::reward_stats(rewards);
            py::dict out;
            out["count"] = stats.count;
            out["mean"] = stats.mean;
            out["std"] = stats.stddev;
            out["histogram"] = std::vector<long>(stats.histogram.begin(), stats.histogram.end());
            return out;
        },
        py::arg("rewards"), "Population mean/std and a 20-bin histogram over [0,1]");

    m.def(
        "score_rollout",
        [](const py::dict& record, const std::string& rollout_text, py::object judge,
           double essential, double important, double optional_detail, double pitfall,
           double final_answer, bool gate) {
            corpus::QuestionRecord rec = record_from_dict(record);
            reward::RewardConfig cfg = reward_config_from_kwargs(essential, important,
                                                                 optional_detail, pitfall,
                                                                 final_answer, gate);
            std::unique_ptr<CallableChatClient> client;
            if (!judge.is_none()) client = std::make_unique<CallableChatClient>(judge.cast<py::function>());
            reward::RewardBreakdown breakdown;
            {
                py::gil_scoped_release release;
                reward::RewardConfig serial = cfg;
                serial.judge_concurrency = 1;  // python callables hold the GIL
                breakdown = reward::score_rollout(rec, rollout_text, client.get(), serial);
            }
            py::dict out;
            out["reward"] = breakdown.reward;
            out["final_answer_correct"] = breakdown.final_answer_correct;
            out["final_answer"] = breakdown.final_answer;
            out["gated"] = breakdown.gated;
            out["judge_failures"] = breakdown.judge_failures;
            out["no_boxed"] = breakdown.no_boxed;
            py::list items;
            for (const auto& item : breakdown.items) {
                py::dict d;
                d["index"] = item.index;
                d["category"] = std::string(corpus::to_string(item.category));
                d["verdict_yes"] = item.verdict_yes;
                d["satisfied"] = item.satisfied;
                d["weight"] = item.weight;
                d["judge_failed"] = item.judge_failed;
                items.append(d);
            }
            out["items"] = items;
            return out;
        },
        py::arg("record"), py::arg("rollout_text"), py::arg("judge") = py::none(),
        py::arg("essential") = 1.0, py::arg("important") = 0.7, py::arg("optional") = 0.3,
        py::arg("pitfall") = 0.9, py::arg("final_answer") = 4.0, py::arg("gate") = false,
        "Score one rollout against a record dict (question/reference_answer/verification/rubrics)");

#ifdef SCIFORGE_VERSION
    m.attr("__version__") = SCIFORGE_VERSION;
#else
    m.attr("__version__") = "dev";
#endif
}

#include "sciforge/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace sciforge::curriculum {

void CurriculumConfig::validate() const {
    if (!(0.0 <= tau_pending && tau_pending < tau_discard && tau_discard <= 1.0))
        throw corpus::CorpusError("curriculum thresholds require 0 <= tau_pending < tau_discard <= 1");
    if (!(0.0 < tau_train && tau_train <= 1.0))
        throw corpus::CorpusError("tau_train must be in (0,1]");
}

size_t CurriculumState::pending_size() const {
    size_t n = 0;
    for (const auto& [k, ids] : pending_by_k) n += ids.size();
    return n;
}

double CurriculumState::mean_train_difficulty() const {
    if (train.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& id : train) sum += difficulty_eighths.at(id) / 8.0;
    return sum / static_cast<double>(train.size());
}

CurriculumState partition(const std::vector<QuestionRecord>& records,
                          const CurriculumConfig& config) {
    config.validate();
    std::vector<std::string> missing;
    for (const auto& rec : records)
        if (!rec.difficulty_eighths) missing.push_back(rec.id);
    if (!missing.empty()) {
        std::string joined;
        for (const auto& id : missing) joined += (joined.empty() ? "" : ", ") + id;
        throw corpus::CorpusError("records missing difficulty: " + joined);
    }

    CurriculumState state;
    state.config = config;
    for (const auto& rec : records) {
        int k = *rec.difficulty_eighths;
        double d = k / 8.0;
        state.difficulty_eighths[rec.id] = k;
        if (d >= config.tau_discard)
            state.discard.insert(rec.id);
        else if (d <= config.tau_pending)
            state.pending_by_k[k].push_back(rec.id);  // FIFO in input order
        else
            state.train.insert(rec.id);
    }
    return state;
}

void record_rollout(CurriculumState& state, const std::string& question_id, bool correct,
                    long count) {
    if (count <= 0) throw corpus::CorpusError("rollout count must be positive");
    if (!state.train.count(question_id))
        throw corpus::CorpusError("rollout for question not in train set: " + question_id +
                                  " (trainer and scheduler are out of sync)");
    auto& tally = state.accumulators[question_id];
    tally.total += count;
    if (correct) tally.correct += count;
}

namespace {

/// Pops the id of the easiest-remaining pending item per the configured
/// extremum; FIFO among equal difficulties.
std::optional<std::pair<std::string, int>> pop_pending_extremum(CurriculumState& state) {
    if (state.pending_by_k.empty()) return std::nullopt;
    auto it = state.config.replacement_extremum == CurriculumConfig::Extremum::MaxD
                  ? std::prev(state.pending_by_k.end())
                  : state.pending_by_k.begin();
    int k = it->first;
    std::string id = it->second.front();
    it->second.pop_front();
    if (it->second.empty()) state.pending_by_k.erase(it);
    return std::make_pair(std::move(id), k);
}

}  // namespace

EpochReport epoch_end(CurriculumState& state) {
    EpochReport report;
    report.epoch = state.epoch;
    report.train_size_before = state.train.size();

    // Mastered: acc strictly above tau_train; zero-rollout questions have
    // no accumulator entry and are never mastered.
    std::vector<std::pair<std::string, double>> mastered;  // ascending id (map order)
    for (const auto& id : state.train) {
        auto it = state.accumulators.find(id);
        if (it == state.accumulators.end() || it->second.total == 0) continue;
        double acc = static_cast<double>(it->second.correct) / it->second.total;
        if (acc > state.config.tau_train) mastered.emplace_back(id, acc);
    }
    report.mastered = mastered.size();

    for (const auto& [id, acc] : mastered) {
        state.train.erase(id);
        state.discard.insert(id);
        Replacement entry;
        entry.epoch = state.epoch;
        entry.removed_id = id;
        entry.removed_acc = acc;
        if (auto pulled = pop_pending_extremum(state)) {
            state.train.insert(pulled->first);
            entry.inserted_id = pulled->first;
            entry.inserted_difficulty_eighths = pulled->second;
            ++report.replaced;
        } else {
            ++report.removed_without_replacement;
        }
        report.replacements.push_back(entry);
        state.replacement_log.push_back(std::move(entry));
    }

    report.train_size_after = state.train.size();
    report.pending_size_after = state.pending_size();
    report.replace_ratio = report.train_size_before
                               ? static_cast<double>(report.mastered) / report.train_size_before
                               : 0.0;
    report.mean_train_difficulty_after = state.mean_train_difficulty();

    state.accumulators.clear();
    ++state.epoch;
    return report;
}

// ---------------------------------------------------------------------------
// checkpoint serialization

ordered_json CurriculumState::to_json() const {
    ordered_json j = ordered_json::object();
    j["epoch"] = epoch;
    j["config"] = {{"tau_discard", config.tau_discard},
                   {"tau_pending", config.tau_pending},
                   {"tau_train", config.tau_train},
                   {"replacement_extremum",
                    config.replacement_extremum == CurriculumConfig::Extremum::MaxD ? "max_d"
                                                                                    : "min_d"}};
    j["train"] = std::vector<std::string>(train.begin(), train.end());
    ordered_json pending = ordered_json::array();
    for (const auto& [k, ids] : pending_by_k)
        for (const auto& id : ids) pending.push_back({{"id", id}, {"difficulty", k}});
    j["pending"] = std::move(pending);
    j["discard"] = std::vector<std::string>(discard.begin(), discard.end());
    ordered_json difficulties = ordered_json::object();
    for (const auto& [id, k] : difficulty_eighths) difficulties[id] = k;
    j["difficulty"] = std::move(difficulties);
    ordered_json accs = ordered_json::object();
    for (const auto& [id, tally] : accumulators)
        accs[id] = {{"correct", tally.correct}, {"total", tally.total}};
    j["accumulators"] = std::move(accs);
    ordered_json log = ordered_json::array();
    for (const auto& r : replacement_log) {
        ordered_json e = {{"epoch", r.epoch},
                          {"removed_id", r.removed_id},
                          {"removed_acc", r.removed_acc}};
        e["inserted_id"] = r.inserted_id ? ordered_json(*r.inserted_id) : ordered_json(nullptr);
        e["inserted_difficulty"] = r.inserted_difficulty_eighths
                                       ? ordered_json(*r.inserted_difficulty_eighths)
                                       : ordered_json(nullptr);
        log.push_back(std::move(e));
    }
    j["replacement_log"] = std::move(log);
    return j;
}

CurriculumState CurriculumState::from_json(const ordered_json& j) {
    CurriculumState state;
    state.epoch = j.at("epoch").get<int>();
    const auto& cfg = j.at("config");
    state.config.tau_discard = cfg.at("tau_discard").get<double>();
    state.config.tau_pending = cfg.at("tau_pending").get<double>();
    state.config.tau_train = cfg.at("tau_train").get<double>();
    state.config.replacement_extremum = cfg.at("replacement_extremum").get<std::string>() == "min_d"
                                            ? CurriculumConfig::Extremum::MinD
                                            : CurriculumConfig::Extremum::MaxD;
    for (const auto& id : j.at("train")) state.train.insert(id.get<std::string>());
    for (const auto& e : j.at("pending"))
        state.pending_by_k[e.at("difficulty").get<int>()].push_back(e.at("id").get<std::string>());
    for (const auto& id : j.at("discard")) state.discard.insert(id.get<std::string>());
    for (const auto& [id, k] : j.at("difficulty").items())
        state.difficulty_eighths[id] = k.get<int>();
    for (const auto& [id, tally] : j.at("accumulators").items())
        state.accumulators[id] = {tally.at("correct").get<long>(), tally.at("total").get<long>()};
    for (const auto& e : j.at("replacement_log")) {
        Replacement r;
        r.epoch = e.at("epoch").get<int>();
        r.removed_id = e.at("removed_id").get<std::string>();
        r.removed_acc = e.at("removed_acc").get<double>();
        if (!e.at("inserted_id").is_null()) r.inserted_id = e.at("inserted_id").get<std::string>();
        if (!e.at("inserted_difficulty").is_null())
            r.inserted_difficulty_eighths = e.at("inserted_difficulty").get<int>();
        state.replacement_log.push_back(std::move(r));
    }
    return state;
}

void CurriculumState::save(const std::string& path) const {
    corpus::JsonlWriter writer(path);
    writer.write(to_json());
    writer.commit();
}

CurriculumState CurriculumState::load(const std::string& path) {
    corpus::JsonlReader reader(path);
    auto j = reader.next_json();
    if (!j) throw corpus::CorpusError("empty curriculum checkpoint: " + path);
    return from_json(*j);
}

// ---------------------------------------------------------------------------
// simulation

double LogisticPolicy::success_prob(int difficulty_eighths, int epoch) const {
    double x = bias_ + epoch_gain_ * epoch + ease_gain_ * (difficulty_eighths / 8.0);
    return 1.0 / (1.0 + std::exp(-x));
}

std::vector<EpochReport> simulate(const SuccessPolicy& policy,
                                  const std::vector<QuestionRecord>& records,
                                  const CurriculumConfig& config, int epochs,
                                  int rollouts_per_question, std::uint64_t seed) {
    CurriculumState state = partition(records, config);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<EpochReport> trajectory;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        // iterate a snapshot: train mutates only at epoch_end
        for (const auto& id : state.train) {
            double p = policy.success_prob(state.difficulty_eighths.at(id), epoch);
            for (int r = 0; r < rollouts_per_question; ++r)
                record_rollout(state, id, unit(rng) < p, 1);
        }
        trajectory.push_back(epoch_end(state));
    }
    return trajectory;
}

}  // namespace sciforge::curriculum

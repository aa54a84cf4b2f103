#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sciforge/corpus.hpp"

namespace sciforge::curriculum {

using corpus::QuestionRecord;
using ordered_json = nlohmann::ordered_json;

struct CurriculumConfig {
    double tau_discard = 1.0;
    double tau_pending = 0.625;
    double tau_train = 0.9;
    /// Which pending items count as "easiest remaining": larger difficulty
    /// values mean easier instances, so MaxD drains the easiest first;
    /// MinD implements the replacement formula as printed instead.
    enum class Extremum { MaxD, MinD };
    Extremum replacement_extremum = Extremum::MaxD;

    void validate() const;
};

struct Replacement {
    int epoch = 0;
    std::string removed_id;
    std::optional<std::string> inserted_id;  // empty when pending was exhausted
    double removed_acc = 0.0;
    std::optional<int> inserted_difficulty_eighths;
};

struct RolloutTally {
    long correct = 0;
    long total = 0;
};

/// Train/pending/discard partition plus the per-epoch accuracy
/// accumulators and the replacement audit log. Single-writer.
struct CurriculumState {
    int epoch = 0;
    CurriculumConfig config;
    std::set<std::string> train;
    std::map<int, std::deque<std::string>> pending_by_k;  // FIFO per difficulty numerator
    std::set<std::string> discard;
    std::map<std::string, int> difficulty_eighths;  // every id ever partitioned
    std::map<std::string, RolloutTally> accumulators;
    std::vector<Replacement> replacement_log;

    size_t pending_size() const;
    double mean_train_difficulty() const;  // mean d over the train set

    ordered_json to_json() const;
    static CurriculumState from_json(const ordered_json& j);
    void save(const std::string& path) const;
    static CurriculumState load(const std::string& path);
};

/// Epoch-0 partition: discard = {d >= tau_discard}, pending =
/// {d <= tau_pending}, train = remainder. Every record must carry a
/// difficulty annotation; offenders are listed in the error.
CurriculumState partition(const std::vector<QuestionRecord>& records,
                          const CurriculumConfig& config);

/// Adds `count` rollouts with the given outcome to the question's
/// accumulator. The id must be in the train set.
void record_rollout(CurriculumState& state, const std::string& question_id, bool correct,
                    long count = 1);

struct EpochReport {
    int epoch = 0;  // the epoch that just ended
    size_t train_size_before = 0;
    size_t train_size_after = 0;
    size_t pending_size_after = 0;
    size_t mastered = 0;
    size_t replaced = 0;
    size_t removed_without_replacement = 0;
    double replace_ratio = 0.0;  // mastered / train_size_before
    double mean_train_difficulty_after = 0.0;
    std::vector<Replacement> replacements;
};

/// Moves every mastered question (acc strictly above tau_train) to the
/// discard set and back-fills from the pending extremum, FIFO on ties.
/// Mastered items are processed in ascending id order. Resets the
/// accumulators and advances the epoch.
EpochReport epoch_end(CurriculumState& state);

/// Scripted rollout-success policy for closed-loop simulation; must be
/// non-decreasing in the epoch for a fixed difficulty.
class SuccessPolicy {
public:
    virtual ~SuccessPolicy() = default;
    virtual double success_prob(int difficulty_eighths, int epoch) const = 0;
};

class ConstantPolicy : public SuccessPolicy {
public:
    explicit ConstantPolicy(double p) : p_(p) {}
    double success_prob(int, int) const override { return p_; }

private:
    double p_;
};

/// p = sigmoid(bias + epoch_gain * epoch + ease_gain * d); improving over
/// epochs when epoch_gain >= 0.
class LogisticPolicy : public SuccessPolicy {
public:
    LogisticPolicy(double bias, double epoch_gain, double ease_gain)
        : bias_(bias), epoch_gain_(epoch_gain), ease_gain_(ease_gain) {}
    double success_prob(int difficulty_eighths, int epoch) const override;

private:
    double bias_, epoch_gain_, ease_gain_;
};

/// Runs the full loop: per-epoch Bernoulli rollouts for every train
/// question, accumulator updates, and epoch-end replacement. Fixed seed
/// gives an identical trajectory and replacement log.
std::vector<EpochReport> simulate(const SuccessPolicy& policy,
                                  const std::vector<QuestionRecord>& records,
                                  const CurriculumConfig& config, int epochs,
                                  int rollouts_per_question, std::uint64_t seed);

}  // namespace sciforge::curriculum

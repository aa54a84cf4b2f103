#include "sciforge/coverage.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <queue>
#include <stdexcept>
#include <unordered_set>

namespace sciforge::coverage {

namespace fs = std::filesystem;

std::vector<std::uint64_t> extract_grams(const SftExample& ex, const text::TokenizerConfig& cfg,
                                         int gram_width) {
    std::string joined = ex.prompt + "\n" + ex.response;
    std::vector<std::string> tokens = text::tokenize(joined, cfg);
    return text::hashed_ngrams(tokens, gram_width);
}

// ---------------------------------------------------------------------------
// GramPool

GramPool::~GramPool() {
    spill_file_.reset();
    if (!spill_path_.empty()) {
        std::error_code ec;
        fs::remove(spill_path_, ec);
    }
}

GramPool::GramPool(GramPool&&) noexcept = default;
GramPool& GramPool::operator=(GramPool&&) noexcept = default;

void GramPool::set_spill(std::string dir, std::uint64_t budget_bytes) {
    spill_dir_ = std::move(dir);
    budget_bytes_ = budget_bytes;
}

void GramPool::add(std::string id, std::vector<std::uint64_t> grams) {
    ids_.push_back(std::move(id));
    offsets_.emplace_back(spilled_count_ + buffer_.size(),
                          static_cast<std::uint32_t>(grams.size()));
    buffer_.insert(buffer_.end(), grams.begin(), grams.end());
    maybe_spill();
}

void GramPool::maybe_spill() {
    if (budget_bytes_ == 0 || buffer_.size() * sizeof(std::uint64_t) < budget_bytes_) return;
    if (spill_path_.empty()) {
        fs::path dir = spill_dir_.empty() ? fs::temp_directory_path() : fs::path(spill_dir_);
        fs::create_directories(dir);
        spill_path_ = (dir / ("sciforge-grams-" + std::to_string(::getpid()) + "-" +
                              std::to_string(reinterpret_cast<std::uintptr_t>(this)) + ".bin"))
                          .string();
        std::FILE* f = std::fopen(spill_path_.c_str(), "wb+");
        if (!f) throw std::runtime_error("cannot open gram spill file: " + spill_path_);
        spill_file_ = {f, &std::fclose};
    }
    std::fseek(spill_file_.get(), 0, SEEK_END);
    size_t written = std::fwrite(buffer_.data(), sizeof(std::uint64_t), buffer_.size(),
                                 spill_file_.get());
    if (written != buffer_.size()) throw std::runtime_error("gram spill write failed");
    spilled_count_ += buffer_.size();
    buffer_.clear();
    buffer_.shrink_to_fit();
}

size_t GramPool::gram_count(size_t i) const { return offsets_[i].second; }

void GramPool::fetch(size_t i, std::vector<std::uint64_t>& out) const {
    auto [first, count] = offsets_[i];
    out.resize(count);
    if (count == 0) return;
    if (first >= spilled_count_) {
        auto begin = buffer_.begin() + static_cast<std::ptrdiff_t>(first - spilled_count_);
        std::copy(begin, begin + count, out.begin());
        return;
    }
    // Spilled slices never straddle the file/memory boundary: whole
    // example arrays are flushed together.
    std::fseek(spill_file_.get(),
               static_cast<long>(first * sizeof(std::uint64_t)), SEEK_SET);
    size_t got = std::fread(out.data(), sizeof(std::uint64_t), count, spill_file_.get());
    if (got != count) throw std::runtime_error("gram spill read failed");
}

// ---------------------------------------------------------------------------
// selection

namespace {

size_t count_new(const std::vector<std::uint64_t>& grams,
                 const std::unordered_set<std::uint64_t>& covered) {
    size_t gain = 0;
    for (std::uint64_t g : grams)
        if (!covered.count(g)) ++gain;
    return gain;
}

void commit_pick(const GramPool& pool, size_t index, size_t gain,
                 std::unordered_set<std::uint64_t>& covered, std::vector<std::uint64_t>& scratch,
                 SelectionState& state) {
    pool.fetch(index, scratch);
    for (std::uint64_t g : scratch) covered.insert(g);
    state.picked_indices.push_back(index);
    state.picked_ids.push_back(pool.id(index));
    state.gains.push_back(gain);
}

}  // namespace

SelectionState select_greedy(const GramPool& pool, size_t n) {
    if (n > pool.size())
        throw std::invalid_argument("selection size exceeds pool size (" + std::to_string(n) +
                                    " > " + std::to_string(pool.size()) + ")");
    SelectionState state;
    std::unordered_set<std::uint64_t> covered;
    std::vector<bool> taken(pool.size(), false);
    std::vector<std::uint64_t> scratch;
    for (size_t step = 0; step < n; ++step) {
        size_t best_index = pool.size();
        size_t best_gain = 0;
        bool have_best = false;
        for (size_t i = 0; i < pool.size(); ++i) {
            if (taken[i]) continue;
            pool.fetch(i, scratch);
            size_t gain = count_new(scratch, covered);
            ++state.reevaluations;
            if (!have_best || gain > best_gain) {
                best_index = i;
                best_gain = gain;
                have_best = true;
            }
        }
        taken[best_index] = true;
        commit_pick(pool, best_index, best_gain, covered, scratch, state);
    }
    state.unique_grams = covered.size();
    return state;
}

SelectionState select_lazy_greedy(const GramPool& pool, size_t n) {
    if (n > pool.size())
        throw std::invalid_argument("selection size exceeds pool size (" + std::to_string(n) +
                                    " > " + std::to_string(pool.size()) + ")");
    SelectionState state;
    std::unordered_set<std::uint64_t> covered;
    std::vector<std::uint64_t> scratch;

    struct Entry {
        size_t gain;
        size_t index;
        size_t round;  // round in which `gain` was computed
    };
    // Highest gain first; equal gains prefer the lowest index, matching
    // the naive tie rule.
    auto worse = [](const Entry& a, const Entry& b) {
        if (a.gain != b.gain) return a.gain < b.gain;
        return a.index > b.index;
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);
    for (size_t i = 0; i < pool.size(); ++i) {
        heap.push({pool.gram_count(i), i, 0});
        ++state.reevaluations;  // initial bounds count as evaluations
    }

    for (size_t round = 0; round < n; ++round) {
        while (true) {
            Entry top = heap.top();
            heap.pop();
            if (top.round == round) {
                commit_pick(pool, top.index, top.gain, covered, scratch, state);
                break;
            }
            pool.fetch(top.index, scratch);
            size_t gain = count_new(scratch, covered);
            ++state.reevaluations;
            // Fresh value dominates every remaining stale bound -> pick it
            // now; a tie with the next bound must go back through the heap
            // so index order decides.
            if (heap.empty() || gain > heap.top().gain ||
                (gain == heap.top().gain && top.index < heap.top().index)) {
                commit_pick(pool, top.index, gain, covered, scratch, state);
                break;
            }
            heap.push({gain, top.index, round});
        }
    }
    state.unique_grams = covered.size();
    return state;
}

CoverageReport coverage_report(const SelectionState& state) {
    CoverageReport report;
    report.selected = state.picked_indices.size();
    report.unique_grams = state.unique_grams;
    report.gain_curve = state.gains;
    report.reevaluations = state.reevaluations;
    return report;
}

}  // namespace sciforge::coverage

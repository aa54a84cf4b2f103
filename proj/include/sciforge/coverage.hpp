#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sciforge/corpus.hpp"
#include "sciforge/text.hpp"

namespace sciforge::coverage {

using corpus::SftExample;

/// 4-gram keys of one supervision example: prompt and response are
/// concatenated, word-tokenized, and every 4-token window is hashed.
/// Sorted and deduplicated. Fewer than four tokens gives an empty set.
std::vector<std::uint64_t> extract_grams(const SftExample& ex,
                                         const text::TokenizerConfig& cfg = {},
                                         int gram_width = 4);

/// Pool of per-example gram sets. Gram arrays live in one flat in-memory
/// buffer, or spill to a temp file when a memory budget is configured and
/// exceeded; selection reads per-example slices back on demand.
class GramPool {
public:
    GramPool() = default;
    ~GramPool();
    GramPool(GramPool&&) noexcept;
    GramPool& operator=(GramPool&&) noexcept;
    GramPool(const GramPool&) = delete;
    GramPool& operator=(const GramPool&) = delete;

    /// `grams` must be sorted and unique (extract_grams output).
    void add(std::string id, std::vector<std::uint64_t> grams);

    /// Moves gram storage to a temp file under `dir` once in-memory bytes
    /// exceed `budget_bytes` (0 keeps everything in memory).
    void set_spill(std::string dir, std::uint64_t budget_bytes);

    size_t size() const { return offsets_.size(); }
    const std::string& id(size_t i) const { return ids_[i]; }
    size_t gram_count(size_t i) const;

    /// Copies example i's grams into `out` (reused scratch buffer).
    void fetch(size_t i, std::vector<std::uint64_t>& out) const;

private:
    void maybe_spill();

    std::vector<std::string> ids_;
    std::vector<std::pair<std::uint64_t, std::uint32_t>> offsets_;  // (first index, count)
    std::vector<std::uint64_t> buffer_;
    std::uint64_t spilled_count_ = 0;
    std::string spill_dir_;
    std::uint64_t budget_bytes_ = 0;
    std::string spill_path_;
    mutable std::unique_ptr<std::FILE, int (*)(std::FILE*)> spill_file_{nullptr, nullptr};
};

struct SelectionState {
    std::vector<size_t> picked_indices;   // pool indices in pick order
    std::vector<std::string> picked_ids;  // matching ids
    std::vector<size_t> gains;            // per-step marginal gains
    size_t unique_grams = 0;              // |G*|
    size_t reevaluations = 0;             // gain computations performed
};

/// Naive greedy: every step scans all remaining candidates for the one
/// with the most unseen grams; ties break on the lowest pool index.
SelectionState select_greedy(const GramPool& pool, size_t n);

/// Lazy greedy with stale upper bounds. Marginal gains only shrink as
/// coverage grows, so a heap of stale gains is a valid priority; output
/// is identical to select_greedy on every input, including ties.
SelectionState select_lazy_greedy(const GramPool& pool, size_t n);

struct CoverageReport {
    size_t selected = 0;
    size_t unique_grams = 0;
    std::vector<size_t> gain_curve;
    size_t reevaluations = 0;
};

CoverageReport coverage_report(const SelectionState& state);

}  // namespace sciforge::coverage

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pgmpp/index.hpp"
#include "pgmpp/pla.hpp"

namespace pgmpp::oracle {

/// Textbook lower bound: smallest r with keys[r] >= query, or keys.size().
std::size_t exact_rank(std::span<const Key> keys, Key query) noexcept;

/// Largest point count that optimal_pla_count accepts.
inline constexpr std::size_t kMaxDpPoints = 4096;

/// True when one line passes within epsilon of every point (keys strictly
/// increasing). Decided by intersecting the pairwise feasible slope intervals.
bool span_feasible(std::span<const Point> points, std::uint64_t epsilon);

/// Minimum segment count of an epsilon-PLA, by dynamic programming over
/// split points. Throws std::invalid_argument for empty input, epsilon == 0,
/// or more than kMaxDpPoints points.
std::size_t optimal_pla_count(std::span<const Point> points, std::uint64_t epsilon);

struct LevelCoverage {
    std::size_t level = 0;
    double mean = 0.0;        ///< Mean entries of the level below per segment.
    std::size_t min = 0;      ///< Smallest coverage among the segments.
    std::size_t segments = 0;
    std::size_t total = 0;    ///< Sum of coverages (entries of the level below).
};

struct CoverageReport {
    std::vector<LevelCoverage> per_level;
};

/// Exact coverage of every segment, found by walking segment starts against
/// the level below (the key array for level 0).
CoverageReport measure_coverage(const PgmIndex& index);

struct TuneMeasurement {
    std::uint64_t eps_internal = 0;
    double mean_ns = 0.0;
};

struct ExhaustiveTuneResult {
    std::uint64_t best_eps_internal = 0;
    std::vector<TuneMeasurement> measurements;
};

/// Builds one index per candidate eps_internal at fixed eps_leaf and returns
/// the candidate with the lowest measured mean lookup time (median over
/// `reps` passes, each preceded by three warm-up passes). Candidates are timed
/// round-robin within each repetition.
ExhaustiveTuneResult exhaustive_tune(std::shared_ptr<const std::vector<Key>> keys, std::uint64_t eps_leaf,
                                     std::span<const std::uint64_t> candidates, std::span<const Key> workload,
                                     std::size_t reps = 9, SearchThreshold threshold = {});

} // namespace pgmpp::oracle

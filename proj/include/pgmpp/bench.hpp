#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgmpp/cost.hpp"
#include "pgmpp/index.hpp"

namespace pgmpp {

/// Everything needed to reproduce one run.
struct RunConfig {
    std::string dataset;
    std::uint64_t eps_internal = 0;
    std::uint64_t eps_leaf = 0;
    std::size_t delta = 0;
    std::uint64_t seed = 0;
    std::string workload;
    std::size_t reps = 0;
    std::optional<CostConstants> constants;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct RunMetrics {
    double mean_ns = 0.0;         ///< Median over repetitions of the per-pass mean.
    double median_ns = 0.0;       ///< Median of per-query times (batches of 64).
    double p99_ns = 0.0;          ///< 99th percentile of per-query times (batches of 64).
    double build_ms = 0.0;
    std::size_t height = 0;
    std::size_t leaf_segments = 0;
    std::size_t internal_segments = 0;
    std::size_t size_bytes = 0;
    double internal_ns = 0.0;     ///< Descent time per query.
    double last_mile_ns = 0.0;    ///< Total minus descent, per query.
    double branchy_mean_ns = 0.0; ///< Same structure with branchy search; 0 if not measured.

    friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

struct RunReport {
    RunConfig config;
    RunMetrics metrics;

    friend bool operator==(const RunReport&, const RunReport&) = default;
};

struct LookupTiming {
    double mean_ns = 0.0;
    double median_ns = 0.0;
    double p99_ns = 0.0;
};

/// Times lookups over the workload: each repetition is three warm-up passes
/// and one timed pass. Throws std::invalid_argument on an empty workload.
LookupTiming time_lookups(const PgmIndex& index, std::span<const Key> workload, std::size_t reps,
                          bool branchy = false);

struct PhaseSplit {
    double internal_ns = 0.0;
    double last_mile_ns = 0.0;
};

/// Internal vs last-mile time per query on every 10th workload query.
PhaseSplit measure_phase_split(const PgmIndex& index, std::span<const Key> workload, std::size_t reps);

struct RunOptions {
    std::string dataset;
    std::string workload;
    std::uint64_t seed = 0;
    std::size_t reps = 9;
    SearchThreshold threshold{};
    std::optional<CostConstants> constants;
    bool compare_branchy = false;
    std::size_t seg_bytes = kSegmentBytes;
};

/// Builds one index and measures it.
RunReport run_cell(std::shared_ptr<const std::vector<Key>> keys, std::uint64_t eps_internal,
                   std::uint64_t eps_leaf, std::span<const Key> workload, const RunOptions& options);

/// One report per (eps_internal, eps_leaf) cell, eps_leaf-major order. All
/// cells are built first and timed round-robin within each repetition.
std::vector<RunReport> sweep(std::shared_ptr<const std::vector<Key>> keys, std::span<const std::uint64_t> eps_internal,
                             std::span<const std::uint64_t> eps_leaf, std::span<const Key> workload,
                             const RunOptions& options);

/// Rough peak memory of building and sweeping over n keys.
std::size_t estimated_peak_bytes(std::size_t n);

/// MemAvailable from /proc/meminfo, or nullopt when unreadable.
std::optional<std::size_t> available_memory_bytes();

/// Throws std::runtime_error with the size estimate when n keys would not
/// fit in available memory.
void check_memory(std::size_t n);

inline constexpr const char* kReportSchema = "pgmpp.run_report/1";

/// Header line plus one row per report, fixed column order.
void write_csv(std::ostream& out, std::span<const RunReport> reports);
void write_json(std::ostream& out, std::span<const RunReport> reports);
/// Throws FormatError on schema mismatch or malformed JSON.
std::vector<RunReport> read_json(std::istream& in);

} // namespace pgmpp

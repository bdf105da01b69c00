#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "pgmpp/index.hpp"
#include "pgmpp/stats.hpp"

namespace pgmpp {

/// Host latency constants, all in nanoseconds.
struct CostConstants {
    double c_miss = 0.0;            ///< One cache-missing memory access.
    double c_hit = 0.0;             ///< One cache-resident binary-search step.
    double c_segment = 0.0;         ///< One segment evaluation.
    double c_linear_fixed = 0.0;    ///< Fixed overhead of a linear scan.
    double c_linear_per_elem = 0.0; ///< Per-element cost of a linear scan.
    std::size_t delta = 8;          ///< Hybrid search threshold.

    [[nodiscard]] double c_linear(std::size_t length) const noexcept {
        return c_linear_fixed + c_linear_per_elem * static_cast<double>(length);
    }

    friend bool operator==(const CostConstants&, const CostConstants&) = default;
};

/// Throws std::invalid_argument unless c_miss > c_hit > 0, c_segment > 0,
/// the linear-scan terms are non-negative and delta >= 1.
void validate(const CostConstants& c);

/// key=value text, one constant per line.
std::string format_constants(const CostConstants& c);
/// Throws FormatError on unknown keys, bad numbers, or missing keys.
CostConstants parse_constants(const std::string& text);
void save_constants(const std::filesystem::path& path, const CostConstants& c);
CostConstants load_constants(const std::filesystem::path& path);

/// Environment variable naming the cached calibration file.
inline constexpr const char* kCalibrationEnv = "PGMPP_CALIBRATION";

struct CalibrationOptions {
    std::size_t reps = 9;         ///< Repetitions per probe; the median is kept.
    std::size_t chase_bytes = 0;  ///< Pointer-chase array size; 0 picks 4x the LLC.
    std::size_t chase_steps = 1u << 21;
};

/// Last-level cache size from sysfs, or 32 MiB when unknown.
std::size_t last_level_cache_bytes();

/// Measures all constants on this host. Throws CalibrationFailure when the
/// clock is too coarse for the probes or the results are inconsistent.
CostConstants calibrate_constants(const CalibrationOptions& options = {});

/// Estimated leaf segments times seg_bytes.
double space_cost(const LeafEstimator& estimator, std::uint64_t eps_leaf, std::size_t seg_bytes = kSegmentBytes);

/// Cost of searching a window of 2 eps + 1 entries on a cached level.
double internal_search_cost(const CostConstants& c, std::uint64_t eps);

struct TimeCost {
    double last_mile = 0.0;
    double internal = 0.0;
    std::size_t height = 1;
    bool height_fallback = false; ///< Height came from the coverage floor.

    [[nodiscard]] double total() const noexcept { return last_mile + internal; }
};

/// last-mile = ceil(log2(2 eps_l + 1)) c_miss;
/// internal = (H - 1) (C_S(eps_i) + c_segment).
/// When the height estimator does not apply, H is the worst case implied by
/// every segment covering at least 2 eps_i + 1 entries.
TimeCost time_cost_breakdown(const CostConstants& c, const LeafEstimator& estimator, std::uint64_t eps_internal,
                             std::uint64_t eps_leaf, double c_h = 1.0);
double time_cost(const CostConstants& c, const LeafEstimator& estimator, std::uint64_t eps_internal,
                 std::uint64_t eps_leaf, double c_h = 1.0);

struct TuningBudget {
    std::uint64_t bytes = 0;
};

struct TuningResult {
    std::uint64_t eps_internal = 0;
    std::uint64_t eps_leaf = 0;
    double predicted_cost_ns = 0.0;
    double predicted_bytes = 0.0;
};

inline constexpr std::array<std::uint64_t, 9> kDefaultCandidates = {4, 8, 16, 32, 64, 128, 256, 512, 1024};
inline constexpr std::uint64_t kMinLeafEpsilon = 4;
inline constexpr std::uint64_t kMaxLeafEpsilon = 4096;

/// eps_l = ceil(sqrt(scale * seg_bytes / B * hardness_mass)) clamped to
/// [4, 4096]. Throws BudgetTooSmall when even 4096 exceeds the budget.
std::uint64_t tune_leaf(const LeafEstimator& estimator, TuningBudget budget, std::size_t seg_bytes = kSegmentBytes);

/// argmin of time_cost over the candidates; ties go to the smaller value.
std::uint64_t tune_internal(const CostConstants& c, const LeafEstimator& estimator, std::uint64_t eps_leaf,
                            std::span<const std::uint64_t> candidates = kDefaultCandidates, double c_h = 1.0);

TuningResult tune_parameters(const LeafEstimator& estimator, TuningBudget budget, const CostConstants& c,
                             std::span<const std::uint64_t> candidates = kDefaultCandidates,
                             std::size_t seg_bytes = kSegmentBytes, double c_h = 1.0);

} // namespace pgmpp

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgmpp/pla.hpp"

namespace pgmpp {

/// Moments of the gaps g_i = k_i - k_{i-1} (population variance).
struct GapStats {
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;
};

/// A contiguous run of gaps starting at gap index `offset`.
struct GapPartition {
    std::size_t offset = 0;
    GapStats stats;
};

enum class EstimatorKind { Simple, Clip, Adap };

/// Smallest calibration sample, in keys.
inline constexpr std::size_t kMinCalibrationSample = std::size_t{1} << 16;
/// Number of contiguous blocks in a calibration sample.
inline constexpr std::size_t kCalibrationBlocks = 5;

const char* to_string(EstimatorKind kind) noexcept;
/// Parses "simple", "clip" or "adap"; throws std::invalid_argument otherwise.
EstimatorKind parse_estimator_kind(const std::string& name);

/// Throws std::invalid_argument for fewer than 2 keys.
GapStats gap_statistics(std::span<const Key> keys);

/// Moments of the gaps that lie within the nearest-rank 1% and 99% quantiles.
GapStats clipped_gap_statistics(std::span<const Key> keys);

/// sigma^2 / mu^2.
double hardness_ratio(const GapStats& stats) noexcept;
double hardness_ratio(std::span<const Key> keys, bool clip);

/// mu^2 eps^2 / sigma^2, or +infinity when the variance is zero.
double expected_coverage(const GapStats& stats, std::uint64_t epsilon) noexcept;

/// Splits the gap sequence into homogeneous runs by binary segmentation on
/// log-gaps. Partitions are contiguous, disjoint and cover all N - 1 gaps.
std::vector<GapPartition> partition_gaps(std::span<const Key> keys, std::size_t max_partitions = 64);

/// Leaf-segment count estimator scale * sum_P N_P h_P / eps^2 where h_P is
/// the hardness ratio of partition P. SIMPLE and CLIP use one partition with
/// global resp. clipped moments.
class LeafEstimator {
public:
    LeafEstimator(EstimatorKind kind, std::span<const Key> keys, std::size_t max_partitions = 64);

    /// Estimator over precomputed partitions; every partition's moments are
    /// used as given.
    LeafEstimator(EstimatorKind kind, std::vector<GapPartition> partitions);

    [[nodiscard]] EstimatorKind kind() const noexcept { return kind_; }
    [[nodiscard]] const std::vector<GapPartition>& partitions() const noexcept { return partitions_; }

    /// sum_P N_P sigma_P^2 / mu_P^2.
    [[nodiscard]] double hardness_mass() const noexcept { return mass_; }
    /// hardness_mass() / sum_P N_P.
    [[nodiscard]] double effective_hardness() const noexcept;

    /// Fits the scale on a sample of contiguous key blocks covering
    /// `sample_fraction` of the keys (at least kMinCalibrationSample keys):
    /// recomputes the same-kind moments on the sample, fits one PLA per block
    /// and sets scale = observed / predicted over complete segments. The
    /// reference bound is halved from `eps_ref` until at least
    /// `min_segments` complete segments are observed.
    void calibrate(std::span<const Key> keys, std::uint64_t eps_ref = 64, double sample_fraction = 0.01,
                   std::size_t min_segments = 64);

    /// Throws std::invalid_argument unless scale > 0 and finite.
    void set_scale(double scale);
    [[nodiscard]] bool calibrated() const noexcept { return scale_.has_value(); }
    /// Throws InvalidState when uncalibrated.
    [[nodiscard]] double scale() const;
    /// Reference bound actually used by the last calibrate() call.
    [[nodiscard]] std::uint64_t calibration_epsilon() const noexcept { return calibration_epsilon_; }

    /// Estimated leaf segments at `eps_leaf`. Throws InvalidState when
    /// uncalibrated and std::invalid_argument for eps_leaf == 0.
    [[nodiscard]] double estimate(std::uint64_t eps_leaf) const;

private:
    EstimatorKind kind_;
    std::vector<GapPartition> partitions_;
    double mass_ = 0.0;
    std::optional<double> scale_;
    std::uint64_t calibration_epsilon_ = 0;
    std::size_t max_partitions_ = 64;
};

/// Convenience wrapper over LeafEstimator::estimate.
double estimate_leaf_segments(const LeafEstimator& estimator, std::uint64_t eps_leaf);

/// Height estimate ceil(c_h * log2(log_G L)) + 1 with G = eps_i^2 / h_eff,
/// floored at 2 when L > 1. Returns 1 when L <= 1 and nullopt when G <= 1.
std::optional<std::size_t> estimate_height(const LeafEstimator& estimator, std::uint64_t eps_internal,
                                           std::uint64_t eps_leaf, double c_h = 1.0);

/// Same with the leaf count and G supplied directly.
std::optional<std::size_t> estimate_height_from(double leaf_segments, double g, double c_h = 1.0);

/// Observed height of a build, used to fit c_h.
struct HeightObservation {
    double leaf_segments;
    double g;
    std::size_t height;
};

/// c_h on a fixed grid minimizing total absolute height error; ties go to
/// the value closest to 1.
double fit_height_scale(std::span<const HeightObservation> observations);

/// ceil(1 + log_B((n + 1) / 2)), evaluated in exact integer arithmetic.
/// Throws std::invalid_argument when fanout < 2 or n == 0.
std::size_t btree_height(std::uint64_t n, std::uint64_t fanout);

} // namespace pgmpp

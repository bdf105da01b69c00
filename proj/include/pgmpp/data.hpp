#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pgmpp/pla.hpp"

namespace pgmpp {

struct UniformDist {
    Key lo = 0;
    Key hi = 0;
};
struct NormalDist {
    double mu = 0.0;
    double sd = 1.0;
};
struct LogNormalDist {
    double mu = 0.0;
    double sd = 1.0;
};
using Distribution = std::variant<UniformDist, NormalDist, LogNormalDist>;

std::string describe(const Distribution& dist);

/// Sorted, duplicate-free keys plus where they came from.
struct KeySet {
    std::vector<Key> keys;
    std::string source;
    std::size_t duplicates_removed = 0;
};

/// n distinct sorted keys drawn from `dist`. Normal and log-normal draws are
/// mapped affinely onto [0, 2^63) using fixed +-6 sd truncation bounds.
/// Duplicates are dropped and replaced by fresh draws. Deterministic per seed.
/// Throws std::invalid_argument on n < 2, bad parameters, or a uniform range
/// smaller than n.
KeySet generate_synthetic(const Distribution& dist, std::size_t n, std::uint64_t seed);

/// Binary key file: u64 little-endian count, then count u64 little-endian keys.
void write_keyset(const std::filesystem::path& path, std::span<const Key> keys);

/// Reads a key file, sorts and deduplicates. Throws FormatError on a
/// truncated file or count mismatch.
KeySet read_keyset(const std::filesystem::path& path);

/// Reads a key file as stored, without sorting (used for query workloads).
std::vector<Key> read_raw_keys(const std::filesystem::path& path);

/// Default number of queries in a workload.
inline constexpr std::size_t kDefaultWorkloadSize = 5000;
/// Default Zipf exponent.
inline constexpr double kDefaultZipfAlpha = 1.3;

enum class WorkloadKind { Uniform, Zipfian };

struct Workload {
    std::vector<Key> queries;
    WorkloadKind kind = WorkloadKind::Uniform;
    double alpha = 0.0; ///< Zipf exponent; 0 for uniform workloads.
};

/// Samples `size` keys. Zipfian draws rank i (1-based, ascending key order)
/// with probability proportional to i^-alpha. Throws std::invalid_argument on
/// empty keys, size == 0, or alpha <= 0 for Zipfian workloads.
Workload generate_workload(std::span<const Key> keys, WorkloadKind kind, std::size_t size,
                           std::uint64_t seed, double alpha = kDefaultZipfAlpha);

/// Probability mass of ranks 1..r under the Zipf law over n ranks.
double zipf_mass_up_to(std::size_t n, double alpha, std::size_t r);

/// Copy of `keys` where a `fraction` of the gaps, grouped in `bursts` evenly
/// spaced runs, is multiplied by `factor`. Throws std::overflow_error if the
/// stretched keys no longer fit in 64 bits.
std::vector<Key> stretch_gap_bursts(std::span<const Key> keys, double fraction, std::size_t bursts,
                                    std::uint64_t factor);

} // namespace pgmpp

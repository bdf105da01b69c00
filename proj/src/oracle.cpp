#include "pgmpp/oracle.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "pgmpp/timing.hpp"

namespace pgmpp::oracle {

namespace {

using i128 = __int128;

/// num / den with den > 0.
struct Ratio {
    i128 num;
    i128 den;
};

bool ratio_less(const Ratio& a, const Ratio& b) { return a.num * b.den < b.num * a.den; }

/// Untimed passes before each timed pass of exhaustive_tune.
constexpr std::size_t kWarmupPasses = 3;

} // namespace

std::size_t exact_rank(std::span<const Key> keys, Key query) noexcept {
    std::size_t lo = 0;
    std::size_t hi = keys.size();
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (keys[mid] < query) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    return lo;
}

bool span_feasible(std::span<const Point> points, std::uint64_t epsilon) {
    const i128 two_eps = 2 * static_cast<i128>(epsilon);
    bool have = false;
    Ratio lower{0, 1};
    Ratio upper{0, 1};
    for (std::size_t l = 1; l < points.size(); ++l) {
        for (std::size_t k = 0; k < l; ++k) {
            const i128 dx = static_cast<i128>(points[l].key) - static_cast<i128>(points[k].key);
            const i128 dy = static_cast<i128>(points[l].rank) - static_cast<i128>(points[k].rank);
            const Ratio lo{dy - two_eps, dx};
            const Ratio hi{dy + two_eps, dx};
            if (!have) {
                lower = lo;
                upper = hi;
                have = true;
            } else {
                if (ratio_less(lower, lo)) {
                    lower = lo;
                }
                if (ratio_less(hi, upper)) {
                    upper = hi;
                }
            }
            if (ratio_less(upper, lower)) {
                return false;
            }
        }
    }
    return true;
}

std::size_t optimal_pla_count(std::span<const Point> points, std::uint64_t epsilon) {
    if (points.empty() || epsilon == 0) {
        throw std::invalid_argument("optimal_pla_count needs points and epsilon >= 1");
    }
    if (points.size() > kMaxDpPoints) {
        throw std::invalid_argument("optimal_pla_count refuses " + std::to_string(points.size()) +
                                    " points (limit " + std::to_string(kMaxDpPoints) + ")");
    }
    const std::size_t n = points.size();
    // reach[i]: largest j such that points[i, j) fit one segment. Extending
    // the span by one point adds its pairwise slope constraints.
    const i128 two_eps = 2 * static_cast<i128>(epsilon);
    std::vector<std::size_t> reach(n);
    for (std::size_t i = 0; i < n; ++i) {
        bool have = false;
        Ratio lower{0, 1};
        Ratio upper{0, 1};
        std::size_t j = i + 1;
        for (; j < n; ++j) {
            bool ok = true;
            for (std::size_t k = i; k < j && ok; ++k) {
                const i128 dx = static_cast<i128>(points[j].key) - static_cast<i128>(points[k].key);
                const i128 dy = static_cast<i128>(points[j].rank) - static_cast<i128>(points[k].rank);
                const Ratio lo{dy - two_eps, dx};
                const Ratio hi{dy + two_eps, dx};
                if (!have || ratio_less(lower, lo)) {
                    lower = lo;
                }
                if (!have || ratio_less(hi, upper)) {
                    upper = hi;
                }
                have = true;
                ok = !ratio_less(upper, lower);
            }
            if (!ok) {
                break;
            }
        }
        reach[i] = j;
    }
    constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> best(n + 1, kInf);
    best[0] = 0;
    for (std::size_t j = 1; j <= n; ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            if (best[i] != kInf && reach[i] >= j) {
                best[j] = std::min(best[j], best[i] + 1);
            }
        }
    }
    return best[n];
}

CoverageReport measure_coverage(const PgmIndex& index) {
    CoverageReport report;
    const auto& levels = index.levels();
    for (std::size_t l = 0; l < levels.size(); ++l) {
        std::vector<Key> below_storage;
        std::span<const Key> below;
        if (l == 0) {
            below = index.keys();
        } else {
            for (const auto& s : levels[l - 1].segments) {
                below_storage.push_back(s.start);
            }
            below = below_storage;
        }
        const auto& segs = levels[l].segments;
        LevelCoverage cov;
        cov.level = l;
        cov.segments = segs.size();
        cov.min = std::numeric_limits<std::size_t>::max();
        std::size_t pos = 0;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            const Key end = i + 1 < segs.size() ? segs[i + 1].start : std::numeric_limits<Key>::max();
            const bool last = i + 1 == segs.size();
            std::size_t covered = 0;
            while (pos < below.size() && (last || below[pos] < end)) {
                ++covered;
                ++pos;
            }
            cov.min = std::min(cov.min, covered);
            cov.total += covered;
        }
        cov.mean = static_cast<double>(cov.total) / static_cast<double>(cov.segments);
        report.per_level.push_back(cov);
    }
    return report;
}

ExhaustiveTuneResult exhaustive_tune(std::shared_ptr<const std::vector<Key>> keys, std::uint64_t eps_leaf,
                                     std::span<const std::uint64_t> candidates, std::span<const Key> workload,
                                     std::size_t reps, SearchThreshold threshold) {
    if (candidates.empty() || workload.empty()) {
        throw std::invalid_argument("exhaustive_tune needs candidates and a workload");
    }
    reps = std::max<std::size_t>(reps, 1);
    std::vector<PgmIndex> indexes;
    indexes.reserve(candidates.size());
    for (const std::uint64_t eps : candidates) {
        indexes.push_back(PgmIndex::build(keys, eps, eps_leaf, threshold));
    }
    // Round-robin repetitions, each warm-up passes and a timed pass.
    std::vector<std::vector<double>> passes(candidates.size());
    for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t c = 0; c < indexes.size(); ++c) {
            std::size_t sink = 0;
            for (std::size_t w = 0; w < kWarmupPasses; ++w) {
                for (const Key q : workload) {
                    sink += indexes[c].lookup(q);
                }
            }
            Stopwatch sw;
            for (const Key q : workload) {
                sink += indexes[c].lookup(q);
            }
            const double ns = sw.elapsed_ns();
            do_not_optimize(sink);
            passes[c].push_back(ns / static_cast<double>(workload.size()));
        }
    }
    ExhaustiveTuneResult result;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const double t = median(passes[c]);
        result.measurements.push_back({candidates[c], t});
        if (t < best) {
            best = t;
            result.best_eps_internal = candidates[c];
        }
    }
    return result;
}

} // namespace pgmpp::oracle

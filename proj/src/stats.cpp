#include "pgmpp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <utility>
#include <stdexcept>
#include <string>

#include "pgmpp/errors.hpp"

namespace pgmpp {

namespace {

void require_gaps(std::span<const Key> keys) {
    if (keys.size() < 2) {
        throw std::invalid_argument("gap statistics need at least 2 keys");
    }
}

/// Welford accumulator.
struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) noexcept {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    [[nodiscard]] GapStats stats() const noexcept {
        return {n, mean, n == 0 ? 0.0 : std::max(0.0, m2 / static_cast<double>(n))};
    }
};

GapStats gap_range_stats(std::span<const Key> keys, std::size_t first_gap, std::size_t count) {
    Moments m;
    for (std::size_t i = first_gap; i < first_gap + count; ++i) {
        m.add(static_cast<double>(keys[i + 1] - keys[i]));
    }
    return m.stats();
}

/// Binary segmentation over a sequence with a Gaussian mean/variance change
/// model: cost(segment) = n * log(var + floor).
class BinarySegmentation {
public:
    BinarySegmentation(const std::vector<double>& x, std::size_t min_length)
        : min_length_(min_length), s1_(x.size() + 1, 0.0), s2_(x.size() + 1, 0.0) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            s1_[i + 1] = s1_[i] + x[i];
            s2_[i + 1] = s2_[i] + x[i] * x[i];
        }
    }

    [[nodiscard]] double cost(std::size_t a, std::size_t b) const noexcept {
        const auto n = static_cast<double>(b - a);
        const double mean = (s1_[b] - s1_[a]) / n;
        const double var = std::max(0.0, (s2_[b] - s2_[a]) / n - mean * mean);
        return n * std::log(var + kVarianceFloor);
    }

    struct Split {
        double gain = -std::numeric_limits<double>::infinity();
        std::size_t at = 0;
    };

    [[nodiscard]] Split best_split(std::size_t a, std::size_t b) const noexcept {
        Split best;
        if (b - a < 2 * min_length_) {
            return best;
        }
        const double whole = cost(a, b);
        for (std::size_t t = a + min_length_; t + min_length_ <= b; ++t) {
            const double gain = whole - cost(a, t) - cost(t, b);
            if (gain > best.gain) {
                best = {gain, t};
            }
        }
        return best;
    }

private:
    static constexpr double kVarianceFloor = 1e-9;
    std::size_t min_length_;
    std::vector<double> s1_;
    std::vector<double> s2_;
};

} // namespace

const char* to_string(EstimatorKind kind) noexcept {
    switch (kind) {
    case EstimatorKind::Simple:
        return "simple";
    case EstimatorKind::Clip:
        return "clip";
    case EstimatorKind::Adap:
        return "adap";
    }
    return "?";
}

EstimatorKind parse_estimator_kind(const std::string& name) {
    if (name == "simple") {
        return EstimatorKind::Simple;
    }
    if (name == "clip") {
        return EstimatorKind::Clip;
    }
    if (name == "adap") {
        return EstimatorKind::Adap;
    }
    throw std::invalid_argument("unknown estimator kind '" + name + "'");
}

GapStats gap_statistics(std::span<const Key> keys) {
    require_gaps(keys);
    return gap_range_stats(keys, 0, keys.size() - 1);
}

GapStats clipped_gap_statistics(std::span<const Key> keys) {
    require_gaps(keys);
    std::vector<Key> gaps(keys.size() - 1);
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
        gaps[i] = keys[i + 1] - keys[i];
    }
    std::vector<Key> sorted = gaps;
    std::sort(sorted.begin(), sorted.end());
    const auto nearest_rank = [&](double p) {
        const auto r = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
        return sorted[std::clamp<std::size_t>(r, 1, sorted.size()) - 1];
    };
    const Key lo = nearest_rank(0.01);
    const Key hi = nearest_rank(0.99);
    Moments m;
    for (const Key g : gaps) {
        if (g >= lo && g <= hi) {
            m.add(static_cast<double>(g));
        }
    }
    return m.stats();
}

double hardness_ratio(const GapStats& stats) noexcept {
    return stats.variance / (stats.mean * stats.mean);
}

double hardness_ratio(std::span<const Key> keys, bool clip) {
    return hardness_ratio(clip ? clipped_gap_statistics(keys) : gap_statistics(keys));
}

double expected_coverage(const GapStats& stats, std::uint64_t epsilon) noexcept {
    if (stats.variance == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    const auto e = static_cast<double>(epsilon);
    return stats.mean * stats.mean * e * e / stats.variance;
}

std::vector<GapPartition> partition_gaps(std::span<const Key> keys, std::size_t max_partitions) {
    require_gaps(keys);
    if (max_partitions == 0) {
        throw std::invalid_argument("max_partitions must be positive");
    }
    const std::size_t n = keys.size() - 1;
    std::vector<double> logs(n);
    for (std::size_t i = 0; i < n; ++i) {
        logs[i] = std::log(static_cast<double>(keys[i + 1] - keys[i]));
    }
    const std::size_t min_length = 1024;
    const double penalty = 3.0 * std::log(static_cast<double>(std::max<std::size_t>(n, 2)));
    const BinarySegmentation seg(logs, min_length);

    struct Candidate {
        double gain;
        std::size_t a;
        std::size_t b;
        std::size_t at;
        bool operator<(const Candidate& o) const noexcept {
            return gain < o.gain || (gain == o.gain && a > o.a);
        }
    };
    std::priority_queue<Candidate> queue;
    std::vector<std::size_t> cuts;
    const auto consider = [&](std::size_t a, std::size_t b) {
        const auto s = seg.best_split(a, b);
        if (s.gain > penalty) {
            queue.push({s.gain, a, b, s.at});
        }
    };
    consider(0, n);
    while (!queue.empty() && cuts.size() + 1 < max_partitions) {
        const Candidate c = queue.top();
        queue.pop();
        cuts.push_back(c.at);
        consider(c.a, c.at);
        consider(c.at, c.b);
    }
    std::sort(cuts.begin(), cuts.end());

    std::vector<GapPartition> parts;
    std::size_t begin = 0;
    cuts.push_back(n);
    for (const std::size_t end : cuts) {
        parts.push_back({begin, gap_range_stats(keys, begin, end - begin)});
        begin = end;
    }
    return parts;
}

namespace {

std::vector<GapPartition> partitions_for(EstimatorKind kind, std::span<const Key> keys,
                                         std::size_t max_partitions) {
    switch (kind) {
    case EstimatorKind::Simple:
        return {{0, gap_statistics(keys)}};
    case EstimatorKind::Clip: {
        GapStats s = clipped_gap_statistics(keys);
        s.count = keys.size() - 1; // moments of the kept gaps, weight of all gaps
        return {{0, s}};
    }
    case EstimatorKind::Adap:
        return partition_gaps(keys, max_partitions);
    }
    throw std::invalid_argument("unknown estimator kind");
}

double mass_of(const std::vector<GapPartition>& parts) {
    double mass = 0.0;
    for (const auto& p : parts) {
        if (p.stats.count > 0 && p.stats.variance > 0.0) {
            mass += static_cast<double>(p.stats.count) * hardness_ratio(p.stats);
        }
    }
    return mass;
}

} // namespace

LeafEstimator::LeafEstimator(EstimatorKind kind, std::span<const Key> keys, std::size_t max_partitions)
    : kind_(kind), partitions_(partitions_for(kind, keys, max_partitions)), mass_(mass_of(partitions_)),
      max_partitions_(max_partitions) {}

LeafEstimator::LeafEstimator(EstimatorKind kind, std::vector<GapPartition> partitions)
    : kind_(kind), partitions_(std::move(partitions)) {
    if (partitions_.empty()) {
        throw std::invalid_argument("estimator needs at least one partition");
    }
    mass_ = mass_of(partitions_);
}

double LeafEstimator::effective_hardness() const noexcept {
    double n = 0.0;
    for (const auto& p : partitions_) {
        n += static_cast<double>(p.stats.count);
    }
    return n == 0.0 ? 0.0 : mass_ / n;
}

void LeafEstimator::calibrate(std::span<const Key> keys, std::uint64_t eps_ref, double sample_fraction,
                              std::size_t min_segments) {
    if (eps_ref == 0 || !(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
        throw std::invalid_argument("calibration needs eps_ref >= 1 and a sample fraction in (0, 1]");
    }
    require_gaps(keys);
    const std::size_t n = keys.size();
    const std::size_t want = std::max(static_cast<std::size_t>(sample_fraction * static_cast<double>(n)),
                                      std::min(n, kMinCalibrationSample));
    const std::size_t blocks = want >= kCalibrationBlocks * 2 ? kCalibrationBlocks : 1;
    const std::size_t block_len = std::max<std::size_t>(2, want / blocks);

    // Evenly spaced contiguous blocks, as [first key, end key).
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t center = (2 * b + 1) * n / (2 * blocks);
        const std::size_t first = std::min(center > block_len / 2 ? center - block_len / 2 : 0, n - std::min(n, block_len));
        ranges.emplace_back(first, std::min(n, first + block_len));
    }

    // Same-kind moments on the sample. SIMPLE and CLIP pool all block gaps;
    // ADAP pools block gaps per partition of the full key set.
    std::vector<double> gap_hardness; // per sample gap, concatenated block by block
    {
        std::vector<std::size_t> part_of;
        std::vector<Key> pooled;
        pooled.reserve(blocks * block_len);
        for (const auto& [first, end] : ranges) {
            for (std::size_t i = first; i + 1 < end; ++i) {
                pooled.push_back(keys[i + 1] - keys[i]);
                std::size_t p = 0;
                if (kind_ == EstimatorKind::Adap) {
                    p = static_cast<std::size_t>(
                            std::upper_bound(partitions_.begin(), partitions_.end(), i,
                                             [](std::size_t gap, const GapPartition& q) { return gap < q.offset; }) -
                            partitions_.begin()) - 1;
                }
                part_of.push_back(p);
            }
        }
        std::vector<double> h;
        if (kind_ == EstimatorKind::Adap) {
            std::vector<Moments> m(partitions_.size());
            for (std::size_t i = 0; i < pooled.size(); ++i) {
                m[part_of[i]].add(static_cast<double>(pooled[i]));
            }
            for (const auto& mm : m) {
                h.push_back(mm.n > 0 && mm.mean > 0.0 ? hardness_ratio(mm.stats()) : 0.0);
            }
        } else {
            // Rebuild a key sequence with the pooled gaps to reuse the
            // whole-sequence statistics.
            std::vector<Key> seq(pooled.size() + 1, 0);
            for (std::size_t i = 0; i < pooled.size(); ++i) {
                seq[i + 1] = seq[i] + pooled[i];
            }
            h.push_back(hardness_ratio(kind_ == EstimatorKind::Clip ? clipped_gap_statistics(seq) : gap_statistics(seq)));
        }
        gap_hardness.resize(pooled.size());
        for (std::size_t i = 0; i < pooled.size(); ++i) {
            gap_hardness[i] = h[part_of[i]];
        }
    }

    // Observed segments vs predicted mass over the gaps they cover. Only
    // complete segments count; each block's last segment is cut by the edge.
    const auto measure = [&](std::uint64_t eps, double& complete, double& mass, double& all) {
        complete = 0.0;
        mass = 0.0;
        all = 0.0;
        std::size_t offset = 0;
        for (const auto& [first, end] : ranges) {
            const std::span<const Key> block = keys.subspan(first, end - first);
            const auto segs = fit_epsilon_pla(block, eps).segments;
            all += static_cast<double>(segs.size());
            const std::size_t covered =
                static_cast<std::size_t>(std::lower_bound(block.begin(), block.end(), segs.back().start) - block.begin());
            complete += static_cast<double>(segs.size() - 1);
            for (std::size_t g = 0; g < covered; ++g) {
                mass += gap_hardness[offset + g];
            }
            offset += block.size() - 1;
        }
    };

    std::uint64_t eps = eps_ref;
    double complete = 0.0;
    double mass = 0.0;
    double all = 0.0;
    measure(eps, complete, mass, all);
    while (complete < static_cast<double>(min_segments) && eps > 1) {
        eps /= 2;
        measure(eps, complete, mass, all);
    }
    calibration_epsilon_ = eps;
    const double e2 = static_cast<double>(eps) * static_cast<double>(eps);
    if (complete == 0.0) {
        // No segment boundary inside the sample: fall back to whole blocks.
        complete = all;
        mass = 0.0;
        for (const double h : gap_hardness) {
            mass += h;
        }
    }
    // Constant gaps predict zero segments at any scale.
    scale_ = mass > 0.0 ? complete / (mass / e2) : 1.0;
}

void LeafEstimator::set_scale(double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw std::invalid_argument("calibration scale must be positive and finite");
    }
    scale_ = scale;
}

double LeafEstimator::scale() const {
    if (!scale_) {
        throw InvalidState("leaf estimator is not calibrated");
    }
    return *scale_;
}

double LeafEstimator::estimate(std::uint64_t eps_leaf) const {
    if (eps_leaf == 0) {
        throw std::invalid_argument("eps_leaf must be positive");
    }
    const auto e = static_cast<double>(eps_leaf);
    return scale() * mass_ / (e * e);
}

double estimate_leaf_segments(const LeafEstimator& estimator, std::uint64_t eps_leaf) {
    return estimator.estimate(eps_leaf);
}

std::optional<std::size_t> estimate_height_from(double leaf_segments, double g, double c_h) {
    if (!(g > 1.0)) {
        return std::nullopt;
    }
    if (leaf_segments <= 1.0) {
        return 1;
    }
    const double levels = std::ceil(c_h * std::log2(std::log(leaf_segments) / std::log(g))) + 1.0;
    return static_cast<std::size_t>(std::max(2.0, levels));
}

std::optional<std::size_t> estimate_height(const LeafEstimator& estimator, std::uint64_t eps_internal,
                                           std::uint64_t eps_leaf, double c_h) {
    if (eps_internal == 0) {
        throw std::invalid_argument("eps_internal must be positive");
    }
    const double leaves = estimator.estimate(eps_leaf);
    const double h = estimator.effective_hardness();
    const auto e = static_cast<double>(eps_internal);
    const double g = h > 0.0 ? e * e / h : std::numeric_limits<double>::infinity();
    return estimate_height_from(leaves, g, c_h);
}

double fit_height_scale(std::span<const HeightObservation> observations) {
    double best = 1.0;
    double best_err = std::numeric_limits<double>::infinity();
    for (int step = 10; step <= 60; ++step) {
        const double c = step * 0.05;
        double err = 0.0;
        for (const auto& o : observations) {
            const auto h = estimate_height_from(o.leaf_segments, o.g, c);
            err += h ? std::abs(static_cast<double>(*h) - static_cast<double>(o.height)) : 1e9;
        }
        if (err < best_err || (err == best_err && std::abs(c - 1.0) < std::abs(best - 1.0))) {
            best = c;
            best_err = err;
        }
    }
    return best;
}

std::size_t btree_height(std::uint64_t n, std::uint64_t fanout) {
    if (fanout < 2) {
        throw std::invalid_argument("B+-tree fanout must be at least 2");
    }
    if (n == 0) {
        throw std::invalid_argument("B+-tree height needs n >= 1");
    }
    // Smallest k with fanout^k >= (n + 1) / 2, i.e. 2 * fanout^k >= n + 1.
    const unsigned __int128 target = static_cast<unsigned __int128>(n) + 1;
    unsigned __int128 power = 1;
    std::size_t k = 0;
    while (2 * power < target) {
        power *= fanout;
        ++k;
    }
    return 1 + k;
}

} // namespace pgmpp

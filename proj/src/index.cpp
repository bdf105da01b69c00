#include "pgmpp/index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "pgmpp/errors.hpp"

namespace pgmpp {

namespace {

constexpr std::uint64_t kMagic = 0x5844494d47504750ULL; // "PGPGMIDX" little-endian
constexpr std::uint64_t kVersion = 1;

/// Rounded, clamped prediction of the position inside a level of `n` entries.
/// The next segment's intercept caps the prediction for keys that fall
/// between this segment's last point and the next segment's start.
inline std::size_t predict_center(const Level& level, std::size_t j, Key key, std::size_t n) noexcept {
    double p = eval_segment(level.segments[j], key);
    if (j + 1 < level.segments.size()) {
        p = std::min(p, level.segments[j + 1].intercept);
    }
    p = std::clamp(p, 0.0, static_cast<double>(n - 1));
    return static_cast<std::size_t>(p + 0.5);
}

/// Internal-level window. For a query strictly between two child keys the
/// prediction may exceed the predecessor by radius + 1, hence the extra slot
/// on the left.
inline void internal_window(std::size_t center, std::uint64_t radius, std::size_t n, std::size_t& lo,
                            std::size_t& hi) noexcept {
    lo = center > radius + 1 ? center - radius - 1 : 0;
    hi = std::min<std::size_t>(n - 1, center + radius);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (in.gcount() != 8) {
        throw FormatError("truncated index blob");
    }
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | b[i];
    }
    return v;
}

} // namespace

std::size_t compute_entry_level(std::span<const std::size_t> level_sizes, SearchThreshold threshold) {
    if (level_sizes.empty()) {
        throw std::invalid_argument("index has no levels");
    }
    for (std::size_t l = level_sizes.size() - 1; l >= 1; --l) {
        if (level_sizes[l - 1] > threshold.delta) {
            return l;
        }
    }
    return level_sizes.size() - 1;
}

void PgmIndex::finish_layout() {
    std::vector<std::size_t> sizes;
    for (Level& level : levels_) {
        level.start_keys.resize(level.segments.size());
        for (std::size_t i = 0; i < level.segments.size(); ++i) {
            level.start_keys[i] = level.segments[i].start;
        }
        sizes.push_back(level.segments.size());
    }
    entry_level_ = compute_entry_level(sizes, threshold_);
}

PgmIndex PgmIndex::build(std::shared_ptr<const std::vector<Key>> keys, std::uint64_t eps_internal,
                         std::uint64_t eps_leaf, SearchThreshold threshold) {
    if (!keys || keys->empty()) {
        throw std::invalid_argument("cannot build an index on an empty key set");
    }
    if (eps_internal == 0 || eps_leaf == 0) {
        throw std::invalid_argument("error bounds must be positive");
    }
    if (threshold.delta == 0) {
        throw std::invalid_argument("search threshold must be positive");
    }
    PgmIndex index;
    index.keys_ = std::move(keys);
    index.eps_internal_ = eps_internal;
    index.eps_leaf_ = eps_leaf;
    index.threshold_ = threshold;

    index.levels_.push_back({fit_epsilon_pla(std::span<const Key>(*index.keys_), eps_leaf).segments, {}});
    while (index.levels_.back().segments.size() > 1) {
        const auto& below = index.levels_.back().segments;
        std::vector<Key> starts(below.size());
        for (std::size_t i = 0; i < below.size(); ++i) {
            starts[i] = below[i].start;
        }
        index.levels_.push_back({fit_epsilon_pla(std::span<const Key>(starts), eps_internal).segments, {}});
    }
    index.finish_layout();
    return index;
}

PgmIndex PgmIndex::build(std::span<const Key> keys, std::uint64_t eps_internal, std::uint64_t eps_leaf,
                         SearchThreshold threshold) {
    return build(std::make_shared<const std::vector<Key>>(keys.begin(), keys.end()), eps_internal,
                 eps_leaf, threshold);
}

std::size_t PgmIndex::start_segment(Key key) const noexcept {
    const std::vector<Key>& starts = levels_[entry_level_].start_keys;
    std::size_t count = 0;
    for (const Key s : starts) {
        count += static_cast<std::size_t>(s <= key);
    }
    return count == 0 ? 0 : count - 1;
}

template <bool Branchy>
std::size_t PgmIndex::descend(Key key) const noexcept {
    std::size_t level = Branchy ? levels_.size() - 1 : entry_level_;
    std::size_t j = Branchy ? 0 : start_segment(key);
    for (; level > 0; --level) {
        const std::vector<Key>& below = levels_[level - 1].start_keys;
        const std::size_t n = below.size();
        std::size_t lo;
        std::size_t hi;
        internal_window(predict_center(levels_[level], j, key, n), eps_internal_, n, lo, hi);
        std::size_t count;
        if constexpr (Branchy) {
            count = static_cast<std::size_t>(
                std::upper_bound(below.begin() + lo, below.begin() + hi + 1, key) - (below.begin() + lo));
        } else {
            count = hybrid_upper_bound(std::span<const Key>(below.data() + lo, hi - lo + 1), key, threshold_);
        }
        j = count == 0 ? lo : lo + count - 1;
    }
    return j;
}

PgmIndex::Window PgmIndex::leaf_window(std::size_t segment, Key key) const noexcept {
    const std::size_t n = keys_->size();
    const std::size_t c = predict_center(levels_[0], segment, key, n);
    return {c > eps_leaf_ ? c - eps_leaf_ : 0, std::min<std::size_t>(n - 1, c + eps_leaf_)};
}

PgmIndex::Window PgmIndex::locate(Key key) const noexcept {
    return leaf_window(descend<false>(key), key);
}

PgmIndex::Window PgmIndex::locate_branchy(Key key) const noexcept {
    return leaf_window(descend<true>(key), key);
}

std::size_t PgmIndex::search_leaf_branchy(Window w, Key key) const noexcept {
    const auto first = keys_->begin() + static_cast<std::ptrdiff_t>(w.lo);
    const auto last = keys_->begin() + static_cast<std::ptrdiff_t>(w.hi + 1);
    return w.lo + static_cast<std::size_t>(std::lower_bound(first, last, key) - first);
}

std::vector<PgmIndex::TraceStep> PgmIndex::trace(Key key) const {
    std::vector<TraceStep> steps;
    std::size_t j = start_segment(key);
    {
        const auto& starts = levels_[entry_level_].start_keys;
        const auto ub = static_cast<std::size_t>(std::upper_bound(starts.begin(), starts.end(), key) - starts.begin());
        steps.push_back({entry_level_, 0, starts.size() - 1, j, ub == 0 ? 0 : ub - 1});
    }
    for (std::size_t level = entry_level_; level > 0; --level) {
        const std::vector<Key>& below = levels_[level - 1].start_keys;
        const std::size_t n = below.size();
        std::size_t lo;
        std::size_t hi;
        internal_window(predict_center(levels_[level], j, key, n), eps_internal_, n, lo, hi);
        const std::size_t count =
            hybrid_upper_bound(std::span<const Key>(below.data() + lo, hi - lo + 1), key, threshold_);
        j = count == 0 ? lo : lo + count - 1;
        const auto ub = static_cast<std::size_t>(std::upper_bound(below.begin(), below.end(), key) - below.begin());
        steps.push_back({level - 1, lo, hi, j, ub == 0 ? 0 : ub - 1});
    }
    const Window w = leaf_window(j, key);
    const std::size_t rank = search_leaf(w, key);
    const auto lb = static_cast<std::size_t>(std::lower_bound(keys_->begin(), keys_->end(), key) - keys_->begin());
    steps.push_back({0, w.lo, w.hi, rank, lb});
    return steps;
}

void PgmIndex::save(std::ostream& out) const {
    put_u64(out, kMagic);
    put_u64(out, kVersion);
    put_u64(out, key_count());
    put_u64(out, eps_internal_);
    put_u64(out, eps_leaf_);
    put_u64(out, levels_.size());
    put_u64(out, threshold_.delta);
    for (const Level& level : levels_) {
        put_u64(out, level.segments.size());
        for (const Segment& s : level.segments) {
            put_u64(out, s.start);
            put_u64(out, std::bit_cast<std::uint64_t>(s.slope));
            put_u64(out, std::bit_cast<std::uint64_t>(s.intercept));
        }
    }
    if (!out) {
        throw std::runtime_error("failed to write index blob");
    }
}

PgmIndex PgmIndex::load(std::istream& in, std::shared_ptr<const std::vector<Key>> keys) {
    if (get_u64(in) != kMagic) {
        throw FormatError("not an index blob (bad magic)");
    }
    const std::uint64_t version = get_u64(in);
    if (version != kVersion) {
        throw FormatError("unsupported index blob version " + std::to_string(version));
    }
    PgmIndex index;
    const std::uint64_t n = get_u64(in);
    if (!keys || keys->size() != n) {
        throw FormatError("index blob was built on " + std::to_string(n) + " keys");
    }
    index.keys_ = std::move(keys);
    index.eps_internal_ = get_u64(in);
    index.eps_leaf_ = get_u64(in);
    const std::uint64_t level_count = get_u64(in);
    index.threshold_.delta = get_u64(in);
    if (index.eps_internal_ == 0 || index.eps_leaf_ == 0 || index.threshold_.delta == 0 ||
        level_count == 0 || level_count > 64) {
        throw FormatError("index blob header out of range");
    }
    for (std::uint64_t l = 0; l < level_count; ++l) {
        const std::uint64_t count = get_u64(in);
        const std::uint64_t limit = l == 0 ? n : index.levels_.back().segments.size();
        if (count == 0 || count > limit) {
            throw FormatError("level " + std::to_string(l) + " has an invalid segment count");
        }
        Level level;
        level.segments.resize(count);
        for (Segment& s : level.segments) {
            s.start = get_u64(in);
            s.slope = std::bit_cast<double>(get_u64(in));
            s.intercept = std::bit_cast<double>(get_u64(in));
            if (!std::isfinite(s.slope) || !std::isfinite(s.intercept) || s.slope < 0) {
                throw FormatError("segment with invalid coefficients");
            }
        }
        for (std::size_t i = 1; i < level.segments.size(); ++i) {
            if (level.segments[i].start <= level.segments[i - 1].start) {
                throw FormatError("segment starts must strictly increase");
            }
        }
        index.levels_.push_back(std::move(level));
    }
    if (index.levels_.back().segments.size() != 1) {
        throw FormatError("top level must hold exactly one segment");
    }
    index.finish_layout();
    return index;
}

IndexStats stats_of(const PgmIndex& index, std::size_t seg_bytes) {
    IndexStats stats;
    const auto& levels = index.levels();
    stats.height = levels.size();
    std::size_t total = 0;
    for (std::size_t l = 0; l < levels.size(); ++l) {
        total += levels[l].segments.size();
        if (l == 0) {
            stats.leaf_segments = levels[l].segments.size();
        } else {
            stats.internal_segments += levels[l].segments.size();
        }
    }
    stats.size_bytes = total * seg_bytes;
    return stats;
}

} // namespace pgmpp

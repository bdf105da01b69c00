#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "pgmpp/pla.hpp"
#include "pgmpp/search.hpp"

namespace pgmpp {

/// One level of the index: its segments plus their start keys laid out
/// contiguously for scanning.
struct Level {
    std::vector<Segment> segments;
    std::vector<Key> start_keys; ///< start_keys[i] == segments[i].start
};

struct IndexStats {
    std::size_t height = 0;
    std::size_t leaf_segments = 0;
    std::size_t internal_segments = 0;
    std::size_t size_bytes = 0;
};

/// Default per-segment encoding size used for space accounting.
inline constexpr std::size_t kSegmentBytes = 24;

/// Multi-level learned index over a sorted key array.
///
/// Level 0 maps keys to ranks within +-eps_leaf; level l > 0 maps keys to
/// the governing segment of level l - 1 within +-eps_internal. The top level
/// holds one segment. Lookups start at the entry level, skipping sparse
/// levels above it.
class PgmIndex {
public:
    /// Inclusive key-array range searched by the last-mile step. The answer
    /// lies in [lo, hi + 1].
    struct Window {
        std::size_t lo;
        std::size_t hi;
    };

    /// One step of an instrumented descent.
    struct TraceStep {
        std::size_t level;    ///< Level searched in this step.
        std::size_t lo;       ///< First index of the searched window.
        std::size_t hi;       ///< Last index of the searched window.
        std::size_t found;    ///< Index the search returned.
        std::size_t expected; ///< Index found by a full scan of the level.
    };

    PgmIndex() = default;

    /// Builds the index bottom-up. Throws std::invalid_argument on empty or
    /// non-strictly-increasing keys, or on a zero error bound.
    static PgmIndex build(std::shared_ptr<const std::vector<Key>> keys, std::uint64_t eps_internal,
                          std::uint64_t eps_leaf, SearchThreshold threshold = {});
    static PgmIndex build(std::span<const Key> keys, std::uint64_t eps_internal,
                          std::uint64_t eps_leaf, SearchThreshold threshold = {});

    /// Lower-bound rank of `key` in [0, N].
    [[nodiscard]] std::size_t lookup(Key key) const noexcept {
        return search_leaf(locate(key), key);
    }

    /// Same structure searched with std::upper_bound/std::lower_bound from
    /// the root, without layer skipping.
    [[nodiscard]] std::size_t lookup_branchy(Key key) const noexcept {
        return search_leaf_branchy(locate_branchy(key), key);
    }

    /// Internal phase only: descends to the leaf segment and returns the
    /// last-mile window.
    [[nodiscard]] Window locate(Key key) const noexcept;
    [[nodiscard]] Window locate_branchy(Key key) const noexcept;

    /// Last-mile phase only.
    [[nodiscard]] std::size_t search_leaf(Window w, Key key) const noexcept {
        const std::span<const Key> slice(keys_->data() + w.lo, w.hi - w.lo + 1);
        return w.lo + hybrid_lower_bound(slice, key, threshold_);
    }
    [[nodiscard]] std::size_t search_leaf_branchy(Window w, Key key) const noexcept;

    /// Replays lookup(key) and records every window against a full-scan
    /// reference. The final step (level 0 on the key array) reports ranks.
    [[nodiscard]] std::vector<TraceStep> trace(Key key) const;

    [[nodiscard]] const std::vector<Level>& levels() const noexcept { return levels_; }
    [[nodiscard]] std::span<const Key> keys() const noexcept { return *keys_; }
    [[nodiscard]] std::size_t key_count() const noexcept { return keys_ ? keys_->size() : 0; }
    [[nodiscard]] std::uint64_t eps_internal() const noexcept { return eps_internal_; }
    [[nodiscard]] std::uint64_t eps_leaf() const noexcept { return eps_leaf_; }
    [[nodiscard]] std::size_t entry_level() const noexcept { return entry_level_; }
    [[nodiscard]] SearchThreshold threshold() const noexcept { return threshold_; }

    /// Writes the model (not the keys) as a little-endian binary blob.
    void save(std::ostream& out) const;
    /// Reads a blob written by save(); `keys` must be the array it was built
    /// on. Throws FormatError on malformed input or a key-count mismatch.
    static PgmIndex load(std::istream& in, std::shared_ptr<const std::vector<Key>> keys);

private:
    template <bool Branchy>
    std::size_t descend(Key key) const noexcept;
    std::size_t start_segment(Key key) const noexcept;
    Window leaf_window(std::size_t segment, Key key) const noexcept;
    void finish_layout();

    std::shared_ptr<const std::vector<Key>> keys_;
    std::vector<Level> levels_;
    std::uint64_t eps_internal_ = 0;
    std::uint64_t eps_leaf_ = 0;
    std::size_t entry_level_ = 0;
    SearchThreshold threshold_{};
};

/// Structural counts; size_bytes = total segments * seg_bytes.
IndexStats stats_of(const PgmIndex& index, std::size_t seg_bytes = kSegmentBytes);

/// Highest level l whose level l - 1 holds more than delta segments, or the
/// top level when no level is that dense.
std::size_t compute_entry_level(std::span<const std::size_t> level_sizes, SearchThreshold threshold);

} // namespace pgmpp

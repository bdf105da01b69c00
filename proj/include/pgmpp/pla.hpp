#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pgmpp {

using Key = std::uint64_t;

/// A (key, rank) training point. Within a sequence keys strictly increase
/// and ranks increase by one.
struct Point {
    Key key;
    std::int64_t rank;
};

/// One linear piece: predicts `slope * (key - start) + intercept`.
struct Segment {
    Key start;        ///< First key covered by the segment.
    double slope;     ///< Rank per key unit, never negative.
    double intercept; ///< Predicted rank at `start`.

    friend bool operator==(const Segment&, const Segment&) = default;
};

inline double eval_segment(const Segment& seg, Key key) noexcept {
    const double dx = key >= seg.start ? static_cast<double>(key - seg.start)
                                       : -static_cast<double>(seg.start - key);
    return seg.slope * dx + seg.intercept;
}

struct PlaModel {
    std::vector<Segment> segments;
    std::uint64_t epsilon = 0;
};

/// Streaming optimal error-bounded PLA fitter.
///
/// Maintains the upper and lower convex hulls of the points shifted by
/// +epsilon and -epsilon together with the two extreme feasible lines. A
/// point is accepted while some line still passes within epsilon of every
/// accepted point; the first rejected point closes the segment. Since
/// feasibility is hereditary, closing segments greedily yields the minimum
/// segment count. All hull geometry is evaluated in exact 128-bit integer
/// arithmetic.
class OptimalPlaFitter {
public:
    explicit OptimalPlaFitter(std::uint64_t epsilon);

    /// Tries to extend the current segment with (x, y). Returns false when no
    /// line within epsilon of all points exists anymore; the state is left
    /// untouched so the caller can take segment(), reset() and re-add.
    bool add(Key x, std::int64_t y);

    /// Segment for the points accepted so far. Requires size() > 0.
    [[nodiscard]] Segment segment() const;

    [[nodiscard]] std::size_t size() const noexcept { return count_; }
    void reset() noexcept { count_ = 0; }

private:
    struct HullPoint {
        Key x;
        std::int64_t y;
    };

    std::int64_t epsilon_;
    std::size_t count_ = 0;
    Key first_x_ = 0;
    Key last_x_ = 0;
    HullPoint rect_[4]{};
    std::vector<HullPoint> upper_;
    std::vector<HullPoint> lower_;
    std::size_t upper_start_ = 0;
    std::size_t lower_start_ = 0;
};

/// Minimal epsilon-PLA of `points` (keys strictly increasing).
/// Throws std::invalid_argument on empty input, epsilon == 0, or
/// non-increasing keys.
PlaModel fit_epsilon_pla(std::span<const Point> points, std::uint64_t epsilon);

/// Same as above with ranks implied by position (0-based).
PlaModel fit_epsilon_pla(std::span<const Key> keys, std::uint64_t epsilon);

} // namespace pgmpp

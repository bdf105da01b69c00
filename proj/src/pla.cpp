#include "pgmpp/pla.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace pgmpp {

namespace {

using i128 = __int128;

struct Slope {
    i128 dx;
    i128 dy;
};

template <typename P>
Slope diff(const P& a, const P& b) {
    return {static_cast<i128>(a.x) - static_cast<i128>(b.x),
            static_cast<i128>(a.y) - static_cast<i128>(b.y)};
}

// Slope comparisons; both operands must have dx of the same sign.
bool slope_less(const Slope& a, const Slope& b) { return a.dy * b.dx < b.dy * a.dx; }
bool slope_greater(const Slope& a, const Slope& b) { return a.dy * b.dx > b.dy * a.dx; }

template <typename P>
i128 cross(const P& o, const P& a, const P& b) {
    const Slope oa = diff(a, o);
    const Slope ob = diff(b, o);
    return oa.dx * ob.dy - oa.dy * ob.dx;
}

constexpr std::uint64_t kMaxEpsilon = std::uint64_t{1} << 40;

void check_epsilon(std::uint64_t epsilon) {
    if (epsilon == 0 || epsilon > kMaxEpsilon) {
        throw std::invalid_argument("epsilon must be in [1, 2^40], got " + std::to_string(epsilon));
    }
}

template <typename KeyAt, typename RankAt>
PlaModel fit(std::size_t n, std::uint64_t epsilon, KeyAt key_at, RankAt rank_at) {
    check_epsilon(epsilon);
    if (n == 0) {
        throw std::invalid_argument("cannot fit a PLA on an empty point set");
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (key_at(i) <= key_at(i - 1)) {
            throw std::invalid_argument("keys must be strictly increasing (position " +
                                        std::to_string(i) + ")");
        }
    }

    PlaModel model;
    model.epsilon = epsilon;
    OptimalPlaFitter fitter(epsilon);
    for (std::size_t i = 0; i < n; ++i) {
        const Key x = key_at(i);
        const std::int64_t y = rank_at(i);
        if (!fitter.add(x, y)) {
            model.segments.push_back(fitter.segment());
            fitter.reset();
            fitter.add(x, y);
        }
    }
    model.segments.push_back(fitter.segment());
    return model;
}

} // namespace

OptimalPlaFitter::OptimalPlaFitter(std::uint64_t epsilon)
    : epsilon_(static_cast<std::int64_t>(epsilon)) {
    check_epsilon(epsilon);
}

bool OptimalPlaFitter::add(Key x, std::int64_t y) {
    const HullPoint p1{x, y + epsilon_};
    const HullPoint p2{x, y - epsilon_};

    if (count_ == 0) {
        first_x_ = x;
        last_x_ = x;
        rect_[0] = p1;
        rect_[1] = p2;
        upper_.clear();
        lower_.clear();
        upper_.push_back(p1);
        lower_.push_back(p2);
        upper_start_ = 0;
        lower_start_ = 0;
        ++count_;
        return true;
    }
    if (x <= last_x_) {
        throw std::invalid_argument("keys must be strictly increasing");
    }

    if (count_ == 1) {
        rect_[2] = p2;
        rect_[3] = p1;
        upper_.push_back(p1);
        lower_.push_back(p2);
        last_x_ = x;
        ++count_;
        return true;
    }

    const Slope min_line = diff(rect_[2], rect_[0]);
    const Slope max_line = diff(rect_[3], rect_[1]);
    const bool below_min = slope_less(diff(p1, rect_[2]), min_line);
    const bool above_max = slope_greater(diff(p2, rect_[3]), max_line);
    if (below_min || above_max) {
        return false;
    }

    if (slope_less(diff(p1, rect_[1]), max_line)) {
        // p1 lowers the maximum slope: pivot on the lower hull.
        Slope best = diff(lower_[lower_start_], p1);
        std::size_t best_i = lower_start_;
        for (std::size_t i = lower_start_ + 1; i < lower_.size(); ++i) {
            const Slope s = diff(lower_[i], p1);
            if (slope_greater(s, best)) {
                break;
            }
            best = s;
            best_i = i;
        }
        rect_[1] = lower_[best_i];
        rect_[3] = p1;
        lower_start_ = best_i;

        std::size_t end = upper_.size();
        while (end >= upper_start_ + 2 && cross(upper_[end - 2], upper_[end - 1], p1) <= 0) {
            --end;
        }
        upper_.resize(end);
        upper_.push_back(p1);
    }

    if (slope_greater(diff(p2, rect_[0]), min_line)) {
        // p2 raises the minimum slope: pivot on the upper hull.
        Slope best = diff(upper_[upper_start_], p2);
        std::size_t best_i = upper_start_;
        for (std::size_t i = upper_start_ + 1; i < upper_.size(); ++i) {
            const Slope s = diff(upper_[i], p2);
            if (slope_less(s, best)) {
                break;
            }
            best = s;
            best_i = i;
        }
        rect_[0] = upper_[best_i];
        rect_[2] = p2;
        upper_start_ = best_i;

        std::size_t end = lower_.size();
        while (end >= lower_start_ + 2 && cross(lower_[end - 2], lower_[end - 1], p2) >= 0) {
            --end;
        }
        lower_.resize(end);
        lower_.push_back(p2);
    }

    last_x_ = x;
    ++count_;
    return true;
}

Segment OptimalPlaFitter::segment() const {
    if (count_ == 0) {
        throw std::logic_error("segment() on an empty fitter");
    }
    if (count_ == 1) {
        const double y = 0.5 * (static_cast<double>(rect_[0].y) + static_cast<double>(rect_[1].y));
        return {first_x_, 0.0, y};
    }

    using ld = long double;
    const Slope min_line = diff(rect_[2], rect_[0]);
    const Slope max_line = diff(rect_[3], rect_[1]);
    const ld min_slope = static_cast<ld>(min_line.dy) / static_cast<ld>(min_line.dx);
    const ld max_slope = static_cast<ld>(max_line.dy) / static_cast<ld>(max_line.dx);
    const ld slope = 0.5L * (min_slope + max_slope);

    // x offsets relative to the segment start keep magnitudes small.
    auto rel = [&](Key x) {
        return x >= first_x_ ? static_cast<ld>(x - first_x_) : -static_cast<ld>(first_x_ - x);
    };

    ld intercept;
    const i128 denom = min_line.dx * max_line.dy - min_line.dy * max_line.dx;
    if (denom == 0) {
        // Parallel extreme lines: take the line halfway between them.
        const ld v0 = static_cast<ld>(rect_[0].y) - min_slope * rel(rect_[0].x);
        const ld v1 = static_cast<ld>(rect_[1].y) - max_slope * rel(rect_[1].x);
        intercept = 0.5L * (v0 + v1);
    } else {
        // Every line through the intersection of the extreme lines with a
        // slope between them is feasible.
        const Slope d = diff(rect_[1], rect_[0]);
        const i128 num = d.dx * max_line.dy - d.dy * max_line.dx;
        const ld t = static_cast<ld>(num) / static_cast<ld>(denom);
        const ld ix = rel(rect_[0].x) + t * static_cast<ld>(min_line.dx);
        const ld iy = static_cast<ld>(rect_[0].y) + t * static_cast<ld>(min_line.dy);
        intercept = iy - ix * slope;
    }

    if (!(slope >= 0)) {
        throw std::logic_error("fitted segment has negative slope");
    }
    return {first_x_, static_cast<double>(slope), static_cast<double>(intercept)};
}

PlaModel fit_epsilon_pla(std::span<const Point> points, std::uint64_t epsilon) {
    return fit(
        points.size(), epsilon, [&](std::size_t i) { return points[i].key; },
        [&](std::size_t i) { return points[i].rank; });
}

PlaModel fit_epsilon_pla(std::span<const Key> keys, std::uint64_t epsilon) {
    return fit(
        keys.size(), epsilon, [&](std::size_t i) { return keys[i]; },
        [](std::size_t i) { return static_cast<std::int64_t>(i); });
}

} // namespace pgmpp

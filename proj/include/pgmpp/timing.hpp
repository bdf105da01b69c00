#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pgmpp {

/// Monotonic wall-clock stopwatch.
class Stopwatch {
public:
    Stopwatch() noexcept : start_(Clock::now()) {}
    void restart() noexcept { start_ = Clock::now(); }
    [[nodiscard]] double elapsed_ns() const noexcept {
        return std::chrono::duration<double, std::nano>(Clock::now() - start_).count();
    }

private:
    using Clock = std::chrono::steady_clock;
    Clock::time_point start_;
};

/// Keeps `value` alive so the computation producing it is not elided.
template <typename T>
inline void do_not_optimize(const T& value) noexcept {
    asm volatile("" : : "r,m"(value) : "memory");
}

/// Median of a non-empty sample (mean of the middle pair for even sizes).
inline double median(std::vector<double> xs) {
    if (xs.empty()) {
        throw std::invalid_argument("median of an empty sample");
    }
    const std::size_t mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
    const double upper = xs[mid];
    if (xs.size() % 2 == 1) {
        return upper;
    }
    return 0.5 * (upper + *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid)));
}

/// Smallest observable nonzero step of the steady clock, in ns.
inline double timer_resolution_ns() {
    using Clock = std::chrono::steady_clock;
    double best = 1e18;
    for (int i = 0; i < 64; ++i) {
        const auto a = Clock::now();
        auto b = Clock::now();
        while (b == a) {
            b = Clock::now();
        }
        best = std::min(best, std::chrono::duration<double, std::nano>(b - a).count());
    }
    return best;
}

} // namespace pgmpp

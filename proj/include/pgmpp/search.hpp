#pragma once

#include <cstddef>
#include <span>

#include "pgmpp/pla.hpp"

namespace pgmpp {

/// Window length at or below which the hybrid search scans linearly.
struct SearchThreshold {
    std::size_t delta = 8;
};

/// Counts the keys below `key`; on a sorted window that is the lower bound.
/// The loop has no early exit so it compiles to compare-and-add.
inline std::size_t linear_lower_bound(std::span<const Key> window, Key key) noexcept {
    std::size_t count = 0;
    for (const Key k : window) {
        count += static_cast<std::size_t>(k < key);
    }
    return count;
}

/// Number of keys <= `key`.
inline std::size_t linear_upper_bound(std::span<const Key> window, Key key) noexcept {
    std::size_t count = 0;
    for (const Key k : window) {
        count += static_cast<std::size_t>(k <= key);
    }
    return count;
}

/// Binary lower bound with a select instead of a branch in the loop; the
/// trip count depends only on the window length.
inline std::size_t branchless_lower_bound(std::span<const Key> window, Key key) noexcept {
    std::size_t n = window.size();
    if (n == 0) {
        return 0;
    }
    const Key* base = window.data();
    while (n > 1) {
        const std::size_t half = n / 2;
        base = (base[half] < key) ? base + half : base;
        n -= half;
    }
    return static_cast<std::size_t>(base - window.data()) + static_cast<std::size_t>(*base < key);
}

/// Upper-bound counterpart of branchless_lower_bound.
inline std::size_t branchless_upper_bound(std::span<const Key> window, Key key) noexcept {
    std::size_t n = window.size();
    if (n == 0) {
        return 0;
    }
    const Key* base = window.data();
    while (n > 1) {
        const std::size_t half = n / 2;
        base = (base[half] <= key) ? base + half : base;
        n -= half;
    }
    return static_cast<std::size_t>(base - window.data()) + static_cast<std::size_t>(*base <= key);
}

/// Dispatch rule of the hybrid search.
constexpr bool hybrid_uses_linear(std::size_t length, SearchThreshold threshold) noexcept {
    return length <= threshold.delta;
}

inline std::size_t hybrid_lower_bound(std::span<const Key> window, Key key,
                                      SearchThreshold threshold) noexcept {
    return hybrid_uses_linear(window.size(), threshold) ? linear_lower_bound(window, key)
                                                        : branchless_lower_bound(window, key);
}

inline std::size_t hybrid_upper_bound(std::span<const Key> window, Key key,
                                      SearchThreshold threshold) noexcept {
    return hybrid_uses_linear(window.size(), threshold) ? linear_upper_bound(window, key)
                                                        : branchless_upper_bound(window, key);
}

/// Largest index j in [max(0, center - radius), min(len - 1, center + radius)]
/// with level_keys[j] <= key, or the window's left edge when every window key
/// exceeds `key`. `center` is clamped into the array first.
/// Throws InvalidState on an empty level.
std::size_t predecessor_in_window(std::span<const Key> level_keys, std::size_t center,
                                  std::size_t radius, Key key, SearchThreshold threshold = {});

} // namespace pgmpp
